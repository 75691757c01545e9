//
// Copyright 2026 The slam Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "slam/log.h"

#include <atomic>
#include <cstdio>
#include <mutex>

namespace slam {
namespace {

thread_local WarningCapture* current_capture = nullptr;
std::atomic<bool> quiet{false};
std::mutex stderr_mu;

}  // namespace

void LogWarning(const std::string& message) {
  if (current_capture != nullptr) {
    current_capture->messages_.push_back(message);
    return;
  }
  if (quiet.load()) return;
  std::lock_guard<std::mutex> lock(stderr_mu);
  std::fprintf(stderr, "warning: %s\n", message.c_str());
}

WarningCapture::WarningCapture() : previous_(current_capture) {
  current_capture = this;
}

WarningCapture::~WarningCapture() { current_capture = previous_; }

bool WarningCapture::Contains(const std::string& needle) const {
  for (const auto& m : messages_) {
    if (m.find(needle) != std::string::npos) return true;
  }
  return false;
}

void SetWarningsQuiet(bool q) { quiet.store(q); }

}  // namespace slam
