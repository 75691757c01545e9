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

#ifndef SLAM_LOG_H_
#define SLAM_LOG_H_

#include <string>
#include <vector>

namespace slam {

// Emits a warning line on stderr, or into the innermost active
// WarningCapture on the calling thread.
void LogWarning(const std::string& message);

// Redirects warnings raised on this thread while alive. Nestable.
class WarningCapture {
 public:
  WarningCapture();
  ~WarningCapture();
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }
  bool Contains(const std::string& needle) const;

 private:
  friend void LogWarning(const std::string& message);
  std::vector<std::string> messages_;
  WarningCapture* previous_;
};

// Silences stderr warnings process-wide (captures still receive them).
void SetWarningsQuiet(bool quiet);

}  // namespace slam

#endif  // SLAM_LOG_H_
