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
// The `slam` command-line tool as a library so tests can drive it in
// process.

#ifndef SLAM_TOOLS_CLI_H_
#define SLAM_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace slam::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// args excludes the program name. Reports go to `out`, diagnostics and
// warnings to `err`.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Edit distance used for flag suggestions.
std::size_t Levenshtein(const std::string& a, const std::string& b);

}  // namespace slam::cli

#endif  // SLAM_TOOLS_CLI_H_
