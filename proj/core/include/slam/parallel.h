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

#ifndef SLAM_PARALLEL_H_
#define SLAM_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace slam {

// Runs fn(0..n-1) on up to `jobs` threads (0 = hardware concurrency).
// Each index runs exactly once; callers write results into per-index slots
// so the reduction order stays fixed. The first exception is rethrown after
// all workers stop.
void ParallelFor(std::size_t n, std::size_t jobs,
                 const std::function<void(std::size_t)>& fn);

}  // namespace slam

#endif  // SLAM_PARALLEL_H_
