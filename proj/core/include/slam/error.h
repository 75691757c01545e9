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

#ifndef SLAM_ERROR_H_
#define SLAM_ERROR_H_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace slam {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Vector/matrix shapes disagree with the declared dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A persisted artifact could not be parsed. `offset` is the byte position
// at which the reader gave up.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

// The artifact carries a schema version this build does not understand.
class VersionError : public Error {
 public:
  VersionError(std::uint32_t found, std::uint32_t expected)
      : Error("unsupported schema version " + std::to_string(found) +
              " (expected " + std::to_string(expected) + ")"),
        found_(found) {}

  std::uint32_t found() const { return found_; }

 private:
  std::uint32_t found_;
};

// A domain invariant (unit norm, composite product, sorted order, ...) is
// violated.
class InvariantError : public Error {
 public:
  using Error::Error;
};

// Clipped mode projects to (numerically) zero through the decoder.
class DegenerateDirectionError : public Error {
 public:
  using Error::Error;
};

// Bad argument supplied by the caller.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Every candidate in the generation loop was rejected.
class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace slam

#endif  // SLAM_ERROR_H_
