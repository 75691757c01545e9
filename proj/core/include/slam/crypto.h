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
// Thin wrappers over libsodium for hashing and byte encodings.

#ifndef SLAM_CRYPTO_H_
#define SLAM_CRYPTO_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace slam {

using Digest32 = std::array<std::uint8_t, 32>;

Digest32 Sha256(std::span<const std::uint8_t> message);
Digest32 Sha256(std::string_view message);
Digest32 HmacSha256(std::span<const std::uint8_t> key,
                    std::span<const std::uint8_t> message);

std::string HexEncode(std::span<const std::uint8_t> bytes);
// Throws ArgumentError on odd length or non-hex characters.
std::vector<std::uint8_t> HexDecode(std::string_view hex);

// Standard alphabet with padding.
std::string Base64Encode(std::span<const std::uint8_t> bytes);
// Throws ArgumentError on malformed input.
std::vector<std::uint8_t> Base64Decode(std::string_view text);

// Little-endian helpers used by every binary framing in the project.
void AppendU32(std::vector<std::uint8_t>& out, std::uint32_t v);
void AppendU64(std::vector<std::uint8_t>& out, std::uint64_t v);
std::uint64_t LoadU64(std::span<const std::uint8_t> bytes);

// float32 <-> little-endian bytes.
std::vector<std::uint8_t> FloatsToBytes(std::span<const float> values);
std::vector<float> BytesToFloats(std::span<const std::uint8_t> bytes);

}  // namespace slam

#endif  // SLAM_CRYPTO_H_
