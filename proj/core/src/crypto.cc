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

#include "slam/crypto.h"

#include <sodium.h>

#include <bit>
#include <cstring>

#include "slam/error.h"

namespace slam {
namespace {

void EnsureSodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw Error("libsodium initialisation failed");
}

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

}  // namespace

Digest32 Sha256(std::span<const std::uint8_t> message) {
  EnsureSodium();
  Digest32 out;
  crypto_hash_sha256(out.data(), message.data(), message.size());
  return out;
}

Digest32 Sha256(std::string_view message) {
  return Sha256(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(message.data()), message.size()));
}

Digest32 HmacSha256(std::span<const std::uint8_t> key,
                    std::span<const std::uint8_t> message) {
  EnsureSodium();
  crypto_auth_hmacsha256_state state;
  crypto_auth_hmacsha256_init(&state, key.data(), key.size());
  crypto_auth_hmacsha256_update(&state, message.data(), message.size());
  Digest32 out;
  crypto_auth_hmacsha256_final(&state, out.data());
  return out;
}

std::string HexEncode(std::span<const std::uint8_t> bytes) {
  EnsureSodium();
  std::string out(bytes.size() * 2 + 1, '\0');
  sodium_bin2hex(out.data(), out.size(), bytes.data(), bytes.size());
  out.pop_back();
  return out;
}

std::vector<std::uint8_t> HexDecode(std::string_view hex) {
  EnsureSodium();
  std::vector<std::uint8_t> out(hex.size() / 2 + 1);
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_hex2bin(out.data(), out.size(), hex.data(), hex.size(), " \t\r\n",
                     &len, &end) != 0 ||
      end != hex.data() + hex.size()) {
    throw ArgumentError("malformed hex string");
  }
  out.resize(len);
  return out;
}

std::string Base64Encode(std::span<const std::uint8_t> bytes) {
  EnsureSodium();
  const int variant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_ENCODED_LEN(bytes.size(), variant), '\0');
  sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(),
                    variant);
  out.resize(std::strlen(out.c_str()));
  return out;
}

std::vector<std::uint8_t> Base64Decode(std::string_view text) {
  EnsureSodium();
  std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(),
                        nullptr, &len, &end,
                        sodium_base64_VARIANT_ORIGINAL) != 0 ||
      end != text.data() + text.size()) {
    throw ArgumentError("malformed base64 payload");
  }
  out.resize(len);
  return out;
}

void AppendU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void AppendU64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t LoadU64(std::span<const std::uint8_t> bytes) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[static_cast<std::size_t>(i)];
  return v;
}

std::vector<std::uint8_t> FloatsToBytes(std::span<const float> values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * 4);
  for (float f : values) AppendU32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

std::vector<float> BytesToFloats(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 4 != 0) {
    throw ArgumentError("float32 payload length is not a multiple of 4");
  }
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t v = 0;
    for (int b = 3; b >= 0; --b) v = (v << 8) | bytes[i * 4 + static_cast<std::size_t>(b)];
    out[i] = std::bit_cast<float>(v);
  }
  return out;
}

}  // namespace slam
