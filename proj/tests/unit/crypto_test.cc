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

#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "slam/crypto.h"
#include "slam/error.h"

namespace slam {
namespace {

std::vector<std::uint8_t> Bytes(std::string_view s) { return {s.begin(), s.end()}; }

// HMAC built from the SHA-256 primitive alone.
Digest32 HmacOracle(std::vector<std::uint8_t> key, const std::vector<std::uint8_t>& msg) {
  constexpr std::size_t kBlock = 64;
  if (key.size() > kBlock) {
    const Digest32 d = Sha256(key);
    key.assign(d.begin(), d.end());
  }
  key.resize(kBlock, 0);
  std::vector<std::uint8_t> inner;
  std::vector<std::uint8_t> outer;
  for (std::uint8_t b : key) {
    inner.push_back(b ^ 0x36);
    outer.push_back(b ^ 0x5c);
  }
  inner.insert(inner.end(), msg.begin(), msg.end());
  const Digest32 ih = Sha256(inner);
  outer.insert(outer.end(), ih.begin(), ih.end());
  return Sha256(outer);
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(HexEncode(Sha256(std::string_view("abc"))),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(HexEncode(Sha256(std::string_view(""))),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(HmacSha256, Rfc4231Case1) {
  const std::vector<std::uint8_t> key(20, 0x0b);
  EXPECT_EQ(HexEncode(HmacSha256(key, Bytes("Hi There"))),
            "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7");
}

TEST(HmacSha256, Rfc4231Case2) {
  EXPECT_EQ(HexEncode(HmacSha256(Bytes("Jefe"), Bytes("what do ya want for nothing?"))),
            "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
}

TEST(HmacSha256, Rfc4231Case6LongKey) {
  const std::vector<std::uint8_t> key(131, 0xaa);
  EXPECT_EQ(HexEncode(HmacSha256(
                key, Bytes("Test Using Larger Than Block-Size Key - Hash Key First"))),
            "60e431591ee0b67f0d8a26aacbf5b77f8e0bc6213728c5140546040f0ee37f54");
}

TEST(HmacSha256, MatchesIndependentConstruction) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint8_t> key(16 + rng() % 100);
    std::vector<std::uint8_t> msg(rng() % 200);
    for (auto& b : key) b = static_cast<std::uint8_t>(rng());
    for (auto& b : msg) b = static_cast<std::uint8_t>(rng());
    EXPECT_EQ(HmacSha256(key, msg), HmacOracle(key, msg));
  }
}

TEST(Encoding, HexRoundTripAndErrors) {
  const std::vector<std::uint8_t> v = {0x00, 0xff, 0x10, 0xab};
  EXPECT_EQ(HexEncode(v), "00ff10ab");
  EXPECT_EQ(HexDecode("00FF10ab"), v);
  EXPECT_THROW(HexDecode("abc"), Error);
  EXPECT_THROW(HexDecode("zz"), Error);
}

TEST(Encoding, Base64KnownVectors) {
  EXPECT_EQ(Base64Encode(Bytes("foobar")), "Zm9vYmFy");
  EXPECT_EQ(Base64Encode(Bytes("fo")), "Zm8=");
  EXPECT_EQ(Base64Decode("Zm9vYg=="), Bytes("foob"));
  EXPECT_THROW(Base64Decode("!!"), Error);
}

TEST(Encoding, LittleEndianIntegers) {
  std::vector<std::uint8_t> out;
  AppendU32(out, 0x01020304u);
  AppendU64(out, 0x0a0b0c0d0e0f1011ull);
  const std::vector<std::uint8_t> expected = {4, 3, 2, 1, 0x11, 0x10, 0x0f, 0x0e,
                                              0x0d, 0x0c, 0x0b, 0x0a};
  EXPECT_EQ(out, expected);
  EXPECT_EQ(LoadU64(std::span(out).subspan(4)), 0x0a0b0c0d0e0f1011ull);
}

TEST(Encoding, FloatBytesAreLittleEndianIeee) {
  const std::vector<float> v = {1.0f, -2.5f};
  const auto b = FloatsToBytes(v);
  const std::vector<std::uint8_t> expected = {0, 0, 0x80, 0x3f, 0, 0, 0x20, 0xc0};
  EXPECT_EQ(b, expected);
  EXPECT_EQ(BytesToFloats(b), v);
}

}  // namespace
}  // namespace slam
