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
// Persistence of every artifact the toolkit exchanges:
//
//   .slamtrace       binary activation traces (bridge interchange)
//   .slambank.json   direction banks
//   .slamnull.json   null statistics
//   .slamsae.json    SAE dictionaries
//   .slamplan.json   steering plans handed to an external backend
//   .slamlogits      logit matrices returned by an external backend
//
// Text formats are canonical JSON: keys sorted, floats in shortest
// round-trip form, float32 vectors as base64 of little-endian bytes. Saving
// the same object twice yields identical bytes. docs/formats.md has the
// byte-level layout.

#ifndef SLAM_IO_H_
#define SLAM_IO_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "slam/backend.h"
#include "slam/types.h"

namespace slam {

inline constexpr std::uint32_t kSchemaVersion = 1;
inline constexpr char kTraceMagic[8] = {'S', 'L', 'A', 'M', 'T', 'R', 'C', '\0'};

// Traces ---------------------------------------------------------------------

std::vector<std::uint8_t> SerializeTrace(const ActivationTrace& trace);
// Throws ParseError (truncated header, bad magic), VersionError, or
// DimensionError (payload size disagrees with header).
ActivationTrace DeserializeTrace(const std::vector<std::uint8_t>& bytes);

void SaveTrace(const ActivationTrace& trace, const std::filesystem::path& path);
ActivationTrace LoadTrace(const std::filesystem::path& path);

// Logit matrices returned by an external backend: magic, u32 version,
// u64 rows, u64 cols, then rows * cols little-endian float32.
inline constexpr char kLogitsMagic[8] = {'S', 'L', 'A', 'M', 'L', 'G', 'T', '\0'};
std::vector<std::uint8_t> SerializeLogits(const FloatMatrix& logits);
FloatMatrix DeserializeLogits(const std::vector<std::uint8_t>& bytes);

// Per-layer mean/std written next to a trace by an external producer.
struct LayerChecksum {
  double mean = 0.0;
  double std = 0.0;
};
struct TraceSidecar {
  std::size_t num_tokens = 0;
  std::map<LayerId, LayerChecksum> layers;
};

TraceSidecar ComputeSidecar(const ActivationTrace& trace);
void SaveSidecar(const TraceSidecar& sidecar, const std::filesystem::path& path);
TraceSidecar LoadSidecar(const std::filesystem::path& path);
// Max absolute deviation between the trace's own per-layer moments and the
// sidecar; throws InvariantError if a layer is missing on either side.
double SidecarDeviation(const ActivationTrace& trace,
                        const TraceSidecar& sidecar);

// Banks, nulls, SAEs -----------------------------------------------------------

std::string SerializeBank(const DirectionBank& bank);
// Throws ParseError (with byte offset), VersionError or InvariantError.
DirectionBank DeserializeBank(const std::string& text);
void SaveBank(const DirectionBank& bank, const std::filesystem::path& path);
DirectionBank LoadBank(const std::filesystem::path& path);

std::string SerializeNulls(const NullStats& nulls);
NullStats DeserializeNulls(const std::string& text);
void SaveNulls(const NullStats& nulls, const std::filesystem::path& path);
NullStats LoadNulls(const std::filesystem::path& path);

std::string SerializeSaes(const std::vector<SaeSpec>& saes);
std::vector<SaeSpec> DeserializeSaes(const std::string& text);
void SaveSaes(const std::vector<SaeSpec>& saes,
              const std::filesystem::path& path);
std::vector<SaeSpec> LoadSaes(const std::filesystem::path& path);

std::string SerializePlan(const SteeringPlan& plan);
SteeringPlan DeserializePlan(const std::string& text);

std::string SerializeSelectionSpec(const SelectionSpec& spec);
// Missing keys keep their defaults; unknown keys are rejected.
SelectionSpec DeserializeSelectionSpec(const std::string& text);

std::string DetectionResultToJson(const DetectionResult& result);

// Key files hold the hex-encoded secret, optionally followed by a key id on
// the second line.
WatermarkKey LoadKeyFile(const std::filesystem::path& path);
void SaveKeyFile(const WatermarkKey& key, const std::filesystem::path& path);

// Whole-file helpers; throw Error naming the path on I/O failure.
std::string ReadTextFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> ReadBinaryFile(const std::filesystem::path& path);
void WriteBinaryFile(const std::filesystem::path& path,
                     const std::vector<std::uint8_t>& bytes);

}  // namespace slam

#endif  // SLAM_IO_H_
