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

#include "slam/io.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "slam/crypto.h"
#include "slam/error.h"

namespace slam {
namespace {

using Json = nlohmann::json;

// Little-endian cursor over a byte buffer; every read checks bounds.
class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t U32(const char* what) {
    Need(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += 4;
    return v;
  }
  std::uint64_t U64(const char* what) {
    Need(8, what);
    const std::uint64_t v = LoadU64(std::span(bytes_).subspan(pos_, 8));
    pos_ += 8;
    return v;
  }
  std::string Bytes(std::size_t n, const char* what) {
    Need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void Need(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw ParseError(std::string("truncated header reading ") + what, pos_);
    }
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::string Dump(const Json& j) { return j.dump(2) + "\n"; }

Json Parse(const std::string& text, const char* what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what(), e.byte);
  }
}

void CheckHeader(const Json& j, const char* format) {
  if (!j.is_object()) throw ParseError(std::string(format) + ": top level must be an object", 0);
  if (!j.contains("format") || j["format"] != format) {
    throw ParseError(std::string("not a ") + format + " document", 0);
  }
  if (!j.contains("schema_version") || !j["schema_version"].is_number_unsigned()) {
    throw ParseError(std::string(format) + ": missing schema_version", 0);
  }
  const auto v = j["schema_version"].get<std::uint32_t>();
  if (v != kSchemaVersion) throw VersionError(v, kSchemaVersion);
}

const Json& Field(const Json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'", 0);
  return j.at(key);
}

std::string FloatsB64(std::span<const float> v) { return Base64Encode(FloatsToBytes(v)); }

std::vector<float> B64Floats(const Json& j, std::size_t expected, const char* what) {
  const auto bytes = Base64Decode(j.get<std::string>());
  if (bytes.size() != expected * 4) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(expected) +
                         " float32 values, payload has " + std::to_string(bytes.size()) +
                         " bytes");
  }
  return BytesToFloats(bytes);
}

template <typename Fn>
auto Guard(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const Error&) {
    throw;
  } catch (const Json::exception& e) {
    throw ParseError(std::string(what) + ": " + e.what(), 0);
  }
}

Json SelectionToJson(const SelectionSpec& s) {
  Json j;
  j["features_per_doc"] = s.features_per_doc;
  j["pool_size"] = s.pool_size;
  j["anchor_size"] = s.anchor_size;
  j["temperature"] = s.temperature;
  j["sentence_level"] = s.sentence_level;
  j["use_quality_weight"] = s.use_quality_weight;
  return j;
}

SelectionSpec SelectionFromJson(const Json& j) {
  if (!j.is_object()) throw ParseError("selection spec must be an object", 0);
  SelectionSpec s;
  for (const auto& [key, value] : j.items()) {
    if (key == "features_per_doc") s.features_per_doc = value.get<std::size_t>();
    else if (key == "pool_size") s.pool_size = value.get<std::size_t>();
    else if (key == "anchor_size") s.anchor_size = value.get<std::size_t>();
    else if (key == "temperature") s.temperature = value.get<double>();
    else if (key == "sentence_level") s.sentence_level = value.get<bool>();
    else if (key == "use_quality_weight") s.use_quality_weight = value.get<bool>();
    else throw ArgumentError("unknown selection spec key '" + key + "'");
  }
  s.Validate();
  return s;
}

}  // namespace

// --- traces -----------------------------------------------------------------

std::vector<std::uint8_t> SerializeTrace(const ActivationTrace& trace) {
  trace.Validate();
  std::vector<std::uint8_t> out(kTraceMagic, kTraceMagic + 8);
  AppendU32(out, kSchemaVersion);
  AppendU32(out, static_cast<std::uint32_t>(trace.model_id.size()));
  out.insert(out.end(), trace.model_id.begin(), trace.model_id.end());
  AppendU32(out, static_cast<std::uint32_t>(trace.layer_ids.size()));
  for (LayerId l : trace.layer_ids) AppendU32(out, static_cast<std::uint32_t>(l));
  AppendU32(out, static_cast<std::uint32_t>(trace.d_model));
  AppendU64(out, trace.num_tokens());
  AppendU64(out, trace.prompt_len);
  for (TokenId t : trace.tokens) AppendU32(out, t);
  for (LayerId l : trace.layer_ids) {
    const auto bytes = FloatsToBytes(trace.activations.at(l).data());
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

ActivationTrace DeserializeTrace(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  if (in.Bytes(8, "magic") != std::string(kTraceMagic, 8)) {
    throw ParseError("bad trace magic", 0);
  }
  const std::uint32_t version = in.U32("version");
  if (version != kSchemaVersion) throw VersionError(version, kSchemaVersion);
  ActivationTrace t;
  t.model_id = in.Bytes(in.U32("model_id length"), "model_id");
  const std::uint32_t n_layers = in.U32("layer count");
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    t.layer_ids.push_back(static_cast<LayerId>(in.U32("layer id")));
  }
  t.d_model = in.U32("d_model");
  const std::uint64_t n = in.U64("num_tokens");
  t.prompt_len = in.U64("prompt_len");
  if (n > in.remaining() / 4) {
    throw DimensionError("trace header declares " + std::to_string(n) +
                         " tokens but the file is too short");
  }
  for (std::uint64_t i = 0; i < n; ++i) t.tokens.push_back(in.U32("token"));
  const std::uint64_t expected =
      static_cast<std::uint64_t>(n_layers) * n * t.d_model * 4;
  if (in.remaining() != expected) {
    throw DimensionError("trace payload has " + std::to_string(in.remaining()) +
                         " bytes, header implies " + std::to_string(expected));
  }
  const std::size_t per_layer = n * t.d_model * 4;
  std::size_t offset = in.pos();
  for (LayerId l : t.layer_ids) {
    auto floats = BytesToFloats(std::span(bytes).subspan(offset, per_layer));
    t.activations.emplace(l, FloatMatrix(n, t.d_model, std::move(floats)));
    offset += per_layer;
  }
  t.Validate();
  return t;
}

std::vector<std::uint8_t> SerializeLogits(const FloatMatrix& logits) {
  std::vector<std::uint8_t> out(kLogitsMagic, kLogitsMagic + 8);
  AppendU32(out, kSchemaVersion);
  AppendU64(out, logits.rows());
  AppendU64(out, logits.cols());
  const auto bytes = FloatsToBytes(logits.data());
  out.insert(out.end(), bytes.begin(), bytes.end());
  return out;
}

FloatMatrix DeserializeLogits(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  if (in.Bytes(8, "magic") != std::string(kLogitsMagic, 8)) {
    throw ParseError("bad logits magic", 0);
  }
  const std::uint32_t version = in.U32("version");
  if (version != kSchemaVersion) throw VersionError(version, kSchemaVersion);
  const std::uint64_t rows = in.U64("rows");
  const std::uint64_t cols = in.U64("cols");
  if (cols != 0 && rows > in.remaining() / 4 / cols) {
    throw DimensionError("logits header declares more data than the file holds");
  }
  if (in.remaining() != rows * cols * 4) {
    throw DimensionError("logits payload has " + std::to_string(in.remaining()) +
                         " bytes, header implies " + std::to_string(rows * cols * 4));
  }
  return FloatMatrix(rows, cols, BytesToFloats(std::span(bytes).subspan(in.pos())));
}

void SaveTrace(const ActivationTrace& trace, const std::filesystem::path& path) {
  WriteBinaryFile(path, SerializeTrace(trace));
}

ActivationTrace LoadTrace(const std::filesystem::path& path) {
  return DeserializeTrace(ReadBinaryFile(path));
}

TraceSidecar ComputeSidecar(const ActivationTrace& trace) {
  TraceSidecar s;
  s.num_tokens = trace.num_tokens();
  for (const auto& [layer, m] : trace.activations) {
    double sum = 0.0;
    for (float v : m.data()) sum += v;
    const double n = static_cast<double>(m.data().size());
    const double mean = n > 0 ? sum / n : 0.0;
    double ss = 0.0;
    for (float v : m.data()) ss += (v - mean) * (v - mean);
    s.layers[layer] = {mean, n > 0 ? std::sqrt(ss / n) : 0.0};
  }
  return s;
}

void SaveSidecar(const TraceSidecar& sidecar, const std::filesystem::path& path) {
  Json j;
  j["format"] = "slamtrace-sidecar";
  j["schema_version"] = kSchemaVersion;
  j["num_tokens"] = sidecar.num_tokens;
  Json layers = Json::array();
  for (const auto& [l, c] : sidecar.layers) {
    layers.push_back({{"layer", l}, {"mean", c.mean}, {"std", c.std}});
  }
  j["layers"] = layers;
  WriteTextFile(path, Dump(j));
}

TraceSidecar LoadSidecar(const std::filesystem::path& path) {
  const Json j = Parse(ReadTextFile(path), "sidecar");
  return Guard("sidecar", [&] {
    CheckHeader(j, "slamtrace-sidecar");
    TraceSidecar s;
    s.num_tokens = Field(j, "num_tokens").get<std::size_t>();
    for (const auto& e : Field(j, "layers")) {
      s.layers[Field(e, "layer").get<LayerId>()] = {Field(e, "mean").get<double>(),
                                                    Field(e, "std").get<double>()};
    }
    return s;
  });
}

double SidecarDeviation(const ActivationTrace& trace, const TraceSidecar& sidecar) {
  if (sidecar.num_tokens != trace.num_tokens()) {
    throw InvariantError("sidecar token count disagrees with trace");
  }
  const TraceSidecar own = ComputeSidecar(trace);
  double worst = 0.0;
  for (const auto& [l, c] : own.layers) {
    const auto it = sidecar.layers.find(l);
    if (it == sidecar.layers.end()) {
      throw InvariantError("sidecar lacks layer " + std::to_string(l));
    }
    worst = std::max({worst, std::abs(c.mean - it->second.mean),
                      std::abs(c.std - it->second.std)});
  }
  for (const auto& [l, c] : sidecar.layers) {
    if (own.layers.count(l) == 0) {
      throw InvariantError("trace lacks sidecar layer " + std::to_string(l));
    }
  }
  return worst;
}

// --- banks ------------------------------------------------------------------

std::string SerializeBank(const DirectionBank& bank) {
  bank.Validate();
  Json j;
  j["format"] = "slambank";
  j["schema_version"] = kSchemaVersion;
  j["bank_id"] = bank.bank_id;
  j["model_id"] = bank.model_id;
  j["k"] = bank.k;
  j["anchor_size"] = bank.anchor_size;
  j["pool_size"] = bank.pool_size;
  j["created_with"] = bank.created_with;
  Json records = Json::array();
  for (const auto& r : bank.records) {
    Json e;
    e["feature_id"] = r.feature_id;
    e["phenomenon"] = r.phenomenon;
    e["layer"] = r.layer;
    e["mode_index"] = r.mode_index;
    e["polarity"] = PolarityName(r.polarity);
    e["delta_mu"] = r.delta_mu;
    e["purity"] = r.purity;
    e["consistency"] = r.consistency;
    e["composite"] = r.composite;
    e["quality_weight"] = r.quality_weight;
    e["d_model"] = r.direction.size();
    e["direction_f32le_b64"] = FloatsB64(r.direction);
    records.push_back(std::move(e));
  }
  j["records"] = std::move(records);
  return Dump(j);
}

DirectionBank DeserializeBank(const std::string& text) {
  const Json j = Parse(text, "bank");
  DirectionBank bank = Guard("bank", [&] {
    CheckHeader(j, "slambank");
    DirectionBank b;
    b.bank_id = Field(j, "bank_id").get<std::string>();
    b.model_id = Field(j, "model_id").get<std::string>();
    b.k = Field(j, "k").get<int>();
    b.anchor_size = Field(j, "anchor_size").get<std::size_t>();
    b.pool_size = Field(j, "pool_size").get<std::size_t>();
    b.created_with = Field(j, "created_with").get<std::string>();
    for (const auto& e : Field(j, "records")) {
      FeatureRecord r;
      r.feature_id = Field(e, "feature_id").get<std::string>();
      r.phenomenon = Field(e, "phenomenon").get<std::string>();
      r.layer = Field(e, "layer").get<LayerId>();
      r.mode_index = Field(e, "mode_index").get<int>();
      r.polarity = ParsePolarity(Field(e, "polarity").get<std::string>());
      r.delta_mu = Field(e, "delta_mu").get<double>();
      r.purity = Field(e, "purity").get<double>();
      r.consistency = Field(e, "consistency").get<double>();
      r.composite = Field(e, "composite").get<double>();
      r.quality_weight = Field(e, "quality_weight").get<double>();
      r.direction = B64Floats(Field(e, "direction_f32le_b64"),
                              Field(e, "d_model").get<std::size_t>(), r.feature_id.c_str());
      b.records.push_back(std::move(r));
    }
    return b;
  });
  bank.Validate();
  return bank;
}

void SaveBank(const DirectionBank& bank, const std::filesystem::path& path) {
  WriteTextFile(path, SerializeBank(bank));
}

DirectionBank LoadBank(const std::filesystem::path& path) {
  return DeserializeBank(ReadTextFile(path));
}

// --- nulls ------------------------------------------------------------------

std::string SerializeNulls(const NullStats& nulls) {
  nulls.Validate();
  Json j;
  j["format"] = "slamnull";
  j["schema_version"] = kSchemaVersion;
  Json per = Json::object();
  for (const auto& [id, n] : nulls.per_feature) {
    per[id] = {{"mu", n.mu}, {"sigma", n.sigma}};
  }
  j["per_feature"] = std::move(per);
  j["mu_raw"] = nulls.mu_raw;
  j["sigma_raw"] = nulls.sigma_raw;
  j["fitted_on"] = nulls.fitted_on;
  j["key_digest"] = nulls.key_digest;
  j["bank_id"] = nulls.bank_id;
  j["selection"] = SelectionToJson(nulls.selection);
  return Dump(j);
}

NullStats DeserializeNulls(const std::string& text) {
  const Json j = Parse(text, "nulls");
  NullStats nulls = Guard("nulls", [&] {
    CheckHeader(j, "slamnull");
    NullStats n;
    for (const auto& [id, v] : Field(j, "per_feature").items()) {
      n.per_feature[id] = {Field(v, "mu").get<double>(), Field(v, "sigma").get<double>()};
    }
    n.mu_raw = Field(j, "mu_raw").get<double>();
    n.sigma_raw = Field(j, "sigma_raw").get<double>();
    n.fitted_on = Field(j, "fitted_on").get<std::size_t>();
    n.key_digest = Field(j, "key_digest").get<std::string>();
    n.bank_id = Field(j, "bank_id").get<std::string>();
    n.selection = SelectionFromJson(Field(j, "selection"));
    return n;
  });
  nulls.Validate();
  return nulls;
}

void SaveNulls(const NullStats& nulls, const std::filesystem::path& path) {
  WriteTextFile(path, SerializeNulls(nulls));
}

NullStats LoadNulls(const std::filesystem::path& path) {
  return DeserializeNulls(ReadTextFile(path));
}

// --- SAEs -------------------------------------------------------------------

std::string SerializeSaes(const std::vector<SaeSpec>& saes) {
  Json j;
  j["format"] = "slamsae";
  j["schema_version"] = kSchemaVersion;
  Json list = Json::array();
  for (const auto& s : saes) {
    s.Validate();
    list.push_back({{"sae_id", s.sae_id},
                    {"layer", s.layer},
                    {"n_features", s.n_features},
                    {"d_model", s.d_model},
                    {"encoder_f32le_b64", FloatsB64(s.encoder.data())},
                    {"encoder_bias_f32le_b64", FloatsB64(s.encoder_bias)},
                    {"decoder_f32le_b64", FloatsB64(s.decoder.data())}});
  }
  j["saes"] = std::move(list);
  return Dump(j);
}

std::vector<SaeSpec> DeserializeSaes(const std::string& text) {
  const Json j = Parse(text, "sae");
  return Guard("sae", [&] {
    CheckHeader(j, "slamsae");
    std::vector<SaeSpec> out;
    for (const auto& e : Field(j, "saes")) {
      SaeSpec s;
      s.sae_id = Field(e, "sae_id").get<std::string>();
      s.layer = Field(e, "layer").get<LayerId>();
      s.n_features = Field(e, "n_features").get<std::size_t>();
      s.d_model = Field(e, "d_model").get<std::size_t>();
      const std::size_t nf = s.n_features;
      const std::size_t d = s.d_model;
      s.encoder = FloatMatrix(nf, d, B64Floats(Field(e, "encoder_f32le_b64"), nf * d, "encoder"));
      s.encoder_bias = B64Floats(Field(e, "encoder_bias_f32le_b64"), nf, "encoder_bias");
      s.decoder = FloatMatrix(nf, d, B64Floats(Field(e, "decoder_f32le_b64"), nf * d, "decoder"));
      s.Validate();
      out.push_back(std::move(s));
    }
    return out;
  });
}

void SaveSaes(const std::vector<SaeSpec>& saes, const std::filesystem::path& path) {
  WriteTextFile(path, SerializeSaes(saes));
}

std::vector<SaeSpec> LoadSaes(const std::filesystem::path& path) {
  return DeserializeSaes(ReadTextFile(path));
}

// --- plans, specs, results --------------------------------------------------

std::string SerializePlan(const SteeringPlan& plan) {
  Json j;
  j["format"] = "slamplan";
  j["schema_version"] = kSchemaVersion;
  j["alpha"] = plan.alpha;
  j["apply_from_token"] = plan.apply_from_token;
  Json layers = Json::array();
  for (const auto& [l, v] : plan.per_layer) {
    layers.push_back({{"layer", l}, {"vector", v}});
  }
  j["layers"] = std::move(layers);
  return Dump(j);
}

SteeringPlan DeserializePlan(const std::string& text) {
  const Json j = Parse(text, "plan");
  return Guard("plan", [&] {
    CheckHeader(j, "slamplan");
    SteeringPlan p;
    p.alpha = Field(j, "alpha").get<double>();
    p.apply_from_token = Field(j, "apply_from_token").get<std::size_t>();
    std::size_t dim = 0;
    for (const auto& e : Field(j, "layers")) {
      const LayerId l = Field(e, "layer").get<LayerId>();
      auto v = Field(e, "vector").get<std::vector<double>>();
      if (dim == 0) dim = v.size();
      if (v.size() != dim) throw DimensionError("plan vectors disagree in length");
      if (!p.per_layer.emplace(l, std::move(v)).second) {
        throw ParseError("duplicate plan layer " + std::to_string(l), 0);
      }
    }
    return p;
  });
}

std::string SerializeSelectionSpec(const SelectionSpec& spec) {
  return Dump(SelectionToJson(spec));
}

SelectionSpec DeserializeSelectionSpec(const std::string& text) {
  const Json j = Parse(text, "selection spec");
  return Guard("selection spec", [&] { return SelectionFromJson(j); });
}

std::string DetectionResultToJson(const DetectionResult& r) {
  Json j;
  Json z = Json::object();
  for (const auto& [id, v] : r.per_feature_z) z[id] = v;
  j["per_feature_z"] = std::move(z);
  j["active_set"] = Json(std::vector<std::string>(r.active_set.begin(), r.active_set.end()));
  j["z_raw"] = r.z_raw;
  j["z_hat"] = r.z_hat;
  j["decision"] = r.decision;
  j["threshold"] = r.threshold;
  j["num_tokens_scored"] = r.num_tokens_scored;
  return Dump(j);
}

// --- keys and files ---------------------------------------------------------

WatermarkKey LoadKeyFile(const std::filesystem::path& path) {
  std::istringstream in(ReadTextFile(path));
  std::string hex;
  std::string id;
  std::getline(in, hex);
  std::getline(in, id);
  while (!id.empty() && std::isspace(static_cast<unsigned char>(id.back()))) id.pop_back();
  try {
    return WatermarkKey::FromHex(hex, id);
  } catch (const Error& e) {
    throw Error("invalid key file " + path.string() + ": " + e.what());
  }
}

void SaveKeyFile(const WatermarkKey& key, const std::filesystem::path& path) {
  WriteTextFile(path, HexEncode(key.secret) + "\n" + key.key_id + "\n");
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

std::vector<std::uint8_t> ReadBinaryFile(const std::filesystem::path& path) {
  const std::string s = ReadTextFile(path);
  return {s.begin(), s.end()};
}

void WriteBinaryFile(const std::filesystem::path& path,
                     const std::vector<std::uint8_t>& bytes) {
  WriteTextFile(path, std::string(bytes.begin(), bytes.end()));
}

}  // namespace slam
