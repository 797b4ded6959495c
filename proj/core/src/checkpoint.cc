// Copyright 2026 The CaPE Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cape/checkpoint.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cape {
namespace {

using Json = nlohmann::ordered_json;

constexpr char kMagic[4] = {'C', 'A', 'P', 'E'};
constexpr uint8_t kVersion = 0x01;
constexpr size_t kPreambleSize = sizeof(kMagic) + 1 + 8;

void PutU64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint64_t GetU64(std::string_view in) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<uint8_t>(in[i]);
  return v;
}

void PutF32(std::string& out, float f) {
  const uint32_t bits = std::bit_cast<uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

float GetF32(const char* p) {
  uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | static_cast<uint8_t>(p[i]);
  return std::bit_cast<float>(bits);
}

std::string FormatAlpha(double alpha) {
  std::ostringstream os;
  os.precision(17);
  os << alpha;
  return os.str();
}

std::string ParentName(const Checkpoint& ckpt, const char* role) {
  auto it = ckpt.metadata.find("name");
  return it == ckpt.metadata.end() ? std::string(role) : it->second;
}

void RequireFiniteAlpha(double alpha) {
  if (!std::isfinite(alpha)) throw ValidationError("mixing coefficient must be finite");
}

// Applies fn(i, out) over every tensor of `shape_source`, producing a new
// checkpoint with the same names and shapes.
template <typename Fn>
Checkpoint MapElements(const Checkpoint& shape_source, Fn fn) {
  Checkpoint out;
  for (const auto& [name, tensor] : shape_source.entries) {
    Tensor t{tensor.shape, std::vector<float>(tensor.data.size())};
    for (size_t i = 0; i < t.data.size(); ++i) t.data[i] = fn(name, i);
    out.entries.emplace(name, std::move(t));
  }
  return out;
}

}  // namespace

uint64_t Tensor::ElementCount() const {
  uint64_t n = 1;
  for (uint64_t d : shape) n *= d;
  return n;
}

bool BitEqual(const Checkpoint& a, const Checkpoint& b) {
  if (a.metadata != b.metadata || a.entries.size() != b.entries.size()) return false;
  auto ia = a.entries.begin();
  auto ib = b.entries.begin();
  for (; ia != a.entries.end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.shape != ib->second.shape) return false;
    const auto& da = ia->second.data;
    const auto& db = ib->second.data;
    if (da.size() != db.size()) return false;
    if (!da.empty() && std::memcmp(da.data(), db.data(), da.size() * sizeof(float)) != 0)
      return false;
  }
  return true;
}

std::string SerializeCheckpoint(const Checkpoint& ckpt) {
  Json header = Json::array();
  uint64_t offset = 0;
  for (const auto& [name, tensor] : ckpt.entries) {
    if (name.empty()) throw CheckpointError(CheckpointError::Kind::kInvalidTensor, "empty tensor name");
    if (!tensor.Valid())
      throw CheckpointError(CheckpointError::Kind::kInvalidTensor,
                            "tensor '" + name + "' data length does not match its shape");
    Json entry;
    entry["name"] = name;
    entry["shape"] = tensor.shape;
    entry["offset"] = offset;
    entry["length"] = tensor.data.size();
    header.push_back(std::move(entry));
    offset += tensor.data.size() * sizeof(float);
  }
  std::string header_text, meta_text;
  try {
    header_text = header.dump();
  } catch (const nlohmann::json::exception&) {
    throw CheckpointError(CheckpointError::Kind::kInvalidTensor, "tensor name is not valid UTF-8");
  }
  try {
    meta_text = nlohmann::json(ckpt.metadata).dump();
  } catch (const nlohmann::json::exception&) {
    throw CheckpointError(CheckpointError::Kind::kMalformedMetadata, "metadata is not valid UTF-8");
  }

  std::string out;
  out.reserve(kPreambleSize + header_text.size() + offset + meta_text.size());
  out.append(kMagic, sizeof(kMagic));
  out.push_back(static_cast<char>(kVersion));
  PutU64(out, header_text.size());
  out += header_text;
  for (const auto& [name, tensor] : ckpt.entries)
    for (float f : tensor.data) PutF32(out, f);
  out += meta_text;
  return out;
}

Checkpoint DeserializeCheckpoint(std::string_view bytes) {
  using Kind = CheckpointError::Kind;
  if (bytes.size() < kPreambleSize || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError(Kind::kMalformedHeader, "missing CAPE magic bytes");
  if (static_cast<uint8_t>(bytes[4]) != kVersion)
    throw CheckpointError(Kind::kMalformedHeader, "unsupported container version");
  const uint64_t header_len = GetU64(bytes.substr(5, 8));
  if (header_len > bytes.size() - kPreambleSize)
    throw CheckpointError(Kind::kMalformedHeader, "header length exceeds file size");

  Json header = Json::parse(bytes.substr(kPreambleSize, header_len), nullptr, false);
  if (header.is_discarded() || !header.is_array())
    throw CheckpointError(Kind::kMalformedHeader, "header is not a JSON array");

  struct Entry {
    std::string name;
    std::vector<uint64_t> shape;
    uint64_t offset;
    uint64_t length;
  };
  std::vector<Entry> entries;
  std::set<std::string> seen;
  uint64_t expected_offset = 0;
  for (const auto& item : header) {
    Entry e;
    try {
      e.name = item.at("name").get<std::string>();
      e.shape = item.at("shape").get<std::vector<uint64_t>>();
      e.offset = item.at("offset").get<uint64_t>();
      e.length = item.at("length").get<uint64_t>();
    } catch (const nlohmann::json::exception& ex) {
      throw CheckpointError(Kind::kMalformedHeader, std::string("bad header entry: ") + ex.what());
    }
    if (e.name.empty()) throw CheckpointError(Kind::kMalformedHeader, "empty tensor name");
    if (!seen.insert(e.name).second)
      throw CheckpointError(Kind::kDuplicateName, "duplicate tensor name '" + e.name + "'");
    if (!entries.empty() && entries.back().name > e.name)
      throw CheckpointError(Kind::kMalformedHeader, "header entries not sorted by name");
    if (Tensor{e.shape, {}}.ElementCount() != e.length)
      throw CheckpointError(Kind::kShapeMismatch,
                            "tensor '" + e.name + "' length does not match product of shape");
    if (e.offset != expected_offset)
      throw CheckpointError(Kind::kMalformedHeader,
                            "tensor '" + e.name + "' offset is not contiguous");
    expected_offset += e.length * sizeof(float);
    entries.push_back(std::move(e));
  }

  const std::string_view rest = bytes.substr(kPreambleSize + header_len);
  if (rest.size() < expected_offset)
    throw CheckpointError(Kind::kTruncatedData, "truncated data section");

  Checkpoint ckpt;
  for (auto& e : entries) {
    Tensor t{std::move(e.shape), std::vector<float>(e.length)};
    const char* p = rest.data() + e.offset;
    for (uint64_t i = 0; i < e.length; ++i) t.data[i] = GetF32(p + 4 * i);
    ckpt.entries.emplace(std::move(e.name), std::move(t));
  }

  nlohmann::json meta = nlohmann::json::parse(rest.substr(expected_offset), nullptr, false);
  if (meta.is_discarded() || !meta.is_object())
    throw CheckpointError(Kind::kMalformedMetadata, "metadata is not a JSON object");
  for (const auto& [key, value] : meta.items()) {
    if (!value.is_string())
      throw CheckpointError(Kind::kMalformedMetadata, "metadata value for '" + key + "' is not a string");
    ckpt.metadata.emplace(key, value.get<std::string>());
  }
  return ckpt;
}

void SaveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = SerializeCheckpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
  return DeserializeCheckpoint(bytes);
}

void CheckCompatible(const Checkpoint& a, const Checkpoint& b) {
  auto ia = a.entries.begin();
  auto ib = b.entries.begin();
  while (ia != a.entries.end() || ib != b.entries.end()) {
    if (ib == b.entries.end() || (ia != a.entries.end() && ia->first < ib->first))
      throw CheckpointError(CheckpointError::Kind::kIncompatible,
                            "tensor '" + ia->first + "' missing from second checkpoint");
    if (ia == a.entries.end() || ib->first < ia->first)
      throw CheckpointError(CheckpointError::Kind::kIncompatible,
                            "tensor '" + ib->first + "' missing from first checkpoint");
    if (ia->second.shape != ib->second.shape)
      throw CheckpointError(CheckpointError::Kind::kIncompatible,
                            "tensor '" + ia->first + "' has mismatched shapes");
    ++ia;
    ++ib;
  }
}

bool Compatible(const Checkpoint& a, const Checkpoint& b) {
  try {
    CheckCompatible(a, b);
    return true;
  } catch (const CheckpointError&) {
    return false;
  }
}

Checkpoint CapeMerge(const Checkpoint& base, const Checkpoint& expert,
                     const Checkpoint& anti, double alpha) {
  RequireFiniteAlpha(alpha);
  CheckCompatible(base, expert);
  CheckCompatible(base, anti);
  Checkpoint out;
  if (alpha == 0.0) {
    out.entries = base.entries;
  } else {
    out = MapElements(base, [&](const std::string& name, size_t i) {
      const double b = base.entries.at(name).data[i];
      const double e = expert.entries.at(name).data[i];
      const double a = anti.entries.at(name).data[i];
      return static_cast<float>(b + alpha * (e - a));
    });
  }
  out.metadata = base.metadata;
  out.metadata["merge"] = "cape";
  out.metadata["alpha"] = FormatAlpha(alpha);
  out.metadata["parent"] = ParentName(base, "base") + "," + ParentName(expert, "expert") + "," +
                           ParentName(anti, "anti");
  out.metadata.erase("name");
  return out;
}

Checkpoint WiseFtMerge(const Checkpoint& base, const Checkpoint& expert, double alpha) {
  RequireFiniteAlpha(alpha);
  CheckCompatible(base, expert);
  Checkpoint out = MapElements(base, [&](const std::string& name, size_t i) {
    const double b = base.entries.at(name).data[i];
    const double e = expert.entries.at(name).data[i];
    return static_cast<float>((1.0 - alpha) * b + alpha * e);
  });
  out.metadata = base.metadata;
  out.metadata["merge"] = "wiseft";
  out.metadata["alpha"] = FormatAlpha(alpha);
  out.metadata["parent"] = ParentName(base, "base") + "," + ParentName(expert, "expert");
  out.metadata.erase("name");
  return out;
}

Checkpoint AverageMerge(std::span<const Checkpoint> ckpts) {
  if (ckpts.empty()) throw ValidationError("average merge needs at least one checkpoint");
  for (size_t k = 1; k < ckpts.size(); ++k) CheckCompatible(ckpts[0], ckpts[k]);
  const double n = static_cast<double>(ckpts.size());
  Checkpoint out = MapElements(ckpts[0], [&](const std::string& name, size_t i) {
    double sum = 0.0;
    for (const auto& c : ckpts) sum += c.entries.at(name).data[i];
    return static_cast<float>(sum / n);
  });
  out.metadata = ckpts[0].metadata;
  out.metadata["merge"] = "average";
  std::string parents;
  for (size_t k = 0; k < ckpts.size(); ++k) {
    if (k) parents += ",";
    parents += ParentName(ckpts[k], ("input" + std::to_string(k)).c_str());
  }
  out.metadata["parent"] = parents;
  out.metadata.erase("alpha");
  out.metadata.erase("name");
  return out;
}

double DiffNorm(const Checkpoint& a, const Checkpoint& b) {
  CheckCompatible(a, b);
  double sum = 0.0;
  for (const auto& [name, ta] : a.entries) {
    const auto& tb = b.entries.at(name);
    for (size_t i = 0; i < ta.data.size(); ++i) {
      const double d = static_cast<double>(ta.data[i]) - tb.data[i];
      sum += d * d;
    }
  }
  return std::sqrt(sum);
}

}  // namespace cape
