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

#ifndef CAPE_CHECKPOINT_H_
#define CAPE_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cape/errors.h"

namespace cape {

// Dense float32 tensor, row-major. An empty shape is a scalar (one element).
struct Tensor {
  std::vector<uint64_t> shape;
  std::vector<float> data;

  static Tensor Scalar(float value) { return Tensor{{}, {value}}; }

  uint64_t ElementCount() const;
  bool Valid() const { return data.size() == ElementCount(); }
};

// Named tensors in lexicographic order plus free-form string metadata.
// std::map gives the canonical order used for serialization and merging.
struct Checkpoint {
  std::map<std::string, Tensor> entries;
  std::map<std::string, std::string> metadata;
};

// Compares names, shapes, float bit patterns and metadata.
bool BitEqual(const Checkpoint& a, const Checkpoint& b);

class CheckpointError : public ValidationError {
 public:
  enum class Kind {
    kMalformedHeader,
    kMalformedMetadata,
    kTruncatedData,
    kDuplicateName,
    kShapeMismatch,
    kInvalidTensor,
    kIncompatible,
  };

  CheckpointError(Kind kind, const std::string& what)
      : ValidationError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Container layout (all integers little-endian):
//   "CAPE" 0x01 | u64 header_len | header JSON | float32 data | metadata JSON
// The header is a JSON array of {name, shape, offset, length} sorted by name;
// offsets are byte offsets into the data section, contiguous and gap-free.
// The metadata JSON object runs to end of file.
std::string SerializeCheckpoint(const Checkpoint& ckpt);
Checkpoint DeserializeCheckpoint(std::string_view bytes);

void SaveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

// Throws CheckpointError(kIncompatible) naming the first offending tensor in
// lexicographic order unless both checkpoints have the same names and shapes.
void CheckCompatible(const Checkpoint& a, const Checkpoint& b);
bool Compatible(const Checkpoint& a, const Checkpoint& b);

// base + alpha * (expert - anti), accumulated in double per element.
// alpha == 0 returns the base tensors unchanged.
Checkpoint CapeMerge(const Checkpoint& base, const Checkpoint& expert,
                     const Checkpoint& anti, double alpha);

// (1 - alpha) * base + alpha * expert.
Checkpoint WiseFtMerge(const Checkpoint& base, const Checkpoint& expert,
                       double alpha);

// Elementwise arithmetic mean of a nonempty list.
Checkpoint AverageMerge(std::span<const Checkpoint> ckpts);

// Euclidean norm of the concatenated elementwise differences, summed in
// canonical (name, element) order.
double DiffNorm(const Checkpoint& a, const Checkpoint& b);

}  // namespace cape

#endif  // CAPE_CHECKPOINT_H_
