// Copyright 2026 The lapda Authors.
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

#ifndef LAPDA_DATA_HPP_
#define LAPDA_DATA_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lapda/tensor.hpp"

namespace lapda {

/// One domain's samples. Labels are optional: the target training split
/// never carries them. Label reads are counted so tests can audit that the
/// training path never touches labels it should not see.
class DomainDataset {
 public:
  DomainDataset() = default;
  DomainDataset(Tensor x, std::vector<int> labels, int classes, bool source);

  const Tensor& x() const { return x_; }
  std::size_t size() const { return x_.rows(); }
  int classes() const { return classes_; }
  bool is_source() const { return source_; }
  bool has_labels() const { return has_labels_; }

  const std::vector<int>& labels() const;
  int label(std::size_t i) const;
  void strip_labels();

  std::size_t label_reads() const { return label_reads_; }

 private:
  Tensor x_;
  std::vector<int> labels_;
  bool has_labels_ = false;
  int classes_ = 0;
  bool source_ = false;
  mutable std::size_t label_reads_ = 0;
};

// Two interleaved half circles mapped into the unit box; the target is the
// same draw rotated by `angle_deg` about its centroid. Labels: 0 outer,
// 1 inner, n/2 points each. `noise` is the Gaussian stddev in moon units
// (pre-scaling). n must be even.
std::pair<DomainDataset, DomainDataset> gen_two_moons(std::size_t n,
                                                      double angle_deg,
                                                      double noise,
                                                      std::uint64_t seed);

// C Gaussian clusters on a circle; the target is the same draw translated
// by `shift` (2-d). Labels round-robin so each class gets n/C points.
std::pair<DomainDataset, DomainDataset> gen_blobs(
    std::size_t n, int classes, const std::vector<double>& shift, double noise,
    std::uint64_t seed);

// Big-endian IDX pair (image magic 0x00000803, label magic 0x00000801).
// Pixels are scaled to [0, 1]. Throws FormatError on bad magic and when the
// image and label counts disagree.
DomainDataset load_idx(const std::string& images_path,
                       const std::string& labels_path, bool source);

// Writes an IDX pair back; pixel bytes are round(x * 255).
void save_idx(const Tensor& x, const std::vector<int>& labels,
              std::size_t rows, std::size_t cols,
              const std::string& images_path, const std::string& labels_path);

// Corner-aligned bilinear resize of row-flattened square images.
Tensor upscale(const Tensor& images, std::size_t in_h, std::size_t in_w,
               std::size_t out_h, std::size_t out_w);

/// Deterministic batch index source. Uniform mode draws without replacement
/// within epoch shuffles; balanced mode keeps per-class counts within one of
/// each other (requires labels).
class BatchSampler {
 public:
  BatchSampler(const DomainDataset& dataset, bool class_balanced,
               std::uint64_t seed);

  std::vector<std::size_t> draw(std::size_t size);

 private:
  const DomainDataset* dataset_;
  bool balanced_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> pool_;
  std::size_t cursor_ = 0;
  std::vector<std::vector<std::size_t>> class_pools_;
  std::vector<std::size_t> class_cursors_;
};

enum class ScenarioKind { kTwoMoonsRotate, kBlobsShift, kIdxPair };

std::string scenario_kind_name(ScenarioKind k);
ScenarioKind scenario_kind_from_name(const std::string& name);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::kTwoMoonsRotate;
  std::uint64_t seed = 1;
  std::size_t n_train = 1000;
  std::size_t n_val = 200;
  std::size_t n_test = 1000;
  // two-moons / blobs
  double angle_deg = 30.0;
  double noise = 0.1;
  int classes = 2;
  std::vector<double> shift = {0.15, 0.1};
  // idx-pair: paths, resolved against LAPDA_DATA_DIR when relative
  std::string source_images, source_labels;
  std::string target_images, target_labels;

  void validate() const;
};

struct Scenario {
  DomainDataset source_train;  // labeled
  DomainDataset target_train;  // labels stripped
  DomainDataset target_val;    // labeled, validation protocol only
  DomainDataset target_test;   // labeled, final metric only
  std::size_t input_dim = 0;
  int classes = 0;
};

Scenario build_scenario(const ScenarioSpec& spec);

// $LAPDA_DATA_DIR/<path> when the env var is set and the path is relative.
std::string resolve_data_path(const std::string& path);

Tensor one_hot(const std::vector<int>& labels, int classes);

}  // namespace lapda

#endif  // LAPDA_DATA_HPP_
