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

#include "lapda/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include "lapda/errors.hpp"

namespace lapda {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError("idx: truncated file while reading " + what);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::string hex32(std::uint32_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s = "0x";
  for (int shift = 28; shift >= 0; shift -= 4) {
    s += digits[(v >> shift) & 0xf];
  }
  return s;
}

// Rotates points about their centroid, in place.
void rotate_about_centroid(Tensor& x, double angle_deg) {
  if (angle_deg == 0.0) return;  // keep the zero-rotation case bit-exact
  const double theta = angle_deg * kPi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  double cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    cx += x.at(i, 0);
    cy += x.at(i, 1);
  }
  cx /= static_cast<double>(x.rows());
  cy /= static_cast<double>(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double dx = x.at(i, 0) - cx, dy = x.at(i, 1) - cy;
    x.at(i, 0) = cx + c * dx - s * dy;
    x.at(i, 1) = cy + s * dx + c * dy;
  }
}

}  // namespace

DomainDataset::DomainDataset(Tensor x, std::vector<int> labels, int classes,
                             bool source)
    : x_(std::move(x)),
      labels_(std::move(labels)),
      has_labels_(!labels_.empty()),
      classes_(classes),
      source_(source) {
  if (has_labels_ && labels_.size() != x_.rows()) {
    throw ShapeError("dataset: " + std::to_string(labels_.size()) +
                     " labels for " + std::to_string(x_.rows()) + " samples");
  }
  if (!x_.all_finite()) {
    throw NumericError("dataset: non-finite sample values");
  }
}

const std::vector<int>& DomainDataset::labels() const {
  if (!has_labels_) {
    throw ShapeError("dataset: labels requested from an unlabeled split");
  }
  ++label_reads_;
  return labels_;
}

int DomainDataset::label(std::size_t i) const {
  if (!has_labels_) {
    throw ShapeError("dataset: labels requested from an unlabeled split");
  }
  ++label_reads_;
  return labels_[i];
}

void DomainDataset::strip_labels() {
  labels_.clear();
  has_labels_ = false;
}

std::pair<DomainDataset, DomainDataset> gen_two_moons(std::size_t n,
                                                      double angle_deg,
                                                      double noise,
                                                      std::uint64_t seed) {
  if (n < 2 || n % 2 != 0) {
    throw ShapeError("two-moons: n must be even and >= 2, got " +
                     std::to_string(n));
  }
  if (noise < 0.0) throw ShapeError("two-moons: negative noise");
  const std::size_t half = n / 2;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Tensor x(n, 2);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < half; ++i) {
    const double t = half > 1 ? kPi * static_cast<double>(i) /
                                    static_cast<double>(half - 1)
                              : 0.0;
    double px = std::cos(t) + noise * gauss(rng);
    double py = std::sin(t) + noise * gauss(rng);
    x.at(i, 0) = (px + 1.0) / 3.0;
    x.at(i, 1) = (py + 0.5) / 3.0;
    labels[i] = 0;
    px = 1.0 - std::cos(t) + noise * gauss(rng);
    py = 0.5 - std::sin(t) + noise * gauss(rng);
    x.at(half + i, 0) = (px + 1.0) / 3.0;
    x.at(half + i, 1) = (py + 0.5) / 3.0;
    labels[half + i] = 1;
  }

  Tensor xt = x;
  rotate_about_centroid(xt, angle_deg);
  DomainDataset source(std::move(x), labels, 2, true);
  DomainDataset target(std::move(xt), labels, 2, false);
  return {std::move(source), std::move(target)};
}

std::pair<DomainDataset, DomainDataset> gen_blobs(
    std::size_t n, int classes, const std::vector<double>& shift, double noise,
    std::uint64_t seed) {
  if (classes < 2) throw ShapeError("blobs: need at least 2 classes");
  if (shift.size() != 2) throw ShapeError("blobs: shift must be 2-d");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Tensor x(n, 2);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int k = static_cast<int>(i % classes);
    const double ang = 2.0 * kPi * k / classes;
    x.at(i, 0) = 0.5 + 0.25 * std::cos(ang) + noise * gauss(rng);
    x.at(i, 1) = 0.5 + 0.25 * std::sin(ang) + noise * gauss(rng);
    labels[i] = k;
  }
  Tensor xt = x;
  for (std::size_t i = 0; i < n; ++i) {
    xt.at(i, 0) += shift[0];
    xt.at(i, 1) += shift[1];
  }
  DomainDataset source(std::move(x), labels, classes, true);
  DomainDataset target(std::move(xt), labels, classes, false);
  return {std::move(source), std::move(target)};
}

DomainDataset load_idx(const std::string& images_path,
                       const std::string& labels_path, bool source) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw FormatError("idx: cannot open " + images_path);
  std::uint32_t magic = read_be32(img, "image magic");
  if (magic != kImageMagic) {
    throw FormatError("idx: bad image magic in " + images_path +
                      ": expected " + hex32(kImageMagic) + ", found " +
                      hex32(magic));
  }
  const std::uint32_t count = read_be32(img, "image count");
  const std::uint32_t rows = read_be32(img, "image rows");
  const std::uint32_t cols = read_be32(img, "image cols");
  std::vector<unsigned char> pixels(std::size_t(count) * rows * cols);
  img.read(reinterpret_cast<char*>(pixels.data()),
           static_cast<std::streamsize>(pixels.size()));
  if (!img) throw FormatError("idx: truncated pixel data in " + images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError("idx: cannot open " + labels_path);
  magic = read_be32(lab, "label magic");
  if (magic != kLabelMagic) {
    throw FormatError("idx: bad label magic in " + labels_path +
                      ": expected " + hex32(kLabelMagic) + ", found " +
                      hex32(magic));
  }
  const std::uint32_t label_count = read_be32(lab, "label count");
  if (label_count != count) {
    throw FormatError("idx: " + std::to_string(count) + " images in " +
                      images_path + " but " + std::to_string(label_count) +
                      " labels in " + labels_path);
  }
  std::vector<unsigned char> raw_labels(label_count);
  lab.read(reinterpret_cast<char*>(raw_labels.data()),
           static_cast<std::streamsize>(raw_labels.size()));
  if (!lab) throw FormatError("idx: truncated label data in " + labels_path);

  Tensor x(count, std::size_t(rows) * cols);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    x[i] = static_cast<double>(pixels[i]) / 255.0;
  }
  std::vector<int> labels(raw_labels.begin(), raw_labels.end());
  int classes = 0;
  for (int l : labels) classes = std::max(classes, l + 1);
  return DomainDataset(std::move(x), std::move(labels), classes, source);
}

void save_idx(const Tensor& x, const std::vector<int>& labels,
              std::size_t rows, std::size_t cols,
              const std::string& images_path, const std::string& labels_path) {
  if (x.cols() != rows * cols) {
    throw ShapeError("save_idx: sample width " + std::to_string(x.cols()) +
                     " != " + std::to_string(rows) + "*" +
                     std::to_string(cols));
  }
  if (labels.size() != x.rows()) {
    throw ShapeError("save_idx: label count mismatch");
  }
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw FormatError("idx: cannot write " + images_path);
  write_be32(img, kImageMagic);
  write_be32(img, static_cast<std::uint32_t>(x.rows()));
  write_be32(img, static_cast<std::uint32_t>(rows));
  write_be32(img, static_cast<std::uint32_t>(cols));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = std::min(1.0, std::max(0.0, x[i]));
    unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0));
    img.write(reinterpret_cast<const char*>(&b), 1);
  }
  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError("idx: cannot write " + labels_path);
  write_be32(lab, kLabelMagic);
  write_be32(lab, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) {
    unsigned char b = static_cast<unsigned char>(l);
    lab.write(reinterpret_cast<const char*>(&b), 1);
  }
}

Tensor upscale(const Tensor& images, std::size_t in_h, std::size_t in_w,
               std::size_t out_h, std::size_t out_w) {
  if (images.cols() != in_h * in_w) {
    throw ShapeError("upscale: sample width " + std::to_string(images.cols()) +
                     " != " + std::to_string(in_h) + "*" +
                     std::to_string(in_w));
  }
  const double sy = out_h > 1 ? static_cast<double>(in_h - 1) / (out_h - 1) : 0.0;
  const double sx = out_w > 1 ? static_cast<double>(in_w - 1) / (out_w - 1) : 0.0;
  Tensor out(images.rows(), out_h * out_w);
  for (std::size_t n = 0; n < images.rows(); ++n) {
    const double* src = images.data() + n * images.cols();
    double* dst = out.data() + n * out.cols();
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const double fy = oy * sy;
      const std::size_t y0 = static_cast<std::size_t>(fy);
      const std::size_t y1 = std::min(y0 + 1, in_h - 1);
      const double wy = fy - static_cast<double>(y0);
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const double fx = ox * sx;
        const std::size_t x0 = static_cast<std::size_t>(fx);
        const std::size_t x1 = std::min(x0 + 1, in_w - 1);
        const double wx = fx - static_cast<double>(x0);
        const double top = src[y0 * in_w + x0] * (1.0 - wx) +
                           src[y0 * in_w + x1] * wx;
        const double bot = src[y1 * in_w + x0] * (1.0 - wx) +
                           src[y1 * in_w + x1] * wx;
        dst[oy * out_w + ox] = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

BatchSampler::BatchSampler(const DomainDataset& dataset, bool class_balanced,
                           std::uint64_t seed)
    : dataset_(&dataset), balanced_(class_balanced), rng_(seed) {
  if (balanced_) {
    class_pools_.resize(dataset.classes());
    const std::vector<int>& labels = dataset.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      class_pools_[labels[i]].push_back(i);
    }
    class_cursors_.assign(class_pools_.size(), 0);
    for (auto& pool : class_pools_) {
      std::shuffle(pool.begin(), pool.end(), rng_);
    }
  } else {
    pool_.resize(dataset.size());
    std::iota(pool_.begin(), pool_.end(), 0);
    std::shuffle(pool_.begin(), pool_.end(), rng_);
  }
}

std::vector<std::size_t> BatchSampler::draw(std::size_t size) {
  if (size > dataset_->size()) {
    throw ShapeError("sampler: batch size " + std::to_string(size) +
                     " exceeds dataset size " +
                     std::to_string(dataset_->size()));
  }
  std::vector<std::size_t> out;
  out.reserve(size);
  if (!balanced_) {
    if (cursor_ + size > pool_.size()) {
      std::shuffle(pool_.begin(), pool_.end(), rng_);
      cursor_ = 0;
    }
    out.assign(pool_.begin() + cursor_, pool_.begin() + cursor_ + size);
    cursor_ += size;
    return out;
  }
  const std::size_t c = class_pools_.size();
  std::vector<std::size_t> counts(c, size / c);
  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);
  for (std::size_t r = 0; r < size % c; ++r) counts[order[r]] += 1;
  for (std::size_t k = 0; k < c; ++k) {
    auto& pool = class_pools_[k];
    if (counts[k] > pool.size()) {
      throw ShapeError("sampler: class " + std::to_string(k) + " has only " +
                       std::to_string(pool.size()) + " samples, need " +
                       std::to_string(counts[k]));
    }
    for (std::size_t taken = 0; taken < counts[k]; ++taken) {
      if (class_cursors_[k] >= pool.size()) {
        std::shuffle(pool.begin(), pool.end(), rng_);
        class_cursors_[k] = 0;
      }
      out.push_back(pool[class_cursors_[k]++]);
    }
  }
  return out;
}

std::string scenario_kind_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::kTwoMoonsRotate: return "two-moons-rotate";
    case ScenarioKind::kBlobsShift: return "blobs-shift";
    case ScenarioKind::kIdxPair: return "idx-pair";
  }
  return "?";
}

ScenarioKind scenario_kind_from_name(const std::string& name) {
  if (name == "two-moons-rotate") return ScenarioKind::kTwoMoonsRotate;
  if (name == "blobs-shift") return ScenarioKind::kBlobsShift;
  if (name == "idx-pair") return ScenarioKind::kIdxPair;
  throw ConfigError("unknown scenario '" + name + "'");
}

void ScenarioSpec::validate() const {
  if (n_train == 0 || n_val == 0 || n_test == 0) {
    throw ConfigError("scenario: sample counts must be positive");
  }
  if (angle_deg < 0.0 || angle_deg >= 180.0) {
    throw ConfigError("scenario: angle must lie in [0, 180)");
  }
  if (noise < 0.0) throw ConfigError("scenario: negative noise");
  if (classes < 2) throw ConfigError("scenario: need at least 2 classes");
}

std::string resolve_data_path(const std::string& path) {
  if (path.empty() || path.front() == '/') return path;
  const char* dir = std::getenv("LAPDA_DATA_DIR");
  if (dir == nullptr || *dir == '\0') return path;
  std::string out(dir);
  if (out.back() != '/') out += '/';
  return out + path;
}

namespace {

// Draws `want` indices (without replacement) from a seeded shuffle.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

DomainDataset take(const DomainDataset& d, const std::vector<std::size_t>& idx,
                   std::size_t begin, std::size_t end, bool source) {
  Tensor x(end - begin, d.x().cols());
  std::vector<int> labels(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      x.at(i - begin, j) = d.x().at(idx[i], j);
    }
    labels[i - begin] = d.label(idx[i]);
  }
  return DomainDataset(std::move(x), std::move(labels), d.classes(), source);
}

Scenario assemble_synthetic(const ScenarioSpec& spec) {
  auto generate = [&](std::size_t count, std::uint64_t seed) {
    return spec.kind == ScenarioKind::kTwoMoonsRotate
               ? gen_two_moons(count, spec.angle_deg, spec.noise, seed)
               : gen_blobs(count, spec.classes, spec.shift, spec.noise, seed);
  };
  auto train_pair = generate(spec.n_train, spec.seed);
  auto val_pair = generate(spec.n_val, spec.seed + 1);
  auto test_pair = generate(spec.n_test, spec.seed + 2);

  Scenario s;
  s.source_train = std::move(train_pair.first);
  s.target_train = std::move(train_pair.second);
  s.target_train.strip_labels();
  s.target_val = std::move(val_pair.second);
  s.target_test = std::move(test_pair.second);
  s.input_dim = 2;
  s.classes = s.source_train.classes();
  return s;
}

Scenario assemble_idx_pair(const ScenarioSpec& spec) {
  DomainDataset source = load_idx(resolve_data_path(spec.source_images),
                                  resolve_data_path(spec.source_labels), true);
  DomainDataset target = load_idx(resolve_data_path(spec.target_images),
                                  resolve_data_path(spec.target_labels), false);
  if (source.classes() != target.classes()) {
    throw FormatError("idx-pair: class counts differ (" +
                      std::to_string(source.classes()) + " vs " +
                      std::to_string(target.classes()) + ")");
  }
  // Bring the source images up to the target resolution (16x16 USPS images
  // become 28x28).
  std::size_t src_side = static_cast<std::size_t>(
      std::lround(std::sqrt(static_cast<double>(source.x().cols()))));
  std::size_t tgt_side = static_cast<std::size_t>(
      std::lround(std::sqrt(static_cast<double>(target.x().cols()))));
  if (src_side * src_side != source.x().cols() ||
      tgt_side * tgt_side != target.x().cols()) {
    throw FormatError("idx-pair: non-square images are not supported");
  }
  Tensor source_x = source.x();
  if (src_side != tgt_side) {
    source_x = upscale(source_x, src_side, src_side, tgt_side, tgt_side);
  }
  DomainDataset source_scaled(std::move(source_x), source.labels(),
                              source.classes(), true);

  if (spec.n_train > source_scaled.size()) {
    throw ConfigError("idx-pair: n_train exceeds source size");
  }
  const std::size_t need_target = spec.n_train + spec.n_val + spec.n_test;
  if (need_target > target.size()) {
    throw ConfigError("idx-pair: target split needs " +
                      std::to_string(need_target) + " samples, file has " +
                      std::to_string(target.size()));
  }
  auto src_idx = shuffled_indices(source_scaled.size(), spec.seed);
  auto tgt_idx = shuffled_indices(target.size(), spec.seed + 1);

  Scenario s;
  s.source_train = take(source_scaled, src_idx, 0, spec.n_train, true);
  s.target_train = take(target, tgt_idx, 0, spec.n_train, false);
  s.target_train.strip_labels();
  s.target_val = take(target, tgt_idx, spec.n_train,
                      spec.n_train + spec.n_val, false);
  s.target_test = take(target, tgt_idx, spec.n_train + spec.n_val,
                       need_target, false);
  s.input_dim = target.x().cols();
  s.classes = target.classes();
  return s;
}

}  // namespace

Scenario build_scenario(const ScenarioSpec& spec) {
  spec.validate();
  if (spec.kind == ScenarioKind::kIdxPair) return assemble_idx_pair(spec);
  return assemble_synthetic(spec);
}

Tensor one_hot(const std::vector<int>& labels, int classes) {
  Tensor y(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw ShapeError("one_hot: label " + std::to_string(labels[i]) +
                       " outside [0, " + std::to_string(classes) + ")");
    }
    y.at(i, labels[i]) = 1.0;
  }
  return y;
}

}  // namespace lapda
