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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "lapda/data.hpp"
#include "lapda/errors.hpp"
#include "lapda/linalg.hpp"

using namespace lapda;

namespace {

void write_bytes(const std::string& path, const std::vector<unsigned char>& b) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
}

std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("two moons") {
  SUBCASE("zero rotation leaves the target identical to the source") {
    auto [src, tgt] = gen_two_moons(40, 0.0, 0.1, 7);
    CHECK(max_abs_diff(src.x(), tgt.x()) == 0.0);
  }

  SUBCASE("rotation preserves the centroid") {
    auto [src, tgt] = gen_two_moons(200, 30.0, 0.1, 7);
    double sx = 0, sy = 0, tx = 0, ty = 0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      sx += src.x().at(i, 0);
      sy += src.x().at(i, 1);
      tx += tgt.x().at(i, 0);
      ty += tgt.x().at(i, 1);
    }
    CHECK(std::abs(sx - tx) / 200.0 < 1e-9);
    CHECK(std::abs(sy - ty) / 200.0 < 1e-9);
  }

  SUBCASE("exactly n/2 points per class") {
    auto [src, tgt] = gen_two_moons(100, 15.0, 0.05, 3);
    int c0 = 0, c1 = 0;
    for (int l : src.labels()) (l == 0 ? c0 : c1)++;
    CHECK(c0 == 50);
    CHECK(c1 == 50);
    CHECK(tgt.labels().size() == 100);
  }

  SUBCASE("pure function of the seed") {
    auto a = gen_two_moons(60, 30.0, 0.1, 5);
    auto b = gen_two_moons(60, 30.0, 0.1, 5);
    auto c = gen_two_moons(60, 30.0, 0.1, 6);
    CHECK(max_abs_diff(a.first.x(), b.first.x()) == 0.0);
    CHECK(max_abs_diff(a.first.x(), c.first.x()) != 0.0);
  }

  SUBCASE("odd or tiny n is rejected") {
    CHECK_THROWS_AS(gen_two_moons(41, 0.0, 0.1, 1), ShapeError);
    CHECK_THROWS_AS(gen_two_moons(0, 0.0, 0.1, 1), ShapeError);
  }
}

TEST_CASE("blobs") {
  SUBCASE("zero shift leaves the domains identical") {
    auto [src, tgt] = gen_blobs(60, 3, {0.0, 0.0}, 0.05, 11);
    CHECK(max_abs_diff(src.x(), tgt.x()) == 0.0);
  }

  SUBCASE("per-class mean difference equals the shift") {
    const std::vector<double> shift = {0.2, -0.1};
    auto [src, tgt] = gen_blobs(90, 3, shift, 0.05, 12);
    for (int k = 0; k < 3; ++k) {
      double dx = 0, dy = 0;
      int count = 0;
      for (std::size_t i = 0; i < src.size(); ++i) {
        if (src.label(i) != k) continue;
        dx += tgt.x().at(i, 0) - src.x().at(i, 0);
        dy += tgt.x().at(i, 1) - src.x().at(i, 1);
        ++count;
      }
      CHECK(count == 30);
      CHECK(std::abs(dx / count - shift[0]) < 1e-12);
      CHECK(std::abs(dy / count - shift[1]) < 1e-12);
    }
  }

  SUBCASE("labels cover the classes uniformly") {
    auto [src, tgt] = gen_blobs(100, 5, {0.1, 0.0}, 0.02, 13);
    std::vector<int> counts(5, 0);
    for (int l : src.labels()) counts[l]++;
    for (int c : counts) CHECK(c == 20);
  }

  SUBCASE("fewer than two classes is rejected") {
    CHECK_THROWS_AS(gen_blobs(10, 1, {0.0, 0.0}, 0.1, 1), ShapeError);
  }
}

TEST_CASE("idx loading") {
  const std::string img_path = "/tmp/lapda_test_images.idx";
  const std::string lab_path = "/tmp/lapda_test_labels.idx";

  SUBCASE("handcrafted 1x2x2 file decodes to the expected values") {
    write_bytes(img_path, {0x00, 0x00, 0x08, 0x03,  // image magic
                           0x00, 0x00, 0x00, 0x01,  // count 1
                           0x00, 0x00, 0x00, 0x02,  // rows 2
                           0x00, 0x00, 0x00, 0x02,  // cols 2
                           0x00, 0x40, 0x80, 0xFF});
    write_bytes(lab_path, {0x00, 0x00, 0x08, 0x01,  // label magic
                           0x00, 0x00, 0x00, 0x01,  // count 1
                           0x07});
    DomainDataset d = load_idx(img_path, lab_path, true);
    CHECK(d.size() == 1);
    CHECK(d.x().cols() == 4);
    CHECK(d.x()[0] == 0.0);
    CHECK(d.x()[1] == doctest::Approx(64.0 / 255.0).epsilon(1e-12));
    CHECK(d.x()[1] == doctest::Approx(0.2510).epsilon(1e-3));
    CHECK(d.x()[2] == doctest::Approx(128.0 / 255.0).epsilon(1e-12));
    CHECK(d.x()[2] == doctest::Approx(0.5020).epsilon(1e-3));
    CHECK(d.x()[3] == 1.0);
    CHECK(d.label(0) == 7);
  }

  SUBCASE("wrong magic raises FormatError naming expected and found") {
    write_bytes(img_path, {0x00, 0x00, 0x08, 0x02, 0x00, 0x00, 0x00, 0x00,
                           0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00});
    CHECK_THROWS_WITH_AS(load_idx(img_path, lab_path, true),
                         doctest::Contains("0x00000802"), FormatError);
  }

  SUBCASE("count mismatch between files raises FormatError") {
    write_bytes(img_path, {0x00, 0x00, 0x08, 0x03, 0x00, 0x00, 0x00, 0x02,
                           0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01,
                           0x10, 0x20});
    write_bytes(lab_path, {0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x01,
                           0x03});
    CHECK_THROWS_AS(load_idx(img_path, lab_path, true), FormatError);
  }

  SUBCASE("load then save reproduces the byte stream exactly") {
    std::vector<unsigned char> img_bytes = {
        0x00, 0x00, 0x08, 0x03, 0x00, 0x00, 0x00, 0x03,
        0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02};
    for (int i = 0; i < 12; ++i) {
      img_bytes.push_back(static_cast<unsigned char>((i * 37 + 11) % 256));
    }
    std::vector<unsigned char> lab_bytes = {0x00, 0x00, 0x08, 0x01,
                                            0x00, 0x00, 0x00, 0x03,
                                            0x01, 0x05, 0x09};
    write_bytes(img_path, img_bytes);
    write_bytes(lab_path, lab_bytes);
    DomainDataset d = load_idx(img_path, lab_path, true);

    const std::string img2 = img_path + ".resaved";
    const std::string lab2 = lab_path + ".resaved";
    save_idx(d.x(), d.labels(), 2, 2, img2, lab2);
    CHECK(read_bytes(img2) == img_bytes);
    CHECK(read_bytes(lab2) == lab_bytes);
    std::remove(img2.c_str());
    std::remove(lab2.c_str());
  }

  std::remove(img_path.c_str());
  std::remove(lab_path.c_str());
}

TEST_CASE("bilinear upscale") {
  SUBCASE("constant images stay constant") {
    Tensor img(2, 16, 0.37);
    Tensor up = upscale(img, 4, 4, 7, 7);
    CHECK(up.cols() == 49);
    for (std::size_t i = 0; i < up.size(); ++i) {
      CHECK(up[i] == doctest::Approx(0.37).epsilon(1e-12));
    }
  }

  SUBCASE("output stays inside the input range") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Tensor img(1, 16 * 16);
    double lo = 1.0, hi = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i) {
      img[i] = dist(rng);
      lo = std::min(lo, img[i]);
      hi = std::max(hi, img[i]);
    }
    Tensor up = upscale(img, 16, 16, 28, 28);
    for (std::size_t i = 0; i < up.size(); ++i) {
      CHECK(up[i] >= lo - 1e-12);
      CHECK(up[i] <= hi + 1e-12);
    }
  }

  SUBCASE("corner pixels keep their values under corner alignment") {
    Tensor img(1, 4, {0.0, 1.0, 1.0, 0.0});  // 2x2 checkerboard
    Tensor up = upscale(img, 2, 2, 4, 4);
    CHECK(up[0] == 0.0);             // (0,0)
    CHECK(up[3] == 1.0);             // (0,3)
    CHECK(up[12] == 1.0);            // (3,0)
    CHECK(up[15] == 0.0);            // (3,3)
    // interior interpolates between 0 and 1
    CHECK(up[5] > 0.0);
    CHECK(up[5] < 1.0);
  }
}

TEST_CASE("batch sampler") {
  // 200 samples, 10 classes, 20 each
  Tensor x(200, 2);
  std::vector<int> labels(200);
  for (int i = 0; i < 200; ++i) labels[i] = i % 10;
  DomainDataset data(x, labels, 10, true);

  SUBCASE("a full-size uniform draw is a permutation") {
    BatchSampler sampler(data, false, 5);
    auto idx = sampler.draw(200);
    std::vector<std::size_t> sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 200; ++i) CHECK(sorted[i] == i);
  }

  SUBCASE("balanced draw of 130 over 10 classes gives 13 of each") {
    BatchSampler sampler(data, true, 5);
    auto idx = sampler.draw(130);
    std::vector<int> counts(10, 0);
    for (std::size_t i : idx) counts[data.label(i)]++;
    for (int c : counts) CHECK(c == 13);
  }

  SUBCASE("balanced draw of a non-multiple spreads the remainder") {
    BatchSampler sampler(data, true, 6);
    auto idx = sampler.draw(27);
    std::vector<int> counts(10, 0);
    for (std::size_t i : idx) counts[data.label(i)]++;
    for (int c : counts) {
      CHECK(c >= 2);
      CHECK(c <= 3);
    }
  }

  SUBCASE("same seed reproduces the same batch sequence") {
    BatchSampler a(data, true, 9), b(data, true, 9);
    for (int rep = 0; rep < 5; ++rep) {
      CHECK(a.draw(32) == b.draw(32));
    }
  }

  SUBCASE("oversized draws are rejected") {
    BatchSampler sampler(data, false, 5);
    CHECK_THROWS_AS(sampler.draw(201), ShapeError);
  }
}

TEST_CASE("scenario assembly") {
  SUBCASE("two-moons scenario quarantines target training labels") {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::kTwoMoonsRotate;
    spec.n_train = 64;
    spec.n_val = 32;
    spec.n_test = 32;
    spec.seed = 3;
    Scenario s = build_scenario(spec);
    CHECK(s.source_train.has_labels());
    CHECK_FALSE(s.target_train.has_labels());
    CHECK_THROWS_AS(s.target_train.labels(), ShapeError);
    CHECK(s.target_val.has_labels());
    CHECK(s.target_test.has_labels());
    CHECK(s.input_dim == 2);
    CHECK(s.classes == 2);
    CHECK(s.source_train.size() == 64);
    CHECK(s.target_val.size() == 32);
    CHECK(s.target_test.size() == 32);
    CHECK(s.target_train.label_reads() == 0);
  }

  SUBCASE("angle outside [0, 180) is rejected") {
    ScenarioSpec spec;
    spec.angle_deg = 180.0;
    CHECK_THROWS_AS(build_scenario(spec), ConfigError);
  }

  SUBCASE("idx-pair scenario splits, upscales and quarantines") {
    // source: 8 samples of 2x2; target: 24 samples of 4x4
    const std::string si = "/tmp/lapda_sc_si.idx", sl = "/tmp/lapda_sc_sl.idx";
    const std::string ti = "/tmp/lapda_sc_ti.idx", tl = "/tmp/lapda_sc_tl.idx";
    {
      Tensor sx(8, 4);
      std::vector<int> sy(8);
      for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 4; ++j) sx.at(i, j) = (i + j) % 3 * 0.5;
        sy[i] = i % 2;
      }
      save_idx(sx, sy, 2, 2, si, sl);
      Tensor tx(24, 16);
      std::vector<int> ty(24);
      for (int i = 0; i < 24; ++i) {
        for (int j = 0; j < 16; ++j) tx.at(i, j) = (i * j % 7) / 7.0;
        ty[i] = i % 2;
      }
      save_idx(tx, ty, 4, 4, ti, tl);
    }
    ScenarioSpec spec;
    spec.kind = ScenarioKind::kIdxPair;
    spec.source_images = si;
    spec.source_labels = sl;
    spec.target_images = ti;
    spec.target_labels = tl;
    spec.n_train = 8;
    spec.n_val = 8;
    spec.n_test = 8;
    Scenario s = build_scenario(spec);
    CHECK(s.source_train.size() == 8);
    CHECK(s.source_train.x().cols() == 16);  // upscaled 2x2 -> 4x4
    CHECK(s.target_train.size() == 8);
    CHECK_FALSE(s.target_train.has_labels());
    CHECK(s.target_val.size() == 8);
    CHECK(s.target_test.size() == 8);
    CHECK(s.input_dim == 16);
    for (const std::string& p : {si, sl, ti, tl}) std::remove(p.c_str());
  }
}

TEST_CASE("data dir resolution") {
  CHECK(resolve_data_path("/abs/path.idx") == "/abs/path.idx");
  setenv("LAPDA_DATA_DIR", "/data/root", 1);
  CHECK(resolve_data_path("mnist/train.idx") == "/data/root/mnist/train.idx");
  unsetenv("LAPDA_DATA_DIR");
  CHECK(resolve_data_path("mnist/train.idx") == "mnist/train.idx");
}

TEST_CASE("one hot encoding") {
  Tensor y = one_hot({1, 0, 2}, 3);
  CHECK(y.at(0, 1) == 1.0);
  CHECK(y.at(1, 0) == 1.0);
  CHECK(y.at(2, 2) == 1.0);
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) total += y[i];
  CHECK(total == 3.0);
  CHECK_THROWS_AS(one_hot({3}, 3), ShapeError);
}
