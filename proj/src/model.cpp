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

#include "lapda/model.hpp"

#include <cmath>
#include <random>

#include "lapda/errors.hpp"

namespace lapda {

namespace {

constexpr double kLogClamp = 1e-7;

Tensor gaussian(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

}  // namespace

std::string arch_name(GeneratorArch a) {
  return a == GeneratorArch::kMlp ? "mlp" : "conv2";
}

GeneratorArch arch_from_name(const std::string& name) {
  if (name == "mlp") return GeneratorArch::kMlp;
  if (name == "conv2") return GeneratorArch::kConv2;
  throw ConfigError("unknown generator arch '" + name + "'");
}

std::vector<Parameter*> GeneratorParams::trainable() {
  if (arch == GeneratorArch::kMlp) {
    return {&w1, &b1, &w2, &b2, &w3, &b3};
  }
  return {&c1w, &c1b, &bn1_gamma, &bn1_beta, &c2w, &c2b, &bn2_gamma,
          &bn2_beta, &f1w, &f1b, &f2w, &f2b};
}

std::vector<Parameter*> Model::feature_side_params() {
  std::vector<Parameter*> out = gen.trainable();
  for (Parameter* p : cls.trainable()) out.push_back(p);
  out.push_back(&log_sigma);
  return out;
}

std::vector<Parameter*> Model::discriminator_params() {
  return disc.trainable();
}

std::vector<Parameter*> Model::all_params() {
  std::vector<Parameter*> out = feature_side_params();
  for (Parameter* p : discriminator_params()) out.push_back(p);
  return out;
}

void Model::zero_grads() {
  for (Parameter* p : all_params()) p->zero_grad();
}

Model make_model(const ModelSpec& spec) {
  Model m;
  m.spec = spec;
  m.gen.arch = spec.arch;
  if (spec.arch == GeneratorArch::kMlp) {
    m.gen.w1 = Parameter("gen.w1", Tensor(spec.input_dim, spec.hidden));
    m.gen.b1 = Parameter("gen.b1", Tensor(1, spec.hidden));
    m.gen.w2 = Parameter("gen.w2", Tensor(spec.hidden, spec.hidden));
    m.gen.b2 = Parameter("gen.b2", Tensor(1, spec.hidden));
    m.gen.w3 = Parameter("gen.w3", Tensor(spec.hidden, spec.feature_dim));
    m.gen.b3 = Parameter("gen.b3", Tensor(1, spec.feature_dim));
  } else {
    m.gen.conv1 = Conv2dGeom{spec.in_c, spec.in_h, spec.in_w,
                             spec.conv_c1, 5, 2, 2};
    m.gen.conv2 = Conv2dGeom{spec.conv_c1, m.gen.conv1.out_h(),
                             m.gen.conv1.out_w(), spec.conv_c2, 5, 2, 2};
    const std::size_t k2 = 5 * 5;
    m.gen.c1w = Parameter("gen.c1w", Tensor(spec.conv_c1, spec.in_c * k2));
    m.gen.c1b = Parameter("gen.c1b", Tensor(1, spec.conv_c1));
    m.gen.bn1_gamma = Parameter("gen.bn1_gamma", Tensor(1, spec.conv_c1, 1.0));
    m.gen.bn1_beta = Parameter("gen.bn1_beta", Tensor(1, spec.conv_c1));
    m.gen.c2w = Parameter("gen.c2w", Tensor(spec.conv_c2, spec.conv_c1 * k2));
    m.gen.c2b = Parameter("gen.c2b", Tensor(1, spec.conv_c2));
    m.gen.bn2_gamma = Parameter("gen.bn2_gamma", Tensor(1, spec.conv_c2, 1.0));
    m.gen.bn2_beta = Parameter("gen.bn2_beta", Tensor(1, spec.conv_c2));
    const std::size_t flat =
        spec.conv_c2 * m.gen.conv2.out_h() * m.gen.conv2.out_w();
    m.gen.f1w = Parameter("gen.f1w", Tensor(flat, spec.conv_fc));
    m.gen.f1b = Parameter("gen.f1b", Tensor(1, spec.conv_fc));
    m.gen.f2w = Parameter("gen.f2w", Tensor(spec.conv_fc, spec.feature_dim));
    m.gen.f2b = Parameter("gen.f2b", Tensor(1, spec.feature_dim));
  }
  m.cls.w = Parameter("cls.w", Tensor(spec.feature_dim, spec.classes));
  m.cls.b = Parameter("cls.b", Tensor(1, spec.classes));
  m.disc.w1 = Parameter("disc.w1", Tensor(spec.feature_dim, spec.disc_hidden));
  m.disc.b1 = Parameter("disc.b1", Tensor(1, spec.disc_hidden));
  m.disc.w2 = Parameter("disc.w2", Tensor(spec.disc_hidden, 1));
  m.disc.b2 = Parameter("disc.b2", Tensor(1, 1));
  // log(1) = 0: bandwidth starts at 1 in every feature dimension.
  m.log_sigma = Parameter("sigma.log", Tensor(1, spec.feature_dim));
  return m;
}

Model init_model(const ModelSpec& spec, std::uint64_t seed) {
  Model m = make_model(spec);
  std::mt19937_64 rng(seed);
  auto he = [&](Parameter& p, std::size_t fan_in) {
    p.value = gaussian(rng, p.value.rows(), p.value.cols(),
                       std::sqrt(2.0 / static_cast<double>(fan_in)));
  };
  auto xavier = [&](Parameter& p, std::size_t fan_in) {
    p.value = gaussian(rng, p.value.rows(), p.value.cols(),
                       std::sqrt(1.0 / static_cast<double>(fan_in)));
  };
  if (spec.arch == GeneratorArch::kMlp) {
    he(m.gen.w1, spec.input_dim);
    he(m.gen.w2, spec.hidden);
    xavier(m.gen.w3, spec.hidden);
  } else {
    he(m.gen.c1w, spec.in_c * 25);
    he(m.gen.c2w, spec.conv_c1 * 25);
    he(m.gen.f1w, m.gen.f1w.value.rows());
    xavier(m.gen.f2w, spec.conv_fc);
  }
  xavier(m.cls.w, spec.feature_dim);
  he(m.disc.w1, spec.feature_dim);
  xavier(m.disc.w2, spec.disc_hidden);
  return m;
}

NodeId embed(Tape& tape, GeneratorParams& gen, NodeId x, bool training) {
  if (gen.arch == GeneratorArch::kMlp) {
    NodeId h1 = tape.relu(
        tape.add_row(tape.matmul(x, tape.param(gen.w1)), tape.param(gen.b1)));
    NodeId h2 = tape.relu(
        tape.add_row(tape.matmul(h1, tape.param(gen.w2)), tape.param(gen.b2)));
    return tape.add_row(tape.matmul(h2, tape.param(gen.w3)),
                        tape.param(gen.b3));
  }
  NodeId c1 = tape.conv2d(x, tape.param(gen.c1w), tape.param(gen.c1b),
                          gen.conv1);
  NodeId n1 = tape.batch_norm(c1, tape.param(gen.bn1_gamma),
                              tape.param(gen.bn1_beta), &gen.bn1,
                              gen.conv1.out_c,
                              gen.conv1.out_h() * gen.conv1.out_w(), training);
  NodeId a1 = tape.relu(n1);
  NodeId c2 = tape.conv2d(a1, tape.param(gen.c2w), tape.param(gen.c2b),
                          gen.conv2);
  NodeId n2 = tape.batch_norm(c2, tape.param(gen.bn2_gamma),
                              tape.param(gen.bn2_beta), &gen.bn2,
                              gen.conv2.out_c,
                              gen.conv2.out_h() * gen.conv2.out_w(), training);
  NodeId a2 = tape.relu(n2);
  NodeId h = tape.relu(
      tape.add_row(tape.matmul(a2, tape.param(gen.f1w)), tape.param(gen.f1b)));
  return tape.add_row(tape.matmul(h, tape.param(gen.f2w)),
                      tape.param(gen.f2b));
}

NodeId classify(Tape& tape, ClassifierParams& cls, NodeId features) {
  return tape.add_row(tape.matmul(features, tape.param(cls.w)),
                      tape.param(cls.b));
}

NodeId discriminate(Tape& tape, DiscriminatorParams& disc, NodeId features) {
  NodeId h = tape.relu(tape.add_row(tape.matmul(features, tape.param(disc.w1)),
                                    tape.param(disc.b1)));
  return tape.sigmoid(
      tape.add_row(tape.matmul(h, tape.param(disc.w2)), tape.param(disc.b2)));
}

NodeId cls_loss(Tape& tape, NodeId logits, NodeId y_onehot) {
  return tape.cross_entropy(logits, y_onehot);
}

NodeId dann_loss(Tape& tape, NodeId d_source, NodeId d_target) {
  const std::size_t ns = tape.value(d_source).rows();
  const std::size_t nt = tape.value(d_target).rows();
  NodeId source_term = tape.scalar_mul(
      tape.sum_all(tape.log_clamped(d_source, kLogClamp, 1.0 - kLogClamp)),
      1.0 / static_cast<double>(ns));
  NodeId ones = tape.constant(Tensor(nt, 1, 1.0));
  NodeId flipped = tape.sub(ones, d_target);
  NodeId target_term = tape.scalar_mul(
      tape.sum_all(tape.log_clamped(flipped, kLogClamp, 1.0 - kLogClamp)),
      1.0 / static_cast<double>(nt));
  return tape.add(source_term, target_term);
}

std::vector<double> entropy_weights(const Tensor& probs) {
  std::vector<double> rho(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    double sum = 0.0, h = 0.0;
    for (std::size_t j = 0; j < probs.cols(); ++j) {
      double v = probs.at(i, j);
      sum += v;
      if (v > 0.0) h -= v * std::log(v);
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw NumericError("entropy_weights: row " + std::to_string(i) +
                         " sums to " + std::to_string(sum) + ", expected 1");
    }
    double w = std::exp(1.0) * h * std::exp(-h);
    rho[i] = std::min(1.0, std::max(0.0, w));
  }
  return rho;
}

}  // namespace lapda
