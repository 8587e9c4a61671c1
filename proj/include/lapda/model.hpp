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

#ifndef LAPDA_MODEL_HPP_
#define LAPDA_MODEL_HPP_

#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

#include "lapda/tape.hpp"
#include "lapda/tensor.hpp"

namespace lapda {

enum class GeneratorArch { kMlp, kConv2 };

std::string arch_name(GeneratorArch a);
GeneratorArch arch_from_name(const std::string& name);

/// Shape plan for the whole model. The conv2 generator is two 5x5 stride-2
/// convolutions (with batch normalization) followed by two dense layers.
struct ModelSpec {
  GeneratorArch arch = GeneratorArch::kMlp;
  std::size_t input_dim = 2;    // mlp input width; conv uses in_c*in_h*in_w
  std::size_t hidden = 64;      // mlp hidden width
  std::size_t feature_dim = 8;  // d, also the bandwidth length
  std::size_t classes = 2;
  std::size_t disc_hidden = 64;
  // conv2-only geometry
  std::size_t in_c = 1, in_h = 28, in_w = 28;
  std::size_t conv_c1 = 16, conv_c2 = 32, conv_fc = 128;
};

struct GeneratorParams {
  GeneratorArch arch = GeneratorArch::kMlp;
  // mlp: input -> hidden -> hidden -> feature_dim, ReLU between
  Parameter w1, b1, w2, b2, w3, b3;
  // conv2 stack
  Conv2dGeom conv1, conv2;
  Parameter c1w, c1b, bn1_gamma, bn1_beta;
  Parameter c2w, c2b, bn2_gamma, bn2_beta;
  Parameter f1w, f1b, f2w, f2b;
  BatchNormState bn1, bn2;

  std::vector<Parameter*> trainable();
};

struct ClassifierParams {
  Parameter w, b;  // feature_dim -> classes logits
  std::vector<Parameter*> trainable() { return {&w, &b}; }
};

struct DiscriminatorParams {
  Parameter w1, b1, w2, b2;  // feature_dim -> hidden -> 1, sigmoid head
  std::vector<Parameter*> trainable() { return {&w1, &b1, &w2, &b2}; }
};

/// Feature generator, classifier and discriminator weights plus the
/// learnable bandwidth. sigma = exp(log_sigma) keeps it positive.
struct Model {
  ModelSpec spec;
  GeneratorParams gen;
  ClassifierParams cls;
  DiscriminatorParams disc;
  Parameter log_sigma;  // 1 x feature_dim

  // Everything updated by the descent side of the minimax (step 3).
  std::vector<Parameter*> feature_side_params();
  // Everything updated by the ascent side (step 4).
  std::vector<Parameter*> discriminator_params();
  std::vector<Parameter*> all_params();
  void zero_grads();
};

// Zero-valued parameters with the right shapes and stable ids.
Model make_model(const ModelSpec& spec);
// make_model + random weight init (He on hidden layers), sigma = 1.
Model init_model(const ModelSpec& spec, std::uint64_t seed);

// Forward pass of the feature generator. In training mode the conv2
// architecture normalizes with batch statistics and refreshes the running
// averages; in eval mode it reads the running averages.
NodeId embed(Tape& tape, GeneratorParams& gen, NodeId x, bool training);

NodeId classify(Tape& tape, ClassifierParams& cls, NodeId features);
NodeId discriminate(Tape& tape, DiscriminatorParams& disc, NodeId features);

// Mean cross entropy of source logits against one-hot labels.
NodeId cls_loss(Tape& tape, NodeId logits, NodeId y_onehot);

// (1/Ns) sum log D(f_s) + (1/Nt) sum log(1 - D(f_t)), the two-player value.
// Scores are clamped to [1e-7, 1 - 1e-7] before the logs.
NodeId dann_loss(Tape& tape, NodeId d_source, NodeId d_target);

// rho_i = e * H(p_i) * exp(-H(p_i)) with natural-log entropy; peaks at 1
// exactly when H = 1 nat. Detached: plain values, no tape involvement.
std::vector<double> entropy_weights(const Tensor& probs);

}  // namespace lapda

#endif  // LAPDA_MODEL_HPP_
