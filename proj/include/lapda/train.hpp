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

#ifndef LAPDA_TRAIN_HPP_
#define LAPDA_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lapda/data.hpp"
#include "lapda/model.hpp"

namespace lapda {

enum class PropagationMode { kClosed, kTruncated };

std::string propagation_mode_name(PropagationMode m);
PropagationMode propagation_mode_from_name(const std::string& name);

struct TrainConfig {
  double alpha = 1.0;      // cycle-loss weight
  double gamma = 10.0;     // lambda schedule velocity
  double lr = 1e-2;
  double momentum = 0.9;
  std::size_t batch_source = 128;
  std::size_t batch_target = 128;
  std::size_t total_steps = 1000;
  std::size_t eval_every = 100;
  std::size_t validation_size = 200;
  std::uint64_t seed = 1;
  PropagationMode propagation = PropagationMode::kClosed;
  int truncation_steps = 20;
  bool enable_dann = true;
  // Baseline/diagnostic knob: keep the discriminator at its initial weights.
  bool freeze_discriminator = false;
  // Model shape
  GeneratorArch arch = GeneratorArch::kMlp;
  std::size_t hidden = 64;
  std::size_t feature_dim = 8;
  std::size_t disc_hidden = 64;

  void validate(int classes) const;
};

struct StepReport {
  std::size_t step = 0;
  double progress = 0.0;  // step / total_steps
  double lambda = 0.0;
  double loss_cls = 0.0;
  double loss_dann = 0.0;
  double loss_cycle = 0.0;
  double loss_total = 0.0;
  bool cycle_skipped = false;  // SingularSystem guard fired this step
  double val_accuracy = -1.0;  // negative when not evaluated this step
};

/// Per-parameter momentum buffers, keyed by parameter id, zero on first use.
struct OptimizerState {
  std::unordered_map<std::string, Tensor> buffers;

  // buffer <- momentum * buffer + grad; value <- value - lr * buffer
  void apply(const std::vector<Parameter*>& params, double lr,
             double momentum);
};

// The cycle-loss warm-up weight 2/(1+exp(-gamma*p)) - 1 = tanh(gamma*p/2).
double lambda_schedule(double progress, double gamma);

// Observer for tests: called with phase 1 after the feature-side update and
// phase 2 after the discriminator update.
using StepObserver = std::function<void(int phase, const Model& model)>;

// One optimization step: forward both batches, build the graph, propagate
// forward and back, descend generator/classifier/sigma on
// L_cls + L_dann + alpha*lambda*L_cycle, then ascend the discriminator on
// L_dann against the same forward features. On SingularSystem the step
// proceeds without the cycle term and flags the report.
StepReport train_step(Model& model, const Tensor& x_source,
                      const Tensor& y_source_onehot, const Tensor& x_target,
                      const TrainConfig& cfg, OptimizerState& state,
                      std::size_t step, const StepObserver& observer = {});

struct FitResult {
  Model model;  // checkpoint with the best validation accuracy
  std::vector<StepReport> history;
  double best_val_accuracy = -1.0;
};

// Runs total_steps train_steps with class-balanced source batches, scoring
// the target validation split every eval_every steps (and at the last step).
// Optionally starts from `init` instead of a fresh seeded model.
FitResult fit(const Scenario& scenario, const TrainConfig& cfg,
              const Model* init = nullptr);

// Fraction of samples whose argmax logit matches the label; ties break
// toward the lowest class index.
double evaluate(Model& model, const Tensor& x, const std::vector<int>& labels);

}  // namespace lapda

#endif  // LAPDA_TRAIN_HPP_
