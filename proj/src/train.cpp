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

#include "lapda/train.hpp"

#include <cmath>
#include <string>

#include "lapda/errors.hpp"
#include "lapda/graph.hpp"

namespace lapda {

std::string propagation_mode_name(PropagationMode m) {
  return m == PropagationMode::kClosed ? "closed" : "truncated";
}

PropagationMode propagation_mode_from_name(const std::string& name) {
  if (name == "closed") return PropagationMode::kClosed;
  if (name == "truncated") return PropagationMode::kTruncated;
  throw ConfigError("unknown propagation mode '" + name + "'");
}

void TrainConfig::validate(int classes) const {
  if (alpha < 0.0) throw ConfigError("config: alpha must be >= 0");
  if (gamma <= 0.0) throw ConfigError("config: gamma must be > 0");
  if (lr <= 0.0) throw ConfigError("config: lr must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ConfigError("config: momentum must lie in [0, 1)");
  }
  if (batch_source == 0 || batch_target == 0) {
    throw ConfigError("config: batch sizes must be positive");
  }
  // Each class should be able to appear in every batch (sampling-bias guard).
  if (batch_source < static_cast<std::size_t>(classes) ||
      batch_target < static_cast<std::size_t>(classes)) {
    throw ConfigError("config: batch sizes must be >= class count " +
                      std::to_string(classes));
  }
  if (eval_every == 0) throw ConfigError("config: eval_every must be > 0");
  if (truncation_steps < 1) {
    throw ConfigError("config: truncation_steps must be >= 1");
  }
  if (feature_dim == 0 || hidden == 0 || disc_hidden == 0) {
    throw ConfigError("config: layer widths must be positive");
  }
}

double lambda_schedule(double progress, double gamma) {
  if (progress < 0.0 || progress > 1.0) {
    throw ConfigError("lambda_schedule: progress outside [0, 1]");
  }
  return 2.0 / (1.0 + std::exp(-gamma * progress)) - 1.0;
}

void OptimizerState::apply(const std::vector<Parameter*>& params, double lr,
                           double momentum) {
  for (Parameter* p : params) {
    Tensor& buf = buffers[p->id];
    if (buf.empty()) buf = Tensor(p->value.rows(), p->value.cols());
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      buf[i] = momentum * buf[i] + p->grad[i];
      p->value[i] -= lr * buf[i];
    }
  }
}

StepReport train_step(Model& model, const Tensor& x_source,
                      const Tensor& y_source_onehot, const Tensor& x_target,
                      const TrainConfig& cfg, OptimizerState& state,
                      std::size_t step, const StepObserver& observer) {
  const std::size_t ns = x_source.rows(), nt = x_target.rows();
  StepReport report;
  report.step = step;
  report.progress =
      cfg.total_steps > 0
          ? static_cast<double>(step) / static_cast<double>(cfg.total_steps)
          : 0.0;
  report.lambda = lambda_schedule(report.progress, cfg.gamma);

  model.zero_grads();
  Tape tape;
  NodeId xs = tape.constant(x_source);
  NodeId xt = tape.constant(x_target);
  NodeId ys = tape.constant(y_source_onehot);

  NodeId f_s = embed(tape, model.gen, xs, /*training=*/true);
  NodeId f_t = embed(tape, model.gen, xt, /*training=*/true);

  NodeId logits_s = classify(tape, model.cls, f_s);
  NodeId l_cls = cls_loss(tape, logits_s, ys);
  NodeId total = l_cls;

  NodeId l_dann = 0;
  if (cfg.enable_dann) {
    NodeId d_s = discriminate(tape, model.disc, f_s);
    NodeId d_t = discriminate(tape, model.disc, f_t);
    l_dann = dann_loss(tape, d_s, d_t);
    total = tape.add(total, l_dann);
    report.loss_dann = tape.value(l_dann).item();
  }

  if (cfg.alpha > 0.0) {
    try {
      // The cycle path consumes the features only through this concat node;
      // the per-sample weights registered on it scale the cycle gradient
      // without touching the classifier or discriminator paths.
      NodeId f_all = tape.concat_rows(f_s, f_t);
      NodeId f_s_view = tape.slice_rows(f_all, 0, ns);
      NodeId f_t_view = tape.slice_rows(f_all, ns, ns + nt);
      NodeId sigma = tape.exp(tape.param(model.log_sigma));
      SimilarityGraph g =
          build_similarity(tape, f_s_view, f_t_view, sigma, ns, nt);

      TransitionPair fwd = forward_transition(tape, g);
      TransitionPair rev = reverse_transition(tape, g);
      NodeId l_cycle = 0;
      if (cfg.propagation == PropagationMode::kClosed) {
        NodeId y_t_hat = propagate_closed(tape, fwd.t_abs, fwd.t_cross, ys);
        NodeId y_s_hat =
            propagate_closed(tape, rev.t_abs, rev.t_cross, y_t_hat);
        l_cycle = cycle_loss(tape, y_s_hat, ys);
      } else {
        TruncatedPropagation fwd_prop = propagate_truncated(
            tape, fwd.t_abs, fwd.t_cross, ys, cfg.truncation_steps, true);
        TruncatedPropagation rev_prop =
            propagate_truncated(tape, rev.t_abs, rev.t_cross, fwd_prop.labels,
                                cfg.truncation_steps, true);
        l_cycle = cycle_loss(tape, rev_prop.labels, ys);
        // Unassigned mass on the recovered source labels is penalized so the
        // truncated series cannot cheat the L1 loss by propagating nothing.
        NodeId deficit_penalty =
            tape.scalar_mul(tape.sum_all(rev_prop.deficit),
                            1.0 / static_cast<double>(ns));
        l_cycle = tape.add(l_cycle, deficit_penalty);
      }

      NodeId logits_all = classify(tape, model.cls, f_all);
      NodeId p_all = tape.softmax(logits_all);
      tape.set_row_gradient_scale(f_all, entropy_weights(tape.value(p_all)));

      report.loss_cycle = tape.value(l_cycle).item();
      total =
          tape.add(total, tape.scalar_mul(l_cycle, cfg.alpha * report.lambda));
    } catch (const SingularSystem& e) {
      report.cycle_skipped = true;
      report.loss_cycle = 0.0;
    }
  }

  report.loss_cls = tape.value(l_cls).item();
  report.loss_total = tape.value(total).item();
  if (!std::isfinite(report.loss_total)) {
    throw NumericError(
        "train_step " + std::to_string(step) + ": non-finite loss (cls=" +
        std::to_string(report.loss_cls) + ", dann=" +
        std::to_string(report.loss_dann) + ", cycle=" +
        std::to_string(report.loss_cycle) + ")");
  }

  tape.backward(total);
  state.apply(model.feature_side_params(), cfg.lr, cfg.momentum);
  if (observer) observer(1, model);

  if (cfg.enable_dann && !cfg.freeze_discriminator) {
    model.zero_grads();
    // The discriminator maximizes L_dann: descend on its negation. Only the
    // discriminator partition is applied.
    tape.backward(tape.negate(l_dann));
    state.apply(model.discriminator_params(), cfg.lr, cfg.momentum);
  }
  if (observer) observer(2, model);
  model.zero_grads();
  return report;
}

FitResult fit(const Scenario& scenario, const TrainConfig& cfg,
              const Model* init) {
  cfg.validate(scenario.classes);
  ModelSpec spec;
  spec.arch = cfg.arch;
  spec.input_dim = scenario.input_dim;
  spec.hidden = cfg.hidden;
  spec.feature_dim = cfg.feature_dim;
  spec.classes = scenario.classes;
  spec.disc_hidden = cfg.disc_hidden;
  if (cfg.arch == GeneratorArch::kConv2) {
    std::size_t side = static_cast<std::size_t>(
        std::lround(std::sqrt(static_cast<double>(scenario.input_dim))));
    if (side * side != scenario.input_dim) {
      throw ConfigError("conv2 generator needs square single-channel inputs");
    }
    spec.in_c = 1;
    spec.in_h = side;
    spec.in_w = side;
  }

  FitResult result;
  result.model = init != nullptr ? *init : init_model(spec, cfg.seed);

  if (cfg.total_steps == 0) return result;

  BatchSampler source_sampler(scenario.source_train, /*class_balanced=*/true,
                              cfg.seed * 2654435761u + 1);
  BatchSampler target_sampler(scenario.target_train, /*class_balanced=*/false,
                              cfg.seed * 2654435761u + 2);
  OptimizerState state;

  Model best = result.model;
  double best_val = -1.0;

  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    auto src_idx = source_sampler.draw(cfg.batch_source);
    auto tgt_idx = target_sampler.draw(cfg.batch_target);

    Tensor xs(src_idx.size(), scenario.source_train.x().cols());
    std::vector<int> ys(src_idx.size());
    for (std::size_t i = 0; i < src_idx.size(); ++i) {
      for (std::size_t j = 0; j < xs.cols(); ++j) {
        xs.at(i, j) = scenario.source_train.x().at(src_idx[i], j);
      }
      ys[i] = scenario.source_train.label(src_idx[i]);
    }
    Tensor xt(tgt_idx.size(), scenario.target_train.x().cols());
    for (std::size_t i = 0; i < tgt_idx.size(); ++i) {
      for (std::size_t j = 0; j < xt.cols(); ++j) {
        xt.at(i, j) = scenario.target_train.x().at(tgt_idx[i], j);
      }
    }

    StepReport report =
        train_step(result.model, xs, one_hot(ys, scenario.classes), xt, cfg,
                   state, step);

    const bool last = step + 1 == cfg.total_steps;
    if ((step + 1) % cfg.eval_every == 0 || last) {
      report.val_accuracy = evaluate(result.model, scenario.target_val.x(),
                                     scenario.target_val.labels());
      if (report.val_accuracy > best_val) {
        best_val = report.val_accuracy;
        best = result.model;
      }
    }
    result.history.push_back(report);
  }
  result.model = best;
  result.best_val_accuracy = best_val;
  return result;
}

double evaluate(Model& model, const Tensor& x,
                const std::vector<int>& labels) {
  if (x.rows() == 0) throw ShapeError("evaluate: empty dataset");
  if (labels.size() != x.rows()) {
    throw ShapeError("evaluate: label count mismatch");
  }
  Tape tape;
  NodeId f = embed(tape, model.gen, tape.constant(x), /*training=*/false);
  const Tensor& logits = tape.value(classify(tape, model.cls, f));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    std::size_t argmax = 0;
    for (std::size_t j = 1; j < logits.cols(); ++j) {
      if (logits.at(i, j) > logits.at(i, argmax)) argmax = j;
    }
    if (static_cast<int>(argmax) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

}  // namespace lapda
