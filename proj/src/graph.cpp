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

#include "lapda/graph.hpp"

#include <string>

#include "lapda/errors.hpp"

namespace lapda {

SimilarityGraph build_similarity(Tape& tape, NodeId f_s, NodeId f_t,
                                 NodeId sigma, std::size_t ns,
                                 std::size_t nt) {
  if (ns < 1 || nt < 1) {
    throw ShapeError("build_similarity: need at least one sample per domain");
  }
  if (!tape.value(f_s).all_finite() || !tape.value(f_t).all_finite()) {
    throw NumericError("build_similarity: non-finite feature values");
  }
  SimilarityGraph g;
  g.ns = ns;
  g.nt = nt;
  g.w_ss = tape.exp(tape.negate(tape.pairwise_scaled_sqdist(f_s, f_s, sigma)));
  g.w_st = tape.exp(tape.negate(tape.pairwise_scaled_sqdist(f_s, f_t, sigma)));
  g.w_ts = tape.exp(tape.negate(tape.pairwise_scaled_sqdist(f_t, f_s, sigma)));
  g.w_tt = tape.exp(tape.negate(tape.pairwise_scaled_sqdist(f_t, f_t, sigma)));
  return g;
}

namespace {

// Divides the rows of both blocks by the rows' joint sum, making each row of
// [abs | cross] stochastic.
TransitionPair normalize_blocks(Tape& tape, NodeId w_abs, NodeId w_cross) {
  NodeId row_total =
      tape.add(tape.row_sum(w_abs), tape.row_sum(w_cross));
  TransitionPair t;
  t.t_abs = tape.row_div(w_abs, row_total);
  t.t_cross = tape.row_div(w_cross, row_total);
  return t;
}

}  // namespace

TransitionPair forward_transition(Tape& tape, const SimilarityGraph& g) {
  return normalize_blocks(tape, g.w_tt, g.w_ts);
}

TransitionPair reverse_transition(Tape& tape, const SimilarityGraph& g) {
  return normalize_blocks(tape, g.w_ss, g.w_st);
}

NodeId propagate_closed(Tape& tape, NodeId t_abs, NodeId t_cross, NodeId y) {
  const Tensor& t = tape.value(t_abs);
  NodeId eye = tape.constant(Tensor::identity(t.rows()));
  NodeId system = tape.sub(eye, t_abs);
  NodeId rhs = tape.matmul(t_cross, y);
  return tape.linear_solve(system, rhs);
}

TruncatedPropagation propagate_truncated(Tape& tape, NodeId t_abs,
                                         NodeId t_cross, NodeId y, int steps,
                                         bool enforce_sum) {
  if (steps < 1) {
    throw ShapeError("propagate_truncated: steps must be >= 1, got " +
                     std::to_string(steps));
  }
  NodeId term = tape.matmul(t_cross, y);
  NodeId acc = term;
  for (int k = 1; k < steps; ++k) {
    term = tape.matmul(t_abs, term);
    acc = tape.add(acc, term);
  }
  TruncatedPropagation out;
  out.labels = acc;
  if (enforce_sum) {
    NodeId ones = tape.constant(Tensor(tape.value(acc).rows(), 1, 1.0));
    out.deficit = tape.sub(ones, tape.row_sum(acc));
  } else {
    const Tensor& v = tape.value(acc);
    Tensor deficit(v.rows(), 1);
    for (std::size_t i = 0; i < v.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < v.cols(); ++j) s += v.at(i, j);
      deficit.at(i, 0) = 1.0 - s;
    }
    out.deficit = tape.constant(std::move(deficit));
  }
  return out;
}

NodeId cycle_loss(Tape& tape, NodeId y_hat_s, NodeId y_s) {
  const Tensor& yh = tape.value(y_hat_s);
  const Tensor& ys = tape.value(y_s);
  if (!yh.same_shape(ys)) {
    throw ShapeError("cycle_loss: shapes " + yh.shape_str() + " vs " +
                     ys.shape_str());
  }
  NodeId abs_sum = tape.l1_norm(tape.sub(y_hat_s, y_s));
  return tape.scalar_mul(abs_sum, 1.0 / static_cast<double>(yh.rows()));
}

}  // namespace lapda
