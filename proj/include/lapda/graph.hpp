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

#ifndef LAPDA_GRAPH_HPP_
#define LAPDA_GRAPH_HPP_

#include <cstddef>

#include "lapda/tape.hpp"

namespace lapda {

/// Gaussian similarity blocks over embedded features, all recorded on the
/// tape so gradients reach both the features and the bandwidth. Entries lie
/// in (0, 1]; W_ss and W_tt carry unit diagonals; W_st == W_ts^T.
struct SimilarityGraph {
  NodeId w_ss, w_st, w_ts, w_tt;
  std::size_t ns = 0, nt = 0;
};

/// Row-stochastic transition blocks of one absorbing chain: the walking
/// side's rows of [T_abs | T_cross] sum to 1.
struct TransitionPair {
  NodeId t_abs;    // within the walking side
  NodeId t_cross;  // into the absorbing side
};

struct TruncatedPropagation {
  NodeId labels;
  NodeId deficit;  // per-row unassigned mass, 1 - row-sum(labels)
};

// W_ab[i,j] = exp(-sum_k (a_ik - b_jk)^2 / (2 sigma_k^2)). `sigma` is a 1xd
// node of strictly positive per-dimension bandwidths.
SimilarityGraph build_similarity(Tape& tape, NodeId f_s, NodeId f_t,
                                 NodeId sigma, std::size_t ns, std::size_t nt);

// Target nodes walk, source nodes absorb: rows of [T_tt | T_ts].
TransitionPair forward_transition(Tape& tape, const SimilarityGraph& g);

// Source nodes walk, target nodes absorb: rows of [T_ss | T_st].
TransitionPair reverse_transition(Tape& tape, const SimilarityGraph& g);

// Absorption probabilities in closed form: solve((I - T_abs), T_cross * y).
// Throws SingularSystem when the chain is numerically disconnected.
NodeId propagate_closed(Tape& tape, NodeId t_abs, NodeId t_cross, NodeId y);

// First `steps` terms of the random-walk series, accumulated one
// multiply-add pass at a time. The deficit reports the mass the truncation
// has not yet assigned; with `enforce_sum` it is recorded on the tape so a
// training loss can penalize it, otherwise it is a detached diagnostic.
TruncatedPropagation propagate_truncated(Tape& tape, NodeId t_abs,
                                         NodeId t_cross, NodeId y, int steps,
                                         bool enforce_sum);

// Mean L1 distance per source sample between recovered and original labels.
NodeId cycle_loss(Tape& tape, NodeId y_hat_s, NodeId y_s);

}  // namespace lapda

#endif  // LAPDA_GRAPH_HPP_
