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

#ifndef LAPDA_TAPE_HPP_
#define LAPDA_TAPE_HPP_

#include <cstddef>
#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "lapda/linalg.hpp"
#include "lapda/tensor.hpp"

namespace lapda {

using NodeId = std::size_t;

enum class Op {
  kConst,
  kParam,
  kAdd,
  kSub,
  kMul,
  kScalarMul,
  kMatmul,
  kExp,
  kLog,
  kLogClamped,
  kNegate,
  kSigmoid,
  kRelu,
  kClamp,
  kRowSum,
  kSumAll,
  kRowNormalize,
  kRowDiv,
  kSoftmax,
  kPairwiseScaledSqdist,
  kLinearSolve,
  kL1Norm,
  kCrossEntropy,
  kEntropyPerRow,
  kConcatRows,
  kSliceRows,
  kAddRow,
  kConv2d,
  kBatchNorm,
};

const char* op_name(Op op);

/// Geometry of a 2-d convolution over row-flattened [C,H,W] images.
struct Conv2dGeom {
  std::size_t in_c = 1, in_h = 0, in_w = 0;
  std::size_t out_c = 1, kernel = 3, stride = 1, pad = 0;

  std::size_t out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  std::size_t out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
};

/// Running normalization statistics owned by the model, updated by forward
/// passes in training mode and read in eval mode.
struct BatchNormState {
  Tensor running_mean;  // 1 x C
  Tensor running_var;   // 1 x C (biased)
  double momentum = 0.9;
  bool initialized = false;
};

struct BatchNormCache {
  std::vector<double> inv_std;  // per channel
  Tensor x_hat;
};

/// Per-node operation attributes. Only the fields relevant to the op kind
/// are read; the rest stay at their defaults.
struct Attrs {
  double scalar = 0.0;       // scalar-mul factor; clamp lo
  double scalar2 = 0.0;      // clamp hi
  std::size_t row_begin = 0;  // slice-rows
  std::size_t row_end = 0;
  std::shared_ptr<const LuFactors> lu;  // linear-solve cache
  std::shared_ptr<Conv2dGeom> conv;
  BatchNormState* bn_state = nullptr;
  std::size_t bn_channels = 0, bn_spatial = 1;
  double bn_eps = 1e-5;
  bool bn_training = true;
  std::shared_ptr<BatchNormCache> bn_cache;
};

struct Node {
  Op op;
  std::vector<NodeId> inputs;
  Tensor value;
  Attrs attrs;
  Parameter* param = nullptr;         // kParam only
  std::vector<double> row_scale;      // empty unless a gradient hook is set
};

/// Eagerly evaluated reverse-mode tape over dense tensors. Single-threaded:
/// an instance is confined to one thread; independent tapes may run in
/// parallel. Backward visits each node once in reverse topological order and
/// accumulates leaf gradients into the bound Parameters.
class Tape {
 public:
  // Core entry point: validates shapes, computes the forward value, appends
  // the node. All named helpers below go through this.
  NodeId record(Op op, const std::vector<NodeId>& inputs, Attrs attrs = {});

  NodeId constant(Tensor v);
  NodeId param(Parameter& p);

  NodeId add(NodeId a, NodeId b) { return record(Op::kAdd, {a, b}); }
  NodeId sub(NodeId a, NodeId b) { return record(Op::kSub, {a, b}); }
  NodeId mul(NodeId a, NodeId b) { return record(Op::kMul, {a, b}); }
  NodeId scalar_mul(NodeId a, double c) {
    Attrs at;
    at.scalar = c;
    return record(Op::kScalarMul, {a}, at);
  }
  NodeId matmul(NodeId a, NodeId b) { return record(Op::kMatmul, {a, b}); }
  NodeId exp(NodeId a) { return record(Op::kExp, {a}); }
  NodeId log(NodeId a) { return record(Op::kLog, {a}); }
  // log of the input clamped to [lo, hi]. The backward pass uses the exact
  // log derivative at the unclamped input, so losses like log(sigmoid(z))
  // keep their well-conditioned (1 - sigmoid) gradient deep in saturation
  // instead of dying at the clamp knee.
  NodeId log_clamped(NodeId a, double lo, double hi) {
    Attrs at;
    at.scalar = lo;
    at.scalar2 = hi;
    return record(Op::kLogClamped, {a}, at);
  }
  NodeId negate(NodeId a) { return record(Op::kNegate, {a}); }
  NodeId sigmoid(NodeId a) { return record(Op::kSigmoid, {a}); }
  NodeId relu(NodeId a) { return record(Op::kRelu, {a}); }
  NodeId clamp(NodeId a, double lo, double hi) {
    Attrs at;
    at.scalar = lo;
    at.scalar2 = hi;
    return record(Op::kClamp, {a}, at);
  }
  NodeId row_sum(NodeId a) { return record(Op::kRowSum, {a}); }
  NodeId sum_all(NodeId a) { return record(Op::kSumAll, {a}); }
  NodeId row_normalize(NodeId a) { return record(Op::kRowNormalize, {a}); }
  NodeId row_div(NodeId x, NodeId s) { return record(Op::kRowDiv, {x, s}); }
  NodeId softmax(NodeId a) { return record(Op::kSoftmax, {a}); }
  NodeId pairwise_scaled_sqdist(NodeId a, NodeId b, NodeId sigma) {
    return record(Op::kPairwiseScaledSqdist, {a, b, sigma});
  }
  NodeId linear_solve(NodeId a, NodeId b) {
    return record(Op::kLinearSolve, {a, b});
  }
  NodeId l1_norm(NodeId a) { return record(Op::kL1Norm, {a}); }
  NodeId cross_entropy(NodeId logits, NodeId onehot) {
    return record(Op::kCrossEntropy, {logits, onehot});
  }
  NodeId entropy_per_row(NodeId p) { return record(Op::kEntropyPerRow, {p}); }
  NodeId concat_rows(NodeId a, NodeId b) {
    return record(Op::kConcatRows, {a, b});
  }
  NodeId slice_rows(NodeId a, std::size_t r0, std::size_t r1) {
    Attrs at;
    at.row_begin = r0;
    at.row_end = r1;
    return record(Op::kSliceRows, {a}, at);
  }
  NodeId add_row(NodeId x, NodeId v) { return record(Op::kAddRow, {x, v}); }
  NodeId conv2d(NodeId x, NodeId w, NodeId b, const Conv2dGeom& geom) {
    Attrs at;
    at.conv = std::make_shared<Conv2dGeom>(geom);
    return record(Op::kConv2d, {x, w, b}, at);
  }
  NodeId batch_norm(NodeId x, NodeId gamma, NodeId beta, BatchNormState* state,
                    std::size_t channels, std::size_t spatial, bool training);

  // Registers the per-row gradient weight of the modified chain rule: during
  // backward, the upstream gradient arriving at this node is multiplied
  // row-wise by rho before flowing to the node's inputs. Forward values are
  // unaffected. rho entries must lie in [0, 1].
  void set_row_gradient_scale(NodeId id, std::vector<double> rho);

  // Reverse pass from a scalar loss. Node gradients are recomputed from
  // scratch; Parameter gradients accumulate across calls.
  void backward(NodeId loss);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  // Gradient of the last backward() at a node (zeros if it was not reached).
  Tensor grad(NodeId id) const;

  std::size_t size() const { return nodes_.size(); }

  // Condition-number guard for linear-solve; above it the op raises
  // SingularSystem instead of returning an untrustworthy solution.
  static constexpr double kConditionLimit = 1e12;

 private:
  Tensor forward(Op op, const std::vector<NodeId>& inputs, Attrs& attrs) const;
  void backprop_node(std::size_t i, std::vector<Tensor>& grads);
  void accumulate(std::vector<Tensor>& grads, NodeId id, std::size_t r,
                  std::size_t c, double v) {
    if (grads[id].empty()) {
      grads[id] = Tensor(nodes_[id].value.rows(), nodes_[id].value.cols());
    }
    grads[id].at(r, c) += v;
  }
  Tensor& grad_buf(std::vector<Tensor>& grads, NodeId id) {
    if (grads[id].empty()) {
      grads[id] = Tensor(nodes_[id].value.rows(), nodes_[id].value.cols());
    }
    return grads[id];
  }

  // deque: node references (and value() references) stay valid as the tape
  // grows
  std::deque<Node> nodes_;
  std::vector<Tensor> last_grads_;
};

}  // namespace lapda

#endif  // LAPDA_TAPE_HPP_
