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

#include "lapda/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lapda/errors.hpp"

namespace lapda {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

std::string shapes(const char* op, const Tensor& a, const Tensor& b) {
  return std::string(op) + ": inputs " + a.shape_str() + ", " + b.shape_str();
}

Tensor softmax_rows(const Tensor& z) {
  Tensor out(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double m = z.at(i, 0);
    for (std::size_t j = 1; j < z.cols(); ++j) m = std::max(m, z.at(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) {
      double e = std::exp(z.at(i, j) - m);
      out.at(i, j) = e;
      s += e;
    }
    for (std::size_t j = 0; j < z.cols(); ++j) out.at(i, j) /= s;
  }
  return out;
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kConst: return "const";
    case Op::kParam: return "param";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScalarMul: return "scalar-mul";
    case Op::kMatmul: return "matmul";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kLogClamped: return "log-clamped";
    case Op::kNegate: return "negate";
    case Op::kSigmoid: return "sigmoid";
    case Op::kRelu: return "relu";
    case Op::kClamp: return "clamp";
    case Op::kRowSum: return "row-sum";
    case Op::kSumAll: return "sum-all";
    case Op::kRowNormalize: return "row-normalize";
    case Op::kRowDiv: return "row-div";
    case Op::kSoftmax: return "softmax";
    case Op::kPairwiseScaledSqdist: return "pairwise-scaled-sqdist";
    case Op::kLinearSolve: return "linear-solve";
    case Op::kL1Norm: return "l1-norm";
    case Op::kCrossEntropy: return "cross-entropy";
    case Op::kEntropyPerRow: return "entropy-per-row";
    case Op::kConcatRows: return "concat-rows";
    case Op::kSliceRows: return "slice-rows";
    case Op::kAddRow: return "add-row";
    case Op::kConv2d: return "conv2d";
    case Op::kBatchNorm: return "batch-norm";
  }
  return "?";
}

NodeId Tape::constant(Tensor v) {
  Node n;
  n.op = Op::kConst;
  n.value = std::move(v);
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

NodeId Tape::param(Parameter& p) {
  Node n;
  n.op = Op::kParam;
  n.value = p.value;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

NodeId Tape::batch_norm(NodeId x, NodeId gamma, NodeId beta,
                        BatchNormState* state, std::size_t channels,
                        std::size_t spatial, bool training) {
  Attrs at;
  at.bn_state = state;
  at.bn_channels = channels;
  at.bn_spatial = spatial;
  at.bn_training = training;
  return record(Op::kBatchNorm, {x, gamma, beta}, at);
}

NodeId Tape::record(Op op, const std::vector<NodeId>& inputs, Attrs attrs) {
  for (NodeId id : inputs) {
    require(id < nodes_.size(), std::string(op_name(op)) +
                                    ": input node id out of range");
  }
  Tensor value = forward(op, inputs, attrs);
  Node n;
  n.op = op;
  n.inputs = inputs;
  n.value = std::move(value);
  n.attrs = std::move(attrs);
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

Tensor Tape::forward(Op op, const std::vector<NodeId>& inputs,
                     Attrs& attrs) const {
  auto in = [&](std::size_t k) -> const Tensor& {
    return nodes_[inputs[k]].value;
  };

  switch (op) {
    case Op::kConst:
    case Op::kParam:
      throw ShapeError("record: leaf ops go through constant()/param()");

    case Op::kAdd:
    case Op::kSub:
    case Op::kMul: {
      const Tensor &a = in(0), &b = in(1);
      require(a.same_shape(b), shapes(op_name(op), a, b) + " must match");
      Tensor out(a.rows(), a.cols());
      for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = op == Op::kAdd   ? a[i] + b[i]
                 : op == Op::kSub ? a[i] - b[i]
                                  : a[i] * b[i];
      }
      return out;
    }

    case Op::kScalarMul: {
      const Tensor& a = in(0);
      Tensor out(a.rows(), a.cols());
      for (std::size_t i = 0; i < a.size(); ++i) out[i] = attrs.scalar * a[i];
      return out;
    }

    case Op::kMatmul: {
      const Tensor &a = in(0), &b = in(1);
      if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dims " + std::to_string(a.cols()) +
                         " != " + std::to_string(b.rows()) + " (lhs " +
                         a.shape_str() + ", rhs " + b.shape_str() + ")");
      }
      return lapda::matmul(a, b);
    }

    case Op::kExp:
    case Op::kLog:
    case Op::kNegate:
    case Op::kSigmoid:
    case Op::kRelu: {
      const Tensor& a = in(0);
      Tensor out(a.rows(), a.cols());
      for (std::size_t i = 0; i < a.size(); ++i) {
        switch (op) {
          case Op::kExp: out[i] = std::exp(a[i]); break;
          case Op::kLog: out[i] = std::log(a[i]); break;
          case Op::kNegate: out[i] = -a[i]; break;
          case Op::kSigmoid: out[i] = 1.0 / (1.0 + std::exp(-a[i])); break;
          default: out[i] = a[i] > 0.0 ? a[i] : 0.0; break;
        }
      }
      return out;
    }

    case Op::kClamp: {
      const Tensor& a = in(0);
      Tensor out(a.rows(), a.cols());
      for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = std::min(std::max(a[i], attrs.scalar), attrs.scalar2);
      }
      return out;
    }

    case Op::kLogClamped: {
      const Tensor& a = in(0);
      Tensor out(a.rows(), a.cols());
      for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = std::log(std::min(std::max(a[i], attrs.scalar), attrs.scalar2));
      }
      return out;
    }

    case Op::kRowSum: {
      const Tensor& a = in(0);
      Tensor out(a.rows(), 1);
      for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a.at(i, j);
        out.at(i, 0) = s;
      }
      return out;
    }

    case Op::kSumAll: {
      const Tensor& a = in(0);
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
      return Tensor::scalar(s);
    }

    case Op::kRowNormalize: {
      const Tensor& a = in(0);
      Tensor out(a.rows(), a.cols());
      for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a.at(i, j);
        require(s != 0.0, "row-normalize: row " + std::to_string(i) +
                              " sums to zero");
        for (std::size_t j = 0; j < a.cols(); ++j) out.at(i, j) = a.at(i, j) / s;
      }
      return out;
    }

    case Op::kRowDiv: {
      const Tensor &x = in(0), &s = in(1);
      require(s.rows() == x.rows() && s.cols() == 1,
              shapes("row-div", x, s) + " (need Nx1 divisor)");
      Tensor out(x.rows(), x.cols());
      for (std::size_t i = 0; i < x.rows(); ++i) {
        require(s.at(i, 0) != 0.0,
                "row-div: zero divisor at row " + std::to_string(i));
        for (std::size_t j = 0; j < x.cols(); ++j) {
          out.at(i, j) = x.at(i, j) / s.at(i, 0);
        }
      }
      return out;
    }

    case Op::kSoftmax:
      return softmax_rows(in(0));

    case Op::kPairwiseScaledSqdist: {
      const Tensor &a = in(0), &b = in(1), &sig = in(2);
      require(a.cols() == b.cols(),
              shapes("pairwise-scaled-sqdist", a, b) + " feature dims differ");
      require(sig.rows() == 1 && sig.cols() == a.cols(),
              "pairwise-scaled-sqdist: sigma must be 1x" +
                  std::to_string(a.cols()) + ", got " + sig.shape_str());
      Tensor out(a.rows(), b.rows());
      const std::size_t d = a.cols();
      std::vector<double> inv2s2(d);
      for (std::size_t k = 0; k < d; ++k) {
        require(sig[k] > 0.0, "pairwise-scaled-sqdist: sigma must be > 0");
        inv2s2[k] = 1.0 / (2.0 * sig[k] * sig[k]);
      }
      for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < d; ++k) {
            double diff = a.at(i, k) - b.at(j, k);
            s += diff * diff * inv2s2[k];
          }
          out.at(i, j) = s;
        }
      }
      return out;
    }

    case Op::kLinearSolve: {
      const Tensor &a = in(0), &b = in(1);
      require(a.rows() == a.cols(),
              "linear-solve: A must be square, got " + a.shape_str());
      require(b.rows() == a.rows(), shapes("linear-solve", a, b) +
                                        " (B rows must match A)");
      auto lu = std::make_shared<LuFactors>(a);
      double cond = lu->condition_estimate();
      if (!(cond < kConditionLimit)) {
        throw SingularSystem("linear-solve: condition estimate " +
                                 std::to_string(cond) + " exceeds limit " +
                                 std::to_string(kConditionLimit),
                             -1);
      }
      Tensor x = lu->solve(b);
      attrs.lu = std::move(lu);
      return x;
    }

    case Op::kL1Norm: {
      const Tensor& a = in(0);
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i]);
      return Tensor::scalar(s);
    }

    case Op::kCrossEntropy: {
      const Tensor &z = in(0), &y = in(1);
      require(z.same_shape(y), shapes("cross-entropy", z, y) + " must match");
      require(z.rows() > 0, "cross-entropy: empty batch");
      double loss = 0.0;
      for (std::size_t i = 0; i < z.rows(); ++i) {
        double m = z.at(i, 0);
        for (std::size_t j = 1; j < z.cols(); ++j) m = std::max(m, z.at(i, j));
        double lse = 0.0;
        double zy = 0.0;
        for (std::size_t j = 0; j < z.cols(); ++j) {
          lse += std::exp(z.at(i, j) - m);
          zy += y.at(i, j) * z.at(i, j);
        }
        loss += std::log(lse) + m - zy;
      }
      return Tensor::scalar(loss / static_cast<double>(z.rows()));
    }

    case Op::kEntropyPerRow: {
      const Tensor& p = in(0);
      Tensor out(p.rows(), 1);
      for (std::size_t i = 0; i < p.rows(); ++i) {
        double h = 0.0;
        for (std::size_t j = 0; j < p.cols(); ++j) {
          double v = p.at(i, j);
          if (v > 0.0) h -= v * std::log(v);
        }
        out.at(i, 0) = h;
      }
      return out;
    }

    case Op::kConcatRows: {
      const Tensor &a = in(0), &b = in(1);
      require(a.cols() == b.cols(),
              shapes("concat-rows", a, b) + " column counts differ");
      Tensor out(a.rows() + b.rows(), a.cols());
      for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out.at(i, j) = a.at(i, j);
      for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j)
          out.at(a.rows() + i, j) = b.at(i, j);
      return out;
    }

    case Op::kSliceRows: {
      const Tensor& a = in(0);
      require(attrs.row_begin <= attrs.row_end && attrs.row_end <= a.rows(),
              "slice-rows: range [" + std::to_string(attrs.row_begin) + ", " +
                  std::to_string(attrs.row_end) + ") out of bounds for " +
                  a.shape_str());
      Tensor out(attrs.row_end - attrs.row_begin, a.cols());
      for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
          out.at(i, j) = a.at(attrs.row_begin + i, j);
      return out;
    }

    case Op::kAddRow: {
      const Tensor &x = in(0), &v = in(1);
      require(v.rows() == 1 && v.cols() == x.cols(),
              shapes("add-row", x, v) + " (need 1xN bias)");
      Tensor out(x.rows(), x.cols());
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
          out.at(i, j) = x.at(i, j) + v.at(0, j);
      return out;
    }

    case Op::kConv2d: {
      const Tensor &x = in(0), &w = in(1), &b = in(2);
      const Conv2dGeom& g = *attrs.conv;
      require(x.cols() == g.in_c * g.in_h * g.in_w,
              "conv2d: input cols " + std::to_string(x.cols()) +
                  " != c*h*w = " + std::to_string(g.in_c * g.in_h * g.in_w));
      require(w.rows() == g.out_c && w.cols() == g.in_c * g.kernel * g.kernel,
              "conv2d: weight shape " + w.shape_str() + " != " +
                  std::to_string(g.out_c) + "x" +
                  std::to_string(g.in_c * g.kernel * g.kernel));
      require(b.rows() == 1 && b.cols() == g.out_c,
              "conv2d: bias shape " + b.shape_str());
      const std::size_t oh = g.out_h(), ow = g.out_w();
      Tensor out(x.rows(), g.out_c * oh * ow);
      for (std::size_t n = 0; n < x.rows(); ++n) {
        const double* xr = x.data() + n * x.cols();
        double* orow = out.data() + n * out.cols();
        for (std::size_t oc = 0; oc < g.out_c; ++oc) {
          const double* wr = w.data() + oc * w.cols();
          for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
              double s = b.at(0, oc);
              for (std::size_t ic = 0; ic < g.in_c; ++ic) {
                for (std::size_t ky = 0; ky < g.kernel; ++ky) {
                  const long iy = static_cast<long>(oy * g.stride + ky) -
                                  static_cast<long>(g.pad);
                  if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
                  for (std::size_t kx = 0; kx < g.kernel; ++kx) {
                    const long ix = static_cast<long>(ox * g.stride + kx) -
                                    static_cast<long>(g.pad);
                    if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
                    s += wr[(ic * g.kernel + ky) * g.kernel + kx] *
                         xr[(ic * g.in_h + iy) * g.in_w + ix];
                  }
                }
              }
              orow[(oc * oh + oy) * ow + ox] = s;
            }
          }
        }
      }
      return out;
    }

    case Op::kBatchNorm: {
      const Tensor &x = in(0), &gamma = in(1), &beta = in(2);
      const std::size_t c = attrs.bn_channels, sp = attrs.bn_spatial;
      require(x.cols() == c * sp, "batch-norm: input cols " +
                                      std::to_string(x.cols()) + " != " +
                                      std::to_string(c * sp));
      require(gamma.rows() == 1 && gamma.cols() == c,
              "batch-norm: gamma shape " + gamma.shape_str());
      require(beta.rows() == 1 && beta.cols() == c,
              "batch-norm: beta shape " + beta.shape_str());
      BatchNormState* st = attrs.bn_state;
      const double count = static_cast<double>(x.rows() * sp);
      std::vector<double> mean(c, 0.0), var(c, 0.0);
      if (attrs.bn_training) {
        require(x.rows() > 0, "batch-norm: empty batch");
        for (std::size_t n = 0; n < x.rows(); ++n)
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t s = 0; s < sp; ++s)
              mean[ch] += x.at(n, ch * sp + s);
        for (std::size_t ch = 0; ch < c; ++ch) mean[ch] /= count;
        for (std::size_t n = 0; n < x.rows(); ++n)
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t s = 0; s < sp; ++s) {
              double d = x.at(n, ch * sp + s) - mean[ch];
              var[ch] += d * d;
            }
        for (std::size_t ch = 0; ch < c; ++ch) var[ch] /= count;
        if (st != nullptr) {
          if (!st->initialized) {
            st->running_mean = Tensor(1, c);
            st->running_var = Tensor(1, c, 1.0);
            st->initialized = true;
          }
          for (std::size_t ch = 0; ch < c; ++ch) {
            st->running_mean.at(0, ch) = st->momentum *
                                             st->running_mean.at(0, ch) +
                                         (1.0 - st->momentum) * mean[ch];
            st->running_var.at(0, ch) =
                st->momentum * st->running_var.at(0, ch) +
                (1.0 - st->momentum) * var[ch];
          }
        }
      } else {
        require(st != nullptr && st->initialized,
                "batch-norm: eval mode requires initialized running stats");
        for (std::size_t ch = 0; ch < c; ++ch) {
          mean[ch] = st->running_mean.at(0, ch);
          var[ch] = st->running_var.at(0, ch);
        }
      }
      auto cache = std::make_shared<BatchNormCache>();
      cache->inv_std.resize(c);
      for (std::size_t ch = 0; ch < c; ++ch) {
        cache->inv_std[ch] = 1.0 / std::sqrt(var[ch] + attrs.bn_eps);
      }
      cache->x_hat = Tensor(x.rows(), x.cols());
      Tensor out(x.rows(), x.cols());
      for (std::size_t n = 0; n < x.rows(); ++n) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t s = 0; s < sp; ++s) {
            double xh =
                (x.at(n, ch * sp + s) - mean[ch]) * cache->inv_std[ch];
            cache->x_hat.at(n, ch * sp + s) = xh;
            out.at(n, ch * sp + s) = gamma.at(0, ch) * xh + beta.at(0, ch);
          }
        }
      }
      attrs.bn_cache = std::move(cache);
      return out;
    }
  }
  throw ShapeError("record: unknown op");
}

void Tape::set_row_gradient_scale(NodeId id, std::vector<double> rho) {
  require(id < nodes_.size(), "set_row_gradient_scale: bad node id");
  Node& n = nodes_[id];
  if (rho.size() != n.value.rows()) {
    throw ShapeError("set_row_gradient_scale: got " +
                     std::to_string(rho.size()) + " weights for " +
                     std::to_string(n.value.rows()) + " rows");
  }
  for (double r : rho) {
    require(r >= 0.0 && r <= 1.0,
            "set_row_gradient_scale: weights must lie in [0, 1]");
  }
  n.row_scale = std::move(rho);
}

Tensor Tape::grad(NodeId id) const {
  if (id < last_grads_.size() && !last_grads_[id].empty()) {
    return last_grads_[id];
  }
  return Tensor(nodes_[id].value.rows(), nodes_[id].value.cols());
}

void Tape::backward(NodeId loss) {
  require(loss < nodes_.size(), "backward: bad node id");
  if (nodes_[loss].value.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " +
                     nodes_[loss].value.shape_str());
  }
  std::vector<Tensor> grads(nodes_.size());
  grads[loss] = Tensor::scalar(1.0);

  for (std::size_t ii = loss + 1; ii-- > 0;) {
    if (grads[ii].empty()) continue;
    Node& n = nodes_[ii];
    if (!n.row_scale.empty()) {
      Tensor& g = grads[ii];
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) {
          g.at(r, c) *= n.row_scale[r];
        }
      }
    }
    if (n.op == Op::kParam) {
      Tensor& g = grads[ii];
      for (std::size_t i = 0; i < g.size(); ++i) n.param->grad[i] += g[i];
      continue;
    }
    if (n.op == Op::kConst) continue;
    backprop_node(ii, grads);
  }
  last_grads_ = std::move(grads);
}

void Tape::backprop_node(std::size_t i, std::vector<Tensor>& grads) {
  Node& n = nodes_[i];
  const Tensor& g = grads[i];
  auto in = [&](std::size_t k) -> const Tensor& {
    return nodes_[n.inputs[k]].value;
  };

  switch (n.op) {
    case Op::kConst:
    case Op::kParam:
      return;

    case Op::kAdd: {
      Tensor &ga = grad_buf(grads, n.inputs[0]), &gb = grad_buf(grads, n.inputs[1]);
      for (std::size_t k = 0; k < g.size(); ++k) {
        ga[k] += g[k];
        gb[k] += g[k];
      }
      return;
    }
    case Op::kSub: {
      Tensor &ga = grad_buf(grads, n.inputs[0]), &gb = grad_buf(grads, n.inputs[1]);
      for (std::size_t k = 0; k < g.size(); ++k) {
        ga[k] += g[k];
        gb[k] -= g[k];
      }
      return;
    }
    case Op::kMul: {
      const Tensor &a = in(0), &b = in(1);
      Tensor &ga = grad_buf(grads, n.inputs[0]), &gb = grad_buf(grads, n.inputs[1]);
      for (std::size_t k = 0; k < g.size(); ++k) {
        ga[k] += g[k] * b[k];
        gb[k] += g[k] * a[k];
      }
      return;
    }
    case Op::kScalarMul: {
      Tensor& ga = grad_buf(grads, n.inputs[0]);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += n.attrs.scalar * g[k];
      return;
    }
    case Op::kMatmul: {
      const Tensor &a = in(0), &b = in(1);
      Tensor &ga = grad_buf(grads, n.inputs[0]), &gb = grad_buf(grads, n.inputs[1]);
      // ga += g * b^T ; gb += a^T * g
      for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t p = 0; p < a.cols(); ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < b.cols(); ++j) {
            s += g.at(r, j) * b.at(p, j);
          }
          ga.at(r, p) += s;
        }
      }
      for (std::size_t p = 0; p < b.rows(); ++p) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
          double s = 0.0;
          for (std::size_t r = 0; r < a.rows(); ++r) {
            s += a.at(r, p) * g.at(r, j);
          }
          gb.at(p, j) += s;
        }
      }
      return;
    }
    case Op::kExp: {
      Tensor& ga = grad_buf(grads, n.inputs[0]);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * n.value[k];
      return;
    }
    case Op::kLog: {
      const Tensor& a = in(0);
      Tensor& ga = grad_buf(grads, n.inputs[0]);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] / a[k];
      return;
    }
    case Op::kLogClamped: {
      const Tensor& a = in(0);
      Tensor& ga = grad_buf(grads, n.inputs[0]);
      for (std::size_t k = 0; k < g.size(); ++k) {
        ga[k] += g[k] / std::max(a[k], 1e-300);
      }
      return;
    }
    case Op::kNegate: {
      Tensor& ga = grad_buf(grads, n.inputs[0]);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] -= g[k];
      return;
    }
    case Op::kSigmoid: {
      Tensor& ga = grad_buf(grads, n.inputs[0]);
      for (std::size_t k = 0; k < g.size(); ++k) {
        ga[k] += g[k] * n.value[k] * (1.0 - n.value[k]);
      }
      return;
    }
    case Op::kRelu: {
      const Tensor& a = in(0);
      Tensor& ga = grad_buf(grads, n.inputs[0]);
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (a[k] > 0.0) ga[k] += g[k];
      }
      return;
    }
    case Op::kClamp: {
      const Tensor& a = in(0);
      Tensor& ga = grad_buf(grads, n.inputs[0]);
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (a[k] > n.attrs.scalar && a[k] < n.attrs.scalar2) ga[k] += g[k];
      }
      return;
    }
    case Op::kRowSum: {
      const Tensor& a = in(0);
      Tensor& ga = grad_buf(grads, n.inputs[0]);
      for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) ga.at(r, c) += g.at(r, 0);
      }
      return;
    }
    case Op::kSumAll: {
      Tensor& ga = grad_buf(grads, n.inputs[0]);
      for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[0];
      return;
    }
    case Op::kRowNormalize: {
      const Tensor& a = in(0);
      Tensor& ga = grad_buf(grads, n.inputs[0]);
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0, dot = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) s += a.at(r, c);
        for (std::size_t c = 0; c < a.cols(); ++c) {
          dot += g.at(r, c) * n.value.at(r, c);
        }
        for (std::size_t c = 0; c < a.cols(); ++c) {
          ga.at(r, c) += (g.at(r, c) - dot) / s;
        }
      }
      return;
    }
    case Op::kRowDiv: {
      const Tensor &x = in(0), &s = in(1);
      Tensor &gx = grad_buf(grads, n.inputs[0]), &gs = grad_buf(grads, n.inputs[1]);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const double sv = s.at(r, 0);
        double dot = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) {
          gx.at(r, c) += g.at(r, c) / sv;
          dot += g.at(r, c) * x.at(r, c);
        }
        gs.at(r, 0) -= dot / (sv * sv);
      }
      return;
    }
    case Op::kSoftmax: {
      Tensor& ga = grad_buf(grads, n.inputs[0]);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < g.cols(); ++c) {
          dot += g.at(r, c) * n.value.at(r, c);
        }
        for (std::size_t c = 0; c < g.cols(); ++c) {
          ga.at(r, c) += n.value.at(r, c) * (g.at(r, c) - dot);
        }
      }
      return;
    }
    case Op::kPairwiseScaledSqdist: {
      const Tensor &a = in(0), &b = in(1), &sig = in(2);
      Tensor& ga = grad_buf(grads, n.inputs[0]);
      Tensor& gb = grad_buf(grads, n.inputs[1]);
      Tensor& gs = grad_buf(grads, n.inputs[2]);
      const std::size_t d = a.cols();
      for (std::size_t k = 0; k < d; ++k) {
        const double sv = sig[k];
        const double inv_s2 = 1.0 / (sv * sv);
        const double inv_s3 = inv_s2 / sv;
        double gsig = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i) {
          double gai = 0.0;
          for (std::size_t j = 0; j < b.rows(); ++j) {
            const double gv = g.at(i, j);
            if (gv == 0.0) continue;
            const double diff = a.at(i, k) - b.at(j, k);
            gai += gv * diff;
            gb.at(j, k) -= gv * diff * inv_s2;
            gsig -= gv * diff * diff * inv_s3;
          }
          ga.at(i, k) += gai * inv_s2;
        }
        gs[k] += gsig;
      }
      return;
    }
    case Op::kLinearSolve: {
      // X = A^-1 B:  gB = A^-T g,  gA -= gB X^T.
      const Tensor& x = n.value;
      Tensor gb_contrib = n.attrs.lu->solve_transposed(g);
      Tensor &ga = grad_buf(grads, n.inputs[0]), &gb = grad_buf(grads, n.inputs[1]);
      for (std::size_t i = 0; i < gb.rows(); ++i) {
        for (std::size_t j = 0; j < gb.cols(); ++j) {
          gb.at(i, j) += gb_contrib.at(i, j);
        }
      }
      for (std::size_t i = 0; i < ga.rows(); ++i) {
        for (std::size_t j = 0; j < ga.cols(); ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < x.cols(); ++k) {
            s += gb_contrib.at(i, k) * x.at(j, k);
          }
          ga.at(i, j) -= s;
        }
      }
      return;
    }
    case Op::kL1Norm: {
      const Tensor& a = in(0);
      Tensor& ga = grad_buf(grads, n.inputs[0]);
      for (std::size_t k = 0; k < a.size(); ++k) {
        double sgn = a[k] > 0.0 ? 1.0 : (a[k] < 0.0 ? -1.0 : 0.0);
        ga[k] += g[0] * sgn;
      }
      return;
    }
    case Op::kCrossEntropy: {
      // d/dz mean_i [lse(z_i) - y_i.z_i] = (softmax - y)/N. Labels are
      // treated as constants.
      const Tensor &z = in(0), &y = in(1);
      Tensor& gz = grad_buf(grads, n.inputs[0]);
      Tensor p = softmax_rows(z);
      const double inv_n = 1.0 / static_cast<double>(z.rows());
      for (std::size_t i = 0; i < z.rows(); ++i) {
        for (std::size_t j = 0; j < z.cols(); ++j) {
          gz.at(i, j) += g[0] * (p.at(i, j) - y.at(i, j)) * inv_n;
        }
      }
      return;
    }
    case Op::kEntropyPerRow: {
      // Zero entries contribute 0 with subgradient 0.
      const Tensor& p = in(0);
      Tensor& gp = grad_buf(grads, n.inputs[0]);
      for (std::size_t i = 0; i < p.rows(); ++i) {
        for (std::size_t j = 0; j < p.cols(); ++j) {
          double v = p.at(i, j);
          if (v > 0.0) gp.at(i, j) -= g.at(i, 0) * (std::log(v) + 1.0);
        }
      }
      return;
    }
    case Op::kConcatRows: {
      const Tensor& a = in(0);
      Tensor &ga = grad_buf(grads, n.inputs[0]), &gb = grad_buf(grads, n.inputs[1]);
      for (std::size_t i = 0; i < ga.rows(); ++i)
        for (std::size_t j = 0; j < ga.cols(); ++j) ga.at(i, j) += g.at(i, j);
      for (std::size_t i = 0; i < gb.rows(); ++i)
        for (std::size_t j = 0; j < gb.cols(); ++j)
          gb.at(i, j) += g.at(a.rows() + i, j);
      return;
    }
    case Op::kSliceRows: {
      Tensor& ga = grad_buf(grads, n.inputs[0]);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j)
          ga.at(n.attrs.row_begin + i, j) += g.at(i, j);
      return;
    }
    case Op::kAddRow: {
      Tensor &gx = grad_buf(grads, n.inputs[0]), &gv = grad_buf(grads, n.inputs[1]);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) {
          gx.at(i, j) += g.at(i, j);
          gv.at(0, j) += g.at(i, j);
        }
      }
      return;
    }
    case Op::kConv2d: {
      const Tensor &x = in(0), &w = in(1);
      const Conv2dGeom& geo = *n.attrs.conv;
      Tensor& gx = grad_buf(grads, n.inputs[0]);
      Tensor& gw = grad_buf(grads, n.inputs[1]);
      Tensor& gb = grad_buf(grads, n.inputs[2]);
      const std::size_t oh = geo.out_h(), ow = geo.out_w();
      for (std::size_t nn = 0; nn < x.rows(); ++nn) {
        const double* xr = x.data() + nn * x.cols();
        double* gxr = gx.data() + nn * x.cols();
        for (std::size_t oc = 0; oc < geo.out_c; ++oc) {
          const double* wr = w.data() + oc * w.cols();
          double* gwr = gw.data() + oc * w.cols();
          for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const double gv = g.at(nn, (oc * oh + oy) * ow + ox);
              if (gv == 0.0) continue;
              gb.at(0, oc) += gv;
              for (std::size_t ic = 0; ic < geo.in_c; ++ic) {
                for (std::size_t ky = 0; ky < geo.kernel; ++ky) {
                  const long iy = static_cast<long>(oy * geo.stride + ky) -
                                  static_cast<long>(geo.pad);
                  if (iy < 0 || iy >= static_cast<long>(geo.in_h)) continue;
                  for (std::size_t kx = 0; kx < geo.kernel; ++kx) {
                    const long ix = static_cast<long>(ox * geo.stride + kx) -
                                    static_cast<long>(geo.pad);
                    if (ix < 0 || ix >= static_cast<long>(geo.in_w)) continue;
                    const std::size_t xi = (ic * geo.in_h + iy) * geo.in_w + ix;
                    const std::size_t wi = (ic * geo.kernel + ky) * geo.kernel + kx;
                    gwr[wi] += gv * xr[xi];
                    gxr[xi] += gv * wr[wi];
                  }
                }
              }
            }
          }
        }
      }
      return;
    }
    case Op::kBatchNorm: {
      const Tensor& gamma = in(1);
      const BatchNormCache& cache = *n.attrs.bn_cache;
      const std::size_t c = n.attrs.bn_channels, sp = n.attrs.bn_spatial;
      const Tensor& x = in(0);
      Tensor& gx = grad_buf(grads, n.inputs[0]);
      Tensor& ggamma = grad_buf(grads, n.inputs[1]);
      Tensor& gbeta = grad_buf(grads, n.inputs[2]);
      const double count = static_cast<double>(x.rows() * sp);
      for (std::size_t ch = 0; ch < c; ++ch) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t nn = 0; nn < x.rows(); ++nn) {
          for (std::size_t s = 0; s < sp; ++s) {
            const double gv = g.at(nn, ch * sp + s);
            sum_g += gv;
            sum_gx += gv * cache.x_hat.at(nn, ch * sp + s);
          }
        }
        ggamma.at(0, ch) += sum_gx;
        gbeta.at(0, ch) += sum_g;
        const double k = gamma.at(0, ch) * cache.inv_std[ch];
        if (n.attrs.bn_training) {
          for (std::size_t nn = 0; nn < x.rows(); ++nn) {
            for (std::size_t s = 0; s < sp; ++s) {
              const double gv = g.at(nn, ch * sp + s);
              const double xh = cache.x_hat.at(nn, ch * sp + s);
              gx.at(nn, ch * sp + s) +=
                  k * (gv - sum_g / count - xh * sum_gx / count);
            }
          }
        } else {
          for (std::size_t nn = 0; nn < x.rows(); ++nn) {
            for (std::size_t s = 0; s < sp; ++s) {
              gx.at(nn, ch * sp + s) += k * g.at(nn, ch * sp + s);
            }
          }
        }
      }
      return;
    }
  }
}

}  // namespace lapda
