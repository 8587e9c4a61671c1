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

#include <cmath>
#include <random>

#include "lapda/errors.hpp"
#include "lapda/graph.hpp"
#include "testutil.hpp"

using namespace lapda;
using testutil::absorption_power_iteration;
using testutil::max_grad_rel_error;
using testutil::random_tensor;

namespace {

// Random similarity-graph transition blocks, evaluated on a throwaway tape.
struct RandomChain {
  Tensor t_abs, t_cross, y;
};

RandomChain random_chain(std::mt19937_64& rng, std::size_t nt, std::size_t ns,
                         int classes) {
  Tape tape;
  const std::size_t d = 3;
  NodeId f_s = tape.constant(random_tensor(rng, ns, d, -1.5, 1.5));
  NodeId f_t = tape.constant(random_tensor(rng, nt, d, -1.5, 1.5));
  NodeId sigma = tape.constant(random_tensor(rng, 1, d, 0.8, 2.0));
  SimilarityGraph g = build_similarity(tape, f_s, f_t, sigma, ns, nt);
  TransitionPair fwd = forward_transition(tape, g);

  std::uniform_int_distribution<int> pick(0, classes - 1);
  Tensor y(ns, classes);
  for (std::size_t i = 0; i < ns; ++i) y.at(i, pick(rng)) = 1.0;

  return {tape.value(fwd.t_abs), tape.value(fwd.t_cross), y};
}

}  // namespace

TEST_CASE("similarity weights: zero distance gives weight exactly 1") {
  Tape tape;
  Tensor f(3, 2, {0.3, -0.7, 0.3, -0.7, 1.0, 2.0});
  NodeId fn = tape.constant(f);
  NodeId sigma = tape.constant(Tensor(1, 2, 1.0));
  SimilarityGraph g = build_similarity(tape, fn, fn, sigma, 3, 3);
  const Tensor& w = tape.value(g.w_ss);
  // identical rows 0 and 1, and the diagonal, sit at distance zero
  CHECK(w.at(0, 0) == 1.0);
  CHECK(w.at(1, 1) == 1.0);
  CHECK(w.at(2, 2) == 1.0);
  CHECK(w.at(0, 1) == 1.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(w[i] > 0.0);
    CHECK(w[i] <= 1.0);
  }
}

TEST_CASE("similarity weights: hand value exp(-4/2)") {
  Tape tape;
  NodeId f_s = tape.constant(Tensor(1, 1, {0.0}));
  NodeId f_t = tape.constant(Tensor(1, 1, {2.0}));
  NodeId sigma = tape.constant(Tensor(1, 1, {1.0}));
  SimilarityGraph g = build_similarity(tape, f_s, f_t, sigma, 1, 1);
  CHECK(tape.value(g.w_st).item() ==
        doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
  CHECK(tape.value(g.w_st).item() == doctest::Approx(0.1353352832).epsilon(1e-9));
}

TEST_CASE("similarity weights: joint rescaling of features and sigma") {
  std::mt19937_64 rng(2);
  Tensor f_s = random_tensor(rng, 5, 3);
  Tensor f_t = random_tensor(rng, 4, 3);
  Tensor sigma = random_tensor(rng, 1, 3, 0.5, 2.0);
  const double c = 3.7;

  auto weights = [&](double scale) {
    Tape tape;
    Tensor fs = f_s, ft = f_t, sg = sigma;
    for (std::size_t i = 0; i < fs.size(); ++i) fs[i] *= scale;
    for (std::size_t i = 0; i < ft.size(); ++i) ft[i] *= scale;
    for (std::size_t i = 0; i < sg.size(); ++i) sg[i] *= scale;
    SimilarityGraph g =
        build_similarity(tape, tape.constant(fs), tape.constant(ft),
                         tape.constant(sg), 5, 4);
    return tape.value(g.w_ts);
  };
  CHECK(max_abs_diff(weights(1.0), weights(c)) < 1e-12);
}

TEST_CASE("similarity weights: cross blocks are exact transposes") {
  std::mt19937_64 rng(3);
  Tape tape;
  NodeId f_s = tape.constant(random_tensor(rng, 6, 4));
  NodeId f_t = tape.constant(random_tensor(rng, 5, 4));
  NodeId sigma = tape.constant(random_tensor(rng, 1, 4, 0.5, 2.0));
  SimilarityGraph g = build_similarity(tape, f_s, f_t, sigma, 6, 5);
  const Tensor& st = tape.value(g.w_st);
  const Tensor& ts = tape.value(g.w_ts);
  for (std::size_t i = 0; i < st.rows(); ++i) {
    for (std::size_t j = 0; j < st.cols(); ++j) {
      CHECK(st.at(i, j) == ts.at(j, i));
    }
  }
}

TEST_CASE("forward transition: 1+1 node hand normalization") {
  Tape tape;
  NodeId f_s = tape.constant(Tensor(1, 1, {1.0}));
  NodeId f_t = tape.constant(Tensor(1, 1, {0.0}));
  NodeId sigma = tape.constant(Tensor(1, 1, {1.0}));
  SimilarityGraph g = build_similarity(tape, f_s, f_t, sigma, 1, 1);
  TransitionPair fwd = forward_transition(tape, g);
  const double w = std::exp(-0.5);
  CHECK(tape.value(fwd.t_abs).item() ==
        doctest::Approx(1.0 / (1.0 + w)).epsilon(1e-12));
  CHECK(tape.value(fwd.t_cross).item() ==
        doctest::Approx(w / (1.0 + w)).epsilon(1e-12));

  TransitionPair rev = reverse_transition(tape, g);
  CHECK(tape.value(rev.t_abs).item() ==
        doctest::Approx(1.0 / (1.0 + w)).epsilon(1e-12));
  CHECK(tape.value(rev.t_cross).item() ==
        doctest::Approx(w / (1.0 + w)).epsilon(1e-12));
}

TEST_CASE("transition rows of [abs | cross] sum to 1") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Tape tape;
    NodeId f_s = tape.constant(random_tensor(rng, 6, 3, -2.0, 2.0));
    NodeId f_t = tape.constant(random_tensor(rng, 7, 3, -2.0, 2.0));
    NodeId sigma = tape.constant(random_tensor(rng, 1, 3, 0.5, 2.0));
    SimilarityGraph g = build_similarity(tape, f_s, f_t, sigma, 6, 7);
    for (bool forward : {true, false}) {
      TransitionPair t = forward ? forward_transition(tape, g)
                                 : reverse_transition(tape, g);
      const Tensor& abs = tape.value(t.t_abs);
      const Tensor& cross = tape.value(t.t_cross);
      for (std::size_t i = 0; i < abs.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < abs.cols(); ++j) s += abs.at(i, j);
        for (std::size_t j = 0; j < cross.cols(); ++j) s += cross.at(i, j);
        CHECK(std::abs(s - 1.0) < 1e-12);
        for (std::size_t j = 0; j < abs.cols(); ++j) {
          CHECK(abs.at(i, j) > 0.0);
          CHECK(abs.at(i, j) < 1.0);
        }
      }
    }
  }
}

TEST_CASE("transition: identical points make every entry 0.25") {
  Tape tape;
  Tensor same(2, 2, 0.0);
  NodeId f = tape.constant(same);
  NodeId sigma = tape.constant(Tensor(1, 2, 1.0));
  SimilarityGraph g = build_similarity(tape, f, f, sigma, 2, 2);
  TransitionPair fwd = forward_transition(tape, g);
  const Tensor& abs = tape.value(fwd.t_abs);
  const Tensor& cross = tape.value(fwd.t_cross);
  for (std::size_t i = 0; i < abs.size(); ++i) CHECK(abs[i] == 0.25);
  for (std::size_t i = 0; i < cross.size(); ++i) CHECK(cross[i] == 0.25);
}

TEST_CASE("reverse blocks of a permuted-domain graph are permuted forward "
          "blocks") {
  std::mt19937_64 rng(5);
  Tensor ft = random_tensor(rng, 4, 2);
  // source = target rows under permutation p
  const std::size_t p[4] = {2, 0, 3, 1};
  Tensor fs(4, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    fs.at(i, 0) = ft.at(p[i], 0);
    fs.at(i, 1) = ft.at(p[i], 1);
  }
  std::size_t pinv[4];
  for (std::size_t i = 0; i < 4; ++i) pinv[p[i]] = i;

  Tape tape;
  SimilarityGraph g =
      build_similarity(tape, tape.constant(fs), tape.constant(ft),
                       tape.constant(Tensor(1, 2, 1.0)), 4, 4);
  TransitionPair fwd = forward_transition(tape, g);
  TransitionPair rev = reverse_transition(tape, g);
  const Tensor& t_tt = tape.value(fwd.t_abs);
  const Tensor& t_ts = tape.value(fwd.t_cross);
  const Tensor& t_ss = tape.value(rev.t_abs);
  const Tensor& t_st = tape.value(rev.t_cross);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(t_ss.at(i, j) ==
            doctest::Approx(t_tt.at(p[i], p[j])).epsilon(1e-12));
      CHECK(t_st.at(i, j) ==
            doctest::Approx(t_ts.at(p[i], pinv[j])).epsilon(1e-12));
    }
  }
}

TEST_CASE("closed-form propagation: single-target weighted average") {
  // One target, two absorbing sources with weights (1, 3): the chain lands
  // on them with probabilities (0.25, 0.75).
  Tape tape;
  NodeId t_abs = tape.constant(Tensor(1, 1, {0.2}));
  NodeId t_cross = tape.constant(Tensor(1, 2, {0.2, 0.6}));
  NodeId y = tape.constant(Tensor::identity(2));
  NodeId out = propagate_closed(tape, t_abs, t_cross, y);
  CHECK(std::abs(tape.value(out).at(0, 0) - 0.25) < 1e-9);
  CHECK(std::abs(tape.value(out).at(0, 1) - 0.75) < 1e-9);
}

TEST_CASE("closed-form propagation equals the absorbing fixed point") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    std::uniform_int_distribution<std::size_t> size(2, 32);
    const std::size_t nt = size(rng), ns = size(rng);
    RandomChain chain = random_chain(rng, nt, ns, 3);

    Tape tape;
    NodeId out = propagate_closed(tape, tape.constant(chain.t_abs),
                                  tape.constant(chain.t_cross),
                                  tape.constant(chain.y));
    Tensor oracle =
        testutil::absorption_fixed_point(chain.t_abs, chain.t_cross, chain.y);
    CHECK(max_abs_diff(tape.value(out), oracle) < 1e-9);

    // absorption completeness: one-hot mass is fully distributed
    const Tensor& v = tape.value(out);
    for (std::size_t i = 0; i < v.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < v.cols(); ++j) {
        s += v.at(i, j);
        CHECK(v.at(i, j) >= 0.0);
        CHECK(v.at(i, j) <= 1.0 + 1e-12);
      }
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("closed-form propagation is invariant under lazification") {
  std::mt19937_64 rng(7);
  RandomChain chain = random_chain(rng, 9, 6, 3);
  Tape tape;
  NodeId base = propagate_closed(tape, tape.constant(chain.t_abs),
                                 tape.constant(chain.t_cross),
                                 tape.constant(chain.y));
  for (double eps : {0.1, 0.5, 0.9}) {
    // per-node self loop: row_i <- (1-eps)*row_i + eps*e_i
    Tensor lazy_abs = chain.t_abs;
    Tensor lazy_cross = chain.t_cross;
    for (std::size_t i = 0; i < lazy_abs.rows(); ++i) {
      for (std::size_t j = 0; j < lazy_abs.cols(); ++j) {
        lazy_abs.at(i, j) *= (1.0 - eps);
      }
      lazy_abs.at(i, i) += eps;
      for (std::size_t j = 0; j < lazy_cross.cols(); ++j) {
        lazy_cross.at(i, j) *= (1.0 - eps);
      }
    }
    NodeId lazy = propagate_closed(tape, tape.constant(lazy_abs),
                                   tape.constant(lazy_cross),
                                   tape.constant(chain.y));
    CHECK(max_abs_diff(tape.value(base), tape.value(lazy)) < 1e-9);
  }
}

TEST_CASE("truncated propagation") {
  std::mt19937_64 rng(8);

  SUBCASE("one step is exactly T_cross * y") {
    RandomChain chain = random_chain(rng, 5, 4, 3);
    Tape tape;
    TruncatedPropagation p = propagate_truncated(
        tape, tape.constant(chain.t_abs), tape.constant(chain.t_cross),
        tape.constant(chain.y), 1, false);
    CHECK(max_abs_diff(tape.value(p.labels),
                       matmul(chain.t_cross, chain.y)) == 0.0);
  }

  SUBCASE("50 steps match the closed form") {
    for (int trial = 0; trial < 10; ++trial) {
      RandomChain chain = random_chain(rng, 32, 32, 4);
      Tape tape;
      NodeId closed = propagate_closed(tape, tape.constant(chain.t_abs),
                                       tape.constant(chain.t_cross),
                                       tape.constant(chain.y));
      TruncatedPropagation trunc = propagate_truncated(
          tape, tape.constant(chain.t_abs), tape.constant(chain.t_cross),
          tape.constant(chain.y), 50, false);
      CHECK(max_abs_diff(tape.value(closed), tape.value(trunc.labels)) < 1e-8);
    }
  }

  SUBCASE("deficit is nonnegative and nonincreasing in K") {
    RandomChain chain = random_chain(rng, 10, 8, 3);
    Tape tape;
    std::vector<Tensor> deficits;
    for (int k = 1; k <= 30; ++k) {
      TruncatedPropagation p = propagate_truncated(
          tape, tape.constant(chain.t_abs), tape.constant(chain.t_cross),
          tape.constant(chain.y), k, false);
      deficits.push_back(tape.value(p.deficit));
    }
    for (std::size_t k = 0; k < deficits.size(); ++k) {
      for (std::size_t i = 0; i < deficits[k].rows(); ++i) {
        CHECK(deficits[k].at(i, 0) >= -1e-12);
        if (k > 0) {
          CHECK(deficits[k].at(i, 0) <= deficits[k - 1].at(i, 0) + 1e-12);
        }
      }
    }
  }

  SUBCASE("steps < 1 is rejected") {
    RandomChain chain = random_chain(rng, 3, 3, 2);
    Tape tape;
    CHECK_THROWS_AS(
        propagate_truncated(tape, tape.constant(chain.t_abs),
                            tape.constant(chain.t_cross),
                            tape.constant(chain.y), 0, false),
        ShapeError);
  }
}

TEST_CASE("cycle loss") {
  SUBCASE("identical labels give zero") {
    Tape tape;
    Tensor y(3, 2, {1, 0, 0, 1, 1, 0});
    NodeId a = tape.constant(y);
    NodeId b = tape.constant(y);
    CHECK(tape.value(cycle_loss(tape, a, b)).item() == 0.0);
  }

  SUBCASE("hand value: single row L1 of 0.4") {
    Tape tape;
    NodeId yh = tape.constant(Tensor(1, 2, {0.8, 0.2}));
    NodeId ys = tape.constant(Tensor(1, 2, {1.0, 0.0}));
    CHECK(tape.value(cycle_loss(tape, yh, ys)).item() ==
          doctest::Approx(0.4).epsilon(1e-12));
  }

  SUBCASE("invariant under simultaneous row permutation") {
    std::mt19937_64 rng(9);
    Tensor yh = random_tensor(rng, 5, 3, 0.0, 1.0);
    Tensor ys(5, 3);
    for (std::size_t i = 0; i < 5; ++i) ys.at(i, i % 3) = 1.0;
    const std::size_t perm[5] = {3, 1, 4, 0, 2};
    Tensor yhp(5, 3), ysp(5, 3);
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        yhp.at(i, j) = yh.at(perm[i], j);
        ysp.at(i, j) = ys.at(perm[i], j);
      }
    }
    Tape tape;
    double base =
        tape.value(cycle_loss(tape, tape.constant(yh), tape.constant(ys)))
            .item();
    double permuted =
        tape.value(cycle_loss(tape, tape.constant(yhp), tape.constant(ysp)))
            .item();
    CHECK(base == doctest::Approx(permuted).epsilon(1e-12));
  }
}

TEST_CASE("cycle-loss gradients reach features and bandwidth") {
  std::mt19937_64 rng(10);
  const std::size_t ns = 8, nt = 8, d = 2;
  Parameter f_s("f_s", random_tensor(rng, ns, d, -1.0, 1.0));
  Parameter f_t("f_t", random_tensor(rng, nt, d, -1.0, 1.0));
  Parameter log_sigma("log_sigma", Tensor(1, d, 0.0));
  Tensor ys(ns, 2);
  for (std::size_t i = 0; i < ns; ++i) ys.at(i, i % 2) = 1.0;

  auto build_loss = [&](bool closed) {
    return [&, closed](Tape& t) {
      NodeId sigma = t.exp(t.param(log_sigma));
      SimilarityGraph g = build_similarity(t, t.param(f_s), t.param(f_t),
                                           sigma, ns, nt);
      TransitionPair fwd = forward_transition(t, g);
      TransitionPair rev = reverse_transition(t, g);
      NodeId y = t.constant(ys);
      if (closed) {
        NodeId yt = propagate_closed(t, fwd.t_abs, fwd.t_cross, y);
        NodeId yh = propagate_closed(t, rev.t_abs, rev.t_cross, yt);
        return cycle_loss(t, yh, y);
      }
      TruncatedPropagation yt =
          propagate_truncated(t, fwd.t_abs, fwd.t_cross, y, 20, true);
      TruncatedPropagation yh =
          propagate_truncated(t, rev.t_abs, rev.t_cross, yt.labels, 20, true);
      NodeId base = cycle_loss(t, yh.labels, y);
      return t.add(base, t.scalar_mul(t.sum_all(yh.deficit),
                                      1.0 / static_cast<double>(ns)));
    };
  };
  CHECK(max_grad_rel_error({&f_s, &f_t, &log_sigma}, build_loss(true)) < 1e-4);
  CHECK(max_grad_rel_error({&f_s, &f_t, &log_sigma}, build_loss(false)) <
        1e-4);
}

TEST_CASE("perfect classwise clusters give near-zero cycle loss") {
  // Source and target coincide classwise; clusters 20 sigma apart.
  const std::size_t per_class = 4, d = 2;
  Tensor f_s(2 * per_class, d), f_t(2 * per_class, d);
  Tensor ys(2 * per_class, 2);
  for (std::size_t i = 0; i < per_class; ++i) {
    f_s.at(i, 0) = 0.0;
    f_t.at(i, 0) = 0.0;
    ys.at(i, 0) = 1.0;
    f_s.at(per_class + i, 0) = 20.0;
    f_t.at(per_class + i, 0) = 20.0;
    ys.at(per_class + i, 1) = 1.0;
  }
  Tape tape;
  SimilarityGraph g = build_similarity(
      tape, tape.constant(f_s), tape.constant(f_t),
      tape.constant(Tensor(1, d, 1.0)), 2 * per_class, 2 * per_class);
  TransitionPair fwd = forward_transition(tape, g);
  TransitionPair rev = reverse_transition(tape, g);
  NodeId y = tape.constant(ys);
  NodeId yt = propagate_closed(tape, fwd.t_abs, fwd.t_cross, y);
  NodeId yh = propagate_closed(tape, rev.t_abs, rev.t_cross, yt);
  CHECK(tape.value(cycle_loss(tape, yh, y)).item() < 1e-3);
}
