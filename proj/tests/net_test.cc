// Copyright 2026 The CycleFlow Authors
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

#include "cycleflow/net.h"

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cycleflow/error.h"

namespace cycleflow {
namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng,
                               double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

TEST(Net, LayoutCoversParameters) {
  MlpSpec spec{5, {7, 3}, 2, Activation::kTanh};
  EXPECT_EQ(spec.num_params(), 5u * 7 + 7 + 7 * 3 + 3 + 3 * 2 + 2);
  ParamVector p = init_params(spec, 1);
  EXPECT_EQ(p.size(), spec.num_params());
  EXPECT_NO_THROW(p.check_layout());
  EXPECT_EQ(p.owner(0), "layer0.weight");
  EXPECT_EQ(p.owner(5 * 7), "layer0.bias");
}

TEST(Net, GlorotInitBoundsAndZeroBias) {
  MlpSpec spec{10, {20}, 4, Activation::kGeluApprox};
  ParamVector p = init_params(spec, 3);
  for (const auto& e : p.layout) {
    const bool bias = e.name.find("bias") != std::string::npos;
    const double limit =
        bias ? 0.0 : std::sqrt(6.0 / (e.shape[0] + e.shape[1]));
    for (std::size_t i = e.offset; i < e.offset + e.size; ++i) {
      EXPECT_LE(std::abs(p.values[i]), limit);
    }
  }
  EXPECT_EQ(init_params(spec, 3).values, p.values);
  EXPECT_NE(init_params(spec, 4).values, p.values);
}

TEST(Net, ZeroWeightsGiveZeroOutput) {
  MlpSpec spec{4, {6}, 3, Activation::kTanh};
  ParamVector p = ParamVector::zeros(spec);
  const auto y = forward(spec, p, std::vector<double>{1.0, -2.0, 3.0, 0.5});
  for (double v : y) EXPECT_EQ(v, 0.0);
}

TEST(Net, IdentityLinearLayer) {
  MlpSpec spec{3, {}, 3, Activation::kTanh};
  ParamVector p = ParamVector::zeros(spec);
  for (int i = 0; i < 3; ++i) p.values[i * 3 + i] = 1.0;
  const std::vector<double> x{0.3, -1.5, 2.0};
  EXPECT_EQ(forward(spec, p, x), x);
}

TEST(Net, HandEvaluatedTanhNetwork) {
  MlpSpec spec{2, {2}, 1, Activation::kTanh};
  ParamVector p = ParamVector::zeros(spec);
  // layer0.weight (2x2), layer0.bias, layer1.weight (1x2), layer1.bias
  p.values = {0.1, 0.2, -0.3, 0.4, 0.01, -0.02, 0.5, -0.6, 0.03};
  const double h0 = std::tanh(0.1 * 1.0 + 0.01);
  const double h1 = std::tanh(-0.3 * 1.0 - 0.02);
  const double expected = 0.5 * h0 - 0.6 * h1 + 0.03;
  const auto y = forward(spec, p, std::vector<double>{1.0, 0.0});
  ASSERT_EQ(y.size(), 1u);
  EXPECT_NEAR(y[0], expected, 1e-15);
  EXPECT_NEAR(y[0], 0.2704836, 1e-6);
}

TEST(Net, DimensionMismatchIsConfigError) {
  MlpSpec spec{3, {4}, 2, Activation::kTanh};
  ParamVector p = init_params(spec, 0);
  EXPECT_THROW(forward(spec, p, std::vector<double>{1.0, 2.0}), ConfigError);
  EXPECT_THROW(backward(spec, p, std::vector<double>{1.0, 2.0, 3.0},
                        std::vector<double>{1.0}),
               ConfigError);
  MlpSpec other{3, {5}, 2, Activation::kTanh};
  EXPECT_THROW(forward(other, p, std::vector<double>{1.0, 2.0, 3.0}),
               ConfigError);
}

TEST(Net, ZeroOutputGradGivesZeroGradients) {
  MlpSpec spec{3, {4}, 2, Activation::kGeluApprox};
  ParamVector p = init_params(spec, 2);
  const auto g = backward(spec, p, std::vector<double>{0.1, 0.2, 0.3},
                          std::vector<double>{0.0, 0.0});
  for (double v : g.params.values) EXPECT_EQ(v, 0.0);
  for (double v : g.input) EXPECT_EQ(v, 0.0);
}

TEST(Net, LinearLayerGradientIsOuterProduct) {
  MlpSpec spec{3, {}, 2, Activation::kTanh};
  std::mt19937_64 rng(5);
  ParamVector p = ParamVector::zeros(spec);
  p.values = random_vec(p.size(), rng);
  const std::vector<double> x{0.5, -1.0, 2.0};
  const std::vector<double> g{1.5, -0.25};
  const auto grads = backward(spec, p, x, g);
  for (int o = 0; o < 2; ++o) {
    for (int i = 0; i < 3; ++i) {
      EXPECT_DOUBLE_EQ(grads.params.values[o * 3 + i], g[o] * x[i]);
    }
    EXPECT_DOUBLE_EQ(grads.params.values[6 + o], g[o]);
  }
}

// Central differences of <forward(x), g> with step 1e-5.
struct FdStats {
  int total = 0;
  int within = 0;
};

FdStats fd_check(const MlpSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamVector p = init_params(spec, seed);
  for (auto& v : p.values) v += 0.1 * std::normal_distribution<double>()(rng);
  const auto x = random_vec(spec.input_dim, rng);
  const auto g = random_vec(spec.output_dim, rng);
  const auto analytic = backward(spec, p, x, g);
  const double h = 1e-5;
  auto objective = [&](const ParamVector& q, const std::vector<double>& in) {
    return dot(forward(spec, q, in), g);
  };
  auto rel = [](double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
  };
  FdStats st;
  for (std::size_t i = 0; i < p.size(); ++i) {
    ParamVector plus = p, minus = p;
    plus.values[i] += h;
    minus.values[i] -= h;
    const double num = (objective(plus, x) - objective(minus, x)) / (2 * h);
    ++st.total;
    st.within += rel(analytic.params.values[i], num) <= 1e-4;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double num = (objective(p, xp) - objective(p, xm)) / (2 * h);
    ++st.total;
    st.within += rel(analytic.input[i], num) <= 1e-4;
  }
  return st;
}

TEST(Net, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  for (int c = 0; c < 6; ++c) {
    std::uniform_int_distribution<int> dim(1, 7);
    MlpSpec spec{dim(rng), {dim(rng), dim(rng)}, dim(rng),
                 c % 2 ? Activation::kTanh : Activation::kGeluApprox};
    const FdStats st = fd_check(spec, 100 + c);
    EXPECT_GE(st.within, st.total * 999 / 1000) << "config " << c;
  }
}

TEST(Net, BatchedForwardMatchesSingle) {
  MlpSpec spec{4, {8, 8}, 3, Activation::kGeluApprox};
  ParamVector p = init_params(spec, 9);
  std::mt19937_64 rng(1);
  Matrix X(5, 4);
  for (int r = 0; r < 5; ++r) {
    const auto v = random_vec(4, rng);
    for (int c = 0; c < 4; ++c) X(r, c) = v[c];
  }
  const Matrix Y = forward_batch(spec, p, X);
  for (int r = 0; r < 5; ++r) {
    const std::vector<double> row(X.row(r).data(), X.row(r).data() + 4);
    const auto y = forward(spec, p, row);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(Y(r, c), y[c], 1e-14);
  }
}

TEST(Net, TimeEmbeddingShapeAndRange) {
  TimeEmbedding te;
  EXPECT_EQ(te.dim(), 16);
  EXPECT_DOUBLE_EQ(te.frequencies().front(), 1.0);
  EXPECT_NEAR(te.frequencies().back(), 1000.0, 1e-9);
  for (std::size_t i = 1; i < te.frequencies().size(); ++i) {
    EXPECT_NEAR(te.frequencies()[i] / te.frequencies()[i - 1],
                te.frequencies()[1] / te.frequencies()[0], 1e-9);
  }
  for (double t : {0.0, 0.001, 0.37, 1.0}) {
    const auto e = te.embed(t);
    ASSERT_EQ(e.size(), 16u);
    for (double v : e) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_THROW(TimeEmbedding(7), ConfigError);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  MlpSpec spec{2, {}, 1, Activation::kTanh};
  ParamVector p = init_params(spec, 1);
  const auto before = p.values;
  OptimizerState st = OptimizerState::for_params(p);
  ParamVector g = ParamVector::zeros(spec);
  optimizer_step(st, p, g);
  EXPECT_EQ(p.values, before);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, FirstStepMatchesHandComputation) {
  MlpSpec spec{1, {}, 1, Activation::kTanh};  // weight + bias
  ParamVector p = ParamVector::zeros(spec);
  p.values = {1.0, -2.0};
  ParamVector g = ParamVector::zeros(spec);
  g.values = {0.5, -3.0};
  AdamConfig cfg;
  cfg.lr = 0.01;
  OptimizerState st = OptimizerState::for_params(p, cfg);
  optimizer_step(st, p, g);
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  EXPECT_NEAR(p.values[0], 1.0 - 0.01 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(p.values[1], -2.0 + 0.01 * 3.0 / (3.0 + 1e-8), 1e-15);
  // Second step by hand.
  g.values = {1.0, 1.0};
  const double m0 = 0.1 * 0.5 * 0.9 + 0.1 * 1.0;
  const double v0 = 0.001 * 0.25 * 0.999 + 0.001 * 1.0;
  const double mh = m0 / (1 - 0.81), vh = v0 / (1 - 0.999 * 0.999);
  const double expected = p.values[0] - 0.01 * mh / (std::sqrt(vh) + 1e-8);
  optimizer_step(st, p, g);
  EXPECT_NEAR(p.values[0], expected, 1e-15);
  EXPECT_EQ(st.step, 2);
}

TEST(Adam, ConvergesOnScalarQuadratic) {
  MlpSpec spec{1, {}, 1, Activation::kTanh};
  ParamVector p = ParamVector::zeros(spec);
  AdamConfig cfg;
  cfg.lr = 0.1;
  OptimizerState st = OptimizerState::for_params(p, cfg);
  ParamVector g = ParamVector::zeros(spec);
  for (int i = 0; i < 1000; ++i) {
    g.values[0] = 2.0 * (p.values[0] - 3.0);
    g.values[1] = 0.0;
    optimizer_step(st, p, g);
  }
  EXPECT_LT(std::abs(p.values[0] - 3.0), 1e-3);
}

TEST(Adam, NonFiniteGradientNamesParameterAndLeavesStateIntact) {
  MlpSpec spec{2, {3}, 1, Activation::kTanh};
  ParamVector p = init_params(spec, 4);
  const auto before = p.values;
  OptimizerState st = OptimizerState::for_params(p);
  ParamVector g = ParamVector::zeros(spec);
  g.values[2 * 3 + 1] = NAN;  // layer0.bias[1]
  try {
    optimizer_step(st, p, g);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("layer0.bias"), std::string::npos);
  }
  EXPECT_EQ(p.values, before);
  EXPECT_EQ(st.step, 0);
}

TEST(Net, ForwardIsPureAndDeterministic) {
  MlpSpec spec{3, {5}, 2, Activation::kGeluApprox};
  const ParamVector p = init_params(spec, 8);
  const ParamVector copy = p;
  const std::vector<double> x{0.2, 0.4, -0.9};
  const auto a = forward(spec, p, x);
  const auto b = forward(spec, p, x);
  EXPECT_EQ(a, b);
  EXPECT_EQ(p.values, copy.values);
}

}  // namespace
}  // namespace cycleflow
