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
#include <numbers>
#include <random>
#include <sstream>

#include "cycleflow/error.h"

namespace cycleflow {
namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

double activate(Activation a, double z) {
  if (a == Activation::kTanh) return std::tanh(z);
  const double u = kGeluC * (z + kGeluA * z * z * z);
  return 0.5 * z * (1.0 + std::tanh(u));
}

double activate_deriv(Activation a, double z) {
  if (a == Activation::kTanh) {
    const double t = std::tanh(z);
    return 1.0 - t * t;
  }
  const double u = kGeluC * (z + kGeluA * z * z * z);
  const double t = std::tanh(u);
  const double du = kGeluC * (1.0 + 3.0 * kGeluA * z * z);
  return 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * du;
}

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;

}  // namespace

const char* activation_name(Activation a) {
  return a == Activation::kTanh ? "tanh" : "gelu-approx";
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "gelu-approx" || name == "gelu") return Activation::kGeluApprox;
  throw ConfigError("unknown activation '" + name + "'");
}

std::vector<int> MlpSpec::layer_dims() const {
  std::vector<int> dims;
  dims.reserve(hidden_dims.size() + 2);
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(output_dim);
  return dims;
}

std::vector<LayoutEntry> MlpSpec::layout() const {
  std::vector<LayoutEntry> out;
  const auto dims = layer_dims();
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto in = static_cast<std::size_t>(dims[l]);
    const auto outd = static_cast<std::size_t>(dims[l + 1]);
    const std::string prefix = "layer" + std::to_string(l);
    out.push_back({prefix + ".weight", {dims[l + 1], dims[l]}, offset,
                   in * outd});
    offset += in * outd;
    out.push_back({prefix + ".bias", {dims[l + 1]}, offset, outd});
    offset += outd;
  }
  return out;
}

std::size_t MlpSpec::num_params() const {
  std::size_t n = 0;
  for (const auto& e : layout()) n += e.size;
  return n;
}

void MlpSpec::validate() const {
  if (input_dim <= 0 || output_dim <= 0) {
    throw ConfigError("MlpSpec: input_dim and output_dim must be positive");
  }
  for (int h : hidden_dims) {
    if (h <= 0) throw ConfigError("MlpSpec: hidden dims must be positive");
  }
}

void ParamVector::check_layout() const {
  std::size_t expected = 0;
  for (const auto& e : layout) {
    std::size_t prod = 1;
    for (int s : e.shape) prod *= static_cast<std::size_t>(s);
    if (prod != e.size || e.offset != expected) {
      throw ConfigError("parameter layout entry '" + e.name +
                        "' is inconsistent");
    }
    expected += e.size;
  }
  if (expected != values.size()) {
    std::ostringstream os;
    os << "parameter layout covers " << expected << " values but vector has "
       << values.size();
    throw ConfigError(os.str());
  }
}

bool ParamVector::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

const std::string& ParamVector::owner(std::size_t i) const {
  for (const auto& e : layout) {
    if (i >= e.offset && i < e.offset + e.size) return e.name;
  }
  static const std::string kUnknown = "<unknown>";
  return kUnknown;
}

void ParamVector::set_zero() { std::fill(values.begin(), values.end(), 0.0); }

ParamVector ParamVector::zeros(const MlpSpec& spec) {
  ParamVector p;
  p.layout = spec.layout();
  p.values.assign(spec.num_params(), 0.0);
  return p;
}

ParamVector init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector p = ParamVector::zeros(spec);
  std::mt19937_64 rng(seed);
  for (const auto& e : p.layout) {
    if (e.shape.size() != 2) continue;  // biases stay zero
    const double fan_out = e.shape[0];
    const double fan_in = e.shape[1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < e.size; ++i) p.values[e.offset + i] = dist(rng);
  }
  return p;
}

void check_params(const MlpSpec& spec, const ParamVector& params) {
  spec.validate();
  params.check_layout();
  const auto expected = spec.layout();
  if (expected.size() != params.layout.size()) {
    throw ConfigError("parameter layout does not match network spec");
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i].name != params.layout[i].name ||
        expected[i].shape != params.layout[i].shape) {
      throw ConfigError("parameter layout entry '" + params.layout[i].name +
                        "' does not match network spec");
    }
  }
}

Matrix forward_batch(const MlpSpec& spec, const ParamVector& params,
                     const Matrix& inputs, ForwardCache* cache) {
  if (inputs.cols() != spec.input_dim) {
    std::ostringstream os;
    os << "network input has " << inputs.cols() << " columns, expected "
       << spec.input_dim;
    throw ConfigError(os.str());
  }
  if (params.size() != spec.num_params()) {
    throw ConfigError("parameter vector size does not match network spec");
  }
  const auto dims = spec.layer_dims();
  const int n_layers = spec.num_layers();
  if (cache) {
    cache->inputs.resize(n_layers);
    cache->pre.resize(n_layers - 1);
  }
  Matrix act = inputs;
  std::size_t offset = 0;
  for (int l = 0; l < n_layers; ++l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    ConstMap w(params.values.data() + offset, out, in);
    offset += static_cast<std::size_t>(in) * out;
    Eigen::Map<const Eigen::RowVectorXd> b(params.values.data() + offset, out);
    offset += out;
    Matrix z = act * w.transpose();
    z.rowwise() += b;
    if (cache) cache->inputs[l] = std::move(act);
    if (l + 1 == n_layers) return z;
    if (cache) cache->pre[l] = z;
    act = z.unaryExpr([&](double v) { return activate(spec.activation, v); });
  }
  return act;  // unreachable: n_layers >= 1
}

void backward_batch(const MlpSpec& spec, const ParamVector& params,
                    const ForwardCache& cache, const Matrix& output_grad,
                    ParamVector* param_grad, Matrix* input_grad) {
  const auto dims = spec.layer_dims();
  const int n_layers = spec.num_layers();
  if (output_grad.cols() != spec.output_dim ||
      static_cast<int>(cache.inputs.size()) != n_layers ||
      output_grad.rows() != cache.inputs[0].rows()) {
    throw ConfigError("output gradient shape does not match forward pass");
  }
  if (param_grad && param_grad->size() != params.size()) {
    throw ConfigError("gradient buffer size does not match parameters");
  }
  std::vector<std::size_t> offsets(n_layers);
  std::size_t offset = 0;
  for (int l = 0; l < n_layers; ++l) {
    offsets[l] = offset;
    offset += static_cast<std::size_t>(dims[l]) * dims[l + 1] + dims[l + 1];
  }
  Matrix delta = output_grad;
  for (int l = n_layers - 1; l >= 0; --l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    if (param_grad) {
      MutMap gw(param_grad->values.data() + offsets[l], out, in);
      gw.noalias() += delta.transpose() * cache.inputs[l];
      Eigen::Map<Eigen::RowVectorXd> gb(
          param_grad->values.data() + offsets[l] + in * out, out);
      gb += delta.colwise().sum();
    }
    if (l == 0 && !input_grad) break;
    ConstMap w(params.values.data() + offsets[l], out, in);
    Matrix prev = delta * w;
    if (l == 0) {
      *input_grad = std::move(prev);
      break;
    }
    const Matrix& z = cache.pre[l - 1];
    delta = prev.cwiseProduct(
        z.unaryExpr([&](double v) { return activate_deriv(spec.activation, v); }));
  }
}

std::vector<double> forward(const MlpSpec& spec, const ParamVector& params,
                            std::span<const double> input) {
  if (static_cast<int>(input.size()) != spec.input_dim) {
    throw ConfigError("forward: input length does not match spec.input_dim");
  }
  check_params(spec, params);
  Matrix x = Eigen::Map<const Matrix>(input.data(), 1, spec.input_dim);
  Matrix y = forward_batch(spec, params, x);
  return {y.data(), y.data() + y.size()};
}

Gradients backward(const MlpSpec& spec, const ParamVector& params,
                   std::span<const double> input,
                   std::span<const double> output_grad) {
  if (static_cast<int>(input.size()) != spec.input_dim ||
      static_cast<int>(output_grad.size()) != spec.output_dim) {
    throw ConfigError("backward: input or output_grad length mismatch");
  }
  check_params(spec, params);
  Matrix x = Eigen::Map<const Matrix>(input.data(), 1, spec.input_dim);
  ForwardCache cache;
  forward_batch(spec, params, x, &cache);
  Matrix g = Eigen::Map<const Matrix>(output_grad.data(), 1, spec.output_dim);
  Gradients out{ParamVector::zeros(spec), {}};
  Matrix gx;
  backward_batch(spec, params, cache, g, &out.params, &gx);
  out.input.assign(gx.data(), gx.data() + gx.size());
  return out;
}

TimeEmbedding::TimeEmbedding(int dim, double min_freq, double max_freq)
    : dim_(dim) {
  if (dim <= 0 || dim % 2 != 0) {
    throw ConfigError("time embedding dimension must be positive and even");
  }
  const int half = dim / 2;
  freqs_.resize(half);
  for (int i = 0; i < half; ++i) {
    const double frac = half == 1 ? 0.0 : static_cast<double>(i) / (half - 1);
    freqs_[i] = min_freq * std::pow(max_freq / min_freq, frac);
  }
}

void TimeEmbedding::embed(double t, std::span<double> out) const {
  const std::size_t half = freqs_.size();
  for (std::size_t i = 0; i < half; ++i) {
    out[i] = std::sin(freqs_[i] * t);
    out[half + i] = std::cos(freqs_[i] * t);
  }
}

std::vector<double> TimeEmbedding::embed(double t) const {
  std::vector<double> out(dim_);
  embed(t, out);
  return out;
}

OptimizerState OptimizerState::for_params(const ParamVector& params,
                                          const AdamConfig& config) {
  OptimizerState s;
  s.first_moment.assign(params.size(), 0.0);
  s.second_moment.assign(params.size(), 0.0);
  s.config = config;
  return s;
}

void optimizer_step(OptimizerState& state, ParamVector& params,
                    const ParamVector& grads) {
  const std::size_t n = params.size();
  if (grads.size() != n || state.first_moment.size() != n ||
      state.second_moment.size() != n) {
    throw ConfigError("optimizer_step: layout mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grads.values[i])) {
      std::ostringstream os;
      os << "non-finite gradient in parameter '" << params.owner(i)
         << "' (flat index " << i << ")";
      throw TrainingError(os.str());
    }
  }
  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads.values[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    params.values[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

}  // namespace cycleflow
