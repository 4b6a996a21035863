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

#ifndef CYCLEFLOW_NET_H_
#define CYCLEFLOW_NET_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cycleflow {

// Row-major so that row h of an H x d action chunk is contiguous.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Activation { kTanh, kGeluApprox };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct LayoutEntry {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Dense multilayer perceptron: hidden layers use `activation`, the output
// layer is linear.
struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int output_dim = 0;
  Activation activation = Activation::kGeluApprox;

  std::vector<int> layer_dims() const;
  std::vector<LayoutEntry> layout() const;
  std::size_t num_params() const;
  int num_layers() const { return static_cast<int>(hidden_dims.size()) + 1; }
  void validate() const;

  bool operator==(const MlpSpec&) const = default;
};

// Flat parameter storage with a named layout. Teacher and student copies
// share the layout, so copying one into the other is a plain assignment.
struct ParamVector {
  std::vector<double> values;
  std::vector<LayoutEntry> layout;

  std::size_t size() const { return values.size(); }
  // Layout covers `values` exactly; throws ConfigError otherwise.
  void check_layout() const;
  bool all_finite() const;
  // Name of the layout entry owning flat index `i`.
  const std::string& owner(std::size_t i) const;
  void set_zero();

  static ParamVector zeros(const MlpSpec& spec);
};

// Glorot-uniform weights, zero biases.
ParamVector init_params(const MlpSpec& spec, std::uint64_t seed);

// Check that `params` was built for `spec`.
void check_params(const MlpSpec& spec, const ParamVector& params);

// Per-layer activations kept by forward_batch for the backward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;  // input to layer l (B x in_l)
  std::vector<Matrix> pre;     // pre-activation of hidden layer l
};

// Y = f(X) for a batch of inputs stored as rows of X.
Matrix forward_batch(const MlpSpec& spec, const ParamVector& params,
                     const Matrix& inputs, ForwardCache* cache = nullptr);

// Accumulates d<Y, dY>/dparams into `param_grad` (+=). When `input_grad` is
// non-null it receives d<Y, dY>/dX.
void backward_batch(const MlpSpec& spec, const ParamVector& params,
                    const ForwardCache& cache, const Matrix& output_grad,
                    ParamVector* param_grad, Matrix* input_grad = nullptr);

std::vector<double> forward(const MlpSpec& spec, const ParamVector& params,
                            std::span<const double> input);

struct Gradients {
  ParamVector params;
  std::vector<double> input;
};

// Exact gradients of <forward(input), output_grad>.
Gradients backward(const MlpSpec& spec, const ParamVector& params,
                   std::span<const double> input,
                   std::span<const double> output_grad);

// Sinusoidal embedding of the denoising time. Frequencies are geometric
// between min_freq and max_freq; output is [sin(f_i t)..., cos(f_i t)...].
class TimeEmbedding {
 public:
  explicit TimeEmbedding(int dim = 16, double min_freq = 1.0,
                         double max_freq = 1000.0);

  int dim() const { return dim_; }
  const std::vector<double>& frequencies() const { return freqs_; }
  void embed(double t, std::span<double> out) const;
  std::vector<double> embed(double t) const;

 private:
  int dim_;
  std::vector<double> freqs_;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  std::int64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  AdamConfig config;

  static OptimizerState for_params(const ParamVector& params,
                                   const AdamConfig& config = {});
};

// Bias-corrected adaptive-moment update. Throws TrainingError naming the
// offending parameter when a gradient component is not finite; in that case
// neither params nor state are modified.
void optimizer_step(OptimizerState& state, ParamVector& params,
                    const ParamVector& grads);

}  // namespace cycleflow

#endif  // CYCLEFLOW_NET_H_
