#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "elc/nn/tape.hpp"
#include "elc/nn/tensor.hpp"
#include "elc/rng.hpp"

namespace elc::nn {

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight = 0;  // parameter indices
  std::size_t bias = 0;
};

struct Conv1dLayer {
  std::size_t in_channels = 2;
  std::size_t out_channels = 8;
  std::size_t kernel = 8;
  std::size_t stride = 4;
  std::size_t length = 512;  // input positions
  std::size_t weight = 0;
  std::size_t bias = 0;

  std::size_t out_length() const;
};

// out = x + fc2(relu(fc1(x))), both layers width x width.
struct ResidualBlock {
  std::size_t width = 0;
  DenseLayer fc1;
  DenseLayer fc2;
};

struct ReluLayer {};

// Averages positions of a channel-interleaved row into `bins` windows.
struct AvgPoolLayer {
  std::size_t channels = 1;
  std::size_t length = 0;
  std::size_t bins = 1;
};

using Layer = std::variant<DenseLayer, Conv1dLayer, ResidualBlock, ReluLayer, AvgPoolLayer>;

struct ConvStage {
  std::size_t channels = 16;
  std::size_t kernel = 8;
  std::size_t stride = 2;
};

struct BackboneConfig {
  std::size_t input_width = 1024;
  // Convolutional front-end over the interleaved I/Q pairs; empty disables it.
  std::vector<ConvStage> conv{{16, 8, 2}, {32, 8, 2}};
  std::size_t pool_bins = 4;  // 0 flattens the conv output instead
  std::vector<std::size_t> widths{128, 64};  // last entry is the feature dimension
  bool residual = true;
};

// Feed-forward feature extractor with named, maskable parameters. The
// classification heads live outside the network.
class Network {
 public:
  Network() = default;
  explicit Network(const BackboneConfig& cfg);

  // Builder interface (used by the constructor and by tests).
  void add_dense(const std::string& name, std::size_t in, std::size_t out);
  void add_conv1d(const std::string& name, std::size_t in_channels, std::size_t out_channels,
                  std::size_t kernel, std::size_t stride, std::size_t length);
  void add_residual(const std::string& name, std::size_t width);
  void add_relu();
  void add_avg_pool(std::size_t channels, std::size_t length, std::size_t bins);

  const BackboneConfig& config() const { return config_; }
  std::size_t input_width() const { return input_width_; }
  std::size_t feature_dim() const { return feature_dim_; }
  const std::vector<Layer>& layers() const { return layers_; }

  ParamList& params() { return params_; }
  const ParamList& params() const { return params_; }
  std::size_t param_count() const;
  std::size_t param_index(const std::string& name) const;

  // He-normal weights, zero biases.
  void initialize(std::uint64_t seed);
  Matrix sample_init(std::size_t param, Rng& rng) const;

  // Differentiable forward over bound parameter variables.
  Var forward(Tape& tape, Var input, std::span<const Var> params) const;

  // Pure inference: no state is touched and repeated calls are bit-identical.
  Matrix forward(const Matrix& batch, const ParamValues& effective) const;

  void check(const ParamValues& effective) const;

 private:
  std::size_t add_param(const std::string& name, std::size_t rows, std::size_t cols, std::size_t fan_in);

  BackboneConfig config_;
  std::size_t input_width_ = 0;
  std::size_t feature_dim_ = 0;
  std::vector<Layer> layers_;
  ParamList params_;
  std::vector<std::size_t> fan_in_;  // 0 for biases
};

// Leaf variables for each parameter's current values.
std::vector<Var> bind_variables(Tape& tape, const ParamList& params);
std::vector<Var> bind_constants(Tape& tape, const ParamValues& values);

// Runs the reverse sweep from loss and stores gradients in params. Frozen
// entries receive exactly zero. Throws std::logic_error when loss was not
// produced by a forward pass on the tape that owns `bound`.
void backward(Var loss, std::span<const Var> bound, ParamList& params);

// Copies gradients that a completed sweep left on `bound` into params.
void collect_gradients(const Tape& tape, std::span<const Var> bound, ParamList& params);

}  // namespace elc::nn
