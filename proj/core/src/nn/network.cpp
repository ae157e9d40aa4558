#include "elc/nn/network.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "elc/error.hpp"
#include "elc/nn/ops.hpp"

namespace elc::nn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Var dense(Var x, const DenseLayer& d, std::span<const Var> p) {
  return add_row(matmul(x, p[d.weight]), p[d.bias]);
}

}  // namespace

std::size_t Conv1dLayer::out_length() const {
  return static_cast<std::size_t>(conv1d_out_length(static_cast<Eigen::Index>(length),
                                                    static_cast<Eigen::Index>(kernel),
                                                    static_cast<Eigen::Index>(stride)));
}

Network::Network(const BackboneConfig& cfg) : config_(cfg) {
  if (cfg.input_width == 0) throw ConfigError("backbone: input width must be positive");
  if (cfg.widths.empty()) throw ConfigError("backbone: at least one stage is required");
  input_width_ = cfg.input_width;
  feature_dim_ = cfg.input_width;
  if (!cfg.conv.empty()) {
    if (cfg.input_width % 2 != 0) throw ConfigError("backbone: conv front-end needs interleaved I/Q input");
    std::size_t channels = 2;
    std::size_t length = cfg.input_width / 2;
    for (std::size_t c = 0; c < cfg.conv.size(); ++c) {
      const auto& st = cfg.conv[c];
      if (st.channels == 0 || st.kernel == 0 || st.stride == 0 || st.kernel > length) {
        throw ConfigError("backbone: invalid conv stage " + std::to_string(c));
      }
      add_conv1d("conv" + std::to_string(c), channels, st.channels, st.kernel, st.stride, length);
      add_relu();
      channels = st.channels;
      length = std::get<Conv1dLayer>(layers_[layers_.size() - 2]).out_length();
    }
    if (cfg.pool_bins > 0) {
      if (cfg.pool_bins > length) throw ConfigError("backbone: more pool bins than conv positions");
      add_avg_pool(channels, length, cfg.pool_bins);
    }
  }
  for (std::size_t s = 0; s < cfg.widths.size(); ++s) {
    if (cfg.widths[s] == 0) throw ConfigError("backbone: stage width must be positive");
    const std::string stage = "stage" + std::to_string(s);
    add_dense(stage + ".proj", feature_dim_, cfg.widths[s]);
    add_relu();
    if (cfg.residual) {
      add_residual(stage + ".res", cfg.widths[s]);
      add_relu();
    }
  }
}

std::size_t Network::add_param(const std::string& name, std::size_t rows, std::size_t cols,
                               std::size_t fan_in) {
  for (const auto& p : params_) {
    if (p.name == name) throw std::invalid_argument("duplicate parameter name " + name);
  }
  params_.emplace_back(name, Tensor({rows, cols}));
  fan_in_.push_back(fan_in);
  return params_.size() - 1;
}

void Network::add_dense(const std::string& name, std::size_t in, std::size_t out) {
  if (layers_.empty()) input_width_ = in;
  if (in != feature_dim_ && !layers_.empty()) throw std::invalid_argument("dense: width mismatch at " + name);
  DenseLayer d{in, out, 0, 0};
  d.weight = add_param(name + ".weight", in, out, in);
  d.bias = add_param(name + ".bias", 1, out, 0);
  layers_.emplace_back(d);
  feature_dim_ = out;
}

void Network::add_conv1d(const std::string& name, std::size_t in_channels, std::size_t out_channels,
                         std::size_t kernel, std::size_t stride, std::size_t length) {
  if (layers_.empty()) input_width_ = in_channels * length;
  if (in_channels * length != feature_dim_ && !layers_.empty()) {
    throw std::invalid_argument("conv1d: width mismatch at " + name);
  }
  Conv1dLayer c{in_channels, out_channels, kernel, stride, length, 0, 0};
  if (c.out_length() == 0) throw std::invalid_argument("conv1d: kernel longer than input at " + name);
  c.weight = add_param(name + ".weight", out_channels, kernel * in_channels, kernel * in_channels);
  c.bias = add_param(name + ".bias", 1, out_channels, 0);
  layers_.emplace_back(c);
  feature_dim_ = c.out_length() * out_channels;
}

void Network::add_residual(const std::string& name, std::size_t width) {
  if (width != feature_dim_) throw std::invalid_argument("residual: width mismatch at " + name);
  ResidualBlock r;
  r.width = width;
  r.fc1 = DenseLayer{width, width, add_param(name + ".fc1.weight", width, width, width), 0};
  r.fc1.bias = add_param(name + ".fc1.bias", 1, width, 0);
  r.fc2 = DenseLayer{width, width, add_param(name + ".fc2.weight", width, width, width), 0};
  r.fc2.bias = add_param(name + ".fc2.bias", 1, width, 0);
  layers_.emplace_back(r);
}

void Network::add_relu() { layers_.emplace_back(ReluLayer{}); }

void Network::add_avg_pool(std::size_t channels, std::size_t length, std::size_t bins) {
  if (channels * length != feature_dim_ || bins == 0 || bins > length) {
    throw std::invalid_argument("avg_pool: shape mismatch");
  }
  layers_.emplace_back(AvgPoolLayer{channels, length, bins});
  feature_dim_ = channels * bins;
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

std::size_t Network::param_index(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw std::out_of_range("unknown parameter " + name);
}

Matrix Network::sample_init(std::size_t param, Rng& rng) const {
  const auto& p = params_.at(param);
  const auto rows = static_cast<Eigen::Index>(p.values.rows());
  const auto cols = static_cast<Eigen::Index>(p.values.cols());
  Matrix m = Matrix::Zero(rows, cols);
  const std::size_t fan_in = fan_in_.at(param);
  if (fan_in == 0) return m;
  const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = sd * standard_normal(rng);
  return m;
}

void Network::initialize(std::uint64_t seed) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Rng rng = make_rng(seed, {0x6e6574, i});
    params_[i].values.matrix() = sample_init(i, rng);
    params_[i].values.grad.clear();
  }
}

void Network::check(const ParamValues& effective) const {
  if (effective.size() != params_.size()) throw std::invalid_argument("forward: parameter count mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (static_cast<std::size_t>(effective[i].rows()) != params_[i].values.rows() ||
        static_cast<std::size_t>(effective[i].cols()) != params_[i].values.cols()) {
      throw std::invalid_argument("forward: shape mismatch for " + params_[i].name);
    }
  }
}

Var Network::forward(Tape& tape, Var input, std::span<const Var> p) const {
  (void)tape;
  if (p.size() != params_.size()) throw std::invalid_argument("forward: parameter count mismatch");
  if (static_cast<std::size_t>(input.cols()) != input_width_) {
    throw std::invalid_argument("forward: input width " + std::to_string(input.cols()) + ", expected " +
                                std::to_string(input_width_));
  }
  Var x = input;
  for (const auto& layer : layers_) {
    x = std::visit(
        Overloaded{
            [&](const DenseLayer& d) { return dense(x, d, p); },
            [&](const Conv1dLayer& c) {
              return conv1d(x, p[c.weight], p[c.bias], static_cast<Eigen::Index>(c.in_channels),
                            static_cast<Eigen::Index>(c.kernel), static_cast<Eigen::Index>(c.stride));
            },
            [&](const ResidualBlock& r) { return add(x, dense(relu(dense(x, r.fc1, p)), r.fc2, p)); },
            [&](const ReluLayer&) { return relu(x); },
            [&](const AvgPoolLayer& a) {
              return avg_pool(x, static_cast<Eigen::Index>(a.channels), static_cast<Eigen::Index>(a.bins));
            },
        },
        layer);
  }
  return x;
}

Matrix Network::forward(const Matrix& batch, const ParamValues& effective) const {
  check(effective);
  Tape tape;
  Var x = tape.constant(batch);
  const std::vector<Var> bound = bind_constants(tape, effective);
  return forward(tape, x, bound).value();
}

std::vector<Var> bind_variables(Tape& tape, const ParamList& params) {
  std::vector<Var> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(tape.variable(p.values.matrix()));
  return out;
}

std::vector<Var> bind_constants(Tape& tape, const ParamValues& values) {
  std::vector<Var> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(tape.constant(v));
  return out;
}

void collect_gradients(const Tape& tape, std::span<const Var> bound, ParamList& params) {
  if (bound.size() != params.size()) throw std::invalid_argument("collect_gradients: size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (bound[i].tape() != &tape) throw std::logic_error("collect_gradients: variable from another tape");
    Matrix g = tape.gradient(bound[i]);
    auto& p = params[i];
    p.values.zero_grad();
    auto dst = p.values.grad_matrix();
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      dst.data()[k] = p.frozen[static_cast<std::size_t>(k)] ? 0.0 : g.data()[k];
    }
  }
}

void backward(Var loss, std::span<const Var> bound, ParamList& params) {
  if (!loss.valid()) throw std::logic_error("backward without forward");
  Tape& tape = *loss.tape();
  if (tape.backward_done()) throw std::logic_error("backward: forward pass already consumed");
  for (const Var& v : bound) {
    if (v.tape() != &tape) throw std::logic_error("backward without forward on this tape");
  }
  tape.backward(loss);
  collect_gradients(tape, bound, params);
}

}  // namespace elc::nn
