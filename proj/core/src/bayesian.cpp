#include "elc/bayesian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "elc/error.hpp"
#include "elc/nn/ops.hpp"
#include "elc/rng.hpp"

namespace elc::bayes {

namespace {

constexpr std::uint64_t kWeightStream = 0x77;
constexpr std::uint64_t kBiasStream = 0x62;

void softmax_rows(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

void check_label(int label, std::size_t classes) {
  if (label < 0 || static_cast<std::size_t>(label) >= classes) {
    throw std::invalid_argument("label " + std::to_string(label) + " outside the class frame");
  }
}

}  // namespace

void VariationalLinear::validate() const {
  if (mu.rows() == 0 || mu.cols() < 2) throw ConfigError("variational layer: need F >= 1 and M >= 2");
  if (log_sigma.rows() != mu.rows() || log_sigma.cols() != mu.cols() || bias_mu.rows() != 1 ||
      bias_mu.cols() != mu.cols() || bias_log_sigma.rows() != 1 || bias_log_sigma.cols() != mu.cols()) {
    throw ConfigError("variational layer: inconsistent shapes");
  }
  if (mc_samples == 0) throw ConfigError("variational layer: at least one Monte Carlo sample");
}

VariationalLinear VariationalLinear::init(std::size_t in, std::size_t classes, std::uint64_t seed,
                                          double log_sigma0, std::size_t mc_samples) {
  const auto f = static_cast<Eigen::Index>(in);
  const auto m = static_cast<Eigen::Index>(classes);
  VariationalLinear layer;
  layer.mu.resize(f, m);
  Rng rng = make_rng(seed, {0x626c63});
  const double sd = std::sqrt(1.0 / static_cast<double>(in));
  for (Eigen::Index k = 0; k < layer.mu.size(); ++k) layer.mu.data()[k] = sd * standard_normal(rng);
  layer.log_sigma = Matrix::Constant(f, m, log_sigma0);
  layer.bias_mu = Matrix::Zero(1, m);
  layer.bias_log_sigma = Matrix::Constant(1, m, log_sigma0);
  layer.mc_samples = mc_samples;
  layer.validate();
  return layer;
}

Vector PredictiveSamples::mean() const { return probs.colwise().mean().transpose(); }

Matrix draw_noise(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, std::size_t t, std::uint64_t stream) {
  Rng rng = make_rng(seed, {stream, t});
  Matrix eps(rows, cols);
  for (Eigen::Index k = 0; k < eps.size(); ++k) eps.data()[k] = standard_normal(rng);
  return eps;
}

WeightDraw draw_weights(const VariationalLinear& layer, std::uint64_t seed, std::size_t t) {
  WeightDraw d;
  d.weight = layer.mu + (layer.log_sigma.array().exp() *
                         draw_noise(layer.mu.rows(), layer.mu.cols(), seed, t, kWeightStream).array())
                            .matrix();
  d.bias = layer.bias_mu + (layer.bias_log_sigma.array().exp() *
                            draw_noise(1, layer.mu.cols(), seed, t, kBiasStream).array())
                               .matrix();
  return d;
}

PredictiveSamples sample_forward(const VariationalLinear& layer, const Vector& feature, std::uint64_t seed,
                                 std::size_t samples) {
  layer.validate();
  if (samples == 0) throw std::invalid_argument("sample_forward: T must be >= 1");
  if (static_cast<std::size_t>(feature.size()) != layer.in()) throw std::invalid_argument("sample_forward: feature width mismatch");
  PredictiveSamples out;
  out.probs.resize(static_cast<Eigen::Index>(samples), layer.mu.cols());
  for (std::size_t t = 0; t < samples; ++t) {
    const WeightDraw w = draw_weights(layer, seed, t);
    out.probs.row(static_cast<Eigen::Index>(t)) = feature.transpose() * w.weight + w.bias;
  }
  softmax_rows(out.probs);
  return out;
}

PredictiveSamples sample_forward(const VariationalLinear& layer, const Vector& feature, std::uint64_t seed) {
  return sample_forward(layer, feature, seed, layer.mc_samples);
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

EntropyTerms entropy_decomposition(const Matrix& probs) {
  if (probs.rows() == 0 || probs.cols() == 0) throw std::invalid_argument("entropy_decomposition: empty samples");
  const Eigen::Index t = probs.rows();
  const Eigen::Index m = probs.cols();
  Vector mean = Vector::Zero(m);
  double aleatoric = 0.0;
  for (Eigen::Index r = 0; r < t; ++r) {
    mean += probs.row(r).transpose();
    aleatoric += entropy(std::span<const double>(probs.row(r).data(), static_cast<std::size_t>(m)));
  }
  mean /= static_cast<double>(t);
  aleatoric /= static_cast<double>(t);
  EntropyTerms out;
  out.total = entropy(std::span<const double>(mean.data(), static_cast<std::size_t>(m)));
  out.aleatoric = aleatoric;
  out.epistemic = std::max(0.0, out.total - out.aleatoric);
  return out;
}

double gaussian_kl(double mu, double sigma) {
  const double s2 = sigma * sigma;
  return 0.5 * (s2 + mu * mu - 1.0 - std::log(s2));
}

double gaussian_kl(const VariationalLinear& layer) {
  double kl = 0.0;
  const auto add = [&](const Matrix& mu, const Matrix& ls) {
    for (Eigen::Index k = 0; k < mu.size(); ++k) {
      const double m = mu.data()[k];
      const double l = ls.data()[k];
      kl += 0.5 * (std::exp(2.0 * l) + m * m - 1.0 - 2.0 * l);
    }
  };
  add(layer.mu, layer.log_sigma);
  add(layer.bias_mu, layer.bias_log_sigma);
  return kl;
}

double bayes_loss(const PredictiveSamples& samples, int label, double kl_weight, const VariationalLinear& layer) {
  check_label(label, static_cast<std::size_t>(samples.probs.cols()));
  const double p = samples.probs.col(label).mean();
  return -std::log(std::max(p, kProbFloor)) + kl_weight * gaussian_kl(layer);
}

BatchPrediction predict(const VariationalLinear& layer, const Matrix& features, std::uint64_t seed,
                        std::size_t samples) {
  layer.validate();
  if (samples == 0) throw std::invalid_argument("predict: T must be >= 1");
  if (static_cast<std::size_t>(features.cols()) != layer.in()) throw std::invalid_argument("predict: feature width mismatch");
  const Eigen::Index b = features.rows();
  const Eigen::Index m = layer.mu.cols();
  std::vector<Matrix> per_draw;
  per_draw.reserve(samples);
  for (std::size_t t = 0; t < samples; ++t) {
    const WeightDraw w = draw_weights(layer, seed, t);
    Matrix logits = features * w.weight;
    logits.rowwise() += w.bias.row(0);
    softmax_rows(logits);
    per_draw.push_back(std::move(logits));
  }
  BatchPrediction out;
  out.mean_probs = Matrix::Zero(b, m);
  out.uncertainty.resize(static_cast<std::size_t>(b));
  Matrix rows(static_cast<Eigen::Index>(samples), m);
  for (Eigen::Index i = 0; i < b; ++i) {
    for (std::size_t t = 0; t < samples; ++t) rows.row(static_cast<Eigen::Index>(t)) = per_draw[t].row(i);
    out.mean_probs.row(i) = rows.colwise().mean();
    out.uncertainty[static_cast<std::size_t>(i)] = entropy_decomposition(rows);
  }
  return out;
}

std::vector<nn::Var> sample_probs(nn::Var features, const LayerVars& layer, std::uint64_t seed, std::size_t samples) {
  if (samples == 0) throw std::invalid_argument("sample_probs: T must be >= 1");
  nn::Tape& tape = *features.tape();
  const Eigen::Index f = layer.mu.rows();
  const Eigen::Index m = layer.mu.cols();
  nn::Var sigma = nn::exp(layer.log_sigma);
  nn::Var bias_sigma = nn::exp(layer.bias_log_sigma);
  std::vector<nn::Var> out;
  out.reserve(samples);
  for (std::size_t t = 0; t < samples; ++t) {
    nn::Var w = nn::add(layer.mu, nn::mul(sigma, tape.constant(draw_noise(f, m, seed, t, kWeightStream))));
    nn::Var bvec = nn::add(layer.bias_mu, nn::mul(bias_sigma, tape.constant(draw_noise(1, m, seed, t, kBiasStream))));
    out.push_back(nn::softmax_rows(nn::add_row(nn::matmul(features, w), bvec)));
  }
  return out;
}

nn::Var gaussian_kl(const LayerVars& layer) {
  const auto term = [](nn::Var mu, nn::Var ls) {
    nn::Var s2 = nn::exp(nn::scale(ls, 2.0));
    nn::Var inner = nn::sub(nn::add(s2, nn::square(mu)), nn::add_scalar(nn::scale(ls, 2.0), 1.0));
    return nn::scale(nn::sum(inner), 0.5);
  };
  return nn::add(term(layer.mu, layer.log_sigma), term(layer.bias_mu, layer.bias_log_sigma));
}

nn::Var bayes_loss(nn::Var features, const LayerVars& layer, std::span<const int> labels, double kl_weight,
                   std::uint64_t seed, std::size_t samples) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) throw std::invalid_argument("bayes_loss: batch mismatch");
  nn::Tape& tape = *features.tape();
  const Eigen::Index m = layer.mu.cols();
  Matrix y = Matrix::Zero(features.rows(), m);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check_label(labels[i], static_cast<std::size_t>(m));
    y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  const std::vector<nn::Var> probs = sample_probs(features, layer, seed, samples);
  nn::Var acc = probs[0];
  for (std::size_t t = 1; t < probs.size(); ++t) acc = nn::add(acc, probs[t]);
  nn::Var mean = nn::scale(acc, 1.0 / static_cast<double>(samples));
  nn::Var p_true = nn::clamp(nn::sum_rows(nn::mul(mean, tape.constant(y))), kProbFloor, 1.0);
  nn::Var nll = nn::scale(nn::sum(nn::log(p_true)), -1.0 / static_cast<double>(labels.size()));
  if (kl_weight == 0.0) return nll;
  return nn::add(nll, nn::scale(gaussian_kl(layer), kl_weight));
}

}  // namespace elc::bayes
