#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "elc/nn/tape.hpp"
#include "elc/nn/tensor.hpp"

// Variational linear classification layer with Monte Carlo prediction.
namespace elc::bayes {

using nn::Matrix;
using Vector = Eigen::VectorXd;

struct VariationalLinear {
  Matrix mu;              // F x M
  Matrix log_sigma;       // F x M
  Matrix bias_mu;         // 1 x M
  Matrix bias_log_sigma;  // 1 x M
  std::size_t mc_samples = 20;

  std::size_t in() const { return static_cast<std::size_t>(mu.rows()); }
  std::size_t classes() const { return static_cast<std::size_t>(mu.cols()); }
  void validate() const;

  static VariationalLinear init(std::size_t in, std::size_t classes, std::uint64_t seed,
                                double log_sigma0 = -5.0, std::size_t mc_samples = 20);
};

// T x M; each row is the softmax under one weight draw.
struct PredictiveSamples {
  Matrix probs;
  Vector mean() const;
};

struct WeightDraw {
  Matrix weight;  // F x M
  Matrix bias;    // 1 x M
};

// Draw t of a seeded sequence; the same (seed, t) always yields the same noise.
WeightDraw draw_weights(const VariationalLinear& layer, std::uint64_t seed, std::size_t t);
Matrix draw_noise(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, std::size_t t, std::uint64_t stream);

PredictiveSamples sample_forward(const VariationalLinear& layer, const Vector& feature, std::uint64_t seed,
                                 std::size_t samples);
PredictiveSamples sample_forward(const VariationalLinear& layer, const Vector& feature, std::uint64_t seed);

struct EntropyTerms {
  double total = 0.0;
  double aleatoric = 0.0;
  double epistemic = 0.0;
};

double entropy(std::span<const double> p);  // natural log, 0 ln 0 = 0
EntropyTerms entropy_decomposition(const Matrix& probs);
inline EntropyTerms entropy_decomposition(const PredictiveSamples& s) { return entropy_decomposition(s.probs); }

// Sum over every weight and bias of KL(N(mu, sigma^2) || N(0, 1)).
double gaussian_kl(const VariationalLinear& layer);
double gaussian_kl(double mu, double sigma);

double bayes_loss(const PredictiveSamples& samples, int label, double kl_weight, const VariationalLinear& layer);

inline constexpr double kProbFloor = 1e-12;

// --- batched inference ------------------------------------------------------------

struct BatchPrediction {
  Matrix mean_probs;  // B x M
  std::vector<EntropyTerms> uncertainty;
};

// Every sample shares the same T weight draws.
BatchPrediction predict(const VariationalLinear& layer, const Matrix& features, std::uint64_t seed,
                        std::size_t samples);

// --- differentiable head --------------------------------------------------------------

struct LayerVars {
  nn::Var mu;
  nn::Var log_sigma;
  nn::Var bias_mu;
  nn::Var bias_log_sigma;
};

// T x (B x M) softmax rows from reparameterised draws shared across the batch.
std::vector<nn::Var> sample_probs(nn::Var features, const LayerVars& layer, std::uint64_t seed, std::size_t samples);
nn::Var gaussian_kl(const LayerVars& layer);

// Batch mean of -ln mean_t p_t[y] plus kl_weight * KL.
nn::Var bayes_loss(nn::Var features, const LayerVars& layer, std::span<const int> labels, double kl_weight,
                   std::uint64_t seed, std::size_t samples);

}  // namespace elc::bayes
