#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "elc/nn/tape.hpp"
#include "elc/nn/tensor.hpp"
#include "elc/rng.hpp"

// Prototype-based belief assignment with Dempster combination and an
// expected-utility decision layer.
namespace elc::ds {

using nn::Matrix;
using Vector = Eigen::VectorXd;

// Masses on the singletons {w_1..w_M} plus the whole frame.
struct MassVector {
  std::vector<double> singletons;
  double omega = 1.0;

  static MassVector vacuous(std::size_t classes);
  std::size_t classes() const { return singletons.size(); }
  double total() const;
};

struct PrototypeBank {
  Matrix prototypes;         // P x F
  Matrix scale_logits;       // 1 x P, scale = sigmoid(logit)
  Matrix membership_logits;  // P x M, membership = softmax(row)
  Matrix log_gamma;          // 1 x P, width = exp(log_gamma)

  std::size_t size() const { return static_cast<std::size_t>(prototypes.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(prototypes.cols()); }
  std::size_t classes() const { return static_cast<std::size_t>(membership_logits.cols()); }

  Vector scales() const;
  Matrix membership() const;
  Vector gammas() const;
  void validate() const;
};

struct UtilityConfig {
  Matrix utility;  // M x M, row i = utilities of act i under each true class
  double nu = 0.9;

  static UtilityConfig identity(std::size_t classes, double nu = 0.9);
  void validate() const;
  // Maps [m_1..m_M, m_Omega] to the M expected utilities.
  Matrix act_matrix() const;  // M x (M + 1)
};

// Prototypes drawn around class-conditional feature means. Prototype j of
// class c sits at mean_c + noise_sd * N(0, I) with membership peaked on c.
PrototypeBank init_prototypes(const Matrix& features, std::span<const int> labels, std::size_t classes,
                              std::size_t per_class, double noise_sd, std::uint64_t seed);

Vector prototype_support(const Vector& feature, const PrototypeBank& bank);
MassVector prototype_mass(double support, std::span<const double> membership);

// Throws NumericError on total conflict.
MassVector dempster_combine(const MassVector& a, const MassVector& b);
double conflict(const MassVector& a, const MassVector& b);

// Left fold of every prototype's mass, starting from the vacuous mass.
MassVector combine_prototypes(const Vector& feature, const PrototypeBank& bank);

Vector expected_utilities(const MassVector& m, const UtilityConfig& cfg);

struct Decision {
  int label = 0;
  double uncertainty = 1.0;
};
Decision predict_and_uncertainty(std::span<const double> utilities);

// Binary cross-entropy on each utility against the one-hot target.
double evidential_loss(std::span<const double> utilities, int label);
double kl_to_uniform(std::span<const double> utilities);
double kl_gate(std::span<const double> utilities, int label);
double elc_loss(std::span<const double> utilities, int label, double lambda);

// KL weight for `epoch` (0-based): rises linearly from 0 and reaches
// lambda_max at half of total_epochs.
double kl_anneal(double lambda_max, std::size_t epoch, std::size_t total_epochs);

inline constexpr double kUtilityClamp = 1e-7;
inline constexpr double kKlSmoothing = 1e-8;

// --- batched inference ----------------------------------------------------------

struct HeadOutput {
  Matrix masses;     // B x (M + 1)
  Matrix utilities;  // B x M
};

HeadOutput evaluate(const Matrix& features, const PrototypeBank& bank, const UtilityConfig& cfg);

// --- differentiable head ----------------------------------------------------------

struct BankVars {
  nn::Var prototypes;
  nn::Var scale_logits;
  nn::Var membership_logits;
  nn::Var log_gamma;
};

// B x P supports.
nn::Var support(nn::Var features, const BankVars& bank);

// Fused left fold of per-prototype masses: support is B x P, membership P x M;
// result is B x (M + 1) with the ignorance mass last.
nn::Var dempster_fold(nn::Var support, nn::Var membership);

nn::Var masses(nn::Var features, const BankVars& bank);
nn::Var utilities(nn::Var masses, const UtilityConfig& cfg);

// Batch means of the per-sample losses.
nn::Var evidential_loss(nn::Var utilities, std::span<const int> labels);
nn::Var elc_loss(nn::Var utilities, std::span<const int> labels, double lambda);

}  // namespace elc::ds
