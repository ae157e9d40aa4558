#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "elc/bayesian.hpp"
#include "elc/config.hpp"
#include "elc/evidential.hpp"
#include "elc/nn/tape.hpp"
#include "elc/nn/tensor.hpp"

// Classification heads stored as named parameter lists so that the optimiser
// and the checkpoint code treat every kind alike.
namespace elc::heads {

using nn::Matrix;
using nn::ParamList;

ParamList make_linear(std::size_t features, std::size_t classes, std::uint64_t seed);
ParamList make_bayesian(std::size_t features, std::size_t classes, std::uint64_t seed, double log_sigma0);
ParamList from_bank(const ds::PrototypeBank& bank);

ds::PrototypeBank to_bank(const ParamList& head);
bayes::VariationalLinear to_layer(const ParamList& head, std::size_t mc_samples);

std::size_t class_count(HeadKind kind, const ParamList& head);

struct LossInputs {
  std::span<const int> labels;  // local to the head
  double lambda_kl = 0.0;       // evidential only
  double nu = 0.9;              // evidential only
  double kl_weight = 0.0;       // Bayesian only
  std::size_t mc_samples = 4;   // Bayesian only
  std::uint64_t noise_seed = 0;  // Bayesian only
};

// Cross-entropy, the gated evidential loss or the variational objective.
nn::Var loss(HeadKind kind, nn::Var features, std::span<const nn::Var> head, const LossInputs& in);

nn::Var cross_entropy(nn::Var logits, std::span<const int> labels);
nn::Var linear_logits(nn::Var features, std::span<const nn::Var> head);

struct InferenceOptions {
  double nu = 0.9;
  std::size_t mc_samples = 20;
  std::uint64_t seed = 0;
  UncertaintyKind uncertainty = UncertaintyKind::kEpistemic;
};

struct Outputs {
  Matrix scores;                // logits, utilities or mean probabilities
  std::vector<int> predicted;   // local class index
  std::vector<double> uncertainty;
  std::vector<bayes::EntropyTerms> entropy;  // Bayesian only
};

// Rows are scored independently: a sample's output does not depend on the
// rest of the batch.
Outputs infer(HeadKind kind, const ParamList& head, const Matrix& features, const InferenceOptions& opts);

}  // namespace elc::heads
