#include "elc/heads.hpp"

#include <cmath>
#include <stdexcept>

#include "elc/error.hpp"
#include "elc/nn/ops.hpp"
#include "elc/rng.hpp"

namespace elc::heads {

namespace {

nn::MaskableParam param(const std::string& name, const Matrix& m) {
  return nn::MaskableParam(name, nn::Tensor::from_matrix(m));
}

const nn::MaskableParam& find(const ParamList& head, const std::string& name) {
  for (const auto& p : head) {
    if (p.name == name) return p;
  }
  throw DataError("head parameter '" + name + "' missing");
}

Matrix value(const ParamList& head, const std::string& name) { return find(head, name).values.matrix(); }

void require_size(std::span<const nn::Var> head, std::size_t n, const char* what) {
  if (head.size() != n) throw std::invalid_argument(std::string(what) + ": wrong number of head parameters");
}

int argmax_row(const Matrix& m, Eigen::Index r) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < m.cols(); ++c) {
    if (m(r, c) > m(r, best)) best = c;
  }
  return static_cast<int>(best);
}

}  // namespace

ParamList make_linear(std::size_t features, std::size_t classes, std::uint64_t seed) {
  const auto f = static_cast<Eigen::Index>(features);
  const auto m = static_cast<Eigen::Index>(classes);
  Matrix w(f, m);
  Rng rng = make_rng(seed, {0x6c696e});
  const double sd = std::sqrt(1.0 / static_cast<double>(features));
  for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = sd * standard_normal(rng);
  ParamList head;
  head.push_back(param("weight", w));
  head.push_back(param("bias", Matrix::Zero(1, m)));
  return head;
}

ParamList make_bayesian(std::size_t features, std::size_t classes, std::uint64_t seed, double log_sigma0) {
  const auto layer = bayes::VariationalLinear::init(features, classes, seed, log_sigma0);
  ParamList head;
  head.push_back(param("mu", layer.mu));
  head.push_back(param("log_sigma", layer.log_sigma));
  head.push_back(param("bias_mu", layer.bias_mu));
  head.push_back(param("bias_log_sigma", layer.bias_log_sigma));
  return head;
}

ParamList from_bank(const ds::PrototypeBank& bank) {
  bank.validate();
  ParamList head;
  head.push_back(param("prototypes", bank.prototypes));
  head.push_back(param("scale_logits", bank.scale_logits));
  head.push_back(param("membership_logits", bank.membership_logits));
  head.push_back(param("log_gamma", bank.log_gamma));
  return head;
}

ds::PrototypeBank to_bank(const ParamList& head) {
  ds::PrototypeBank bank;
  bank.prototypes = value(head, "prototypes");
  bank.scale_logits = value(head, "scale_logits");
  bank.membership_logits = value(head, "membership_logits");
  bank.log_gamma = value(head, "log_gamma");
  bank.validate();
  return bank;
}

bayes::VariationalLinear to_layer(const ParamList& head, std::size_t mc_samples) {
  bayes::VariationalLinear layer;
  layer.mu = value(head, "mu");
  layer.log_sigma = value(head, "log_sigma");
  layer.bias_mu = value(head, "bias_mu");
  layer.bias_log_sigma = value(head, "bias_log_sigma");
  layer.mc_samples = mc_samples;
  layer.validate();
  return layer;
}

std::size_t class_count(HeadKind kind, const ParamList& head) {
  switch (kind) {
    case HeadKind::kLinear: return find(head, "weight").values.cols();
    case HeadKind::kBayesian: return find(head, "mu").values.cols();
    case HeadKind::kEvidential: return find(head, "membership_logits").values.cols();
  }
  return 0;
}

nn::Var linear_logits(nn::Var features, std::span<const nn::Var> head) {
  require_size(head, 2, "linear head");
  return nn::add_row(nn::matmul(features, head[0]), head[1]);
}

nn::Var cross_entropy(nn::Var logits, std::span<const int> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) throw std::invalid_argument("cross_entropy: batch mismatch");
  Matrix y = Matrix::Zero(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= logits.cols()) throw std::invalid_argument("cross_entropy: label out of range");
    y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  nn::Var picked = nn::mul(nn::log_softmax_rows(logits), logits.tape()->constant(std::move(y)));
  return nn::scale(nn::sum(picked), -1.0 / static_cast<double>(labels.size()));
}

nn::Var loss(HeadKind kind, nn::Var features, std::span<const nn::Var> head, const LossInputs& in) {
  switch (kind) {
    case HeadKind::kLinear:
      return cross_entropy(linear_logits(features, head), in.labels);
    case HeadKind::kBayesian: {
      require_size(head, 4, "Bayesian head");
      const bayes::LayerVars vars{head[0], head[1], head[2], head[3]};
      return bayes::bayes_loss(features, vars, in.labels, in.kl_weight, in.noise_seed, in.mc_samples);
    }
    case HeadKind::kEvidential: {
      require_size(head, 4, "evidential head");
      const ds::BankVars bank{head[0], head[1], head[2], head[3]};
      const auto classes = static_cast<std::size_t>(head[2].cols());
      nn::Var e = ds::utilities(ds::masses(features, bank), ds::UtilityConfig::identity(classes, in.nu));
      return ds::elc_loss(e, in.labels, in.lambda_kl);
    }
  }
  throw std::logic_error("unknown head kind");
}

Outputs infer(HeadKind kind, const ParamList& head, const Matrix& features, const InferenceOptions& opts) {
  Outputs out;
  const auto n = static_cast<std::size_t>(features.rows());
  out.predicted.resize(n);
  out.uncertainty.resize(n);
  switch (kind) {
    case HeadKind::kLinear: {
      out.scores = features * value(head, "weight");
      out.scores.rowwise() += value(head, "bias").row(0);
      for (Eigen::Index r = 0; r < out.scores.rows(); ++r) {
        const auto row = out.scores.row(r);
        const double top = row.maxCoeff();
        const double z = (row.array() - top).exp().sum();
        const auto i = static_cast<std::size_t>(r);
        out.predicted[i] = argmax_row(out.scores, r);
        out.uncertainty[i] = 1.0 - 1.0 / z;
      }
      break;
    }
    case HeadKind::kBayesian: {
      const auto layer = to_layer(head, opts.mc_samples);
      auto pred = bayes::predict(layer, features, opts.seed, opts.mc_samples);
      out.scores = std::move(pred.mean_probs);
      out.entropy = std::move(pred.uncertainty);
      for (std::size_t i = 0; i < n; ++i) {
        out.predicted[i] = argmax_row(out.scores, static_cast<Eigen::Index>(i));
        const auto& e = out.entropy[i];
        out.uncertainty[i] = opts.uncertainty == UncertaintyKind::kEpistemic   ? e.epistemic
                             : opts.uncertainty == UncertaintyKind::kAleatoric ? e.aleatoric
                                                                               : e.total;
      }
      break;
    }
    case HeadKind::kEvidential: {
      const auto bank = to_bank(head);
      auto res = ds::evaluate(features, bank, ds::UtilityConfig::identity(bank.classes(), opts.nu));
      out.scores = std::move(res.utilities);
      for (std::size_t i = 0; i < n; ++i) {
        const auto d = ds::predict_and_uncertainty(
            std::span<const double>(out.scores.row(static_cast<Eigen::Index>(i)).data(), bank.classes()));
        out.predicted[i] = d.label;
        out.uncertainty[i] = d.uncertainty;
      }
      break;
    }
  }
  return out;
}

}  // namespace elc::heads
