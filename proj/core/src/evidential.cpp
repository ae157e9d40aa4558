#include "elc/evidential.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "elc/error.hpp"
#include "elc/nn/ops.hpp"

namespace elc::ds {

namespace {

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

void check_label(int label, std::size_t classes) {
  if (label < 0 || static_cast<std::size_t>(label) >= classes) {
    throw std::invalid_argument("label " + std::to_string(label) + " outside the class frame");
  }
}

Matrix one_hot(std::span<const int> labels, Eigen::Index classes) {
  Matrix y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check_label(labels[i], static_cast<std::size_t>(classes));
    y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return y;
}

// One fold step for a batch: state S is B x (M+1), singleton masses mq B x M,
// ignorance mo B x 1. Returns the unnormalised product and its row sums.
void fold_step(const Matrix& s, const Matrix& mq, const Vector& mo, Matrix& next, Vector& z) {
  const Eigen::Index m = mq.cols();
  const auto so = s.col(m).array();
  next.resize(s.rows(), m + 1);
  next.leftCols(m) = (s.leftCols(m).array() * (mq.array().colwise() + mo.array()) +
                      mq.array().colwise() * so)
                         .matrix();
  next.col(m) = (so * mo.array()).matrix();
  z = next.rowwise().sum();
  if ((z.array() <= 0.0).any() || !z.allFinite()) throw NumericError("Dempster combination: total conflict");
  next.array().colwise() /= z.array();
}

}  // namespace

// --- MassVector ---------------------------------------------------------------

MassVector MassVector::vacuous(std::size_t classes) { return MassVector{std::vector<double>(classes, 0.0), 1.0}; }

double MassVector::total() const {
  return std::accumulate(singletons.begin(), singletons.end(), 0.0) + omega;
}

// --- PrototypeBank / UtilityConfig ----------------------------------------------

Vector PrototypeBank::scales() const {
  Vector s(scale_logits.cols());
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = sigmoid(scale_logits(0, i));
  return s;
}

Matrix PrototypeBank::membership() const {
  Matrix h = membership_logits;
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    auto row = h.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return h;
}

Vector PrototypeBank::gammas() const { return log_gamma.row(0).transpose().array().exp(); }

void PrototypeBank::validate() const {
  const auto p = prototypes.rows();
  if (p == 0 || prototypes.cols() == 0) throw ConfigError("prototype bank is empty");
  if (scale_logits.rows() != 1 || scale_logits.cols() != p || log_gamma.rows() != 1 || log_gamma.cols() != p ||
      membership_logits.rows() != p || membership_logits.cols() < 2) {
    throw ConfigError("prototype bank: inconsistent shapes");
  }
}

UtilityConfig UtilityConfig::identity(std::size_t classes, double nu) {
  const auto m = static_cast<Eigen::Index>(classes);
  return UtilityConfig{Matrix::Identity(m, m), nu};
}

void UtilityConfig::validate() const {
  if (utility.rows() < 2 || utility.rows() != utility.cols()) throw ConfigError("utility matrix must be square, M >= 2");
  if (!(nu >= 0.0 && nu <= 1.0)) throw ConfigError("pessimism nu must lie in [0, 1]");
  if ((utility.array() < 0.0).any() || (utility.array() > 1.0).any()) {
    throw ConfigError("utilities must lie in [0, 1]");
  }
}

Matrix UtilityConfig::act_matrix() const {
  const Eigen::Index m = utility.rows();
  Matrix a(m, m + 1);
  a.leftCols(m) = utility;
  for (Eigen::Index i = 0; i < m; ++i) {
    a(i, m) = nu * utility.row(i).minCoeff() + (1.0 - nu) * utility.row(i).maxCoeff();
  }
  return a;
}

PrototypeBank init_prototypes(const Matrix& features, std::span<const int> labels, std::size_t classes,
                              std::size_t per_class, double noise_sd, std::uint64_t seed) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw std::invalid_argument("init_prototypes: feature/label count mismatch");
  }
  if (classes < 2 || per_class == 0) throw ConfigError("init_prototypes: need >= 2 classes and >= 1 prototype each");
  const Eigen::Index f = features.cols();
  Matrix means = Matrix::Zero(static_cast<Eigen::Index>(classes), f);
  std::vector<double> counts(classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check_label(labels[i], classes);
    means.row(labels[i]) += features.row(static_cast<Eigen::Index>(i));
    counts[static_cast<std::size_t>(labels[i])] += 1.0;
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] > 0) means.row(static_cast<Eigen::Index>(c)) /= counts[c];
  }
  // Spread of each class around its mean sets the prototype width, so a
  // typical member sits at support exp(-1) whatever the feature scale.
  std::vector<double> spread(classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    spread[static_cast<std::size_t>(labels[i])] +=
        (features.row(static_cast<Eigen::Index>(i)) - means.row(labels[i])).squaredNorm();
  }
  for (std::size_t c = 0; c < classes; ++c) {
    spread[c] = counts[c] > 0 ? spread[c] / counts[c] : 0.0;
    if (!(spread[c] > 1e-12)) spread[c] = static_cast<double>(f);
  }

  const auto p = static_cast<Eigen::Index>(classes * per_class);
  PrototypeBank bank;
  bank.prototypes.resize(p, f);
  bank.scale_logits = Matrix::Zero(1, p);
  bank.membership_logits = Matrix::Zero(p, static_cast<Eigen::Index>(classes));
  bank.log_gamma = Matrix::Zero(1, p);
  Rng rng = make_rng(seed, {0x70726f});
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto c = j / static_cast<Eigen::Index>(per_class);
    for (Eigen::Index k = 0; k < f; ++k) bank.prototypes(j, k) = means(c, k) + noise_sd * standard_normal(rng);
    bank.membership_logits(j, c) = 4.0;
    bank.log_gamma(0, j) = -std::log(spread[static_cast<std::size_t>(c)]);
  }
  return bank;
}

// --- scalar algebra ---------------------------------------------------------------

Vector prototype_support(const Vector& feature, const PrototypeBank& bank) {
  if (static_cast<std::size_t>(feature.size()) != bank.dim()) throw std::invalid_argument("prototype_support: dimension mismatch");
  const Vector scales = bank.scales();
  const Vector gammas = bank.gammas();
  Vector s(static_cast<Eigen::Index>(bank.size()));
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double d = (bank.prototypes.row(i).transpose() - feature).squaredNorm();
    s(i) = scales(i) * std::exp(-gammas(i) * d);
  }
  return s;
}

MassVector prototype_mass(double support, std::span<const double> membership) {
  MassVector m;
  m.singletons.reserve(membership.size());
  for (double h : membership) m.singletons.push_back(h * support);
  m.omega = 1.0 - support;
  return m;
}

double conflict(const MassVector& a, const MassVector& b) {
  if (a.classes() != b.classes()) throw std::invalid_argument("Dempster combination: frame mismatch");
  double k = 0.0;
  for (std::size_t q = 0; q < a.classes(); ++q) {
    for (std::size_t r = 0; r < b.classes(); ++r) {
      if (q != r) k += a.singletons[q] * b.singletons[r];
    }
  }
  return k;
}

MassVector dempster_combine(const MassVector& a, const MassVector& b) {
  const double k = conflict(a, b);
  const double norm = 1.0 - k;
  if (!(norm > 0.0)) throw NumericError("Dempster combination: total conflict");
  MassVector out;
  out.singletons.resize(a.classes());
  for (std::size_t q = 0; q < a.classes(); ++q) {
    out.singletons[q] =
        (a.singletons[q] * b.singletons[q] + a.singletons[q] * b.omega + a.omega * b.singletons[q]) / norm;
  }
  out.omega = a.omega * b.omega / norm;
  return out;
}

MassVector combine_prototypes(const Vector& feature, const PrototypeBank& bank) {
  const Vector s = prototype_support(feature, bank);
  const Matrix h = bank.membership();
  MassVector acc = MassVector::vacuous(bank.classes());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    acc = dempster_combine(acc, prototype_mass(s(i), std::span<const double>(h.row(i).data(), bank.classes())));
  }
  return acc;
}

Vector expected_utilities(const MassVector& m, const UtilityConfig& cfg) {
  const Eigen::Index classes = cfg.utility.rows();
  if (static_cast<Eigen::Index>(m.classes()) != classes) throw std::invalid_argument("expected_utilities: frame mismatch");
  Vector e(classes);
  for (Eigen::Index i = 0; i < classes; ++i) {
    double base = 0.0;
    for (Eigen::Index q = 0; q < classes; ++q) base += m.singletons[static_cast<std::size_t>(q)] * cfg.utility(i, q);
    const double lower = base + m.omega * cfg.utility.row(i).minCoeff();
    const double upper = base + m.omega * cfg.utility.row(i).maxCoeff();
    e(i) = cfg.nu * lower + (1.0 - cfg.nu) * upper;
  }
  return e;
}

Decision predict_and_uncertainty(std::span<const double> utilities) {
  if (utilities.empty()) throw std::invalid_argument("predict_and_uncertainty: no utilities");
  std::size_t best = 0;
  for (std::size_t i = 1; i < utilities.size(); ++i) {
    if (utilities[i] > utilities[best]) best = i;
  }
  return Decision{static_cast<int>(best), std::clamp(1.0 - utilities[best], 0.0, 1.0)};
}

double evidential_loss(std::span<const double> utilities, int label) {
  check_label(label, utilities.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < utilities.size(); ++i) {
    const double e = std::clamp(utilities[i], kUtilityClamp, 1.0 - kUtilityClamp);
    loss -= static_cast<int>(i) == label ? std::log(e) : std::log(1.0 - e);
  }
  return loss;
}

double kl_to_uniform(std::span<const double> utilities) {
  const double m = static_cast<double>(utilities.size());
  double z = 0.0;
  for (double e : utilities) z += e + kKlSmoothing;
  double kl = 0.0;
  for (double e : utilities) {
    const double p = (e + kKlSmoothing) / z;
    kl += p * std::log(p * m);
  }
  return kl;
}

double kl_gate(std::span<const double> utilities, int label) {
  check_label(label, utilities.size());
  const double top = *std::max_element(utilities.begin(), utilities.end());
  return top * (1.0 - utilities[static_cast<std::size_t>(label)]);
}

double elc_loss(std::span<const double> utilities, int label, double lambda) {
  return evidential_loss(utilities, label) + kl_gate(utilities, label) * lambda * kl_to_uniform(utilities);
}

double kl_anneal(double lambda_max, std::size_t epoch, std::size_t total_epochs) {
  const double half = 0.5 * static_cast<double>(total_epochs);
  if (half <= 0.0) return lambda_max;
  return lambda_max * std::min(1.0, static_cast<double>(epoch) / half);
}

// --- batched inference --------------------------------------------------------------

HeadOutput evaluate(const Matrix& features, const PrototypeBank& bank, const UtilityConfig& cfg) {
  bank.validate();
  if (static_cast<std::size_t>(features.cols()) != bank.dim()) throw std::invalid_argument("evaluate: feature width mismatch");
  const Eigen::Index b = features.rows();
  const auto m = static_cast<Eigen::Index>(bank.classes());
  const Vector scales = bank.scales();
  const Vector gammas = bank.gammas();
  const Matrix h = bank.membership();

  Matrix d = -2.0 * features * bank.prototypes.transpose();
  d.colwise() += features.rowwise().squaredNorm();
  d.rowwise() += bank.prototypes.rowwise().squaredNorm().transpose();
  d = d.cwiseMax(0.0);
  Matrix s = (-(d.array().rowwise() * gammas.transpose().array())).exp();
  s.array().rowwise() *= scales.transpose().array();

  Matrix state = Matrix::Zero(b, m + 1);
  state.col(m).setOnes();
  Matrix next;
  Vector z;
  for (Eigen::Index i = 0; i < s.cols(); ++i) {
    const Matrix mq = s.col(i) * h.row(i);
    const Vector mo = (1.0 - s.col(i).array()).matrix();
    fold_step(state, mq, mo, next, z);
    state.swap(next);
  }
  HeadOutput out;
  out.utilities = state * cfg.act_matrix().transpose();
  out.masses = std::move(state);
  return out;
}

// --- differentiable head ----------------------------------------------------------------

nn::Var support(nn::Var features, const BankVars& bank) {
  nn::Var d = nn::pairwise_sq_dist(features, bank.prototypes);
  nn::Var rbf = nn::exp(nn::neg(nn::mul_row(d, nn::exp(bank.log_gamma))));
  return nn::mul_row(rbf, nn::sigmoid(bank.scale_logits));
}

nn::Var dempster_fold(nn::Var support, nn::Var membership) {
  const Matrix& s = support.value();
  const Matrix& h = membership.value();
  if (h.rows() != s.cols()) throw std::invalid_argument("dempster_fold: support/membership mismatch");
  const Eigen::Index b = s.rows();
  const Eigen::Index p = s.cols();
  const Eigen::Index m = h.cols();

  // states[i] is the combined mass before prototype i; states[p] is the result.
  std::vector<Matrix> states(static_cast<std::size_t>(p) + 1);
  std::vector<Vector> norms(static_cast<std::size_t>(p));
  states[0] = Matrix::Zero(b, m + 1);
  states[0].col(m).setOnes();
  for (Eigen::Index i = 0; i < p; ++i) {
    const Matrix mq = s.col(i) * h.row(i);
    const Vector mo = (1.0 - s.col(i).array()).matrix();
    fold_step(states[static_cast<std::size_t>(i)], mq, mo, states[static_cast<std::size_t>(i) + 1],
              norms[static_cast<std::size_t>(i)]);
  }
  Matrix out = states.back();
  nn::Tape& tape = *support.tape();
  return tape.record(
      std::move(out), {support, membership},
      [support, membership, states = std::move(states), norms = std::move(norms), b, p, m](
          nn::Tape& t, const Matrix&, const Matrix& g) {
        const Matrix& s = support.value();
        const Matrix& h = membership.value();
        Matrix gs = Matrix::Zero(b, p);
        Matrix gh = Matrix::Zero(p, m);
        Matrix gnext = g;
        for (Eigen::Index i = p; i-- > 0;) {
          const Matrix& prev = states[static_cast<std::size_t>(i)];
          const Matrix& next = states[static_cast<std::size_t>(i) + 1];
          const Vector& z = norms[static_cast<std::size_t>(i)];
          // Through the normalisation next = u / z.
          const Vector dot = gnext.cwiseProduct(next).rowwise().sum();
          Matrix gu = (gnext.colwise() - dot).array().colwise() / z.array();
          const Matrix mq = s.col(i) * h.row(i);
          const Vector mo = (1.0 - s.col(i).array()).matrix();
          const auto gq = gu.leftCols(m).array();
          const auto go = gu.col(m).array();
          const auto sq = prev.leftCols(m).array();
          const auto so = prev.col(m).array();

          Matrix gprev(b, m + 1);
          gprev.leftCols(m) = (gq * (mq.array().colwise() + mo.array())).matrix();
          gprev.col(m) = ((gq * mq.array()).rowwise().sum() + go * mo.array()).matrix();

          const Matrix gmq = (gq * (sq.colwise() + so)).matrix();
          const Vector gmo = ((gq * sq).rowwise().sum() + go * so).matrix();
          // mq = s_i h_i, mo = 1 - s_i.
          gs.col(i) = (gmq * h.row(i).transpose()) - gmo;
          gh.row(i) = s.col(i).transpose() * gmq;
          gnext = std::move(gprev);
        }
        if (t.requires_grad(support)) t.accumulate(support, gs);
        if (t.requires_grad(membership)) t.accumulate(membership, gh);
      });
}

nn::Var masses(nn::Var features, const BankVars& bank) {
  return dempster_fold(support(features, bank), nn::softmax_rows(bank.membership_logits));
}

nn::Var utilities(nn::Var masses, const UtilityConfig& cfg) {
  const Matrix act = cfg.act_matrix();
  if (masses.cols() != act.cols()) throw std::invalid_argument("utilities: frame mismatch");
  return nn::matmul_nt(masses, masses.tape()->constant(act));
}

nn::Var evidential_loss(nn::Var utilities, std::span<const int> labels) {
  if (static_cast<std::size_t>(utilities.rows()) != labels.size()) throw std::invalid_argument("evidential_loss: batch mismatch");
  nn::Tape& tape = *utilities.tape();
  const Matrix y = one_hot(labels, utilities.cols());
  nn::Var e = nn::clamp(utilities, kUtilityClamp, 1.0 - kUtilityClamp);
  nn::Var pos = nn::mul(tape.constant(y), nn::log(e));
  nn::Var negv = nn::mul(tape.constant(Matrix::Ones(y.rows(), y.cols()) - y), nn::log(nn::add_scalar(nn::neg(e), 1.0)));
  const double n = static_cast<double>(labels.size());
  return nn::scale(nn::sum(nn::add(pos, negv)), -1.0 / n);
}

nn::Var elc_loss(nn::Var utilities, std::span<const int> labels, double lambda) {
  nn::Var ds = evidential_loss(utilities, labels);
  if (lambda == 0.0) return ds;
  nn::Tape& tape = *utilities.tape();
  const Matrix y = one_hot(labels, utilities.cols());
  const double classes = static_cast<double>(utilities.cols());
  const double n = static_cast<double>(labels.size());

  nn::Var e_true = nn::sum_rows(nn::mul(utilities, tape.constant(y)));
  nn::Var gate = nn::mul(nn::max_rows(utilities), nn::add_scalar(nn::neg(e_true), 1.0));

  nn::Var smooth = nn::add_scalar(utilities, kKlSmoothing);
  nn::Var p = nn::mul_col(smooth, nn::reciprocal(nn::sum_rows(smooth)));
  nn::Var kl = nn::sum_rows(nn::mul(p, nn::log(nn::scale(p, classes))));

  nn::Var penalty = nn::scale(nn::sum(nn::mul(gate, kl)), lambda / n);
  return nn::add(ds, penalty);
}

}  // namespace elc::ds
