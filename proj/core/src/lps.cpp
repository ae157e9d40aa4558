#include "elc/lps.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "elc/error.hpp"
#include "elc/nn/ops.hpp"
#include "elc/rng.hpp"

namespace elc::lps {

namespace {

constexpr double kEps = 1e-9;

Matrix mask_matrix(const Mask& m, Eigen::Index rows, Eigen::Index cols) {
  Matrix out(rows, cols);
  for (Eigen::Index k = 0; k < out.size(); ++k) out.data()[k] = m[static_cast<std::size_t>(k)] ? 1.0 : 0.0;
  return out;
}

Matrix masked(const Matrix& v, const Mask& m) {
  Matrix out = v;
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    if (!m[static_cast<std::size_t>(k)]) out.data()[k] = 0.0;
  }
  return out;
}

Matrix zeros_like(const nn::MaskableParam& p) {
  return Matrix::Zero(static_cast<Eigen::Index>(p.values.rows()), static_cast<Eigen::Index>(p.values.cols()));
}

std::span<const double> span_of(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

std::size_t adaptive_keep(double beta, std::size_t prior_count) {
  if (prior_count == 0 || beta <= 0.0) return 0;
  return std::min(prior_count, static_cast<std::size_t>(std::ceil(beta * static_cast<double>(prior_count) - kEps)));
}

// Z-type projection: keep `keep` largest-magnitude eligible entries.
Matrix project(const Matrix& v, std::size_t keep, const Mask& eligible, Mask& support) {
  if (keep == 0) {
    support.assign(static_cast<std::size_t>(v.size()), 0);
    return Matrix::Zero(v.rows(), v.cols());
  }
  support = hard_prune_count(span_of(v), keep, eligible);
  return masked(v, support);
}

void check_aligned(const ParamValues& v, const TaskContext& ctx, const char* what) {
  if (v.size() != ctx.free.size()) throw std::invalid_argument(std::string(what) + ": tensor count mismatch");
}

}  // namespace

std::size_t count_set(const Mask& m) {
  return static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](std::uint8_t b) { return b != 0; }));
}

std::size_t count_set(const MaskSet& m) {
  std::size_t n = 0;
  for (const auto& x : m) n += count_set(x);
  return n;
}

Mask hard_prune_count(std::span<const double> values, std::size_t keep, const Mask& eligible) {
  if (!eligible.empty() && eligible.size() != values.size()) {
    throw std::invalid_argument("hard_prune: eligible mask size mismatch");
  }
  std::vector<std::size_t> idx;
  idx.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (eligible.empty() || eligible[i]) idx.push_back(i);
  }
  if (idx.empty()) throw std::invalid_argument("hard_prune: no eligible entries");
  keep = std::min(keep, idx.size());
  const auto by_magnitude = [&](std::size_t a, std::size_t b) {
    const double ma = std::abs(values[a]);
    const double mb = std::abs(values[b]);
    return ma > mb || (ma == mb && a < b);
  };
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(), by_magnitude);
  Mask out(values.size(), 0);
  for (std::size_t i = 0; i < keep; ++i) out[idx[i]] = 1;
  return out;
}

Mask hard_prune(std::span<const double> values, double keep_fraction, const Mask& eligible) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw std::invalid_argument("hard_prune: keep fraction must lie in (0, 1]");
  }
  const std::size_t n = eligible.empty() ? values.size() : count_set(eligible);
  const auto keep = static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(n) - kEps));
  return hard_prune_count(values, std::max<std::size_t>(keep, 1), eligible);
}

std::size_t owned_count(double alpha_before, double alpha, std::size_t tensor_size, std::size_t already_owned) {
  const double n = static_cast<double>(tensor_size);
  const auto target = static_cast<std::size_t>(std::min(n, std::floor((alpha_before + alpha) * n + 0.5 + kEps)));
  return target > already_owned ? target - already_owned : 0;
}

LifelongState make_state(const ParamList& params) {
  LifelongState s;
  for (const auto& p : params) s.cumulative.emplace_back(p.size(), 0);
  return s;
}

TaskContext begin_task(LifelongState& state, ParamList& params, double alpha, double beta,
                       const AdmmConfig& admm, const InitSampler& init, std::uint64_t seed) {
  if (!(alpha > 0.0)) throw ConfigError("task capacity alpha must be positive");
  if (beta < 0.0 || beta > 1.0) throw ConfigError("reuse ratio beta must lie in [0, 1]");
  if (state.alpha_bar + alpha > 1.0 + kEps) {
    std::ostringstream os;
    os << "capacity exhausted: " << state.alpha_bar << " already allocated, " << alpha << " requested";
    throw ConfigError(os.str());
  }
  if (state.cumulative.size() != params.size()) throw std::invalid_argument("begin_task: state/parameter mismatch");

  TaskContext ctx;
  ctx.task_id = state.archive.size();
  ctx.alpha = alpha;
  ctx.beta = beta;
  ctx.admm.rho = admm.rho;
  ctx.admm.tau_admm = admm.tau_admm;
  ctx.admm.update_interval = admm.update_interval;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const Mask& prior = state.cumulative[i];
    Mask free(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) free[k] = prior[k] ? 0 : 1;

    p.frozen = prior;
    p.values.grad.clear();
    if (init) {
      const Matrix fresh = init(i);
      if (static_cast<std::size_t>(fresh.size()) != p.size()) throw std::invalid_argument("begin_task: sampler shape mismatch");
      for (std::size_t k = 0; k < p.size(); ++k) {
        if (free[k]) p.values.data[k] = fresh.data()[k];
      }
    }

    const std::size_t already = count_set(prior);
    const std::size_t free_count = p.size() - already;
    ctx.keep_counts.push_back(std::min(free_count, owned_count(state.alpha_bar, alpha, p.size(), already)));

    // Adaptive logits live on prior entries only.
    nn::MaskableParam a(p.name + ".adaptive", nn::Tensor(p.values.shape));
    Rng rng = make_rng(seed, {0x616461, ctx.task_id, i});
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (prior[k]) {
        a.values.data[k] = 0.5 + 0.5 * uniform01(rng);
      } else {
        a.frozen[k] = 1;
      }
    }

    const Matrix theta = masked(Matrix(p.values.matrix()), free);
    Mask zs;
    Mask ys;
    const Matrix adaptive_vals = a.values.matrix();
    ctx.admm.Z.push_back(free_count > 0 ? project(theta, ctx.keep_counts.back(), free, zs) : zeros_like(p));
    if (free_count == 0) zs.assign(p.size(), 0);
    ctx.admm.U.push_back(zeros_like(p));
    ctx.admm.Y.push_back(already > 0 ? project(adaptive_vals, adaptive_keep(beta, already), prior, ys) : zeros_like(p));
    if (already == 0) ys.assign(p.size(), 0);
    ctx.admm.K.push_back(zeros_like(p));
    ctx.admm.z_support.push_back(std::move(zs));
    ctx.admm.y_support.push_back(std::move(ys));

    ctx.free.push_back(std::move(free));
    ctx.prior.push_back(prior);
    ctx.adaptive.push_back(std::move(a));
  }
  return ctx;
}

double admm_loss(const ParamValues& theta, const ParamValues& adaptive, const TaskContext& ctx) {
  check_aligned(theta, ctx, "admm_loss");
  double w = 0.0;
  double m = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const auto& a = ctx.admm;
    w += (masked(theta[i], ctx.free[i]) - a.Z[i] + a.U[i]).squaredNorm();
    if (i < adaptive.size() && count_set(ctx.prior[i]) > 0) {
      m += (masked(adaptive[i], ctx.prior[i]) - a.Y[i] + a.K[i]).squaredNorm();
    }
  }
  return 0.5 * ctx.admm.rho * w + 0.5 * ctx.admm.tau_admm * m;
}

nn::Var admm_loss(nn::Tape& tape, std::span<const nn::Var> theta, std::span<const nn::Var> adaptive,
                  const TaskContext& ctx) {
  if (theta.size() != ctx.free.size()) throw std::invalid_argument("admm_loss: tensor count mismatch");
  nn::Var w;
  nn::Var m;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const auto& a = ctx.admm;
    const Eigen::Index r = theta[i].rows();
    const Eigen::Index c = theta[i].cols();
    const std::size_t free_count = count_set(ctx.free[i]);
    nn::Var t = free_count == ctx.free[i].size() ? theta[i]
                                                 : nn::mul(theta[i], tape.constant(mask_matrix(ctx.free[i], r, c)));
    nn::Var term = nn::sum(nn::square(nn::sub(t, tape.constant(a.Z[i] - a.U[i]))));
    w = w.valid() ? nn::add(w, term) : term;
    if (i < adaptive.size() && free_count < ctx.free[i].size()) {
      nn::Var am = nn::mul(adaptive[i], tape.constant(mask_matrix(ctx.prior[i], r, c)));
      nn::Var mterm = nn::sum(nn::square(nn::sub(am, tape.constant(a.Y[i] - a.K[i]))));
      m = m.valid() ? nn::add(m, mterm) : mterm;
    }
  }
  nn::Var loss = nn::scale(w, 0.5 * ctx.admm.rho);
  if (m.valid()) loss = nn::add(loss, nn::scale(m, 0.5 * ctx.admm.tau_admm));
  return loss;
}

void admm_project(TaskContext& ctx, const ParamValues& theta, const ParamValues& adaptive) {
  check_aligned(theta, ctx, "admm_project");
  auto& a = ctx.admm;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (count_set(ctx.free[i]) > 0) {
      const Matrix t = masked(theta[i], ctx.free[i]);
      a.Z[i] = project(t + a.U[i], ctx.keep_counts[i], ctx.free[i], a.z_support[i]);
      a.U[i] += t - a.Z[i];
    }
    const std::size_t prior_count = count_set(ctx.prior[i]);
    if (prior_count > 0 && i < adaptive.size()) {
      const Matrix m = masked(adaptive[i], ctx.prior[i]);
      a.Y[i] = project(m + a.K[i], adaptive_keep(ctx.beta, prior_count), ctx.prior[i], a.y_support[i]);
      a.K[i] += m - a.Y[i];
    }
  }
}

double admm_residual(const TaskContext& ctx, const ParamValues& theta) {
  check_aligned(theta, ctx, "admm_residual");
  double s = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    s += (masked(theta[i], ctx.free[i]) - ctx.admm.Z[i]).squaredNorm();
  }
  return std::sqrt(s);
}

std::vector<nn::Var> training_params(nn::Tape& tape, std::span<const nn::Var> theta,
                                     std::span<const nn::Var> adaptive, const TaskContext& ctx) {
  if (theta.size() != ctx.free.size() || adaptive.size() != ctx.free.size()) {
    throw std::invalid_argument("training_params: tensor count mismatch");
  }
  std::vector<nn::Var> out;
  out.reserve(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (count_set(ctx.prior[i]) == 0) {
      out.push_back(theta[i]);
      continue;
    }
    const Eigen::Index r = theta[i].rows();
    const Eigen::Index c = theta[i].cols();
    nn::Var gate = nn::add(tape.constant(mask_matrix(ctx.free[i], r, c)),
                           nn::mul(tape.constant(mask_matrix(ctx.prior[i], r, c)), nn::clamp(adaptive[i], 0.0, 1.0)));
    out.push_back(nn::mul(theta[i], gate));
  }
  return out;
}

ParamValues training_values(const ParamList& params, const TaskContext& ctx) {
  ParamValues out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix v = params[i].values.matrix();
    const Matrix& a = ctx.adaptive[i].values.matrix();
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (ctx.prior[i][uk]) v.data()[k] *= std::clamp(a.data()[k], 0.0, 1.0);
    }
    out.push_back(std::move(v));
  }
  return out;
}

TaskPartition finalize_task(LifelongState& state, TaskContext& ctx, ParamList& params, const FineTune& fine_tune) {
  if (params.size() != ctx.free.size()) throw std::invalid_argument("finalize_task: tensor count mismatch");
  TaskPartition part;
  part.task_id = ctx.task_id;
  part.alpha = ctx.alpha;
  part.beta = ctx.beta;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    Mask owned(p.size(), 0);
    if (ctx.keep_counts[i] > 0) {
      owned = hard_prune_count(std::span<const double>(p.values.data), ctx.keep_counts[i], ctx.free[i]);
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (ctx.free[i][k] && !owned[k]) p.values.data[k] = 0.0;
    }
    Mask adaptive = ctx.admm.y_support[i];
    for (std::size_t k = 0; k < p.size(); ++k) adaptive[k] = adaptive[k] && ctx.prior[i][k];
    part.owned.push_back(std::move(owned));
    part.adaptive.push_back(std::move(adaptive));
  }
  if (count_set(part.owned) == 0) throw NumericError("finalize_task: empty owned mask");

  if (fine_tune) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (std::size_t k = 0; k < params[i].size(); ++k) params[i].frozen[k] = part.owned[i][k] ? 0 : 1;
      params[i].values.grad.clear();
    }
    fine_tune(part);
  }

  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t k = 0; k < params[i].size(); ++k) {
      if (part.owned[i][k]) state.cumulative[i][k] = 1;
    }
    params[i].frozen = state.cumulative[i];
    params[i].values.grad.clear();
  }
  state.alpha_bar += ctx.alpha;
  state.archive.push_back(part);
  return part;
}

ParamValues compose_inference_params(const TaskPartition& part, const ParamList& params) {
  if (part.owned.size() != params.size()) throw std::invalid_argument("compose: tensor count mismatch");
  ParamValues out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix v = params[i].values.matrix();
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (!part.owned[i][uk] && !part.adaptive[i][uk]) v.data()[k] = 0.0;
    }
    out.push_back(std::move(v));
  }
  return out;
}

ParamValues compose_inference_params(const LifelongState& state, const ParamList& params, std::size_t task_id) {
  if (task_id >= state.archive.size()) throw std::out_of_range("unknown task id " + std::to_string(task_id));
  return compose_inference_params(state.archive[task_id], params);
}

std::string check_partitions(const LifelongState& state) {
  std::ostringstream err;
  if (state.archive.empty()) return {};
  const std::size_t tensors = state.cumulative.size();
  double alpha_before = 0.0;
  for (std::size_t i = 0; i < tensors; ++i) {
    const std::size_t n = state.cumulative[i].size();
    std::vector<int> owner(n, -1);
    for (const auto& part : state.archive) {
      std::size_t owned = 0;
      for (std::size_t k = 0; k < n; ++k) {
        if (part.adaptive[i][k] && (owner[k] < 0)) {
          err << "task " << part.task_id << " tensor " << i << ": adaptive entry " << k << " outside prior support\n";
          break;
        }
      }
      for (std::size_t k = 0; k < n; ++k) {
        if (!part.owned[i][k]) continue;
        ++owned;
        if (owner[k] >= 0) {
          err << "task " << part.task_id << " tensor " << i << ": entry " << k << " already owned by task "
              << owner[k] << "\n";
          break;
        }
        owner[k] = static_cast<int>(part.task_id);
      }
      const double expected = part.alpha * static_cast<double>(n);
      if (std::abs(static_cast<double>(owned) - expected) > 1.0 + kEps) {
        err << "task " << part.task_id << " tensor " << i << ": owns " << owned << " entries, expected "
            << expected << " +- 1\n";
      }
    }
    for (std::size_t k = 0; k < n; ++k) {
      if ((owner[k] >= 0) != (state.cumulative[i][k] != 0)) {
        err << "tensor " << i << ": cumulative mask disagrees with owned union at " << k << "\n";
        break;
      }
    }
  }
  for (const auto& part : state.archive) alpha_before += part.alpha;
  if (std::abs(alpha_before - state.alpha_bar) > kEps) err << "cumulative alpha does not match the archive\n";
  return err.str();
}

}  // namespace elc::lps
