#include "elc/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace elc::nn {

void sgd_step(ParamList& params, const ParamValues& grads, double lr) {
  if (grads.size() != params.size()) throw std::invalid_argument("sgd_step: gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (static_cast<std::size_t>(grads[i].size()) != p.size()) {
      throw std::invalid_argument("sgd_step: shape mismatch for " + p.name);
    }
    const double* g = grads[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (!p.frozen[k]) p.values.data[k] -= lr * g[k];
    }
  }
}

void sgd_step(ParamList& params, double lr) {
  for (auto& p : params) {
    if (!p.values.has_grad()) continue;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (!p.frozen[k]) p.values.data[k] -= lr * p.values.grad[k];
    }
  }
}

void Sgd::step(ParamList& params, double lr) {
  if (velocity_.size() != params.size()) {
    velocity_.clear();
    for (const auto& p : params) {
      velocity_.push_back(Matrix::Zero(static_cast<Eigen::Index>(p.values.rows()),
                                       static_cast<Eigen::Index>(p.values.cols())));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.values.has_grad()) continue;
    double* v = velocity_[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (p.frozen[k]) continue;
      const double g = p.values.grad[k] + weight_decay_ * p.values.data[k];
      v[k] = momentum_ * v[k] + g;
      p.values.data[k] -= lr * v[k];
    }
  }
}

double cosine_lr(double base_lr, std::size_t step, std::size_t total) {
  if (total == 0) return base_lr;
  const double x = static_cast<double>(std::min(step, total)) / static_cast<double>(total);
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * x));
}

double clip_gradients(std::initializer_list<ParamList*> lists, double max_norm) {
  double sq = 0.0;
  for (const ParamList* list : lists) {
    if (!list) continue;
    for (const auto& p : *list) {
      for (double g : p.values.grad) sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (ParamList* list : lists) {
      if (!list) continue;
      for (auto& p : *list) {
        for (double& g : p.values.grad) g *= f;
      }
    }
  }
  return norm;
}

}  // namespace elc::nn
