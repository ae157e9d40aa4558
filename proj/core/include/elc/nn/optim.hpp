#pragma once

#include <initializer_list>

#include "elc/nn/tensor.hpp"

namespace elc::nn {

// p <- p - lr * g on entries whose frozen flag is 0.
void sgd_step(ParamList& params, const ParamValues& grads, double lr);

// Same update using the gradients stored on each parameter.
void sgd_step(ParamList& params, double lr);

// SGD with heavy-ball momentum. Frozen entries are skipped entirely, so their
// values and velocities never change.
class Sgd {
 public:
  explicit Sgd(double momentum = 0.9, double weight_decay = 0.0)
      : momentum_(momentum), weight_decay_(weight_decay) {}

  void step(ParamList& params, double lr);
  void reset() { velocity_.clear(); }

  double momentum() const { return momentum_; }

 private:
  double momentum_;
  double weight_decay_;
  ParamValues velocity_;
};

// Rescales the stored gradients of every list so their joint L2 norm is at
// most max_norm. Returns the norm before scaling; max_norm <= 0 only measures.
double clip_gradients(std::initializer_list<ParamList*> lists, double max_norm);

// Cosine decay; step 0 gives base_lr and step total would give 0.
double cosine_lr(double base_lr, std::size_t step, std::size_t total);

}  // namespace elc::nn
