#include "elc/nn/tape.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "elc/nn/tensor.hpp"

namespace elc::nn {

// --- Tensor ---------------------------------------------------------------

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> dims, double fill)
    : shape(std::move(dims)), data(element_count(shape), fill) {}

Tensor Tensor::from_matrix(const Matrix& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  MatrixMap(t.data.data(), m.rows(), m.cols()) = m;
  return t;
}

std::size_t Tensor::rows() const { return shape.empty() ? 1 : shape[0]; }

std::size_t Tensor::cols() const {
  if (shape.size() <= 1) return 1;
  return element_count(shape) / shape[0];
}

MatrixMap Tensor::matrix() {
  return {data.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
}

ConstMatrixMap Tensor::matrix() const {
  return {data.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
}

MatrixMap Tensor::grad_matrix() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  return {grad.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
}

ConstMatrixMap Tensor::grad_matrix() const {
  if (grad.size() != data.size()) throw std::logic_error("tensor has no gradient");
  return {grad.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
}

void Tensor::zero_grad() { grad.assign(data.size(), 0.0); }

MaskableParam::MaskableParam(std::string param_name, Tensor init)
    : name(std::move(param_name)), values(std::move(init)), frozen(values.size(), 0) {}

std::size_t MaskableParam::frozen_count() const {
  return static_cast<std::size_t>(std::count(frozen.begin(), frozen.end(), std::uint8_t{1}));
}

ParamValues values_of(const ParamList& params) {
  ParamValues out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.values.matrix());
  return out;
}

// --- Var / Tape -------------------------------------------------------------

const Matrix& Var::value() const { return tape_->value(*this); }
const Matrix& Var::grad() const { return tape_->grad(*this); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) {
    throw std::logic_error("variable does not belong to this tape");
  }
}

Var Tape::constant(Matrix value) { return push(Node{std::move(value), {}, false, {}}); }

Var Tape::variable(Matrix value) { return push(Node{std::move(value), {}, true, {}}); }

Var Tape::record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward) {
  bool needs = false;
  for (Var p : parents) {
    check(p);
    needs = needs || nodes_[p.id_].requires_grad;
  }
  return push(Node{std::move(value), {}, needs, needs ? std::move(backward) : BackwardFn{}});
}

Var Tape::record(Matrix value, const std::vector<Var>& parents, BackwardFn backward) {
  bool needs = false;
  for (Var p : parents) {
    check(p);
    needs = needs || nodes_[p.id_].requires_grad;
  }
  return push(Node{std::move(value), {}, needs, needs ? std::move(backward) : BackwardFn{}});
}

void Tape::backward(Var loss) {
  check(loss);
  if (nodes_[loss.id_].value.size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
  if (backward_done_) throw std::logic_error("backward: tape already consumed");
  nodes_[loss.id_].grad = Matrix::Ones(1, 1);
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
    // Closures only touch parents (lower ids), so n.grad stays put.
    n.backward(*this, n.value, n.grad);
  }
  backward_done_ = true;
}

bool Tape::requires_grad(Var v) const {
  check(v);
  return nodes_[v.id_].requires_grad;
}

void Tape::accumulate(Var target, const Matrix& g) {
  check(target);
  Node& n = nodes_[target.id_];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

const Matrix& Tape::value(Var v) const {
  check(v);
  return nodes_[v.id_].value;
}

Matrix Tape::gradient(Var v) const {
  check(v);
  const Node& n = nodes_[v.id_];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

const Matrix& Tape::grad(Var v) const {
  check(v);
  const Node& n = nodes_[v.id_];
  if (n.grad.size() == 0) {
    static const Matrix kEmpty;
    return kEmpty;
  }
  return n.grad;
}

}  // namespace elc::nn
