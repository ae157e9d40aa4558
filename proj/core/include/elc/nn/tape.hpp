#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <vector>

#include "elc/nn/tensor.hpp"

namespace elc::nn {

class Tape;

// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so a reverse
// sweep visits every node after all of its consumers.
class Tape {
 public:
  using BackwardFn =
      std::function<void(Tape&, const Matrix& out_value, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);

  // Records an op result. The backward closure runs only if some parent
  // requires a gradient.
  Var record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward);
  Var record(Matrix value, const std::vector<Var>& parents, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and sweeps. loss must be 1x1.
  void backward(Var loss);
  bool backward_done() const { return backward_done_; }

  bool requires_grad(Var v) const;
  void accumulate(Var target, const Matrix& g);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;  // empty when no gradient reached v
  Matrix gradient(Var v) const;      // zeros when no gradient reached v

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Node node);
  void check(Var v) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace elc::nn
