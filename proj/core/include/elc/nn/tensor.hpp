#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace elc::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

// One byte per entry; 1 marks membership.
using Mask = std::vector<std::uint8_t>;

// Dense row-major tensor. Rank > 2 tensors are viewed as shape[0] x rest.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient is stored

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
  static Tensor from_matrix(const Matrix& m);

  std::size_t size() const { return data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool has_grad() const { return !grad.empty(); }

  MatrixMap matrix();
  ConstMatrixMap matrix() const;
  MatrixMap grad_matrix();
  ConstMatrixMap grad_matrix() const;

  void zero_grad();
};

std::size_t element_count(const std::vector<std::size_t>& shape);

struct MaskableParam {
  std::string name;
  Tensor values;
  Mask frozen;  // 1 = excluded from optimisation

  MaskableParam() = default;
  MaskableParam(std::string param_name, Tensor init);

  std::size_t size() const { return values.size(); }
  std::size_t frozen_count() const;
};

using ParamList = std::vector<MaskableParam>;

// Effective parameter values fed to a forward pass, aligned with the
// network's parameter order.
using ParamValues = std::vector<Matrix>;

ParamValues values_of(const ParamList& params);

}  // namespace elc::nn
