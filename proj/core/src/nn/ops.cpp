#include "elc/nn/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace elc::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("shape mismatch in ") + what);
}

void same_shape(Var a, Var b, const char* what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), what);
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw std::invalid_argument("op on an unbound variable");
  return *a.tape();
}

}  // namespace

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul");
  Matrix out;
  out.noalias() = a.value() * b.value();
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  require(a.cols() == b.cols(), "matmul_nt");
  Matrix out;
  out.noalias() = a.value() * b.value().transpose();
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value());
    if (t.requires_grad(b)) t.accumulate(b, g.transpose() * a.value());
  });
}

Var add(Var a, Var b) {
  same_shape(a, b, "add");
  return tape_of(a).record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  same_shape(a, b, "sub");
  return tape_of(a).record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, -g);
  });
}

Var mul(Var a, Var b) {
  same_shape(a, b, "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var add_row(Var a, Var row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return tape_of(a).record(std::move(out), {a, row}, [a, row](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var mul_row(Var a, Var row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "mul_row");
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return tape_of(a).record(std::move(out), {a, row}, [a, row](Tape& t, const Matrix&, const Matrix& g) {
    if (t.requires_grad(a)) {
      Matrix ga = g.array().rowwise() * row.value().row(0).array();
      t.accumulate(a, ga);
    }
    if (t.requires_grad(row)) t.accumulate(row, g.cwiseProduct(a.value()).colwise().sum());
  });
}

Var mul_col(Var a, Var col) {
  require(col.cols() == 1 && col.rows() == a.rows(), "mul_col");
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return tape_of(a).record(std::move(out), {a, col}, [a, col](Tape& t, const Matrix&, const Matrix& g) {
    if (t.requires_grad(a)) {
      Matrix ga = g.array().colwise() * col.value().col(0).array();
      t.accumulate(a, ga);
    }
    if (t.requires_grad(col)) t.accumulate(col, g.cwiseProduct(a.value()).rowwise().sum());
  });
}

Var scale(Var a, double c) {
  return tape_of(a).record(a.value() * c, {a}, [a, c](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, g * c);
  });
}

Var add_scalar(Var a, double c) {
  Matrix out = a.value().array() + c;
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, g);
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var relu(Var a) {
  Matrix out = a.value().cwiseMax(0.0);
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Matrix&, const Matrix& g) {
    Matrix ga = (a.value().array() > 0.0).select(g.array(), 0.0).matrix();
    t.accumulate(a, ga);
  });
}

Var exp(Var a) {
  Matrix out = a.value().array().exp();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Matrix& y, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(y));
  });
}

Var log(Var a) {
  Matrix out = a.value().array().log();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, g.cwiseQuotient(a.value()));
  });
}

Var sigmoid(Var a) {
  Matrix out = (1.0 + (-a.value().array()).exp()).inverse();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Matrix& y, const Matrix& g) {
    Matrix ga = g.array() * y.array() * (1.0 - y.array());
    t.accumulate(a, ga);
  });
}

Var square(Var a) {
  Matrix out = a.value().array().square();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, 2.0 * g.cwiseProduct(a.value()));
  });
}

Var reciprocal(Var a) {
  Matrix out = a.value().array().inverse();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Matrix& y, const Matrix& g) {
    Matrix ga = -g.array() * y.array().square();
    t.accumulate(a, ga);
  });
}

Var clamp(Var a, double lo, double hi) {
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return tape_of(a).record(std::move(out), {a}, [a, lo, hi](Tape& t, const Matrix&, const Matrix& g) {
    const auto& x = a.value().array();
    Matrix ga = ((x >= lo) && (x <= hi)).select(g.array(), 0.0).matrix();
    t.accumulate(a, ga);
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var sum_rows(Var a) {
  Matrix out = a.value().rowwise().sum();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Matrix&, const Matrix& g) {
    Matrix ga = g.col(0).replicate(1, a.cols());
    t.accumulate(a, ga);
  });
}

Var max_rows(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), 1);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < x.cols(); ++c) {
      if (x(r, c) > x(r, best)) best = c;
    }
    arg[static_cast<std::size_t>(r)] = best;
    out(r, 0) = x(r, best);
  }
  return tape_of(a).record(std::move(out), {a},
                           [a, arg = std::move(arg)](Tape& t, const Matrix&, const Matrix& g) {
                             Matrix ga = Matrix::Zero(a.rows(), a.cols());
                             for (Eigen::Index r = 0; r < ga.rows(); ++r) {
                               ga(r, arg[static_cast<std::size_t>(r)]) = g(r, 0);
                             }
                             t.accumulate(a, ga);
                           });
}

Var softmax_rows(Var a) {
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Matrix& y, const Matrix& g) {
    // dx = y .* (g - <g, y>)
    const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    Matrix ga = y.array() * (g.colwise() - dot).array();
    t.accumulate(a, ga);
  });
}

Var log_softmax_rows(Var a) {
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    row.array() -= lse;
  }
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Matrix& y, const Matrix& g) {
    // dx = g - softmax .* sum(g)
    const Eigen::VectorXd gs = g.rowwise().sum();
    Matrix ga = g - (y.array().exp().colwise() * gs.array()).matrix();
    t.accumulate(a, ga);
  });
}

Var pairwise_sq_dist(Var a, Var b) {
  require(a.cols() == b.cols(), "pairwise_sq_dist");
  const Eigen::VectorXd an = a.value().rowwise().squaredNorm();
  const Eigen::VectorXd bn = b.value().rowwise().squaredNorm();
  Matrix out = -2.0 * a.value() * b.value().transpose();
  out.colwise() += an;
  out.rowwise() += bn.transpose();
  out = out.cwiseMax(0.0);
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    if (t.requires_grad(a)) {
      Matrix ga = 2.0 * (a.value().array().colwise() * g.rowwise().sum().array()).matrix() -
                  2.0 * g * b.value();
      t.accumulate(a, ga);
    }
    if (t.requires_grad(b)) {
      Matrix gb = 2.0 * (b.value().array().colwise() * g.colwise().sum().transpose().array()).matrix() -
                  2.0 * g.transpose() * a.value();
      t.accumulate(b, gb);
    }
  });
}

Var slice_cols(Var a, Eigen::Index first, Eigen::Index count) {
  require(first >= 0 && count >= 0 && first + count <= a.cols(), "slice_cols");
  Matrix out = a.value().middleCols(first, count);
  return tape_of(a).record(std::move(out), {a}, [a, first, count](Tape& t, const Matrix&, const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    ga.middleCols(first, count) = g;
    t.accumulate(a, ga);
  });
}

}  // namespace elc::nn

namespace elc::nn {

Eigen::Index conv1d_out_length(Eigen::Index length, Eigen::Index kernel, Eigen::Index stride) {
  if (length < kernel) return 0;
  return (length - kernel) / stride + 1;
}

Var conv1d(Var x, Var w, Var bias, Eigen::Index in_channels, Eigen::Index kernel, Eigen::Index stride) {
  require(in_channels > 0 && kernel > 0 && stride > 0, "conv1d");
  require(x.cols() % in_channels == 0, "conv1d input");
  const Eigen::Index length = x.cols() / in_channels;
  const Eigen::Index out_ch = w.rows();
  const Eigen::Index patch = kernel * in_channels;
  require(w.cols() == patch, "conv1d weight");
  require(bias.rows() == 1 && bias.cols() == out_ch, "conv1d bias");
  const Eigen::Index out_len = conv1d_out_length(length, kernel, stride);
  require(out_len > 0, "conv1d length");
  const Eigen::Index batch = x.rows();

  // Patches are contiguous slices of each input row.
  Matrix patches(batch * out_len, patch);
  const Matrix& xv = x.value();
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index l = 0; l < out_len; ++l) {
      patches.row(b * out_len + l) = xv.row(b).segment(l * stride * in_channels, patch);
    }
  }
  Matrix y(batch * out_len, out_ch);
  y.noalias() = patches * w.value().transpose();
  y.rowwise() += bias.value().row(0);
  Matrix out = Eigen::Map<Matrix>(y.data(), batch, out_len * out_ch);

  return tape_of(x).record(
      std::move(out), {x, w, bias},
      [x, w, bias, patches = std::move(patches), in_channels, stride, out_len, out_ch, patch](
          Tape& t, const Matrix&, const Matrix& g) {
        const Eigen::Index batch = g.rows();
        Eigen::Map<const Matrix> gy(g.data(), batch * out_len, out_ch);
        if (t.requires_grad(w)) t.accumulate(w, gy.transpose() * patches);
        if (t.requires_grad(bias)) t.accumulate(bias, gy.colwise().sum());
        if (t.requires_grad(x)) {
          const Matrix dpatch = gy * w.value();
          Matrix gx = Matrix::Zero(x.rows(), x.cols());
          for (Eigen::Index b = 0; b < batch; ++b) {
            for (Eigen::Index l = 0; l < out_len; ++l) {
              gx.row(b).segment(l * stride * in_channels, patch) += dpatch.row(b * out_len + l);
            }
          }
          t.accumulate(x, gx);
        }
      });
}

Var avg_pool(Var x, Eigen::Index channels, Eigen::Index bins) {
  require(channels > 0 && bins > 0 && x.cols() % channels == 0, "avg_pool");
  const Eigen::Index length = x.cols() / channels;
  require(bins <= length, "avg_pool bins");
  std::vector<std::pair<Eigen::Index, Eigen::Index>> spans(static_cast<std::size_t>(bins));
  for (Eigen::Index b = 0; b < bins; ++b) {
    spans[static_cast<std::size_t>(b)] = {(b * length) / bins, ((b + 1) * length + bins - 1) / bins};
  }
  const Matrix& xv = x.value();
  Matrix out = Matrix::Zero(x.rows(), bins * channels);
  for (Eigen::Index b = 0; b < bins; ++b) {
    const auto [lo, hi] = spans[static_cast<std::size_t>(b)];
    auto dst = out.middleCols(b * channels, channels);
    for (Eigen::Index l = lo; l < hi; ++l) dst += xv.middleCols(l * channels, channels);
    dst /= static_cast<double>(hi - lo);
  }
  return tape_of(x).record(std::move(out), {x}, [x, channels, bins, spans](Tape& t, const Matrix&, const Matrix& g) {
    Matrix gx = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index b = 0; b < bins; ++b) {
      const auto [lo, hi] = spans[static_cast<std::size_t>(b)];
      const Matrix share = g.middleCols(b * channels, channels) / static_cast<double>(hi - lo);
      for (Eigen::Index l = lo; l < hi; ++l) gx.middleCols(l * channels, channels) += share;
    }
    t.accumulate(x, gx);
  });
}

}  // namespace elc::nn
