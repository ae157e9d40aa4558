#include <doctest.h>

#include <cmath>
#include <random>

#include "elc/nn/gradcheck.hpp"
#include "elc/nn/network.hpp"
#include "elc/nn/ops.hpp"
#include "elc/nn/optim.hpp"
#include "fd_oracle.hpp"

using namespace elc;
using namespace elc::nn;

namespace {

Matrix randn(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Matrix m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = g(rng);
  return m;
}

BackboneConfig tiny_backbone() {
  BackboneConfig b;
  b.input_width = 32;
  b.conv = {{4, 4, 2}};
  b.pool_bins = 3;
  b.widths = {8, 5};
  b.residual = true;
  return b;
}

// Projects onto a fixed random direction so every output entry matters.
Var project(Var x, const Matrix& dir) { return sum(mul(x, x.tape()->constant(dir))); }

}  // namespace

TEST_CASE("zero parameters give zero features") {
  Network net(BackboneConfig{});
  ParamValues zeros;
  for (const auto& p : net.params()) zeros.push_back(Matrix::Zero(p.values.rows(), p.values.cols()));
  std::mt19937_64 rng(1);
  const Matrix f = net.forward(randn(3, 1024, rng), zeros);
  CHECK(f.rows() == 3);
  CHECK(f.cols() == 64);
  CHECK(f.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identity dense layer passes inputs through") {
  Network net;
  net.add_dense("fc", 6, 6);
  ParamValues eff{Matrix::Identity(6, 6), Matrix::Zero(1, 6)};
  std::mt19937_64 rng(2);
  const Matrix x = randn(4, 6, rng);
  CHECK(net.forward(x, eff) == x);
}

TEST_CASE("forward is pure and row independent") {
  Network net(tiny_backbone());
  net.initialize(9);
  std::mt19937_64 rng(3);
  Matrix x(2, 32);
  x.row(0) = randn(1, 32, rng);
  x.row(1) = x.row(0);
  const auto eff = values_of(net.params());
  const Matrix a = net.forward(x, eff);
  const Matrix b = net.forward(x, eff);
  CHECK(a == b);
  CHECK(a.row(0) == a.row(1));
}

TEST_CASE("forward rejects a wrong input width") {
  Network net(tiny_backbone());
  net.initialize(1);
  CHECK_THROWS_AS(net.forward(Matrix::Zero(1, 30), values_of(net.params())), std::invalid_argument);
}

TEST_CASE("default backbone shape") {
  Network net(BackboneConfig{});
  CHECK(net.input_width() == 1024);
  CHECK(net.feature_dim() == 64);
  std::size_t total = 0;
  for (const auto& p : net.params()) total += p.size();
  CHECK(net.param_count() == total);
}

TEST_CASE("single dense layer gradient matches x^T delta") {
  Network net;
  net.add_dense("fc", 5, 3);
  std::mt19937_64 rng(4);
  net.params()[0].values = Tensor::from_matrix(randn(5, 3, rng));
  net.params()[1].values = Tensor::from_matrix(randn(1, 3, rng));
  const Matrix x = randn(7, 5, rng);
  const Matrix t = randn(7, 3, rng);

  Tape tape;
  const auto bound = bind_variables(tape, net.params());
  Var y = net.forward(tape, tape.constant(x), bound);
  Var loss = scale(sum(square(sub(y, tape.constant(t)))), 0.5);
  backward(loss, bound, net.params());

  const Matrix w = net.params()[0].values.matrix();
  const Matrix b = net.params()[1].values.matrix();
  Matrix delta = x * w;
  delta.rowwise() += b.row(0);
  delta -= t;
  const Matrix gw = x.transpose() * delta;
  const Matrix gb = delta.colwise().sum();
  CHECK((net.params()[0].values.grad_matrix() - gw).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((net.params()[1].values.grad_matrix() - gb).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("network gradient matches central differences") {
  Network net(tiny_backbone());
  net.initialize(5);
  std::mt19937_64 rng(6);
  const Matrix x = randn(3, 32, rng);
  const Matrix dir = randn(3, 5, rng);
  const auto rep = testing::finite_difference(
      [&](Tape& tape, std::span<const Var> p) { return project(net.forward(tape, tape.constant(x), p), dir); },
      values_of(net.params()));
  CHECK(rep.entries == net.param_count());
  CHECK(rep.max_rel < 1e-4);

  SUBCASE("library checker agrees") {
    const auto lib = check_gradients(
        [&](Tape& tape, std::span<const Var> p) { return project(net.forward(tape, tape.constant(x), p), dir); },
        values_of(net.params()));
    CHECK(lib.max_relative_error < 1e-4);
  }
}

TEST_CASE("dense-only network gradient matches central differences") {
  BackboneConfig b;
  b.input_width = 12;
  b.conv.clear();
  b.widths = {6, 4};
  Network net(b);
  net.initialize(7);
  std::mt19937_64 rng(8);
  const Matrix x = randn(4, 12, rng);
  const Matrix dir = randn(4, 4, rng);
  // zero biases leave some activations exactly on the ReLU kink
  auto at = values_of(net.params());
  for (auto& m : at) m += 0.05 * randn(m.rows(), m.cols(), rng);
  const auto rep = testing::finite_difference(
      [&](Tape& tape, std::span<const Var> p) { return project(net.forward(tape, tape.constant(x), p), dir); }, at);
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("every primitive passes the finite-difference check") {
  std::mt19937_64 rng(10);
  const Matrix d34 = randn(3, 4, rng);
  struct Case {
    const char* name;
    testing::LossFn fn;
    ParamValues in;
  };
  const std::vector<Case> cases = {
      {"matmul", [&](Tape&, std::span<const Var> v) { return project(matmul(v[0], v[1]), d34); },
       {randn(3, 5, rng), randn(5, 4, rng)}},
      {"matmul_nt", [&](Tape&, std::span<const Var> v) { return project(matmul_nt(v[0], v[1]), d34); },
       {randn(3, 5, rng), randn(4, 5, rng)}},
      {"add sub mul", [&](Tape&, std::span<const Var> v) { return project(mul(add(v[0], v[1]), sub(v[0], v[1])), d34); },
       {randn(3, 4, rng), randn(3, 4, rng)}},
      {"row and col broadcast",
       [&](Tape&, std::span<const Var> v) { return project(mul_col(mul_row(add_row(v[0], v[1]), v[1]), v[2]), d34); },
       {randn(3, 4, rng), randn(1, 4, rng), randn(3, 1, rng)}},
      {"scale shift neg", [&](Tape&, std::span<const Var> v) { return project(neg(add_scalar(scale(v[0], 1.7), 0.3)), d34); },
       {randn(3, 4, rng)}},
      {"relu", [&](Tape&, std::span<const Var> v) { return project(relu(v[0]), d34); }, {randn(3, 4, rng)}},
      {"exp log", [&](Tape&, std::span<const Var> v) { return project(log(add_scalar(exp(v[0]), 0.5)), d34); },
       {randn(3, 4, rng)}},
      {"sigmoid square reciprocal",
       [&](Tape&, std::span<const Var> v) { return project(reciprocal(add_scalar(square(sigmoid(v[0])), 0.2)), d34); },
       {randn(3, 4, rng)}},
      {"clamp", [&](Tape&, std::span<const Var> v) { return project(clamp(v[0], -0.5, 0.5), d34); },
       {randn(3, 4, rng, 0.3)}},
      {"reductions",
       [&](Tape&, std::span<const Var> v) { return add(sum(square(sum_rows(v[0]))), add(mean(v[0]), sum(max_rows(v[0])))); },
       {randn(3, 4, rng)}},
      {"softmax", [&](Tape&, std::span<const Var> v) { return project(softmax_rows(v[0]), d34); }, {randn(3, 4, rng)}},
      {"log softmax", [&](Tape&, std::span<const Var> v) { return project(log_softmax_rows(v[0]), d34); },
       {randn(3, 4, rng)}},
      {"pairwise distance", [&](Tape&, std::span<const Var> v) { return project(pairwise_sq_dist(v[0], v[1]), d34); },
       {randn(3, 6, rng), randn(4, 6, rng)}},
      {"conv1d",
       [&](Tape& t, std::span<const Var> v) {
         const Matrix dir = Matrix::Constant(2, 5 * 3, 0.7) + Matrix::Identity(2, 15);
         return sum(mul(conv1d(v[0], v[1], v[2], 2, 3, 2), t.constant(dir)));
       },
       {randn(2, 2 * 11, rng), randn(3, 3 * 2, rng), randn(1, 3, rng)}},
      {"avg pool",
       [&](Tape& t, std::span<const Var> v) {
         return sum(mul(avg_pool(v[0], 3, 4), t.constant(Matrix(Eigen::RowVectorXd::LinSpaced(12, -1.0, 2.0).replicate(2, 1)))));
       },
       {randn(2, 3 * 7, rng)}},
      {"slice", [&](Tape&, std::span<const Var> v) { return sum(square(slice_cols(v[0], 1, 2))); }, {randn(3, 4, rng)}},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    CHECK(testing::finite_difference(c.fn, c.in).max_rel < 1e-4);
  }
}

TEST_CASE("avg pool bins follow the floor and ceil rule") {
  Tape tape;
  Matrix x(1, 5);
  x << 1, 2, 3, 4, 5;  // one channel, five positions
  const Matrix y = avg_pool(tape.constant(x), 1, 2).value();
  // bin 0 covers [0, 3), bin 1 covers [2, 5)
  CHECK(y(0, 0) == doctest::Approx(2.0));
  CHECK(y(0, 1) == doctest::Approx(4.0));
}

TEST_CASE("conv1d matches a direct loop") {
  std::mt19937_64 rng(12);
  const Eigen::Index in_ch = 2, k = 3, stride = 2, len = 9, out_ch = 4;
  const Matrix x = randn(1, len * in_ch, rng);
  const Matrix w = randn(out_ch, k * in_ch, rng);
  const Matrix b = randn(1, out_ch, rng);
  Tape tape;
  const Matrix y = conv1d(tape.constant(x), tape.constant(w), tape.constant(b), in_ch, k, stride).value();
  const Eigen::Index out_len = (len - k) / stride + 1;
  REQUIRE(y.cols() == out_len * out_ch);
  for (Eigen::Index o = 0; o < out_len; ++o) {
    for (Eigen::Index c = 0; c < out_ch; ++c) {
      double acc = b(0, c);
      for (Eigen::Index j = 0; j < k; ++j) {
        for (Eigen::Index i = 0; i < in_ch; ++i) acc += w(c, j * in_ch + i) * x(0, (o * stride + j) * in_ch + i);
      }
      CHECK(y(0, o * out_ch + c) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("frozen entries receive exactly zero gradient") {
  Network net(tiny_backbone());
  net.initialize(13);
  std::mt19937_64 rng(14);
  std::bernoulli_distribution coin(0.5);
  for (auto& p : net.params()) {
    for (auto& f : p.frozen) f = coin(rng) ? 1 : 0;
  }
  const Matrix x = randn(4, 32, rng);
  Tape tape;
  const auto bound = bind_variables(tape, net.params());
  backward(sum(square(net.forward(tape, tape.constant(x), bound))), bound, net.params());
  for (const auto& p : net.params()) {
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (p.frozen[k]) CHECK(p.values.grad[k] == 0.0);
    }
  }

  SUBCASE("all frozen") {
    for (auto& p : net.params()) std::fill(p.frozen.begin(), p.frozen.end(), 1);
    Tape t2;
    const auto b2 = bind_variables(t2, net.params());
    backward(sum(square(net.forward(t2, t2.constant(x), b2))), b2, net.params());
    for (const auto& p : net.params()) {
      for (double g : p.values.grad) CHECK(g == 0.0);
    }
  }
}

TEST_CASE("backward requires a forward pass on the same tape") {
  Network net(tiny_backbone());
  net.initialize(1);
  Tape tape;
  const auto bound = bind_variables(tape, net.params());
  CHECK_THROWS_AS(backward(Var{}, bound, net.params()), std::logic_error);

  Tape other;
  const auto foreign = bind_variables(other, net.params());
  Var loss = sum(net.forward(tape, tape.constant(Matrix::Ones(1, 32)), bound));
  CHECK_THROWS_AS(backward(loss, foreign, net.params()), std::logic_error);
  CHECK_NOTHROW(backward(loss, bound, net.params()));
  CHECK_THROWS_AS(backward(loss, bound, net.params()), std::logic_error);
}

TEST_CASE("plain sgd step") {
  ParamList ps;
  ps.emplace_back("p", Tensor({3}, 1.0));
  ParamValues g{Matrix::Constant(3, 1, 0.5)};
  SUBCASE("zero rate leaves parameters") {
    sgd_step(ps, g, 0.0);
    for (double v : ps[0].values.data) CHECK(v == 1.0);
  }
  SUBCASE("arithmetic") {
    sgd_step(ps, g, 0.1);
    for (double v : ps[0].values.data) CHECK(v == doctest::Approx(0.95));
  }
  SUBCASE("frozen entry ignores a stored gradient") {
    ps[0].frozen[1] = 1;
    ps[0].values.grad = {0.5, 0.5, 0.5};
    sgd_step(ps, 0.1);
    CHECK(ps[0].values.data[1] == 1.0);
    CHECK(ps[0].values.data[0] == doctest::Approx(0.95));
  }
}

TEST_CASE("momentum optimiser never moves frozen entries") {
  std::mt19937_64 rng(15);
  ParamList ps;
  ps.emplace_back("w", Tensor::from_matrix(randn(4, 4, rng)));
  for (std::size_t k = 0; k < 16; k += 3) ps[0].frozen[k] = 1;
  const auto before = ps[0].values.data;
  Sgd opt(0.9, 1e-3);
  for (int s = 0; s < 50; ++s) {
    const Matrix g = randn(4, 4, rng);
    ps[0].values.grad.assign(g.data(), g.data() + g.size());
    opt.step(ps, 0.05);
  }
  for (std::size_t k = 0; k < 16; ++k) {
    if (ps[0].frozen[k]) CHECK(ps[0].values.data[k] == before[k]);
    else CHECK(ps[0].values.data[k] != before[k]);
  }
}

TEST_CASE("gradient clipping bounds the joint norm") {
  ParamList a, b;
  a.emplace_back("a", Tensor({2}, 0.0));
  b.emplace_back("b", Tensor({1}, 0.0));
  a[0].values.grad = {3.0, 0.0};
  b[0].values.grad = {4.0};
  CHECK(clip_gradients({&a, &b}, 0.0) == doctest::Approx(5.0));
  CHECK(a[0].values.grad[0] == 3.0);
  CHECK(clip_gradients({&a, &b}, 1.0) == doctest::Approx(5.0));
  CHECK(a[0].values.grad[0] == doctest::Approx(0.6));
  CHECK(b[0].values.grad[0] == doctest::Approx(0.8));
  CHECK(clip_gradients({&a, nullptr}, 10.0) == doctest::Approx(0.6));
}

TEST_CASE("cosine schedule endpoints") {
  CHECK(cosine_lr(0.1, 0, 10) == doctest::Approx(0.1));
  CHECK(cosine_lr(0.1, 5, 10) == doctest::Approx(0.05));
  CHECK(cosine_lr(0.1, 10, 10) == doctest::Approx(0.0));
}

TEST_CASE("tensor bookkeeping") {
  Tensor t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 12);
  CHECK_FALSE(t.has_grad());
  t.zero_grad();
  CHECK(t.grad.size() == t.data.size());
  CHECK(element_count({5, 0}) == 0);
}
