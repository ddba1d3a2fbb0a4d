#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "voltlab/mlp.hpp"

using namespace voltlab;

namespace {

// Plain loops over the layer matrices, no Eigen products.
std::vector<double> manual_forward(const Mlp& net, std::vector<double> x) {
  for (size_t l = 0; l < net.layer_count(); ++l) {
    const Eigen::MatrixXd& w = net.weight(l);
    std::vector<double> y(static_cast<size_t>(w.rows()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      double s = net.bias(l)(i);
      for (Eigen::Index j = 0; j < w.cols(); ++j) s += w(i, j) * x[static_cast<size_t>(j)];
      y[static_cast<size_t>(i)] = l + 1 < net.layer_count() ? std::tanh(s) : s;
    }
    x = y;
  }
  return x;
}

// Scalar loss 0.5 |f(x) - t|^2 summed over the batch.
double loss(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& t) {
  return 0.5 * (net.forward(x) - t).squaredNorm();
}

}  // namespace

TEST_CASE("zero network outputs zero") {
  const Mlp net({4, 8, 8, 3});
  const Eigen::VectorXd y = net.forward(Eigen::VectorXd(Eigen::VectorXd::Constant(4, 7.0)));
  CHECK(y.size() == 3);
  CHECK(y.isZero(0.0));
}

TEST_CASE("parameter count sums fan_in plus one times fan_out") {
  CHECK(Mlp({3, 8, 2}).parameter_count() == (3 + 1) * 8 + (8 + 1) * 2);
  CHECK(Mlp({9, 64, 64, 6}).parameter_count() == 10 * 64 + 65 * 64 + 65 * 6);
  Rng rng(1);
  const Mlp net = Mlp::random({5, 7, 2}, rng);
  CHECK(static_cast<size_t>(net.parameters().size()) == net.parameter_count());
}

TEST_CASE("single affine layer is an exact linear map") {
  Mlp net({2, 2});
  net.weight(0) = Eigen::Matrix2d::Identity();
  net.bias(0) << 0.5, -0.25;
  Eigen::VectorXd x(2);
  x << 3.0, -4.0;
  CHECK(net.forward(x) == Eigen::VectorXd(Eigen::Vector2d(3.5, -4.25)));
  Rng rng(2);
  const Mlp lin = Mlp::random({3, 2}, rng);
  const Eigen::Vector3d a(0.1, -0.7, 2.0), b(-1.5, 0.3, 0.4);
  const Eigen::VectorXd lhs = lin.forward(Eigen::VectorXd(2.0 * a + 3.0 * b));
  const Eigen::VectorXd rhs = 2.0 * lin.forward(Eigen::VectorXd(a)) + 3.0 * lin.forward(Eigen::VectorXd(b)) -
                              4.0 * lin.bias(0);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("forward matches a direct loop evaluation") {
  Rng rng(3);
  const Mlp net = Mlp::random({3, 8, 2}, rng);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> x = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const Eigen::VectorXd y = net.forward(Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(x.data(), 3)));
    const std::vector<double> ref = manual_forward(net, x);
    CHECK(std::abs(y(0) - ref[0]) <= 1e-13);
    CHECK(std::abs(y(1) - ref[1]) <= 1e-13);
  }
}

TEST_CASE("batched forward equals column-wise forward") {
  Rng rng(4);
  const Mlp net = Mlp::random({4, 6, 6, 3}, rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 5);
  const Eigen::MatrixXd y = net.forward(x);
  for (Eigen::Index j = 0; j < 5; ++j) CHECK((y.col(j) - net.forward(Eigen::VectorXd(x.col(j)))).norm() <= 1e-14);
}

TEST_CASE("parameter gradient matches central differences") {
  Rng rng(5);
  Mlp net = Mlp::random({3, 8, 5, 2}, rng);
  for (size_t l = 0; l < net.layer_count(); ++l) net.bias(l).setRandom();
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 4);
  const Eigen::MatrixXd t = Eigen::MatrixXd::Random(2, 4);
  MlpCache cache;
  const Eigen::MatrixXd y = net.forward(x, &cache);
  Eigen::MatrixXd d_in;
  const Eigen::VectorXd g = net.backward(cache, y - t, &d_in).flatten();
  const Eigen::VectorXd p0 = net.parameters();
  REQUIRE(g.size() == p0.size());
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < p0.size(); ++i) {
    Eigen::VectorXd p = p0;
    p(i) += h;
    net.set_parameters(p);
    const double up = loss(net, x, t);
    p(i) -= 2 * h;
    net.set_parameters(p);
    const double down = loss(net, x, t);
    const double fd = (up - down) / (2 * h);
    CHECK(std::abs(fd - g(i)) <= 1e-6 * std::max(1.0, std::abs(fd)));
  }
  net.set_parameters(p0);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      Eigen::MatrixXd xp = x, xm = x;
      xp(r, c) += h;
      xm(r, c) -= h;
      const double fd = (loss(net, xp, t) - loss(net, xm, t)) / (2 * h);
      CHECK(std::abs(fd - d_in(r, c)) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("zero output gradient gives zero parameter gradient") {
  Rng rng(6);
  const Mlp net = Mlp::random({3, 4, 2}, rng);
  MlpCache cache;
  net.forward(Eigen::MatrixXd::Random(3, 7), &cache);
  CHECK(net.backward(cache, Eigen::MatrixXd::Zero(2, 7)).flatten().isZero(0.0));
}

TEST_CASE("gradient arithmetic") {
  Rng rng(7);
  const Mlp net = Mlp::random({2, 3, 1}, rng);
  MlpCache cache;
  net.forward(Eigen::MatrixXd::Random(2, 3), &cache);
  MlpGrad g = net.backward(cache, Eigen::MatrixXd::Ones(1, 3));
  const Eigen::VectorXd base = g.flatten();
  MlpGrad h = g;
  h += g;
  h *= 0.25;
  CHECK((h.flatten() - 0.5 * base).norm() <= 1e-15);
  CHECK(net.zero_grad().flatten().size() == base.size());
}

TEST_CASE("parameters round trip through the flat vector") {
  Rng rng(8);
  Mlp a = Mlp::random({3, 5, 2}, rng);
  Mlp b({3, 5, 2});
  b.set_parameters(a.parameters());
  CHECK(b.parameters() == a.parameters());
  CHECK(a.parameters()(0) == a.weight(0)(0, 0));
  CHECK(a.parameters()(1) == a.weight(0)(1, 0));
  CHECK(a.parameters()(15) == a.bias(0)(0));
  CHECK_THROWS_AS(b.set_parameters(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("soft update interpolates") {
  Rng rng(9);
  const Mlp online = Mlp::random({2, 4, 1}, rng);
  Mlp target = Mlp::random({2, 4, 1}, rng);
  const Eigen::VectorXd t0 = target.parameters();
  Mlp copy = target;
  copy.soft_update_from(online, 1.0);
  CHECK(copy.parameters() == online.parameters());
  copy = target;
  copy.soft_update_from(online, 0.0);
  CHECK(copy.parameters() == t0);
  target.soft_update_from(online, 0.1);
  CHECK((target.parameters() - (0.1 * online.parameters() + 0.9 * t0)).norm() <= 1e-14);
}

TEST_CASE("random init respects the fan-in bound") {
  Rng rng(10);
  const Mlp net = Mlp::random({16, 32, 4}, rng);
  CHECK(net.weight(0).cwiseAbs().maxCoeff() <= 0.25);
  CHECK(net.weight(1).cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(32.0));
  CHECK(net.bias(0).isZero(0.0));
  Rng again(10);
  CHECK(Mlp::random({16, 32, 4}, again).parameters() == net.parameters());
}

TEST_CASE("adam descends a quadratic") {
  Adam opt;
  opt.lr = 0.05;
  Eigen::VectorXd x(2);
  x << 3.0, -2.0;
  opt.reset(2);
  for (int i = 0; i < 2000; ++i) {
    const Eigen::VectorXd g = 2.0 * x;
    opt.step(x, g);
  }
  CHECK(x.norm() < 1e-2);
  CHECK(opt.step_count == 2000);
}

TEST_CASE("adam first step moves each coordinate by lr") {
  Adam opt;
  opt.lr = 0.1;
  opt.reset(3);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd g(3);
  g << 5.0, -0.001, 2.0;
  opt.step(x, g);
  CHECK(x(0) == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(x(1) == doctest::Approx(0.1).epsilon(1e-4));
  CHECK(x(2) == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("wrong input size throws") {
  const Mlp net({3, 2});
  CHECK_THROWS_AS(net.forward(Eigen::VectorXd(Eigen::VectorXd::Zero(4))), std::invalid_argument);
}
