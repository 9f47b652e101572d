#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "datom/adam.hpp"
#include "datom/autodiff.hpp"
#include "datom/rng.hpp"

#include <cmath>

using namespace datom;

namespace {

Eigen::ArrayXXd randn(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Eigen::ArrayXXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("square loss has the textbook gradient") {
  // L = mean((p - x)^2), dL/dp = 2 (p - x) / n.
  Parameter p("p", 4, 1);
  p.value << 1, -2, 0.5, 3;
  Eigen::ArrayXXd x(4, 1);
  x << 0, 1, 1, 1;

  Tape t;
  Expr loss = mean_all(square(t.param(p) - t.input(x)));
  t.backward(loss);

  CHECK(t.scalar_value(loss) == doctest::Approx((1 + 9 + 0.25 + 4) / 4.0).epsilon(1e-14));
  Eigen::ArrayXXd want = 2.0 * (p.value - x) / 4.0;
  CHECK((p.grad - want).abs().maxCoeff() < 1e-14);
}

TEST_CASE("backward accumulates until zero_grad") {
  Parameter p("p", 2, 1);
  p.value << 1, 2;
  Tape t;
  Expr loss = sum_all(square(t.param(p)));
  t.backward(loss);
  Eigen::ArrayXXd once = p.grad;
  t.backward(loss);
  CHECK((p.grad - 2.0 * once).abs().maxCoeff() < 1e-14);
  p.zero_grad();
  CHECK(p.grad.abs().maxCoeff() == 0.0);
}

TEST_CASE("backward seed scales the gradient") {
  Parameter p("p", 3, 1);
  p.value << 1, 2, 3;
  Tape t;
  Expr loss = sum_all(square(t.param(p)));
  t.backward(loss, 0.25);
  CHECK((p.grad - 0.5 * p.value).abs().maxCoeff() < 1e-14);
}

TEST_CASE("relu subgradient is zero at zero") {
  Parameter p("p", 3, 1);
  p.value << -1, 0, 2;
  Tape t;
  Expr loss = sum_all(relu(t.param(p)));
  t.backward(loss);
  CHECK(p.grad(0, 0) == 0.0);
  CHECK(p.grad(1, 0) == 0.0);
  CHECK(p.grad(2, 0) == 1.0);
}

TEST_CASE("abs subgradient is the sign, zero at zero") {
  Parameter p("p", 3, 1);
  p.value << -2, 0, 5;
  Tape t;
  Expr loss = sum_all(abs(t.param(p)));
  t.backward(loss);
  CHECK(p.grad(0, 0) == -1.0);
  CHECK(p.grad(1, 0) == 0.0);
  CHECK(p.grad(2, 0) == 1.0);
}

TEST_CASE("detach blocks the gradient but not the value") {
  Parameter p("p", 2, 1);
  p.value << 3, 4;
  Tape t;
  Expr e = t.param(p);
  Expr loss = sum_all(scalar_mul(sum_all(detach(e)), e));
  // L = (sum p) * p summed = s*p1 + s*p2 with s treated as constant 7.
  t.backward(loss);
  CHECK(t.scalar_value(loss) == doctest::Approx(49.0).epsilon(1e-14));
  CHECK(p.grad(0, 0) == doctest::Approx(7.0).epsilon(1e-14));
  CHECK(p.grad(1, 0) == doctest::Approx(7.0).epsilon(1e-14));
}

TEST_CASE("usage errors throw") {
  Tape t, t2;
  Eigen::ArrayXXd v(2, 1);
  v << 1, 2;
  Expr a = t.input(v);
  Expr b = t2.input(v);
  CHECK_THROWS_AS(t.add(a, b), std::invalid_argument);

  Eigen::ArrayXXd w(3, 1);
  w << 1, 2, 3;
  CHECK_THROWS_AS(t.add(a, t.input(w)), std::invalid_argument);

  // Root of backward must be scalar.
  CHECK_THROWS_AS(t.backward(a), std::invalid_argument);

  // scalar_mul wants a (1 x 1) scalar on the left.
  CHECK_THROWS_AS(t.scalar_mul(a, a), std::invalid_argument);

  // mask length must match rows.
  NoiseMask m{1, 0, 1};
  CHECK_THROWS_AS(t.mask_keep(a, m, true), std::invalid_argument);
}

TEST_CASE("finite differences agree for every primitive") {
  Rng rng(11);
  const int t_len = 20;

  Parameter taps("taps", 5, 2);      // 1 in, 2 out
  Parameter taps2("taps2", 3, 2);    // 2 in, 1 out
  Parameter bias("bias", 2, 1);
  Parameter bias2("bias2", 1, 1);
  Parameter atom("atom", 6, 1);
  Parameter head_w("w", 2, 1);
  Parameter head_b("b", 1, 1);
  taps.value = 0.4 * randn(5, 2, rng);
  taps2.value = 0.4 * randn(3, 2, rng);
  bias.value = 0.1 * randn(2, 1, rng);
  bias2.value = 0.1 * randn(1, 1, rng);
  atom.value = randn(6, 1, rng);
  head_w.value = randn(2, 1, rng);
  head_b.value = randn(1, 1, rng);
  Eigen::ArrayXXd x = randn(t_len, 1, rng);
  NoiseMask mask(static_cast<std::size_t>(t_len), 0);
  for (int i = 0; i < t_len; ++i) mask[static_cast<std::size_t>(i)] = rng.bernoulli(0.5) ? 1 : 0;

  std::vector<Parameter*> params{&taps, &taps2, &bias, &bias2, &atom, &head_w, &head_b};

  auto loss = [&]() {
    Tape t;
    Expr xin = t.input(x);
    Expr b1 = t.param(bias);
    Expr h = t.conv1d(xin, t.param(taps), &b1, 1, 2);
    Expr b2 = t.param(bias2);
    Expr h2 = relu(t.conv1d(h, t.param(taps2), &b2, 2, 1));
    Expr z = relu(channel_sum(h));
    Expr recon = t.conv1d(z, t.param(atom), nullptr, 1, 1);
    Expr fid = mean_all(square(xin - recon));
    Expr masked = sum_all(square(mask_keep(h2, mask, true)));
    Expr sc = linear(time_sum(relu(h)), t.param(head_w), t.param(head_b));
    Expr l1 = sum_all(abs(z));
    Expr total = fid + 0.3 * masked + square(sc) + 0.01 * l1 + mean_all(h2) - 0.1 * sum_all(h);
    t.backward(total);
    return t.scalar_value(total);
  };

  FdCheckOptions opts;
  opts.max_coords_per_param = 0;  // every coordinate
  CHECK(finite_diff_check(loss, params, opts) < 1e-6);
}

TEST_CASE("linear head matches a hand computation") {
  Parameter w("w", 2, 1), b("b", 1, 1);
  w.value << 2, -1;
  b.value << 0.5;
  Eigen::ArrayXXd v(1, 2);
  v << 3, 4;

  Tape t;
  Expr out = linear(t.input(v), t.param(w), t.param(b));
  t.backward(out);
  CHECK(t.scalar_value(out) == doctest::Approx(2 * 3 - 4 + 0.5).epsilon(1e-14));
  CHECK(w.grad(0, 0) == doctest::Approx(3).epsilon(1e-14));
  CHECK(w.grad(1, 0) == doctest::Approx(4).epsilon(1e-14));
  CHECK(b.grad(0, 0) == doctest::Approx(1).epsilon(1e-14));
}

TEST_CASE("time_sum and channel_sum reduce the right axes") {
  Eigen::ArrayXXd v(3, 2);
  v << 1, 10, 2, 20, 3, 30;
  Tape t;
  Expr e = t.input(v);
  const auto& ts = t.value(time_sum(e));
  REQUIRE(ts.rows() == 1);
  REQUIRE(ts.cols() == 2);
  CHECK(ts(0, 0) == 6);
  CHECK(ts(0, 1) == 60);
  const auto& cs = t.value(channel_sum(e));
  REQUIRE(cs.rows() == 3);
  REQUIRE(cs.cols() == 1);
  CHECK(cs(1, 0) == 22);
}

TEST_CASE("tape reset invalidates and reuses storage") {
  Tape t;
  Eigen::ArrayXXd v(1, 1);
  v << 2;
  Expr a = t.input(v);
  CHECK(t.size() == 1);
  t.reset();
  CHECK(t.size() == 0);
  CHECK_THROWS_AS(t.value(a), std::invalid_argument);
}

TEST_CASE("adam takes the documented first step") {
  // g = 1, m_hat = 1, v_hat = 1: step = -lr * 1/(1 + eps) ~ -lr.
  Parameter p("p", 1, 1);
  p.value << 0;
  p.grad << 1;
  AdamConfig cfg;
  cfg.lr = 1e-3;
  Adam opt({&p}, cfg);
  opt.step();
  CHECK(p.value(0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(opt.steps() == 1);
}

TEST_CASE("adam with lr = 0 leaves parameters alone") {
  Parameter p("p", 3, 1);
  p.value << 1, 2, 3;
  p.grad << 4, 5, 6;
  AdamConfig cfg;
  cfg.lr = 0.0;
  Adam opt({&p}, cfg);
  opt.step();
  CHECK(p.value(0, 0) == 1.0);
  CHECK(p.value(1, 0) == 2.0);
  CHECK(p.value(2, 0) == 3.0);
}

TEST_CASE("adam weight decay pulls toward zero with zero gradient") {
  Parameter p("p", 1, 1);
  p.value << 10;
  p.grad << 0;
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 1e-2;
  Adam opt({&p}, cfg);
  opt.step();
  CHECK(p.value(0, 0) < 10.0);
  CHECK(p.value(0, 0) > 9.0);
}

TEST_CASE("adam drives a quadratic to its minimum") {
  Parameter p("p", 2, 1);
  p.value << 5, -3;
  Eigen::ArrayXXd target(2, 1);
  target << 1, 2;
  AdamConfig cfg;
  cfg.lr = 0.05;
  Adam opt({&p}, cfg);
  Tape t;
  for (int i = 0; i < 2000; ++i) {
    opt.zero_grad();
    t.reset();
    Expr loss = mean_all(square(t.param(p) - t.input(target)));
    t.backward(loss);
    opt.step();
  }
  CHECK((p.value - target).abs().maxCoeff() < 1e-4);
}

TEST_CASE("finite_diff_check flags a wrong gradient") {
  Parameter p("p", 2, 1);
  p.value << 1, 2;
  auto loss = [&]() {
    Tape t;
    Expr l = sum_all(square(t.param(p)));
    t.backward(l);
    p.grad(0, 0) += 1.0;  // sabotage
    return t.scalar_value(l);
  };
  FdCheckOptions opts;
  opts.max_coords_per_param = 0;
  CHECK(finite_diff_check(loss, {&p}, opts) > 0.1);
}
