#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fishnet/optim.hpp"

using namespace fish;

TEST_CASE("plain sgd step") {
  ArrayX<double> p(1), g(1), v(1);
  p << 1.0;
  g << 0.5;
  v << 0.0;
  sgd_step(p, g, v, 0.1, 0.0, 0.0);
  CHECK(p[0] == doctest::Approx(0.95).epsilon(1e-15));
}

TEST_CASE("two momentum steps follow the hand recurrence") {
  // v1 = g1; p1 = p0 - lr*v1; v2 = 0.9*v1 + g2; p2 = p1 - lr*v2
  ArrayX<double> p(1), v(1), g(1);
  p << 2.0;
  v << 0.0;
  g << 0.4;
  sgd_step(p, g, v, 0.1, 0.9, 0.0);
  CHECK(v[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(p[0] == doctest::Approx(2.0 - 0.1 * 0.4).epsilon(1e-15));
  g << -0.2;
  sgd_step(p, g, v, 0.1, 0.9, 0.0);
  const double v2 = 0.9 * 0.4 - 0.2;  // 0.16
  CHECK(v[0] == doctest::Approx(v2).epsilon(1e-15));
  CHECK(p[0] == doctest::Approx(1.96 - 0.1 * v2).epsilon(1e-15));
}

TEST_CASE("weight decay alone shrinks the parameter geometrically") {
  ArrayX<double> p(1), v(1), g(1);
  p << 3.0;
  v << 0.0;
  g << 0.0;
  const double lr = 0.05, wd = 1e-2;
  double want = 3.0;
  for (int i = 0; i < 5; ++i) {
    sgd_step(p, g, v, lr, 0.0, wd);
    want *= (1.0 - lr * wd);
    CHECK(p[0] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("graph-level optimizer touches only trainable parameters") {
  Graph<double> g;
  NodeId x = g.input({1, 2, 2, 2}, "x");
  NodeId gamma = g.parameter({2}, "gamma");
  NodeId beta = g.parameter({2}, "beta");
  NodeId rm = g.parameter({2}, "rm", false);
  NodeId rv = g.parameter({2}, "rv", false);
  g.value(gamma).values().setConstant(1.0);
  g.value(rv).values().setConstant(1.0);
  g.value(x).values() << 1, 2, 3, 4, 5, 6, 7, 8;
  NodeId y = g.batchnorm(x, gamma, beta, rm, rv);
  NodeId p = g.global_avg_pool(y);
  g.forward();
  g.backward_seeded(p, ArrayX<double>::Ones(2));

  Sgd<double> opt(g);
  CHECK(opt.params().size() == 2);
  const double rm0 = g.value(rm).values()[0];
  opt.step(g, 0.1, 0.9, 1e-4);
  CHECK(g.value(rm).values()[0] == rm0);  // buffer untouched by the optimizer
}
