#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "fishnet/graph.hpp"
#include "test_util.hpp"

using namespace fish;
using testutil::check_grads_fd;
using testutil::fill_uniform;

TEST_CASE("finite differences: conv2d variants") {
  auto r = testutil::rng(11);
  struct Case {
    Shape xs, ws;
    ops::ConvAttrs a;
  };
  const std::vector<Case> cases = {
      {{2, 3, 5, 5}, {4, 3, 3, 3}, {.stride = 1, .padding = 1}},
      {{1, 2, 7, 7}, {3, 2, 3, 3}, {.stride = 2, .padding = 1}},
      {{2, 4, 6, 6}, {4, 2, 3, 3}, {.stride = 1, .padding = 2, .dilation = 2, .groups = 2}},
      {{1, 4, 5, 5}, {8, 1, 1, 1}, {.groups = 4}},
  };
  for (const auto& c : cases) {
    Graph<double> g;
    NodeId x = g.input(c.xs, "x");
    g.value(x).set_requires_grad(true);
    NodeId w = g.parameter(c.ws, "w");
    fill_uniform(g.value(x).values(), r);
    fill_uniform(g.value(w).values(), r);
    NodeId y = g.conv2d(x, w, c.a);
    check_grads_fd(g, y, {x, w}, r);
  }
}

TEST_CASE("finite differences: pooling, upsample, reduce, concat") {
  auto r = testutil::rng(12);
  {
    Graph<double> g;
    NodeId x = g.input({2, 2, 6, 6}, "x");
    g.value(x).set_requires_grad(true);
    fill_uniform(g.value(x).values(), r);
    NodeId y = g.maxpool(x, 2, 2);
    check_grads_fd(g, y, {x}, r);
  }
  {
    Graph<double> g;
    NodeId x = g.input({1, 2, 8, 8}, "x");
    g.value(x).set_requires_grad(true);
    fill_uniform(g.value(x).values(), r);
    NodeId y = g.maxpool(x, 3, 2, 1);
    check_grads_fd(g, y, {x}, r);
  }
  {
    Graph<double> g;
    NodeId x = g.input({2, 3, 4, 4}, "x");
    g.value(x).set_requires_grad(true);
    fill_uniform(g.value(x).values(), r);
    NodeId y = g.avgpool(x);
    check_grads_fd(g, y, {x}, r);
  }
  {
    Graph<double> g;
    NodeId x = g.input({2, 2, 3, 3}, "x");
    g.value(x).set_requires_grad(true);
    fill_uniform(g.value(x).values(), r);
    NodeId y = g.upsample_nearest(x);
    check_grads_fd(g, y, {x}, r);
  }
  {
    Graph<double> g;
    NodeId x = g.input({2, 6, 3, 3}, "x");
    g.value(x).set_requires_grad(true);
    fill_uniform(g.value(x).values(), r);
    NodeId y = g.channel_reduce(x, 3);
    check_grads_fd(g, y, {x}, r);
  }
  {
    Graph<double> g;
    NodeId a = g.input({1, 2, 3, 3}, "a");
    NodeId b = g.input({1, 3, 3, 3}, "b");
    NodeId c = g.input({1, 1, 3, 3}, "c");
    for (NodeId n : {a, b, c}) {
      g.value(n).set_requires_grad(true);
      fill_uniform(g.value(n).values(), r);
    }
    NodeId y = g.concat({a, b, c});
    check_grads_fd(g, y, {a, b, c}, r);
  }
}

TEST_CASE("finite differences: elementwise, batchnorm, linear, heads") {
  auto r = testutil::rng(13);
  {
    Graph<double> g;
    NodeId a = g.input({2, 2, 3, 3}, "a");
    NodeId b = g.input({2, 2, 3, 3}, "b");
    g.value(a).set_requires_grad(true);
    g.value(b).set_requires_grad(true);
    fill_uniform(g.value(a).values(), r);
    fill_uniform(g.value(b).values(), r);
    NodeId y = g.add(a, b);
    check_grads_fd(g, y, {a, b}, r);
  }
  {
    Graph<double> g;
    NodeId x = g.input({2, 3, 4, 4}, "x");
    g.value(x).set_requires_grad(true);
    fill_uniform(g.value(x).values(), r);
    NodeId y = g.relu(x);
    check_grads_fd(g, y, {x}, r);
  }
  {
    Graph<double> g;
    NodeId x = g.input({1, 2, 3, 3}, "x");
    g.value(x).set_requires_grad(true);
    fill_uniform(g.value(x).values(), r);
    NodeId y = g.sigmoid(x);
    check_grads_fd(g, y, {x}, r);
  }
  for (bool train : {true, false}) {
    Graph<double> g;
    g.mode = train ? Graph<double>::Mode::train : Graph<double>::Mode::eval;
    NodeId x = g.input({3, 2, 4, 4}, "x");
    g.value(x).set_requires_grad(true);
    NodeId gamma = g.parameter({2}, "gamma");
    NodeId beta = g.parameter({2}, "beta");
    NodeId rm = g.parameter({2}, "rm", false);
    NodeId rv = g.parameter({2}, "rv", false);
    fill_uniform(g.value(x).values(), r);
    fill_uniform(g.value(gamma).values(), r, 0.5, 1.5);
    fill_uniform(g.value(beta).values(), r, -0.5, 0.5);
    g.value(rm).values().setConstant(0.1);
    g.value(rv).values().setConstant(0.9);
    NodeId y = g.batchnorm(x, gamma, beta, rm, rv);
    check_grads_fd(g, y, {x, gamma, beta}, r);
  }
  {
    Graph<double> g;
    NodeId x = g.input({3, 4}, "x");
    g.value(x).set_requires_grad(true);
    NodeId w = g.parameter({5, 4}, "w");
    fill_uniform(g.value(x).values(), r);
    fill_uniform(g.value(w).values(), r);
    NodeId y = g.linear(x, w);
    check_grads_fd(g, y, {x, w}, r);
  }
  {
    Graph<double> g;
    NodeId x = g.input({2, 3, 4, 4}, "x");
    g.value(x).set_requires_grad(true);
    fill_uniform(g.value(x).values(), r);
    NodeId y = g.global_avg_pool(x);
    check_grads_fd(g, y, {x}, r);
  }
  {
    Graph<double> g;
    NodeId x = g.input({2, 3, 3, 3}, "x");
    NodeId gate = g.input({2, 3, 1, 1}, "gate");
    g.value(x).set_requires_grad(true);
    g.value(gate).set_requires_grad(true);
    fill_uniform(g.value(x).values(), r);
    fill_uniform(g.value(gate).values(), r);
    NodeId y = g.scale_channels(x, gate);
    check_grads_fd(g, y, {x, gate}, r);
  }
  {
    Graph<double> g;
    NodeId x = g.input({4, 6}, "logits");
    NodeId labels = g.input({4}, "labels");
    g.value(x).set_requires_grad(true);
    fill_uniform(g.value(x).values(), r);
    g.value(labels).values() << 0, 2, 5, 3;
    NodeId y = g.softmax_xent(x, labels);
    check_grads_fd(g, y, {x}, r);
  }
}

TEST_CASE("loss = sum(x) gives all-ones gradient") {
  Graph<double> g;
  NodeId x = g.input({1, 6, 1, 1}, "x");
  g.value(x).set_requires_grad(true);
  auto r = testutil::rng(14);
  fill_uniform(g.value(x).values(), r);
  NodeId loss = g.channel_reduce(x, 6);  // (1,1,1,1): sum over all six channels
  g.forward();
  g.backward(loss);
  for (int64_t i = 0; i < 6; ++i) CHECK(g.value(x).grad()[i] == 1.0);
}

TEST_CASE("residual with zero weights passes gradient through unchanged") {
  auto r = testutil::rng(15);
  Graph<double> g;
  NodeId x = g.input({1, 4, 4, 4}, "x");
  g.value(x).set_requires_grad(true);
  fill_uniform(g.value(x).values(), r);
  NodeId w = g.parameter({4, 4, 3, 3}, "w");  // stays zero
  NodeId f = g.conv2d(x, w, {.padding = 1});
  NodeId y = g.add(x, f);
  g.forward();
  for (int64_t i = 0; i < 64; ++i) CHECK(g.value(y).values()[i] == g.value(x).values()[i]);
  ArrayX<double> seed(64);
  fill_uniform(seed, r);
  g.backward_seeded(y, seed);
  for (int64_t i = 0; i < 64; ++i) CHECK(g.value(x).grad()[i] == seed[i]);
}

TEST_CASE("fan-out accumulates the sum of both path gradients") {
  auto r = testutil::rng(16);
  std::vector<double> xv(2 * 3 * 4 * 4), w1v(3 * 3 * 9), w2v(3 * 3 * 9), seedv(2 * 3 * 16);
  {
    ArrayX<double> tmp(static_cast<int64_t>(xv.size()));
    fill_uniform(tmp, r);
    for (size_t i = 0; i < xv.size(); ++i) xv[i] = tmp[static_cast<int64_t>(i)];
  }
  {
    ArrayX<double> tmp(static_cast<int64_t>(w1v.size()));
    fill_uniform(tmp, r);
    for (size_t i = 0; i < w1v.size(); ++i) w1v[i] = tmp[static_cast<int64_t>(i)];
    fill_uniform(tmp, r);
    for (size_t i = 0; i < w2v.size(); ++i) w2v[i] = tmp[static_cast<int64_t>(i)];
  }
  {
    ArrayX<double> tmp(static_cast<int64_t>(seedv.size()));
    fill_uniform(tmp, r);
    for (size_t i = 0; i < seedv.size(); ++i) seedv[i] = tmp[static_cast<int64_t>(i)];
  }

  auto build = [&](bool both) {
    Graph<double> g;
    NodeId x = g.input({2, 3, 4, 4}, "x");
    g.value(x).set_requires_grad(true);
    for (size_t i = 0; i < xv.size(); ++i) g.value(x).values()[static_cast<int64_t>(i)] = xv[i];
    NodeId w1 = g.parameter({3, 3, 3, 3}, "w1");
    NodeId w2 = g.parameter({3, 3, 3, 3}, "w2");
    for (size_t i = 0; i < w1v.size(); ++i) {
      g.value(w1).values()[static_cast<int64_t>(i)] = w1v[i];
      g.value(w2).values()[static_cast<int64_t>(i)] = both ? w2v[i] : 0.0;
    }
    NodeId y = g.add(g.conv2d(x, w1, {.padding = 1}), g.conv2d(x, w2, {.padding = 1}));
    g.forward();
    ArrayX<double> seed(static_cast<int64_t>(seedv.size()));
    for (size_t i = 0; i < seedv.size(); ++i) seed[static_cast<int64_t>(i)] = seedv[i];
    g.backward_seeded(y, seed);
    return g.value(x).grad();
  };

  // single-path duplication oracle: run each conv alone against the same seed
  auto grad_single = [&](const std::vector<double>& wv) {
    Graph<double> g;
    NodeId x = g.input({2, 3, 4, 4}, "x");
    g.value(x).set_requires_grad(true);
    for (size_t i = 0; i < xv.size(); ++i) g.value(x).values()[static_cast<int64_t>(i)] = xv[i];
    NodeId w = g.parameter({3, 3, 3, 3}, "w");
    for (size_t i = 0; i < wv.size(); ++i) g.value(w).values()[static_cast<int64_t>(i)] = wv[i];
    NodeId y = g.conv2d(x, w, {.padding = 1});
    g.forward();
    ArrayX<double> seed(static_cast<int64_t>(seedv.size()));
    for (size_t i = 0; i < seedv.size(); ++i) seed[static_cast<int64_t>(i)] = seedv[i];
    g.backward_seeded(y, seed);
    return g.value(x).grad();
  };

  ArrayX<double> got = build(true);
  ArrayX<double> want = grad_single(w1v) + grad_single(w2v);
  for (int64_t i = 0; i < got.size(); ++i)
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("maxpool tie routing is bitwise deterministic") {
  auto run = [] {
    Graph<double> g;
    NodeId x = g.input({1, 2, 4, 4}, "x");
    g.value(x).set_requires_grad(true);
    g.value(x).values().setConstant(1.5);
    NodeId y = g.maxpool(x, 2, 2);
    g.forward();
    g.backward_seeded(y, ArrayX<double>::Ones(g.value(y).numel()));
    return g.value(x).grad();
  };
  ArrayX<double> a = run();
  ArrayX<double> b = run();
  for (int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}
