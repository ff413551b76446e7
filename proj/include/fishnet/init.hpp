#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "fishnet/graph.hpp"

namespace fish {

// He fan-in initialization for conv/linear weights, in construction order so
// a fixed seed reproduces the same network bit for bit. BN affines keep
// their construction defaults (gamma 1, beta 0). The classifier conv is
// zero-initialized, which pins the initial loss of a K-class model at ln K.
template <typename S>
void init_parameters(Graph<S>& g, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (NodeId i = 0; i < static_cast<NodeId>(g.size()); ++i) {
    const auto& n = g.node(i);
    if (n.kind != OpKind::conv2d && n.kind != OpKind::linear) continue;
    Tensor<S>& w = g.value(n.inputs[1]);
    if (n.task_head) {
      w.values().setZero();
      continue;
    }
    const auto& ws = w.shape();
    const int64_t fan_in = n.kind == OpKind::conv2d ? ws[1] * ws[2] * ws[3] : ws[1];
    const double stdev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (int64_t j = 0; j < w.numel(); ++j)
      w.values()[j] = static_cast<S>(normal(rng) * stdev);
  }
}

}  // namespace fish
