#pragma once

#include <iomanip>
#include <sstream>
#include <string>

#include "fishnet/graph.hpp"

namespace fish {

// Trainable parameter elements. Running statistics are buffers, not
// parameters, and are excluded.
template <typename S>
int64_t count_params(const Graph<S>& g) {
  int64_t total = 0;
  for (NodeId i = 0; i < static_cast<NodeId>(g.size()); ++i) {
    const auto& n = g.node(i);
    if (n.kind == OpKind::parameter && n.trainable) total += n.output.numel();
  }
  return total;
}

// Multiply-add FLOPs, batch dimension excluded:
//   conv:   2 * kh * kw * (Cin/groups) * Cout * H' * W'
//   linear: 2 * in * out
// BN, activations, pooling, up-sampling and reshuffling ops count as zero.
template <typename S>
int64_t count_flops(const Graph<S>& g) {
  int64_t total = 0;
  for (NodeId i = 0; i < static_cast<NodeId>(g.size()); ++i) {
    const auto& n = g.node(i);
    if (n.kind == OpKind::conv2d) {
      const auto& w = g.value(n.inputs[1]);
      total += 2 * w.dim(2) * w.dim(3) * w.dim(1) * w.dim(0) * n.output.dim(2) *
               n.output.dim(3);
    } else if (n.kind == OpKind::linear) {
      const auto& w = g.value(n.inputs[1]);
      total += 2 * w.dim(0) * w.dim(1);
    }
  }
  return total;
}

// Parameters attributed to the op that consumes them (conv weight on the
// conv row, BN affine on the BN row).
template <typename S>
int64_t own_params(const Graph<S>& g, NodeId id) {
  const auto& n = g.node(id);
  if (n.kind == OpKind::conv2d || n.kind == OpKind::linear)
    return g.value(n.inputs[1]).numel();
  if (n.kind == OpKind::batchnorm)
    return g.value(n.inputs[1]).numel() + g.value(n.inputs[2]).numel();
  return 0;
}

template <typename S>
std::string layer_table(const Graph<S>& g, char sep = '\0') {
  std::ostringstream os;
  const bool tsv = sep == '\t';
  if (!tsv)
    os << std::left << std::setw(5) << "id" << std::setw(34) << "name" << std::setw(18)
       << "kind" << std::setw(20) << "output" << "params\n";
  for (NodeId i = 0; i < static_cast<NodeId>(g.size()); ++i) {
    const auto& n = g.node(i);
    if (n.kind == OpKind::parameter || n.kind == OpKind::input) continue;
    if (tsv) {
      os << i << '\t' << n.name << '\t' << op_kind_name(n.kind) << '\t'
         << shape_str(n.output.shape()) << '\t' << own_params(g, i) << '\n';
    } else {
      os << std::left << std::setw(5) << i << std::setw(34) << n.name << std::setw(18)
         << op_kind_name(n.kind) << std::setw(20) << shape_str(n.output.shape())
         << own_params(g, i) << '\n';
    }
  }
  if (!tsv) os << "total trainable params: " << count_params(g) << '\n';
  return os.str();
}

}  // namespace fish
