#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "fishnet/graph.hpp"

// Gradient-flow analysis. A node enjoys "direct BP" when a path of
// gradient-transparent crossings connects it to the loss: the gradient
// arriving at the top of that path reaches the node additively, without
// being reshaped by any weight. Transparent crossings are the identity
// skips of residual adds, concat slices, max/avg pooling, nearest
// up-sampling and adjacent-channel summation. Convolutions, linear maps,
// batch norm, activations and channel gating are opaque: they scale or mix
// the gradient.
//
// Nodes tagged `task_head` (the classifier chain) form the root region:
// every network ends in some task mapping, so its crossings do not count
// against the backbone and its convolutions are never listed as isolated.
namespace fish {

enum class Verdict : uint8_t { blocked = 0, direct = 1 };

struct BPReport {
  std::vector<Verdict> verdict;        // per node
  std::vector<NodeId> witness_parent;  // next node toward the loss (direct nodes)
  std::vector<int> witness_len;        // edges on the witness path, -1 if blocked
  std::vector<NodeId> blocking_nodes;  // isolated convolutions, ascending ids

  bool is_direct(NodeId id) const {
    return verdict[static_cast<size_t>(id)] == Verdict::direct;
  }

  // Chain from `id` up to the loss (inclusive); empty when blocked.
  std::vector<NodeId> witness(NodeId id) const {
    std::vector<NodeId> path;
    if (!is_direct(id)) return path;
    for (NodeId cur = id; cur != kNoNode; cur = witness_parent[static_cast<size_t>(cur)])
      path.push_back(cur);
    return path;
  }
};

namespace detail {

// Crossing transparency: moving from node `n` backward into input slot `i`.
template <typename S>
bool transparent_crossing(const Graph<S>& /*g*/, const typename Graph<S>::Node& n,
                          size_t /*slot*/) {
  if (n.task_head) return true;  // root region
  switch (n.kind) {
    case OpKind::add:
    case OpKind::concat:
    case OpKind::maxpool:
    case OpKind::avgpool:
    case OpKind::global_avg_pool:
    case OpKind::upsample_nearest:
    case OpKind::channel_reduce:
      return true;
    default:
      return false;
  }
}

template <typename S>
std::vector<std::vector<NodeId>> consumers_of(const Graph<S>& g) {
  std::vector<std::vector<NodeId>> out(g.size());
  for (NodeId i = 0; i < static_cast<NodeId>(g.size()); ++i)
    for (NodeId in : g.node(i).inputs) out[static_cast<size_t>(in)].push_back(i);
  return out;
}

}  // namespace detail

// Edge-transparency labels, one entry per (node, input slot). Deterministic.
template <typename S>
std::vector<std::vector<bool>> classify_edges(const Graph<S>& g) {
  std::vector<std::vector<bool>> labels(g.size());
  for (NodeId i = 0; i < static_cast<NodeId>(g.size()); ++i) {
    const auto& n = g.node(i);
    labels[static_cast<size_t>(i)].resize(n.inputs.size());
    for (size_t s = 0; s < n.inputs.size(); ++s)
      labels[static_cast<size_t>(i)][s] = detail::transparent_crossing(g, n, s);
  }
  return labels;
}

// Reverse reachability over transparent crossings from the loss, plus the
// isolated-convolution listing. Pure function of the graph structure.
template <typename S>
BPReport analyze(const Graph<S>& g, NodeId loss) {
  if (g.value(loss).numel() != 1)
    throw ShapeError("analyze: loss node '" + g.node(loss).name + "' must be scalar");
  const size_t n = g.size();
  BPReport rep;
  rep.verdict.assign(n, Verdict::blocked);
  rep.witness_parent.assign(n, kNoNode);
  rep.witness_len.assign(n, -1);

  // Verdicts: BFS from the loss so witnesses are shortest paths; process in
  // a fixed order for determinism.
  std::deque<NodeId> queue;
  rep.verdict[static_cast<size_t>(loss)] = Verdict::direct;
  rep.witness_len[static_cast<size_t>(loss)] = 0;
  queue.push_back(loss);
  while (!queue.empty()) {
    const NodeId cur = queue.front();
    queue.pop_front();
    const auto& node = g.node(cur);
    for (size_t s = 0; s < node.inputs.size(); ++s) {
      if (!detail::transparent_crossing(g, node, s)) continue;
      const NodeId in = node.inputs[s];
      if (rep.verdict[static_cast<size_t>(in)] == Verdict::direct) continue;
      rep.verdict[static_cast<size_t>(in)] = Verdict::direct;
      rep.witness_parent[static_cast<size_t>(in)] = cur;
      rep.witness_len[static_cast<size_t>(in)] = rep.witness_len[static_cast<size_t>(cur)] + 1;
      queue.push_back(in);
    }
  }

  // Isolated convolutions: a conv (or linear) whose input's information flow
  // has no transparent route into the merge points its output first reaches.
  const auto consumers = detail::consumers_of(g);
  for (NodeId c = 0; c < static_cast<NodeId>(n); ++c) {
    const auto& cn = g.node(c);
    if (cn.kind != OpKind::conv2d && cn.kind != OpKind::linear) continue;
    if (cn.task_head) continue;

    // first add/concat merges reached forward from the conv output
    std::vector<bool> seen(n, false);
    std::vector<bool> merge(n, false);
    std::deque<NodeId> q{c};
    seen[static_cast<size_t>(c)] = true;
    bool any_merge = false;
    while (!q.empty()) {
      const NodeId u = q.front();
      q.pop_front();
      for (NodeId v : consumers[static_cast<size_t>(u)]) {
        if (seen[static_cast<size_t>(v)]) continue;
        seen[static_cast<size_t>(v)] = true;
        const OpKind k = g.node(v).kind;
        if (k == OpKind::add || k == OpKind::concat) {
          merge[static_cast<size_t>(v)] = true;
          any_merge = true;
          continue;  // stop at the first merge on this route
        }
        q.push_back(v);
      }
    }
    if (!any_merge) {
      rep.blocking_nodes.push_back(c);
      continue;
    }

    // ancestors (any edges) of the conv's feature operand
    std::vector<bool> anc(n, false);
    q.push_back(cn.inputs[0]);
    anc[static_cast<size_t>(cn.inputs[0])] = true;
    while (!q.empty()) {
      const NodeId u = q.front();
      q.pop_front();
      for (NodeId v : g.node(u).inputs)
        if (!anc[static_cast<size_t>(v)]) {
          anc[static_cast<size_t>(v)] = true;
          q.push_back(v);
        }
    }

    // transparent forward closure of the ancestor set, never through c
    std::vector<bool> reach(n, false);
    for (NodeId a = 0; a < static_cast<NodeId>(n); ++a)
      if (anc[static_cast<size_t>(a)]) {
        reach[static_cast<size_t>(a)] = true;
        q.push_back(a);
      }
    bool bypass = false;
    while (!q.empty() && !bypass) {
      const NodeId u = q.front();
      q.pop_front();
      for (NodeId v : consumers[static_cast<size_t>(u)]) {
        if (v == c || reach[static_cast<size_t>(v)]) continue;
        const auto& vn = g.node(v);
        bool via = false;
        for (size_t s = 0; s < vn.inputs.size(); ++s)
          if (vn.inputs[s] == u && detail::transparent_crossing(g, vn, s)) via = true;
        if (!via) continue;
        if (merge[static_cast<size_t>(v)]) {
          bypass = true;
          break;
        }
        reach[static_cast<size_t>(v)] = true;
        q.push_back(v);
      }
    }
    if (!bypass) rep.blocking_nodes.push_back(c);
  }
  return rep;
}

enum class WitnessCheck { verified, mismatch, no_witness };

// Numerical confirmation of a witness. All backbone (non-task-head) conv and
// linear weights are zeroed, which silences every gradient route except the
// transparent ones; the engine's backward is then compared against an
// independent re-implementation of the transparent adjoints (argmax
// re-derived from forward values, concat slicing, channel replication, 2x2
// summation, mean spreading) seeded with the gradient that arrives at the
// witness path head. Parameters and running stats are restored afterwards.
template <typename S>
WitnessCheck verify_direct_bp_numerical(Graph<S>& g, const BPReport& rep, NodeId target,
                                        NodeId loss, S tol = S(1e-12)) {
  if (!rep.is_direct(target)) return WitnessCheck::no_witness;
  const std::vector<NodeId> path = rep.witness(target);

  // path head: topmost node before the task-head region (the loss itself
  // when no task head is tagged)
  NodeId head = path.back();
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    if (!g.node(*it).task_head) {
      head = *it;
      break;
    }
  }
  if (head == target) return WitnessCheck::verified;

  // Eval mode keeps running statistics untouched while probing; parameter
  // values are snapshotted and restored below.
  const auto saved_mode = g.mode;
  g.mode = Graph<S>::Mode::eval;
  std::vector<std::pair<NodeId, ArrayX<S>>> saved;
  for (NodeId p : g.state_params()) saved.emplace_back(p, g.value(p).values());
  for (NodeId i = 0; i < static_cast<NodeId>(g.size()); ++i) {
    const auto& node = g.node(i);
    if ((node.kind == OpKind::conv2d || node.kind == OpKind::linear) && !node.task_head)
      g.value(node.inputs[1]).values().setZero();
  }

  g.forward();
  g.backward(loss);

  // independent transparent-adjoint flow, seeded at the path head
  const size_t n = g.size();
  std::vector<ArrayX<S>> flow(n);
  auto ensure = [&](NodeId id) {
    if (flow[static_cast<size_t>(id)].size() == 0)
      flow[static_cast<size_t>(id)] = ArrayX<S>::Zero(g.value(id).numel());
  };
  ensure(head);
  flow[static_cast<size_t>(head)] = g.value(head).grad();
  bool mismatch = false;
  for (NodeId u = head; u >= 0; --u) {
    if (flow[static_cast<size_t>(u)].size() == 0) continue;
    const auto& un = g.node(u);
    const ArrayX<S>& f = flow[static_cast<size_t>(u)];
    if (un.task_head) continue;
    switch (un.kind) {
      case OpKind::add:
        for (NodeId in : un.inputs) {
          ensure(in);
          flow[static_cast<size_t>(in)] += f;
        }
        break;
      case OpKind::concat: {
        const auto& out = g.value(u);
        const int64_t hw = out.dim(2) * out.dim(3);
        int64_t coff = 0;
        for (NodeId in : un.inputs) {
          ensure(in);
          const int64_t C = g.value(in).dim(1);
          for (int64_t b = 0; b < out.dim(0); ++b)
            for (int64_t ch = 0; ch < C; ++ch)
              for (int64_t i = 0; i < hw; ++i)
                flow[static_cast<size_t>(in)][(b * C + ch) * hw + i] +=
                    f[(b * out.dim(1) + coff + ch) * hw + i];
          coff += C;
        }
        break;
      }
      case OpKind::channel_reduce: {
        const NodeId in = un.inputs[0];
        ensure(in);
        const auto& xt = g.value(in);
        const int64_t hw = xt.dim(2) * xt.dim(3), cin = xt.dim(1);
        const int64_t cout = g.value(u).dim(1);
        for (int64_t b = 0; b < xt.dim(0); ++b)
          for (int64_t ch = 0; ch < cin; ++ch)
            for (int64_t i = 0; i < hw; ++i)
              flow[static_cast<size_t>(in)][(b * cin + ch) * hw + i] +=
                  f[(b * cout + ch / un.attrs.k) * hw + i];
        break;
      }
      case OpKind::upsample_nearest: {
        const NodeId in = un.inputs[0];
        ensure(in);
        const auto& xt = g.value(in);
        const auto& out = g.value(u);
        for (int64_t b = 0; b < xt.dim(0); ++b)
          for (int64_t ch = 0; ch < xt.dim(1); ++ch)
            for (int64_t h = 0; h < xt.dim(2); ++h)
              for (int64_t w = 0; w < xt.dim(3); ++w)
                flow[static_cast<size_t>(in)][xt.offset(b, ch, h, w)] +=
                    f[out.offset(b, ch, 2 * h, 2 * w)] +
                    f[out.offset(b, ch, 2 * h, 2 * w + 1)] +
                    f[out.offset(b, ch, 2 * h + 1, 2 * w)] +
                    f[out.offset(b, ch, 2 * h + 1, 2 * w + 1)];
        break;
      }
      case OpKind::maxpool: {
        const NodeId in = un.inputs[0];
        ensure(in);
        const auto& xt = g.value(in);
        const auto& out = g.value(u);
        const int64_t K = un.attrs.kernel, pad = un.attrs.padding;
        int64_t o = 0;
        for (int64_t b = 0; b < out.dim(0); ++b)
          for (int64_t ch = 0; ch < out.dim(1); ++ch)
            for (int64_t oh = 0; oh < out.dim(2); ++oh)
              for (int64_t ow = 0; ow < out.dim(3); ++ow, ++o) {
                int64_t best = -1;
                S bv = S(0);
                for (int64_t ki = 0; ki < K; ++ki)
                  for (int64_t kj = 0; kj < K; ++kj) {
                    const int64_t ih = oh * 2 - pad + ki, iw = ow * 2 - pad + kj;
                    if (ih < 0 || ih >= xt.dim(2) || iw < 0 || iw >= xt.dim(3)) continue;
                    const int64_t idx = xt.offset(b, ch, ih, iw);
                    if (best < 0 || xt.values()[idx] > bv) {
                      best = idx;
                      bv = xt.values()[idx];
                    }
                  }
                flow[static_cast<size_t>(in)][best] += f[o];
              }
        break;
      }
      case OpKind::avgpool: {
        const NodeId in = un.inputs[0];
        ensure(in);
        const auto& xt = g.value(in);
        const auto& out = g.value(u);
        int64_t o = 0;
        for (int64_t b = 0; b < out.dim(0); ++b)
          for (int64_t ch = 0; ch < out.dim(1); ++ch)
            for (int64_t oh = 0; oh < out.dim(2); ++oh)
              for (int64_t ow = 0; ow < out.dim(3); ++ow, ++o) {
                const S q = f[o] / S(4);
                flow[static_cast<size_t>(in)][xt.offset(b, ch, 2 * oh, 2 * ow)] += q;
                flow[static_cast<size_t>(in)][xt.offset(b, ch, 2 * oh, 2 * ow + 1)] += q;
                flow[static_cast<size_t>(in)][xt.offset(b, ch, 2 * oh + 1, 2 * ow)] += q;
                flow[static_cast<size_t>(in)][xt.offset(b, ch, 2 * oh + 1, 2 * ow + 1)] += q;
              }
        break;
      }
      case OpKind::global_avg_pool: {
        const NodeId in = un.inputs[0];
        ensure(in);
        const auto& xt = g.value(in);
        const int64_t hw = xt.dim(2) * xt.dim(3);
        for (int64_t b = 0; b < xt.dim(0); ++b)
          for (int64_t ch = 0; ch < xt.dim(1); ++ch) {
            const S q = f[b * xt.dim(1) + ch] / S(hw);
            for (int64_t i = 0; i < hw; ++i)
              flow[static_cast<size_t>(in)][(b * xt.dim(1) + ch) * hw + i] += q;
          }
        break;
      }
      default:
        break;  // opaque: transmits nothing once backbone weights are zero
    }
  }

  const Tensor<S>& tt = g.value(target);
  const ArrayX<S> engine =
      tt.has_grad() ? tt.grad() : ArrayX<S>(ArrayX<S>::Zero(tt.numel()));
  const ArrayX<S>& routed = flow[static_cast<size_t>(target)];
  if (routed.size() != engine.size()) {
    mismatch = true;
  } else {
    const S scale = std::max(S(1), engine.abs().maxCoeff());
    mismatch = ((engine - routed).abs() > tol * scale).any();
  }

  for (auto& [p, vals] : saved) g.value(p).values() = vals;
  g.mode = saved_mode;
  g.forward();
  return mismatch ? WitnessCheck::mismatch : WitnessCheck::verified;
}

}  // namespace fish
