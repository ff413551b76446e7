#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "fishnet/config.hpp"
#include "fishnet/graph.hpp"

namespace fish {

// Entry feature node per stage for each of the three parts (index s-1).
// tail[s], body[s] and head[s] share one spatial resolution for equal s.
struct StageFeatures {
  std::vector<NodeId> tail;
  std::vector<NodeId> body;
  std::vector<NodeId> head;
};

template <typename S>
struct BuildResult {
  Graph<S> graph;
  StageFeatures stages;
  NodeId input = kNoNode;
  NodeId labels = kNoNode;
  NodeId final_feature = kNoNode;  // last feature before the classifier
  NodeId logits = kNoNode;
  NodeId loss = kNoNode;
};

namespace detail {

template <typename S>
class NetBuilder {
public:
  NetBuilder(const FishNetConfig& cfg, int64_t batch) : cfg_(cfg), batch_(batch) {}

  BuildResult<S> build() {
    cfg_.validate();
    switch (cfg_.arch) {
      case Arch::fishnet: build_fishnet(); break;
      case Arch::resnet_control: build_control(); break;
      case Arch::plain: build_plain(); break;
    }
    r_.graph = std::move(g_);
    return std::move(r_);
  }

private:
  FishNetConfig cfg_;
  int64_t batch_;
  Graph<S> g_;
  BuildResult<S> r_;
  Part part_ = Part::other;
  bool task_head_ = false;

  int64_t channels(NodeId x) const { return g_.value(x).dim(1); }
  int64_t stage_channels(int64_t s) const {
    return cfg_.channels_per_stage[static_cast<size_t>(s - 1)];
  }

  NodeId stamp(NodeId id) {
    g_.node(id).part = part_;
    g_.node(id).task_head = task_head_;
    return id;
  }

  NodeId param(Shape shape, const std::string& name, bool trainable = true) {
    return stamp(g_.parameter(std::move(shape), name, trainable));
  }

  NodeId conv(NodeId x, int64_t cout, int64_t kernel, int64_t stride, int64_t pad,
              int64_t dil, int64_t grp, const std::string& name) {
    NodeId w = param({cout, channels(x) / grp, kernel, kernel}, name + ".w");
    return stamp(g_.conv2d(
        x, w, {.stride = stride, .padding = pad, .dilation = dil, .groups = grp}, name));
  }

  NodeId bn(NodeId x, const std::string& prefix) {
    const int64_t c = channels(x);
    NodeId gamma = param({c}, prefix + ".gamma");
    NodeId beta = param({c}, prefix + ".beta");
    NodeId rmean = param({c}, prefix + ".rmean", false);
    NodeId rvar = param({c}, prefix + ".rvar", false);
    g_.value(gamma).values().setConstant(S(1));
    g_.value(rvar).values().setConstant(S(1));
    return stamp(g_.batchnorm(x, gamma, beta, rmean, rvar, prefix + ".bn"));
  }

  NodeId bn_relu(NodeId x, const std::string& prefix) {
    return stamp(g_.relu(bn(x, prefix), prefix + ".relu"));
  }

  // Conv group count for a grouped 3x3 of the given width at a stage; the
  // per-group channel width doubles with the stage index.
  int64_t conv_groups(int64_t width, int64_t stage) const {
    const int64_t gw = stage == 0 ? 0 : group_width_at_stage(cfg_, stage);
    if (gw == 0 || gw >= width) return 1;
    if (width % gw != 0)
      throw ConfigError("stage " + std::to_string(stage) + ": bottleneck width " +
                            std::to_string(width) + " not divisible by group width " +
                            std::to_string(gw),
                        static_cast<int>(stage));
    return width / gw;
  }

  // Pre-activation bottleneck branch: BN-ReLU-1x1 -> BN-ReLU-3x3 -> BN-ReLU-1x1
  // with bottleneck width cout/4. Returns the branch output (no skip).
  NodeId residual_branch(NodeId x, int64_t cout, int64_t stride, int64_t dil,
                         int64_t stage, const std::string& prefix) {
    const int64_t width = cout / 4;
    const int64_t grp = conv_groups(width, stage);
    NodeId h = bn_relu(x, prefix + ".1");
    h = conv(h, width, 1, 1, 0, 1, 1, prefix + ".conv1");
    h = bn_relu(h, prefix + ".2");
    h = conv(h, width, 3, stride, dil, dil, grp, prefix + ".conv2");
    h = bn_relu(h, prefix + ".3");
    h = conv(h, cout, 1, 1, 0, 1, 1, prefix + ".conv3");
    return h;
  }

  // Residual block with identity mapping. A 1x1 projection is placed on the
  // skip only when in/out channels or stride differ, which `allow_proj`
  // restricts to the tail/stem; body and head blocks must be shape-preserving.
  NodeId residual_block(NodeId x, int64_t cout, int64_t stride, int64_t dil,
                        int64_t stage, bool allow_proj, const std::string& prefix) {
    const int64_t cin = channels(x);
    NodeId skip = x;
    if (cin != cout || stride != 1) {
      if (!allow_proj)
        throw ConfigError("block '" + prefix + "' at stage " + std::to_string(stage) +
                              ": channel change " + std::to_string(cin) + " -> " +
                              std::to_string(cout) +
                              " outside the tail would create an isolated convolution",
                          static_cast<int>(stage));
      skip = conv(x, cout, 1, stride, 0, 1, 1, prefix + ".proj");
    }
    NodeId f = residual_branch(x, cout, stride, dil, stage, prefix + ".f");
    return stamp(g_.add(skip, f, prefix + ".add"));
  }

  // Channel-preserving transfer block (horizontal arrows between parts).
  NodeId transfer(NodeId x, int64_t stage, const std::string& prefix) {
    return residual_block(x, channels(x), 1, 1, stage, false, prefix);
  }

  // One down-sampling step per the configured variant. `cout` differs from
  // the input width only for the conv2 variant in the tail, which then also
  // carries the channel change.
  NodeId downsample(NodeId x, int64_t cout, const std::string& prefix) {
    switch (cfg_.downsample) {
      case Downsample::max2: return stamp(g_.maxpool(x, 2, 2, 0, prefix));
      case Downsample::max3: return stamp(g_.maxpool(x, 3, 2, 1, prefix));
      case Downsample::avg2: return stamp(g_.avgpool(x, 2, 2, prefix));
      case Downsample::conv2: {
        NodeId y = conv(x, cout, 2, 2, 0, 1, 1, prefix + ".conv");
        return bn_relu(y, prefix);
      }
    }
    return kNoNode;
  }

  NodeId make_input() {
    part_ = Part::data;
    r_.input = stamp(g_.input({batch_, cfg_.in_channels, cfg_.in_height, cfg_.in_width},
                              "input"));
    r_.labels = stamp(g_.input({batch_}, "labels"));
    return r_.input;
  }

  // Stem plus the pool that enters stage 1.
  NodeId make_stem(NodeId x) {
    part_ = Part::stem;
    const int64_t c1 = stage_channels(1);
    NodeId y;
    if (cfg_.stem == Stem::conv7x7_s2) {
      y = conv(x, c1, 7, 2, 3, 1, 1, "stem.conv");
    } else {
      y = residual_block(x, c1, 2, 1, 0, true, "stem.b0");
      y = residual_block(y, c1, 1, 1, 0, false, "stem.b1");
    }
    return stamp(g_.maxpool(y, 2, 2, 0, "stem.pool"));
  }

  void make_classifier(NodeId feature) {
    part_ = Part::classifier;
    task_head_ = true;
    NodeId h = bn_relu(feature, "classifier");
    h = conv(h, cfg_.num_classes, 1, 1, 0, 1, 1, "classifier.conv");
    r_.logits = stamp(g_.global_avg_pool(h, "classifier.gap"));
    r_.loss = stamp(g_.softmax_xent(r_.logits, r_.labels, "loss"));
    task_head_ = false;
  }

  void mark_must_direct() {
    for (const auto& list : {r_.stages.tail, r_.stages.body, r_.stages.head})
      for (NodeId id : list)
        if (id != kNoNode) g_.must_direct.push_back(id);
  }

  void build_fishnet() {
    const int64_t S_ = cfg_.num_stages;
    const DerivedChannels dc = derive_channels(cfg_);
    r_.stages.tail.assign(static_cast<size_t>(S_), kNoNode);
    r_.stages.body.assign(static_cast<size_t>(S_), kNoNode);
    r_.stages.head.assign(static_cast<size_t>(S_), kNoNode);

    NodeId cur = make_stem(make_input());

    // tail: per-stage blocks; the last block of a stage projects to the next
    // stage's width unless the conv2 down-sampler carries the change
    part_ = Part::tail;
    for (int64_t s = 1; s <= S_; ++s) {
      r_.stages.tail[static_cast<size_t>(s - 1)] = cur;
      const int64_t blocks = cfg_.tail_blocks[static_cast<size_t>(s - 1)];
      for (int64_t i = 0; i < blocks; ++i) {
        const bool last = i == blocks - 1;
        int64_t cout = stage_channels(s);
        if (last && s < S_ && cfg_.downsample != Downsample::conv2)
          cout = stage_channels(s + 1);
        cur = residual_block(cur, cout, 1, 1, s, true,
                             "tail.s" + std::to_string(s) + ".b" + std::to_string(i));
      }
      if (s < S_)
        cur = downsample(cur, stage_channels(s + 1), "tail.s" + std::to_string(s) + ".down");
    }
    NodeId tail_out = cur;
    NodeId pooled = stamp(g_.global_avg_pool(tail_out, "tail.gap"));

    // bridge: squeeze-excitation gate from the 1x1 feature modulates the
    // refinement branch; the identity skip keeps the bridge free of
    // isolated convolutions
    part_ = Part::body;
    const int64_t cS = stage_channels(S_);
    const int64_t squeeze = std::max<int64_t>(cS / 16, 1);
    NodeId gate = conv(pooled, squeeze, 1, 1, 0, 1, 1, "body.bridge.fc1");
    gate = stamp(g_.relu(gate, "body.bridge.relu"));
    gate = conv(gate, cS, 1, 1, 0, 1, 1, "body.bridge.fc2");
    gate = stamp(g_.sigmoid(gate, "body.bridge.gate"));
    NodeId gated = stamp(g_.scale_channels(tail_out, gate, "body.bridge.scale"));
    NodeId bf = residual_branch(gated, cS, 1, 1, S_, "body.bridge.m");
    cur = stamp(g_.add(tail_out, bf, "body.bridge.add"));
    r_.stages.body[static_cast<size_t>(S_ - 1)] = cur;

    // body: UR blocks from the top stage down to stage 2
    for (int64_t s = S_; s >= 2; --s) {
      const std::string ur = "body.ur" + std::to_string(s);
      const int64_t pre = cfg_.body_blocks[static_cast<size_t>(s - 1)] - 1;
      for (int64_t i = 0; i < pre; ++i)
        cur = residual_block(cur, channels(cur), 1, cfg_.body_dilation, s, false,
                             "body.s" + std::to_string(s) + ".pre" + std::to_string(i));
      NodeId t = transfer(r_.stages.tail[static_cast<size_t>(s - 1)], s, ur + ".t");
      NodeId cat = stamp(g_.concat({cur, t}, ur + ".concat"));
      const int64_t k = cfg_.reduction_k[static_cast<size_t>(s - 1)];
      NodeId red = stamp(g_.channel_reduce(cat, k, ur + ".reduce"));
      NodeId m = residual_branch(cat, channels(cat) / k, 1, cfg_.body_dilation, s, ur + ".m");
      NodeId sum = stamp(g_.add(red, m, ur + ".add"));
      cur = stamp(g_.upsample_nearest(sum, ur + ".up"));
      r_.stages.body[static_cast<size_t>(s - 2)] = cur;
    }
    for (int64_t i = 0; i < cfg_.body_blocks[0]; ++i)
      cur = residual_block(cur, channels(cur), 1, cfg_.body_dilation, 1, false,
                           "body.s1.pre" + std::to_string(i));

    // head: DR blocks from stage 1 back up; the first DR concatenates the
    // tail's stage-1 feature, later ones the body features
    part_ = Part::head;
    r_.stages.head[0] = cur;
    for (int64_t s = 1; s <= S_ - 1; ++s) {
      const std::string dr = "head.dr" + std::to_string(s);
      const int64_t pre = cfg_.head_blocks[static_cast<size_t>(s - 1)] - 1;
      for (int64_t i = 0; i < pre; ++i)
        cur = residual_block(cur, channels(cur), 1, 1, s, false,
                             "head.s" + std::to_string(s) + ".pre" + std::to_string(i));
      NodeId lateral = (s == 1)
                           ? transfer(r_.stages.tail[0], 1, dr + ".t")
                           : transfer(r_.stages.body[static_cast<size_t>(s - 1)], s, dr + ".t");
      NodeId cat = stamp(g_.concat({cur, lateral}, dr + ".concat"));
      NodeId m = residual_branch(cat, channels(cat), 1, 1, s, dr + ".m");
      NodeId sum = stamp(g_.add(cat, m, dr + ".add"));
      cur = downsample(sum, channels(sum), dr + ".down");
      r_.stages.head[static_cast<size_t>(s)] = cur;
    }
    const int64_t last_blocks = cfg_.head_blocks[static_cast<size_t>(S_ - 1)];
    for (int64_t i = 0; i < last_blocks; ++i)
      cur = residual_block(cur, channels(cur), 1, 1, S_, false,
                           "head.s" + std::to_string(S_) + ".b" + std::to_string(i));
    r_.final_feature = cur;
    (void)dc;

    make_classifier(cur);
    mark_must_direct();
  }

  // Plain chain-of-stages network with Eq.(3)-style strided 1x1 transition
  // convs between stages; the analyzer's negative control.
  void build_control() {
    const int64_t S_ = cfg_.num_stages;
    r_.stages.tail.assign(static_cast<size_t>(S_), kNoNode);
    NodeId cur = make_stem(make_input());
    part_ = Part::tail;
    for (int64_t s = 1; s <= S_; ++s) {
      r_.stages.tail[static_cast<size_t>(s - 1)] = cur;
      for (int64_t i = 0; i < cfg_.tail_blocks[static_cast<size_t>(s - 1)]; ++i)
        cur = residual_block(cur, stage_channels(s), 1, 1, s, false,
                             "control.s" + std::to_string(s) + ".b" + std::to_string(i));
      if (s < S_) {
        const std::string tr = "control.trans" + std::to_string(s);
        cur = conv(cur, stage_channels(s + 1), 1, 2, 0, 1, 1, tr + ".conv");
        cur = bn_relu(cur, tr);
      }
    }
    r_.final_feature = cur;
    make_classifier(cur);
    mark_must_direct();
  }

  // Skip-free conv-BN-ReLU pile with the same pooling ladder; used as the
  // equal-budget training baseline.
  void build_plain() {
    if (cfg_.stem != Stem::conv7x7_s2)
      throw ConfigError("plain arch requires stem = conv7x7_s2");
    const int64_t S_ = cfg_.num_stages;
    r_.stages.tail.assign(static_cast<size_t>(S_), kNoNode);
    NodeId cur = make_input();
    part_ = Part::stem;
    cur = conv(cur, stage_channels(1), 7, 2, 3, 1, 1, "stem.conv");
    cur = stamp(g_.maxpool(cur, 2, 2, 0, "stem.pool"));
    part_ = Part::tail;
    for (int64_t s = 1; s <= S_; ++s) {
      r_.stages.tail[static_cast<size_t>(s - 1)] = cur;
      for (int64_t i = 0; i < cfg_.tail_blocks[static_cast<size_t>(s - 1)]; ++i) {
        const std::string b = "plain.s" + std::to_string(s) + ".b" + std::to_string(i);
        cur = conv(cur, stage_channels(s), 3, 1, 1, 1, 1, b + ".conv");
        cur = bn_relu(cur, b);
      }
      if (s < S_) cur = stamp(g_.maxpool(cur, 2, 2, 0, "plain.s" + std::to_string(s) + ".down"));
    }
    r_.final_feature = cur;
    make_classifier(cur);
    mark_must_direct();
  }
};

}  // namespace detail

// Translate a validated config into a computational graph for the given
// batch size. Pure: no global state, independent outputs per call.
template <typename S>
BuildResult<S> build_network(const FishNetConfig& cfg, int64_t batch) {
  if (batch < 1) throw ConfigError("batch size must be >= 1");
  return detail::NetBuilder<S>(cfg, batch).build();
}

}  // namespace fish
