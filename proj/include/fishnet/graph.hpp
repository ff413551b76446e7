#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fishnet/errors.hpp"
#include "fishnet/kernels/conv2d.hpp"
#include "fishnet/kernels/kernels.hpp"
#include "fishnet/tensor.hpp"

namespace fish {

using NodeId = int32_t;
inline constexpr NodeId kNoNode = -1;

enum class OpKind {
  input,
  parameter,
  conv2d,
  maxpool,
  avgpool,
  upsample_nearest,
  concat,
  channel_reduce,
  add,
  relu,
  sigmoid,
  batchnorm,
  scale_channels,
  linear,
  global_avg_pool,
  softmax_xent,
};

inline const char* op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::input: return "input";
    case OpKind::parameter: return "parameter";
    case OpKind::conv2d: return "conv2d";
    case OpKind::maxpool: return "maxpool";
    case OpKind::avgpool: return "avgpool";
    case OpKind::upsample_nearest: return "upsample_nearest";
    case OpKind::concat: return "concat";
    case OpKind::channel_reduce: return "channel_reduce";
    case OpKind::add: return "add";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::batchnorm: return "batchnorm";
    case OpKind::scale_channels: return "scale_channels";
    case OpKind::linear: return "linear";
    case OpKind::global_avg_pool: return "global_avg_pool";
    case OpKind::softmax_xent: return "softmax_xent";
  }
  return "?";
}

// Which section of a built network a node belongs to. `classifier` nodes form
// the task head; the analyzer treats them as its root region.
enum class Part { data, stem, tail, body, head, classifier, other };

inline const char* part_name(Part p) {
  switch (p) {
    case Part::data: return "data";
    case Part::stem: return "stem";
    case Part::tail: return "tail";
    case Part::body: return "body";
    case Part::head: return "head";
    case Part::classifier: return "classifier";
    case Part::other: return "other";
  }
  return "?";
}

struct OpAttrs {
  int64_t stride = 1;
  int64_t padding = 0;
  int64_t dilation = 1;
  int64_t groups = 1;
  int64_t k = 1;       // channel_reduce factor
  int64_t kernel = 0;  // pooling kernel
  int64_t axis = 1;    // concat axis (channels only)
};

// A graph of typed operations in topological (construction) order. The same
// structure serves as the reverse-mode tape and as the analyzer's subject.
// One graph instance is single-owner: construction, forward and backward must
// not run concurrently on it. Reads are safe once construction completes.
template <typename S>
class Graph {
public:
  enum class Mode { train, eval };

  struct Node {
    OpKind kind;
    std::string name;
    Part part = Part::other;
    bool task_head = false;
    bool trainable = false;  // parameter nodes only; false for buffers
    std::vector<NodeId> inputs;
    OpAttrs attrs;
    Tensor<S> output;
    // per-op forward state consumed by backward
    std::vector<int64_t> argmax;
    ops::BnScratch<S> bn;
    ArrayX<S> probs;
  };

  Mode mode = Mode::train;
  S bn_eps = S(1e-5);
  S bn_momentum = S(0.1);

  // Stage-entry features the builder wants verified as `direct`.
  std::vector<NodeId> must_direct;

  size_t size() const { return nodes_.size(); }
  Node& node(NodeId id) { return nodes_[static_cast<size_t>(id)]; }
  const Node& node(NodeId id) const { return nodes_[static_cast<size_t>(id)]; }
  Tensor<S>& value(NodeId id) { return nodes_[static_cast<size_t>(id)].output; }
  const Tensor<S>& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].output; }

  NodeId find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? kNoNode : it->second;
  }

  std::vector<NodeId> trainable_params() const {
    std::vector<NodeId> out;
    for (NodeId i = 0; i < static_cast<NodeId>(nodes_.size()); ++i)
      if (nodes_[static_cast<size_t>(i)].kind == OpKind::parameter &&
          nodes_[static_cast<size_t>(i)].trainable)
        out.push_back(i);
    return out;
  }

  // Trainable parameters plus buffers (running stats); everything that a
  // checkpoint must carry to reproduce forward outputs.
  std::vector<NodeId> state_params() const {
    std::vector<NodeId> out;
    for (NodeId i = 0; i < static_cast<NodeId>(nodes_.size()); ++i)
      if (nodes_[static_cast<size_t>(i)].kind == OpKind::parameter) out.push_back(i);
    return out;
  }

  NodeId input(Shape shape, const std::string& name) {
    Node n = make_node(OpKind::input, name);
    n.output = Tensor<S>(std::move(shape));
    return push(std::move(n));
  }

  NodeId parameter(Shape shape, const std::string& name, bool trainable = true) {
    if (name.empty()) throw ShapeError("parameter nodes must be named");
    Node n = make_node(OpKind::parameter, name);
    n.trainable = trainable;
    n.output = Tensor<S>(std::move(shape), trainable);
    return push(std::move(n));
  }

  NodeId conv2d(NodeId x, NodeId w, const ops::ConvAttrs& a, std::string name = "") {
    Node n = make_node(OpKind::conv2d, name);
    const auto& xt = check_4d(x, n.name);
    const auto& wt = check_4d(w, n.name);
    if (a.stride < 1 || a.dilation < 1 || a.padding < 0 || a.groups < 1)
      throw ShapeError(msg(n) + ": bad attrs (stride " + std::to_string(a.stride) +
                       ", padding " + std::to_string(a.padding) + ", dilation " +
                       std::to_string(a.dilation) + ", groups " + std::to_string(a.groups) +
                       ")");
    const int64_t cin = xt.dim(1), cout = wt.dim(0);
    if (cin % a.groups != 0 || cout % a.groups != 0)
      throw ShapeError(msg(n) + ": groups " + std::to_string(a.groups) +
                       " must divide both channel counts (in " + std::to_string(cin) +
                       ", out " + std::to_string(cout) + ")");
    if (wt.dim(1) != cin / a.groups)
      throw ShapeError(msg(n) + ": weight expects " +
                       std::to_string(wt.dim(1) * a.groups) + " input channels, got " +
                       std::to_string(cin) + " (input " + shape_str(xt.shape()) +
                       ", weight " + shape_str(wt.shape()) + ")");
    const int64_t ho = ops::conv_out_dim(xt.dim(2), wt.dim(2), a.stride, a.padding, a.dilation);
    const int64_t wo = ops::conv_out_dim(xt.dim(3), wt.dim(3), a.stride, a.padding, a.dilation);
    if (ho < 1 || wo < 1)
      throw ShapeError(msg(n) + ": output dims (" + std::to_string(ho) + "," +
                       std::to_string(wo) + ") < 1 for input " + shape_str(xt.shape()));
    n.inputs = {x, w};
    n.attrs.stride = a.stride;
    n.attrs.padding = a.padding;
    n.attrs.dilation = a.dilation;
    n.attrs.groups = a.groups;
    n.output = Tensor<S>({xt.dim(0), cout, ho, wo});
    return push(std::move(n));
  }

  NodeId maxpool(NodeId x, int64_t kernel, int64_t stride, int64_t padding = 0,
                 std::string name = "") {
    Node n = make_node(OpKind::maxpool, name);
    const auto& xt = check_4d(x, n.name);
    if (kernel != 2 && kernel != 3)
      throw ShapeError(msg(n) + ": kernel must be 2 or 3, got " + std::to_string(kernel));
    if (stride != 2)
      throw ShapeError(msg(n) + ": stride must be 2, got " + std::to_string(stride));
    if (padding < 0 || padding >= kernel)
      throw ShapeError(msg(n) + ": bad padding " + std::to_string(padding));
    if (xt.dim(2) + 2 * padding < kernel || xt.dim(3) + 2 * padding < kernel)
      throw ShapeError(msg(n) + ": spatial dims " + shape_str(xt.shape()) +
                       " smaller than kernel " + std::to_string(kernel));
    n.inputs = {x};
    n.attrs.kernel = kernel;
    n.attrs.stride = stride;
    n.attrs.padding = padding;
    n.output = Tensor<S>({xt.dim(0), xt.dim(1),
                          ops::pool_out_dim(xt.dim(2), kernel, stride, padding),
                          ops::pool_out_dim(xt.dim(3), kernel, stride, padding)});
    return push(std::move(n));
  }

  NodeId avgpool(NodeId x, int64_t kernel = 2, int64_t stride = 2, std::string name = "") {
    Node n = make_node(OpKind::avgpool, name);
    const auto& xt = check_4d(x, n.name);
    if (kernel != 2 || stride != 2)
      throw ShapeError(msg(n) + ": only 2x2/stride-2 average pooling is supported");
    if (xt.dim(2) < 2 || xt.dim(3) < 2)
      throw ShapeError(msg(n) + ": spatial dims " + shape_str(xt.shape()) +
                       " smaller than kernel 2");
    n.inputs = {x};
    n.attrs.kernel = 2;
    n.attrs.stride = 2;
    n.output = Tensor<S>({xt.dim(0), xt.dim(1), xt.dim(2) / 2, xt.dim(3) / 2});
    return push(std::move(n));
  }

  NodeId upsample_nearest(NodeId x, std::string name = "") {
    Node n = make_node(OpKind::upsample_nearest, name);
    const auto& xt = check_4d(x, n.name);
    n.inputs = {x};
    n.output = Tensor<S>({xt.dim(0), xt.dim(1), 2 * xt.dim(2), 2 * xt.dim(3)});
    return push(std::move(n));
  }

  NodeId concat(const std::vector<NodeId>& xs, std::string name = "") {
    Node n = make_node(OpKind::concat, name);
    if (xs.empty()) throw ShapeError(msg(n) + ": needs at least one input");
    const auto& first = check_4d(xs[0], n.name);
    int64_t channels = 0;
    for (NodeId x : xs) {
      const auto& xt = check_4d(x, n.name);
      if (xt.dim(0) != first.dim(0) || xt.dim(2) != first.dim(2) ||
          xt.dim(3) != first.dim(3))
        throw ShapeError(msg(n) + ": non-channel dims differ, " + shape_str(first.shape()) +
                         " vs " + shape_str(xt.shape()));
      channels += xt.dim(1);
    }
    n.inputs = xs;
    n.output = Tensor<S>({first.dim(0), channels, first.dim(2), first.dim(3)});
    return push(std::move(n));
  }

  NodeId channel_reduce(NodeId x, int64_t k, std::string name = "") {
    Node n = make_node(OpKind::channel_reduce, name);
    const auto& xt = check_4d(x, n.name);
    if (k < 1) throw ShapeError(msg(n) + ": k must be >= 1, got " + std::to_string(k));
    if (xt.dim(1) % k != 0)
      throw ShapeError(msg(n) + ": input channels " + std::to_string(xt.dim(1)) +
                       " not divisible by k " + std::to_string(k));
    n.inputs = {x};
    n.attrs.k = k;
    n.output = Tensor<S>({xt.dim(0), xt.dim(1) / k, xt.dim(2), xt.dim(3)});
    return push(std::move(n));
  }

  NodeId add(NodeId a, NodeId b, std::string name = "") {
    Node n = make_node(OpKind::add, name);
    const auto& at = value(a);
    const auto& bt = value(b);
    if (at.shape() != bt.shape())
      throw ShapeError(msg(n) + ": shape mismatch " + shape_str(at.shape()) + " vs " +
                       shape_str(bt.shape()));
    n.inputs = {a, b};
    n.output = Tensor<S>(at.shape());
    return push(std::move(n));
  }

  NodeId relu(NodeId x, std::string name = "") {
    Node n = make_node(OpKind::relu, name);
    n.inputs = {x};
    n.output = Tensor<S>(value(x).shape());
    return push(std::move(n));
  }

  NodeId sigmoid(NodeId x, std::string name = "") {
    Node n = make_node(OpKind::sigmoid, name);
    n.inputs = {x};
    n.output = Tensor<S>(value(x).shape());
    return push(std::move(n));
  }

  NodeId batchnorm(NodeId x, NodeId gamma, NodeId beta, NodeId rmean, NodeId rvar,
                   std::string name = "") {
    Node n = make_node(OpKind::batchnorm, name);
    const auto& xt = check_4d(x, n.name);
    const int64_t C = xt.dim(1);
    for (NodeId p : {gamma, beta, rmean, rvar}) {
      const auto& pt = value(p);
      if (pt.ndim() != 1 || pt.dim(0) != C)
        throw ShapeError(msg(n) + ": per-channel param " + node(p).name + " has shape " +
                         shape_str(pt.shape()) + ", expected (" + std::to_string(C) + ")");
    }
    n.inputs = {x, gamma, beta, rmean, rvar};
    n.output = Tensor<S>(xt.shape());
    return push(std::move(n));
  }

  NodeId scale_channels(NodeId x, NodeId gate, std::string name = "") {
    Node n = make_node(OpKind::scale_channels, name);
    const auto& xt = check_4d(x, n.name);
    const auto& gt = check_4d(gate, n.name);
    if (gt.dim(0) != xt.dim(0) || gt.dim(1) != xt.dim(1) || gt.dim(2) != 1 || gt.dim(3) != 1)
      throw ShapeError(msg(n) + ": gate shape " + shape_str(gt.shape()) +
                       " must be (N,C,1,1) matching " + shape_str(xt.shape()));
    n.inputs = {x, gate};
    n.output = Tensor<S>(xt.shape());
    return push(std::move(n));
  }

  NodeId linear(NodeId x, NodeId w, std::string name = "") {
    Node n = make_node(OpKind::linear, name);
    const auto& xt = value(x);
    const auto& wt = value(w);
    if (xt.ndim() != 2 || wt.ndim() != 2 || xt.dim(1) != wt.dim(1))
      throw ShapeError(msg(n) + ": expects x (N,In) and w (Out,In), got " +
                       shape_str(xt.shape()) + " and " + shape_str(wt.shape()));
    n.inputs = {x, w};
    n.output = Tensor<S>({xt.dim(0), wt.dim(0)});
    return push(std::move(n));
  }

  NodeId global_avg_pool(NodeId x, std::string name = "") {
    Node n = make_node(OpKind::global_avg_pool, name);
    const auto& xt = check_4d(x, n.name);
    n.inputs = {x};
    n.output = Tensor<S>({xt.dim(0), xt.dim(1), 1, 1});
    return push(std::move(n));
  }

  NodeId softmax_xent(NodeId logits, NodeId labels, std::string name = "") {
    Node n = make_node(OpKind::softmax_xent, name);
    const auto& lt = value(logits);
    if (!(lt.ndim() == 2 || (lt.ndim() == 4 && lt.dim(2) == 1 && lt.dim(3) == 1)))
      throw ShapeError(msg(n) + ": logits must be (N,K) or (N,K,1,1), got " +
                       shape_str(lt.shape()));
    const auto& yt = value(labels);
    if (yt.ndim() != 1 || yt.dim(0) != lt.dim(0))
      throw ShapeError(msg(n) + ": labels must be (N) matching logits " +
                       shape_str(lt.shape()) + ", got " + shape_str(yt.shape()));
    n.inputs = {logits, labels};
    n.output = Tensor<S>({1});
    return push(std::move(n));
  }

  void forward() {
    for (NodeId i = 0; i < static_cast<NodeId>(nodes_.size()); ++i) forward_node(i);
  }

  // Reverse sweep from `loss`. Every requires_grad node ends with a populated
  // gradient; fan-out accumulates by summation.
  void backward(NodeId loss) {
    Node& ln = node(loss);
    if (ln.output.numel() != 1)
      throw ShapeError(msg(ln) + ": backward root must be scalar, got " +
                       shape_str(ln.output.shape()));
    for (auto& n : nodes_)
      if (n.output.requires_grad()) {
        n.output.ensure_grad();
        n.output.zero_grad();
      }
    ln.output.ensure_grad();
    ln.output.zero_grad();
    ln.output.grad()[0] = S(1);
    for (NodeId i = loss; i >= 0; --i) backward_node(i);
  }

  // Reverse sweep with an arbitrary seed gradient at `root`; used by tests
  // and by the witness verifier.
  void backward_seeded(NodeId root, const ArrayX<S>& seed) {
    Node& rn = node(root);
    if (seed.size() != rn.output.numel())
      throw ShapeError(msg(rn) + ": seed gradient size mismatch");
    for (auto& n : nodes_)
      if (n.output.requires_grad()) {
        n.output.ensure_grad();
        n.output.zero_grad();
      }
    rn.output.ensure_grad();
    rn.output.zero_grad();
    rn.output.grad() = seed;
    for (NodeId i = root; i >= 0; --i) backward_node(i);
  }

  void zero_grad() {
    for (auto& n : nodes_) n.output.zero_grad();
  }

  // First node (in topological order) whose values contain a non-finite
  // entry; kNoNode if all values are finite.
  NodeId first_nonfinite_node() const {
    for (NodeId i = 0; i < static_cast<NodeId>(nodes_.size()); ++i)
      if (!nodes_[static_cast<size_t>(i)].output.values().isFinite().all()) return i;
    return kNoNode;
  }

private:
  std::vector<Node> nodes_;
  std::unordered_map<std::string, NodeId> by_name_;

  static std::string msg(const Node& n) {
    return std::string(op_kind_name(n.kind)) + " node '" + n.name + "'";
  }

  Node make_node(OpKind kind, std::string name) {
    Node n;
    n.kind = kind;
    n.name = name.empty()
                 ? "op" + std::to_string(nodes_.size()) + "_" + op_kind_name(kind)
                 : std::move(name);
    return n;
  }

  const Tensor<S>& check_4d(NodeId id, const std::string& who) {
    if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
      throw ShapeError("node '" + who + "': invalid input id");
    const auto& t = value(id);
    if (t.ndim() != 4)
      throw ShapeError("node '" + who + "': input '" + node(id).name +
                       "' must be 4-d NCHW, got " + shape_str(t.shape()));
    return t;
  }

  NodeId push(Node n) {
    if (by_name_.count(n.name))
      throw ShapeError("duplicate node name '" + n.name + "'");
    bool rg = n.kind == OpKind::parameter && n.trainable;
    for (NodeId in : n.inputs)
      if (in >= static_cast<NodeId>(nodes_.size()))
        throw ShapeError(msg(n) + ": inputs must precede the node");
      else
        rg = rg || value(in).requires_grad();
    if (n.kind != OpKind::parameter) n.output.set_requires_grad(rg);
    const NodeId id = static_cast<NodeId>(nodes_.size());
    by_name_.emplace(n.name, id);
    nodes_.push_back(std::move(n));
    return id;
  }

  void forward_node(NodeId i) {
    Node& n = node(i);
    switch (n.kind) {
      case OpKind::input:
      case OpKind::parameter:
        break;
      case OpKind::conv2d: {
        ops::ConvAttrs a{n.attrs.stride, n.attrs.padding, n.attrs.dilation, n.attrs.groups};
        ops::conv2d_forward(value(n.inputs[0]), value(n.inputs[1]), a, n.output);
        break;
      }
      case OpKind::maxpool:
        ops::maxpool_forward(value(n.inputs[0]), n.attrs.kernel, n.attrs.stride,
                             n.attrs.padding, n.output, n.argmax);
        break;
      case OpKind::avgpool:
        ops::avgpool_forward(value(n.inputs[0]), n.output);
        break;
      case OpKind::upsample_nearest:
        ops::upsample_forward(value(n.inputs[0]), n.output);
        break;
      case OpKind::concat: {
        std::vector<const Tensor<S>*> xs;
        xs.reserve(n.inputs.size());
        for (NodeId x : n.inputs) xs.push_back(&value(x));
        ops::concat_forward(xs, n.output);
        break;
      }
      case OpKind::channel_reduce:
        ops::channel_reduce_forward(value(n.inputs[0]), n.attrs.k, n.output);
        break;
      case OpKind::add:
        n.output.values() = value(n.inputs[0]).values() + value(n.inputs[1]).values();
        break;
      case OpKind::relu:
        n.output.values() = value(n.inputs[0]).values().max(S(0));
        break;
      case OpKind::sigmoid:
        n.output.values() = S(1) / (S(1) + (-value(n.inputs[0]).values()).exp());
        break;
      case OpKind::batchnorm:
        ops::batchnorm_forward(value(n.inputs[0]), value(n.inputs[1]), value(n.inputs[2]),
                               value(n.inputs[3]), value(n.inputs[4]),
                               mode == Mode::train, bn_eps, bn_momentum, n.output, n.bn);
        break;
      case OpKind::scale_channels:
        ops::scale_channels_forward(value(n.inputs[0]), value(n.inputs[1]), n.output);
        break;
      case OpKind::linear:
        ops::linear_forward(value(n.inputs[0]), value(n.inputs[1]), n.output);
        break;
      case OpKind::global_avg_pool:
        ops::global_avg_pool_forward(value(n.inputs[0]), n.output);
        break;
      case OpKind::softmax_xent: {
        const auto& labels = value(n.inputs[1]);
        const int64_t K = value(n.inputs[0]).dim(1);
        for (int64_t j = 0; j < labels.numel(); ++j) {
          const auto y = static_cast<int64_t>(labels.values()[j]);
          if (y < 0 || y >= K)
            throw ShapeError(msg(n) + ": label " + std::to_string(y) +
                             " out of range [0," + std::to_string(K) + ")");
        }
        ops::softmax_xent_forward(value(n.inputs[0]), labels, n.output, n.probs);
        break;
      }
    }
  }

  ArrayX<S>* grad_of(NodeId id) {
    Tensor<S>& t = value(id);
    return t.requires_grad() ? &t.grad() : nullptr;
  }

  void backward_node(NodeId i) {
    Node& n = node(i);
    if (!n.output.requires_grad() || !n.output.has_grad()) return;
    switch (n.kind) {
      case OpKind::input:
      case OpKind::parameter:
        break;
      case OpKind::conv2d: {
        ops::ConvAttrs a{n.attrs.stride, n.attrs.padding, n.attrs.dilation, n.attrs.groups};
        ops::conv2d_backward(value(n.inputs[0]), value(n.inputs[1]), a, n.output,
                             grad_of(n.inputs[0]), grad_of(n.inputs[1]));
        break;
      }
      case OpKind::maxpool:
        if (auto* g = grad_of(n.inputs[0]))
          ops::maxpool_backward(n.output.grad(), n.argmax, *g);
        break;
      case OpKind::avgpool:
        if (auto* g = grad_of(n.inputs[0]))
          ops::avgpool_backward(value(n.inputs[0]), n.output, *g);
        break;
      case OpKind::upsample_nearest:
        if (auto* g = grad_of(n.inputs[0]))
          ops::upsample_backward(value(n.inputs[0]), n.output, *g);
        break;
      case OpKind::concat: {
        int64_t coff = 0;
        for (NodeId x : n.inputs) {
          const int64_t C = value(x).dim(1);
          if (auto* g = grad_of(x)) ops::concat_backward_one(n.output, coff, C, *g);
          coff += C;
        }
        break;
      }
      case OpKind::channel_reduce:
        if (auto* g = grad_of(n.inputs[0]))
          ops::channel_reduce_backward(value(n.inputs[0]), n.attrs.k, n.output, *g);
        break;
      case OpKind::add:
        if (auto* g = grad_of(n.inputs[0])) *g += n.output.grad();
        if (auto* g = grad_of(n.inputs[1])) *g += n.output.grad();
        break;
      case OpKind::relu:
        if (auto* g = grad_of(n.inputs[0]))
          *g += (value(n.inputs[0]).values() > S(0))
                    .select(n.output.grad(), ArrayX<S>::Zero(n.output.numel()));
        break;
      case OpKind::sigmoid:
        if (auto* g = grad_of(n.inputs[0]))
          *g += n.output.grad() * n.output.values() * (S(1) - n.output.values());
        break;
      case OpKind::batchnorm:
        ops::batchnorm_backward(value(n.inputs[0]), value(n.inputs[1]),
                                mode == Mode::train, n.output, n.bn, grad_of(n.inputs[0]),
                                grad_of(n.inputs[1]), grad_of(n.inputs[2]));
        break;
      case OpKind::scale_channels:
        ops::scale_channels_backward(value(n.inputs[0]), value(n.inputs[1]), n.output,
                                     grad_of(n.inputs[0]), grad_of(n.inputs[1]));
        break;
      case OpKind::linear:
        ops::linear_backward(value(n.inputs[0]), value(n.inputs[1]), n.output,
                             grad_of(n.inputs[0]), grad_of(n.inputs[1]));
        break;
      case OpKind::global_avg_pool:
        if (auto* g = grad_of(n.inputs[0]))
          ops::global_avg_pool_backward(value(n.inputs[0]), n.output, *g);
        break;
      case OpKind::softmax_xent:
        if (auto* g = grad_of(n.inputs[0]))
          ops::softmax_xent_backward(value(n.inputs[0]), value(n.inputs[1]), n.output,
                                     n.probs, *g);
        break;
    }
  }
};

}  // namespace fish
