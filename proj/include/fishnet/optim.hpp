#pragma once

#include <vector>

#include "fishnet/graph.hpp"
#include "fishnet/tensor.hpp"

namespace fish {

// Classical SGD update. Weight decay is added to the gradient (not the
// decoupled form):
//   v <- momentum * v + grad + weight_decay * param
//   param <- param - lr * v
template <typename S>
void sgd_step(ArrayX<S>& param, const ArrayX<S>& grad, ArrayX<S>& velocity, S lr,
              S momentum, S weight_decay) {
  velocity = momentum * velocity + grad + weight_decay * param;
  param -= lr * velocity;
}

// Velocity state for a fixed parameter list of one graph.
template <typename S>
class Sgd {
public:
  explicit Sgd(Graph<S>& g) : params_(g.trainable_params()) {
    velocity_.reserve(params_.size());
    for (NodeId p : params_) velocity_.push_back(ArrayX<S>::Zero(g.value(p).numel()));
  }

  void step(Graph<S>& g, S lr, S momentum, S weight_decay) {
    for (size_t i = 0; i < params_.size(); ++i) {
      Tensor<S>& t = g.value(params_[i]);
      sgd_step(t.values(), t.grad(), velocity_[i], lr, momentum, weight_decay);
    }
  }

  const std::vector<NodeId>& params() const { return params_; }
  std::vector<ArrayX<S>>& velocity() { return velocity_; }

private:
  std::vector<NodeId> params_;
  std::vector<ArrayX<S>> velocity_;
};

}  // namespace fish
