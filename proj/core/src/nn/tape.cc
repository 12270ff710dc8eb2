#include "msunet/nn/tape.h"

#include "msunet/error.h"

namespace msunet::nn {

Var Tape::Constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Var Tape::Leaf(Parameter& param) {
  Node n;
  n.value = param.value;
  n.needs_grad = record_ && param.trainable;
  if (n.needs_grad) n.param = &param;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Var Tape::Push(Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (Var p : parents) {
      if (p.valid() && nodes_[static_cast<size_t>(p.id)].needs_grad) n.needs_grad = true;
    }
    if (n.needs_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Tensor& Tape::grad(Var v) {
  Node& n = nodes_[static_cast<size_t>(v.id)];
  if (!n.has_grad) {
    n.grad = Tensor::ZerosLike(n.value);
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::Backward(std::span<const std::pair<Var, Tensor>> seeds) {
  if (!record_) throw Error("Backward called on a non-recording tape");
  for (const auto& [var, seed] : seeds) {
    if (seed.shape() != value(var).shape()) {
      throw ShapeError("backward seed shape " + ShapeString(seed.shape()) + " vs value " +
                       ShapeString(value(var).shape()));
    }
    grad(var).Add(seed);
  }
  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.has_grad || !n.needs_grad) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) {
      if (n.param->grad.shape() != n.param->value.shape()) n.param->grad = Tensor::ZerosLike(n.param->value);
      n.param->grad.Add(n.grad);
    }
  }
}

}  // namespace msunet::nn
