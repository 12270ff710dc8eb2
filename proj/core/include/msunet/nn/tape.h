#ifndef MSUNET_NN_TAPE_H_
#define MSUNET_NN_TAPE_H_

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msunet/tensor.h"

namespace msunet::nn {

// A named, learnable (or buffer) tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape;
using BackwardFn = std::function<void(Tape&, int self)>;

// Reverse-mode tape. Nodes are stored in creation order, which is a
// topological order, so Backward simply walks the tape in reverse. When
// constructed with record=false no closures are stored and only values
// are kept (inference).
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  Var Constant(Tensor value);
  // Leaf bound to a Parameter; its gradient is added to param.grad by
  // Backward. Non-trainable parameters are treated as constants.
  Var Leaf(Parameter& param);
  // Records an op result. `parents` decide whether the node needs a grad.
  Var Push(Tensor value, std::initializer_list<Var> parents, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
  bool needs_grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].needs_grad; }
  // Gradient buffer, zero-initialised on first access.
  Tensor& grad(Var v);
  bool has_grad(int id) const { return nodes_[static_cast<size_t>(id)].has_grad; }

  // Seeds d(loss)/d(value) on the given vars and propagates to all leaves.
  void Backward(std::span<const std::pair<Var, Tensor>> seeds);

  size_t size() const { return nodes_.size(); }
  // Drops every node created after `mark` (used to replay a decoder on a
  // cached encoder in inference).
  void TruncateTo(size_t mark) { nodes_.resize(mark); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool needs_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  bool record_;
  std::deque<Node> nodes_;
};

}  // namespace msunet::nn

#endif  // MSUNET_NN_TAPE_H_
