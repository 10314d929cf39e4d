// SPDX-License-Identifier: Apache-2.0
#include "distilkit/tape.hpp"

#include "distilkit/error.hpp"

namespace distilkit {

const Tensor& Var::value() const { return tape_->value(id_); }

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), std::nullopt, nullptr, requires_grad, "leaf"});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward, const char* op) {
  bool needs_grad = false;
  for (const Var& in : inputs) {
    if (in.tape() != this) throw ValidationError(std::string(op) + ": input recorded on a different tape");
    needs_grad = needs_grad || nodes_[in.id()].requires_grad;
  }
  if (!value.all_finite()) {
    throw NumericalError(std::string(op) + ": produced a non-finite value");
  }
  nodes_.push_back(Node{std::move(value), std::nullopt, needs_grad ? std::move(backward) : nullptr, needs_grad, op});
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ValidationError("backward: loss recorded on a different tape");
  const Tensor& lv = nodes_[loss.id()].value;
  if (lv.numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_to_string(lv.shape()));
  }
  for (auto& node : nodes_) node.grad.reset();
  visits_ = 0;
  nodes_[loss.id()].grad = Tensor(lv.shape(), 1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.grad || !node.backward) continue;
    ++visits_;
    node.backward(*this, *node.grad);
  }
}

Tensor Tape::grad(Var v) const {
  const Node& node = nodes_[v.id()];
  if (node.grad) return *node.grad;
  return Tensor(node.value.shape(), 0.0);
}

Tensor* Tape::grad_sink(Var v) {
  Node& node = nodes_[v.id()];
  if (!node.requires_grad) return nullptr;
  if (!node.grad) node.grad = Tensor(node.value.shape(), 0.0);
  return &*node.grad;
}

}  // namespace distilkit
