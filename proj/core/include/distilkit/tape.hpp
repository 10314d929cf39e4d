// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <string>

#include "distilkit/tensor.hpp"

namespace distilkit {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool requires_grad() const;
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Append-only reverse-mode autodiff record, rebuilt for every training step.
///
/// Nodes are topologically ordered by construction. backward() walks them once
/// in reverse append order, calling each node's backward function only when a
/// gradient reached it. A Tape is not thread-safe.
class Tape {
 public:
  /// Receives the output gradient and scatters it into input gradients via
  /// Tape::grad_sink().
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Records an op output. The node requires grad iff any input does; the
  /// backward function is dropped otherwise.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward, const char* op);

  /// Seeds d(loss)/d(loss)=1 and propagates. Throws if `loss` is not scalar.
  void backward(Var loss);

  /// Gradient accumulated on `v` by the last backward(); zeros if unreachable.
  Tensor grad(Var v) const;

  /// Gradient buffer of `v`, zero-initialised on first use, or nullptr when
  /// `v` does not require a gradient. Only meaningful inside backward().
  Tensor* grad_sink(Var v);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const char* op_name(std::size_t id) const { return nodes_[id].op; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Number of node backward functions executed by the last backward().
  std::size_t backward_visits() const noexcept { return visits_; }

 private:
  struct Node {
    Tensor value;
    std::optional<Tensor> grad;
    BackwardFn backward;
    bool requires_grad = false;
    const char* op = "leaf";
  };

  std::deque<Node> nodes_;
  std::size_t visits_ = 0;
};

}  // namespace distilkit
