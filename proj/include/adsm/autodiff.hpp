#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "adsm/tensor.hpp"

namespace adsm {

/// A named trainable tensor. Parameters are owned by models; tapes refer to
/// them by address while recording.
struct Parameter {
  std::string name;
  Tensor value;
};

class Tape;

namespace detail {

struct Node {
  Tensor value;
  const Tensor* view = nullptr;  // non-owning leaf value
  Tensor grad;                   // allocated lazily during backward
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  Tape* tape = nullptr;
  const char* kind = "leaf";

  const Tensor& val() const { return view ? *view : value; }
  Tensor& grad_buffer();
};

}  // namespace detail

/// Handle to a value in the computation graph.
///
/// A Var with no tape is a plain value; ops on it record nothing. A Var
/// attached to a tape records every op that consumes it.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  /// Detached constant holding a copy of `t`.
  static Var constant(Tensor t);
  /// Detached constant referring to `t`; `t` must outlive every use.
  static Var view(const Tensor& t);

  const Tensor& value() const { return node_->val(); }
  const Shape& shape() const { return node_->val().shape(); }
  Tape* tape() const { return node_ ? node_->tape : nullptr; }
  bool defined() const { return static_cast<bool>(node_); }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Reverse-mode recorder. Nodes are appended in creation order, so the
/// record is already topologically sorted; backward walks it once in
/// reverse. Single owner: not safe to share across threads while recording.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf for a parameter. Repeated calls return the same leaf.
  Var watch(const Parameter& p);
  /// Leaf for a free tensor whose gradient can be read with grad_of().
  Var variable(Tensor t);

  /// Gradients of a scalar loss with respect to `wrt`, in order.
  /// Parameters that did not participate receive zeros. Consumes the tape.
  std::vector<Tensor> grad(const Var& loss, std::span<const Parameter* const> wrt);
  std::vector<Tensor> grad(const Var& loss, std::span<const Parameter> wrt);

  /// Runs backward from `loss` and keeps leaf gradients readable through
  /// grad_of(). Consumes the op record.
  void backward(const Var& loss);
  Tensor grad_of(const Var& leaf) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear();

  // Called by ops.
  Var record(std::shared_ptr<detail::Node> node);

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
  std::unordered_map<const Parameter*, std::shared_ptr<detail::Node>> watched_;
  std::vector<std::shared_ptr<detail::Node>> leaves_;
  std::size_t backward_visits_ = 0;

 public:
  /// Number of nodes visited by the last backward pass.
  std::size_t last_backward_visits() const noexcept { return backward_visits_; }
};

/// Use `p` through `tape` when recording, otherwise as a non-owning constant.
Var param(const Parameter& p, Tape* tape);

}  // namespace adsm
