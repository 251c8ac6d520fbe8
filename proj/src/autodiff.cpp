#include "adsm/autodiff.hpp"

#include "adsm/errors.hpp"

namespace adsm {

Tensor& detail::Node::grad_buffer() {
  if (grad.shape() != val().shape() || grad.size() != val().size())
    grad = Tensor::zeros(val().shape());
  return grad;
}

Var Var::constant(Tensor t) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(t);
  return Var(std::move(n));
}

Var Var::view(const Tensor& t) {
  auto n = std::make_shared<detail::Node>();
  n->view = &t;
  return Var(std::move(n));
}

Var Tape::watch(const Parameter& p) {
  if (auto it = watched_.find(&p); it != watched_.end()) return Var(it->second);
  auto n = std::make_shared<detail::Node>();
  n->view = &p.value;
  n->tape = this;
  nodes_.push_back(n);
  watched_.emplace(&p, n);
  return Var(std::move(n));
}

Var Tape::variable(Tensor t) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(t);
  n->tape = this;
  nodes_.push_back(n);
  leaves_.push_back(n);
  return Var(std::move(n));
}

Var Tape::record(std::shared_ptr<detail::Node> node) {
  node->tape = this;
  nodes_.push_back(node);
  return Var(std::move(node));
}

void Tape::backward(const Var& loss) {
  ADSM_REQUIRE(loss.defined() && loss.tape() == this, "backward: loss is not recorded on this tape");
  ADSM_REQUIRE(loss.value().size() == 1,
               "grad requested on non-scalar of shape " + shape_str(loss.shape()));
  loss.node()->grad_buffer().fill(1.0);
  backward_visits_ = 0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    detail::Node& n = **it;
    ++backward_visits_;
    if (n.backward && n.grad.size() == n.val().size() && n.grad.shape() == n.val().shape())
      n.backward(n);
  }
  // Drop interior nodes; keep leaves so their gradients stay readable.
  for (auto& n : nodes_) {
    n->backward = nullptr;
    n->parents.clear();
  }
  nodes_.clear();
}

std::vector<Tensor> Tape::grad(const Var& loss, std::span<const Parameter* const> wrt) {
  backward(loss);
  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const Parameter* p : wrt) {
    auto it = watched_.find(p);
    if (it == watched_.end() || it->second->grad.size() != p->value.size())
      out.push_back(Tensor::zeros(p->value.shape()));
    else
      out.push_back(std::move(it->second->grad));
  }
  clear();
  return out;
}

std::vector<Tensor> Tape::grad(const Var& loss, std::span<const Parameter> wrt) {
  std::vector<const Parameter*> ptrs;
  ptrs.reserve(wrt.size());
  for (const auto& p : wrt) ptrs.push_back(&p);
  return grad(loss, std::span<const Parameter* const>(ptrs));
}

Tensor Tape::grad_of(const Var& leaf) const {
  const auto& n = leaf.node();
  if (n->grad.size() != n->val().size()) return Tensor::zeros(n->val().shape());
  return n->grad;
}

void Tape::clear() {
  nodes_.clear();
  watched_.clear();
  leaves_.clear();
}

Var param(const Parameter& p, Tape* tape) {
  return tape ? tape->watch(p) : Var::view(p.value);
}

}  // namespace adsm
