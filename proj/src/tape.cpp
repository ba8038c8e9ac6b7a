#include "wagf/tape.hpp"

#include "wagf/errors.hpp"

WAGF_BEGIN_NAMESPACE

std::size_t Tape::check(Var v, const char* what) const {
  if (v.tape != this || v.id >= nodes_.size()) {
    throw std::invalid_argument(std::string(what) + ": node is not on this tape");
  }
  return v.id;
}

Var Tape::push(Node node) {
  if (checked_ && !node.value.all_finite()) {
    throw NumericError("non-finite value recorded at tape node " +
                       std::to_string(nodes_.size()));
  }
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1, this};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.is_leaf = true;
  return push(std::move(n));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  n.is_leaf = true;
  return push(std::move(n));
}

Var Tape::parameter(const Parameter& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = p.trainable;
  n.param = &p;
  n.is_leaf = true;
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (auto id : inputs) {
    if (id >= nodes_.size()) throw std::invalid_argument("record: operand not on tape");
    n.requires_grad = n.requires_grad || nodes_[id].requires_grad;
  }
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

const Tensor& Tape::value(Var v) const { return nodes_[check(v, "value")].value; }

Tensor& Tape::grad_buffer(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

void Tape::capture(Var v) { nodes_[check(v, "capture")].captured = true; }

bool Tape::captured(Var v) const { return nodes_[check(v, "captured")].captured; }

Tensor Tape::grad(Var v) const {
  const auto& n = nodes_[check(v, "grad")];
  if (!n.captured && !n.is_leaf) {
    throw std::logic_error("grad: intermediate node was not marked for capture");
  }
  if (n.grad.empty()) return Tensor::zeros(n.value.shape());
  return n.grad;
}

void Tape::backward(Var loss, Real seed) {
  const auto root = check(loss, "backward");
  if (nodes_[root].value.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     shape_str(nodes_[root].value.shape()));
  }
  if (backward_done_) throw std::logic_error("backward: tape already differentiated");
  backward_done_ = true;
  grad_buffer(root)[0] = seed;
  for (std::size_t i = root + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
    // Interior gradients are no longer needed once propagated.
    if (!n.captured && !n.is_leaf && i != root) n.grad = Tensor();
  }
}

std::vector<Tape::ParamGrad> Tape::parameter_grads() const {
  std::vector<ParamGrad> out;
  for (const auto& n : nodes_) {
    if (n.param == nullptr) continue;
    out.push_back({n.param, n.grad.empty() ? nullptr : &n.grad});
  }
  return out;
}

void Tape::clear() {
  nodes_.clear();
  backward_done_ = false;
}

WAGF_END_NAMESPACE
