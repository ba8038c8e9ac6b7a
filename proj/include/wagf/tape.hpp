#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "wagf/tensor.hpp"

WAGF_BEGIN_NAMESPACE

/// A trainable (or frozen) tensor together with its accumulated gradient.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name_, Tensor value_, bool trainable_ = true)
      : name(std::move(name_)),
        value(std::move(value_)),
        grad(Tensor::zeros(value.shape())),
        trainable(trainable_) {}

  void zero_grad() { grad.fill(Real(0)); }

  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();

  std::size_t id = kInvalid;
  const Tape* tape = nullptr;

  bool valid() const { return tape != nullptr && id != kInvalid; }
};

/// Append-only record of operations for reverse-mode differentiation.
///
/// Nodes are stored in creation order, which is a topological order since
/// every operation's operands exist before it. `backward` walks the nodes
/// once in reverse. A tape belongs to a single thread; parameters are only
/// read during recording, and their gradients are handed back through
/// `parameter_grads()` so the caller decides how to reduce them.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// Checked mode throws NumericError as soon as a node value is non-finite.
  void set_checked(bool on) { checked_ = on; }
  bool checked() const { return checked_; }

  Var constant(Tensor value);
  /// Leaf that receives a gradient (used for inputs under test).
  Var variable(Tensor value);
  /// Leaf bound to a parameter; gradient is reported by parameter_grads().
  Var parameter(const Parameter& p);

  /// Records an op result. `backward` is skipped when no input needs a grad.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(Var v) const;
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer of an input node, allocated on first use. Only valid
  /// inside backward rules.
  Tensor& grad_buffer(std::size_t id);
  const Tensor& out_grad(std::size_t id) const { return nodes_[id].grad; }

  /// Marks an intermediate whose gradient the caller wants after backward.
  void capture(Var v);
  bool captured(Var v) const;
  /// Gradient of a captured node or leaf; zeros if nothing flowed into it.
  Tensor grad(Var v) const;

  /// Accumulates d(loss)/d(node) for every node, seeding with `seed`.
  void backward(Var loss, Real seed = Real(1));

  struct ParamGrad {
    const Parameter* param;
    const Tensor* grad;  // null if the parameter received no gradient
  };
  std::vector<ParamGrad> parameter_grads() const;

  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    const Parameter* param = nullptr;
    bool requires_grad = false;
    bool captured = false;
    bool is_leaf = false;
  };

  std::size_t check(Var v, const char* what) const;
  Var push(Node node);

  std::vector<Node> nodes_;
  bool checked_ = false;
  bool backward_done_ = false;
};

WAGF_END_NAMESPACE
