#ifndef PROACTIVE_NUMERICS_TAPE_HPP
#define PROACTIVE_NUMERICS_TAPE_HPP

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "proactive/error.hpp"
#include "proactive/numerics/param_store.hpp"
#include "proactive/numerics/tensor.hpp"

namespace proactive::numerics {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  double item() const { return value().item(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records primitive applications in order. backward() replays them in exact
/// reverse order and deposits leaf gradients into a caller-owned buffer, so a
/// tape never mutates the parameters it reads.
class Tape {
 public:
  /// Propagates the gradient held by node `self` into its parents.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  /// With `track_grads` false, parameters are read as constants and no
  /// backward closures are kept.
  explicit Tape(const ParamStore* store = nullptr, bool track_grads = true) : store_(store), track_(track_grads) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  const ParamStore* store() const noexcept { return store_; }

  Var constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, false, false, {}, nullptr, -1, "constant"});
    return Var(this, nodes_.size() - 1);
  }

  Var param(std::size_t index) {
    if (!store_ || index >= store_->size()) {
      throw Error(ErrorCode::kContract, "tape: parameter index out of range");
    }
    nodes_.push_back(Node{store_->value(index), {}, track_, false, {}, nullptr,
                          static_cast<std::ptrdiff_t>(index), "param"});
    return Var(this, nodes_.size() - 1);
  }

  Var param(std::string_view name) {
    if (!store_) throw Error(ErrorCode::kContract, "tape: no parameter store bound");
    return param(store_->index_of(name));
  }

  /// Appends an op result. `backward` is dropped when no parent needs gradients.
  Var record(const char* op, Tensor value, std::vector<std::size_t> parents, BackwardFn backward) {
    if (!value.all_finite()) {
      throw Error(ErrorCode::kNumeric, std::string(op) + ": non-finite output");
    }
    bool needs = false;
    for (auto p : parents) needs = needs || nodes_[p].requires_grad;
    if (!needs) backward = nullptr;
    nodes_.push_back(Node{std::move(value), {}, needs, false, std::move(parents), std::move(backward),
                          -1, op});
    return Var(this, nodes_.size() - 1);
  }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const char* op_name(std::size_t id) const { return nodes_[id].op; }

  /// Gradient accumulator of node `id`, allocated on first use; nullptr when
  /// the node does not lead to any parameter.
  Tensor* grad_slot(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return nullptr;
    if (!n.has_grad) {
      n.grad = Tensor::zeros_like(n.value);
      n.has_grad = true;
    }
    return &n.grad;
  }

  /// Reverse sweep from a scalar loss; parameter gradients are added to `sink`.
  void backward(Var loss, Gradients& sink) {
    if (&loss.tape() != this) throw Error(ErrorCode::kContract, "backward: loss is from another tape");
    if (loss.value().size() != 1) {
      throw Error(ErrorCode::kContract,
                  "backward: loss must be scalar, got shape " + shape_string(loss.shape()));
    }
    if (store_ && sink.size() != store_->size()) {
      throw Error(ErrorCode::kDimension, "backward: gradient buffer does not match store");
    }
    for (auto& n : nodes_) {
      n.has_grad = false;
      n.grad = Tensor();
    }
    if (Tensor* g = grad_slot(loss.id())) {
      g->fill(1.0);
    } else {
      return;
    }
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.has_grad) continue;
      if (n.param_index >= 0) {
        sink[static_cast<std::size_t>(n.param_index)] += n.grad;
      } else if (n.backward) {
        n.backward(*this, id);
      }
    }
  }

  /// Accumulates straight into the bound store's gradient tensors.
  void backward(Var loss, ParamStore& store) {
    if (&store != store_) throw Error(ErrorCode::kContract, "backward: store is not bound to this tape");
    Gradients sink(store);
    backward(loss, sink);
    store.accumulate(sink);
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad;
    bool has_grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    std::ptrdiff_t param_index;
    const char* op;
  };

  const ParamStore* store_;
  bool track_ = true;
  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

}  // namespace proactive::numerics

#endif  // PROACTIVE_NUMERICS_TAPE_HPP
