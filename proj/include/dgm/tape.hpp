#pragma once

#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dgm/tensor.hpp"

namespace dgm {

// Gradients of one backward pass, keyed by tape node id and by the storage
// of the producing tensor. Parameters that never reached the loss resolve to
// zeros of their own shape.
class Gradients {
 public:
  void set(int node, const Tensor& producer, Tensor grad) {
    by_node_[node] = grad;
    by_storage_[producer.storage_id()] = std::move(grad);
  }

  const std::unordered_map<int, Tensor>& by_node() const { return by_node_; }

  bool has(const Tensor& param) const {
    return by_storage_.count(param.storage_id()) != 0;
  }

  Tensor grad_for(const Tensor& param) const {
    auto it = by_storage_.find(param.storage_id());
    if (it == by_storage_.end()) return Tensor::zeros_like(param);
    return it->second;
  }

 private:
  std::unordered_map<int, Tensor> by_node_;
  std::unordered_map<const void*, Tensor> by_storage_;
};

// Eager reverse-mode tape. Ops append nodes in execution order, so inputs
// always precede their consumers and one reverse sweep visits each node once.
// A tape lives for a single forward/backward pair and is then discarded.
class Tape {
 public:
  // Gradient of each tracked input given the gradient of the output. Slots
  // for untracked inputs may be left as default-constructed tensors.
  using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad_out)>;

  struct Node {
    Tensor value;
    std::vector<int> inputs;  // -1 marks an untracked (constant) input
    BackwardFn backward;      // null for leaves
    const char* op;
  };

  // Node id of a tensor previously seen on this tape, -1 otherwise.
  int node_of(const Tensor& t) const {
    auto it = by_storage_.find(t.storage_id());
    return it == by_storage_.end() ? -1 : it->second;
  }

  // Registers a parameter/input as a leaf. Re-registering the same storage
  // yields the original id, so reusing a tensor twice shares one node.
  int leaf(const Tensor& t) {
    int id = node_of(t);
    if (id >= 0) return id;
    id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{t, {}, nullptr, "leaf"});
    by_storage_[t.storage_id()] = id;
    leaves_.push_back(id);
    return id;
  }

  int record(const char* op, Tensor value, std::vector<int> inputs, BackwardFn backward) {
    int id = static_cast<int>(nodes_.size());
    by_storage_[value.storage_id()] = id;
    nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(backward), op});
    return id;
  }

  size_t size() const { return nodes_.size(); }
  const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }

  // Reverse sweep from a scalar loss. Returns d(loss)/d(leaf) for every
  // registered leaf; leaves the loss never reached get zero gradients.
  Gradients backward(const Tensor& loss) {
    if (loss.numel() != 1)
      fail(ErrorCode::kInvalidArgument, "backward requires a scalar loss, got " + shape_str(loss.shape()));
    int loss_id = node_of(loss);
    if (loss_id < 0)
      fail(ErrorCode::kInvalidArgument, "backward: loss tensor is not recorded on this tape");

    std::vector<Tensor> grad(nodes_.size());
    grad[static_cast<size_t>(loss_id)] = Tensor::full(loss.shape(), 1.0f);

    for (int id = loss_id; id >= 0; --id) {
      auto& n = nodes_[static_cast<size_t>(id)];
      Tensor& g = grad[static_cast<size_t>(id)];
      if (!g.defined() || !n.backward) continue;
      std::vector<Tensor> input_grads = n.backward(g);
      for (size_t k = 0; k < n.inputs.size(); ++k) {
        int in = n.inputs[k];
        if (in < 0 || !input_grads[k].defined()) continue;
        Tensor& slot = grad[static_cast<size_t>(in)];
        if (!slot.defined()) {
          slot = input_grads[k];
        } else {
          accumulate(slot, input_grads[k]);
        }
      }
    }

    Gradients out;
    for (int id : leaves_) {
      const Tensor& t = nodes_[static_cast<size_t>(id)].value;
      Tensor& g = grad[static_cast<size_t>(id)];
      out.set(id, t, g.defined() ? g : Tensor::zeros_like(t));
    }
    return out;
  }

 private:
  // Accumulators are owned by the sweep, so in-place add is safe here even
  // though tensors are otherwise treated as immutable.
  static void accumulate(Tensor& acc, const Tensor& add) {
    if (!acc.same_shape(add))
      fail(ErrorCode::kShapeMismatch, "gradient accumulation shape mismatch");
    // The incoming grad may share storage with the accumulator's producer;
    // clone on first aliasing write.
    Tensor fresh = acc.clone();
    float* a = fresh.mutable_data();
    const float* b = add.data();
    for (int64_t i = 0; i < fresh.numel(); ++i) a[i] += b[i];
    acc = fresh;
  }

  std::vector<Node> nodes_;
  std::unordered_map<const void*, int> by_storage_;
  std::vector<int> leaves_;
};

}  // namespace dgm
