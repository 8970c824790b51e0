#pragma once

#include "flowseg/tensor.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace flowseg::ad {

class Graph;

struct Node {
  Graph* graph = nullptr;
  std::size_t index = 0;
  const char* op = "leaf";
  Tensor value;
  Tensor grad;  // allocated during backward, same shape as value
  bool requires_grad = false;
  std::vector<Node*> inputs;
  std::function<void(Node&)> backprop;  // scatters this->grad into inputs
};

// Dynamic tape. Nodes are appended in evaluation order, which is already a
// topological order, so backward is a single reverse sweep. A graph is
// single-use: it is built during one forward pass, backward may run once,
// and the whole tape is freed with the graph.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Node* leaf(Tensor value, bool requires_grad = false);
  Node* make(const char* op, Tensor value, std::vector<Node*> inputs,
             std::function<void(Node&)> backprop);

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every node on a
  // path from a requires_grad leaf to the loss. Rejects non-scalar losses and
  // second invocations.
  void backward(Node* loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
  bool backward_done_ = false;
};

// Primitive vocabulary. Every shape violation throws std::invalid_argument
// naming the op and both shapes; there is no implicit broadcasting.
Node* add(Node* a, Node* b);            // same shape
Node* mul(Node* a, Node* b);            // same shape, elementwise
Node* scalar_mul(Node* a, double c);
Node* matmul(Node* a, Node* b);         // [M,K] x [K,N]
Node* conv2d(Node* x, Node* w);         // [B,Ci,H,W] x [Co,Ci,3,3], stride 1, zero pad 1
Node* channel_bias_add(Node* x, Node* bias);  // [B,C,H,W] + [C]
Node* concat_channels(Node* a, Node* b);      // along dim 1
Node* avg_pool2(Node* x);               // 2x2 mean, H and W even
Node* upsample2(Node* x);               // 2x nearest
Node* silu(Node* x);
Node* square(Node* x);
Node* mean_all(Node* x);                // full reduction to a rank-0 scalar
Node* reshape(Node* x, Shape shape);

}  // namespace flowseg::ad
