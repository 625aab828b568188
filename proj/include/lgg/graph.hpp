#pragma once

#include <functional>
#include <vector>

#include "lgg/tensor.hpp"

namespace lgg {

// Reverse-mode tape. Operations append themselves in execution order, which
// is a topological order by construction (an op can only consume tensors
// that already exist). backward() replays the tape in reverse, handing each
// op the accumulated gradient of its output.
//
// Gradient accumulation is elementwise += in fixed tape order, so repeated
// runs are bit-identical.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Allocates a gradient slot for a value of the given shape.
  NodeId make_node(const std::vector<std::int64_t>& shape);

  // Registers a leaf (parameter or input). Idempotent per tensor.
  NodeId track(Tensor& t);

  // Appends a backward step for `out`; `fn` receives the graph and the
  // accumulated upstream gradient of `out`.
  void record(NodeId out, std::function<void(Graph&, const Tensor&)> fn);

  // Seeds the scalar loss gradient with 1 and replays the tape. A graph can
  // be consumed once.
  void backward(const Tensor& loss);

  void add_grad(NodeId node, const Tensor& contribution);
  void add_grad_raw(NodeId node, const double* data, std::int64_t n);

  bool touched(NodeId node) const;
  // Gradient of a node; zeros of the node's shape if nothing reached it.
  Tensor grad(NodeId node) const;

  std::size_t num_nodes() const { return slots_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Slot {
    std::vector<std::int64_t> shape;
    std::vector<double> grad;
    bool touched = false;
  };
  struct Step {
    NodeId out;
    std::function<void(Graph&, const Tensor&)> fn;
  };

  Slot& slot(NodeId node);
  const Slot& slot(NodeId node) const;

  std::vector<Slot> slots_;
  std::vector<Step> tape_;
  bool consumed_ = false;
};

}  // namespace lgg
