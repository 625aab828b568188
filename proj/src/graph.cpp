#include "lgg/graph.hpp"

#include <string>

#include "lgg/errors.hpp"

namespace lgg {

NodeId Graph::make_node(const std::vector<std::int64_t>& shape) {
  if (consumed_) throw Error("graph already consumed by backward()");
  Slot s;
  s.shape = shape;
  slots_.push_back(std::move(s));
  return static_cast<NodeId>(slots_.size() - 1);
}

NodeId Graph::track(Tensor& t) {
  if (t.node == kNoNode) t.node = make_node(t.shape());
  return t.node;
}

void Graph::record(NodeId out, std::function<void(Graph&, const Tensor&)> fn) {
  if (consumed_) throw Error("graph already consumed by backward()");
  slot(out);  // range check
  tape_.push_back(Step{out, std::move(fn)});
}

Graph::Slot& Graph::slot(NodeId node) {
  if (node < 0 || static_cast<std::size_t>(node) >= slots_.size()) {
    throw Error("invalid graph node id " + std::to_string(node));
  }
  return slots_[static_cast<std::size_t>(node)];
}

const Graph::Slot& Graph::slot(NodeId node) const {
  return const_cast<Graph*>(this)->slot(node);
}

void Graph::add_grad(NodeId node, const Tensor& contribution) {
  Slot& s = slot(node);
  if (contribution.shape() != s.shape) {
    throw ShapeError("gradient shape " + contribution.shape_str() + " does not match node shape " +
                     shape_to_string(s.shape));
  }
  add_grad_raw(node, contribution.data(), contribution.size());
}

void Graph::add_grad_raw(NodeId node, const double* data, std::int64_t n) {
  Slot& s = slot(node);
  if (n != shape_product(s.shape)) throw ShapeError("gradient length mismatch");
  if (!s.touched) {
    s.grad.assign(static_cast<std::size_t>(n), 0.0);
    s.touched = true;
  }
  for (std::int64_t i = 0; i < n; ++i) s.grad[static_cast<std::size_t>(i)] += data[i];
}

bool Graph::touched(NodeId node) const { return slot(node).touched; }

Tensor Graph::grad(NodeId node) const {
  const Slot& s = slot(node);
  if (!s.touched) return Tensor(s.shape);
  return Tensor(s.shape, s.grad);
}

void Graph::backward(const Tensor& loss) {
  if (consumed_) throw Error("graph already consumed by backward()");
  if (loss.node == kNoNode) throw Error("loss tensor is not part of this graph");
  if (loss.size() != 1) throw ShapeError("backward requires a scalar loss, got " + loss.shape_str());
  consumed_ = true;

  Slot& ls = slot(loss.node);
  ls.grad.assign(1, 1.0);
  ls.touched = true;

  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
    const Slot& out = slot(it->out);
    if (!out.touched) continue;  // nothing flowed into this op's output
    Tensor upstream(out.shape, out.grad);
    it->fn(*this, upstream);
  }
}

}  // namespace lgg
