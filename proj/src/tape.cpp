#include "hyrsm/tape.hpp"

#include <atomic>
#include <cmath>

namespace hyrsm {

namespace {
std::atomic<std::uint64_t> g_next_tape_id{1};
}

Tensor Gradients::wrt(const Tensor& t) const {
  if (t.tape_id != tape_id_ || t.node < 0 ||
      static_cast<std::size_t>(t.node) >= table_.size()) {
    throw UsageError("Gradients::wrt: tensor was not watched on the originating tape");
  }
  Tensor g = Tensor::zeros(t.shape);
  const std::vector<double>& slot = table_[static_cast<std::size_t>(t.node)];
  if (!slot.empty()) {
    if (slot.size() != g.values.size()) {
      throw UsageError("Gradients::wrt: gradient size mismatch");
    }
    g.values = slot;
  }
  return g;
}

bool Gradients::finite() const {
  for (const auto& slot : table_) {
    for (double v : slot) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {}

Tensor Tape::watch(const Tensor& t) {
  Tensor copy = t;
  copy.tape_id = id_;
  copy.node = record({}, copy.size(), nullptr);
  return copy;
}

NodeId Tape::record(std::vector<NodeId> parents, std::size_t out_size, BackwardFn fn) {
  if (consumed_) {
    throw UsageError("tape is write-once per forward pass: cannot record after backward");
  }
  nodes_.push_back(Node{std::move(parents), out_size, std::move(fn)});
  return static_cast<NodeId>(nodes_.size() - 1);
}

bool Tape::tracks(const Tensor& t) const {
  return t.tape_id == id_ && t.node >= 0 &&
         static_cast<std::size_t>(t.node) < nodes_.size();
}

Gradients Tape::backward(const Tensor& loss) {
  if (consumed_) throw UsageError("backward may be invoked exactly once per tape");
  if (!tracks(loss)) throw UsageError("backward: loss tensor does not belong to this tape");
  if (loss.size() != 1) {
    throw UsageError("backward: loss must be a scalar, got " + shape_str(loss));
  }
  consumed_ = true;

  GradTable grads(nodes_.size());
  grads[static_cast<std::size_t>(loss.node)] = {1.0};
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    const Node& node = nodes_[i];
    if (!node.backward) continue;
    const std::vector<double>& gout = grads[i];
    if (gout.empty()) continue;
    node.backward(gout, grads);
  }
  return Gradients(std::move(grads), id_);
}

std::vector<double>& Tape::slot(GradTable& grads, NodeId id, std::size_t n) {
  auto& s = grads[static_cast<std::size_t>(id)];
  if (s.empty()) s.assign(n, 0.0);
  return s;
}

}  // namespace hyrsm
