#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hyrsm/tensor.hpp"

namespace hyrsm {

// Per-node gradient buffers, indexed by node id. A slot stays empty until
// some backward rule first touches it.
using GradTable = std::vector<std::vector<double>>;

// A backward rule receives the gradient of the loss w.r.t. its output and
// scatters contributions into the parents' slots.
using BackwardFn = std::function<void(const std::vector<double>& gout, GradTable& grads)>;

class Gradients {
 public:
  // Gradient w.r.t. a tensor watched on the originating tape; zeros when no
  // gradient reached it.
  Tensor wrt(const Tensor& t) const;

  bool finite() const;

 private:
  friend class Tape;
  Gradients(GradTable table, std::uint64_t tape_id)
      : table_(std::move(table)), tape_id_(tape_id) {}
  GradTable table_;
  std::uint64_t tape_id_;
};

// Write-once record of one forward pass. Operations append nodes in execution
// order; backward replays them once in reverse. A fresh tape is made per
// episode (or per forward pass under test) and is confined to one thread.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::uint64_t id() const { return id_; }

  // Registers a tracked leaf copy of `t` on this tape.
  Tensor watch(const Tensor& t);

  // Appends an operation node. `parents` may contain kNoNode entries for
  // constant inputs; they are kept for introspection but receive no gradient.
  NodeId record(std::vector<NodeId> parents, std::size_t out_size, BackwardFn fn);

  // True when `t` is a node of this tape (so gradients may flow through it).
  bool tracks(const Tensor& t) const;

  // Runs the reverse sweep from a scalar loss. May be called exactly once;
  // recording further operations afterwards is also an error.
  Gradients backward(const Tensor& loss);

  std::size_t node_count() const { return nodes_.size(); }

  // Fetches (and zero-initializes on first touch) a parent's gradient slot.
  static std::vector<double>& slot(GradTable& grads, NodeId id, std::size_t n);

 private:
  struct Node {
    std::vector<NodeId> parents;
    std::size_t size;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::uint64_t id_;
  bool consumed_ = false;
};

}  // namespace hyrsm
