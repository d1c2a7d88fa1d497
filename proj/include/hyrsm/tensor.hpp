#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyrsm/error.hpp"
#include "hyrsm/rng.hpp"

namespace hyrsm {

using NodeId = std::int64_t;
inline constexpr NodeId kNoNode = -1;

// Dense row-major f64 tensor. Rank 1 and rank 2 cover everything the relation
// module and the metrics need; scalars are rank-1 tensors of size 1. `node`
// and `tape_id` tie a value to the tape that produced it; a tensor whose tape
// id does not match the tape an operation runs on is treated as a constant.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  NodeId node = kNoNode;
  std::uint64_t tape_id = 0;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shp, std::vector<double> vals);

  static Tensor zeros(std::vector<std::size_t> shp);
  static Tensor full(std::vector<std::size_t> shp, double value);
  static Tensor scalar(double v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> vals);

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  // Value of a size-1 tensor.
  double item() const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool finite() const;
};

std::string shape_str(const std::vector<std::size_t>& shape);
std::string shape_str(const Tensor& t);

void require_rank(const Tensor& t, std::size_t rank, const char* who);
void require_same_shape(const Tensor& a, const Tensor& b, const char* who);
void require_nonempty(const Tensor& t, const char* who);

Tensor random_uniform(std::vector<std::size_t> shape, Rng& rng, double lo, double hi);
Tensor random_normal(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace hyrsm
