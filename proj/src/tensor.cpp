#include "hyrsm/tensor.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

namespace hyrsm {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t p = 1;
  for (std::size_t d : shape) p *= d;
  return p;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shp, std::vector<double> vals)
    : shape(std::move(shp)), values(std::move(vals)) {
  if (shape.empty()) throw DimensionError("tensor rank must be at least 1");
  if (product(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " stored values");
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shp) {
  std::size_t n = product(shp);
  return Tensor(std::move(shp), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> shp, double value) {
  std::size_t n = product(shp);
  return Tensor(std::move(shp), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> vals) {
  return Tensor({rows, cols}, std::move(vals));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows(): tensor " + shape_str(*this) + " is not rank 2");
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols(): tensor " + shape_str(*this) + " is not rank 2");
  return shape[1];
}

double& Tensor::at(std::size_t r, std::size_t c) {
  return values[r * cols() + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return values[r * cols() + c];
}

double Tensor::item() const {
  if (size() != 1) throw UsageError("item(): tensor " + shape_str(*this) + " is not a scalar");
  return values[0];
}

bool Tensor::finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << "x";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

std::string shape_str(const Tensor& t) { return shape_str(t.shape); }

void require_rank(const Tensor& t, std::size_t rank, const char* who) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(who) + ": expected rank " + std::to_string(rank) +
                         " tensor, got " + shape_str(t));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(who) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
  }
}

void require_nonempty(const Tensor& t, const char* who) {
  if (t.size() == 0) throw DomainError(std::string(who) + ": empty input " + shape_str(t));
}

Tensor random_uniform(std::vector<std::size_t> shape, Rng& rng, double lo, double hi) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values) v = rng.uniform(lo, hi);
  return t;
}

Tensor random_normal(std::vector<std::size_t> shape, Rng& rng, double scale) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values) v = scale * rng.normal();
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
  }
  return worst;
}

}  // namespace hyrsm
