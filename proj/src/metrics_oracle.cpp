#include <cmath>
#include <limits>
#include <vector>

#include "hyrsm/metrics.hpp"

// Exhaustive reference evaluation, deliberately written from the definitions
// with its own ground-distance routine and no code shared with metrics.cpp.

namespace hyrsm {

namespace {

double ref_cos_distance(const Tensor& x, std::size_t a, const Tensor& y, std::size_t b) {
  const std::size_t c = x.cols();
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    dot += x.values[a * c + i] * y.values[b * c + i];
    nx += x.values[a * c + i] * x.values[a * c + i];
    ny += y.values[b * c + i] * y.values[b * c + i];
  }
  const double na = std::sqrt(nx);
  const double nb = std::sqrt(ny);
  if (na < 1e-12 || nb < 1e-12) return 1.0;
  double s = dot / (na * nb);
  if (s > 1.0) s = 1.0;
  if (s < -1.0) s = -1.0;
  return 1.0 - s;
}

double ref_directed_max_min(const Tensor& x, const Tensor& y) {
  double outer = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < x.shape[0]; ++a) {
    double inner = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < y.shape[0]; ++b) {
      inner = std::min(inner, ref_cos_distance(x, a, y, b));
    }
    outer = std::max(outer, inner);
  }
  return outer;
}

double ref_directed_mean_min(const Tensor& x, const Tensor& y) {
  double acc = 0.0;
  for (std::size_t a = 0; a < x.shape[0]; ++a) {
    double inner = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < y.shape[0]; ++b) {
      inner = std::min(inner, ref_cos_distance(x, a, y, b));
    }
    acc += inner;
  }
  return acc / static_cast<double>(x.shape[0]);
}

// Minimum over every monotone warping path from (0,0) to (n-1,m-1).
void ref_enumerate_paths(const Tensor& x, const Tensor& y, std::size_t i, std::size_t j,
                         double acc, double& best) {
  acc += ref_cos_distance(x, i, y, j);
  if (i + 1 == x.shape[0] && j + 1 == y.shape[0]) {
    best = std::min(best, acc);
    return;
  }
  if (i + 1 < x.shape[0] && j + 1 < y.shape[0]) {
    ref_enumerate_paths(x, y, i + 1, j + 1, acc, best);
  }
  if (i + 1 < x.shape[0]) ref_enumerate_paths(x, y, i + 1, j, acc, best);
  if (j + 1 < y.shape[0]) ref_enumerate_paths(x, y, i, j + 1, acc, best);
}

}  // namespace

double oracle_metric(const Metric& metric, const Tensor& x, const Tensor& y) {
  require_rank(x, 2, "oracle_metric");
  require_rank(y, 2, "oracle_metric");
  if (x.shape[0] == 0 || y.shape[0] == 0) throw DomainError("oracle_metric: empty sequence");
  if (x.cols() != y.cols()) {
    throw DimensionError("oracle_metric: channel mismatch " + shape_str(x) + " vs " +
                         shape_str(y));
  }
  if (x.shape[0] > 8 || y.shape[0] > 8) {
    throw UsageError("oracle_metric: sequences longer than 8 frames are not supported");
  }

  switch (metric.kind) {
    case MetricKind::Diagonal: {
      if (x.shape[0] != y.shape[0]) {
        throw DomainError("oracle_metric: Diagonal requires equal lengths");
      }
      double acc = 0.0;
      for (std::size_t t = 0; t < x.shape[0]; ++t) acc += ref_cos_distance(x, t, y, t);
      return acc / static_cast<double>(x.shape[0]);
    }
    case MetricKind::PlainDTW: {
      double best = std::numeric_limits<double>::infinity();
      ref_enumerate_paths(x, y, 0, 0, 0.0, best);
      return best;
    }
    case MetricKind::Hausdorff: {
      if (metric.direction == Direction::Forward) return ref_directed_max_min(x, y);
      if (metric.direction == Direction::Backward) return ref_directed_max_min(y, x);
      return std::max(ref_directed_max_min(x, y), ref_directed_max_min(y, x));
    }
    case MetricKind::DirectedMHM: {
      if (metric.direction == Direction::Forward) return ref_directed_mean_min(x, y);
      if (metric.direction == Direction::Backward) return ref_directed_mean_min(y, x);
      return ref_directed_mean_min(x, y) + ref_directed_mean_min(y, x);
    }
    case MetricKind::BiMHM:
      return ref_directed_mean_min(x, y) + ref_directed_mean_min(y, x);
  }
  throw UsageError("oracle_metric: unknown kind");
}

}  // namespace hyrsm
