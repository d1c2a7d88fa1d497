#pragma once

#include <string>
#include <vector>

#include "hyrsm/ops.hpp"
#include "hyrsm/tape.hpp"
#include "hyrsm/tensor.hpp"

namespace hyrsm {

// Temporal set-matching distances between two frame sequences X [N_i x C] and
// Y [N_q x C]. The per-frame ground distance is always cosine distance.
enum class MetricKind { Diagonal, PlainDTW, Hausdorff, DirectedMHM, BiMHM };

enum class Direction { Forward, Backward, Bidirectional };

struct Metric {
  MetricKind kind = MetricKind::BiMHM;
  // Ignored by Diagonal and BiMHM. For Hausdorff: Forward/Backward pick one
  // directed max-min term, Bidirectional takes the max of both. For
  // DirectedMHM: Forward/Backward pick the mean-min direction, Bidirectional
  // sums both and is identical to BiMHM.
  Direction direction = Direction::Forward;
};

std::vector<std::string> metric_names();
MetricKind metric_kind_from_name(const std::string& name);
std::string metric_name(MetricKind kind);
Direction direction_from_name(const std::string& name);
std::string direction_name(Direction d);

struct DistanceMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> d;
  double at(std::size_t r, std::size_t c) const { return d[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return d[r * cols + c]; }
};

// Pairwise cosine distances; entries lie in [0, 2].
DistanceMatrix cosine_matrix(const Tensor& x, const Tensor& y);

// Plain double evaluation. When `min_margin` is given it receives the
// smallest gap between a winning selection (argmin/argmax or DTW step) and
// its runner-up, so callers can detect near-ties; +inf when the metric makes
// no selections.
double metric_value(const Metric& metric, const Tensor& x, const Tensor& y,
                    double* min_margin = nullptr);

// Differentiable evaluation on a tape. Selections are made on the plain
// double matrix; gradients flow only through the selected frame pairs, with
// ties resolved toward the lowest frame index. The forward value matches
// metric_value bit for bit.
Tensor metric_node(Tape& tape, const Metric& metric, const Tensor& x, const Tensor& y,
                   double* min_margin = nullptr);

// Named convenience forms.
double hausdorff(const Tensor& x, const Tensor& y);     // bidirectional max-min
double directed_mhm(const Tensor& x, const Tensor& y);  // forward mean-min
double bi_mhm(const Tensor& x, const Tensor& y);        // sum of both mean-min terms
double diagonal(const Tensor& x, const Tensor& y);      // mean of aligned frame distances
double plain_dtw(const Tensor& x, const Tensor& y);     // unnormalized DTW cost

// Exhaustive re-computation used as an independent reference: no code shared
// with the fast paths above. Sequences longer than 8 frames are refused.
double oracle_metric(const Metric& metric, const Tensor& x, const Tensor& y);

}  // namespace hyrsm
