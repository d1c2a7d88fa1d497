#include "hyrsm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hyrsm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_pair(const Tensor& x, const Tensor& y) {
  require_rank(x, 2, "metric");
  require_rank(y, 2, "metric");
  if (x.shape[0] == 0 || y.shape[0] == 0) {
    throw DomainError("metric: empty sequence, " + shape_str(x) + " vs " + shape_str(y));
  }
  if (x.cols() != y.cols()) {
    throw DimensionError("metric: channel mismatch " + shape_str(x) + " vs " + shape_str(y));
  }
}

struct Selection {
  std::size_t a, b;  // row of x, row of y
  double value;
};

// One additive term group: sum of the selected pair distances, then scaled.
struct Group {
  std::vector<Selection> terms;
  double scale = 1.0;
};

struct Plan {
  std::vector<Group> groups;
  double margin = kInf;
};

// Row minima of D (argmin over columns, ties toward the lowest column).
// Also tracks the smallest winner-to-runner-up gap.
std::vector<Selection> row_minima(const DistanceMatrix& D, double& margin) {
  std::vector<Selection> out;
  out.reserve(D.rows);
  for (std::size_t a = 0; a < D.rows; ++a) {
    std::size_t best = 0;
    double bestv = D.at(a, 0);
    double second = kInf;
    for (std::size_t b = 1; b < D.cols; ++b) {
      const double v = D.at(a, b);
      if (v < bestv) {
        second = bestv;
        bestv = v;
        best = b;
      } else {
        second = std::min(second, v);
      }
    }
    if (D.cols > 1) margin = std::min(margin, second - bestv);
    out.push_back({a, best, bestv});
  }
  return out;
}

std::vector<Selection> col_minima(const DistanceMatrix& D, double& margin) {
  std::vector<Selection> out;
  out.reserve(D.cols);
  for (std::size_t b = 0; b < D.cols; ++b) {
    std::size_t best = 0;
    double bestv = D.at(0, b);
    double second = kInf;
    for (std::size_t a = 1; a < D.rows; ++a) {
      const double v = D.at(a, b);
      if (v < bestv) {
        second = bestv;
        bestv = v;
        best = a;
      } else {
        second = std::min(second, v);
      }
    }
    if (D.rows > 1) margin = std::min(margin, second - bestv);
    out.push_back({best, b, bestv});
  }
  return out;
}

// Mean of the minima as one group, summands in ascending value order so the
// result is invariant under frame permutations of either argument.
Group mean_min_group(std::vector<Selection> minima) {
  std::stable_sort(minima.begin(), minima.end(),
                   [](const Selection& l, const Selection& r) { return l.value < r.value; });
  Group g;
  g.scale = 1.0 / static_cast<double>(minima.size());
  g.terms = std::move(minima);
  return g;
}

Selection max_of(const std::vector<Selection>& sel, double& margin) {
  std::size_t best = 0;
  double second = -kInf;
  for (std::size_t i = 1; i < sel.size(); ++i) {
    if (sel[i].value > sel[best].value) {
      second = sel[best].value;
      best = i;
    } else {
      second = std::max(second, sel[i].value);
    }
  }
  if (sel.size() > 1) margin = std::min(margin, sel[best].value - second);
  return sel[best];
}

Plan plan_diagonal(const DistanceMatrix& D) {
  if (D.rows != D.cols) {
    throw DomainError("Diagonal metric requires equal lengths, got " + std::to_string(D.rows) +
                      " vs " + std::to_string(D.cols));
  }
  Plan plan;
  Group g;
  g.scale = 1.0 / static_cast<double>(D.rows);
  for (std::size_t t = 0; t < D.rows; ++t) g.terms.push_back({t, t, D.at(t, t)});
  plan.groups.push_back(std::move(g));
  return plan;
}

Plan plan_mhm(const DistanceMatrix& D, Direction dir) {
  Plan plan;
  if (dir == Direction::Forward || dir == Direction::Bidirectional) {
    plan.groups.push_back(mean_min_group(row_minima(D, plan.margin)));
  }
  if (dir == Direction::Backward || dir == Direction::Bidirectional) {
    plan.groups.push_back(mean_min_group(col_minima(D, plan.margin)));
  }
  return plan;
}

Plan plan_hausdorff(const DistanceMatrix& D, Direction dir) {
  Plan plan;
  Selection fwd{0, 0, -kInf}, bwd{0, 0, -kInf};
  if (dir != Direction::Backward) fwd = max_of(row_minima(D, plan.margin), plan.margin);
  if (dir != Direction::Forward) bwd = max_of(col_minima(D, plan.margin), plan.margin);
  Selection pick = fwd;
  if (dir == Direction::Backward) {
    pick = bwd;
  } else if (dir == Direction::Bidirectional) {
    plan.margin = std::min(plan.margin, std::abs(fwd.value - bwd.value));
    if (bwd.value > fwd.value) pick = bwd;
  }
  Group g;
  g.terms.push_back(pick);
  plan.groups.push_back(std::move(g));
  return plan;
}

Plan plan_dtw(const DistanceMatrix& D) {
  const std::size_t n = D.rows, m = D.cols;
  std::vector<double> cost(n * m);
  Plan plan;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double prev;
      if (i == 0 && j == 0) {
        prev = 0.0;
      } else if (i == 0) {
        prev = cost[j - 1];
      } else if (j == 0) {
        prev = cost[(i - 1) * m];
      } else {
        const double diag = cost[(i - 1) * m + (j - 1)];
        const double up = cost[(i - 1) * m + j];
        const double left = cost[i * m + (j - 1)];
        prev = std::min(diag, std::min(up, left));
        double lo = kInf, hi = -kInf;
        for (double c : {diag, up, left}) {
          if (c < lo) {
            hi = lo;
            lo = c;
          } else {
            hi = std::min(hi, c);
          }
        }
        plan.margin = std::min(plan.margin, hi - lo);
      }
      cost[i * m + j] = D.at(i, j) + prev;
    }
  }

  // Backtrack, preferring diagonal, then up, then left on exact ties.
  std::vector<Selection> path;
  std::size_t i = n - 1, j = m - 1;
  path.push_back({i, j, D.at(i, j)});
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = cost[(i - 1) * m + (j - 1)];
      const double up = cost[(i - 1) * m + j];
      const double left = cost[i * m + (j - 1)];
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    path.push_back({i, j, D.at(i, j)});
  }
  std::reverse(path.begin(), path.end());

  Group g;
  g.terms = std::move(path);
  plan.groups.push_back(std::move(g));
  return plan;
}

Plan make_plan(const Metric& metric, const DistanceMatrix& D) {
  switch (metric.kind) {
    case MetricKind::Diagonal:
      return plan_diagonal(D);
    case MetricKind::PlainDTW:
      return plan_dtw(D);
    case MetricKind::Hausdorff:
      return plan_hausdorff(D, metric.direction);
    case MetricKind::DirectedMHM:
      return plan_mhm(D, metric.direction);
    case MetricKind::BiMHM:
      return plan_mhm(D, Direction::Bidirectional);
  }
  throw UsageError("metric: unknown kind");
}

double plan_value(const Plan& plan) {
  double total = 0.0;
  bool first = true;
  for (const Group& g : plan.groups) {
    double acc = 0.0;
    for (const Selection& s : g.terms) acc += s.value;
    acc *= g.scale;
    total = first ? acc : total + acc;
    first = false;
  }
  return total;
}

}  // namespace

std::vector<std::string> metric_names() {
  return {"Diagonal", "PlainDTW", "Hausdorff", "DirectedMHM", "BiMHM"};
}

MetricKind metric_kind_from_name(const std::string& name) {
  if (name == "Diagonal") return MetricKind::Diagonal;
  if (name == "PlainDTW") return MetricKind::PlainDTW;
  if (name == "Hausdorff") return MetricKind::Hausdorff;
  if (name == "DirectedMHM") return MetricKind::DirectedMHM;
  if (name == "BiMHM") return MetricKind::BiMHM;
  std::string valid;
  for (const std::string& n : metric_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw UsageError("unknown metric '" + name + "', valid names: " + valid);
}

std::string metric_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::Diagonal:
      return "Diagonal";
    case MetricKind::PlainDTW:
      return "PlainDTW";
    case MetricKind::Hausdorff:
      return "Hausdorff";
    case MetricKind::DirectedMHM:
      return "DirectedMHM";
    case MetricKind::BiMHM:
      return "BiMHM";
  }
  return "?";
}

Direction direction_from_name(const std::string& name) {
  if (name == "forward") return Direction::Forward;
  if (name == "backward") return Direction::Backward;
  if (name == "bidirectional") return Direction::Bidirectional;
  throw UsageError("unknown direction '" + name +
                   "', valid names: forward, backward, bidirectional");
}

std::string direction_name(Direction d) {
  switch (d) {
    case Direction::Forward:
      return "forward";
    case Direction::Backward:
      return "backward";
    case Direction::Bidirectional:
      return "bidirectional";
  }
  return "?";
}

DistanceMatrix cosine_matrix(const Tensor& x, const Tensor& y) {
  validate_pair(x, y);
  const std::size_t n = x.shape[0], m = y.shape[0], c = x.cols();
  DistanceMatrix D;
  D.rows = n;
  D.cols = m;
  D.d.resize(n * m);
  std::vector<double> xa(c), yb(c);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t i = 0; i < c; ++i) xa[i] = x.values[a * c + i];
    for (std::size_t b = 0; b < m; ++b) {
      for (std::size_t i = 0; i < c; ++i) yb[i] = y.values[b * c + i];
      D.at(a, b) = cosine_distance_value(xa, yb);
    }
  }
  return D;
}

double metric_value(const Metric& metric, const Tensor& x, const Tensor& y,
                    double* min_margin) {
  const DistanceMatrix D = cosine_matrix(x, y);
  const Plan plan = make_plan(metric, D);
  if (min_margin) *min_margin = plan.margin;
  return plan_value(plan);
}

Tensor metric_node(Tape& tape, const Metric& metric, const Tensor& x, const Tensor& y,
                   double* min_margin) {
  const DistanceMatrix D = cosine_matrix(x, y);
  const Plan plan = make_plan(metric, D);
  if (min_margin) *min_margin = plan.margin;

  Tensor total;
  bool first_group = true;
  for (const Group& g : plan.groups) {
    Tensor acc;
    bool first = true;
    for (const Selection& s : g.terms) {
      Tensor d = cosine_distance(tape, row_slice(tape, x, s.a), row_slice(tape, y, s.b));
      acc = first ? d : add(tape, acc, d);
      first = false;
    }
    Tensor scaled = g.scale == 1.0 ? acc : scale(tape, acc, g.scale);
    total = first_group ? scaled : add(tape, total, scaled);
    first_group = false;
  }
  return total;
}

double hausdorff(const Tensor& x, const Tensor& y) {
  return metric_value({MetricKind::Hausdorff, Direction::Bidirectional}, x, y);
}

double directed_mhm(const Tensor& x, const Tensor& y) {
  return metric_value({MetricKind::DirectedMHM, Direction::Forward}, x, y);
}

double bi_mhm(const Tensor& x, const Tensor& y) {
  return metric_value({MetricKind::BiMHM, Direction::Bidirectional}, x, y);
}

double diagonal(const Tensor& x, const Tensor& y) {
  return metric_value({MetricKind::Diagonal, Direction::Forward}, x, y);
}

double plain_dtw(const Tensor& x, const Tensor& y) {
  return metric_value({MetricKind::PlainDTW, Direction::Forward}, x, y);
}

}  // namespace hyrsm
