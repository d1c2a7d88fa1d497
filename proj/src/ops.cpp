#include "hyrsm/ops.hpp"

#include <cmath>
#include <utility>

namespace hyrsm {

namespace {

NodeId parent_of(const Tape& tape, const Tensor& t) {
  return tape.tracks(t) ? t.node : kNoNode;
}

Tensor make_output(Tape& tape, std::vector<std::size_t> shape, std::vector<double> values,
                   std::vector<NodeId> parents, BackwardFn fn) {
  Tensor out(std::move(shape), std::move(values));
  out.tape_id = tape.id();
  out.node = tape.record(std::move(parents), out.size(), std::move(fn));
  return out;
}

constexpr double kInvSqrt2 = 0.70710678118654752440084436210485;
constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a) + " vs " +
                         shape_str(b));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a.values[i * k + p];
      const double* brow = &b.values[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }

  NodeId pa = parent_of(tape, a), pb = parent_of(tape, b);
  std::vector<double> av = a.values, bv = b.values;
  return make_output(
      tape, {m, n}, std::move(out), {pa, pb},
      [pa, pb, m, k, n, av = std::move(av), bv = std::move(bv)](const std::vector<double>& g,
                                                               GradTable& grads) {
        if (pa != kNoNode) {
          auto& ga = Tape::slot(grads, pa, m * k);
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
              ga[i * k + p] += acc;
            }
          }
        }
        if (pb != kNoNode) {
          auto& gb = Tape::slot(grads, pb, k * n);
          for (std::size_t p = 0; p < k; ++p) {
            for (std::size_t j = 0; j < n; ++j) {
              double acc = 0.0;
              for (std::size_t i = 0; i < m; ++i) acc += av[i * k + p] * g[i * n + j];
              gb[p * n + j] += acc;
            }
          }
        }
      });
}

Tensor softmax(Tape& tape, const Tensor& x) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw DimensionError("softmax: expected rank 1 or 2, got " + shape_str(x));
  }
  require_nonempty(x, "softmax");
  const std::size_t cols = x.shape.back();
  const std::size_t rows = x.size() / cols;
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = &x.values[r * cols];
    double* o = &out[r * cols];
    double mx = in[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      o[j] = std::exp(in[j] - mx);
      denom += o[j];
    }
    for (std::size_t j = 0; j < cols; ++j) o[j] /= denom;
  }

  NodeId px = parent_of(tape, x);
  std::vector<double> saved = out;
  return make_output(
      tape, x.shape, std::move(out), {px},
      [px, rows, cols, saved = std::move(saved)](const std::vector<double>& g, GradTable& grads) {
        if (px == kNoNode) return;
        auto& gx = Tape::slot(grads, px, rows * cols);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* s = &saved[r * cols];
          const double* go = &g[r * cols];
          double dot = 0.0;
          for (std::size_t j = 0; j < cols; ++j) dot += go[j] * s[j];
          for (std::size_t j = 0; j < cols; ++j) gx[r * cols + j] += s[j] * (go[j] - dot);
        }
      });
}

Tensor mean_axis(Tape& tape, const Tensor& m, std::size_t axis) {
  require_rank(m, 2, "mean_axis");
  if (axis > 1) throw UsageError("mean_axis: axis must be 0 or 1");
  const std::size_t rows = m.rows(), cols = m.cols();
  if (rows == 0 || cols == 0) throw DomainError("mean_axis: empty input " + shape_str(m));
  NodeId pm = parent_of(tape, m);
  if (axis == 0) {
    const double inv = 1.0 / static_cast<double>(rows);
    std::vector<double> out(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) out[c] += m.values[r * cols + c];
    }
    for (std::size_t c = 0; c < cols; ++c) out[c] *= inv;
    return make_output(tape, {cols}, std::move(out), {pm},
                       [pm, rows, cols, inv](const std::vector<double>& g, GradTable& grads) {
                         if (pm == kNoNode) return;
                         auto& gm = Tape::slot(grads, pm, rows * cols);
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t c = 0; c < cols; ++c) gm[r * cols + c] += g[c] * inv;
                         }
                       });
  }
  const double inv = 1.0 / static_cast<double>(cols);
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += m.values[r * cols + c];
    out[r] = acc * inv;
  }
  return make_output(tape, {rows}, std::move(out), {pm},
                     [pm, rows, cols, inv](const std::vector<double>& g, GradTable& grads) {
                       if (pm == kNoNode) return;
                       auto& gm = Tape::slot(grads, pm, rows * cols);
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t c = 0; c < cols; ++c) gm[r * cols + c] += g[r] * inv;
                       }
                     });
}

Tensor global_avg_pool(Tape& tape, const Tensor& f) {
  require_rank(f, 2, "global_avg_pool");
  if (f.shape[0] == 0) throw DomainError("global_avg_pool: empty sequence " + shape_str(f));
  return mean_axis(tape, f, 0);
}

double cosine_distance_value(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na2 = 0.0, nb2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na2 += a[i] * a[i];
    nb2 += b[i] * b[i];
  }
  const double na = std::sqrt(na2), nb = std::sqrt(nb2);
  if (na < 1e-12 || nb < 1e-12) return 1.0;
  double s = dot / (na * nb);
  if (s > 1.0) s = 1.0;
  if (s < -1.0) s = -1.0;
  return 1.0 - s;
}

Tensor cosine_distance(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 1, "cosine_distance");
  require_rank(b, 1, "cosine_distance");
  require_same_shape(a, b, "cosine_distance");
  require_nonempty(a, "cosine_distance");

  const std::size_t n = a.size();
  double dot = 0.0, na2 = 0.0, nb2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += a.values[i] * b.values[i];
    na2 += a.values[i] * a.values[i];
    nb2 += b.values[i] * b.values[i];
  }
  const double na = std::sqrt(na2), nb = std::sqrt(nb2);
  NodeId pa = parent_of(tape, a), pb = parent_of(tape, b);

  const bool degenerate = (na < 1e-12 || nb < 1e-12);
  double s = degenerate ? 0.0 : dot / (na * nb);
  const bool clamped = (!degenerate && (s > 1.0 || s < -1.0));
  if (s > 1.0) s = 1.0;
  if (s < -1.0) s = -1.0;
  const double value = degenerate ? 1.0 : 1.0 - s;

  if (degenerate || clamped) {
    return make_output(tape, {1}, {value}, {pa, pb}, [](const std::vector<double>&, GradTable&) {});
  }

  std::vector<double> av = a.values, bv = b.values;
  return make_output(
      tape, {1}, {value}, {pa, pb},
      [pa, pb, n, s, na, nb, av = std::move(av), bv = std::move(bv)](const std::vector<double>& g,
                                                                    GradTable& grads) {
        const double go = g[0];
        const double inv_nanb = 1.0 / (na * nb);
        if (pa != kNoNode) {
          auto& ga = Tape::slot(grads, pa, n);
          const double inv_na2 = 1.0 / (na * na);
          for (std::size_t i = 0; i < n; ++i) {
            ga[i] += -go * (bv[i] * inv_nanb - s * av[i] * inv_na2);
          }
        }
        if (pb != kNoNode) {
          auto& gb = Tape::slot(grads, pb, n);
          const double inv_nb2 = 1.0 / (nb * nb);
          for (std::size_t i = 0; i < n; ++i) {
            gb[i] += -go * (av[i] * inv_nanb - s * bv[i] * inv_nb2);
          }
        }
      });
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.values[i] + b.values[i];
  NodeId pa = parent_of(tape, a), pb = parent_of(tape, b);
  return make_output(tape, a.shape, std::move(out), {pa, pb},
                     [pa, pb, n](const std::vector<double>& g, GradTable& grads) {
                       if (pa != kNoNode) {
                         auto& ga = Tape::slot(grads, pa, n);
                         for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
                       }
                       if (pb != kNoNode) {
                         auto& gb = Tape::slot(grads, pb, n);
                         for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
                       }
                     });
}

Tensor multiply(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "multiply");
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.values[i] * b.values[i];
  NodeId pa = parent_of(tape, a), pb = parent_of(tape, b);
  std::vector<double> av = a.values, bv = b.values;
  return make_output(tape, a.shape, std::move(out), {pa, pb},
                     [pa, pb, n, av = std::move(av), bv = std::move(bv)](
                         const std::vector<double>& g, GradTable& grads) {
                       if (pa != kNoNode) {
                         auto& ga = Tape::slot(grads, pa, n);
                         for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
                       }
                       if (pb != kNoNode) {
                         auto& gb = Tape::slot(grads, pb, n);
                         for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * av[i];
                       }
                     });
}

Tensor scale(Tape& tape, const Tensor& a, double c) {
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.values[i] * c;
  NodeId pa = parent_of(tape, a);
  return make_output(tape, a.shape, std::move(out), {pa},
                     [pa, c, n](const std::vector<double>& g, GradTable& grads) {
                       if (pa == kNoNode) return;
                       auto& ga = Tape::slot(grads, pa, n);
                       for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * c;
                     });
}

Tensor concat(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DomainError("concat: no parts given");
  const std::size_t rank = parts[0].rank();
  if (rank != 1 && rank != 2) {
    throw DimensionError("concat: expected rank 1 or 2, got " + shape_str(parts[0]));
  }
  const std::size_t rows = rank == 2 ? parts[0].shape[0] : 1;
  std::size_t total_cols = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != rank || (rank == 2 && p.shape[0] != rows)) {
      throw DimensionError("concat: incompatible part " + shape_str(p) + " with " +
                           shape_str(parts[0]));
    }
    total_cols += p.shape.back();
  }

  std::vector<double> out(rows * total_cols);
  std::vector<NodeId> parents;
  std::vector<std::size_t> widths;
  parents.reserve(parts.size());
  widths.reserve(parts.size());
  std::size_t col0 = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.shape.back();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < w; ++c) out[r * total_cols + col0 + c] = p.values[r * w + c];
    }
    parents.push_back(parent_of(tape, p));
    widths.push_back(w);
    col0 += w;
  }

  std::vector<std::size_t> shape =
      rank == 2 ? std::vector<std::size_t>{rows, total_cols} : std::vector<std::size_t>{total_cols};
  std::vector<NodeId> parents_copy = parents;
  return make_output(tape, std::move(shape), std::move(out), std::move(parents_copy),
                     [parents, widths, rows, total_cols](const std::vector<double>& g,
                                                         GradTable& grads) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < parents.size(); ++k) {
                         const std::size_t w = widths[k];
                         if (parents[k] != kNoNode) {
                           auto& gp = Tape::slot(grads, parents[k], rows * w);
                           for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t c = 0; c < w; ++c) {
                               gp[r * w + c] += g[r * total_cols + off + c];
                             }
                           }
                         }
                         off += w;
                       }
                     });
}

Tensor transpose(Tape& tape, const Tensor& m) {
  require_rank(m, 2, "transpose");
  const std::size_t rows = m.rows(), cols = m.cols();
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = m.values[r * cols + c];
  }
  NodeId pm = parent_of(tape, m);
  return make_output(tape, {cols, rows}, std::move(out), {pm},
                     [pm, rows, cols](const std::vector<double>& g, GradTable& grads) {
                       if (pm == kNoNode) return;
                       auto& gm = Tape::slot(grads, pm, rows * cols);
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t c = 0; c < cols; ++c) gm[r * cols + c] += g[c * rows + r];
                       }
                     });
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  const std::size_t n = x.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x.values[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  NodeId px = parent_of(tape, x);
  std::vector<double> saved = out;
  return make_output(tape, x.shape, std::move(out), {px},
                     [px, n, saved = std::move(saved)](const std::vector<double>& g,
                                                       GradTable& grads) {
                       if (px == kNoNode) return;
                       auto& gx = Tape::slot(grads, px, n);
                       for (std::size_t i = 0; i < n; ++i) {
                         gx[i] += g[i] * saved[i] * (1.0 - saved[i]);
                       }
                     });
}

Tensor tanh(Tape& tape, const Tensor& x) {
  const std::size_t n = x.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(x.values[i]);
  NodeId px = parent_of(tape, x);
  std::vector<double> saved = out;
  return make_output(tape, x.shape, std::move(out), {px},
                     [px, n, saved = std::move(saved)](const std::vector<double>& g,
                                                       GradTable& grads) {
                       if (px == kNoNode) return;
                       auto& gx = Tape::slot(grads, px, n);
                       for (std::size_t i = 0; i < n; ++i) {
                         gx[i] += g[i] * (1.0 - saved[i] * saved[i]);
                       }
                     });
}

Tensor gelu(Tape& tape, const Tensor& x) {
  const std::size_t n = x.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x.values[i];
    out[i] = v * 0.5 * (1.0 + std::erf(v * kInvSqrt2));
  }
  NodeId px = parent_of(tape, x);
  std::vector<double> xv = x.values;
  return make_output(tape, x.shape, std::move(out), {px},
                     [px, n, xv = std::move(xv)](const std::vector<double>& g, GradTable& grads) {
                       if (px == kNoNode) return;
                       auto& gx = Tape::slot(grads, px, n);
                       for (std::size_t i = 0; i < n; ++i) {
                         const double v = xv[i];
                         const double phi = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
                         const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
                         gx[i] += g[i] * (phi + v * pdf);
                       }
                     });
}

Tensor cross_entropy_with_logits(Tape& tape, const Tensor& logits, std::size_t target) {
  require_rank(logits, 1, "cross_entropy_with_logits");
  require_nonempty(logits, "cross_entropy_with_logits");
  const std::size_t n = logits.size();
  if (target >= n) {
    throw UsageError("cross_entropy_with_logits: target " + std::to_string(target) +
                     " out of range for " + shape_str(logits));
  }
  double mx = logits.values[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits.values[i]);
  double denom = 0.0;
  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i) {
    probs[i] = std::exp(logits.values[i] - mx);
    denom += probs[i];
  }
  for (std::size_t i = 0; i < n; ++i) probs[i] /= denom;
  const double value = std::log(denom) + mx - logits.values[target];

  NodeId pl = parent_of(tape, logits);
  return make_output(tape, {1}, {value}, {pl},
                     [pl, n, target, probs = std::move(probs)](const std::vector<double>& g,
                                                               GradTable& grads) {
                       if (pl == kNoNode) return;
                       auto& gl = Tape::slot(grads, pl, n);
                       for (std::size_t i = 0; i < n; ++i) {
                         gl[i] += g[0] * (probs[i] - (i == target ? 1.0 : 0.0));
                       }
                     });
}

Tensor reshape(Tape& tape, const Tensor& t, std::vector<std::size_t> shape) {
  std::size_t p = 1;
  for (std::size_t d : shape) p *= d;
  if (p != t.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(t) + " as " + shape_str(shape));
  }
  NodeId pt = parent_of(tape, t);
  const std::size_t n = t.size();
  std::vector<double> out = t.values;
  return make_output(tape, std::move(shape), std::move(out), {pt},
                     [pt, n](const std::vector<double>& g, GradTable& grads) {
                       if (pt == kNoNode) return;
                       auto& gt = Tape::slot(grads, pt, n);
                       for (std::size_t i = 0; i < n; ++i) gt[i] += g[i];
                     });
}

Tensor row_slice(Tape& tape, const Tensor& m, std::size_t row) {
  require_rank(m, 2, "row_slice");
  const std::size_t rows = m.rows(), cols = m.cols();
  if (row >= rows) {
    throw DimensionError("row_slice: row " + std::to_string(row) + " out of range for " +
                         shape_str(m));
  }
  std::vector<double> out(m.values.begin() + static_cast<std::ptrdiff_t>(row * cols),
                          m.values.begin() + static_cast<std::ptrdiff_t>((row + 1) * cols));
  NodeId pm = parent_of(tape, m);
  return make_output(tape, {cols}, std::move(out), {pm},
                     [pm, rows, cols, row](const std::vector<double>& g, GradTable& grads) {
                       if (pm == kNoNode) return;
                       auto& gm = Tape::slot(grads, pm, rows * cols);
                       for (std::size_t c = 0; c < cols; ++c) gm[row * cols + c] += g[c];
                     });
}

Tensor stack_rows(Tape& tape, const std::vector<Tensor>& rows) {
  if (rows.empty()) throw DomainError("stack_rows: no rows given");
  const std::size_t cols = rows[0].size();
  std::vector<double> out;
  out.reserve(rows.size() * cols);
  std::vector<NodeId> parents;
  parents.reserve(rows.size());
  for (const Tensor& r : rows) {
    require_rank(r, 1, "stack_rows");
    if (r.size() != cols) {
      throw DimensionError("stack_rows: ragged row " + shape_str(r) + " vs " +
                           shape_str(rows[0]));
    }
    out.insert(out.end(), r.values.begin(), r.values.end());
    parents.push_back(parent_of(tape, r));
  }
  std::vector<NodeId> parents_copy = parents;
  const std::size_t n = rows.size();
  return make_output(tape, {n, cols}, std::move(out), std::move(parents_copy),
                     [parents, cols](const std::vector<double>& g, GradTable& grads) {
                       for (std::size_t r = 0; r < parents.size(); ++r) {
                         if (parents[r] == kNoNode) continue;
                         auto& gr = Tape::slot(grads, parents[r], cols);
                         for (std::size_t c = 0; c < cols; ++c) gr[c] += g[r * cols + c];
                       }
                     });
}

Tensor tile_rows(Tape& tape, const Tensor& v, std::size_t t) {
  require_rank(v, 1, "tile_rows");
  if (t == 0) throw DomainError("tile_rows: row count must be positive");
  const std::size_t cols = v.size();
  std::vector<double> out(t * cols);
  for (std::size_t r = 0; r < t; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = v.values[c];
  }
  NodeId pv = parent_of(tape, v);
  return make_output(tape, {t, cols}, std::move(out), {pv},
                     [pv, t, cols](const std::vector<double>& g, GradTable& grads) {
                       if (pv == kNoNode) return;
                       auto& gv = Tape::slot(grads, pv, cols);
                       for (std::size_t r = 0; r < t; ++r) {
                         for (std::size_t c = 0; c < cols; ++c) gv[c] += g[r * cols + c];
                       }
                     });
}

}  // namespace hyrsm
