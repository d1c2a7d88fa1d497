#include "hyrsm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "hyrsm/episodic.hpp"
#include "hyrsm/metrics.hpp"
#include "hyrsm/ops.hpp"
#include "hyrsm/relation.hpp"
#include "hyrsm/tape.hpp"

namespace hyrsm {

namespace {

constexpr double kStep = 1e-6;
constexpr double kTieMargin = 1e-3;
constexpr std::size_t kCoordsPerLeaf = 3;

// One random problem instance: leaf tensors to differentiate with respect to
// plus a pure scalar function of their values. `margin` is filled by forward
// when the function makes discrete selections.
struct Point {
  std::vector<Tensor> leaves;
  std::function<Tensor(Tape&, const std::vector<Tensor>&)> forward;
  std::shared_ptr<double> margin = std::make_shared<double>(std::numeric_limits<double>::infinity());
};

struct Component {
  std::string name;
  std::function<Point(Rng&)> gen;
};

double eval_value(const Point& pt, const std::vector<Tensor>& leaves) {
  Tape tape;
  return pt.forward(tape, leaves).item();
}

// Scalar readout: mean of x weighted elementwise by a fixed random tensor.
Tensor weighted_mean(Tape& tape, const Tensor& x, const Tensor& w) {
  Tensor prod = multiply(tape, x, w);
  Tensor row = reshape(tape, prod, {1, prod.size()});
  return mean_axis(tape, row, 1);
}

double check_component(const Component& comp, Rng& rng, std::size_t points) {
  double worst = 0.0;
  for (std::size_t p = 0; p < points; ++p) {
    Point pt;
    std::size_t tries = 0;
    while (true) {
      pt = comp.gen(rng);
      eval_value(pt, pt.leaves);  // probe fills the margin
      if (*pt.margin >= kTieMargin) break;
      if (++tries > 200) {
        throw DataError("gradient check for " + comp.name +
                        " could not find a tie-free point");
      }
    }

    Tape tape;
    std::vector<Tensor> tracked;
    tracked.reserve(pt.leaves.size());
    for (const Tensor& leaf : pt.leaves) tracked.push_back(tape.watch(leaf));
    Tensor loss = pt.forward(tape, tracked);
    Gradients grads = tape.backward(loss);

    for (std::size_t li = 0; li < pt.leaves.size(); ++li) {
      const Tensor analytic = grads.wrt(tracked[li]);
      const std::size_t n = pt.leaves[li].size();
      for (std::size_t pick = 0; pick < std::min(kCoordsPerLeaf, n); ++pick) {
        const std::size_t c = static_cast<std::size_t>(rng.uniform_int(n));
        std::vector<Tensor> shifted = pt.leaves;
        shifted[li].values[c] += kStep;
        const double up = eval_value(pt, shifted);
        shifted[li].values[c] -= 2.0 * kStep;
        const double down = eval_value(pt, shifted);
        const double fd = (up - down) / (2.0 * kStep);
        const double g = analytic.values[c];
        const double rel = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1.0});
        worst = std::max(worst, rel);
      }
    }
  }
  return worst;
}

Tensor rnd(Rng& rng, std::vector<std::size_t> shape) {
  return random_normal(std::move(shape), rng);
}

Point unary_point(Rng& rng, std::vector<std::size_t> shape,
                  std::function<Tensor(Tape&, const Tensor&)> op) {
  Point pt;
  pt.leaves = {rnd(rng, shape)};
  Tensor w = rnd(rng, shape);
  pt.forward = [op = std::move(op), w](Tape& tape, const std::vector<Tensor>& leaves) {
    return weighted_mean(tape, op(tape, leaves[0]), w);
  };
  return pt;
}

Point metric_point(Rng& rng, const Metric& metric, std::size_t rows_x, std::size_t rows_y,
                   std::size_t channels) {
  Point pt;
  pt.leaves = {rnd(rng, {rows_x, channels}), rnd(rng, {rows_y, channels})};
  auto margin = pt.margin;
  pt.forward = [metric, margin](Tape& tape, const std::vector<Tensor>& leaves) {
    return metric_node(tape, metric, leaves[0], leaves[1], margin.get());
  };
  return pt;
}

// Fresh params leave the residual projections at zero, which would zero out
// the gradients flowing to the branch-input projections and make the check
// vacuous there, so every matrix is refilled with random values first.
void randomize_params(RelationParams& params, Rng& rng) {
  params.for_each([&](const std::string&, Tensor& t) {
    t = random_normal(std::vector<std::size_t>(t.shape), rng, 0.4);
  });
}

// All matrices of a RelationParams flattened into leaves (canonical order)
// and reassembled inside forward, so each matrix is differentiated.
std::vector<Tensor> params_to_leaves(const RelationParams& params) {
  std::vector<Tensor> leaves;
  params.for_each([&](const std::string&, const Tensor& t) { leaves.push_back(t); });
  return leaves;
}

RelationParams leaves_to_params(const RelationConfig& cfg, const std::vector<Tensor>& leaves,
                                std::size_t begin) {
  RelationParams params = RelationParams::zeros(cfg);
  std::size_t i = begin;
  params.for_each([&](const std::string&, Tensor& t) { t = leaves[i++]; });
  return params;
}

RelationConfig toy_relation_config(IntraKind kind, std::size_t num_classes) {
  RelationConfig cfg;
  cfg.channels = 8;
  cfg.heads = 2;
  cfg.intra_kind = kind;
  cfg.num_classes = num_classes;
  return cfg;
}

Point relation_point(Rng& rng, IntraKind kind) {
  RelationConfig cfg = toy_relation_config(kind, 0);
  RelationParams params = RelationParams::init(cfg, rng);
  randomize_params(params, rng);

  Point pt;
  pt.leaves = params_to_leaves(params);
  const std::size_t first_video = pt.leaves.size();
  pt.leaves.push_back(rnd(rng, {3, cfg.channels}));  // support a
  pt.leaves.push_back(rnd(rng, {4, cfg.channels}));  // support b
  pt.leaves.push_back(rnd(rng, {3, cfg.channels}));  // query

  Tensor w_s0 = rnd(rng, {3, cfg.channels});
  Tensor w_s1 = rnd(rng, {4, cfg.channels});
  Tensor w_q = rnd(rng, {3, cfg.channels});
  pt.forward = [cfg, first_video, w_s0, w_s1, w_q](Tape& tape,
                                                   const std::vector<Tensor>& leaves) {
    RelationParams params = leaves_to_params(cfg, leaves, 0);
    std::vector<Tensor> supports = {leaves[first_video], leaves[first_video + 1]};
    HybridResult hr = hybrid_relation(tape, supports, leaves[first_video + 2], params);
    Tensor acc = weighted_mean(tape, hr.supports[0].features, w_s0);
    acc = add(tape, acc, weighted_mean(tape, hr.supports[1].features, w_s1));
    return add(tape, acc, weighted_mean(tape, hr.query.features, w_q));
  };
  return pt;
}

Point cell_point(Rng& rng, bool lstm) {
  const std::size_t c = 6;
  Point pt;
  RelationConfig cfg = toy_relation_config(lstm ? IntraKind::BiLSTM : IntraKind::BiGRU, 0);
  cfg.channels = c;
  cfg.heads = 1;
  RelationParams params = RelationParams::init(cfg, rng);
  randomize_params(params, rng);

  pt.leaves = params_to_leaves(params);
  const std::size_t first_video = pt.leaves.size();
  pt.leaves.push_back(rnd(rng, {4, c}));

  Tensor w = rnd(rng, {4, c});
  pt.forward = [cfg, first_video, w](Tape& tape, const std::vector<Tensor>& leaves) {
    RelationParams params = leaves_to_params(cfg, leaves, 0);
    Tensor out = intra_relation(tape, leaves[first_video], params);
    return weighted_mean(tape, out, w);
  };
  return pt;
}

Point episode_point(Rng& rng) {
  TrainConfig cfg;
  cfg.way = 2;
  cfg.shot = 1;
  cfg.queries = 2;
  cfg.frames = 3;
  cfg.channels = 8;
  cfg.heads = 2;
  cfg.lambda = 0.5;
  cfg.tau = 0.7;

  auto store = std::make_shared<FeatureStore>();
  store->class_names = {"a", "b"};
  for (std::uint32_t k = 0; k < 2; ++k) {
    for (int v = 0; v < 2; ++v) {
      store->videos.push_back({k, rnd(rng, {cfg.frames, cfg.channels})});
    }
  }

  auto episode = std::make_shared<Episode>();
  episode->support = {{0}, {2}};
  episode->query = {1, 3};
  episode->query_way = {0, 1};
  episode->way_classes = {0, 1};

  RelationConfig rc = cfg.relation_config(2);
  RelationParams params = RelationParams::init(rc, rng);
  randomize_params(params, rng);

  Point pt;
  pt.leaves = params_to_leaves(params);
  auto margin = pt.margin;
  pt.forward = [cfg, rc, store, episode, margin](Tape& tape,
                                                 const std::vector<Tensor>& leaves) {
    RelationParams params = leaves_to_params(rc, leaves, 0);
    EpisodeOutput out = episode_forward(tape, *store, *episode, params, cfg, true);
    *margin = out.min_margin;
    return out.loss_node;
  };
  return pt;
}

}  // namespace

std::vector<GradCheckReport> grad_check_all(std::uint64_t seed, std::size_t points) {
  if (points == 0) throw UsageError("gradient check needs at least one point");

  std::vector<Component> components;

  components.push_back({"matmul", [](Rng& rng) {
    Point pt;
    pt.leaves = {rnd(rng, {3, 4}), rnd(rng, {4, 2})};
    Tensor w = rnd(rng, {3, 2});
    pt.forward = [w](Tape& tape, const std::vector<Tensor>& leaves) {
      return weighted_mean(tape, matmul(tape, leaves[0], leaves[1]), w);
    };
    return pt;
  }});

  components.push_back({"softmax", [](Rng& rng) {
    return unary_point(rng, {3, 5},
                       [](Tape& tape, const Tensor& x) { return softmax(tape, x); });
  }});

  components.push_back({"mean_axis", [](Rng& rng) {
    Point pt;
    pt.leaves = {rnd(rng, {3, 4})};
    Tensor w0 = rnd(rng, {4});
    Tensor w1 = rnd(rng, {3});
    pt.forward = [w0, w1](Tape& tape, const std::vector<Tensor>& leaves) {
      Tensor a = weighted_mean(tape, mean_axis(tape, leaves[0], 0), w0);
      Tensor b = weighted_mean(tape, mean_axis(tape, leaves[0], 1), w1);
      return add(tape, a, b);
    };
    return pt;
  }});

  components.push_back({"global_avg_pool", [](Rng& rng) {
    return unary_point(rng, {4, 3}, [](Tape& tape, const Tensor& x) {
      return tile_rows(tape, global_avg_pool(tape, x), 4);
    });
  }});

  components.push_back({"cosine_distance", [](Rng& rng) {
    Point pt;
    pt.leaves = {rnd(rng, {5}), rnd(rng, {5})};
    pt.forward = [](Tape& tape, const std::vector<Tensor>& leaves) {
      return cosine_distance(tape, leaves[0], leaves[1]);
    };
    return pt;
  }});

  components.push_back({"add_multiply_scale", [](Rng& rng) {
    Point pt;
    pt.leaves = {rnd(rng, {2, 3}), rnd(rng, {2, 3}), rnd(rng, {2, 3})};
    Tensor w = rnd(rng, {2, 3});
    pt.forward = [w](Tape& tape, const std::vector<Tensor>& leaves) {
      Tensor mixed = add(tape, leaves[0], multiply(tape, leaves[1], leaves[2]));
      return weighted_mean(tape, scale(tape, mixed, 1.7), w);
    };
    return pt;
  }});

  components.push_back({"concat_transpose", [](Rng& rng) {
    Point pt;
    pt.leaves = {rnd(rng, {2, 2}), rnd(rng, {2, 3})};
    Tensor w = rnd(rng, {5, 2});
    pt.forward = [w](Tape& tape, const std::vector<Tensor>& leaves) {
      Tensor cat = concat(tape, {leaves[0], leaves[1]});
      return weighted_mean(tape, transpose(tape, cat), w);
    };
    return pt;
  }});

  components.push_back({"sigmoid", [](Rng& rng) {
    return unary_point(rng, {3, 3},
                       [](Tape& tape, const Tensor& x) { return sigmoid(tape, x); });
  }});

  components.push_back({"tanh", [](Rng& rng) {
    return unary_point(rng, {3, 3}, [](Tape& tape, const Tensor& x) { return tanh(tape, x); });
  }});

  components.push_back({"gelu", [](Rng& rng) {
    return unary_point(rng, {3, 3}, [](Tape& tape, const Tensor& x) { return gelu(tape, x); });
  }});

  components.push_back({"cross_entropy", [](Rng& rng) {
    Point pt;
    pt.leaves = {rnd(rng, {7})};
    const std::size_t target = static_cast<std::size_t>(rng.uniform_int(7));
    pt.forward = [target](Tape& tape, const std::vector<Tensor>& leaves) {
      return cross_entropy_with_logits(tape, leaves[0], target);
    };
    return pt;
  }});

  components.push_back({"shaping", [](Rng& rng) {
    Point pt;
    pt.leaves = {rnd(rng, {3, 4})};
    Tensor w = rnd(rng, {2, 4});
    Tensor w2 = rnd(rng, {2, 12});
    pt.forward = [w, w2](Tape& tape, const std::vector<Tensor>& leaves) {
      Tensor row = row_slice(tape, leaves[0], 1);
      Tensor tiled = tile_rows(tape, row, 2);
      Tensor stacked = stack_rows(tape, {row_slice(tape, leaves[0], 0), row});
      Tensor flat = reshape(tape, leaves[0], {1, 12});
      Tensor a = weighted_mean(tape, tiled, w);
      Tensor b = weighted_mean(tape, stacked, w);
      Tensor c = weighted_mean(tape, tile_rows(tape, reshape(tape, flat, {12}), 2), w2);
      return add(tape, add(tape, a, b), c);
    };
    return pt;
  }});

  components.push_back({"lstm_cell", [](Rng& rng) { return cell_point(rng, true); }});
  components.push_back({"gru_cell", [](Rng& rng) { return cell_point(rng, false); }});

  components.push_back({"relation_msa", [](Rng& rng) {
    return relation_point(rng, IntraKind::MSA);
  }});
  components.push_back({"relation_transformer", [](Rng& rng) {
    return relation_point(rng, IntraKind::TransformerBlock);
  }});

  components.push_back({"diagonal", [](Rng& rng) {
    return metric_point(rng, {MetricKind::Diagonal, Direction::Forward}, 4, 4, 3);
  }});
  components.push_back({"plain_dtw", [](Rng& rng) {
    return metric_point(rng, {MetricKind::PlainDTW, Direction::Forward}, 4, 5, 3);
  }});
  components.push_back({"hausdorff", [](Rng& rng) {
    return metric_point(rng, {MetricKind::Hausdorff, Direction::Bidirectional}, 4, 5, 3);
  }});
  components.push_back({"bi_mhm", [](Rng& rng) {
    return metric_point(rng, {MetricKind::BiMHM, Direction::Bidirectional}, 4, 5, 3);
  }});

  components.push_back({"episode_loss", [](Rng& rng) { return episode_point(rng); }});

  std::vector<GradCheckReport> reports;
  for (std::size_t i = 0; i < components.size(); ++i) {
    Rng rng(substream_seed(seed, kStreamGradCheck, i));
    reports.push_back({components[i].name, check_component(components[i], rng, points), points});
  }
  return reports;
}

}  // namespace hyrsm
