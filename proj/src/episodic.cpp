#include "hyrsm/episodic.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "hyrsm/adam.hpp"

namespace hyrsm {

namespace {

void fold_min(double& acc, double candidate) { acc = std::min(acc, candidate); }

// Runs fn(index) for every index in [0, count) across `threads` workers.
// Work is assigned by stride so the mapping index -> work is fixed; the first
// exception thrown by any worker is rethrown on the calling thread.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto run_range = [&](std::size_t begin) {
    try {
      for (std::size_t i = begin; i < count; i += threads) fn(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < threads; ++w) workers.emplace_back(run_range, w);
  for (std::thread& t : workers) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  for (double a : v) sum += a;
  return sum / static_cast<double>(v.size());
}

double ci95_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double a : v) ss += (a - mean) * (a - mean);
  const double n = static_cast<double>(v.size());
  return 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

// -distance(prototype_n, query)/tau for every way, as one [way] tensor.
Tensor query_logits(Tape& tape, const Metric& metric, const std::vector<Tensor>& protos,
                    const Tensor& query, double tau, double& min_margin) {
  std::vector<Tensor> parts;
  parts.reserve(protos.size());
  for (const Tensor& p : protos) {
    double margin = std::numeric_limits<double>::infinity();
    Tensor d = metric_node(tape, metric, p, query, &margin);
    fold_min(min_margin, margin);
    parts.push_back(scale(tape, d, -1.0 / tau));
  }
  return concat(tape, parts);
}

std::size_t argmax_double(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

void TrainConfig::validate() const {
  if (way < 2) throw ConfigError("way must be at least 2");
  if (shot < 1) throw ConfigError("shot must be at least 1");
  if (queries < 1) throw ConfigError("queries must be at least 1");
  if (frames < 1) throw ConfigError("frames must be at least 1");
  if (channels < 1) throw ConfigError("channels must be at least 1");
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (lr < 0.0) throw ConfigError("lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  relation_config(0).validate();
}

RelationConfig TrainConfig::relation_config(std::size_t num_classes) const {
  RelationConfig rc;
  rc.channels = channels;
  rc.heads = heads;
  rc.intra_kind = intra_kind;
  rc.intra = intra;
  rc.inter = inter;
  rc.pool_mode = pool_mode;
  rc.num_classes = num_classes;
  return rc;
}

void TrainConfig::validate_store(const FeatureStore& store) const {
  store.validate();
  for (std::size_t i = 0; i < store.videos.size(); ++i) {
    const Tensor& f = store.videos[i].features;
    if (f.rows() != frames || f.cols() != channels) {
      throw ConfigError("video " + std::to_string(i) + " is " + shape_str(f) +
                        " but the configuration expects [" + std::to_string(frames) + " x " +
                        std::to_string(channels) + "]");
    }
  }
  std::size_t eligible = 0;
  for (const auto& members : store.videos_by_class()) {
    if (members.size() >= shot + 1) ++eligible;
  }
  if (eligible < way) {
    throw ConfigError("store has " + std::to_string(eligible) + " classes with at least " +
                      std::to_string(shot + 1) + " videos, but way=" + std::to_string(way));
  }
}

Episode sample_episode(const FeatureStore& pool, const TrainConfig& cfg,
                       std::uint64_t episode_index) {
  const std::uint64_t seed = substream_seed(cfg.seed, kStreamEpisode, episode_index);
  Rng rng(seed);

  const auto by_class = pool.videos_by_class();
  std::vector<std::size_t> eligible;
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    if (by_class[k].size() >= cfg.shot + 1) eligible.push_back(k);
  }
  if (eligible.size() < cfg.way) {
    throw ConfigError("store has " + std::to_string(eligible.size()) +
                      " classes with at least " + std::to_string(cfg.shot + 1) +
                      " videos, but way=" + std::to_string(cfg.way));
  }

  Episode ep;
  ep.seed = seed;
  for (std::size_t pick : rng.sample_indices(eligible.size(), cfg.way)) {
    ep.way_classes.push_back(eligible[pick]);
  }

  struct Leftover {
    std::size_t way;
    std::size_t video;
  };
  std::vector<Leftover> leftovers;
  for (std::size_t w = 0; w < cfg.way; ++w) {
    std::vector<std::size_t> members = by_class[ep.way_classes[w]];
    rng.shuffle(members);
    ep.support.emplace_back(members.begin(),
                            members.begin() + static_cast<std::ptrdiff_t>(cfg.shot));
    for (std::size_t i = cfg.shot; i < members.size(); ++i) {
      leftovers.push_back({w, members[i]});
    }
  }
  rng.shuffle(leftovers);
  const std::size_t q = std::min<std::size_t>(cfg.queries, leftovers.size());
  for (std::size_t i = 0; i < q; ++i) {
    ep.query.push_back(leftovers[i].video);
    ep.query_way.push_back(leftovers[i].way);
  }
  return ep;
}

Tensor prototype_mean(Tape& tape, const std::vector<Tensor>& members) {
  if (members.empty()) throw DomainError("prototype_mean: no members");
  Tensor acc = members.front();
  for (std::size_t i = 1; i < members.size(); ++i) {
    require_same_shape(members.front(), members[i], "prototype_mean");
    acc = add(tape, acc, members[i]);
  }
  return scale(tape, acc, 1.0 / static_cast<double>(members.size()));
}

EpisodeOutput episode_forward(Tape& tape, const FeatureStore& pool, const Episode& ep,
                              const RelationParams& params, const TrainConfig& cfg,
                              bool with_reg) {
  if (ep.query.empty()) throw ConfigError("episode has no queries");
  const bool use_reg = with_reg && cfg.lambda > 0.0;
  if (use_reg && params.cfg.num_classes == 0) {
    throw ConfigError("lambda > 0 requires parameters with a classifier head");
  }

  EpisodeOutput out;
  out.min_margin = std::numeric_limits<double>::infinity();

  std::vector<Tensor> support_features;
  for (const auto& way_members : ep.support) {
    for (std::size_t idx : way_members) support_features.push_back(pool.videos[idx].features);
  }

  std::vector<Tensor> ce_parts;      // per-query episodic CE
  std::vector<Tensor> reg_parts;     // per-video auxiliary CE, all passes
  const bool relation_on = cfg.intra || cfg.inter;

  for (std::size_t qi = 0; qi < ep.query.size(); ++qi) {
    const Tensor& query_raw = pool.videos[ep.query[qi]].features;

    std::vector<Tensor> enhanced_supports;
    Tensor enhanced_query;
    if (relation_on) {
      HybridResult hr = hybrid_relation(tape, support_features, query_raw, params);
      for (auto& s : hr.supports) enhanced_supports.push_back(std::move(s.features));
      enhanced_query = std::move(hr.query.features);
    } else {
      enhanced_supports = support_features;
      enhanced_query = query_raw;
    }

    std::vector<Tensor> protos;
    for (std::size_t w = 0; w < cfg.way; ++w) {
      std::vector<Tensor> members(
          enhanced_supports.begin() + static_cast<std::ptrdiff_t>(w * cfg.shot),
          enhanced_supports.begin() + static_cast<std::ptrdiff_t>((w + 1) * cfg.shot));
      protos.push_back(prototype_mean(tape, members));
    }

    Tensor logits =
        query_logits(tape, cfg.metric, protos, enhanced_query, cfg.tau, out.min_margin);

    QueryResult qr;
    qr.logits = logits.values;
    qr.predicted = argmax_double(qr.logits);
    qr.correct = qr.predicted == ep.query_way[qi];
    out.queries.push_back(std::move(qr));

    ce_parts.push_back(cross_entropy_with_logits(tape, logits, ep.query_way[qi]));

    if (use_reg) {
      auto head_ce = [&](const Tensor& features, std::size_t class_id) {
        Tensor pooled = global_avg_pool(tape, features);
        Tensor row = reshape(tape, pooled, {1, pooled.size()});
        Tensor head = reshape(tape, matmul(tape, row, params.head_w),
                              {params.cfg.num_classes});
        reg_parts.push_back(cross_entropy_with_logits(tape, head, class_id));
      };
      for (std::size_t w = 0; w < cfg.way; ++w) {
        for (std::size_t k = 0; k < cfg.shot; ++k) {
          head_ce(enhanced_supports[w * cfg.shot + k], ep.way_classes[w]);
        }
      }
      head_ce(enhanced_query, ep.way_classes[ep.query_way[qi]]);
    }
  }

  Tensor episodic = prototype_mean(tape, ce_parts);
  out.episodic_loss = episodic.item();

  if (use_reg) {
    Tensor reg = prototype_mean(tape, reg_parts);
    out.reg_loss = reg.item();
    out.loss_node = add(tape, episodic, scale(tape, reg, cfg.lambda));
  } else {
    out.loss_node = episodic;
  }
  out.total_loss = out.loss_node.item();

  std::size_t hits = 0;
  for (const QueryResult& qr : out.queries) hits += qr.correct ? 1 : 0;
  out.accuracy = static_cast<double>(hits) / static_cast<double>(out.queries.size());
  return out;
}

RelationParams initial_params(const TrainConfig& cfg, std::size_t num_classes) {
  Rng rng(substream_seed(cfg.seed, kStreamParamInit, 0));
  return RelationParams::init(cfg.relation_config(num_classes), rng);
}

TrainResult train(const FeatureStore& pool, const TrainConfig& cfg) {
  cfg.validate();
  cfg.validate_store(pool);
  if (cfg.intra && (cfg.intra_kind == IntraKind::BiLSTM || cfg.intra_kind == IntraKind::BiGRU)) {
    throw ConfigError("intra_kind " + intra_kind_name(cfg.intra_kind) +
                      " is inference-only and cannot be trained");
  }

  TrainResult result;
  result.params = initial_params(cfg, pool.num_classes());

  AdamHyper hyper{cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon};
  std::map<std::string, AdamState> states;

  for (std::size_t index = 0; index < cfg.train_episodes; ++index) {
    Episode ep = sample_episode(pool, cfg, index);

    Tape tape;
    RelationParams live = result.params.tracked(tape);
    EpisodeOutput out = episode_forward(tape, pool, ep, live, cfg, true);
    if (!std::isfinite(out.total_loss)) {
      throw DataError("non-finite loss at training episode " + std::to_string(index));
    }
    Gradients grads = tape.backward(out.loss_node);

    std::map<std::string, Tensor> live_mats;
    live.for_each([&](const std::string& name, Tensor& t) { live_mats.emplace(name, t); });
    result.params.for_each([&](const std::string& name, Tensor& t) {
      adam_update(t, grads.wrt(live_mats.at(name)), states[name], index + 1, hyper);
    });

    result.log.push_back({index, out.episodic_loss, out.reg_loss, out.total_loss});
  }
  return result;
}

EvalSummary evaluate(const FeatureStore& pool, const RelationParams& params,
                     const TrainConfig& cfg, std::size_t episodes, std::size_t threads) {
  cfg.validate();
  cfg.validate_store(pool);
  if (episodes == 0) throw ConfigError("episode count must be positive");
  if (threads == 0) threads = 1;

  std::vector<double> per_episode(episodes, 0.0);
  parallel_for(episodes, threads, [&](std::size_t index) {
    Episode ep = sample_episode(pool, cfg, index);
    Tape tape;
    EpisodeOutput out = episode_forward(tape, pool, ep, params, cfg, false);
    per_episode[index] = out.accuracy;
  });

  EvalSummary summary;
  summary.way = cfg.way;
  summary.shot = cfg.shot;
  summary.episodes = episodes;
  summary.accuracy = mean_of(per_episode);
  summary.ci95 = ci95_of(per_episode, summary.accuracy);
  summary.per_episode = std::move(per_episode);
  return summary;
}

std::vector<BenchRow> bench_metrics(const FeatureStore& pool, const TrainConfig& cfg,
                                    const std::vector<Metric>& metrics, std::size_t episodes,
                                    std::size_t threads) {
  cfg.validate();
  cfg.validate_store(pool);
  if (episodes == 0) throw ConfigError("episode count must be positive");
  if (metrics.empty()) throw UsageError("no metrics given");

  // acc[m][e]: accuracy of metric m on episode e; the episode stream is
  // sampled once and shared by every metric.
  std::vector<std::vector<double>> acc(metrics.size(), std::vector<double>(episodes, 0.0));
  parallel_for(episodes, threads, [&](std::size_t index) {
    Episode ep = sample_episode(pool, cfg, index);

    std::vector<Tensor> protos;
    for (std::size_t w = 0; w < cfg.way; ++w) {
      Tensor proto = pool.videos[ep.support[w][0]].features;
      for (std::size_t k = 1; k < cfg.shot; ++k) {
        const Tensor& s = pool.videos[ep.support[w][k]].features;
        for (std::size_t i = 0; i < proto.size(); ++i) proto.values[i] += s.values[i];
      }
      const double inv = 1.0 / static_cast<double>(cfg.shot);
      for (double& v : proto.values) v *= inv;
      protos.push_back(std::move(proto));
    }

    for (std::size_t m = 0; m < metrics.size(); ++m) {
      std::size_t hits = 0;
      for (std::size_t qi = 0; qi < ep.query.size(); ++qi) {
        const Tensor& query = pool.videos[ep.query[qi]].features;
        std::size_t best = 0;
        double best_d = metric_value(metrics[m], protos[0], query);
        for (std::size_t w = 1; w < cfg.way; ++w) {
          const double d = metric_value(metrics[m], protos[w], query);
          if (d < best_d) {
            best_d = d;
            best = w;
          }
        }
        hits += best == ep.query_way[qi] ? 1 : 0;
      }
      acc[m][index] = static_cast<double>(hits) / static_cast<double>(ep.query.size());
    }
  });

  std::vector<BenchRow> rows;
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    BenchRow row;
    row.metric = metrics[m];
    row.way = cfg.way;
    row.shot = cfg.shot;
    row.episodes = episodes;
    row.accuracy = mean_of(acc[m]);
    row.ci95 = ci95_of(acc[m], row.accuracy);
    rows.push_back(row);
  }
  return rows;
}

void require_disjoint_classes(const FeatureStore& train_store, const FeatureStore& eval_store) {
  std::vector<std::string> overlap;
  for (const std::string& name : eval_store.class_names) {
    if (std::find(train_store.class_names.begin(), train_store.class_names.end(), name) !=
        train_store.class_names.end()) {
      overlap.push_back(name);
    }
  }
  if (!overlap.empty()) {
    std::string joined;
    for (const std::string& name : overlap) joined += (joined.empty() ? "" : ", ") + name;
    throw ConfigError("train and eval stores share classes: " + joined);
  }
}

}  // namespace hyrsm
