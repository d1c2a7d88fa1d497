#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyrsm/data.hpp"
#include "hyrsm/metrics.hpp"
#include "hyrsm/relation.hpp"

namespace hyrsm {

// N-way K-shot episode construction, logits and losses, the Adam training
// loop, and multi-episode evaluation.

struct TrainConfig {
  std::size_t way = 5;
  std::size_t shot = 1;
  std::size_t queries = 5;  // per episode, capped by what the pool can supply
  std::size_t frames = 8;
  std::size_t channels = 16;
  std::size_t heads = 4;
  Metric metric{MetricKind::BiMHM, Direction::Bidirectional};
  bool intra = true;
  bool inter = true;
  IntraKind intra_kind = IntraKind::MSA;
  PoolMode pool_mode = PoolMode::SupportAndQuery;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double lambda = 1.0;  // weight of the auxiliary classification loss
  double tau = 1.0;     // logit temperature
  std::size_t train_episodes = 1000;
  std::size_t eval_episodes = 2000;
  std::uint64_t seed = 1;

  void validate() const;
  RelationConfig relation_config(std::size_t num_classes) const;
  // Checks that every video in the store matches frames/channels and that the
  // pool can populate an episode.
  void validate_store(const FeatureStore& store) const;
  static TrainConfig from_file(const std::string& path);
  static TrainConfig from_text(const std::string& text, const std::string& origin);
};

struct Episode {
  std::vector<std::vector<std::size_t>> support;  // [way][shot] store indices
  std::vector<std::size_t> query;                 // store indices
  std::vector<std::size_t> query_way;             // re-indexed label per query
  std::vector<std::size_t> way_classes;           // original class id per way
  std::uint64_t seed = 0;
};

// Deterministic given (cfg.seed, episode_index), independent of other
// episodes.
Episode sample_episode(const FeatureStore& pool, const TrainConfig& cfg,
                       std::uint64_t episode_index);

// Frame-wise arithmetic mean of same-shaped [T x C] tensors.
Tensor prototype_mean(Tape& tape, const std::vector<Tensor>& members);

struct QueryResult {
  std::vector<double> logits;
  std::size_t predicted = 0;
  bool correct = false;
};

struct EpisodeOutput {
  std::vector<QueryResult> queries;
  double accuracy = 0.0;
  double episodic_loss = 0.0;
  double reg_loss = 0.0;
  double total_loss = 0.0;
  // Scalar loss node when built on a live tape (training); untracked scalar
  // otherwise.
  Tensor loss_node;
  // Smallest winner-to-runner-up gap across all metric selections made while
  // scoring; +inf when no selection was close to a tie or none was made.
  double min_margin = 0.0;
};

// Runs the full per-query pipeline: enhancement (per cfg flags), prototypes,
// distances, logits, episodic cross-entropy, and, when `with_reg` is set and
// the classifier head is present, the auxiliary loss on original class ids.
EpisodeOutput episode_forward(Tape& tape, const FeatureStore& pool, const Episode& ep,
                              const RelationParams& params, const TrainConfig& cfg,
                              bool with_reg);

struct TrainLogRow {
  std::size_t episode_index = 0;
  double episodic_loss = 0.0;
  double reg_loss = 0.0;
  double total_loss = 0.0;
};

struct TrainResult {
  RelationParams params;
  std::vector<TrainLogRow> log;
};

// Parameters train() starts from; exposed so before/after comparisons can
// evaluate the exact same initialization.
RelationParams initial_params(const TrainConfig& cfg, std::size_t num_classes);

TrainResult train(const FeatureStore& pool, const TrainConfig& cfg);

struct EvalSummary {
  std::size_t way = 0;
  std::size_t shot = 0;
  std::size_t episodes = 0;
  double accuracy = 0.0;  // mean per-episode query accuracy
  double ci95 = 0.0;      // 1.96 * standard error over episodes
  std::vector<double> per_episode;
};

// Per-episode seeding makes the result identical for any `threads` value.
EvalSummary evaluate(const FeatureStore& pool, const RelationParams& params,
                     const TrainConfig& cfg, std::size_t episodes, std::size_t threads = 1);

struct BenchRow {
  Metric metric;
  std::size_t way = 0;
  std::size_t shot = 0;
  std::size_t episodes = 0;
  double accuracy = 0.0;
  double ci95 = 0.0;
};

// Compares metrics on raw stored features (no enhancement, no training).
// Every metric scores the exact same episode stream, so rows are directly
// comparable; identical for any `threads` value.
std::vector<BenchRow> bench_metrics(const FeatureStore& pool, const TrainConfig& cfg,
                                    const std::vector<Metric>& metrics, std::size_t episodes,
                                    std::size_t threads = 1);

// Refuses train/eval stores whose class-name tables intersect; the offending
// names are listed in the error.
void require_disjoint_classes(const FeatureStore& train_store, const FeatureStore& eval_store);

}  // namespace hyrsm
