#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hyrsm/config.hpp"
#include "hyrsm/data.hpp"
#include "hyrsm/episodic.hpp"
#include "hyrsm/gradcheck.hpp"
#include "hyrsm/metrics.hpp"
#include "hyrsm/relation.hpp"

namespace {

using namespace hyrsm;

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw DataError("failed writing '" + path + "'");
}

// Metric list syntax: comma-separated metric names, each optionally suffixed
// with :forward / :backward / :bidirectional.
std::vector<Metric> parse_metric_list(const std::string& list) {
  std::vector<Metric> metrics;
  std::stringstream ss(list);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    Metric m;
    const std::size_t colon = token.find(':');
    if (colon == std::string::npos) {
      m.kind = metric_kind_from_name(token);
      m.direction =
          m.kind == MetricKind::Hausdorff ? Direction::Bidirectional : Direction::Forward;
    } else {
      m.kind = metric_kind_from_name(token.substr(0, colon));
      m.direction = direction_from_name(token.substr(colon + 1));
    }
    metrics.push_back(m);
  }
  if (metrics.empty()) throw UsageError("metric list is empty");
  return metrics;
}

std::string metric_label(const Metric& m) {
  if (m.kind == MetricKind::DirectedMHM && m.direction == Direction::Backward) {
    return metric_name(m.kind) + ":backward";
  }
  return metric_name(m.kind);
}

int cmd_gen_synth(const std::string& spec_path, const std::string& out_path) {
  SynthSpec spec = SynthSpec::from_file(spec_path);
  FeatureStore store = generate(spec);
  write_store(store, out_path);
  std::cout << "wrote " << store.videos.size() << " videos, " << store.num_classes()
            << " classes, [" << spec.frames << " x " << spec.channels << "] each to " << out_path
            << "\n";
  return 0;
}

int cmd_bench(const std::string& store_path, std::size_t way, std::size_t shot,
              const std::string& metric_list, std::size_t episodes, std::uint64_t seed,
              const std::string& out_path, std::size_t queries, std::size_t threads) {
  FeatureStore store = read_store(store_path);
  if (store.videos.empty()) throw DataError("store '" + store_path + "' has no videos");

  TrainConfig cfg;
  cfg.way = way;
  cfg.shot = shot;
  cfg.queries = queries;
  cfg.frames = store.videos.front().features.rows();
  cfg.channels = store.channels();
  cfg.seed = seed;

  std::vector<Metric> metrics = parse_metric_list(metric_list);
  std::vector<BenchRow> rows = bench_metrics(store, cfg, metrics, episodes, threads);

  std::string csv = "metric,way,shot,episodes,accuracy,ci95\n";
  for (const BenchRow& row : rows) {
    csv += metric_label(row.metric) + "," + std::to_string(row.way) + "," +
           std::to_string(row.shot) + "," + std::to_string(row.episodes) + "," +
           fmt("%.6f", row.accuracy) + "," + fmt("%.6f", row.ci95) + "\n";
  }
  write_text(out_path, csv);
  for (const BenchRow& row : rows) {
    std::cout << metric_label(row.metric) << ": " << fmt("%.4f", row.accuracy) << " +/- "
              << fmt("%.4f", row.ci95) << "\n";
  }
  return 0;
}

int cmd_grad_check(std::uint64_t seed, double tolerance, std::size_t points) {
  std::vector<GradCheckReport> reports = grad_check_all(seed, points);
  std::vector<std::string> failed;
  for (const GradCheckReport& r : reports) {
    std::cout << r.component << ": worst relative error " << fmt("%.3e", r.worst_rel_err)
              << " over " << r.points << " points\n";
    if (!(r.worst_rel_err < tolerance)) failed.push_back(r.component);
  }
  if (!failed.empty()) {
    std::string joined;
    for (const std::string& name : failed) joined += (joined.empty() ? "" : ", ") + name;
    std::cerr << "error: tolerance " << fmt("%.3e", tolerance) << " exceeded by: " << joined
              << "\n";
    return 2;
  }
  std::cout << "all components within " << fmt("%.3e", tolerance) << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& store_path,
              const std::string& params_path, const std::string& log_path) {
  TrainConfig cfg = TrainConfig::from_file(config_path);
  FeatureStore store = read_store(store_path);
  TrainResult result = train(store, cfg);
  save_params(result.params, params_path);

  std::string csv = "episode_index,episodic_loss,reg_loss,total_loss\n";
  for (const TrainLogRow& row : result.log) {
    csv += std::to_string(row.episode_index) + "," + fmt("%.6f", row.episodic_loss) + "," +
           fmt("%.6f", row.reg_loss) + "," + fmt("%.6f", row.total_loss) + "\n";
  }
  write_text(log_path, csv);

  if (!result.log.empty()) {
    std::cout << "trained " << result.log.size() << " episodes, final total loss "
              << fmt("%.6f", result.log.back().total_loss) << "\n";
  }
  std::cout << "params written to " << params_path << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& store_path,
             const std::string& params_path, std::size_t episodes_flag,
             const std::string& out_path, const std::string& train_store_path,
             std::size_t threads, const std::string& episode_log_path) {
  TrainConfig cfg = TrainConfig::from_file(config_path);
  FeatureStore store = read_store(store_path);
  if (!train_store_path.empty()) {
    FeatureStore train_store = read_store(train_store_path);
    require_disjoint_classes(train_store, store);
  }

  RelationParams params = params_path.empty()
                              ? initial_params(cfg, 0)
                              : load_params(params_path, cfg.relation_config(0));

  const std::size_t episodes = episodes_flag > 0 ? episodes_flag : cfg.eval_episodes;
  EvalSummary summary = evaluate(store, params, cfg, episodes, threads);

  std::string csv = "way,shot,episodes,accuracy,ci95\n";
  csv += std::to_string(summary.way) + "," + std::to_string(summary.shot) + "," +
         std::to_string(summary.episodes) + "," + fmt("%.6f", summary.accuracy) + "," +
         fmt("%.6f", summary.ci95) + "\n";
  write_text(out_path, csv);

  if (!episode_log_path.empty()) {
    std::string log = "episode_index,accuracy\n";
    for (std::size_t i = 0; i < summary.per_episode.size(); ++i) {
      log += std::to_string(i) + "," + fmt("%.6f", summary.per_episode[i]) + "\n";
    }
    write_text(episode_log_path, log);
  }

  std::cout << summary.way << "-way " << summary.shot << "-shot over " << summary.episodes
            << " episodes: " << fmt("%.4f", summary.accuracy) << " +/- "
            << fmt("%.4f", summary.ci95) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot video action recognition: hybrid feature enhancement and "
               "set-matching temporal metrics on pre-extracted frame features"};
  app.require_subcommand(1);

  std::string spec_path, out_path, store_path, config_path, params_path;
  std::string train_store_path, log_path, episode_log_path;
  std::string metric_list = "Diagonal,PlainDTW,Hausdorff,DirectedMHM,BiMHM";
  std::size_t way = 5, shot = 1, queries = 5, episodes = 1000, points = 20, threads = 1;
  std::size_t eval_episodes = 0;
  std::uint64_t seed = 1;
  double tolerance = 1e-4;

  CLI::App* gen = app.add_subcommand("gen-synth", "Generate a synthetic feature store");
  gen->add_option("--spec", spec_path, "Spec file (key = value lines)")->required();
  gen->add_option("--out", out_path, "Output store path")->required();

  CLI::App* bench = app.add_subcommand(
      "bench-metrics", "Compare matching metrics on one shared episode stream");
  bench->add_option("--store", store_path, "Feature store")->required();
  bench->add_option("--way", way, "Classes per episode");
  bench->add_option("--shot", shot, "Supports per class");
  bench->add_option("--metrics", metric_list, "Comma-separated metric names");
  bench->add_option("--episodes", episodes, "Episode count");
  bench->add_option("--seed", seed, "Root seed");
  bench->add_option("--out", out_path, "Output CSV")->required();
  bench->add_option("--queries", queries, "Queries per episode");
  bench->add_option("--threads", threads, "Worker threads");

  CLI::App* grad = app.add_subcommand("grad-check", "Finite-difference gradient verification");
  grad->add_option("--seed", seed, "Root seed");
  grad->add_option("--tolerance", tolerance, "Worst allowed relative error");
  grad->add_option("--points", points, "Random points per component");

  CLI::App* tr = app.add_subcommand("train", "Episodic training");
  tr->add_option("--config", config_path, "Training config")->required();
  tr->add_option("--store", store_path, "Training feature store")->required();
  tr->add_option("--out-params", params_path, "Checkpoint output path")->required();
  tr->add_option("--log", log_path, "Loss CSV output path")->required();

  CLI::App* ev = app.add_subcommand("eval", "Episodic evaluation");
  ev->add_option("--config", config_path, "Config (same keys as training)")->required();
  ev->add_option("--store", store_path, "Evaluation feature store")->required();
  ev->add_option("--params", params_path, "Checkpoint (omitted: fresh seeded init)");
  ev->add_option("--episodes", eval_episodes, "Episode count (0: value from config)");
  ev->add_option("--out", out_path, "Summary CSV output path")->required();
  ev->add_option("--train-store", train_store_path,
                 "Training store for the class-disjointness check");
  ev->add_option("--threads", threads, "Worker threads");
  ev->add_option("--episode-log", episode_log_path, "Per-episode accuracy CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_synth(spec_path, out_path);
    if (bench->parsed()) {
      return cmd_bench(store_path, way, shot, metric_list, episodes, seed, out_path, queries,
                       threads);
    }
    if (grad->parsed()) return cmd_grad_check(seed, tolerance, points);
    if (tr->parsed()) return cmd_train(config_path, store_path, params_path, log_path);
    if (ev->parsed()) {
      return cmd_eval(config_path, store_path, params_path, eval_episodes, out_path,
                      train_store_path, threads, episode_log_path);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
