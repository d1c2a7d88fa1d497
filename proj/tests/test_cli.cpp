#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"

namespace {

struct RunResult {
  int code = -1;
  std::string output;
};

std::string cli_path() {
  const char* path = std::getenv("HYRSM_CLI");
  REQUIRE_MESSAGE(path != nullptr, "HYRSM_CLI must point at the command line binary");
  return path;
}

RunResult run(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult res;
  char buf[512];
  while (std::fgets(buf, sizeof(buf), pipe) != nullptr) res.output += buf;
  const int status = pclose(pipe);
  res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(bool(in), ("missing file " + path));
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

// files shared by the cases below, created once
struct Workspace {
  std::string dir = "/tmp/hyrsm_cli_test";
  std::string spec = dir + "/store.spec";
  std::string store = dir + "/train.store";
  std::string eval_spec = dir + "/eval.spec";
  std::string eval_store = dir + "/eval.store";
  std::string config = dir + "/train.cfg";

  Workspace() {
    [[maybe_unused]] int rc = std::system(("mkdir -p " + dir).c_str());
    spit(spec,
         "classes = 4\nvideos_per_class = 4\nframes = 4\nchannels = 8\n"
         "sigma_between = 2.0\nsigma_within = 0.5\nwarp = cyclic-shift\n"
         "warp_magnitude = 2\nseed = 5\n");
    spit(eval_spec,
         "classes = 4\nvideos_per_class = 4\nframes = 4\nchannels = 8\n"
         "sigma_between = 2.0\nsigma_within = 0.5\nwarp = cyclic-shift\n"
         "warp_magnitude = 2\nseed = 6\nclass_offset = 4\n");
    spit(config,
         "way = 3\nshot = 1\nqueries = 3\nframes = 4\nchannels = 8\nheads = 2\n"
         "train_episodes = 8\neval_episodes = 10\nlr = 0.002\nseed = 3\n");
    RunResult gen = run("gen-synth --spec " + spec + " --out " + store);
    REQUIRE_MESSAGE(gen.code == 0, gen.output);
    RunResult gen2 = run("gen-synth --spec " + eval_spec + " --out " + eval_store);
    REQUIRE_MESSAGE(gen2.code == 0, gen2.output);
  }
};

Workspace& workspace() {
  static Workspace ws;
  return ws;
}

}  // namespace

TEST_CASE("cli entry points and argument errors") {
  CHECK(run("").code == 1);
  CHECK(run("--help").code == 0);
  CHECK(run("polish --shine").code == 1);
  RunResult missing = run("gen-synth --out /tmp/x.store");
  CHECK(missing.code == 1);  // --spec is required
}

TEST_CASE("store generation is reproducible") {
  Workspace& ws = workspace();
  RunResult first = run("gen-synth --spec " + ws.spec + " --out " + ws.dir + "/again.store");
  CHECK(first.code == 0);
  CHECK(first.output.find("16 videos") != std::string::npos);
  CHECK(slurp(ws.dir + "/again.store") == slurp(ws.store));
  CHECK(slurp(ws.dir + "/again.store.classes") == slurp(ws.store + ".classes"));

  RunResult bad = run("gen-synth --spec /nonexistent.spec --out " + ws.dir + "/x.store");
  CHECK(bad.code == 1);
  RunResult invalid = run("gen-synth --spec " + ws.config + " --out " + ws.dir + "/x.store");
  CHECK(invalid.code == 1);  // train keys are not store keys
}

TEST_CASE("metric comparison emits a stable csv") {
  Workspace& ws = workspace();
  const std::string base = "bench-metrics --store " + ws.store +
                           " --way 3 --shot 1 --episodes 30 --seed 2 --queries 3";
  RunResult a = run(base + " --out " + ws.dir + "/bench_a.csv");
  REQUIRE_MESSAGE(a.code == 0, a.output);
  const std::string csv = slurp(ws.dir + "/bench_a.csv");
  CHECK(csv.rfind("metric,way,shot,episodes,accuracy,ci95\n", 0) == 0);
  CHECK(csv.find("\nBiMHM,3,1,30,") != std::string::npos);
  CHECK(csv.find("Diagonal,3,1,30,") != std::string::npos);
  CHECK(csv.find("PlainDTW,") != std::string::npos);
  CHECK(csv.find("Hausdorff,") != std::string::npos);
  CHECK(csv.find("DirectedMHM,") != std::string::npos);

  RunResult b = run(base + " --out " + ws.dir + "/bench_b.csv");
  CHECK(b.code == 0);
  CHECK(slurp(ws.dir + "/bench_b.csv") == csv);
  RunResult c = run(base + " --threads 3 --out " + ws.dir + "/bench_c.csv");
  CHECK(c.code == 0);
  CHECK(slurp(ws.dir + "/bench_c.csv") == csv);

  SUBCASE("direction suffixes select a side") {
    RunResult d = run("bench-metrics --store " + ws.store +
                      " --way 3 --episodes 10 --metrics DirectedMHM:backward --out " + ws.dir +
                      "/bench_d.csv");
    CHECK(d.code == 0);
    CHECK(slurp(ws.dir + "/bench_d.csv").find("DirectedMHM:backward,") != std::string::npos);
  }
  SUBCASE("bad inputs map to the right exit codes") {
    CHECK(run("bench-metrics --store " + ws.store + " --metrics BiMHM:sideways --out " + ws.dir +
              "/x.csv").code == 1);
    CHECK(run("bench-metrics --store " + ws.store + " --metrics , --out " + ws.dir + "/x.csv")
              .code == 1);
    CHECK(run("bench-metrics --store /nonexistent.store --out " + ws.dir + "/x.csv").code == 2);
  }
}

TEST_CASE("gradient verification subcommand") {
  RunResult ok = run("grad-check --seed 4 --points 2");
  CHECK(ok.code == 0);
  CHECK(ok.output.find("all components within") != std::string::npos);

  RunResult strict = run("grad-check --seed 4 --points 2 --tolerance 1e-15");
  CHECK(strict.code == 2);
  CHECK(strict.output.find("exceeded") != std::string::npos);
}

TEST_CASE("training writes a checkpoint and a loss log") {
  Workspace& ws = workspace();
  const std::string base = "train --config " + ws.config + " --store " + ws.store;
  RunResult a = run(base + " --out-params " + ws.dir + "/a.params --log " + ws.dir + "/a.log.csv");
  REQUIRE_MESSAGE(a.code == 0, a.output);
  const std::string log = slurp(ws.dir + "/a.log.csv");
  CHECK(log.rfind("episode_index,episodic_loss,reg_loss,total_loss\n", 0) == 0);
  CHECK(log.find("\n7,") != std::string::npos);  // 8 episodes, zero based

  RunResult b = run(base + " --out-params " + ws.dir + "/b.params --log " + ws.dir + "/b.log.csv");
  CHECK(b.code == 0);
  CHECK(slurp(ws.dir + "/b.params") == slurp(ws.dir + "/a.params"));
  CHECK(slurp(ws.dir + "/b.log.csv") == log);

  SUBCASE("config typos fail fast") {
    spit(ws.dir + "/typo.cfg", "way = 3\nlearning_rate = 0.1\n");
    CHECK(run("train --config " + ws.dir + "/typo.cfg --store " + ws.store + " --out-params " +
              ws.dir + "/x.params --log " + ws.dir + "/x.csv").code == 1);
  }
  SUBCASE("store and config must agree") {
    spit(ws.dir + "/wide.cfg", "way = 3\nchannels = 16\ntrain_episodes = 2\n");
    CHECK(run("train --config " + ws.dir + "/wide.cfg --store " + ws.store + " --out-params " +
              ws.dir + "/x.params --log " + ws.dir + "/x.csv").code == 1);
  }
}

TEST_CASE("evaluation consumes checkpoints and reports accuracy") {
  Workspace& ws = workspace();
  run("train --config " + ws.config + " --store " + ws.store + " --out-params " + ws.dir +
      "/eval.params --log " + ws.dir + "/eval_train.log.csv");

  const std::string base = "eval --config " + ws.config + " --store " + ws.eval_store +
                           " --params " + ws.dir + "/eval.params --episodes 12";
  RunResult a = run(base + " --out " + ws.dir + "/eval_a.csv --episode-log " + ws.dir +
                    "/eval_a.episodes.csv");
  REQUIRE_MESSAGE(a.code == 0, a.output);
  const std::string csv = slurp(ws.dir + "/eval_a.csv");
  CHECK(csv.rfind("way,shot,episodes,accuracy,ci95\n", 0) == 0);
  CHECK(csv.find("\n3,1,12,") != std::string::npos);
  const std::string episodes = slurp(ws.dir + "/eval_a.episodes.csv");
  CHECK(episodes.rfind("episode_index,accuracy\n", 0) == 0);
  CHECK(episodes.find("\n11,") != std::string::npos);

  RunResult b = run(base + " --threads 4 --out " + ws.dir + "/eval_b.csv");
  CHECK(b.code == 0);
  CHECK(slurp(ws.dir + "/eval_b.csv") == csv);

  SUBCASE("a fresh initialization stands in for missing params") {
    RunResult fresh = run("eval --config " + ws.config + " --store " + ws.eval_store +
                          " --episodes 6 --out " + ws.dir + "/eval_fresh.csv");
    CHECK(fresh.code == 0);
    CHECK(slurp(ws.dir + "/eval_fresh.csv").find("\n3,1,6,") != std::string::npos);
  }
  SUBCASE("shared class names between train and eval stores are refused") {
    RunResult overlap = run("eval --config " + ws.config + " --store " + ws.eval_store +
                            " --train-store " + ws.eval_store + " --episodes 6 --out " + ws.dir +
                            "/x.csv");
    CHECK(overlap.code == 1);
    CHECK(overlap.output.find("share classes") != std::string::npos);
    RunResult disjoint = run("eval --config " + ws.config + " --store " + ws.eval_store +
                             " --train-store " + ws.store + " --episodes 6 --out " + ws.dir +
                             "/ok.csv");
    CHECK(disjoint.code == 0);
  }
  SUBCASE("a corrupt checkpoint is an io failure") {
    spit(ws.dir + "/junk.params", "not a checkpoint");
    CHECK(run("eval --config " + ws.config + " --store " + ws.eval_store + " --params " + ws.dir +
              "/junk.params --episodes 4 --out " + ws.dir + "/x.csv").code == 2);
  }
}
