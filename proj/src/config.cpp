#include "hyrsm/config.hpp"

#include <fstream>
#include <sstream>

#include "hyrsm/data.hpp"
#include "hyrsm/episodic.hpp"
#include "hyrsm/metrics.hpp"

namespace hyrsm {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

KvMap parse_kv_text(const std::string& text, const std::string& origin) {
  KvMap kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value', got '" +
                        stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (!kv.emplace(key, value).second) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

KvMap parse_kv_file(const std::string& path) {
  return parse_kv_text(read_text_file(path), path);
}

const std::string* KvReader::raw(const std::string& key) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

std::string KvReader::get_str(const std::string& key, const std::string& fallback) {
  const std::string* v = raw(key);
  return v ? *v : fallback;
}

std::size_t KvReader::get_size(const std::string& key, std::size_t fallback) {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

std::uint64_t KvReader::get_u64(const std::string& key, std::uint64_t fallback) {
  const std::string* v = raw(key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    if (!v->empty() && (*v)[0] == '-') throw std::invalid_argument("negative");
    const std::uint64_t out = std::stoull(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": key '" + key + "' needs a non-negative integer, got '" + *v +
                      "'");
  }
}

double KvReader::get_double(const std::string& key, double fallback) {
  const std::string* v = raw(key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    const double out = std::stod(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": key '" + key + "' needs a number, got '" + *v + "'");
  }
}

bool KvReader::get_bool(const std::string& key, bool fallback) {
  const std::string* v = raw(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw ConfigError(origin_ + ": key '" + key + "' needs true or false, got '" + *v + "'");
}

void KvReader::finish() const {
  std::string unknown;
  for (const auto& [key, value] : kv_) {
    if (!used_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) {
    throw ConfigError(origin_ + ": unknown keys: " + unknown);
  }
}

SynthSpec SynthSpec::from_file(const std::string& path) {
  return from_text(read_text_file(path), path);
}

SynthSpec SynthSpec::from_text(const std::string& text, const std::string& origin) {
  KvReader r(parse_kv_text(text, origin), origin);
  SynthSpec spec;
  spec.classes = r.get_size("classes", spec.classes);
  spec.videos_per_class = r.get_size("videos_per_class", spec.videos_per_class);
  spec.frames = r.get_size("frames", spec.frames);
  spec.channels = r.get_size("channels", spec.channels);
  spec.sigma_between = r.get_double("sigma_between", spec.sigma_between);
  spec.sigma_within = r.get_double("sigma_within", spec.sigma_within);
  spec.warp = warp_mode_from_name(r.get_str("warp", warp_mode_name(spec.warp)));
  spec.warp_magnitude = r.get_size("warp_magnitude", spec.warp_magnitude);
  spec.seed = r.get_u64("seed", spec.seed);
  spec.class_offset = r.get_size("class_offset", spec.class_offset);
  r.finish();
  spec.validate();
  return spec;
}

TrainConfig TrainConfig::from_file(const std::string& path) {
  return from_text(read_text_file(path), path);
}

TrainConfig TrainConfig::from_text(const std::string& text, const std::string& origin) {
  KvReader r(parse_kv_text(text, origin), origin);
  TrainConfig cfg;
  cfg.way = r.get_size("way", cfg.way);
  cfg.shot = r.get_size("shot", cfg.shot);
  cfg.queries = r.get_size("queries", cfg.queries);
  cfg.frames = r.get_size("frames", cfg.frames);
  cfg.channels = r.get_size("channels", cfg.channels);
  cfg.heads = r.get_size("heads", cfg.heads);
  cfg.metric.kind = metric_kind_from_name(r.get_str("metric", metric_name(cfg.metric.kind)));
  cfg.metric.direction =
      direction_from_name(r.get_str("direction", direction_name(cfg.metric.direction)));
  cfg.intra = r.get_bool("intra", cfg.intra);
  cfg.inter = r.get_bool("inter", cfg.inter);
  cfg.intra_kind = intra_kind_from_name(r.get_str("intra_kind", intra_kind_name(cfg.intra_kind)));
  cfg.pool_mode = pool_mode_from_name(r.get_str("pool_mode", pool_mode_name(cfg.pool_mode)));
  cfg.lr = r.get_double("lr", cfg.lr);
  cfg.beta1 = r.get_double("beta1", cfg.beta1);
  cfg.beta2 = r.get_double("beta2", cfg.beta2);
  cfg.epsilon = r.get_double("epsilon", cfg.epsilon);
  cfg.lambda = r.get_double("lambda", cfg.lambda);
  cfg.tau = r.get_double("tau", cfg.tau);
  cfg.train_episodes = r.get_size("train_episodes", cfg.train_episodes);
  cfg.eval_episodes = r.get_size("eval_episodes", cfg.eval_episodes);
  cfg.seed = r.get_u64("seed", cfg.seed);
  r.finish();
  cfg.validate();
  return cfg;
}

}  // namespace hyrsm
