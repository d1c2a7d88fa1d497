#include "hyrsm/data.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hyrsm/binio.hpp"

namespace hyrsm {

namespace {

const char kStoreMagic[8] = {'H', 'R', 'S', 'M', 'F', 'E', 'A', 'T'};
constexpr std::uint32_t kStoreVersion = 1;

std::vector<double> row_of(const Tensor& f, std::size_t t) {
  const std::size_t c = f.cols();
  return std::vector<double>(f.values.begin() + static_cast<std::ptrdiff_t>(t * c),
                             f.values.begin() + static_cast<std::ptrdiff_t>((t + 1) * c));
}

Tensor from_rows(const std::vector<std::vector<double>>& rows) {
  Tensor out = Tensor::zeros({rows.size(), rows.front().size()});
  for (std::size_t t = 0; t < rows.size(); ++t) {
    std::copy(rows[t].begin(), rows[t].end(), out.values.begin() + static_cast<std::ptrdiff_t>(t * rows[t].size()));
  }
  return out;
}

// All warps permute whole frames, so the multiset of frame vectors in a video
// is never changed, only their order. Magnitude 0 draws nothing from the rng
// and leaves the video untouched.
Tensor apply_warp(const Tensor& f, const SynthSpec& spec, Rng& rng) {
  const std::size_t t_len = f.rows();
  if (spec.warp == WarpMode::None || spec.warp_magnitude == 0 || t_len < 2) return f;

  std::vector<std::vector<double>> rows;
  rows.reserve(t_len);
  for (std::size_t t = 0; t < t_len; ++t) rows.push_back(row_of(f, t));

  if (spec.warp == WarpMode::CyclicShift) {
    const std::size_t offset = rng.uniform_int(spec.warp_magnitude + 1);
    std::rotate(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(offset), rows.end());
  } else if (spec.warp == WarpMode::SegmentReorder) {
    // Swaps two disjoint blocks of warp_magnitude frames (clamped to fit).
    const std::size_t len = std::min(spec.warp_magnitude, t_len / 2);
    if (len >= 1) {
      const std::size_t a = rng.uniform_int(t_len - 2 * len + 1);
      const std::size_t b = a + len + rng.uniform_int(t_len - 2 * len - a + 1);
      for (std::size_t i = 0; i < len; ++i) std::swap(rows[a + i], rows[b + i]);
    }
  } else if (spec.warp == WarpMode::Jitter) {
    // Each frame moves by less than warp_magnitude positions: frames are
    // re-sorted by t + U[0, magnitude).
    std::vector<double> key(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
      key[t] = static_cast<double>(t) + rng.uniform() * static_cast<double>(spec.warp_magnitude);
    }
    std::vector<std::size_t> order(t_len);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&key](std::size_t l, std::size_t r) { return key[l] < key[r]; });
    std::vector<std::vector<double>> shuffled(t_len);
    for (std::size_t t = 0; t < t_len; ++t) shuffled[t] = rows[order[t]];
    rows = std::move(shuffled);
  }
  return from_rows(rows);
}

}  // namespace

WarpMode warp_mode_from_name(const std::string& name) {
  if (name == "none") return WarpMode::None;
  if (name == "cyclic-shift") return WarpMode::CyclicShift;
  if (name == "segment-reorder") return WarpMode::SegmentReorder;
  if (name == "jitter") return WarpMode::Jitter;
  throw ConfigError("unknown warp '" + name +
                    "', valid names: none, cyclic-shift, segment-reorder, jitter");
}

std::string warp_mode_name(WarpMode mode) {
  switch (mode) {
    case WarpMode::None:
      return "none";
    case WarpMode::CyclicShift:
      return "cyclic-shift";
    case WarpMode::SegmentReorder:
      return "segment-reorder";
    case WarpMode::Jitter:
      return "jitter";
  }
  return "?";
}

void SynthSpec::validate() const {
  if (classes == 0) throw ConfigError("classes must be positive");
  if (videos_per_class == 0) throw ConfigError("videos_per_class must be positive");
  if (frames == 0) throw ConfigError("frames must be positive");
  if (channels == 0) throw ConfigError("channels must be positive");
  if (!(sigma_between > 0.0)) throw ConfigError("sigma_between must be > 0");
  if (!(sigma_within > 0.0)) throw ConfigError("sigma_within must be > 0");
  if (warp_magnitude >= frames) {
    throw ConfigError("warp_magnitude " + std::to_string(warp_magnitude) +
                      " must be smaller than frames " + std::to_string(frames));
  }
}

void FeatureStore::validate() const {
  const std::size_t c = channels();
  for (std::size_t i = 0; i < videos.size(); ++i) {
    const FrameSequence& v = videos[i];
    if (v.label >= class_names.size()) {
      throw DataError("video " + std::to_string(i) + " has label " + std::to_string(v.label) +
                      " outside the class table of size " + std::to_string(class_names.size()));
    }
    require_rank(v.features, 2, "FeatureStore");
    if (v.features.rows() == 0) {
      throw DataError("video " + std::to_string(i) + " has no frames");
    }
    if (v.features.cols() != c) {
      throw DataError("video " + std::to_string(i) + " has " +
                      std::to_string(v.features.cols()) + " channels, store has " +
                      std::to_string(c));
    }
  }
}

std::vector<std::vector<std::size_t>> FeatureStore::videos_by_class() const {
  std::vector<std::vector<std::size_t>> by_class(class_names.size());
  for (std::size_t i = 0; i < videos.size(); ++i) by_class[videos[i].label].push_back(i);
  return by_class;
}

FeatureStore generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(substream_seed(spec.seed, kStreamSynth, 0));

  FeatureStore store;
  {
    std::ostringstream p;
    p << "synthetic classes=" << spec.classes << " videos_per_class=" << spec.videos_per_class
      << " frames=" << spec.frames << " channels=" << spec.channels
      << " sigma_between=" << spec.sigma_between << " sigma_within=" << spec.sigma_within
      << " warp=" << warp_mode_name(spec.warp) << " warp_magnitude=" << spec.warp_magnitude
      << " seed=" << spec.seed << " class_offset=" << spec.class_offset;
    store.provenance = p.str();
  }

  for (std::size_t k = 0; k < spec.classes; ++k) {
    store.class_names.push_back("class_" + std::to_string(spec.class_offset + k));
  }

  for (std::size_t k = 0; k < spec.classes; ++k) {
    // Class template: a shared center plus one signature direction per frame,
    // both at between-class scale, so classes differ in appearance and in
    // temporal structure.
    std::vector<double> center(spec.channels);
    for (double& v : center) v = spec.sigma_between * rng.normal();
    std::vector<std::vector<double>> signature(spec.frames, std::vector<double>(spec.channels));
    for (auto& row : signature) {
      for (double& v : row) v = spec.sigma_between * rng.normal();
    }

    for (std::size_t vid = 0; vid < spec.videos_per_class; ++vid) {
      Tensor f = Tensor::zeros({spec.frames, spec.channels});
      for (std::size_t t = 0; t < spec.frames; ++t) {
        for (std::size_t c = 0; c < spec.channels; ++c) {
          f.at(t, c) = center[c] + signature[t][c] + spec.sigma_within * rng.normal();
        }
      }
      store.videos.push_back({static_cast<std::uint32_t>(k), apply_warp(f, spec, rng)});
    }
  }
  return store;
}

void write_store(const FeatureStore& store, const std::string& path) {
  store.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(kStoreMagic, 8);
  binio::put_u32(out, kStoreVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(store.videos.size()));
  binio::put_u32(out, static_cast<std::uint32_t>(store.channels()));
  for (const FrameSequence& v : store.videos) {
    binio::put_u32(out, v.label);
    binio::put_u32(out, static_cast<std::uint32_t>(v.features.rows()));
    for (double x : v.features.values) binio::put_f32(out, static_cast<float>(x));
  }
  if (!out) throw DataError("failed writing store '" + path + "'");

  const std::string classes_path = path + ".classes";
  std::ofstream cls(classes_path, std::ios::trunc);
  if (!cls) throw DataError("cannot open '" + classes_path + "' for writing");
  for (const std::string& name : store.class_names) cls << name << "\n";
  if (!cls) throw DataError("failed writing class table '" + classes_path + "'");
}

FeatureStore read_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open store '" + path + "'");
  binio::Reader r{in};

  char magic[8];
  r.bytes(magic, 8, "magic");
  for (int i = 0; i < 8; ++i) {
    if (magic[i] != kStoreMagic[i]) {
      throw ParseError("store magic mismatch, expected HRSMFEAT", 0);
    }
  }
  const std::size_t version_at = r.offset;
  const std::uint32_t version = r.u32("version");
  if (version != kStoreVersion) {
    throw ParseError("unsupported store version " + std::to_string(version), version_at);
  }
  const std::uint32_t count = r.u32("video count");
  const std::size_t channels_at = r.offset;
  const std::uint32_t channels = r.u32("channel count");
  if (count > 0 && channels == 0) throw ParseError("store has zero channels", channels_at);

  FeatureStore store;
  store.provenance = "file:" + path;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t label = r.u32("video label");
    const std::size_t frames_at = r.offset;
    const std::uint32_t frames = r.u32("frame count");
    if (frames == 0) {
      throw ParseError("video " + std::to_string(i) + " has zero frames", frames_at);
    }
    Tensor f = Tensor::zeros({frames, channels});
    for (double& x : f.values) x = static_cast<double>(r.f32("frame values"));
    store.videos.push_back({label, std::move(f)});
  }
  if (!r.at_end()) {
    throw ParseError("trailing bytes after the last video", r.offset);
  }

  const std::string classes_path = path + ".classes";
  std::ifstream cls(classes_path);
  if (!cls) throw DataError("missing class table '" + classes_path + "'");
  std::string line;
  while (std::getline(cls, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    store.class_names.push_back(line);
  }
  while (!store.class_names.empty() && store.class_names.back().empty()) {
    store.class_names.pop_back();
  }

  store.validate();
  return store;
}

}  // namespace hyrsm
