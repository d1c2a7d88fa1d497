#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyrsm/rng.hpp"
#include "hyrsm/tensor.hpp"

namespace hyrsm {

// Pre-extracted frame features for labeled videos, plus a synthetic generator
// with controllable temporal misalignment. Stores are plain value types and
// immutable once built, so they can be shared across evaluation threads.

enum class WarpMode { None, CyclicShift, SegmentReorder, Jitter };

WarpMode warp_mode_from_name(const std::string& name);
std::string warp_mode_name(WarpMode mode);

struct SynthSpec {
  std::size_t classes = 16;
  std::size_t videos_per_class = 20;
  std::size_t frames = 8;
  std::size_t channels = 16;
  // Scale of class centers and per-frame class signatures (between-class
  // separation) and of the per-video noise (within-class spread).
  double sigma_between = 2.0;
  double sigma_within = 0.5;
  WarpMode warp = WarpMode::None;
  std::size_t warp_magnitude = 0;
  std::uint64_t seed = 1;
  // Added to generated class names so separately generated train and test
  // stores get disjoint name tables.
  std::size_t class_offset = 0;

  void validate() const;
  static SynthSpec from_file(const std::string& path);
  static SynthSpec from_text(const std::string& text, const std::string& origin);
};

struct FrameSequence {
  std::uint32_t label = 0;
  Tensor features;  // [T x C]
};

struct FeatureStore {
  std::vector<FrameSequence> videos;
  std::vector<std::string> class_names;  // index = label
  std::string provenance;

  std::size_t channels() const { return videos.empty() ? 0 : videos.front().features.cols(); }
  std::size_t num_classes() const { return class_names.size(); }

  // Labels index the name table, every sequence is [T>=1 x C] with one C
  // across the store.
  void validate() const;

  // Video indices grouped by label; one entry per class-table row.
  std::vector<std::vector<std::size_t>> videos_by_class() const;
};

FeatureStore generate(const SynthSpec& spec);

// Binary store file plus an adjacent plain-text "<path>.classes" name table,
// one name per line, line index = label. Values are stored as f32.
void write_store(const FeatureStore& store, const std::string& path);
FeatureStore read_store(const std::string& path);

}  // namespace hyrsm
