#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "hyrsm/ops.hpp"
#include "hyrsm/rng.hpp"
#include "hyrsm/tape.hpp"
#include "hyrsm/tensor.hpp"

namespace hyrsm {

// Task-specific feature enhancement: each video's frame features [T x C] are
// first refined within the video (intra), then mixed with pooled descriptors
// of the other videos in the episode (inter), and both parts are fused back
// into a per-frame representation.

enum class IntraKind { MSA, TransformerBlock, BiLSTM, BiGRU };

// Which videos form the pool that inter enhancement attends over.
enum class PoolMode { SupportAndQuery, SupportOnly };

IntraKind intra_kind_from_name(const std::string& name);
std::string intra_kind_name(IntraKind kind);
PoolMode pool_mode_from_name(const std::string& name);
std::string pool_mode_name(PoolMode mode);

struct RelationConfig {
  std::size_t channels = 16;
  std::size_t heads = 4;
  IntraKind intra_kind = IntraKind::MSA;
  bool intra = true;
  bool inter = true;
  PoolMode pool_mode = PoolMode::SupportAndQuery;
  // Width of the auxiliary classifier head (number of real training classes);
  // 0 means no head is allocated.
  std::size_t num_classes = 0;

  std::size_t head_dim() const { return channels / heads; }
  std::size_t ffn_hidden() const { return 2 * channels; }
  void validate() const;
};

struct LstmCellParams {
  Tensor wfh, wfx, bf;  // forget gate
  Tensor wih, wix, bi;  // input gate
  Tensor wch, wcx, bc;  // candidate state
  Tensor woh, wox, bo;  // output gate
};

struct GruCellParams {
  Tensor wz, uz, bz;  // update gate
  Tensor wr, ur, br;  // reset gate
  Tensor wh, uh, bh;  // candidate state
};

struct MsaHeadParams {
  Tensor wq, wk, wv;  // [C x C/h]
};

struct RelationParams {
  RelationConfig cfg;

  std::vector<MsaHeadParams> msa_heads;  // MSA and TransformerBlock
  Tensor msa_wo;                         // [C x C]
  Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2; // TransformerBlock only
  LstmCellParams lstm_fwd, lstm_bwd;     // BiLSTM only
  GruCellParams gru_fwd, gru_bwd;        // BiGRU only
  Tensor rnn_merge;                      // [C x C], BiLSTM / BiGRU
  Tensor inter_pq, inter_pk;             // [C x C]
  Tensor fuse_w, fuse_b;                 // [2C x C], [1 x C]
  Tensor head_w;                         // [C x num_classes]

  static RelationParams init(const RelationConfig& cfg, Rng& rng);
  static RelationParams zeros(const RelationConfig& cfg);

  // Enumerates every allocated matrix in a fixed canonical order.
  void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
  void for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const;
  std::size_t matrix_count() const;

  // Tracked mirror whose matrices are watched leaves of `tape`.
  RelationParams tracked(Tape& tape) const;

  bool finite() const;
};

// Binary checkpoint round-trip (bit-exact).
void save_params(const RelationParams& params, const std::string& path);
RelationParams load_params(const std::string& path, const RelationConfig& cfg);

// Intra-video enhancement, [T x C] -> [T x C], variant chosen by cfg.
Tensor intra_relation(Tape& tape, const Tensor& f, const RelationParams& params);

// Single recurrent steps (used by the bidirectional scans; forward-only).
std::pair<Tensor, Tensor> lstm_cell(Tape& tape, const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev, const LstmCellParams& p);
Tensor gru_cell(Tape& tape, const Tensor& x, const Tensor& h_prev, const GruCellParams& p);

struct InterResult {
  // Enhanced pooled descriptor per pool member, in input order.
  std::vector<Tensor> enhanced;
  // Attention weights: kappa[i][j] is member i's weight on member j.
  std::vector<std::vector<double>> kappa;
};

// Cross-video enhancement over a pool of [T x C] videos. Each member's
// descriptor is a softmax-weighted mixture of all pooled descriptors.
InterResult inter_relation(Tape& tape, const std::vector<Tensor>& pool,
                           const RelationParams& params);

// Combines per-frame features [T x C] with a video-level descriptor [C]:
// the descriptor is tiled over time, concatenated channel-wise and passed
// through a shared per-frame linear map back to C channels.
Tensor fuse(Tape& tape, const Tensor& f_a, const Tensor& f_e, const RelationParams& params);

struct EnhancedFeatures {
  Tensor features;                        // [T x C]
  std::vector<std::size_t> pool_members;  // indices into supports (and query = supports.size())
};

struct HybridResult {
  std::vector<EnhancedFeatures> supports;
  EnhancedFeatures query;
};

// Full enhancement of one episode's supports plus one query. The inter pool
// is the supports plus the current query (SupportAndQuery) or the supports
// alone (SupportOnly); in both modes every video, query included, is enhanced
// against that pool.
HybridResult hybrid_relation(Tape& tape, const std::vector<Tensor>& supports,
                             const Tensor& query, const RelationParams& params);

}  // namespace hyrsm
