#include "hyrsm/relation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>

#include "hyrsm/binio.hpp"

namespace hyrsm {

namespace {

const char kParamsMagic[8] = {'H', 'R', 'S', 'M', 'P', 'A', 'R', 'M'};
constexpr std::uint32_t kParamsVersion = 1;

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return random_uniform({rows, cols}, rng, -bound, bound);
}

LstmCellParams make_lstm(std::size_t c, Rng* rng) {
  auto w = [&](std::size_t r, std::size_t n) {
    return rng ? glorot(r, n, *rng) : Tensor::zeros({r, n});
  };
  LstmCellParams p;
  p.wfh = w(c, c); p.wfx = w(c, c); p.bf = Tensor::zeros({1, c});
  p.wih = w(c, c); p.wix = w(c, c); p.bi = Tensor::zeros({1, c});
  p.wch = w(c, c); p.wcx = w(c, c); p.bc = Tensor::zeros({1, c});
  p.woh = w(c, c); p.wox = w(c, c); p.bo = Tensor::zeros({1, c});
  return p;
}

GruCellParams make_gru(std::size_t c, Rng* rng) {
  auto w = [&](std::size_t r, std::size_t n) {
    return rng ? glorot(r, n, *rng) : Tensor::zeros({r, n});
  };
  GruCellParams p;
  p.wz = w(c, c); p.uz = w(c, c); p.bz = Tensor::zeros({1, c});
  p.wr = w(c, c); p.ur = w(c, c); p.br = Tensor::zeros({1, c});
  p.wh = w(c, c); p.uh = w(c, c); p.bh = Tensor::zeros({1, c});
  return p;
}

// One gate's pre-activation for [1 x C] states: h*Wh + x*Wx + b.
Tensor gate_preact(Tape& tape, const Tensor& h, const Tensor& wh, const Tensor& x,
                   const Tensor& wx, const Tensor& b) {
  return add(tape, add(tape, matmul(tape, h, wh), matmul(tape, x, wx)), b);
}

Tensor msa_forward(Tape& tape, const Tensor& f, const RelationParams& params) {
  const std::size_t dh = params.cfg.head_dim();
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> heads;
  heads.reserve(params.msa_heads.size());
  for (const MsaHeadParams& hp : params.msa_heads) {
    Tensor q = matmul(tape, f, hp.wq);
    Tensor k = matmul(tape, f, hp.wk);
    Tensor v = matmul(tape, f, hp.wv);
    Tensor scores = scale(tape, matmul(tape, q, transpose(tape, k)), inv_sqrt_dk);
    Tensor attn = softmax(tape, scores);
    heads.push_back(matmul(tape, attn, v));
  }
  Tensor merged = matmul(tape, concat(tape, heads), params.msa_wo);
  return add(tape, merged, f);
}

Tensor transformer_forward(Tape& tape, const Tensor& f, const RelationParams& params) {
  Tensor t1 = msa_forward(tape, f, params);
  const std::size_t rows = t1.rows();
  Tensor b1 = tile_rows(tape, reshape(tape, params.ffn_b1, {params.ffn_b1.cols()}), rows);
  Tensor b2 = tile_rows(tape, reshape(tape, params.ffn_b2, {params.ffn_b2.cols()}), rows);
  Tensor hidden = gelu(tape, add(tape, matmul(tape, t1, params.ffn_w1), b1));
  Tensor out = add(tape, matmul(tape, hidden, params.ffn_w2), b2);
  return add(tape, out, t1);
}

Tensor lstm_scan(Tape& tape, const Tensor& f, const LstmCellParams& p, bool reverse) {
  const std::size_t t_len = f.rows(), c = f.cols();
  Tensor h = Tensor::zeros({c});
  Tensor cc = Tensor::zeros({c});
  std::vector<Tensor> out(t_len);
  for (std::size_t step = 0; step < t_len; ++step) {
    const std::size_t t = reverse ? t_len - 1 - step : step;
    Tensor x = row_slice(tape, f, t);
    auto [h_next, c_next] = lstm_cell(tape, x, h, cc, p);
    h = h_next;
    cc = c_next;
    out[t] = h;
  }
  return stack_rows(tape, out);
}

Tensor gru_scan(Tape& tape, const Tensor& f, const GruCellParams& p, bool reverse) {
  const std::size_t t_len = f.rows(), c = f.cols();
  Tensor h = Tensor::zeros({c});
  std::vector<Tensor> out(t_len);
  for (std::size_t step = 0; step < t_len; ++step) {
    const std::size_t t = reverse ? t_len - 1 - step : step;
    Tensor x = row_slice(tape, f, t);
    h = gru_cell(tape, x, h, p);
    out[t] = h;
  }
  return stack_rows(tape, out);
}

// Content-canonical processing order for the pool, so that permuting the
// pool permutes the outputs with bit-identical values.
std::vector<std::size_t> canonical_order(const std::vector<Tensor>& descriptors) {
  std::vector<std::size_t> order(descriptors.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return std::lexicographical_compare(
        descriptors[l].values.begin(), descriptors[l].values.end(),
        descriptors[r].values.begin(), descriptors[r].values.end());
  });
  return order;
}

struct AttendResult {
  std::vector<Tensor> enhanced;            // one [C] per member, input order
  std::vector<std::vector<double>> kappa;  // [members x pool], input order
};

AttendResult attend(Tape& tape, const std::vector<Tensor>& members,
                    const std::vector<Tensor>& pool, const RelationParams& params) {
  const std::size_t n = pool.size(), m = members.size();
  const std::size_t d = params.inter_pq.cols();
  const std::vector<std::size_t> order = canonical_order(pool);

  std::vector<Tensor> pool_sorted(n);
  for (std::size_t i = 0; i < n; ++i) pool_sorted[i] = pool[order[i]];
  Tensor p_mat = stack_rows(tape, pool_sorted);
  Tensor q_mat = stack_rows(tape, members);

  Tensor q_proj = matmul(tape, q_mat, params.inter_pq);
  Tensor k_proj = matmul(tape, p_mat, params.inter_pk);
  Tensor scores =
      scale(tape, matmul(tape, q_proj, transpose(tape, k_proj)),
            1.0 / std::sqrt(static_cast<double>(d)));
  Tensor kappa = softmax(tape, scores);
  Tensor mixed = matmul(tape, kappa, p_mat);

  AttendResult res;
  res.enhanced.reserve(m);
  res.kappa.assign(m, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    res.enhanced.push_back(row_slice(tape, mixed, i));
    for (std::size_t pos = 0; pos < n; ++pos) {
      res.kappa[i][order[pos]] = kappa.at(i, pos);
    }
  }
  return res;
}

void require_video(const Tensor& f, std::size_t channels, const char* who) {
  require_rank(f, 2, who);
  if (f.shape[0] == 0) throw DomainError(std::string(who) + ": empty sequence " + shape_str(f));
  if (f.cols() != channels) {
    throw DimensionError(std::string(who) + ": expected " + std::to_string(channels) +
                         " channels, got " + shape_str(f));
  }
}

}  // namespace

IntraKind intra_kind_from_name(const std::string& name) {
  if (name == "MSA") return IntraKind::MSA;
  if (name == "TransformerBlock") return IntraKind::TransformerBlock;
  if (name == "BiLSTM") return IntraKind::BiLSTM;
  if (name == "BiGRU") return IntraKind::BiGRU;
  throw ConfigError("unknown intra_kind '" + name +
                    "', valid names: MSA, TransformerBlock, BiLSTM, BiGRU");
}

std::string intra_kind_name(IntraKind kind) {
  switch (kind) {
    case IntraKind::MSA:
      return "MSA";
    case IntraKind::TransformerBlock:
      return "TransformerBlock";
    case IntraKind::BiLSTM:
      return "BiLSTM";
    case IntraKind::BiGRU:
      return "BiGRU";
  }
  return "?";
}

PoolMode pool_mode_from_name(const std::string& name) {
  if (name == "support-and-query") return PoolMode::SupportAndQuery;
  if (name == "support-only") return PoolMode::SupportOnly;
  throw ConfigError("unknown pool_mode '" + name +
                    "', valid names: support-and-query, support-only");
}

std::string pool_mode_name(PoolMode mode) {
  return mode == PoolMode::SupportAndQuery ? "support-and-query" : "support-only";
}

void RelationConfig::validate() const {
  if (channels == 0) throw ConfigError("channels must be positive");
  if (heads == 0) throw ConfigError("heads must be positive");
  if (channels % heads != 0) {
    throw ConfigError("head count " + std::to_string(heads) + " must divide channels " +
                      std::to_string(channels));
  }
}

// Fresh parameters make the whole relation module an exact identity map:
// the projections that close each residual branch (msa_wo, ffn_w2) start at
// zero and the fusion map starts as [I_C; 0] with zero bias, so enhanced
// features equal the raw features until training moves the weights.  Starting
// from the identity keeps early episodes on the raw-feature geometry instead
// of a random mixing of the pool, which measurably transfers better to
// held-out classes.  Branch-input projections keep the usual symmetric
// uniform init so the zeroed maps receive nonzero gradients at step one.
RelationParams RelationParams::init(const RelationConfig& cfg, Rng& rng) {
  cfg.validate();
  RelationParams p;
  p.cfg = cfg;
  const std::size_t c = cfg.channels;
  if (cfg.intra_kind == IntraKind::MSA || cfg.intra_kind == IntraKind::TransformerBlock) {
    const std::size_t dh = cfg.head_dim();
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      p.msa_heads.push_back({glorot(c, dh, rng), glorot(c, dh, rng), glorot(c, dh, rng)});
    }
    p.msa_wo = Tensor::zeros({c, c});
  }
  if (cfg.intra_kind == IntraKind::TransformerBlock) {
    const std::size_t hidden = cfg.ffn_hidden();
    p.ffn_w1 = glorot(c, hidden, rng);
    p.ffn_b1 = Tensor::zeros({1, hidden});
    p.ffn_w2 = Tensor::zeros({hidden, c});
    p.ffn_b2 = Tensor::zeros({1, c});
  }
  if (cfg.intra_kind == IntraKind::BiLSTM) {
    p.lstm_fwd = make_lstm(c, &rng);
    p.lstm_bwd = make_lstm(c, &rng);
    p.rnn_merge = glorot(c, c, rng);
  }
  if (cfg.intra_kind == IntraKind::BiGRU) {
    p.gru_fwd = make_gru(c, &rng);
    p.gru_bwd = make_gru(c, &rng);
    p.rnn_merge = glorot(c, c, rng);
  }
  p.inter_pq = glorot(c, c, rng);
  p.inter_pk = glorot(c, c, rng);
  p.fuse_w = Tensor::zeros({2 * c, c});
  for (std::size_t i = 0; i < c; ++i) p.fuse_w.at(i, i) = 1.0;
  p.fuse_b = Tensor::zeros({1, c});
  if (cfg.num_classes > 0) p.head_w = glorot(c, cfg.num_classes, rng);
  return p;
}

RelationParams RelationParams::zeros(const RelationConfig& cfg) {
  cfg.validate();
  RelationParams p;
  p.cfg = cfg;
  const std::size_t c = cfg.channels;
  if (cfg.intra_kind == IntraKind::MSA || cfg.intra_kind == IntraKind::TransformerBlock) {
    const std::size_t dh = cfg.head_dim();
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      p.msa_heads.push_back(
          {Tensor::zeros({c, dh}), Tensor::zeros({c, dh}), Tensor::zeros({c, dh})});
    }
    p.msa_wo = Tensor::zeros({c, c});
  }
  if (cfg.intra_kind == IntraKind::TransformerBlock) {
    const std::size_t hidden = cfg.ffn_hidden();
    p.ffn_w1 = Tensor::zeros({c, hidden});
    p.ffn_b1 = Tensor::zeros({1, hidden});
    p.ffn_w2 = Tensor::zeros({hidden, c});
    p.ffn_b2 = Tensor::zeros({1, c});
  }
  if (cfg.intra_kind == IntraKind::BiLSTM) {
    p.lstm_fwd = make_lstm(c, nullptr);
    p.lstm_bwd = make_lstm(c, nullptr);
    p.rnn_merge = Tensor::zeros({c, c});
  }
  if (cfg.intra_kind == IntraKind::BiGRU) {
    p.gru_fwd = make_gru(c, nullptr);
    p.gru_bwd = make_gru(c, nullptr);
    p.rnn_merge = Tensor::zeros({c, c});
  }
  p.inter_pq = Tensor::zeros({c, c});
  p.inter_pk = Tensor::zeros({c, c});
  p.fuse_w = Tensor::zeros({2 * c, c});
  p.fuse_b = Tensor::zeros({1, c});
  if (cfg.num_classes > 0) p.head_w = Tensor::zeros({c, cfg.num_classes});
  return p;
}

void RelationParams::for_each(const std::function<void(const std::string&, Tensor&)>& fn) {
  const IntraKind kind = cfg.intra_kind;
  if (kind == IntraKind::MSA || kind == IntraKind::TransformerBlock) {
    for (std::size_t h = 0; h < msa_heads.size(); ++h) {
      const std::string base = "intra.msa.h" + std::to_string(h) + ".";
      fn(base + "wq", msa_heads[h].wq);
      fn(base + "wk", msa_heads[h].wk);
      fn(base + "wv", msa_heads[h].wv);
    }
    fn("intra.msa.wo", msa_wo);
  }
  if (kind == IntraKind::TransformerBlock) {
    fn("intra.ffn.w1", ffn_w1);
    fn("intra.ffn.b1", ffn_b1);
    fn("intra.ffn.w2", ffn_w2);
    fn("intra.ffn.b2", ffn_b2);
  }
  auto lstm_all = [&](const std::string& base, LstmCellParams& p) {
    fn(base + "wfh", p.wfh); fn(base + "wfx", p.wfx); fn(base + "bf", p.bf);
    fn(base + "wih", p.wih); fn(base + "wix", p.wix); fn(base + "bi", p.bi);
    fn(base + "wch", p.wch); fn(base + "wcx", p.wcx); fn(base + "bc", p.bc);
    fn(base + "woh", p.woh); fn(base + "wox", p.wox); fn(base + "bo", p.bo);
  };
  auto gru_all = [&](const std::string& base, GruCellParams& p) {
    fn(base + "wz", p.wz); fn(base + "uz", p.uz); fn(base + "bz", p.bz);
    fn(base + "wr", p.wr); fn(base + "ur", p.ur); fn(base + "br", p.br);
    fn(base + "wh", p.wh); fn(base + "uh", p.uh); fn(base + "bh", p.bh);
  };
  if (kind == IntraKind::BiLSTM) {
    lstm_all("intra.lstm.fwd.", lstm_fwd);
    lstm_all("intra.lstm.bwd.", lstm_bwd);
    fn("intra.rnn.merge", rnn_merge);
  }
  if (kind == IntraKind::BiGRU) {
    gru_all("intra.gru.fwd.", gru_fwd);
    gru_all("intra.gru.bwd.", gru_bwd);
    fn("intra.rnn.merge", rnn_merge);
  }
  fn("inter.pq", inter_pq);
  fn("inter.pk", inter_pk);
  fn("fuse.w", fuse_w);
  fn("fuse.b", fuse_b);
  if (cfg.num_classes > 0) fn("head.w", head_w);
}

void RelationParams::for_each(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
  const_cast<RelationParams*>(this)->for_each(
      [&fn](const std::string& name, Tensor& t) { fn(name, t); });
}

std::size_t RelationParams::matrix_count() const {
  std::size_t n = 0;
  for_each([&n](const std::string&, const Tensor&) { ++n; });
  return n;
}

RelationParams RelationParams::tracked(Tape& tape) const {
  RelationParams copy = *this;
  copy.for_each([&tape](const std::string&, Tensor& t) { t = tape.watch(t); });
  return copy;
}

bool RelationParams::finite() const {
  bool ok = true;
  for_each([&ok](const std::string&, const Tensor& t) { ok = ok && t.finite(); });
  return ok;
}

void save_params(const RelationParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(kParamsMagic, 8);
  binio::put_u32(out, kParamsVersion);
  params.for_each([&out](const std::string& name, const Tensor& t) {
    binio::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    binio::put_u32(out, static_cast<std::uint32_t>(t.rows()));
    binio::put_u32(out, static_cast<std::uint32_t>(t.cols()));
    for (double v : t.values) binio::put_f64(out, v);
  });
  if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

RelationParams load_params(const std::string& path, const RelationConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  binio::Reader r{in};

  char magic[8];
  r.bytes(magic, 8, "magic");
  for (int i = 0; i < 8; ++i) {
    if (magic[i] != kParamsMagic[i]) {
      throw ParseError("checkpoint magic mismatch, expected HRSMPARM", 0);
    }
  }
  const std::size_t version_at = r.offset;
  const std::uint32_t version = r.u32("version");
  if (version != kParamsVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), version_at);
  }

  std::map<std::string, Tensor> mats;
  while (!r.at_end()) {
    const std::uint32_t name_len = r.u32("matrix name length");
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len, "matrix name");
    const std::uint32_t rows = r.u32("matrix rows");
    const std::uint32_t cols = r.u32("matrix cols");
    const std::size_t at = r.offset;
    if (rows == 0 || cols == 0) {
      throw ParseError("matrix '" + name + "' has zero dimension", at);
    }
    Tensor t = Tensor::zeros({rows, cols});
    for (double& v : t.values) v = r.f64("matrix values");
    if (!mats.emplace(name, std::move(t)).second) {
      throw ParseError("duplicate matrix '" + name + "' in checkpoint", at);
    }
  }

  // The classifier head is optional and its width belongs to whatever store
  // the checkpoint was trained on, so it is taken from the file, not cfg.
  RelationConfig file_cfg = cfg;
  auto head = mats.find("head.w");
  file_cfg.num_classes = head == mats.end() ? 0 : head->second.cols();

  RelationParams params = RelationParams::zeros(file_cfg);
  std::size_t used = 0;
  params.for_each([&](const std::string& name, Tensor& t) {
    auto it = mats.find(name);
    if (it == mats.end()) throw DataError("checkpoint is missing matrix '" + name + "'");
    if (!it->second.same_shape(t)) {
      throw ConfigError("checkpoint matrix '" + name + "' has shape " + shape_str(it->second) +
                        " but configuration expects " + shape_str(t));
    }
    t = it->second;
    ++used;
  });
  if (used != mats.size()) {
    for (const auto& [name, t] : mats) {
      bool known = false;
      params.for_each([&](const std::string& n, Tensor&) { known = known || n == name; });
      if (!known) throw DataError("checkpoint contains unexpected matrix '" + name + "'");
    }
  }
  return params;
}

std::pair<Tensor, Tensor> lstm_cell(Tape& tape, const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev, const LstmCellParams& p) {
  require_rank(x, 1, "lstm_cell");
  require_same_shape(x, h_prev, "lstm_cell");
  require_same_shape(x, c_prev, "lstm_cell");
  const std::size_t c = x.size();
  Tensor xm = reshape(tape, x, {1, c});
  Tensor hm = reshape(tape, h_prev, {1, c});
  Tensor cm = reshape(tape, c_prev, {1, c});

  Tensor f_gate = sigmoid(tape, gate_preact(tape, hm, p.wfh, xm, p.wfx, p.bf));
  Tensor i_gate = sigmoid(tape, gate_preact(tape, hm, p.wih, xm, p.wix, p.bi));
  Tensor c_cand = tanh(tape, gate_preact(tape, hm, p.wch, xm, p.wcx, p.bc));
  Tensor c_next = add(tape, multiply(tape, f_gate, cm), multiply(tape, i_gate, c_cand));
  Tensor o_gate = sigmoid(tape, gate_preact(tape, hm, p.woh, xm, p.wox, p.bo));
  Tensor h_next = multiply(tape, o_gate, tanh(tape, c_next));

  return {reshape(tape, h_next, {c}), reshape(tape, c_next, {c})};
}

Tensor gru_cell(Tape& tape, const Tensor& x, const Tensor& h_prev, const GruCellParams& p) {
  require_rank(x, 1, "gru_cell");
  require_same_shape(x, h_prev, "gru_cell");
  const std::size_t c = x.size();
  Tensor xm = reshape(tape, x, {1, c});
  Tensor hm = reshape(tape, h_prev, {1, c});
  Tensor ones = Tensor::full({1, c}, 1.0);

  Tensor z = sigmoid(tape, gate_preact(tape, xm, p.wz, hm, p.uz, p.bz));
  Tensor r = sigmoid(tape, gate_preact(tape, xm, p.wr, hm, p.ur, p.br));
  Tensor rh = multiply(tape, r, hm);
  Tensor h_cand =
      tanh(tape, add(tape, add(tape, matmul(tape, xm, p.wh), matmul(tape, rh, p.uh)), p.bh));
  Tensor keep = multiply(tape, add(tape, ones, scale(tape, z, -1.0)), hm);
  Tensor h_next = add(tape, keep, multiply(tape, z, h_cand));
  return reshape(tape, h_next, {c});
}

Tensor intra_relation(Tape& tape, const Tensor& f, const RelationParams& params) {
  params.cfg.validate();
  require_video(f, params.cfg.channels, "intra_relation");
  switch (params.cfg.intra_kind) {
    case IntraKind::MSA:
      return msa_forward(tape, f, params);
    case IntraKind::TransformerBlock:
      return transformer_forward(tape, f, params);
    case IntraKind::BiLSTM: {
      Tensor fwd = lstm_scan(tape, f, params.lstm_fwd, false);
      Tensor bwd = lstm_scan(tape, f, params.lstm_bwd, true);
      return matmul(tape, add(tape, fwd, bwd), params.rnn_merge);
    }
    case IntraKind::BiGRU: {
      Tensor fwd = gru_scan(tape, f, params.gru_fwd, false);
      Tensor bwd = gru_scan(tape, f, params.gru_bwd, true);
      return matmul(tape, add(tape, fwd, bwd), params.rnn_merge);
    }
  }
  throw UsageError("intra_relation: unknown kind");
}

InterResult inter_relation(Tape& tape, const std::vector<Tensor>& pool,
                           const RelationParams& params) {
  if (pool.empty()) throw DomainError("inter_relation: empty pool");
  std::vector<Tensor> descriptors;
  descriptors.reserve(pool.size());
  for (const Tensor& f : pool) {
    require_video(f, params.cfg.channels, "inter_relation");
    descriptors.push_back(global_avg_pool(tape, f));
  }
  AttendResult res = attend(tape, descriptors, descriptors, params);
  return InterResult{std::move(res.enhanced), std::move(res.kappa)};
}

Tensor fuse(Tape& tape, const Tensor& f_a, const Tensor& f_e, const RelationParams& params) {
  require_video(f_a, params.cfg.channels, "fuse");
  require_rank(f_e, 1, "fuse");
  if (f_e.size() != params.cfg.channels) {
    throw DimensionError("fuse: descriptor " + shape_str(f_e) + " does not match " +
                         std::to_string(params.cfg.channels) + " channels");
  }
  const std::size_t t_len = f_a.rows();
  Tensor tiled = tile_rows(tape, f_e, t_len);
  Tensor cat = concat(tape, {f_a, tiled});
  Tensor mixed = matmul(tape, cat, params.fuse_w);
  Tensor bias = tile_rows(tape, reshape(tape, params.fuse_b, {params.cfg.channels}), t_len);
  return add(tape, mixed, bias);
}

HybridResult hybrid_relation(Tape& tape, const std::vector<Tensor>& supports,
                             const Tensor& query, const RelationParams& params) {
  if (supports.empty()) throw DomainError("hybrid_relation: empty support set");
  params.cfg.validate();
  const std::size_t ns = supports.size();

  std::vector<Tensor> refined;
  refined.reserve(ns + 1);
  for (const Tensor& s : supports) {
    require_video(s, params.cfg.channels, "hybrid_relation");
    refined.push_back(params.cfg.intra ? intra_relation(tape, s, params) : s);
  }
  require_video(query, params.cfg.channels, "hybrid_relation");
  refined.push_back(params.cfg.intra ? intra_relation(tape, query, params) : query);

  HybridResult result;
  if (!params.cfg.inter) {
    for (std::size_t i = 0; i < ns; ++i) result.supports.push_back({refined[i], {}});
    result.query = {refined[ns], {}};
    return result;
  }

  std::vector<Tensor> descriptors;
  descriptors.reserve(ns + 1);
  for (const Tensor& f : refined) descriptors.push_back(global_avg_pool(tape, f));

  std::vector<std::size_t> pool_members;
  std::vector<Tensor> pool_desc;
  for (std::size_t i = 0; i < ns; ++i) {
    pool_members.push_back(i);
    pool_desc.push_back(descriptors[i]);
  }
  if (params.cfg.pool_mode == PoolMode::SupportAndQuery) {
    pool_members.push_back(ns);
    pool_desc.push_back(descriptors[ns]);
  }

  AttendResult att = attend(tape, descriptors, pool_desc, params);
  for (std::size_t i = 0; i < ns; ++i) {
    result.supports.push_back({fuse(tape, refined[i], att.enhanced[i], params), pool_members});
  }
  result.query = {fuse(tape, refined[ns], att.enhanced[ns], params), pool_members};
  return result;
}

}  // namespace hyrsm
