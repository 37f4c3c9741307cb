#include "gv/models.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "gv/rng.hpp"

namespace gv::model {

namespace {

using nlohmann::json;

Linear make_linear(int in, int out, Rng& rng) {
  Linear l;
  l.w = Tensor::zeros({in, out});
  l.b = Tensor::zeros({out});
  const double std_dev = std::sqrt(2.0 / in);  // Kaiming fan-in
  for (double& v : l.w.data) v = rng.normal() * std_dev;
  return l;
}

Mlp make_mlp(const std::vector<int>& dims, Mlp::Act act, bool with_norm, Rng& rng) {
  Mlp mlp;
  mlp.act = act;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) mlp.layers.push_back(make_linear(dims[i], dims[i + 1], rng));
  if (with_norm) {
    const int width = dims.back();
    Tensor gain = Tensor::zeros({width});
    for (double& v : gain.data) v = 1.0;
    mlp.norm = {std::move(gain), Tensor::zeros({width})};
  }
  return mlp;
}

Var apply_linear(Tape& tape, const Lease& lease, const Linear& l, Var x) {
  return tape.add_rowvec(tape.matmul(x, lease.of(l.w)), lease.of(l.b));
}

Var apply_mlp(Tape& tape, const Lease& lease, const Mlp& mlp, Var x) {
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    x = apply_linear(tape, lease, mlp.layers[i], x);
    if (i + 1 < mlp.layers.size())
      x = mlp.act == Mlp::Act::Relu ? tape.relu(x) : tape.leaky_relu(x, mlp.leaky_slope);
  }
  if (mlp.norm) x = tape.layer_norm(x, lease.of(mlp.norm->first), lease.of(mlp.norm->second));
  return x;
}

void visit_linear(const std::string& prefix, Linear& l, const ParamVisitor& fn) {
  fn(prefix + ".w", l.w);
  fn(prefix + ".b", l.b);
}

void visit_mlp(const std::string& prefix, Mlp& mlp, const ParamVisitor& fn) {
  for (std::size_t i = 0; i < mlp.layers.size(); ++i)
    visit_linear(prefix + ".l" + std::to_string(i), mlp.layers[i], fn);
  if (mlp.norm) {
    fn(prefix + ".ln.gain", mlp.norm->first);
    fn(prefix + ".ln.bias", mlp.norm->second);
  }
}

std::int64_t count_params(const std::function<void(const ParamVisitor&)>& visit) {
  std::int64_t count = 0;
  visit([&](const std::string&, Tensor& t) { count += static_cast<std::int64_t>(t.numel()); });
  return count;
}

}  // namespace

ElectionGraph build_ebg(const PreferenceProfile& profile) {
  const int n = profile.scores.rows;
  const int m = profile.scores.cols;
  if (n < 1 || m < 1) throw std::invalid_argument("build_ebg: empty profile");
  ElectionGraph g;
  g.n = n;
  g.m = m;
  g.node_features = Tensor::zeros({n + m, 2});
  for (int v = 0; v < n; ++v) g.node_features.at(v, 0) = 1.0;
  for (int c = 0; c < m; ++c) g.node_features.at(n + c, 1) = 1.0;
  g.edge_features = Tensor::zeros({n * m, 1});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) g.edge_features.data[static_cast<std::size_t>(i) * m + j] = profile.scores.at(i, j);
  return g;
}

GraphBatch make_batch(std::span<const std::pair<int, int>> shapes,
                      const std::vector<std::vector<double>>* candidate_extra) {
  GraphBatch b;
  b.node_feat_dim = candidate_extra ? 3 : 2;
  for (auto [n, m] : shapes) {
    b.nodes += n + m;
    b.pairs += n * m;
  }
  b.node_features = Tensor::zeros({b.nodes, b.node_feat_dim});
  b.pair_voter.reserve(b.pairs);
  b.pair_cand.reserve(b.pairs);
  int node_at = 0, pair_at = 0;
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    const auto [n, m] = shapes[k];
    if (n < 1 || m < 1) throw std::invalid_argument("make_batch: need n >= 1 and m >= 1");
    GraphBatch::Instance inst;
    inst.node_begin = node_at;
    inst.pair_begin = pair_at;
    inst.cand_begin = node_at + n;
    inst.n = n;
    inst.m = m;
    for (int v = 0; v < n; ++v) b.node_features.at(node_at + v, 0) = 1.0;
    for (int c = 0; c < m; ++c) {
      b.node_features.at(inst.cand_begin + c, 1) = 1.0;
      if (candidate_extra) b.node_features.at(inst.cand_begin + c, 2) = (*candidate_extra)[k][c];
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        b.pair_voter.push_back(node_at + i);
        b.pair_cand.push_back(inst.cand_begin + j);
      }
    node_at += n + m;
    pair_at += n * m;
    b.instances.push_back(inst);
  }
  b.recv_all.reserve(2 * b.pairs);
  b.recv_all.insert(b.recv_all.end(), b.pair_voter.begin(), b.pair_voter.end());
  b.recv_all.insert(b.recv_all.end(), b.pair_cand.begin(), b.pair_cand.end());
  return b;
}

Tensor stack_edge_features(std::span<const ElectionGraph* const> graphs) {
  int total = 0;
  for (const ElectionGraph* g : graphs) total += g->n * g->m;
  Tensor out = Tensor::zeros({total, 1});
  std::size_t at = 0;
  for (const ElectionGraph* g : graphs) {
    std::copy(g->edge_features.data.begin(), g->edge_features.data.end(), out.data.begin() + at);
    at += g->edge_features.numel();
  }
  return out;
}

// --- GEVN ---

Gevn::Gevn(GevnConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  Rng rng(seed);
  const int nw = cfg.node_width;
  const int ew = cfg.edge_width;
  node_in_ = make_linear(2, nw, rng);
  edge_in_ = make_linear(1, ew, rng);
  out_ = make_linear(nw, 1, rng);
  for (int l = 0; l < cfg.layers; ++l) {
    Block block;
    block.edge_op = make_mlp({2 * nw + ew, ew, ew}, Mlp::Act::Relu, true, rng);
    block.message = make_mlp({2 * nw + ew, nw, nw}, Mlp::Act::Relu, true, rng);
    block.node_op = make_mlp({2 * nw, nw, nw}, Mlp::Act::Relu, true, rng);
    blocks_.push_back(std::move(block));
  }
}

void Gevn::visit_params(const ParamVisitor& fn) {
  visit_linear("node_in", node_in_, fn);
  visit_linear("edge_in", edge_in_, fn);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const std::string p = "block" + std::to_string(l);
    visit_mlp(p + ".edge_op", blocks_[l].edge_op, fn);
    visit_mlp(p + ".message", blocks_[l].message, fn);
    visit_mlp(p + ".node_op", blocks_[l].node_op, fn);
  }
  visit_linear("out", out_, fn);
}

void Gevn::visit_params(const std::function<void(const std::string&, const Tensor&)>& fn) const {
  const_cast<Gevn*>(this)->visit_params(
      [&fn](const std::string& name, Tensor& t) { fn(name, t); });
}

std::int64_t Gevn::param_count() const {
  return count_params([this](const ParamVisitor& fn) { const_cast<Gevn*>(this)->visit_params(fn); });
}

std::vector<Var> Gevn::forward(Tape& tape, const Lease& lease, const GraphBatch& batch,
                               Var edge_features) const {
  if (batch.node_feat_dim != 2) throw std::invalid_argument("gevn: expects 2-channel node features");
  if (tape.value(edge_features).rows() != batch.pairs)
    throw std::invalid_argument("gevn: edge feature rows do not match batch pairs");

  Var nodes = tape.constant(batch.node_features);
  Var h_node = apply_linear(tape, lease, node_in_, nodes);
  Var h_edge = apply_linear(tape, lease, edge_in_, edge_features);

  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    try {
      Var h_voter = tape.gather_rows(h_node, batch.pair_voter);
      Var h_cand = tape.gather_rows(h_node, batch.pair_cand);
      h_edge = apply_mlp(tape, lease, blocks_[l].edge_op, tape.concat_cols({h_voter, h_cand, h_edge}));
      // Messages run in both directions, receiver first; the first half of
      // recv_all targets voters, the second half candidates.
      Var h_recv = tape.concat_rows({h_voter, h_cand});
      Var h_send = tape.concat_rows({h_cand, h_voter});
      Var h_edge2 = tape.concat_rows({h_edge, h_edge});
      Var messages = apply_mlp(tape, lease, blocks_[l].message, tape.concat_cols({h_recv, h_send, h_edge2}));
      Var agg = tape.segment_sum(messages, batch.recv_all, batch.nodes);
      h_node = apply_mlp(tape, lease, blocks_[l].node_op, tape.concat_cols({h_node, agg}));
    } catch (const ad::NumericError& e) {
      throw ad::NumericError("gevn layer " + std::to_string(l) + ": " + e.what());
    }
  }

  Var logits = tape.reshape(apply_linear(tape, lease, out_, h_node), {batch.nodes});
  std::vector<Var> out;
  out.reserve(batch.instances.size());
  for (const auto& inst : batch.instances)
    out.push_back(tape.softmax(tape.slice_vec(logits, inst.cand_begin, inst.cand_begin + inst.m)));
  return out;
}

Pscf Gevn::run(const ElectionGraph& graph) const {
  Tape tape(Tape::Options{.grad_enabled = false, .check_finite = true});
  Lease lease = lease_const(tape, *this);
  const std::pair<int, int> shape{graph.n, graph.m};
  GraphBatch batch = make_batch({&shape, 1});
  Var edges = tape.constant(graph.edge_features);
  auto probs = forward(tape, lease, batch, edges);
  return Pscf{tape.value(probs[0]).data};
}

Pscf gevn_forward(const Gevn& net, const ElectionGraph& graph) { return net.run(graph); }

Pscf truncate_to_smith(const Pscf& p, const RankingProfile& profile) {
  if (static_cast<int>(p.p.size()) != profile.m)
    throw std::invalid_argument("truncate_to_smith: distribution width mismatch");
  auto smith = smith_set(profile);
  Pscf out;
  out.p.assign(p.p.size(), 0.0);
  double mass = 0.0;
  for (int j : smith) mass += p.p[j];
  if (mass > 1e-300) {
    for (int j : smith) out.p[j] = p.p[j] / mass;
  } else {
    for (int j : smith) out.p[j] = 1.0 / static_cast<double>(smith.size());
  }
  return out;
}

// --- GESN ---

Var normalize_ballot(Tape& tape, Var logits, const NormalizationMode& mode) {
  if (mode.kind == NormalizationMode::Kind::Budget) return tape.scale(tape.softmax(logits), mode.a);
  return tape.affine(tape.sigmoid(logits), mode.b - mode.a, mode.a);
}

Gesn::Gesn(GesnConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  Rng rng(seed);
  if (cfg.info == InfoSetting::Private) {
    const int w = cfg.embed_width;
    embed_ = make_linear(1, w, rng);
    for (int l = 0; l < cfg.set_layers; ++l) {
      SetBlock block;
      block.per_item = make_mlp({w, w, w}, Mlp::Act::LeakyRelu, false, rng);
      block.post_pool = make_mlp({2 * w, w, w}, Mlp::Act::LeakyRelu, false, rng);
      set_blocks_.push_back(std::move(block));
    }
    head_ = make_mlp({2 * w, w, w, 1}, Mlp::Act::LeakyRelu, false, rng);
  } else {
    const int nw = cfg.node_width;
    const int ew = cfg.edge_width;
    const int in_dim = cfg.info == InfoSetting::Results ? 3 : 2;
    node_in_ = make_linear(in_dim, nw, rng);
    edge_in_ = make_linear(1, ew, rng);
    edge_out_ = make_linear(ew, 1, rng);
    for (int l = 0; l < cfg.layers; ++l) {
      MpnnBlock block;
      block.edge_op = make_mlp({2 * nw + ew, ew, ew}, Mlp::Act::Relu, true, rng);
      block.message = make_mlp({2 * nw + ew, nw, nw}, Mlp::Act::Relu, true, rng);
      block.node_op = make_mlp({2 * nw, nw, nw}, Mlp::Act::Relu, true, rng);
      mpnn_blocks_.push_back(std::move(block));
    }
  }
}

void Gesn::visit_params(const ParamVisitor& fn) {
  if (cfg_.info == InfoSetting::Private) {
    visit_linear("embed", embed_, fn);
    for (std::size_t l = 0; l < set_blocks_.size(); ++l) {
      const std::string p = "set" + std::to_string(l);
      visit_mlp(p + ".per_item", set_blocks_[l].per_item, fn);
      visit_mlp(p + ".post_pool", set_blocks_[l].post_pool, fn);
    }
    visit_mlp("head", head_, fn);
  } else {
    visit_linear("node_in", node_in_, fn);
    visit_linear("edge_in", edge_in_, fn);
    for (std::size_t l = 0; l < mpnn_blocks_.size(); ++l) {
      const std::string p = "block" + std::to_string(l);
      visit_mlp(p + ".edge_op", mpnn_blocks_[l].edge_op, fn);
      visit_mlp(p + ".message", mpnn_blocks_[l].message, fn);
      visit_mlp(p + ".node_op", mpnn_blocks_[l].node_op, fn);
    }
    visit_linear("edge_out", edge_out_, fn);
  }
}

void Gesn::visit_params(const std::function<void(const std::string&, const Tensor&)>& fn) const {
  const_cast<Gesn*>(this)->visit_params(
      [&fn](const std::string& name, Tensor& t) { fn(name, t); });
}

std::int64_t Gesn::param_count() const {
  return count_params([this](const ParamVisitor& fn) { const_cast<Gesn*>(this)->visit_params(fn); });
}

Var Gesn::private_logits(Tape& tape, const Lease& lease, std::span<const double> utility_row) const {
  const int m = static_cast<int>(utility_row.size());
  Var votes = tape.constant(Tensor::mat(m, 1, {utility_row.begin(), utility_row.end()}));
  Var embedded = apply_linear(tape, lease, embed_, votes);  // (m, w)
  Var h = embedded;
  for (const SetBlock& block : set_blocks_) {
    Var items = apply_mlp(tape, lease, block.per_item, h);
    Var pooled = tape.broadcast_rows(tape.sum_rows(items), m);
    h = apply_mlp(tape, lease, block.post_pool, tape.concat_cols({items, pooled}));
  }
  Var withres = tape.concat_cols({h, embedded});
  return tape.reshape(apply_mlp(tape, lease, head_, withres), {m});
}

Var Gesn::public_logits(Tape& tape, const Lease& lease, const UtilityProfile& utilities,
                        const Pscf* honest) const {
  const int n = utilities.rows;
  const int m = utilities.cols;
  const std::pair<int, int> shape{n, m};
  std::vector<std::vector<double>> extra;
  const std::vector<std::vector<double>>* extra_ptr = nullptr;
  if (cfg_.info == InfoSetting::Results) {
    extra.push_back(honest->p);
    extra_ptr = &extra;
  }
  GraphBatch batch = make_batch({&shape, 1}, extra_ptr);

  Var nodes = tape.constant(batch.node_features);
  Var h_node = apply_linear(tape, lease, node_in_, nodes);
  Var h_edge = apply_linear(tape, lease, edge_in_, tape.constant(Tensor::mat(n * m, 1, utilities.data)));
  for (const MpnnBlock& block : mpnn_blocks_) {
    Var h_voter = tape.gather_rows(h_node, batch.pair_voter);
    Var h_cand = tape.gather_rows(h_node, batch.pair_cand);
    h_edge = apply_mlp(tape, lease, block.edge_op, tape.concat_cols({h_voter, h_cand, h_edge}));
    Var h_recv = tape.concat_rows({h_voter, h_cand});
    Var h_send = tape.concat_rows({h_cand, h_voter});
    Var h_edge2 = tape.concat_rows({h_edge, h_edge});
    Var messages = apply_mlp(tape, lease, block.message, tape.concat_cols({h_recv, h_send, h_edge2}));
    Var agg = tape.segment_sum(messages, batch.recv_all, batch.nodes);
    h_node = apply_mlp(tape, lease, block.node_op, tape.concat_cols({h_node, agg}));
  }
  return tape.reshape(apply_linear(tape, lease, edge_out_, h_edge), {n * m});
}

Var Gesn::ballot_row(Tape& tape, const Lease& lease, const UtilityProfile& utilities, int voter,
                     const Pscf* honest) const {
  if (voter < 0 || voter >= utilities.rows) throw std::invalid_argument("gesn: voter index out of range");
  if (cfg_.info == InfoSetting::Results && honest == nullptr)
    throw std::invalid_argument("gesn: results info setting requires the honest outcome");
  Var logits;
  if (cfg_.info == InfoSetting::Private) {
    logits = private_logits(tape, lease, utilities.row(voter));
  } else {
    Var full = public_logits(tape, lease, utilities, honest);
    logits = tape.slice_vec(full, voter * utilities.cols, (voter + 1) * utilities.cols);
  }
  return normalize_ballot(tape, logits, cfg_.norm);
}

PreferenceProfile Gesn::run(const UtilityProfile& utilities, const std::optional<Pscf>& honest) const {
  Tape tape(Tape::Options{.grad_enabled = false, .check_finite = true});
  Lease lease = lease_const(tape, *this);
  PreferenceProfile out;
  out.kind = BallotKind::Cardinal;
  out.scores = Matrix(utilities.rows, utilities.cols);
  for (int i = 0; i < utilities.rows; ++i) {
    Var row = ballot_row(tape, lease, utilities, i, honest ? &*honest : nullptr);
    const Tensor& values = tape.value(row);
    for (int j = 0; j < utilities.cols; ++j) out.scores.at(i, j) = values.data[j];
  }
  return out;
}

PreferenceProfile gesn_forward(const Gesn& net, const UtilityProfile& utilities,
                               const std::optional<Pscf>& honest) {
  return net.run(utilities, honest);
}

// --- DeepSets baseline ---

DeepSets::DeepSets(DeepSetsConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.m_fixed < 1) throw std::invalid_argument("deepsets: m_fixed must be >= 1");
  Rng rng(seed);
  std::vector<int> enc_dims(cfg.encoder_layers + 1, cfg.width);
  enc_dims.front() = cfg.m_fixed;
  encoder_ = make_mlp(enc_dims, Mlp::Act::Relu, true, rng);
  std::vector<int> dec_dims(cfg.decoder_layers + 1, cfg.width);
  dec_dims.back() = cfg.m_fixed;
  decoder_ = make_mlp(dec_dims, Mlp::Act::Relu, false, rng);
}

void DeepSets::visit_params(const ParamVisitor& fn) {
  visit_mlp("encoder", encoder_, fn);
  visit_mlp("decoder", decoder_, fn);
}

void DeepSets::visit_params(const std::function<void(const std::string&, const Tensor&)>& fn) const {
  const_cast<DeepSets*>(this)->visit_params(
      [&fn](const std::string& name, Tensor& t) { fn(name, t); });
}

std::int64_t DeepSets::param_count() const {
  return count_params([this](const ParamVisitor& fn) { const_cast<DeepSets*>(this)->visit_params(fn); });
}

Var DeepSets::forward(Tape& tape, const Lease& lease, const PreferenceProfile& profile) const {
  if (profile.scores.cols != cfg_.m_fixed)
    throw std::invalid_argument("deepsets: profile has " + std::to_string(profile.scores.cols) +
                                " candidates but the model is built for " + std::to_string(cfg_.m_fixed));
  Var rows = tape.constant(Tensor::mat(profile.scores.rows, profile.scores.cols, profile.scores.data));
  Var encoded = apply_mlp(tape, lease, encoder_, rows);
  Var pooled = tape.sum_rows(encoded);
  Var logits = apply_mlp(tape, lease, decoder_, pooled);
  return tape.softmax(tape.reshape(logits, {cfg_.m_fixed}));
}

Pscf DeepSets::run(const PreferenceProfile& profile) const {
  Tape tape(Tape::Options{.grad_enabled = false, .check_finite = true});
  Lease lease = lease_const(tape, *this);
  Var probs = forward(tape, lease, profile);
  return Pscf{tape.value(probs).data};
}

Pscf deepsets_forward(const DeepSets& net, const PreferenceProfile& profile, int m) {
  if (m != net.config().m_fixed) throw std::invalid_argument("deepsets_forward: candidate count mismatch");
  return net.run(profile);
}

// --- checkpoints ---

namespace {

constexpr std::uint32_t kMagic = 0x4756434bu;  // "GVCK"
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

json read_header(std::istream& in, const std::string& path) {
  if (read_u32(in) != kMagic) throw std::runtime_error("checkpoint: bad magic in " + path);
  const auto version = read_u32(in);
  if (version != kFormatVersion)
    throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
  const auto len = read_u64(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint: truncated header in " + path);
  json config = json::parse(text, nullptr, false);
  if (config.is_discarded()) throw std::runtime_error("checkpoint: corrupt config block in " + path);
  return config;
}

template <typename Model>
void save_checkpoint(const std::string& path, const json& config, const Model& net) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  write_u32(out, kMagic);
  write_u32(out, kFormatVersion);
  const std::string text = config.dump();
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));

  std::vector<std::pair<std::string, const Tensor*>> tensors;
  net.visit_params([&](const std::string& name, const Tensor& t) { tensors.emplace_back(name, &t); });
  write_u64(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(t->shape.size()));
    for (int d : t->shape) write_u32(out, static_cast<std::uint32_t>(d));
    write_u64(out, t->data.size());
    out.write(reinterpret_cast<const char*>(t->data.data()),
              static_cast<std::streamsize>(t->data.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failure on " + path);
}

template <typename Model>
void load_tensors(std::istream& in, const std::string& path, Model& net) {
  std::unordered_map<std::string, Tensor*> by_name;
  net.visit_params([&](const std::string& name, Tensor& t) { by_name[name] = &t; });
  const auto count = read_u64(in);
  if (count != by_name.size())
    throw std::runtime_error("checkpoint: tensor count mismatch in " + path);
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rank = read_u32(in);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(read_u32(in));
    const auto numel = read_u64(in);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint: unknown tensor '" + name + "' in " + path);
    Tensor* dst = it->second;
    if (dst->shape != shape || dst->data.size() != numel)
      throw std::runtime_error("checkpoint: shape mismatch for tensor '" + name + "' in " + path);
    in.read(reinterpret_cast<char*>(dst->data.data()), static_cast<std::streamsize>(numel * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor data in " + path);
  }
}

json norm_to_json(const NormalizationMode& norm) {
  return json{{"kind", norm.kind == NormalizationMode::Kind::Budget ? "budget" : "range"},
              {"a", norm.a},
              {"b", norm.b}};
}

NormalizationMode norm_from_json(const json& j) {
  NormalizationMode norm;
  norm.kind = j.at("kind").get<std::string>() == "budget" ? NormalizationMode::Kind::Budget
                                                          : NormalizationMode::Kind::Range;
  norm.a = j.at("a").get<double>();
  norm.b = j.at("b").get<double>();
  return norm;
}

}  // namespace

void save_gevn(const std::string& path, const Gevn& net) {
  const auto& cfg = net.config();
  json config{{"kind", "gevn"},
              {"node_width", cfg.node_width},
              {"edge_width", cfg.edge_width},
              {"layers", cfg.layers}};
  save_checkpoint(path, config, net);
}

Gevn load_gevn(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  json config = read_header(in, path);
  if (config.value("kind", "") != "gevn")
    throw std::runtime_error("checkpoint: " + path + " is not a gevn checkpoint");
  GevnConfig cfg;
  cfg.node_width = config.at("node_width").get<int>();
  cfg.edge_width = config.at("edge_width").get<int>();
  cfg.layers = config.at("layers").get<int>();
  Gevn net(cfg, 0);
  load_tensors(in, path, net);
  return net;
}

void save_gesn(const std::string& path, const Gesn& net) {
  const auto& cfg = net.config();
  const char* info = cfg.info == InfoSetting::Private  ? "private"
                     : cfg.info == InfoSetting::Public ? "public"
                                                       : "results";
  json config{{"kind", "gesn"},
              {"info", info},
              {"norm", norm_to_json(cfg.norm)},
              {"embed_width", cfg.embed_width},
              {"set_layers", cfg.set_layers},
              {"node_width", cfg.node_width},
              {"edge_width", cfg.edge_width},
              {"layers", cfg.layers}};
  save_checkpoint(path, config, net);
}

Gesn load_gesn(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  json config = read_header(in, path);
  if (config.value("kind", "") != "gesn")
    throw std::runtime_error("checkpoint: " + path + " is not a gesn checkpoint");
  GesnConfig cfg;
  const std::string info = config.at("info").get<std::string>();
  cfg.info = info == "private" ? InfoSetting::Private
             : info == "public" ? InfoSetting::Public
                                : InfoSetting::Results;
  cfg.norm = norm_from_json(config.at("norm"));
  cfg.embed_width = config.at("embed_width").get<int>();
  cfg.set_layers = config.at("set_layers").get<int>();
  cfg.node_width = config.at("node_width").get<int>();
  cfg.edge_width = config.at("edge_width").get<int>();
  cfg.layers = config.at("layers").get<int>();
  Gesn net(cfg, 0);
  load_tensors(in, path, net);
  return net;
}

std::string checkpoint_kind(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  return read_header(in, path).value("kind", "");
}

}  // namespace gv::model
