#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gv/autodiff.hpp"
#include "gv/core.hpp"

namespace gv::model {

using ad::Tape;
using ad::Tensor;
using ad::Var;

// Complete bipartite election graph. Node rows are voters then candidates;
// voters carry one-hot [1,0], candidates [0,1]. Pair k = i*m + j holds the
// scalar ballot entry sigma_i(c_j); message passing runs each pair in both
// directions.
struct ElectionGraph {
  int n = 0;
  int m = 0;
  Tensor node_features;  // (n+m) x 2
  Tensor edge_features;  // (n*m) x 1
};

ElectionGraph build_ebg(const PreferenceProfile& profile);

// Disjoint union of election graphs for one forward pass. Candidate nodes of
// each instance are contiguous, so per-election readout is a vector slice.
struct GraphBatch {
  int nodes = 0;
  int pairs = 0;
  int node_feat_dim = 2;
  std::vector<int> pair_voter;  // global node id per pair
  std::vector<int> pair_cand;
  std::vector<int> recv_all;    // receivers for both message directions: [pair_voter; pair_cand]
  struct Instance {
    int node_begin = 0;
    int pair_begin = 0;
    int cand_begin = 0;  // global node id of the instance's first candidate
    int n = 0;
    int m = 0;
  };
  std::vector<Instance> instances;
  Tensor node_features;  // nodes x node_feat_dim
};

// Structure + node features from (n, m) shapes. `candidate_extra`, when
// given, appends one channel to node features: per-instance values on
// candidate nodes, zero on voters.
GraphBatch make_batch(std::span<const std::pair<int, int>> shapes,
                      const std::vector<std::vector<double>>* candidate_extra = nullptr);

// Stacks edge features of whole graphs for use with make_batch of the same shapes.
Tensor stack_edge_features(std::span<const ElectionGraph* const> graphs);

// Maps leased parameter tensors to their tape Vars.
class Lease {
 public:
  Var of(const Tensor& t) const { return vars_.at(&t); }
  void put(const Tensor& t, Var v) { vars_.emplace(&t, v); }

  template <typename Model>
  static Lease make(Tape& tape, Model& model, bool trainable) {
    Lease lease;
    model.visit_params([&](const std::string&, Tensor& t) { lease.put(t, tape.param(&t, trainable)); });
    return lease;
  }

 private:
  std::unordered_map<const Tensor*, Var> vars_;
};

// Puts every parameter on the tape as a plain constant: the network runs
// frozen, gradients still flow through activations to the inputs.
template <typename Model>
Lease lease_const(Tape& tape, const Model& model) {
  Lease lease;
  model.visit_params(
      [&](const std::string&, const Tensor& t) { lease.put(t, tape.constant(t)); });
  return lease;
}

using ParamVisitor = std::function<void(const std::string&, Tensor&)>;

struct Linear {
  Tensor w;  // (in, out)
  Tensor b;  // (out,)
};

struct Mlp {
  enum class Act { Relu, LeakyRelu };
  std::vector<Linear> layers;
  std::optional<std::pair<Tensor, Tensor>> norm;  // LayerNorm gain/bias on the output
  Act act = Act::Relu;
  double leaky_slope = 0.01;
};

// --- GEVN ---

struct GevnConfig {
  int node_width = 58;
  int edge_width = 19;
  int layers = 4;
};

// Graph election voting network. Per layer, edge latents update first from
// both endpoints, then nodes aggregate messages over freshly updated edge
// latents; candidate latents project to logits and softmax per election.
class Gevn {
 public:
  Gevn() = default;
  Gevn(GevnConfig cfg, std::uint64_t seed);

  const GevnConfig& config() const { return cfg_; }
  std::int64_t param_count() const;
  void visit_params(const ParamVisitor& fn);
  void visit_params(const std::function<void(const std::string&, const Tensor&)>& fn) const;

  // Per-instance candidate distributions; edge_features is (total_pairs, 1)
  // on the tape. Throws ad::NumericError with layer diagnostics on NaN.
  std::vector<Var> forward(Tape& tape, const Lease& lease, const GraphBatch& batch,
                           Var edge_features) const;

  // No-grad convenience over a single election.
  Pscf run(const ElectionGraph& graph) const;

 private:
  struct Block {
    Mlp edge_op;   // (2*nw + ew) -> ew
    Mlp message;   // (2*nw + ew) -> nw
    Mlp node_op;   // (2*nw) -> nw
  };

  GevnConfig cfg_;
  Linear node_in_, edge_in_, out_;
  std::vector<Block> blocks_;

  friend class CheckpointCodec;
};

Pscf gevn_forward(const Gevn& net, const ElectionGraph& graph);

// Zeroes probability mass outside the Smith set of the ranking profile and
// renormalizes.
Pscf truncate_to_smith(const Pscf& p, const RankingProfile& profile);

// --- GESN ---

enum class InfoSetting { Private, Public, Results };

struct NormalizationMode {
  enum class Kind { Budget, Range };
  Kind kind = Kind::Budget;
  double a = 1.0;  // budget total, or range lower bound
  double b = 1.0;  // range upper bound

  static NormalizationMode budget(double total) { return {Kind::Budget, total, 0.0}; }
  static NormalizationMode range(double lo, double hi) { return {Kind::Range, lo, hi}; }
};

// Applies the ballot-space constraint to one voter's logits.
Var normalize_ballot(Tape& tape, Var logits, const NormalizationMode& mode);

struct GesnConfig {
  InfoSetting info = InfoSetting::Private;
  NormalizationMode norm = NormalizationMode::budget(1.0);
  // Private: per-voter set network over the voter's own utility row.
  int embed_width = 32;
  int set_layers = 2;
  // Public/results: message passing network over the full utility matrix.
  int node_width = 32;
  int edge_width = 12;
  int layers = 2;
};

// Graph election strategy network. Private voters see only their own utility
// row; public voters see the whole matrix; the results setting additionally
// feeds the truthful election outcome into candidate node features.
class Gesn {
 public:
  Gesn() = default;
  Gesn(GesnConfig cfg, std::uint64_t seed);

  const GesnConfig& config() const { return cfg_; }
  std::int64_t param_count() const;
  void visit_params(const ParamVisitor& fn);
  void visit_params(const std::function<void(const std::string&, const Tensor&)>& fn) const;

  // Normalized ballot row for one voter (rank-1, length m). honest is
  // required iff info == Results.
  Var ballot_row(Tape& tape, const Lease& lease, const UtilityProfile& utilities, int voter,
                 const Pscf* honest) const;

  // No-grad full-profile forward (every voter strategic).
  PreferenceProfile run(const UtilityProfile& utilities, const std::optional<Pscf>& honest) const;

 private:
  Var private_logits(Tape& tape, const Lease& lease, std::span<const double> utility_row) const;
  // Logits for every pair, reshaped (n*m,) in pair order.
  Var public_logits(Tape& tape, const Lease& lease, const UtilityProfile& utilities,
                    const Pscf* honest) const;

  struct SetBlock {
    Mlp per_item;   // embed -> embed
    Mlp post_pool;  // 2*embed -> embed
  };

  GesnConfig cfg_;
  // Private variant.
  Linear embed_;
  std::vector<SetBlock> set_blocks_;
  Mlp head_;
  // Public/results variant.
  Linear node_in_, edge_in_, edge_out_;
  struct MpnnBlock {
    Mlp edge_op;
    Mlp message;
    Mlp node_op;
  };
  std::vector<MpnnBlock> mpnn_blocks_;

  friend class CheckpointCodec;
};

PreferenceProfile gesn_forward(const Gesn& net, const UtilityProfile& utilities,
                               const std::optional<Pscf>& honest);

// --- DeepSets baseline ---

struct DeepSetsConfig {
  int m_fixed = 0;     // output width baked in at build time
  int width = 155;
  int encoder_layers = 3;
  int decoder_layers = 5;
};

// Voter-permutation-invariant baseline with a fixed candidate count: encode
// each ballot row, sum over voters, decode to m logits.
class DeepSets {
 public:
  DeepSets() = default;
  DeepSets(DeepSetsConfig cfg, std::uint64_t seed);

  const DeepSetsConfig& config() const { return cfg_; }
  std::int64_t param_count() const;
  void visit_params(const ParamVisitor& fn);
  void visit_params(const std::function<void(const std::string&, const Tensor&)>& fn) const;

  Var forward(Tape& tape, const Lease& lease, const PreferenceProfile& profile) const;
  Pscf run(const PreferenceProfile& profile) const;  // throws on m mismatch

 private:
  DeepSetsConfig cfg_;
  Mlp encoder_, decoder_;
};

Pscf deepsets_forward(const DeepSets& net, const PreferenceProfile& profile, int m);

// --- checkpoints ---
// Versioned binary container: magic/version header, a JSON config blob, then
// named flat f64 tensors. Loaders validate kind, config, names and shapes.

void save_gevn(const std::string& path, const Gevn& net);
Gevn load_gevn(const std::string& path);
void save_gesn(const std::string& path, const Gesn& net);
Gesn load_gesn(const std::string& path);

// Peeks at the "kind" field ("gevn" or "gesn") without loading tensors.
std::string checkpoint_kind(const std::string& path);

}  // namespace gv::model
