#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "gv/autodiff.hpp"
#include "gv/core.hpp"
#include "gv/data.hpp"
#include "gv/models.hpp"

namespace gv::train {

struct OptimConfig {
  double lr = 3e-4;
  double clip_norm = 1.0;
  int batch_size = 128;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int warmup_epochs = 20;
  double warmup_factor = 0.1;
  int t0 = 20;      // first cosine cycle length, epochs
  int t_mult = 2;   // cycle growth factor
  int epochs = 100;
  int patience = 30;  // early stop after this many epochs without improvement
};

// Linear warmup from warmup_factor * lr to lr over warmup_epochs, then cosine
// annealing with warm restarts (cycle lengths t0, t0*t_mult, ...) to floor 0.
double lr_at(const OptimConfig& cfg, int epoch);

// Adam with bias correction over the tape's trainable registered parameters,
// after global gradient-norm clipping. Moment state is keyed by parameter
// storage address, so the same model must be leased each step.
class Adam {
 public:
  explicit Adam(OptimConfig cfg) : cfg_(cfg) {}

  // Returns false (and leaves parameters untouched) on non-finite gradients.
  bool step(ad::Tape& tape, double lr);

  int steps_taken() const { return step_count_; }
  int steps_skipped() const { return skipped_; }

 private:
  struct Moments {
    ad::Tensor m;
    ad::Tensor v;
  };
  OptimConfig cfg_;
  std::unordered_map<ad::Tensor*, Moments> state_;
  int step_count_ = 0;
  int skipped_ = 0;
};

struct MetricRow {
  int epoch;
  std::string split;
  std::string metric;
  double value;
};

struct History {
  std::vector<MetricRow> rows;
  void add(int epoch, std::string split, std::string metric, double value) {
    rows.push_back({epoch, std::move(split), std::move(metric), value});
  }
  void write_csv(const std::string& path) const;
  // Values of one (split, metric) series ordered by insertion.
  std::vector<double> series(const std::string& split, const std::string& metric) const;
};

struct MimicResult {
  model::Gevn best;
  History history;
  double best_val_accuracy = 0.0;
  int best_epoch = -1;
};

// Behavioral cloning of a classical rule from Borda-normalized ranking
// ballots, minimizing NLL of the labeled winner. Keeps the best-validation
// checkpoint. Throws ad::NumericError if the loss diverges.
MimicResult train_mimic(const data::Dataset& train_set, const data::Dataset& val_set,
                        rules::RuleKind rule, const model::GevnConfig& model_cfg,
                        const OptimConfig& optim, std::uint64_t seed);

enum class LossChoice { Welfare, Rule };

struct WelfareResult {
  model::Gevn best;
  History history;
  double best_val_welfare = 0.0;
  double best_val_accuracy = 0.0;
  double final_monotonicity_probe = 0.0;
  int best_epoch = -1;
};

// Welfare maximization (or its rule-loss counterpart trained on welfare
// argmax labels). The model sees ballots chosen by `input`; the loss always
// consumes the hidden true utilities. mono_weight > 0 adds the sampled
// monotonicity penalty (32 pairs per step).
WelfareResult train_welfare(const data::Dataset& train_set, const data::Dataset& val_set,
                            WelfareKind kind, LossChoice loss_choice, data::BallotInput input,
                            double mono_weight, const model::GevnConfig& model_cfg,
                            const OptimConfig& optim, std::uint64_t seed);

struct AdversarialConfig {
  enum class Scenario { StandardFreeze, RobustTrain, RobustFreeze };
  Scenario scenario = Scenario::StandardFreeze;
  model::InfoSetting info = model::InfoSetting::Private;
  double strategic_frac = 0.2;
  WelfareKind welfare = WelfareKind::Utilitarian;
  model::GesnConfig gesn;
  int mono_sample = 0;  // optional monotonicity pairs per GEVN step
  double mono_weight = 0.0;
};

struct AdversarialResult {
  model::Gevn gevn;
  model::Gesn gesn;
  History history;
  double final_val_welfare = 0.0;        // under strategic voting
  double honest_val_welfare = 0.0;       // truthful-ballot reference
  std::vector<double> rational_by_epoch;
};

// Alternating adversarial training. The GESN step freezes the GEVN, samples a
// Bernoulli strategic mask per voter, and minimizes the mean rational loss
// over strategic voters with per-voter gradient cutting. Scenario RobustTrain
// additionally fine-tunes the GEVN on the mixed profile with welfare loss.
AdversarialResult train_adversarial(const AdversarialConfig& cfg, const model::Gevn& pretrained,
                                    const data::Dataset& train_set, const data::Dataset& val_set,
                                    const OptimConfig& optim, std::uint64_t seed);

// Mean expected welfare over the dataset when an expected `frac` of each
// electorate reports GESN ballots and the rest report truthfully. The mask is
// a pure function of (seed, element index).
double strategic_welfare(const model::Gevn& gevn, const model::Gesn& gesn,
                         const data::Dataset& dataset, double frac, WelfareKind kind,
                         std::uint64_t seed);

}  // namespace gv::train
