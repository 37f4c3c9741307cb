#include "gv/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "gv/eval.hpp"
#include "gv/losses.hpp"
#include "gv/rng.hpp"

namespace gv::train {

double lr_at(const OptimConfig& cfg, int epoch) {
  if (epoch < 0) throw std::invalid_argument("lr_at: negative epoch");
  if (epoch < cfg.warmup_epochs) {
    const double frac = static_cast<double>(epoch) / cfg.warmup_epochs;
    return cfg.lr * (cfg.warmup_factor + (1.0 - cfg.warmup_factor) * frac);
  }
  int t = epoch - cfg.warmup_epochs;
  int cycle = cfg.t0;
  while (t >= cycle) {
    t -= cycle;
    cycle *= cfg.t_mult;
  }
  constexpr double kPi = 3.14159265358979323846;
  return cfg.lr * 0.5 * (1.0 + std::cos(kPi * static_cast<double>(t) / cycle));
}

bool Adam::step(ad::Tape& tape, double lr) {
  struct Entry {
    ad::Tensor* storage;
    ad::Tensor grad;
  };
  std::vector<Entry> entries;
  double sq_norm = 0.0;
  for (const auto& record : tape.params()) {
    if (!record.trainable) continue;
    ad::Tensor g = tape.grad(record.var);
    for (double v : g.data) sq_norm += v * v;
    entries.push_back({record.storage, std::move(g)});
  }
  if (!std::isfinite(sq_norm)) {
    ++skipped_;
    std::fprintf(stderr, "adam: skipping step %d, non-finite gradient norm\n", step_count_ + 1);
    return false;
  }
  const double norm = std::sqrt(sq_norm);
  const double clip = norm > cfg_.clip_norm ? cfg_.clip_norm / norm : 1.0;

  ++step_count_;
  const double bias1 = 1.0 - std::pow(cfg_.beta1, step_count_);
  const double bias2 = 1.0 - std::pow(cfg_.beta2, step_count_);
  for (auto& entry : entries) {
    Moments& mom = state_[entry.storage];
    if (mom.m.data.empty()) {
      mom.m = ad::Tensor::zeros(entry.storage->shape);
      mom.v = ad::Tensor::zeros(entry.storage->shape);
    }
    for (std::size_t i = 0; i < entry.grad.numel(); ++i) {
      const double g = entry.grad.data[i] * clip;
      mom.m.data[i] = cfg_.beta1 * mom.m.data[i] + (1.0 - cfg_.beta1) * g;
      mom.v.data[i] = cfg_.beta2 * mom.v.data[i] + (1.0 - cfg_.beta2) * g * g;
      const double m_hat = mom.m.data[i] / bias1;
      const double v_hat = mom.v.data[i] / bias2;
      entry.storage->data[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
  return true;
}

void History::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("history: cannot open " + path + " for writing");
  out << "epoch,split,metric,value\n";
  char buf[64];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", row.value);
    out << row.epoch << ',' << row.split << ',' << row.metric << ',' << buf << '\n';
  }
  if (!out) throw std::runtime_error("history: write failure on " + path);
}

std::vector<double> History::series(const std::string& split, const std::string& metric) const {
  std::vector<double> out;
  for (const auto& row : rows)
    if (row.split == split && row.metric == metric) out.push_back(row.value);
  return out;
}

namespace {

using ad::Tape;
using ad::Var;

// Union forward over elections with constant (data-derived) ballots.
std::vector<Var> forward_const_ballots(Tape& tape, const model::Lease& lease,
                                       const model::Gevn& net,
                                       std::span<const data::LabeledElection* const> items,
                                       data::BallotInput input) {
  std::vector<std::pair<int, int>> shapes;
  shapes.reserve(items.size());
  int total_pairs = 0;
  for (const auto* item : items) {
    shapes.emplace_back(item->election.n, item->election.m);
    total_pairs += item->election.n * item->election.m;
  }
  ad::Tensor edges = ad::Tensor::zeros({total_pairs, 1});
  std::size_t at = 0;
  for (const auto* item : items) {
    PreferenceProfile ballots = data::ballots_for(item->election, input);
    std::copy(ballots.scores.data.begin(), ballots.scores.data.end(), edges.data.begin() + at);
    at += ballots.scores.data.size();
  }
  model::GraphBatch batch = model::make_batch(shapes);
  return net.forward(tape, lease, batch, tape.constant(std::move(edges)));
}

std::vector<std::vector<int>> shuffled_batches(std::size_t count, int batch_size, Rng rng) {
  std::vector<int> order(count);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::vector<int>> batches;
  for (std::size_t at = 0; at < order.size(); at += batch_size) {
    const std::size_t end = std::min(order.size(), at + batch_size);
    batches.emplace_back(order.begin() + at, order.begin() + end);
  }
  return batches;
}

int welfare_label(const data::LabeledElection& item, WelfareKind kind) {
  if (item.label) return *item.label;
  auto sw = welfare_per_candidate(item.election.utilities, kind);
  return static_cast<int>(std::max_element(sw.begin(), sw.end()) - sw.begin());
}

std::vector<int> strategic_mask(const Election& election, double frac, Rng rng) {
  std::vector<int> strategic;
  for (int i = 0; i < election.n; ++i)
    if (rng.bernoulli(frac)) strategic.push_back(i);
  return strategic;
}

constexpr int kMonoSamplePairs = 32;

}  // namespace

MimicResult train_mimic(const data::Dataset& train_set, const data::Dataset& val_set,
                        rules::RuleKind rule, const model::GevnConfig& model_cfg,
                        const OptimConfig& optim, std::uint64_t seed) {
  if (train_set.items.empty() || val_set.items.empty())
    throw std::invalid_argument("train_mimic: empty dataset");

  std::vector<int> labels(train_set.items.size());
  for (std::size_t k = 0; k < train_set.items.size(); ++k) {
    const auto& item = train_set.items[k];
    labels[k] = item.label ? *item.label
                           : rules::apply(rule, rankings_from_utilities(item.election.utilities)).winner;
  }
  data::Dataset val = val_set;
  for (auto& item : val.items)
    if (!item.label)
      item.label = rules::apply(rule, rankings_from_utilities(item.election.utilities)).winner;

  Rng root(seed);
  model::Gevn net(model_cfg, root.fork(1).next_u64());
  Adam adam(optim);
  MimicResult result;
  result.best = net;

  for (int epoch = 0; epoch < optim.epochs; ++epoch) {
    const double lr = lr_at(optim, epoch);
    double loss_sum = 0.0;
    int steps = 0;
    for (const auto& batch : shuffled_batches(train_set.items.size(), optim.batch_size, root.fork(2).fork(epoch))) {
      Tape tape;
      model::Lease lease = model::Lease::make(tape, net, true);
      std::vector<const data::LabeledElection*> items;
      items.reserve(batch.size());
      for (int idx : batch) items.push_back(&train_set.items[idx]);
      try {
        auto probs = forward_const_ballots(tape, lease, net, items, data::BallotInput::Ranking);
        std::vector<Var> losses;
        losses.reserve(batch.size());
        for (std::size_t k = 0; k < batch.size(); ++k)
          losses.push_back(loss::rule_loss(tape, probs[k], labels[batch[k]]));
        Var total = tape.mean(tape.concat_vec(losses));
        loss_sum += tape.value(total).data[0];
        ++steps;
        tape.backward(total);
      } catch (const ad::NumericError& e) {
        throw ad::NumericError("train_mimic epoch " + std::to_string(epoch) + ": " + e.what());
      }
      adam.step(tape, lr);
    }
    const double val_acc = eval::accuracy(net, val, data::BallotInput::Ranking);
    result.history.add(epoch, "train", "loss", loss_sum / steps);
    result.history.add(epoch, "train", "lr", lr);
    result.history.add(epoch, "val", "accuracy", val_acc);
    if (val_acc > result.best_val_accuracy || result.best_epoch < 0) {
      result.best_val_accuracy = val_acc;
      result.best_epoch = epoch;
      result.best = net;
    }
    if (epoch - result.best_epoch >= optim.patience) break;
  }
  return result;
}

WelfareResult train_welfare(const data::Dataset& train_set, const data::Dataset& val_set,
                            WelfareKind kind, LossChoice loss_choice, data::BallotInput input,
                            double mono_weight, const model::GevnConfig& model_cfg,
                            const OptimConfig& optim, std::uint64_t seed) {
  if (train_set.items.empty() || val_set.items.empty())
    throw std::invalid_argument("train_welfare: empty dataset");

  std::vector<int> labels(train_set.items.size());
  for (std::size_t k = 0; k < train_set.items.size(); ++k) labels[k] = welfare_label(train_set.items[k], kind);
  data::Dataset val = val_set;
  for (auto& item : val.items) item.label = welfare_label(item, kind);

  Rng root(seed);
  model::Gevn net(model_cfg, root.fork(1).next_u64());
  Adam adam(optim);
  WelfareResult result;
  result.best = net;
  Rng mono_root = root.fork(3);
  std::int64_t step_counter = 0;

  for (int epoch = 0; epoch < optim.epochs; ++epoch) {
    const double lr = lr_at(optim, epoch);
    double loss_sum = 0.0;
    int steps = 0;
    for (const auto& batch : shuffled_batches(train_set.items.size(), optim.batch_size, root.fork(2).fork(epoch))) {
      Tape tape;
      model::Lease lease = model::Lease::make(tape, net, true);
      std::vector<const data::LabeledElection*> items;
      items.reserve(batch.size());
      for (int idx : batch) items.push_back(&train_set.items[idx]);
      try {
        auto probs = forward_const_ballots(tape, lease, net, items, input);
        std::vector<Var> losses;
        losses.reserve(batch.size());
        for (std::size_t k = 0; k < batch.size(); ++k) {
          const auto& election = items[k]->election;
          if (loss_choice == LossChoice::Welfare)
            losses.push_back(loss::welfare_loss(tape, probs[k], election.utilities, kind));
          else
            losses.push_back(loss::rule_loss(tape, probs[k], labels[batch[k]]));
        }
        Var total = tape.mean(tape.concat_vec(losses));
        if (mono_weight > 0.0) {
          Rng mono_rng = mono_root.fork(static_cast<std::uint64_t>(step_counter));
          const auto& pick = *items[mono_rng.uniform_int(0, static_cast<int>(items.size()) - 1)];
          PreferenceProfile ballots = data::ballots_for(pick.election, input);
          model::ElectionGraph graph = model::build_ebg(ballots);
          auto pairs = loss::sample_pairs(graph.n, graph.m, kMonoSamplePairs, mono_rng);
          const std::pair<int, int> shape{graph.n, graph.m};
          loss::EdgeForward fwd = [&net, &lease, shape](Tape& t, const ad::Tensor& edge_features) {
            model::GraphBatch single = model::make_batch({&shape, 1});
            return net.forward(t, lease, single, t.constant(edge_features))[0];
          };
          Var mono = loss::monotonicity_loss(tape, fwd, graph, pairs);
          total = tape.add(total, tape.scale(mono, mono_weight));
        }
        loss_sum += tape.value(total).data[0];
        ++steps;
        ++step_counter;
        tape.backward(total);
      } catch (const ad::NumericError& e) {
        throw ad::NumericError("train_welfare epoch " + std::to_string(epoch) + ": " + e.what());
      }
      adam.step(tape, lr);
    }
    const double val_welfare = eval::expected_welfare(net, val, kind, input);
    const double val_acc = eval::accuracy(net, val, input);
    result.history.add(epoch, "train", "loss", loss_sum / steps);
    result.history.add(epoch, "train", "lr", lr);
    result.history.add(epoch, "val", "welfare", val_welfare);
    result.history.add(epoch, "val", "accuracy", val_acc);
    if (val_welfare > result.best_val_welfare || result.best_epoch < 0) {
      result.best_val_welfare = val_welfare;
      result.best_val_accuracy = val_acc;
      result.best_epoch = epoch;
      result.best = net;
    }
    if (epoch - result.best_epoch >= optim.patience) break;
  }

  result.final_monotonicity_probe = eval::monotonicity_probe(
      eval::as_mechanism(result.best), val, input, std::min<int>(16, static_cast<int>(val.items.size())),
      kMonoSamplePairs, 1e-3, root.fork(4).next_u64());
  return result;
}

double strategic_welfare(const model::Gevn& gevn, const model::Gesn& gesn,
                         const data::Dataset& dataset, double frac, WelfareKind kind,
                         std::uint64_t seed) {
  if (dataset.items.empty()) throw std::invalid_argument("strategic_welfare: empty dataset");
  Rng root(seed);
  const bool needs_honest = gesn.config().info == model::InfoSetting::Results;

  std::vector<PreferenceProfile> honest;
  honest.reserve(dataset.items.size());
  for (const auto& item : dataset.items) honest.push_back(cardinal_profile(item.election.utilities));

  std::vector<Pscf> honest_outcomes;
  if (needs_honest) honest_outcomes = eval::run_profiles(gevn, honest);

  std::vector<PreferenceProfile> mixed = honest;
  for (std::size_t idx = 0; idx < dataset.items.size(); ++idx) {
    const Election& election = dataset.items[idx].election;
    auto strategic = strategic_mask(election, frac, root.fork(idx));
    if (strategic.empty()) continue;
    std::optional<Pscf> honest_outcome;
    if (needs_honest) honest_outcome = honest_outcomes[idx];
    PreferenceProfile strategic_full = gesn.run(election.utilities, honest_outcome);
    for (int i : strategic)
      for (int j = 0; j < election.m; ++j) mixed[idx].scores.at(i, j) = strategic_full.scores.at(i, j);
  }

  auto outcomes = eval::run_profiles(gevn, mixed);
  double total = 0.0;
  for (std::size_t idx = 0; idx < dataset.items.size(); ++idx) {
    auto sw = welfare_per_candidate(dataset.items[idx].election.utilities, kind);
    for (int j = 0; j < dataset.items[idx].election.m; ++j) total += outcomes[idx].p[j] * sw[j];
  }
  return total / static_cast<double>(dataset.items.size());
}

AdversarialResult train_adversarial(const AdversarialConfig& cfg, const model::Gevn& pretrained,
                                    const data::Dataset& train_set, const data::Dataset& val_set,
                                    const OptimConfig& optim, std::uint64_t seed) {
  if (train_set.items.empty() || val_set.items.empty())
    throw std::invalid_argument("train_adversarial: empty dataset");
  if (cfg.strategic_frac < 0.0 || cfg.strategic_frac > 1.0)
    throw std::invalid_argument("train_adversarial: strategic fraction must be in [0,1]");

  Rng root(seed);
  AdversarialResult result;
  result.gevn = pretrained;
  result.gesn = model::Gesn(cfg.gesn, root.fork(1).next_u64());
  Adam adam_gesn(optim);
  Adam adam_gevn(optim);
  const bool tune_gevn = cfg.scenario == AdversarialConfig::Scenario::RobustTrain;
  const bool needs_honest = cfg.info == model::InfoSetting::Results;
  const std::uint64_t val_seed = root.fork(0xE7A1).next_u64();

  for (int epoch = 0; epoch < optim.epochs; ++epoch) {
    const double lr = lr_at(optim, epoch);

    // --- GESN epoch: GEVN frozen, per-voter gradient cutting ---
    double rational_sum = 0.0;
    std::int64_t rational_count = 0;
    for (const auto& batch : shuffled_batches(train_set.items.size(), optim.batch_size,
                                              root.fork(2).fork(epoch))) {
      Tape tape;
      model::Lease gesn_lease = model::Lease::make(tape, result.gesn, true);
      model::Lease gevn_lease = model::lease_const(tape, result.gevn);

      std::vector<std::pair<int, int>> shapes;
      std::vector<Var> edge_parts;
      std::vector<std::pair<const Election*, int>> targets;
      for (int idx : batch) {
        const Election& election = train_set.items[idx].election;
        auto strategic = strategic_mask(election, cfg.strategic_frac,
                                        root.fork(3).fork(epoch).fork(static_cast<std::uint64_t>(idx)));
        if (strategic.empty()) continue;

        std::optional<Pscf> honest_outcome;
        if (needs_honest)
          honest_outcome = result.gevn.run(model::build_ebg(cardinal_profile(election.utilities)));
        const Pscf* honest_ptr = honest_outcome ? &*honest_outcome : nullptr;

        std::vector<std::pair<int, Var>> strategic_rows;
        strategic_rows.reserve(strategic.size());
        for (int i : strategic)
          strategic_rows.emplace_back(
              i, result.gesn.ballot_row(tape, gesn_lease, election.utilities, i, honest_ptr));

        for (const auto& [target, live_row] : strategic_rows) {
          std::vector<Var> rows;
          rows.reserve(election.n);
          for (int v = 0; v < election.n; ++v) {
            auto it = std::find_if(strategic_rows.begin(), strategic_rows.end(),
                                   [v](const auto& kv) { return kv.first == v; });
            Var row;
            if (it == strategic_rows.end()) {
              auto honest_row = election.utilities.row(v);
              row = tape.constant(ad::Tensor::vec({honest_row.begin(), honest_row.end()}));
            } else if (v == target) {
              row = it->second;
            } else {
              row = tape.stop_gradient(it->second);
            }
            rows.push_back(tape.reshape(row, {election.m, 1}));
          }
          edge_parts.push_back(tape.concat_rows(rows));
          shapes.emplace_back(election.n, election.m);
          targets.emplace_back(&election, target);
        }
      }
      if (targets.empty()) continue;

      model::GraphBatch batch_struct = model::make_batch(shapes);
      Var edges = tape.concat_rows(edge_parts);
      auto probs = result.gevn.forward(tape, gevn_lease, batch_struct, edges);
      std::vector<Var> losses;
      losses.reserve(targets.size());
      for (std::size_t k = 0; k < targets.size(); ++k) {
        losses.push_back(loss::rational_loss(tape, probs[k], targets[k].first->utilities, targets[k].second));
        rational_sum += tape.value(losses.back()).data[0];
        ++rational_count;
      }
      Var total = tape.mean(tape.concat_vec(losses));
      tape.backward(total);
      adam_gesn.step(tape, lr);
    }

    // --- GEVN epoch (robust-train): welfare loss on the mixed profile ---
    double welfare_loss_sum = 0.0;
    int welfare_steps = 0;
    if (tune_gevn) {
      for (const auto& batch : shuffled_batches(train_set.items.size(), optim.batch_size,
                                                root.fork(4).fork(epoch))) {
        Tape tape;
        model::Lease gevn_lease = model::Lease::make(tape, result.gevn, true);
        std::vector<std::pair<int, int>> shapes;
        std::vector<double> edge_values;
        std::vector<const Election*> elections;
        for (int idx : batch) {
          const Election& election = train_set.items[idx].election;
          auto strategic = strategic_mask(election, cfg.strategic_frac,
                                          root.fork(5).fork(epoch).fork(static_cast<std::uint64_t>(idx)));
          PreferenceProfile mixed = cardinal_profile(election.utilities);
          if (!strategic.empty()) {
            std::optional<Pscf> honest_outcome;
            if (needs_honest)
              honest_outcome = result.gevn.run(model::build_ebg(cardinal_profile(election.utilities)));
            PreferenceProfile strategic_full = result.gesn.run(election.utilities, honest_outcome);
            for (int i : strategic)
              for (int j = 0; j < election.m; ++j) mixed.scores.at(i, j) = strategic_full.scores.at(i, j);
          }
          shapes.emplace_back(election.n, election.m);
          edge_values.insert(edge_values.end(), mixed.scores.data.begin(), mixed.scores.data.end());
          elections.push_back(&election);
        }
        model::GraphBatch batch_struct = model::make_batch(shapes);
        Var edges = tape.constant(
            ad::Tensor::mat(static_cast<int>(edge_values.size()), 1, std::move(edge_values)));
        auto probs = result.gevn.forward(tape, gevn_lease, batch_struct, edges);
        std::vector<Var> losses;
        losses.reserve(elections.size());
        for (std::size_t k = 0; k < elections.size(); ++k)
          losses.push_back(loss::welfare_loss(tape, probs[k], elections[k]->utilities, cfg.welfare));
        Var total = tape.mean(tape.concat_vec(losses));
        welfare_loss_sum += tape.value(total).data[0];
        ++welfare_steps;
        tape.backward(total);
        adam_gevn.step(tape, lr);
      }
    }

    const double rational_mean = rational_count == 0 ? 0.0 : rational_sum / rational_count;
    const double val_strategic =
        strategic_welfare(result.gevn, result.gesn, val_set, cfg.strategic_frac, cfg.welfare, val_seed);
    result.history.add(epoch, "train", "rational", rational_mean);
    result.history.add(epoch, "train", "lr", lr);
    result.history.add(epoch, "val", "welfare_strategic", val_strategic);
    if (tune_gevn && welfare_steps > 0)
      result.history.add(epoch, "train", "welfare_loss", welfare_loss_sum / welfare_steps);
    result.rational_by_epoch.push_back(rational_mean);
    result.final_val_welfare = val_strategic;
  }

  result.honest_val_welfare = strategic_welfare(result.gevn, result.gesn, val_set, 0.0, cfg.welfare, val_seed);
  return result;
}

}  // namespace gv::train
