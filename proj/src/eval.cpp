#include "gv/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gv/rng.hpp"

namespace gv::eval {

namespace {

constexpr int kChunk = 64;  // elections per no-grad forward

std::vector<int> random_permutation(int size, Rng& rng) {
  std::vector<int> perm(size);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  return perm;
}

PreferenceProfile permute_voters(const PreferenceProfile& profile, const std::vector<int>& perm) {
  PreferenceProfile out = profile;
  for (int i = 0; i < profile.scores.rows; ++i)
    for (int j = 0; j < profile.scores.cols; ++j) out.scores.at(i, j) = profile.scores.at(perm[i], j);
  return out;
}

PreferenceProfile permute_candidates(const PreferenceProfile& profile, const std::vector<int>& perm) {
  // perm maps new column -> old column.
  PreferenceProfile out = profile;
  for (int i = 0; i < profile.scores.rows; ++i)
    for (int j = 0; j < profile.scores.cols; ++j) out.scores.at(i, j) = profile.scores.at(i, perm[j]);
  return out;
}

}  // namespace

Mechanism as_mechanism(const model::Gevn& net) {
  return [&net](const PreferenceProfile& profile) { return net.run(model::build_ebg(profile)); };
}

std::vector<Pscf> batch_pscfs(const model::Gevn& net, std::span<const data::LabeledElection> items,
                              data::BallotInput input) {
  std::vector<Pscf> out;
  out.reserve(items.size());
  for (std::size_t begin = 0; begin < items.size(); begin += kChunk) {
    const std::size_t end = std::min(items.size(), begin + kChunk);
    std::vector<std::pair<int, int>> shapes;
    shapes.reserve(end - begin);
    int total_pairs = 0;
    for (std::size_t k = begin; k < end; ++k) {
      shapes.emplace_back(items[k].election.n, items[k].election.m);
      total_pairs += items[k].election.n * items[k].election.m;
    }
    ad::Tensor edges = ad::Tensor::zeros({total_pairs, 1});
    std::size_t at = 0;
    for (std::size_t k = begin; k < end; ++k) {
      PreferenceProfile ballots = data::ballots_for(items[k].election, input);
      std::copy(ballots.scores.data.begin(), ballots.scores.data.end(), edges.data.begin() + at);
      at += ballots.scores.data.size();
    }
    ad::Tape tape(ad::Tape::Options{.grad_enabled = false, .check_finite = true});
    model::Lease lease = model::lease_const(tape, net);
    model::GraphBatch batch = model::make_batch(shapes);
    auto probs = net.forward(tape, lease, batch, tape.constant(std::move(edges)));
    for (const auto& p : probs) out.push_back(Pscf{tape.value(p).data});
  }
  return out;
}

std::vector<Pscf> run_profiles(const model::Gevn& net, std::span<const PreferenceProfile> profiles) {
  std::vector<Pscf> out;
  out.reserve(profiles.size());
  for (std::size_t begin = 0; begin < profiles.size(); begin += kChunk) {
    const std::size_t end = std::min(profiles.size(), begin + kChunk);
    std::vector<std::pair<int, int>> shapes;
    int total_pairs = 0;
    for (std::size_t k = begin; k < end; ++k) {
      shapes.emplace_back(profiles[k].scores.rows, profiles[k].scores.cols);
      total_pairs += profiles[k].scores.rows * profiles[k].scores.cols;
    }
    ad::Tensor edges = ad::Tensor::zeros({total_pairs, 1});
    std::size_t at = 0;
    for (std::size_t k = begin; k < end; ++k) {
      std::copy(profiles[k].scores.data.begin(), profiles[k].scores.data.end(), edges.data.begin() + at);
      at += profiles[k].scores.data.size();
    }
    ad::Tape tape(ad::Tape::Options{.grad_enabled = false, .check_finite = true});
    model::Lease lease = model::lease_const(tape, net);
    model::GraphBatch batch = model::make_batch(shapes);
    auto probs = net.forward(tape, lease, batch, tape.constant(std::move(edges)));
    for (const auto& p : probs) out.push_back(Pscf{tape.value(p).data});
  }
  return out;
}

double accuracy(const model::Gevn& net, const data::Dataset& dataset, data::BallotInput input) {
  if (dataset.items.empty()) throw std::invalid_argument("accuracy: empty dataset");
  auto probs = batch_pscfs(net, dataset.items, input);
  int hits = 0;
  for (std::size_t k = 0; k < dataset.items.size(); ++k) {
    if (!dataset.items[k].label) throw std::invalid_argument("accuracy: dataset is unlabeled");
    if (probs[k].argmax() == *dataset.items[k].label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.items.size());
}

double accuracy(const Mechanism& mechanism, const data::Dataset& dataset, data::BallotInput input) {
  if (dataset.items.empty()) throw std::invalid_argument("accuracy: empty dataset");
  int hits = 0;
  for (const auto& item : dataset.items) {
    if (!item.label) throw std::invalid_argument("accuracy: dataset is unlabeled");
    Pscf p = mechanism(data::ballots_for(item.election, input));
    if (p.argmax() == *item.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.items.size());
}

namespace {

double pscf_welfare(const Pscf& p, const Election& election, WelfareKind kind, NashMode nash_mode) {
  auto sw = welfare_per_candidate(election.utilities, kind, nash_mode);
  double total = 0.0;
  for (int j = 0; j < election.m; ++j) total += p.p[j] * sw[j];
  return total;
}

}  // namespace

double expected_welfare(const model::Gevn& net, const data::Dataset& dataset, WelfareKind kind,
                        data::BallotInput input, NashMode nash_mode) {
  if (dataset.items.empty()) throw std::invalid_argument("expected_welfare: empty dataset");
  auto probs = batch_pscfs(net, dataset.items, input);
  double total = 0.0;
  for (std::size_t k = 0; k < dataset.items.size(); ++k)
    total += pscf_welfare(probs[k], dataset.items[k].election, kind, nash_mode);
  return total / static_cast<double>(dataset.items.size());
}

double expected_welfare(const Mechanism& mechanism, const data::Dataset& dataset, WelfareKind kind,
                        data::BallotInput input, NashMode nash_mode) {
  if (dataset.items.empty()) throw std::invalid_argument("expected_welfare: empty dataset");
  double total = 0.0;
  for (const auto& item : dataset.items) {
    Pscf p = mechanism(data::ballots_for(item.election, input));
    total += pscf_welfare(p, item.election, kind, nash_mode);
  }
  return total / static_cast<double>(dataset.items.size());
}

double best_onehot_welfare(const data::Dataset& dataset, WelfareKind kind, NashMode nash_mode) {
  if (dataset.items.empty()) throw std::invalid_argument("best_onehot_welfare: empty dataset");
  double total = 0.0;
  for (const auto& item : dataset.items) {
    auto sw = welfare_per_candidate(item.election.utilities, kind, nash_mode);
    total += *std::max_element(sw.begin(), sw.end());
  }
  return total / static_cast<double>(dataset.items.size());
}

double manipulation_gain(const model::Gevn& gevn, const model::Gesn& gesn,
                         const data::Dataset& dataset, double fraction, std::uint64_t seed) {
  Rng root(seed);
  double gain_total = 0.0;
  std::int64_t strategic_total = 0;
  for (std::size_t idx = 0; idx < dataset.items.size(); ++idx) {
    const Election& election = dataset.items[idx].election;
    Rng rng = root.fork(idx);
    std::vector<int> strategic;
    for (int i = 0; i < election.n; ++i)
      if (rng.bernoulli(fraction)) strategic.push_back(i);
    if (strategic.empty()) continue;

    PreferenceProfile honest_ballots = cardinal_profile(election.utilities);
    Pscf honest = gevn.run(model::build_ebg(honest_ballots));
    std::optional<Pscf> honest_for_gesn;
    if (gesn.config().info == model::InfoSetting::Results) honest_for_gesn = honest;
    PreferenceProfile strategic_full = gesn.run(election.utilities, honest_for_gesn);

    PreferenceProfile mixed = honest_ballots;
    for (int i : strategic)
      for (int j = 0; j < election.m; ++j) mixed.scores.at(i, j) = strategic_full.scores.at(i, j);
    Pscf manipulated = gevn.run(model::build_ebg(mixed));

    for (int i : strategic) {
      double before = 0.0, after = 0.0;
      for (int j = 0; j < election.m; ++j) {
        before += honest.p[j] * election.utilities.at(i, j);
        after += manipulated.p[j] * election.utilities.at(i, j);
      }
      gain_total += after - before;
      ++strategic_total;
    }
  }
  return strategic_total == 0 ? 0.0 : gain_total / static_cast<double>(strategic_total);
}

AuditReport audit_axioms(const Mechanism& mechanism, const data::Dataset& dataset,
                         data::BallotInput input, int trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("audit_axioms: trials must be >= 1");
  Rng root(seed);
  AuditReport report;
  for (std::size_t idx = 0; idx < dataset.items.size(); ++idx) {
    const Election& election = dataset.items[idx].election;
    PreferenceProfile ballots = data::ballots_for(election, input);
    Pscf base = mechanism(ballots);
    Rng rng = root.fork(idx);
    for (int t = 0; t < trials; ++t) {
      auto voter_perm = random_permutation(election.n, rng);
      Pscf permuted = mechanism(permute_voters(ballots, voter_perm));
      for (int j = 0; j < election.m; ++j)
        report.anonymity_deviation = std::max(report.anonymity_deviation, std::abs(permuted.p[j] - base.p[j]));

      auto cand_perm = random_permutation(election.m, rng);
      Pscf mapped = mechanism(permute_candidates(ballots, cand_perm));
      // mapped[j'] should equal base[cand_perm[j']].
      for (int j = 0; j < election.m; ++j)
        report.neutrality_deviation =
            std::max(report.neutrality_deviation, std::abs(mapped.p[j] - base.p[cand_perm[j]]));
    }
  }
  report.monotonicity_violation =
      monotonicity_probe(mechanism, dataset, input, static_cast<int>(dataset.items.size()), 8, 1e-3,
                         root.fork(0xA0D17).next_u64());
  return report;
}

double monotonicity_probe(const Mechanism& mechanism, const data::Dataset& dataset,
                          data::BallotInput input, int elections, int pairs_per_election,
                          double eps, std::uint64_t seed) {
  Rng root(seed);
  double hinge_total = 0.0;
  std::int64_t count = 0;
  const int limit = std::min<int>(elections, static_cast<int>(dataset.items.size()));
  for (int idx = 0; idx < limit; ++idx) {
    const Election& election = dataset.items[idx].election;
    PreferenceProfile ballots = data::ballots_for(election, input);
    Rng rng = root.fork(idx);
    const int take = std::min(pairs_per_election, election.n * election.m);
    std::vector<int> flat(static_cast<std::size_t>(election.n) * election.m);
    std::iota(flat.begin(), flat.end(), 0);
    rng.shuffle(flat);
    for (int k = 0; k < take; ++k) {
      const int voter = flat[k] / election.m;
      const int cand = flat[k] % election.m;
      PreferenceProfile probe = ballots;
      probe.scores.at(voter, cand) += eps;
      const double up = mechanism(probe).p[cand];
      probe.scores.at(voter, cand) -= 2.0 * eps;
      const double down = mechanism(probe).p[cand];
      const double slope = (up - down) / (2.0 * eps);
      hinge_total += std::max(0.0, -slope);
      ++count;
    }
  }
  return count == 0 ? 0.0 : hinge_total / static_cast<double>(count);
}

}  // namespace gv::eval
