#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gv/core.hpp"
#include "gv/data.hpp"
#include "gv/models.hpp"

namespace gv::eval {

// Any mechanism mapping ballots to a candidate distribution; lets the audits
// run on hand-built mechanisms as well as trained networks.
using Mechanism = std::function<Pscf(const PreferenceProfile&)>;

Mechanism as_mechanism(const model::Gevn& net);

// Batched no-grad GEVN forward over a dataset (chunked internally).
std::vector<Pscf> batch_pscfs(const model::Gevn& net, std::span<const data::LabeledElection> items,
                              data::BallotInput input);

// Same, over explicit ballot profiles.
std::vector<Pscf> run_profiles(const model::Gevn& net, std::span<const PreferenceProfile> profiles);

// Fraction of elections whose predicted argmax (lowest index on ties) equals
// the stored label. Throws on empty or unlabeled datasets.
double accuracy(const model::Gevn& net, const data::Dataset& dataset, data::BallotInput input);
double accuracy(const Mechanism& mechanism, const data::Dataset& dataset, data::BallotInput input);

// Mean over elections of sum_j p(c_j) * sw_U(c_j).
double expected_welfare(const model::Gevn& net, const data::Dataset& dataset, WelfareKind kind,
                        data::BallotInput input, NashMode nash_mode = NashMode::Product);
double expected_welfare(const Mechanism& mechanism, const data::Dataset& dataset, WelfareKind kind,
                        data::BallotInput input, NashMode nash_mode = NashMode::Product);

// Upper bound of Eq-3-style welfare: mean of the best column welfare.
double best_onehot_welfare(const data::Dataset& dataset, WelfareKind kind,
                           NashMode nash_mode = NashMode::Product);

// Mean utility delta of strategic voters between the manipulated and honest
// outcomes, over Bernoulli(fraction) masks drawn from seed.
double manipulation_gain(const model::Gevn& gevn, const model::Gesn& gesn,
                         const data::Dataset& dataset, double fraction, std::uint64_t seed);

struct AuditReport {
  double anonymity_deviation = 0.0;
  double neutrality_deviation = 0.0;
  double monotonicity_violation = 0.0;  // mean hinge of sampled FD slopes
};

// Empirical axiom audit: max L-inf deviation under random voter permutations
// (anonymity) and candidate permutations (neutrality), plus a finite
// difference monotonicity probe over random (voter, candidate) pairs.
AuditReport audit_axioms(const Mechanism& mechanism, const data::Dataset& dataset,
                         data::BallotInput input, int trials, std::uint64_t seed);

// Monotonicity probe alone: mean over sampled pairs of max(0, -slope), with
// central differences of width eps on the ballot entry.
double monotonicity_probe(const Mechanism& mechanism, const data::Dataset& dataset,
                          data::BallotInput input, int elections, int pairs_per_election,
                          double eps, std::uint64_t seed);

}  // namespace gv::eval
