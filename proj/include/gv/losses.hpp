#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "gv/autodiff.hpp"
#include "gv/core.hpp"
#include "gv/models.hpp"
#include "gv/rng.hpp"

namespace gv::loss {

using ad::Tape;
using ad::Var;

// Negative log-likelihood of the labeled winner, clamped below at 1e-12.
Var rule_loss(Tape& tape, Var pscf, int winner);

// Negative expected social welfare: -sum_j p(c_j) * sw_U(c_j).
Var welfare_loss(Tape& tape, Var pscf, const UtilityProfile& utilities, WelfareKind kind,
                 NashMode nash_mode = NashMode::Product);

// Negative expected personal utility of one voter under the outcome
// distribution. Gradient cutting across voters happens where the profile is
// assembled, not here.
Var rational_loss(Tape& tape, Var pscf, const UtilityProfile& utilities, int voter);

// Callback mapping perturbed edge features of a single election to its
// candidate distribution; parameters must already be leased on the tape.
using EdgeForward = std::function<Var(Tape&, const ad::Tensor& edge_features)>;

// Hinge penalty on negative own-candidate slopes, summed over the sampled
// (voter, candidate) pairs. Each slope d p(c_j) / d sigma_i(c_j) is estimated
// by central differences over the edge feature with both perturbed forward
// passes recorded, so the result is differentiable w.r.t. parameters.
Var monotonicity_loss(Tape& tape, const EdgeForward& forward, const model::ElectionGraph& graph,
                      std::span<const std::pair<int, int>> pairs, double eps = 1e-3);

// Uniform sample without replacement from the n*m grid.
std::vector<std::pair<int, int>> sample_pairs(int n, int m, int count, Rng& rng);

}  // namespace gv::loss
