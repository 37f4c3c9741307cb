#include "gv/losses.hpp"

#include <numeric>
#include <stdexcept>

namespace gv::loss {

Var rule_loss(Tape& tape, Var pscf, int winner) {
  const auto& p = tape.value(pscf);
  if (winner < 0 || winner >= static_cast<int>(p.numel()))
    throw std::invalid_argument("rule_loss: winner index out of range");
  return tape.neg(tape.log(tape.clamp_min(tape.select(pscf, winner), 1e-12)));
}

Var welfare_loss(Tape& tape, Var pscf, const UtilityProfile& utilities, WelfareKind kind,
                 NashMode nash_mode) {
  const auto& p = tape.value(pscf);
  if (static_cast<int>(p.numel()) != utilities.cols)
    throw std::invalid_argument("welfare_loss: distribution width does not match candidate count");
  Var sw = tape.constant(ad::Tensor::vec(welfare_per_candidate(utilities, kind, nash_mode)));
  return tape.neg(tape.dot(pscf, sw));
}

Var rational_loss(Tape& tape, Var pscf, const UtilityProfile& utilities, int voter) {
  if (voter < 0 || voter >= utilities.rows)
    throw std::invalid_argument("rational_loss: voter index out of range");
  const auto& p = tape.value(pscf);
  if (static_cast<int>(p.numel()) != utilities.cols)
    throw std::invalid_argument("rational_loss: distribution width does not match candidate count");
  auto row = utilities.row(voter);
  Var own = tape.constant(ad::Tensor::vec({row.begin(), row.end()}));
  return tape.neg(tape.dot(pscf, own));
}

Var monotonicity_loss(Tape& tape, const EdgeForward& forward, const model::ElectionGraph& graph,
                      std::span<const std::pair<int, int>> pairs, double eps) {
  Var total = tape.constant(ad::Tensor::scalar(0.0));
  for (const auto& [voter, cand] : pairs) {
    if (voter < 0 || voter >= graph.n || cand < 0 || cand >= graph.m)
      throw std::invalid_argument("monotonicity_loss: sampled pair out of range");
    const std::size_t k = static_cast<std::size_t>(voter) * graph.m + cand;
    ad::Tensor plus = graph.edge_features;
    plus.data[k] += eps;
    ad::Tensor minus = graph.edge_features;
    minus.data[k] -= eps;
    Var p_plus = tape.select(forward(tape, plus), cand);
    Var p_minus = tape.select(forward(tape, minus), cand);
    Var slope = tape.scale(tape.sub(p_plus, p_minus), 1.0 / (2.0 * eps));
    total = tape.add(total, tape.relu(tape.neg(slope)));
  }
  return total;
}

std::vector<std::pair<int, int>> sample_pairs(int n, int m, int count, Rng& rng) {
  std::vector<int> flat(static_cast<std::size_t>(n) * m);
  std::iota(flat.begin(), flat.end(), 0);
  rng.shuffle(flat);
  const int take = std::min<int>(count, static_cast<int>(flat.size()));
  std::vector<std::pair<int, int>> out;
  out.reserve(take);
  for (int k = 0; k < take; ++k) out.emplace_back(flat[k] / m, flat[k] % m);
  return out;
}

}  // namespace gv::loss
