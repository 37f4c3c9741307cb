#pragma once

#include <string>
#include <vector>

#include "gv/core.hpp"

namespace gv::rules {

enum class RuleKind { Plurality, Borda, Copeland, Maximin, Stv };

// Scores are per-candidate tallies (empty for STV, which is round-based).
// The winner is the maximal-score candidate, lowest index on ties.
struct RuleResult {
  std::vector<double> scores;
  int winner = 0;
};

RuleResult plurality(const RankingProfile& profile);
RuleResult borda_rule(const RankingProfile& profile);
RuleResult copeland(const RankingProfile& profile);
RuleResult maximin(const RankingProfile& profile);

// Rounds of plurality over the non-eliminated candidates. While no candidate
// holds a strict majority, the candidate with fewest first-place votes is
// eliminated (lowest index on ties) and its ballots transfer to each voter's
// best surviving candidate.
RuleResult stv(const RankingProfile& profile);

RuleResult apply(RuleKind kind, const RankingProfile& profile);

std::string to_string(RuleKind kind);
RuleKind rule_kind_from_string(const std::string& name);

}  // namespace gv::rules
