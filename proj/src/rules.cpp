#include "gv/rules.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace gv::rules {

namespace {

int argmax_lowest(const std::vector<double>& scores) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(scores.size()); ++j)
    if (scores[j] > scores[best]) best = j;
  return best;
}

void check_profile(const RankingProfile& profile) {
  if (profile.n < 1 || profile.m < 1) throw std::invalid_argument("rules: empty ranking profile");
  std::vector<char> seen(profile.m);
  for (int i = 0; i < profile.n; ++i) {
    std::fill(seen.begin(), seen.end(), 0);
    for (int j = 0; j < profile.m; ++j) {
      int r = profile.rank(i, j);
      if (r < 1 || r > profile.m || seen[r - 1]) throw std::invalid_argument("rules: row is not a permutation of 1..m");
      seen[r - 1] = 1;
    }
  }
}

}  // namespace

RuleResult plurality(const RankingProfile& profile) {
  check_profile(profile);
  std::vector<double> scores(profile.m, 0.0);
  for (int i = 0; i < profile.n; ++i)
    for (int j = 0; j < profile.m; ++j)
      if (profile.rank(i, j) == 1) scores[j] += 1.0;
  return {scores, argmax_lowest(scores)};
}

RuleResult borda_rule(const RankingProfile& profile) {
  check_profile(profile);
  std::vector<double> scores(profile.m, 0.0);
  for (int i = 0; i < profile.n; ++i)
    for (int j = 0; j < profile.m; ++j)
      scores[j] += 1.0 - static_cast<double>(profile.rank(i, j)) / profile.m;
  return {scores, argmax_lowest(scores)};
}

RuleResult copeland(const RankingProfile& profile) {
  check_profile(profile);
  std::vector<double> scores(profile.m, 0.0);
  for (int a = 0; a < profile.m; ++a) {
    for (int b = a + 1; b < profile.m; ++b) {
      int wins_a = prefer_count(profile, a, b);
      int wins_b = profile.n - wins_a;
      if (wins_a > wins_b) {
        scores[a] += 1.0;
      } else if (wins_b > wins_a) {
        scores[b] += 1.0;
      } else {
        scores[a] += 0.5;
        scores[b] += 0.5;
      }
    }
  }
  return {scores, argmax_lowest(scores)};
}

RuleResult maximin(const RankingProfile& profile) {
  check_profile(profile);
  std::vector<double> scores(profile.m, 0.0);
  for (int a = 0; a < profile.m; ++a) {
    double worst = static_cast<double>(profile.n);  // vacuous best when m == 1
    for (int b = 0; b < profile.m; ++b)
      if (b != a) worst = std::min(worst, static_cast<double>(prefer_count(profile, a, b)));
    scores[a] = worst;
  }
  return {scores, argmax_lowest(scores)};
}

RuleResult stv(const RankingProfile& profile) {
  check_profile(profile);
  const int n = profile.n;
  const int m = profile.m;
  std::vector<char> active(m, 1);
  int active_count = m;

  while (true) {
    std::vector<int> tally(m, 0);
    for (int i = 0; i < n; ++i) {
      int best = -1;
      for (int j = 0; j < m; ++j)
        if (active[j] && (best < 0 || profile.rank(i, j) < profile.rank(i, best))) best = j;
      ++tally[best];
    }

    for (int j = 0; j < m; ++j)
      if (active[j] && 2 * tally[j] > n) return {{}, j};
    if (active_count == 1) {
      for (int j = 0; j < m; ++j)
        if (active[j]) return {{}, j};
    }

    int eliminate = -1;
    for (int j = 0; j < m; ++j)
      if (active[j] && (eliminate < 0 || tally[j] < tally[eliminate])) eliminate = j;
    active[eliminate] = 0;
    --active_count;
  }
}

RuleResult apply(RuleKind kind, const RankingProfile& profile) {
  switch (kind) {
    case RuleKind::Plurality: return plurality(profile);
    case RuleKind::Borda: return borda_rule(profile);
    case RuleKind::Copeland: return copeland(profile);
    case RuleKind::Maximin: return maximin(profile);
    case RuleKind::Stv: return stv(profile);
  }
  throw std::logic_error("rules::apply: unknown kind");
}

std::string to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::Plurality: return "plurality";
    case RuleKind::Borda: return "borda";
    case RuleKind::Copeland: return "copeland";
    case RuleKind::Maximin: return "maximin";
    case RuleKind::Stv: return "stv";
  }
  return "?";
}

RuleKind rule_kind_from_string(const std::string& name) {
  if (name == "plurality") return RuleKind::Plurality;
  if (name == "borda") return RuleKind::Borda;
  if (name == "copeland") return RuleKind::Copeland;
  if (name == "maximin") return RuleKind::Maximin;
  if (name == "stv") return RuleKind::Stv;
  throw std::invalid_argument("unknown rule: " + name);
}

}  // namespace gv::rules
