#include "gv/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace gv {

Election Election::make(int n, int m, UtilityProfile utilities) {
  if (n < 1 || m < 1) throw std::invalid_argument("Election: need n >= 1 and m >= 1");
  if (utilities.rows != n || utilities.cols != m)
    throw std::invalid_argument("Election: utility profile shape does not match (n, m)");
  for (double u : utilities.data)
    if (!std::isfinite(u)) throw std::invalid_argument("Election: non-finite utility entry");
  return Election{n, m, std::move(utilities)};
}

void Pscf::validate() const {
  if (p.empty()) throw std::invalid_argument("Pscf: empty distribution");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw std::invalid_argument("Pscf: negative or NaN probability");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("Pscf: probabilities do not sum to 1");
}

int Pscf::argmax() const {
  int best = 0;
  for (int j = 1; j < static_cast<int>(p.size()); ++j)
    if (p[j] > p[best]) best = j;
  return best;
}

std::vector<int> utilities_to_ranking(std::span<const double> utilities) {
  if (utilities.empty()) throw std::invalid_argument("utilities_to_ranking: empty utility row");
  const int m = static_cast<int>(utilities.size());
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return utilities[a] > utilities[b]; });
  std::vector<int> ranks(m);
  for (int pos = 0; pos < m; ++pos) ranks[order[pos]] = pos + 1;
  return ranks;
}

RankingProfile rankings_from_utilities(const UtilityProfile& utilities) {
  RankingProfile out(utilities.rows, utilities.cols);
  for (int i = 0; i < utilities.rows; ++i) {
    auto ranks = utilities_to_ranking(utilities.row(i));
    std::copy(ranks.begin(), ranks.end(), out.ranks.begin() + static_cast<std::size_t>(i) * utilities.cols);
  }
  return out;
}

double ranking_to_borda(int rank, int m) {
  if (rank < 1 || rank > m) throw std::invalid_argument("ranking_to_borda: rank out of range");
  return 1.0 - static_cast<double>(rank) / m;
}

PreferenceProfile borda_profile(const RankingProfile& rankings) {
  PreferenceProfile out;
  out.kind = BallotKind::RankingDerived;
  out.scores = Matrix(rankings.n, rankings.m);
  for (int i = 0; i < rankings.n; ++i)
    for (int j = 0; j < rankings.m; ++j)
      out.scores.at(i, j) = ranking_to_borda(rankings.rank(i, j), rankings.m);
  return out;
}

PreferenceProfile cardinal_profile(const UtilityProfile& utilities) {
  PreferenceProfile out;
  out.kind = BallotKind::Cardinal;
  out.scores = utilities;
  return out;
}

double welfare(const UtilityProfile& utilities, WelfareKind kind, int candidate, NashMode nash_mode) {
  if (candidate < 0 || candidate >= utilities.cols)
    throw std::invalid_argument("welfare: candidate index out of range");
  switch (kind) {
    case WelfareKind::Utilitarian: {
      double sum = 0.0;
      for (int i = 0; i < utilities.rows; ++i) sum += utilities.at(i, candidate);
      return sum;
    }
    case WelfareKind::Nash: {
      if (nash_mode == NashMode::LogSpace) {
        double log_sum = 0.0;
        for (int i = 0; i < utilities.rows; ++i) {
          double u = utilities.at(i, candidate);
          if (u <= 0.0) throw std::invalid_argument("welfare: Nash log-space mode needs positive utilities");
          log_sum += std::log(std::max(u, 1e-12));
        }
        return std::exp(log_sum);
      }
      double prod = 1.0;
      for (int i = 0; i < utilities.rows; ++i) prod *= utilities.at(i, candidate);
      return prod;
    }
    case WelfareKind::Rawlsian: {
      double lo = std::numeric_limits<double>::infinity();
      for (int i = 0; i < utilities.rows; ++i) lo = std::min(lo, utilities.at(i, candidate));
      return lo;
    }
  }
  throw std::logic_error("welfare: unknown kind");
}

std::vector<double> welfare_per_candidate(const UtilityProfile& utilities, WelfareKind kind, NashMode nash_mode) {
  std::vector<double> out(utilities.cols);
  for (int j = 0; j < utilities.cols; ++j) out[j] = welfare(utilities, kind, j, nash_mode);
  return out;
}

int prefer_count(const RankingProfile& profile, int a, int b) {
  int count = 0;
  for (int i = 0; i < profile.n; ++i)
    if (profile.rank(i, a) < profile.rank(i, b)) ++count;
  return count;
}

bool pairwise_beats(const RankingProfile& profile, int a, int b) {
  return prefer_count(profile, a, b) > prefer_count(profile, b, a);
}

std::vector<int> smith_set(const RankingProfile& profile) {
  const int m = profile.m;
  if (m == 1) return {0};

  std::vector<std::vector<bool>> beats(m, std::vector<bool>(m, false));
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      if (a != b) beats[a][b] = pairwise_beats(profile, a, b);

  // reach[a][b]: a can reach b through the beats-or-ties relation. The top
  // strongly connected component of that relation is the Smith set.
  std::vector<std::vector<bool>> reach(m, std::vector<bool>(m, false));
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      reach[a][b] = (a == b) || !beats[b][a];
  for (int k = 0; k < m; ++k)
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        if (reach[a][k] && reach[k][b]) reach[a][b] = true;

  // The relation is complete, so components are totally ordered; exactly one
  // of them pairwise-beats everything outside it.
  std::vector<int> component(m, -1);
  int next_id = 0;
  for (int a = 0; a < m; ++a) {
    if (component[a] >= 0) continue;
    component[a] = next_id;
    for (int b = a + 1; b < m; ++b)
      if (component[b] < 0 && reach[a][b] && reach[b][a]) component[b] = next_id;
    ++next_id;
  }

  for (int id = 0; id < next_id; ++id) {
    std::vector<int> members;
    for (int a = 0; a < m; ++a)
      if (component[a] == id) members.push_back(a);
    bool dominating = true;
    for (int a : members) {
      for (int b = 0; b < m && dominating; ++b)
        if (component[b] != id && !beats[a][b]) dominating = false;
      if (!dominating) break;
    }
    if (dominating) return members;
  }
  throw std::logic_error("smith_set: no dominating component found");
}

std::string to_string(WelfareKind kind) {
  switch (kind) {
    case WelfareKind::Utilitarian: return "utilitarian";
    case WelfareKind::Nash: return "nash";
    case WelfareKind::Rawlsian: return "rawlsian";
  }
  return "?";
}

WelfareKind welfare_kind_from_string(const std::string& name) {
  if (name == "utilitarian") return WelfareKind::Utilitarian;
  if (name == "nash") return WelfareKind::Nash;
  if (name == "rawlsian") return WelfareKind::Rawlsian;
  throw std::invalid_argument("unknown welfare kind: " + name);
}

}  // namespace gv
