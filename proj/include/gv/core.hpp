#pragma once

#include <span>
#include <string>
#include <vector>

namespace gv {

// Dense row-major matrix of doubles. Small enough on purpose: election
// utility profiles and ballots at desk scale are a few hundred entries.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
  std::span<const double> row(int i) const { return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)}; }
  std::span<double> row(int i) { return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)}; }
};

// Ground-truth voter utilities: one row per voter, one column per candidate.
using UtilityProfile = Matrix;

struct Election {
  int n = 0;
  int m = 0;
  UtilityProfile utilities;

  // Throws std::invalid_argument on shape mismatch or non-finite entries.
  static Election make(int n, int m, UtilityProfile utilities);
};

enum class BallotKind { Cardinal, RankingDerived };

// Elicited ballots sigma: scores.at(i, j) is voter i's reported score for
// candidate j. RankingDerived rows are permutations of {1-1/m, ..., 0}.
struct PreferenceProfile {
  Matrix scores;
  BallotKind kind = BallotKind::Cardinal;
};

// Strict rankings, one row per voter; rank(i, j) is the position (1 = best)
// of candidate j in voter i's total order.
struct RankingProfile {
  int n = 0;
  int m = 0;
  std::vector<int> ranks;

  RankingProfile() = default;
  RankingProfile(int n_, int m_) : n(n_), m(m_), ranks(static_cast<std::size_t>(n_) * m_, 0) {}

  int& rank(int i, int j) { return ranks[static_cast<std::size_t>(i) * m + j]; }
  int rank(int i, int j) const { return ranks[static_cast<std::size_t>(i) * m + j]; }
};

enum class WelfareKind { Utilitarian, Nash, Rawlsian };

// Nash welfare on non-positive utilities is ill-defined; Product evaluates
// the plain product, LogSpace clamps entries at 1e-12 and works in logs.
enum class NashMode { Product, LogSpace };

// Probability distribution over candidates. Entries are nonnegative and sum
// to one within 1e-9 after validate().
struct Pscf {
  std::vector<double> p;

  void validate() const;  // throws std::invalid_argument on violation
  int argmax() const;     // lowest index on ties
};

// Ranks one voter's utility row: higher utility gets a better (smaller)
// rank, ties broken toward the lower candidate index. Throws on empty input.
std::vector<int> utilities_to_ranking(std::span<const double> utilities);

RankingProfile rankings_from_utilities(const UtilityProfile& utilities);

// Normalized Borda score 1 - r/m for rank r in {1..m}. Throws on r out of range.
double ranking_to_borda(int rank, int m);

PreferenceProfile borda_profile(const RankingProfile& rankings);

// Truthful cardinal ballots: sigma = U.
PreferenceProfile cardinal_profile(const UtilityProfile& utilities);

double welfare(const UtilityProfile& utilities, WelfareKind kind, int candidate,
               NashMode nash_mode = NashMode::Product);

std::vector<double> welfare_per_candidate(const UtilityProfile& utilities, WelfareKind kind,
                                          NashMode nash_mode = NashMode::Product);

// Number of voters ranking candidate a strictly above candidate b.
int prefer_count(const RankingProfile& profile, int a, int b);

// True iff strictly more voters rank a above b than b above a.
bool pairwise_beats(const RankingProfile& profile, int a, int b);

// Smallest nonempty candidate set whose members all pairwise-beat every
// outsider; a pairwise tie keeps both candidates on the same side. Returned
// sorted ascending.
std::vector<int> smith_set(const RankingProfile& profile);

std::string to_string(WelfareKind kind);
WelfareKind welfare_kind_from_string(const std::string& name);

}  // namespace gv
