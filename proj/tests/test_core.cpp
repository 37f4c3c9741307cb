#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <vector>

#include "gv/core.hpp"
#include "gv/data.hpp"
#include "gv/rng.hpp"

using namespace gv;

namespace {

// Exhaustive minimal-dominating-set search, usable up to m ~ 5.
std::vector<int> smith_by_enumeration(const RankingProfile& profile) {
  const int m = profile.m;
  for (int size = 1; size <= m; ++size) {
    for (int bits = 0; bits < (1 << m); ++bits) {
      if (__builtin_popcount(bits) != size) continue;
      bool dominating = true;
      for (int a = 0; a < m && dominating; ++a) {
        if (!(bits & (1 << a))) continue;
        for (int b = 0; b < m && dominating; ++b) {
          if (bits & (1 << b)) continue;
          if (!pairwise_beats(profile, a, b)) dominating = false;
        }
      }
      if (dominating) {
        std::vector<int> members;
        for (int a = 0; a < m; ++a)
          if (bits & (1 << a)) members.push_back(a);
        return members;
      }
    }
  }
  return {};
}

RankingProfile random_profile(int n, int m, Rng& rng) {
  RankingProfile profile(n, m);
  std::vector<int> order(m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) order[j] = j;
    rng.shuffle(order);
    for (int pos = 0; pos < m; ++pos) profile.rank(i, order[pos]) = pos + 1;
  }
  return profile;
}

}  // namespace

TEST_CASE("utilities_to_ranking orders by utility with index tie-break") {
  std::vector<double> u1{0.9, 0.1, 0.5};
  CHECK(utilities_to_ranking(u1) == std::vector<int>{1, 3, 2});
  std::vector<double> u2{0.5, 0.5};
  CHECK(utilities_to_ranking(u2) == std::vector<int>{1, 2});
  std::vector<double> u3{1.0};
  CHECK(utilities_to_ranking(u3) == std::vector<int>{1});
  CHECK_THROWS_AS(utilities_to_ranking(std::span<const double>{}), std::invalid_argument);
}

TEST_CASE("ranking_to_borda formula and range") {
  CHECK(ranking_to_borda(1, 4) == doctest::Approx(0.75));
  CHECK(ranking_to_borda(7, 7) == 0.0);
  CHECK(ranking_to_borda(1, 2) == doctest::Approx(0.5));
  CHECK(ranking_to_borda(2, 2) == 0.0);
  CHECK_THROWS_AS(ranking_to_borda(0, 3), std::invalid_argument);
  CHECK_THROWS_AS(ranking_to_borda(4, 3), std::invalid_argument);

  // strictly decreasing in r; sums to (m-1)/2 over a full ranking
  for (int m : {2, 3, 5, 9}) {
    double prev = 2.0, total = 0.0;
    for (int r = 1; r <= m; ++r) {
      const double s = ranking_to_borda(r, m);
      CHECK(s < prev);
      prev = s;
      total += s;
    }
    CHECK(total == doctest::Approx((m - 1) / 2.0));
  }
}

TEST_CASE("welfare of the three kinds") {
  UtilityProfile u(2, 2);
  u.at(0, 0) = 1;
  u.at(0, 1) = 2;
  u.at(1, 0) = 3;
  u.at(1, 1) = 4;
  CHECK(welfare(u, WelfareKind::Utilitarian, 1) == doctest::Approx(6.0));
  CHECK(welfare(u, WelfareKind::Nash, 0) == doctest::Approx(3.0));
  CHECK(welfare(u, WelfareKind::Rawlsian, 1) == doctest::Approx(2.0));
  CHECK_THROWS_AS(welfare(u, WelfareKind::Utilitarian, 2), std::invalid_argument);
}

TEST_CASE("nash log-space mode rejects non-positive entries") {
  UtilityProfile u(1, 2);
  u.at(0, 0) = -1.0;
  u.at(0, 1) = 2.0;
  CHECK(welfare(u, WelfareKind::Nash, 0) == doctest::Approx(-1.0));  // plain product default
  CHECK_THROWS_AS(welfare(u, WelfareKind::Nash, 0, NashMode::LogSpace), std::invalid_argument);
  CHECK(welfare(u, WelfareKind::Nash, 1, NashMode::LogSpace) == doctest::Approx(2.0));
}

TEST_CASE("utilitarian welfare scales linearly and argmax is scale-free") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = rng.uniform_int(1, 6), m = rng.uniform_int(1, 5);
    UtilityProfile u(n, m);
    for (double& v : u.data) v = rng.uniform(0.05, 1.0);  // positive for all three kinds
    const double lambda = rng.uniform(0.1, 5.0);
    UtilityProfile scaled = u;
    for (double& v : scaled.data) v *= lambda;
    for (int j = 0; j < m; ++j)
      CHECK(welfare(scaled, WelfareKind::Utilitarian, j) ==
            doctest::Approx(lambda * welfare(u, WelfareKind::Utilitarian, j)));
    for (WelfareKind kind : {WelfareKind::Utilitarian, WelfareKind::Nash, WelfareKind::Rawlsian}) {
      auto base = welfare_per_candidate(u, kind);
      auto after = welfare_per_candidate(scaled, kind);
      CHECK(std::max_element(base.begin(), base.end()) - base.begin() ==
            std::max_element(after.begin(), after.end()) - after.begin());
    }
  }
}

TEST_CASE("smith set basics") {
  RankingProfile single(1, 1);
  single.rank(0, 0) = 1;
  CHECK(smith_set(single) == std::vector<int>{0});

  // 3-voter cycle A>B>C, B>C>A, C>A>B
  RankingProfile cycle(3, 3);
  int rows[3][3] = {{1, 2, 3}, {3, 1, 2}, {2, 3, 1}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) cycle.rank(i, j) = rows[i][j];
  CHECK(smith_set(cycle) == std::vector<int>{0, 1, 2});
}

TEST_CASE("smith set equals exhaustive minimal dominating set") {
  Rng rng(99);
  int condorcet_seen = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int n = rng.uniform_int(1, 9);
    const int m = rng.uniform_int(1, 5);
    RankingProfile profile = random_profile(n, m, rng);
    auto fast = smith_set(profile);
    auto brute = smith_by_enumeration(profile);
    REQUIRE(!fast.empty());
    CHECK(fast == brute);
    if (fast.size() == 1) {
      ++condorcet_seen;
      // the singleton member beats everyone: a Condorcet winner
      for (int b = 0; b < m; ++b)
        if (b != fast[0]) CHECK(pairwise_beats(profile, fast[0], b));
    }
  }
  CHECK(condorcet_seen > 50);
}

TEST_CASE("borda profile preserves within-row utility order") {
  Rng rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.uniform_int(1, 5), m = rng.uniform_int(1, 6);
    UtilityProfile u(n, m);
    for (double& v : u.data) v = rng.uniform(0.0, 1.0);
    auto rankings = rankings_from_utilities(u);
    auto profile = borda_profile(rankings);
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
          if (u.at(i, a) > u.at(i, b)) CHECK(profile.scores.at(i, a) > profile.scores.at(i, b));
  }
}

TEST_CASE("ranking-derived rows are permutations of the borda grid") {
  Rng rng(321);
  UtilityProfile u(4, 5);
  for (double& v : u.data) v = rng.uniform(0.0, 1.0);
  auto profile = borda_profile(rankings_from_utilities(u));
  CHECK(profile.kind == BallotKind::RankingDerived);
  for (int i = 0; i < 4; ++i) {
    std::vector<double> row(profile.scores.row(i).begin(), profile.scores.row(i).end());
    std::sort(row.begin(), row.end());
    for (int r = 0; r < 5; ++r) CHECK(row[r] == doctest::Approx(static_cast<double>(r) / 5.0));
  }
}

TEST_CASE("election and pscf validation") {
  CHECK_THROWS_AS(Election::make(0, 1, UtilityProfile(0, 1)), std::invalid_argument);
  CHECK_THROWS_AS(Election::make(2, 2, UtilityProfile(1, 2)), std::invalid_argument);
  UtilityProfile bad(1, 1);
  bad.at(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(Election::make(1, 1, std::move(bad)), std::invalid_argument);

  Pscf ok{{0.25, 0.75}};
  ok.validate();
  CHECK(ok.argmax() == 1);
  Pscf ties{{0.5, 0.5}};
  CHECK(ties.argmax() == 0);
  CHECK_THROWS_AS(Pscf{{0.5, 0.6}}.validate(), std::invalid_argument);
  CHECK_THROWS_AS(Pscf{{-0.1, 1.1}}.validate(), std::invalid_argument);
}
