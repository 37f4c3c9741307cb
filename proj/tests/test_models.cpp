#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "gv/data.hpp"
#include "gv/models.hpp"
#include "gv/rng.hpp"

using namespace gv;
using namespace gv::model;

namespace {

PreferenceProfile random_ballots(int n, int m, Rng& rng) {
  PreferenceProfile profile;
  profile.scores = Matrix(n, m);
  for (double& v : profile.scores.data) v = rng.uniform(0.0, 1.0);
  return profile;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("build_ebg structure") {
  Rng rng(1);
  auto profile = random_ballots(2, 2, rng);
  auto g = build_ebg(profile);
  CHECK(g.n == 2);
  CHECK(g.m == 2);
  CHECK(g.edge_features.rows() == 4);
  CHECK(g.node_features.rows() == 4);
  // voters [1,0], candidates [0,1]
  CHECK(g.node_features.at(0, 0) == 1.0);
  CHECK(g.node_features.at(1, 0) == 1.0);
  CHECK(g.node_features.at(2, 1) == 1.0);
  CHECK(g.node_features.at(3, 1) == 1.0);
  // edge (v_0, c_1) carries sigma_0(c_1)
  CHECK(g.edge_features.data[1] == profile.scores.at(0, 1));

  auto big = build_ebg(random_ballots(3, 5, rng));
  CHECK(big.edge_features.rows() == 15);
  CHECK(big.node_features.rows() == 8);
}

TEST_CASE("gevn outputs a distribution and its parameter count matches the small budget") {
  Gevn net(GevnConfig{}, 11);
  CHECK(net.param_count() == 99279);

  Rng rng(2);
  for (int m : {2, 4, 7}) {
    auto p = net.run(build_ebg(random_ballots(5, m, rng)));
    p.validate();
    CHECK(static_cast<int>(p.p.size()) == m);
  }
}

TEST_CASE("gevn anonymity and neutrality at 1e-9") {
  Gevn net(GevnConfig{24, 8, 2}, 3);
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = rng.uniform_int(2, 7), m = rng.uniform_int(2, 5);
    auto profile = random_ballots(n, m, rng);
    auto base = net.run(build_ebg(profile));

    std::vector<int> vperm(n);
    std::iota(vperm.begin(), vperm.end(), 0);
    rng.shuffle(vperm);
    PreferenceProfile shuffled = profile;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) shuffled.scores.at(i, j) = profile.scores.at(vperm[i], j);
    auto anon = net.run(build_ebg(shuffled));
    for (int j = 0; j < m; ++j) CHECK(std::abs(anon.p[j] - base.p[j]) < 1e-9);

    std::vector<int> cperm(m);  // cperm[new] = old
    std::iota(cperm.begin(), cperm.end(), 0);
    rng.shuffle(cperm);
    PreferenceProfile mapped = profile;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) mapped.scores.at(i, j) = profile.scores.at(i, cperm[j]);
    auto neut = net.run(build_ebg(mapped));
    for (int j = 0; j < m; ++j) CHECK(std::abs(neut.p[j] - base.p[cperm[j]]) < 1e-9);
  }
}

TEST_CASE("gevn with zeroed output projection is uniform") {
  Gevn net(GevnConfig{16, 6, 2}, 5);
  net.visit_params([](const std::string& name, ad::Tensor& t) {
    if (name.rfind("out.", 0) == 0)
      for (double& v : t.data) v = 0.0;
  });
  Rng rng(6);
  auto p = net.run(build_ebg(random_ballots(4, 5, rng)));
  for (double v : p.p) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("gevn batching equals per-election forwards") {
  Gevn net(GevnConfig{20, 7, 2}, 7);
  Rng rng(8);
  std::vector<PreferenceProfile> profiles;
  std::vector<ElectionGraph> graphs;
  std::vector<std::pair<int, int>> shapes;
  for (int k = 0; k < 5; ++k) {
    profiles.push_back(random_ballots(rng.uniform_int(2, 6), rng.uniform_int(2, 5), rng));
    graphs.push_back(build_ebg(profiles.back()));
    shapes.emplace_back(graphs.back().n, graphs.back().m);
  }
  std::vector<const ElectionGraph*> ptrs;
  for (auto& g : graphs) ptrs.push_back(&g);

  ad::Tape tape(ad::Tape::Options{.grad_enabled = false, .check_finite = true});
  Lease lease = lease_const(tape, net);
  GraphBatch batch = make_batch(shapes);
  auto probs = net.forward(tape, lease, batch, tape.constant(stack_edge_features(ptrs)));
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    auto single = net.run(graphs[k]);
    const auto& batched = tape.value(probs[k]);
    for (std::size_t j = 0; j < single.p.size(); ++j)
      CHECK(batched.data[j] == doctest::Approx(single.p[j]).epsilon(1e-12));
  }
}

TEST_CASE("truncate_to_smith") {
  RankingProfile cycle(3, 3);
  int rows[3][3] = {{1, 2, 3}, {3, 1, 2}, {2, 3, 1}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) cycle.rank(i, j) = rows[i][j];
  Pscf p{{0.2, 0.5, 0.3}};
  auto full = truncate_to_smith(p, cycle);
  for (int j = 0; j < 3; ++j) CHECK(full.p[j] == doctest::Approx(p.p[j]));

  RankingProfile condorcet(3, 3);
  int rows2[3][3] = {{1, 2, 3}, {1, 3, 2}, {2, 1, 3}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) condorcet.rank(i, j) = rows2[i][j];
  auto one_hot = truncate_to_smith(Pscf{{0.4, 0.3, 0.3}}, condorcet);
  CHECK(one_hot.p[0] == doctest::Approx(1.0));
  CHECK(one_hot.p[1] == 0.0);
  CHECK(one_hot.p[2] == 0.0);

  // uniform p over a smith set of size 2 -> 0.5/0.5
  RankingProfile pair_top(2, 3);
  int rows3[2][3] = {{1, 2, 3}, {2, 1, 3}};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) pair_top.rank(i, j) = rows3[i][j];
  auto half = truncate_to_smith(Pscf{{1.0 / 3, 1.0 / 3, 1.0 / 3}}, pair_top);
  CHECK(half.p[0] == doctest::Approx(0.5));
  CHECK(half.p[1] == doctest::Approx(0.5));
  CHECK(half.p[2] == 0.0);
}

TEST_CASE("gesn private architecture matches the reference parameter count") {
  Gesn net(GesnConfig{}, 9);
  CHECK(net.param_count() == 13729);
}

TEST_CASE("gesn budget and range normalization") {
  Rng rng(10);
  UtilityProfile u(3, 4);
  for (double& v : u.data) v = rng.uniform(0.0, 1.0);

  GesnConfig budget_cfg;
  budget_cfg.norm = NormalizationMode::budget(1.0);
  Gesn budget_net(budget_cfg, 10);
  auto ballots = budget_net.run(u, std::nullopt);
  for (int i = 0; i < 3; ++i) {
    double total = 0.0;
    for (int j = 0; j < 4; ++j) total += ballots.scores.at(i, j);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }

  GesnConfig range_cfg;
  range_cfg.norm = NormalizationMode::range(0.0, 1.0);
  Gesn range_net(range_cfg, 11);
  auto bounded = range_net.run(u, std::nullopt);
  for (double v : bounded.scores.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("gesn private is row-local") {
  GesnConfig cfg;
  Gesn net(cfg, 12);
  Rng rng(13);
  UtilityProfile u(3, 4);
  for (double& v : u.data) v = rng.uniform(0.0, 1.0);
  auto before = net.run(u, std::nullopt);
  UtilityProfile changed = u;
  for (int j = 0; j < 4; ++j) changed.at(1, j) = rng.uniform(0.0, 1.0);
  auto after = net.run(changed, std::nullopt);
  for (int j = 0; j < 4; ++j) {
    CHECK(after.scores.at(0, j) == before.scores.at(0, j));
    CHECK(after.scores.at(2, j) == before.scores.at(2, j));
  }
}

TEST_CASE("gesn public depends on other voters, results needs the honest outcome") {
  GesnConfig cfg;
  cfg.info = InfoSetting::Public;
  Gesn net(cfg, 14);
  Rng rng(15);
  UtilityProfile u(3, 3);
  for (double& v : u.data) v = rng.uniform(0.0, 1.0);
  auto before = net.run(u, std::nullopt);
  UtilityProfile changed = u;
  changed.at(2, 0) += 0.5;
  auto after = net.run(changed, std::nullopt);
  double moved = 0.0;
  for (int j = 0; j < 3; ++j) moved += std::abs(after.scores.at(0, j) - before.scores.at(0, j));
  CHECK(moved > 0.0);

  GesnConfig results_cfg;
  results_cfg.info = InfoSetting::Results;
  Gesn results_net(results_cfg, 16);
  CHECK_THROWS_AS(results_net.run(u, std::nullopt), std::invalid_argument);
  Pscf honest{{0.2, 0.3, 0.5}};
  auto ok = results_net.run(u, honest);
  CHECK(ok.scores.rows == 3);
}

TEST_CASE("deepsets is voter-permutation invariant with a fixed candidate count") {
  DeepSetsConfig cfg;
  cfg.m_fixed = 4;
  cfg.width = 32;
  DeepSets net(cfg, 17);
  Rng rng(18);
  auto profile = random_ballots(6, 4, rng);
  auto base = net.run(profile);
  base.validate();

  std::vector<int> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  PreferenceProfile shuffled = profile;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j) shuffled.scores.at(i, j) = profile.scores.at(perm[i], j);
  auto permuted = net.run(shuffled);
  for (int j = 0; j < 4; ++j) CHECK(std::abs(permuted.p[j] - base.p[j]) < 1e-9);

  auto wrong_m = random_ballots(6, 5, rng);
  CHECK_THROWS_AS(net.run(wrong_m), std::invalid_argument);
  CHECK_THROWS_AS(deepsets_forward(net, profile, 5), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Gevn net(GevnConfig{12, 5, 2}, 19);
  const std::string path = temp_path("gv_test_gevn.ckpt");
  save_gevn(path, net);
  CHECK(checkpoint_kind(path) == "gevn");
  Gevn loaded = load_gevn(path);
  CHECK(loaded.config().node_width == 12);
  bool identical = true;
  std::vector<std::pair<std::string, std::vector<double>>> original;
  net.visit_params([&](const std::string& name, const ad::Tensor& t) { original.emplace_back(name, t.data); });
  std::size_t at = 0;
  loaded.visit_params([&](const std::string& name, const ad::Tensor& t) {
    if (original[at].first != name || original[at].second != t.data) identical = false;
    ++at;
  });
  CHECK(identical);
  std::remove(path.c_str());

  GesnConfig gesn_cfg;
  gesn_cfg.norm = NormalizationMode::range(-0.5, 1.0);
  Gesn gesn(gesn_cfg, 20);
  const std::string gesn_path = temp_path("gv_test_gesn.ckpt");
  save_gesn(gesn_path, gesn);
  Gesn gesn_loaded = load_gesn(gesn_path);
  CHECK(gesn_loaded.config().norm.kind == NormalizationMode::Kind::Range);
  Rng rng(21);
  UtilityProfile u(2, 3);
  for (double& v : u.data) v = rng.uniform(0.0, 1.0);
  auto a = gesn.run(u, std::nullopt);
  auto b = gesn_loaded.run(u, std::nullopt);
  CHECK(a.scores.data == b.scores.data);
  std::remove(gesn_path.c_str());
}

TEST_CASE("corrupt checkpoints are rejected with a reason") {
  const std::string path = temp_path("gv_test_corrupt.ckpt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a checkpoint";
  }
  CHECK_THROWS_WITH_AS(load_gevn(path), doctest::Contains("bad magic"), std::runtime_error);
  std::remove(path.c_str());

  Gesn gesn(GesnConfig{}, 22);
  const std::string gesn_path = temp_path("gv_test_kind.ckpt");
  save_gesn(gesn_path, gesn);
  CHECK_THROWS_WITH_AS(load_gevn(gesn_path), doctest::Contains("not a gevn"), std::runtime_error);
  std::remove(gesn_path.c_str());
}
