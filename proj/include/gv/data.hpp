#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gv/core.hpp"
#include "gv/rng.hpp"
#include "gv/rules.hpp"

namespace gv::data {

enum class Source { Dirichlet, Spatial, File };

struct LabelSpec {
  enum class Kind { None, Rule, Welfare };
  Kind kind = Kind::None;
  rules::RuleKind rule = rules::RuleKind::Plurality;
  WelfareKind welfare = WelfareKind::Utilitarian;

  static LabelSpec none() { return {}; }
  static LabelSpec for_rule(rules::RuleKind r) { return {Kind::Rule, r, WelfareKind::Utilitarian}; }
  static LabelSpec for_welfare(WelfareKind w) { return {Kind::Welfare, rules::RuleKind::Plurality, w}; }
};

// Parses "none", "rule:NAME" or "welfare:KIND".
LabelSpec label_spec_from_string(const std::string& text);
std::string to_string(const LabelSpec& spec);

struct DatasetSpec {
  Source source = Source::Dirichlet;
  int n_min = 3, n_max = 10;
  int m_min = 2, m_max = 5;
  int count = 1;
  std::uint64_t seed = 0;
  LabelSpec label;
  std::string file;  // CSV utility matrix, Source::File only
};

struct LabeledElection {
  Election election;
  std::optional<int> label;  // winning candidate, 0-based
};

struct Dataset {
  std::vector<LabeledElection> items;
};

// One voter row drawn from the flat Dirichlet on the m-simplex.
UtilityProfile gen_dirichlet(int n, int m, Rng& rng);

// Voters and candidates uniform in the unit cube; U_ij = 1 - ||v_i - c_j||_2.
UtilityProfile gen_spatial(int n, int m, Rng& rng);

// Winner under the label spec; rule labels tabulate the utility-derived
// rankings, welfare labels take the welfare argmax (lowest index on ties).
int compute_label(const Election& election, const LabelSpec& spec);

// Deterministic in spec.seed; n and m are drawn per element. A File source
// yields the single election stored in spec.file.
Dataset label_dataset(const DatasetSpec& spec);

// One voter per row, one candidate per column. Throws on ragged or
// non-numeric rows, naming the offending line.
Matrix read_utility_csv(const std::string& path);

// One election per line: {"n":…, "m":…, "utilities":[[…]], "label":…} with a
// 1-based label, omitted for unlabeled elections.
void write_jsonl(const Dataset& dataset, const std::string& path);
Dataset read_jsonl(const std::string& path);

enum class BallotInput { Utility, Ranking };

BallotInput ballot_input_from_string(const std::string& name);
std::string to_string(BallotInput input);

// Ballots the mechanism sees: raw utilities, or normalized Borda scores of
// the utility-derived rankings.
PreferenceProfile ballots_for(const Election& election, BallotInput input);

}  // namespace gv::data
