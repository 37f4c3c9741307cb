#include "gv/data.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gv::data {

namespace {

using nlohmann::json;

int argmax_lowest(const std::vector<double>& values) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(values.size()); ++j)
    if (values[j] > values[best]) best = j;
  return best;
}

}  // namespace

LabelSpec label_spec_from_string(const std::string& text) {
  if (text == "none") return LabelSpec::none();
  if (text.rfind("rule:", 0) == 0) return LabelSpec::for_rule(rules::rule_kind_from_string(text.substr(5)));
  if (text.rfind("welfare:", 0) == 0)
    return LabelSpec::for_welfare(welfare_kind_from_string(text.substr(8)));
  throw std::invalid_argument("label spec must be none, rule:NAME or welfare:KIND, got: " + text);
}

std::string to_string(const LabelSpec& spec) {
  switch (spec.kind) {
    case LabelSpec::Kind::None: return "none";
    case LabelSpec::Kind::Rule: return "rule:" + rules::to_string(spec.rule);
    case LabelSpec::Kind::Welfare: return "welfare:" + to_string(spec.welfare);
  }
  return "?";
}

UtilityProfile gen_dirichlet(int n, int m, Rng& rng) {
  if (n < 1 || m < 1) throw std::invalid_argument("gen_dirichlet: need n >= 1 and m >= 1");
  UtilityProfile out(n, m);
  for (int i = 0; i < n; ++i) {
    double total = 0.0;
    for (int j = 0; j < m; ++j) {
      // Flat Dirichlet = normalized unit exponentials.
      double g = rng.exponential();
      while (g <= 0.0) g = rng.exponential();
      out.at(i, j) = g;
      total += g;
    }
    for (int j = 0; j < m; ++j) out.at(i, j) /= total;
  }
  return out;
}

UtilityProfile gen_spatial(int n, int m, Rng& rng) {
  if (n < 1 || m < 1) throw std::invalid_argument("gen_spatial: need n >= 1 and m >= 1");
  std::vector<std::array<double, 3>> voters(n), cands(m);
  for (auto& p : voters)
    for (double& x : p) x = rng.uniform01();
  for (auto& p : cands)
    for (double& x : p) x = rng.uniform01();
  UtilityProfile out(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double d2 = 0.0;
      for (int k = 0; k < 3; ++k) {
        const double diff = voters[i][k] - cands[j][k];
        d2 += diff * diff;
      }
      out.at(i, j) = 1.0 - std::sqrt(d2);
    }
  return out;
}

int compute_label(const Election& election, const LabelSpec& spec) {
  switch (spec.kind) {
    case LabelSpec::Kind::None:
      throw std::invalid_argument("compute_label: no label kind configured");
    case LabelSpec::Kind::Rule:
      return rules::apply(spec.rule, rankings_from_utilities(election.utilities)).winner;
    case LabelSpec::Kind::Welfare:
      return argmax_lowest(welfare_per_candidate(election.utilities, spec.welfare));
  }
  throw std::logic_error("compute_label: unknown label kind");
}

Dataset label_dataset(const DatasetSpec& spec) {
  if (spec.count < 1) throw std::invalid_argument("label_dataset: count must be >= 1");
  if (spec.n_min < 1 || spec.n_min > spec.n_max || spec.m_min < 1 || spec.m_min > spec.m_max)
    throw std::invalid_argument("label_dataset: empty n or m range");

  Dataset out;
  if (spec.source == Source::File) {
    Matrix utilities = read_utility_csv(spec.file);
    Election election = Election::make(utilities.rows, utilities.cols, std::move(utilities));
    LabeledElection item{std::move(election), std::nullopt};
    if (spec.label.kind != LabelSpec::Kind::None) item.label = compute_label(item.election, spec.label);
    out.items.push_back(std::move(item));
    return out;
  }

  Rng root(spec.seed);
  out.items.reserve(spec.count);
  for (int k = 0; k < spec.count; ++k) {
    Rng rng = root.fork(static_cast<std::uint64_t>(k));
    const int n = rng.uniform_int(spec.n_min, spec.n_max);
    const int m = rng.uniform_int(spec.m_min, spec.m_max);
    UtilityProfile u =
        spec.source == Source::Dirichlet ? gen_dirichlet(n, m, rng) : gen_spatial(n, m, rng);
    Election election = Election::make(n, m, std::move(u));
    LabeledElection item{std::move(election), std::nullopt};
    if (spec.label.kind != LabelSpec::Kind::None) item.label = compute_label(item.election, spec.label);
    out.items.push_back(std::move(item));
  }
  return out;
}

Matrix read_utility_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_utility_csv: cannot open " + path);
  Matrix out;
  std::vector<double> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw std::runtime_error("read_utility_csv: non-numeric entry '" + cell + "' at " + path +
                                 " line " + std::to_string(line_no));
      }
      while (used < cell.size() && (cell[used] == ' ' || cell[used] == '\t' || cell[used] == '\r')) ++used;
      if (used != cell.size())
        throw std::runtime_error("read_utility_csv: non-numeric entry '" + cell + "' at " + path +
                                 " line " + std::to_string(line_no));
      row.push_back(v);
    }
    if (out.cols == 0) out.cols = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != out.cols)
      throw std::runtime_error("read_utility_csv: ragged row at " + path + " line " + std::to_string(line_no) +
                               " (expected " + std::to_string(out.cols) + " columns, got " +
                               std::to_string(row.size()) + ")");
    values.insert(values.end(), row.begin(), row.end());
    ++out.rows;
  }
  if (out.rows == 0 || out.cols == 0) throw std::runtime_error("read_utility_csv: no data in " + path);
  out.data = std::move(values);
  return out;
}

void write_jsonl(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_jsonl: cannot open " + path + " for writing");
  for (const auto& item : dataset.items) {
    json j;
    j["n"] = item.election.n;
    j["m"] = item.election.m;
    json rows = json::array();
    for (int i = 0; i < item.election.n; ++i) {
      json row = json::array();
      for (int c = 0; c < item.election.m; ++c) row.push_back(item.election.utilities.at(i, c));
      rows.push_back(std::move(row));
    }
    j["utilities"] = std::move(rows);
    if (item.label) j["label"] = *item.label + 1;  // candidates are 1-based on disk
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write_jsonl: write failure on " + path);
}

Dataset read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_jsonl: cannot open " + path);
  Dataset out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + " line " + std::to_string(line_no);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("read_jsonl: invalid JSON at " + where);
    if (!j.contains("n") || !j.contains("m") || !j.contains("utilities"))
      throw std::runtime_error("read_jsonl: missing n/m/utilities at " + where);
    const int n = j.at("n").get<int>();
    const int m = j.at("m").get<int>();
    const auto& rows = j.at("utilities");
    if (!rows.is_array() || static_cast<int>(rows.size()) != n)
      throw std::runtime_error("read_jsonl: utilities row count does not match n at " + where);
    Matrix u(n, m);
    for (int i = 0; i < n; ++i) {
      const auto& row = rows.at(i);
      if (!row.is_array() || static_cast<int>(row.size()) != m)
        throw std::runtime_error("read_jsonl: utilities column count does not match m at " + where);
      for (int c = 0; c < m; ++c) {
        if (!row.at(c).is_number())
          throw std::runtime_error("read_jsonl: non-numeric utility at " + where);
        u.at(i, c) = row.at(c).get<double>();
      }
    }
    LabeledElection item{Election::make(n, m, std::move(u)), std::nullopt};
    if (j.contains("label")) {
      const int label = j.at("label").get<int>();
      if (label < 1 || label > m) throw std::runtime_error("read_jsonl: label out of range at " + where);
      item.label = label - 1;
    }
    out.items.push_back(std::move(item));
  }
  return out;
}

BallotInput ballot_input_from_string(const std::string& name) {
  if (name == "utility") return BallotInput::Utility;
  if (name == "ranking") return BallotInput::Ranking;
  throw std::invalid_argument("unknown ballot input: " + name);
}

std::string to_string(BallotInput input) {
  return input == BallotInput::Utility ? "utility" : "ranking";
}

PreferenceProfile ballots_for(const Election& election, BallotInput input) {
  if (input == BallotInput::Utility) return cardinal_profile(election.utilities);
  return borda_profile(rankings_from_utilities(election.utilities));
}

}  // namespace gv::data
