// graphvote: generate election datasets, train voting networks, evaluate and
// audit them. One command per process; exit codes: 0 ok, 1 usage, 2 runtime.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "gv/data.hpp"
#include "gv/eval.hpp"
#include "gv/models.hpp"
#include "gv/rules.hpp"
#include "gv/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gv;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string now_iso_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

struct Manifest {
  json doc;
  std::string path;

  Manifest(std::string file, const std::string& command, json config, std::uint64_t seed) : path(std::move(file)) {
    doc["command"] = command;
    doc["config"] = std::move(config);
    doc["seed"] = seed;
    doc["tool_version"] = kToolVersion;
    doc["started_utc"] = now_iso_utc();
    doc["ended_utc"] = nullptr;
    doc["outputs"] = json::array();
  }

  void write() const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest " + path);
    out << doc.dump(2) << '\n';
  }

  void add_output(const std::string& file) { doc["outputs"].push_back(file); }

  void finish() {
    doc["ended_utc"] = now_iso_utc();
    write();
  }
};

struct GenOptions {
  std::string source = "dirichlet";
  std::string file;
  int n_min = 3, n_max = 10;
  int m_min = 2, m_max = 5;
  int count = 1;
  std::string label = "none";
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainOptions {
  std::string mode;
  std::string train_path, val_path, out_dir;
  std::uint64_t seed = 0;
  int epochs = 100;
  int batch_size = 128;
  double lr = 3e-4;
  int patience = 30;
  int node_width = 58, edge_width = 19, layers = 4;
  // mimic
  std::string rule = "borda";
  // welfare
  std::string welfare_kind = "utilitarian";
  std::string loss = "welfare";
  std::string input = "ranking";
  double mono_weight = 0.0;
  // adversarial
  std::string scenario = "standard-freeze";
  std::string info = "private";
  double strategic_frac = 0.2;
  std::string pretrained;
  std::string norm = "budget:1";
};

struct ReportOptions {
  std::string checkpoint, data_path, out;
  std::string input = "utility";
  std::string welfare_kind = "utilitarian";
  std::string gesn;
  double strategic_frac = 0.2;
  int trials = 16;
  std::uint64_t seed = 0;
};

model::NormalizationMode parse_norm(const std::string& text) {
  if (text.rfind("budget:", 0) == 0) return model::NormalizationMode::budget(std::stod(text.substr(7)));
  if (text.rfind("range:", 0) == 0) {
    const std::string rest = text.substr(6);
    const auto colon = rest.find(':');
    if (colon == std::string::npos) throw CLI::ValidationError("--norm", "range needs two bounds, e.g. range:0:1");
    return model::NormalizationMode::range(std::stod(rest.substr(0, colon)), std::stod(rest.substr(colon + 1)));
  }
  throw CLI::ValidationError("--norm", "expected budget:A or range:A:B, got " + text);
}

int run_gen(const GenOptions& opt) {
  data::DatasetSpec spec;
  spec.source = opt.source == "dirichlet" ? data::Source::Dirichlet
                : opt.source == "spatial" ? data::Source::Spatial
                                          : data::Source::File;
  spec.file = opt.file;
  spec.n_min = opt.n_min;
  spec.n_max = opt.n_max;
  spec.m_min = opt.m_min;
  spec.m_max = opt.m_max;
  spec.count = opt.count;
  spec.seed = opt.seed;
  spec.label = data::label_spec_from_string(opt.label);

  json config{{"source", opt.source}, {"file", opt.file},   {"n_min", opt.n_min}, {"n_max", opt.n_max},
              {"m_min", opt.m_min},   {"m_max", opt.m_max}, {"count", opt.count}, {"label", opt.label},
              {"out", opt.out}};
  Manifest manifest(opt.out + ".manifest.json", "gen", config, opt.seed);
  manifest.add_output(opt.out);
  manifest.write();

  data::Dataset dataset = data::label_dataset(spec);
  data::write_jsonl(dataset, opt.out);
  manifest.finish();
  std::cout << "wrote " << dataset.items.size() << " elections to " << opt.out << '\n';
  return 0;
}

json train_config_json(const TrainOptions& opt) {
  return json{{"mode", opt.mode},
              {"train", opt.train_path},
              {"val", opt.val_path},
              {"out_dir", opt.out_dir},
              {"epochs", opt.epochs},
              {"batch_size", opt.batch_size},
              {"lr", opt.lr},
              {"patience", opt.patience},
              {"node_width", opt.node_width},
              {"edge_width", opt.edge_width},
              {"layers", opt.layers},
              {"rule", opt.rule},
              {"welfare_kind", opt.welfare_kind},
              {"loss", opt.loss},
              {"input", opt.input},
              {"mono_weight", opt.mono_weight},
              {"scenario", opt.scenario},
              {"info", opt.info},
              {"strategic_frac", opt.strategic_frac},
              {"pretrained", opt.pretrained},
              {"norm", opt.norm}};
}

int run_train(const TrainOptions& opt) {
  fs::create_directories(opt.out_dir);
  const std::string manifest_path = (fs::path(opt.out_dir) / "manifest.json").string();
  const std::string metrics_path = (fs::path(opt.out_dir) / "metrics.csv").string();
  const std::string gevn_path = (fs::path(opt.out_dir) / "gevn.ckpt").string();
  const std::string gesn_path = (fs::path(opt.out_dir) / "gesn.ckpt").string();

  Manifest manifest(manifest_path, "train", train_config_json(opt), opt.seed);
  manifest.add_output(metrics_path);
  manifest.add_output(gevn_path);
  if (opt.mode == "adversarial") manifest.add_output(gesn_path);
  manifest.write();

  data::Dataset train_set = data::read_jsonl(opt.train_path);
  data::Dataset val_set = data::read_jsonl(opt.val_path);

  model::GevnConfig model_cfg{opt.node_width, opt.edge_width, opt.layers};
  train::OptimConfig optim;
  optim.lr = opt.lr;
  optim.batch_size = opt.batch_size;
  optim.epochs = opt.epochs;
  optim.patience = opt.patience;

  if (opt.mode == "mimic") {
    auto result = train::train_mimic(train_set, val_set, rules::rule_kind_from_string(opt.rule),
                                     model_cfg, optim, opt.seed);
    result.history.write_csv(metrics_path);
    model::save_gevn(gevn_path, result.best);
    std::cout << "best validation accuracy " << result.best_val_accuracy << " at epoch "
              << result.best_epoch << '\n';
  } else if (opt.mode == "welfare") {
    auto result = train::train_welfare(
        train_set, val_set, welfare_kind_from_string(opt.welfare_kind),
        opt.loss == "welfare" ? train::LossChoice::Welfare : train::LossChoice::Rule,
        data::ballot_input_from_string(opt.input), opt.mono_weight, model_cfg, optim, opt.seed);
    result.history.write_csv(metrics_path);
    model::save_gevn(gevn_path, result.best);
    std::cout << "best validation welfare " << result.best_val_welfare << " at epoch "
              << result.best_epoch << ", monotonicity probe " << result.final_monotonicity_probe
              << '\n';
  } else {  // adversarial
    train::AdversarialConfig adv;
    adv.scenario = opt.scenario == "standard-freeze" ? train::AdversarialConfig::Scenario::StandardFreeze
                   : opt.scenario == "robust-train"  ? train::AdversarialConfig::Scenario::RobustTrain
                                                     : train::AdversarialConfig::Scenario::RobustFreeze;
    adv.info = opt.info == "private"  ? model::InfoSetting::Private
               : opt.info == "public" ? model::InfoSetting::Public
                                      : model::InfoSetting::Results;
    adv.strategic_frac = opt.strategic_frac;
    adv.welfare = welfare_kind_from_string(opt.welfare_kind);
    adv.gesn.info = adv.info;
    adv.gesn.norm = parse_norm(opt.norm);
    model::Gevn pretrained = model::load_gevn(opt.pretrained);
    auto result = train::train_adversarial(adv, pretrained, train_set, val_set, optim, opt.seed);
    result.history.write_csv(metrics_path);
    model::save_gevn(gevn_path, result.gevn);
    model::save_gesn(gesn_path, result.gesn);
    std::cout << "final strategic validation welfare " << result.final_val_welfare
              << " (honest " << result.honest_val_welfare << ")\n";
  }
  manifest.finish();
  return 0;
}

int run_eval(const ReportOptions& opt) {
  model::Gevn net = model::load_gevn(opt.checkpoint);
  data::Dataset dataset = data::read_jsonl(opt.data_path);
  const auto input = data::ballot_input_from_string(opt.input);

  json report;
  report["elections"] = dataset.items.size();
  report["input"] = opt.input;
  bool labeled = !dataset.items.empty();
  for (const auto& item : dataset.items)
    if (!item.label) labeled = false;
  if (labeled) report["accuracy"] = eval::accuracy(net, dataset, input);
  json welfare;
  for (WelfareKind kind : {WelfareKind::Utilitarian, WelfareKind::Nash, WelfareKind::Rawlsian})
    welfare[to_string(kind)] = eval::expected_welfare(net, dataset, kind, input);
  report["expected_welfare"] = welfare;
  report["best_onehot_welfare"] = eval::best_onehot_welfare(dataset, WelfareKind::Utilitarian);
  if (!opt.gesn.empty()) {
    model::Gesn gesn = model::load_gesn(opt.gesn);
    report["manipulation_gain"] =
        eval::manipulation_gain(net, gesn, dataset, opt.strategic_frac, opt.seed);
  }

  const std::string text = report.dump(2);
  std::cout << text << '\n';
  if (!opt.out.empty()) {
    std::ofstream file(opt.out, std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write report " + opt.out);
    file << text << '\n';
  }
  return 0;
}

int run_audit(const ReportOptions& opt) {
  model::Gevn net = model::load_gevn(opt.checkpoint);
  data::Dataset dataset = data::read_jsonl(opt.data_path);
  const auto input = data::ballot_input_from_string(opt.input);
  auto audit = eval::audit_axioms(eval::as_mechanism(net), dataset, input, opt.trials, opt.seed);

  json report{{"elections", dataset.items.size()},
              {"trials", opt.trials},
              {"anonymity_deviation", audit.anonymity_deviation},
              {"neutrality_deviation", audit.neutrality_deviation},
              {"monotonicity_violation", audit.monotonicity_violation}};
  const std::string text = report.dump(2);
  std::cout << text << '\n';
  if (!opt.out.empty()) {
    std::ofstream file(opt.out, std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write report " + opt.out);
    file << text << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graphvote: learned voting mechanisms on election bipartite graphs"};
  app.require_subcommand(1);
  const char* env_out = std::getenv("GRAPHVOTE_OUT");

  GenOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a JSONL election dataset");
  gen_cmd->add_option("--source", gen.source)->check(CLI::IsMember({"dirichlet", "spatial", "file"}));
  gen_cmd->add_option("--file", gen.file, "utility matrix CSV for --source file");
  gen_cmd->add_option("--n-min", gen.n_min);
  gen_cmd->add_option("--n-max", gen.n_max);
  gen_cmd->add_option("--m-min", gen.m_min);
  gen_cmd->add_option("--m-max", gen.m_max);
  gen_cmd->add_option("--count", gen.count);
  gen_cmd->add_option("--label", gen.label, "none, rule:NAME or welfare:KIND");
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--out", gen.out)->required();

  TrainOptions tr;
  CLI::App* train_cmd = app.add_subcommand("train", "train a voting network");
  train_cmd->add_option("--mode", tr.mode)->required()->check(CLI::IsMember({"mimic", "welfare", "adversarial"}));
  train_cmd->add_option("--train", tr.train_path)->required();
  train_cmd->add_option("--val", tr.val_path)->required();
  train_cmd->add_option("--out-dir", tr.out_dir, "defaults to $GRAPHVOTE_OUT");
  train_cmd->add_option("--seed", tr.seed);
  train_cmd->add_option("--epochs", tr.epochs);
  train_cmd->add_option("--batch-size", tr.batch_size);
  train_cmd->add_option("--lr", tr.lr);
  train_cmd->add_option("--patience", tr.patience);
  train_cmd->add_option("--node-width", tr.node_width);
  train_cmd->add_option("--edge-width", tr.edge_width);
  train_cmd->add_option("--layers", tr.layers);
  train_cmd->add_option("--rule", tr.rule)
      ->check(CLI::IsMember({"plurality", "borda", "copeland", "maximin", "stv"}));
  train_cmd->add_option("--welfare-kind", tr.welfare_kind)
      ->check(CLI::IsMember({"utilitarian", "nash", "rawlsian"}));
  train_cmd->add_option("--loss", tr.loss)->check(CLI::IsMember({"welfare", "rule"}));
  train_cmd->add_option("--input", tr.input)->check(CLI::IsMember({"ranking", "utility"}));
  train_cmd->add_option("--mono-weight", tr.mono_weight);
  train_cmd->add_option("--scenario", tr.scenario)
      ->check(CLI::IsMember({"standard-freeze", "robust-train", "robust-freeze"}));
  train_cmd->add_option("--info", tr.info)->check(CLI::IsMember({"private", "public", "results"}));
  train_cmd->add_option("--strategic-frac", tr.strategic_frac);
  train_cmd->add_option("--pretrained", tr.pretrained, "GEVN checkpoint for adversarial scenarios");
  train_cmd->add_option("--norm", tr.norm, "ballot constraint: budget:A or range:A:B");

  ReportOptions ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", ev.checkpoint)->required();
  eval_cmd->add_option("--data", ev.data_path)->required();
  eval_cmd->add_option("--input", ev.input)->check(CLI::IsMember({"ranking", "utility"}));
  eval_cmd->add_option("--welfare-kind", ev.welfare_kind);
  eval_cmd->add_option("--gesn", ev.gesn, "GESN checkpoint for manipulation gain");
  eval_cmd->add_option("--strategic-frac", ev.strategic_frac);
  eval_cmd->add_option("--seed", ev.seed);
  eval_cmd->add_option("--out", ev.out, "also write the JSON report here");

  ReportOptions au;
  CLI::App* audit_cmd = app.add_subcommand("audit", "audit anonymity/neutrality/monotonicity");
  audit_cmd->add_option("--checkpoint", au.checkpoint)->required();
  audit_cmd->add_option("--data", au.data_path)->required();
  audit_cmd->add_option("--input", au.input)->check(CLI::IsMember({"ranking", "utility"}));
  audit_cmd->add_option("--trials", au.trials);
  audit_cmd->add_option("--seed", au.seed);
  audit_cmd->add_option("--out", au.out);

  try {
    app.parse(argc, argv);
    if (gen_cmd->parsed() && gen.source == "file" && gen.file.empty())
      throw CLI::ValidationError("--file", "--source file needs --file");
    if (train_cmd->parsed()) {
      if (tr.out_dir.empty()) {
        if (env_out == nullptr)
          throw CLI::ValidationError("--out-dir", "missing --out-dir and GRAPHVOTE_OUT is unset");
        tr.out_dir = env_out;
      }
      if (tr.mode == "adversarial" && tr.pretrained.empty())
        throw CLI::ValidationError("--pretrained", "adversarial scenarios need a pretrained GEVN checkpoint");
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen);
    if (train_cmd->parsed()) return run_train(tr);
    if (eval_cmd->parsed()) return run_eval(ev);
    if (audit_cmd->parsed()) return run_audit(au);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
