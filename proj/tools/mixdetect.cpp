// Command-line driver: each pipeline stage is a subcommand that reads and writes
// declared files only.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mixdetect/config.hpp"
#include "mixdetect/eval.hpp"
#include "mixdetect/features.hpp"
#include "mixdetect/graph.hpp"
#include "mixdetect/ingest.hpp"
#include "mixdetect/io.hpp"
#include "mixdetect/motif.hpp"
#include "mixdetect/nullmodel.hpp"
#include "mixdetect/pulearn.hpp"
#include "mixdetect/synth.hpp"

namespace fs = std::filesystem;
using namespace mixdetect;

namespace {

// Flag values as strings, keyed by config key; parsed together with the config file
// so both go through the same validation.
struct Overrides {
  std::string config;
  std::map<std::string, std::string> values;

  void add(CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { values[key] = v; }, help);
  }
};

PipelineConfig load_config(const Overrides& o, KeyValues* raw = nullptr) {
  KeyValues kv;
  if (!o.config.empty()) kv = read_key_values(o.config);
  for (const auto& [k, v] : o.values) kv[k] = v;
  PipelineConfig c;
  apply_config(c, kv);
  validate(c);
  if (raw) *raw = std::move(kv);
  return c;
}

const std::string& require(const std::string& value, const char* flag) {
  if (value.empty()) throw std::invalid_argument(std::string("missing required ") + flag);
  return value;
}

void require_file(const std::string& path, const char* flag) {
  require(path, flag);
  if (!fs::exists(path)) throw std::invalid_argument(std::string(flag) + ": no such file " + path);
}

std::vector<TxRecord> load_transactions(const PipelineConfig& c) {
  require_file(c.input, "--input");
  return read_transactions(c.input);
}

LabelSet load_label_file(const std::string& path) {
  require_file(path, "--labels");
  auto loaded = load_labels(fs::path(path));
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << path << ": " << w << '\n';
  return std::move(loaded.labels);
}

ExperimentOptions experiment_options(const PipelineConfig& c) {
  ExperimentOptions o;
  o.n_runs = c.n_runs;
  o.seed = c.seed;
  o.spy_rate = c.spy_rate;
  o.delta_p = c.delta_p;
  o.lambda = c.lambda;
  o.epsilon = c.epsilon;
  o.threads = c.threads;
  return o;
}

void write_report_pair(const fs::path& dir, const std::string& stem, const MetricsReport& rep) {
  atomic_write(dir / (stem + ".tsv"), [&](std::ostream& out) { write_report_tsv(out, rep); });
  atomic_write(dir / (stem + ".json"), [&](std::ostream& out) { write_report_json(out, rep); });
  // The summary must parse back.
  if (!nlohmann::json::accept(read_file(dir / (stem + ".json")))) {
    throw std::runtime_error("written report summary is not valid JSON");
  }
}

void print_summary(const char* what, const MetricsReport& rep) {
  std::cout << what << ": TPR " << rep.mean.tpr << " +- " << rep.std.tpr << ", FPR " << rep.mean.fpr
            << " +- " << rep.std.fpr << ", G-Mean " << rep.mean.gmean << " +- " << rep.std.gmean
            << " (" << rep.completed_runs() << " runs, " << rep.failed_runs << " failed)\n";
}

int cmd_synth(const Overrides& o) {
  KeyValues kv;
  const auto c = load_config(o, &kv);
  SynthConfig sc;
  apply_synth_config(sc, kv);
  if (o.values.count("seed")) sc.seed = c.seed;
  const fs::path dir = require(c.out, "--out");
  const auto ds = generate(sc);
  write_dataset(dir, ds);
  // Round trip what was written.
  if (read_transactions(dir / "transactions.jsonl").size() != ds.records.size()) {
    throw std::runtime_error("written transactions do not read back");
  }
  std::cout << "wrote " << ds.records.size() << " transactions, " << ds.mixers.size() << " mixers ("
            << ds.labels.positives.size() << " labeled) to " << dir.string() << '\n';
  return 0;
}

int cmd_census(const Overrides& o, const std::string& census_out, const std::string& aain_out,
               const std::string& tain_out) {
  const auto c = load_config(o);
  const fs::path out = require(c.out, "--out");
  const auto records = load_transactions(c);
  const auto ctx = TxContext::build(records, filter_addresses(records));
  const auto aain = build_aain(ctx);
  const auto tain = build_tain(ctx);
  if (!aain_out.empty()) {
    atomic_write(aain_out, [&](std::ostream& s) { write_aain_edges(s, aain); });
  }
  if (!tain_out.empty()) {
    atomic_write(tain_out, [&](std::ostream& s) { write_tain_edges(s, tain); });
  }
  if (!census_out.empty()) {
    const auto census = count_motifs(aain, tain, c.delta);
    atomic_write(census_out, [&](std::ostream& s) { write_census(s, *ctx, census); });
  }
  NullModelOptions nm;
  nm.delta = c.delta;
  nm.n_null = c.n_null;
  nm.seed = c.seed;
  nm.threads = c.threads;
  const auto report = significance_report(aain, tain, nm);
  atomic_write(out, [&](std::ostream& s) { write_significance_report(s, report); });
  write_significance_report(std::cout, report);
  return 0;
}

FeatureTable features_from_transactions(const PipelineConfig& c, Timestamp delta) {
  const auto records = load_transactions(c);
  const auto labels = load_label_file(c.labels);
  return build_feature_table(records, labels, delta);
}

int cmd_features(const Overrides& o) {
  const auto c = load_config(o);
  const fs::path out = require(c.out, "--out");
  const auto table = features_from_transactions(c, c.delta);
  atomic_write(out, [&](std::ostream& s) { write_feature_table(s, table); });
  if (read_feature_table(out).rows() != table.rows()) {
    throw std::runtime_error("written feature file does not read back");
  }
  std::cout << "wrote " << table.rows() << " rows (" << table.rows_with(Label::positive).size()
            << " positive) to " << out.string() << '\n';
  return 0;
}

FeatureTable load_features(const PipelineConfig& c) {
  require_file(c.input, "--input");
  return read_feature_table(fs::path(c.input));
}

int cmd_train(const Overrides& o) {
  const auto c = load_config(o);
  const fs::path out = require(c.out, "--out");
  const auto table = load_features(c);
  PUOptions po;
  po.spy_rate = c.spy_rate;
  po.delta_p = c.delta_p;
  po.lambda = c.lambda;
  po.epsilon = c.epsilon;
  po.seed = c.seed;
  const auto model = train_pu(table, po);
  atomic_write(out, [&](std::ostream& s) { save_model(s, model); });
  (void)load_model(out);
  std::cout << "theta " << model.theta << ", model written to " << out.string() << '\n';
  return 0;
}

int cmd_predict(const Overrides& o, const std::string& model_path) {
  const auto c = load_config(o);
  const fs::path out = require(c.out, "--out");
  require_file(model_path, "--model");
  auto model = load_model(fs::path(model_path));
  if (o.values.count("epsilon")) model.epsilon = c.epsilon;
  const auto table = load_features(c);
  const auto x = apply_standardization(table.features, model.standardization);
  const auto detections = predict(model, x, table.addresses);
  atomic_write(out, [&](std::ostream& s) { write_detections(s, detections); });
  std::size_t n = 0;
  for (const auto& d : detections) n += d.detected;
  std::cout << n << " of " << detections.size() << " addresses detected\n";
  return 0;
}

int cmd_evaluate(const Overrides& o, bool baseline) {
  const auto c = load_config(o);
  const fs::path dir = require(c.out, "--out");
  const auto table = load_features(c);
  fs::create_directories(dir);
  const auto opts = experiment_options(c);
  const auto rep = run_experiments(table, opts);
  write_report_pair(dir, "report", rep);
  print_summary("pu", rep);
  if (baseline) {
    const auto base = run_naive_baseline(table, opts);
    write_report_pair(dir, "baseline", base);
    print_summary("baseline", base);
  }
  return 0;
}

int cmd_sweep(const Overrides& o, const std::string& param, const std::vector<std::string>& values) {
  const auto c = load_config(o);
  const fs::path dir = require(c.out, "--out");
  if (values.empty()) throw std::invalid_argument("missing required --values");
  fs::create_directories(dir);
  const auto opts = experiment_options(c);

  std::vector<std::pair<std::string, MetricsReport>> rows;
  if (param == "epsilon") {
    std::vector<double> eps;
    for (const auto& v : values) eps.push_back(parse_real("--values", v));
    auto reps = run_epsilon_sweep(load_features(c), opts, eps);
    for (std::size_t i = 0; i < reps.size(); ++i) rows.emplace_back(values[i], std::move(reps[i]));
  } else {
    // Features depend on delta, so each value rebuilds them from the transactions.
    const auto records = load_transactions(c);
    const auto labels = load_label_file(c.labels);
    for (const auto& v : values) {
      const auto delta = parse_duration(v);
      rows.emplace_back(std::to_string(delta),
                        run_experiments(build_feature_table(records, labels, delta), opts));
    }
  }
  atomic_write(dir / "sweep.tsv", [&](std::ostream& s) {
    s << param << "\ttpr_mean\ttpr_std\tfpr_mean\tfpr_std\tgmean_mean\tgmean_std\tfailed_runs\n";
    for (const auto& [v, r] : rows) {
      s << v << '\t' << format_double(r.mean.tpr) << '\t' << format_double(r.std.tpr) << '\t'
        << format_double(r.mean.fpr) << '\t' << format_double(r.std.fpr) << '\t'
        << format_double(r.mean.gmean) << '\t' << format_double(r.std.gmean) << '\t'
        << r.failed_runs << '\n';
    }
  });
  for (const auto& [v, r] : rows) {
    print_summary((param + "=" + v).c_str(), r);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixing-service address detection from Bitcoin transaction data"};
  app.require_subcommand(1);
  Overrides ov;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", ov.config, "key = value config file; flags override it")
        ->check(CLI::ExistingFile);
    ov.add(cmd, "--seed", "seed", "base random seed");
    ov.add(cmd, "--out", "out", "output file or directory");
    ov.add(cmd, "--threads", "threads", "worker threads (0 = all cores)");
  };
  auto learning = [&](CLI::App* cmd) {
    ov.add(cmd, "--epsilon", "epsilon", "decision threshold on the stage-2 probability");
    ov.add(cmd, "--spy-rate", "spy_rate", "fraction of positives used as spies");
    ov.add(cmd, "--delta-p", "delta_p", "grid step for the spy threshold");
    ov.add(cmd, "--lambda", "lambda", "L2 regularization coefficient");
  };

  auto* synth = app.add_subcommand("synth", "generate a labeled synthetic dataset");
  common(synth);

  auto* census = app.add_subcommand("census", "motif census and null-model significance");
  common(census);
  ov.add(census, "--input", "input", "transactions (.jsonl or .csv)");
  ov.add(census, "--delta", "delta", "motif window, e.g. 3h or 10800");
  ov.add(census, "--null-samples", "n_null", "number of null-model replicas");
  std::string census_out, aain_out, tain_out;
  census->add_option("--census-out", census_out, "per-address motif counts");
  census->add_option("--dump-aain", aain_out, "AAIN edge list");
  census->add_option("--dump-tain", tain_out, "TAIN edge list");

  auto* features = app.add_subcommand("features", "build the feature matrix");
  common(features);
  ov.add(features, "--input", "input", "transactions (.jsonl or .csv)");
  ov.add(features, "--labels", "labels", "labeled mixer addresses, one per line");
  ov.add(features, "--delta", "delta", "motif window, e.g. 3h or 10800");

  auto* train = app.add_subcommand("train", "train the two-stage PU model");
  common(train);
  learning(train);
  ov.add(train, "--input", "input", "feature matrix");

  auto* predict_cmd = app.add_subcommand("predict", "score addresses with a trained model");
  common(predict_cmd);
  ov.add(predict_cmd, "--input", "input", "feature matrix");
  ov.add(predict_cmd, "--epsilon", "epsilon", "override the model's decision threshold");
  std::string model_path;
  predict_cmd->add_option("--model", model_path, "model file from `train`");

  auto* evaluate = app.add_subcommand("evaluate", "repeated split experiments");
  common(evaluate);
  learning(evaluate);
  ov.add(evaluate, "--input", "input", "feature matrix");
  ov.add(evaluate, "--runs", "n_runs", "number of experiments");
  bool baseline = false;
  evaluate->add_flag("--baseline", baseline, "also run the naive supervised baseline");

  auto* sweep = app.add_subcommand("sweep", "evaluate across values of epsilon or delta");
  common(sweep);
  learning(sweep);
  ov.add(sweep, "--input", "input", "feature matrix (epsilon) or transactions (delta)");
  ov.add(sweep, "--labels", "labels", "label file (delta sweeps)");
  ov.add(sweep, "--runs", "n_runs", "number of experiments per value");
  std::string param = "epsilon";
  std::vector<std::string> values;
  sweep->add_option("--param", param, "parameter to sweep")
      ->check(CLI::IsMember({"epsilon", "delta"}));
  sweep->add_option("--values", values, "comma-separated values")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(ov);
    if (*census) return cmd_census(ov, census_out, aain_out, tain_out);
    if (*features) return cmd_features(ov);
    if (*train) return cmd_train(ov);
    if (*predict_cmd) return cmd_predict(ov, model_path);
    if (*evaluate) return cmd_evaluate(ov, baseline);
    if (*sweep) return cmd_sweep(ov, param, values);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
