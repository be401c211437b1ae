// Copyright 2026 The trustsense Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "trustsense/trustsense.hpp"

namespace trustsense::cli {

namespace fs = std::filesystem;

// Error raised by a pipeline stage; the message names the stage.
class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const std::string& what) : std::runtime_error(stage + ": " + what) {}
};

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

struct Options {
  std::string input;
  std::string output;
  std::string config;
  std::uint64_t seed = 7;
  int model = 2;
  double learning_rate = 0.01;
  double dropout = 0.2;
  int batch_size = 64;
  int epochs = 130;
  std::string optimizer;  // empty: the model's own default
  int k = 10;
  int n_features = 12;
  int lime_samples = 5000;
  int lime_k = 10;
  int lime_records = 100;
  std::optional<double> kernel_width;
  std::string features_file;
  std::string model_file;
  std::vector<int> sizes{4, 10, 12};
  std::string format = "text";
  int per_class = 2000;
  bool numbered_columns = false;
  std::optional<std::size_t> record_index;
  bool holdout = false;
  bool row_split = false;
  bool global_scaling = false;
  double train_fraction = 0.7;
  int rfe_step = 1;
  bool sweep = false;
  std::string label_column = "y";
  std::string subject_column = "subject";
};

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// One feature name per line; blank lines and '#' comments are ignored.
inline std::vector<std::string> read_feature_list(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash == 0) continue;
    auto name = normalize_feature_name(line);
    if (!name.empty()) names.push_back(std::move(name));
  }
  if (names.empty()) fail(ErrorKind::kParse, "feature file '" + path.string() + "' lists no features");
  return names;
}

inline std::string feature_list_text(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += n + '\n';
  return out;
}

inline CsvOptions csv_options(const Options& o) { return {o.label_column, o.subject_column, {}}; }

inline ModelSpec model_spec(const Options& o, int input_width) {
  Hyperparameters h;
  h.learning_rate = o.learning_rate;
  h.dropout_rate = o.dropout;
  h.batch_size = o.batch_size;
  h.epochs = o.epochs;
  h.seed = o.seed;
  if (o.model == 1) {
    h.optimizer = o.optimizer.empty() ? OptimizerKind::kRmsprop : parse_optimizer(o.optimizer);
    return model1_spec(input_width, h);
  }
  h.optimizer = o.optimizer.empty() ? OptimizerKind::kAdam : parse_optimizer(o.optimizer);
  return model2_spec(input_width, h);
}

// A trained model with the feature order and scaler it expects.
struct ModelBundle {
  MlpModel model;
  std::vector<std::string> features;
  ScalerParams scaler;

  nlohmann::ordered_json to_json() const {
    auto j = model.to_json();
    j["features"] = features;
    j["scaler"] = scaler.to_json();
    return j;
  }

  static ModelBundle from_json(const nlohmann::ordered_json& j) {
    ModelBundle b;
    b.model = MlpModel::from_json(j);
    b.features = j.at("features").get<std::vector<std::string>>();
    b.scaler = ScalerParams::from_json(j.at("scaler"));
    if (b.features.size() != static_cast<std::size_t>(b.model.spec().input_width) || b.scaler.columns != b.features) {
      fail(ErrorKind::kParse, "model file features, scaler and input width disagree");
    }
    return b;
  }

  static ModelBundle load(const fs::path& path) {
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kParse, path.string() + ": " + e.what());
    }
    return from_json(j);
  }
};

inline FeatureTable load_input(const Options& o) {
  if (o.input.empty()) fail(ErrorKind::kParameter, "--input is required");
  return stage("load", [&] { return load_csv(o.input, csv_options(o)); });
}

inline std::vector<std::string> chosen_features(const Options& o, const FeatureTable& table) {
  if (o.features_file.empty()) return table.columns;
  auto names = stage("features", [&] { return read_feature_list(o.features_file); });
  for (auto& n : names) n = table.columns[table.column_index(n)];
  return names;
}

// Balance, subset, fit the scaler on `rows`, train.
inline ModelBundle train_bundle(const Options& o, const FeatureTable& table, const std::vector<std::string>& features,
                                std::ostream& out) {
  const auto data = table.select_columns(features);
  const auto scaler = standardize_fit(data);
  ModelBundle b{MlpModel::build(model_spec(o, static_cast<int>(features.size()))), features, scaler};
  const auto report = stage("train", [&] { return b.model.train(standardize_apply(scaler, data)); });
  out << "trained model " << o.model << " on " << data.rows() << " rows x " << features.size()
      << " features: final loss " << (report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back())
      << ", training accuracy " << report.training_accuracy << "\n";
  return b;
}

inline FeatureTable standardized_for(const ModelBundle& b, const FeatureTable& table) {
  return standardize_apply(b.scaler, table.select_columns(b.features));
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline void cmd_synth(const Options& o, std::ostream& out) {
  if (o.output.empty()) fail(ErrorKind::kParameter, "--output is required");
  if (o.per_class <= 0) fail(ErrorKind::kParameter, "--n must be positive");
  SynthSpec spec;
  if (!o.config.empty()) spec = stage("config", [&] { return parse_synth_config(read_text(o.config)); });
  const auto rows = stage("synth", [&] { return synth_feature_corpus(spec, static_cast<std::size_t>(o.per_class), o.seed); });
  auto columns = feature_schema();
  if (o.numbered_columns) {
    for (std::size_t i = 0; i < columns.size(); ++i) columns[i] = "x" + std::to_string(i + 1);
  }
  const auto table = make_table(columns, rows);
  stage("write", [&] { save_csv(table, o.output, csv_options(o)); });
  out << "wrote " << table.rows() << " rows (" << table.count_label(1) << " trust, " << table.count_label(0)
      << " distrust) x " << table.cols() << " features to " << o.output << "\n";
}

inline void cmd_schema(const Options& o, std::ostream& out) {
  const auto text = feature_list_text(feature_schema());
  if (o.output.empty()) {
    out << text;
  } else {
    stage("write", [&] { write_text(o.output, text); });
  }
}

inline void cmd_train(const Options& o, std::ostream& out) {
  if (o.output.empty()) fail(ErrorKind::kParameter, "--output is required");
  const auto table = load_input(o);
  const auto balanced = stage("balance", [&] { return balance_downsample(table, derive_seed(o.seed, 11)); });
  const auto features = chosen_features(o, balanced);
  const auto bundle = train_bundle(o, balanced, features, out);
  stage("write", [&] { write_text(o.output, bundle.to_json().dump(1) + "\n"); });
  out << "wrote model to " << o.output << "\n";
}

inline void emit(const Options& o, const std::string& text, std::ostream& out) {
  if (o.output.empty()) {
    out << text;
  } else {
    stage("write", [&] { write_text(o.output, text); });
  }
}

inline ReportFormat report_format(const Options& o) {
  if (o.format == "json") return ReportFormat::kJson;
  if (o.format == "text") return ReportFormat::kText;
  fail(ErrorKind::kParameter, "--format must be text or json");
}

inline void cmd_evaluate(const Options& o, std::ostream& out) {
  const auto format = report_format(o);
  const auto table = load_input(o);
  const auto balanced = stage("balance", [&] { return balance_downsample(table, derive_seed(o.seed, 11)); });
  const auto features = chosen_features(o, balanced);
  const auto spec = model_spec(o, static_cast<int>(features.size()));
  MetricsSummary summary;
  if (o.holdout) {
    summary = stage("evaluate", [&] {
      const auto plan = o.row_split ? row_split(balanced, o.train_fraction, derive_seed(o.seed, 12))
                                    : subject_split(balanced, o.train_fraction, derive_seed(o.seed, 12));
      const auto train = balanced.select_rows(plan.train_rows);
      const auto validation = balanced.select_rows(plan.validation_rows);
      // Row-wise splits share subjects by construction, so skip the leakage guard.
      const FoldResult r = o.row_split ? detail::fit_and_score(train, validation, MlpLearner{spec}, features, o.seed)
                                       : holdout_evaluate(train, validation, spec, features, o.seed);
      return MetricsSummary::from_folds({r});
    });
  } else {
    EvalOptions eval;
    eval.per_fold_scaling = !o.global_scaling;
    summary = stage("evaluate", [&] { return kfold_evaluate(balanced, spec, features, o.k, o.seed, eval); });
  }
  emit(o, render_report(summary, format), out);
}

inline std::vector<std::size_t> sample_rows(std::vector<std::size_t> rows, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  rng.shuffle(rows);
  if (rows.size() > count) rows.resize(count);
  std::sort(rows.begin(), rows.end());
  return rows;
}

inline LimeOptions lime_options(const Options& o) {
  LimeOptions l;
  l.k = o.lime_k;
  l.n_samples = o.lime_samples;
  l.kernel_width = o.kernel_width;
  return l;
}

inline void cmd_select(const Options& o, std::ostream& out) {
  if (o.output.empty()) fail(ErrorKind::kParameter, "--output directory is required");
  const fs::path dir(o.output);
  const auto table = load_input(o);
  const auto balanced = stage("balance", [&] { return balance_downsample(table, derive_seed(o.seed, 11)); });
  const auto plan = stage("split", [&] { return subject_split(balanced, o.train_fraction, derive_seed(o.seed, 12)); });
  const auto train = balanced.select_rows(plan.train_rows);
  const auto validation = balanced.select_rows(plan.validation_rows);

  ModelBundle bundle = o.model_file.empty() ? train_bundle(o, train, train.columns, out)
                                            : stage("load", [&] { return ModelBundle::load(o.model_file); });
  const auto train_std = standardized_for(bundle, train);

  const auto rfe = stage("rfe", [&] { return rfe_select(train_std, o.n_features, o.rfe_step, o.seed); });
  stage("write", [&] { write_text(dir / "rfe.json", rfe.to_json().dump(2) + "\n"); });
  stage("write", [&] { write_text(dir / "rfe_selected.txt", feature_list_text(rfe.selected())); });
  out << "RFE selected " << rfe.n_features_target << " features\n";

  const auto records = validation.select_rows(
      sample_rows(std::vector<std::size_t>([&] {
                    std::vector<std::size_t> all(validation.rows());
                    std::iota(all.begin(), all.end(), std::size_t{0});
                    return all;
                  }()),
                  static_cast<std::size_t>(o.lime_records), derive_seed(o.seed, 13)));
  const auto influence = stage("lime", [&] {
    return aggregate_influence(probability_function(bundle.model), standardized_for(bundle, records), lime_options(o),
                               derive_seed(o.seed, 14), &bundle.scaler);
  });
  stage("write", [&] { write_text(dir / "lime_influence.csv", influence.render_csv()); });
  out << "LIME explained " << influence.records_examined << " validation records\n";

  const auto combos = stage("combine", [&] { return combine_lists(influence, rfe, o.sizes); });
  for (std::size_t i = 0; i < combos.size(); ++i) {
    const auto name = "combination_" + std::to_string(i + 1) + ".txt";
    stage("write", [&] { write_text(dir / name, feature_list_text(combos[i])); });
    out << name << ": " << combos[i].size() << " features\n";
  }

  if (o.sweep) {
    const auto sweep = stage("sweep", [&] {
      const int hi = std::min<int>(12, static_cast<int>(train_std.cols()) - 1);
      const int lo = std::min(4, hi);
      return rfe_sweep(train_std, lo, hi, MlpLearner{model_spec(o, 1)}, o.k, o.seed, o.rfe_step);
    });
    stage("write", [&] { write_text(dir / "rfe_sweep.csv", render_sweep_csv(sweep)); });
  }
}

inline void cmd_explain(const Options& o, std::ostream& out) {
  const auto format = report_format(o);
  if (o.model_file.empty()) fail(ErrorKind::kParameter, "--model-file is required");
  const auto table = load_input(o);
  const auto bundle = stage("load", [&] { return ModelBundle::load(o.model_file); });
  std::size_t row = 0;
  if (o.record_index) {
    row = *o.record_index;
    if (row >= table.rows()) fail(ErrorKind::kParameter, "--record-index is out of range");
  } else {
    // Seeded uniform draw from the validation subjects.
    const auto plan = stage("split", [&] { return subject_split(table, o.train_fraction, derive_seed(o.seed, 12)); });
    row = plan.validation_rows[Rng(derive_seed(o.seed, 15)).index(plan.validation_rows.size())];
  }
  const auto data = standardized_for(bundle, table);
  const Eigen::RowVectorXd x = data.x.row(static_cast<Eigen::Index>(row));
  const auto e = stage("explain", [&] {
    return explain(probability_function(bundle.model), std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                   bundle.features, lime_options(o), derive_seed(o.seed, 16), &bundle.scaler);
  });
  std::string text;
  if (format == ReportFormat::kJson) {
    auto j = e.to_json();
    j["record_index"] = row;
    j["label"] = table.y[row];
    text = j.dump(2) + "\n";
  } else {
    text = "Record " + std::to_string(row) + " (label " + std::to_string(table.y[row]) + ")\n\n" + e.render_text();
  }
  emit(o, text, out);
}

// synth -> select -> train -> evaluate -> explain, artifacts under --output.
inline void cmd_pipeline(const Options& o, std::ostream& out) {
  if (o.output.empty()) fail(ErrorKind::kParameter, "--output directory is required");
  const fs::path dir(o.output);
  fs::create_directories(dir);

  Options s = o;
  s.output = (dir / "dataset.csv").string();
  cmd_synth(s, out);

  Options sel = o;
  sel.input = s.output;
  sel.output = (dir / "selection").string();
  sel.features_file.clear();
  cmd_select(sel, out);

  fs::path features = o.features_file;
  if (features.empty()) {
    features = dir / "final_features.txt";
    write_text(features, feature_list_text(reduced_feature_names()));
  }

  Options tr = o;
  tr.input = s.output;
  tr.features_file = features.string();
  tr.output = (dir / "model.json").string();
  cmd_train(tr, out);

  Options ev = tr;
  ev.format = "text";
  ev.output = (dir / "report.txt").string();
  cmd_evaluate(ev, out);
  ev.format = "json";
  ev.output = (dir / "report.json").string();
  cmd_evaluate(ev, out);
  ev.holdout = true;
  ev.format = "text";
  ev.output = (dir / "holdout.txt").string();
  cmd_evaluate(ev, out);

  Options ex = o;
  ex.input = s.output;
  ex.model_file = tr.output;
  ex.format = "text";
  ex.output = (dir / "explanation.txt").string();
  cmd_explain(ex, out);
  ex.format = "json";
  ex.output = (dir / "explanation.json").string();
  cmd_explain(ex, out);
  out << read_text(dir / "report.txt");
}

// Exit codes: 0 success, 1 runtime or data error, 2 usage error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"trustsense: EEG/GSR trust classification with RFE and LIME feature selection"};
  app.require_subcommand(1, 1);
  Options o;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", o.seed, "Seed for every random choice");
    cmd->add_option("--label-column", o.label_column, "CSV label column");
    cmd->add_option("--subject-column", o.subject_column, "CSV subject column");
  };
  auto add_model = [&](CLI::App* cmd) {
    cmd->add_option("--model", o.model, "Architecture: 1 (shallow) or 2 (deep)")->check(CLI::IsMember({1, 2}));
    cmd->add_option("--learning-rate", o.learning_rate)->check(CLI::PositiveNumber | CLI::IsMember({0.0}));
    cmd->add_option("--dropout", o.dropout)->check(CLI::Range(0.0, 0.999999));
    cmd->add_option("--batch-size", o.batch_size)->check(CLI::PositiveNumber);
    cmd->add_option("--epochs", o.epochs)->check(CLI::NonNegativeNumber);
    cmd->add_option("--optimizer", o.optimizer)->check(CLI::IsMember({"adam", "rmsprop"}));
  };
  auto add_lime = [&](CLI::App* cmd) {
    cmd->add_option("--lime-samples", o.lime_samples)->check(CLI::Range(50, 1000000));
    cmd->add_option("--lime-k", o.lime_k)->check(CLI::PositiveNumber);
    cmd->add_option("--kernel-width", o.kernel_width)->check(CLI::PositiveNumber);
  };

  auto* synth = app.add_subcommand("synth", "Write a synthetic balanced feature CSV");
  add_common(synth);
  synth->add_option("--output", o.output, "CSV path")->required();
  synth->add_option("--n", o.per_class, "Records per class");
  synth->add_option("--config", o.config, "Synthesis config (key = value)");
  synth->add_flag("--numbered-columns", o.numbered_columns, "Name columns x1..x200");

  auto* schema = app.add_subcommand("schema", "Print the 200-feature schema");
  schema->add_option("--output", o.output);

  auto* train = app.add_subcommand("train", "Train a classifier and write a model file");
  add_common(train);
  add_model(train);
  train->add_option("--input", o.input)->required();
  train->add_option("--output", o.output)->required();
  train->add_option("--features-file", o.features_file);

  auto* evaluate = app.add_subcommand("evaluate", "k-fold or holdout evaluation report");
  add_common(evaluate);
  add_model(evaluate);
  evaluate->add_option("--input", o.input)->required();
  evaluate->add_option("--output", o.output);
  evaluate->add_option("--k", o.k)->check(CLI::Range(2, 1000000));
  evaluate->add_option("--features-file", o.features_file);
  evaluate->add_option("--format", o.format)->check(CLI::IsMember({"text", "json"}));
  evaluate->add_flag("--holdout", o.holdout, "Subject-wise train/validation split instead of k-fold");
  evaluate->add_flag("--row-split", o.row_split, "With --holdout: split rows instead of subjects");
  evaluate->add_flag("--global-scaling", o.global_scaling, "Standardize once before partitioning");
  evaluate->add_option("--train-fraction", o.train_fraction)->check(CLI::Range(0.01, 0.99));

  auto* select = app.add_subcommand("select", "RFE + LIME feature selection and combinations");
  add_common(select);
  add_model(select);
  add_lime(select);
  select->add_option("--input", o.input)->required();
  select->add_option("--output", o.output, "Output directory")->required();
  select->add_option("--n-features", o.n_features)->check(CLI::PositiveNumber);
  select->add_option("--sizes", o.sizes)->delimiter(',');
  select->add_option("--rfe-step", o.rfe_step)->check(CLI::PositiveNumber);
  select->add_option("--lime-records", o.lime_records)->check(CLI::PositiveNumber);
  select->add_option("--model-file", o.model_file);
  select->add_option("--k", o.k)->check(CLI::Range(2, 1000000));
  select->add_flag("--sweep", o.sweep, "Also write the 4..12 RFE accuracy sweep");
  select->add_option("--train-fraction", o.train_fraction)->check(CLI::Range(0.01, 0.99));

  auto* explain_cmd = app.add_subcommand("explain", "LIME explanation of one record");
  add_common(explain_cmd);
  add_lime(explain_cmd);
  explain_cmd->add_option("--input", o.input)->required();
  explain_cmd->add_option("--model-file", o.model_file)->required();
  explain_cmd->add_option("--record-index", o.record_index);
  explain_cmd->add_option("--output", o.output);
  explain_cmd->add_option("--format", o.format)->check(CLI::IsMember({"text", "json"}));
  explain_cmd->add_option("--train-fraction", o.train_fraction)->check(CLI::Range(0.01, 0.99));

  auto* pipeline = app.add_subcommand("pipeline", "synth, select, train, evaluate and explain");
  add_common(pipeline);
  add_model(pipeline);
  add_lime(pipeline);
  pipeline->add_option("--output", o.output, "Output directory")->required();
  pipeline->add_option("--n", o.per_class, "Records per class");
  pipeline->add_option("--config", o.config);
  pipeline->add_option("--k", o.k)->check(CLI::Range(2, 1000000));
  pipeline->add_option("--n-features", o.n_features)->check(CLI::PositiveNumber);
  pipeline->add_option("--sizes", o.sizes)->delimiter(',');
  pipeline->add_option("--lime-records", o.lime_records)->check(CLI::PositiveNumber);
  pipeline->add_option("--rfe-step", o.rfe_step)->check(CLI::PositiveNumber);
  pipeline->add_option("--features-file", o.features_file);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    err << "run with --help for usage\n";
    return 2;
  }

  try {
    if (*synth) cmd_synth(o, out);
    else if (*schema) cmd_schema(o, out);
    else if (*train) cmd_train(o, out);
    else if (*evaluate) cmd_evaluate(o, out);
    else if (*select) cmd_select(o, out);
    else if (*explain_cmd) cmd_explain(o, out);
    else if (*pipeline) cmd_pipeline(o, out);
  } catch (const StageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<const char*> argv{"trustsense"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace trustsense::cli
