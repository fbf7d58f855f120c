// biomass: command-line front end for dataset preparation, model fitting and evaluation.
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "biomass/error.hpp"
#include "biomass/eval.hpp"
#include "biomass/experiments.hpp"
#include "biomass/features.hpp"
#include "biomass/ingest.hpp"
#include "biomass/linear.hpp"
#include "biomass/nn/trainer.hpp"
#include "biomass/synth.hpp"

namespace fs = std::filesystem;
using namespace biomass;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out = ".";
  int threads = 1;
};

std::uint64_t require_seed(const Globals& g, const char* command) {
  if (!g.seed) throw Error(ErrorCode::InvalidConfig, std::string(command) + " requires --seed");
  return *g.seed;
}

nlohmann::json config_json(const Globals& g) {
  if (g.config.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(read_file(g.config));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, g.config + ": " + e.what());
  }
}

struct DataArgs {
  std::string manifest;
  std::string name;
  int raster_size = 0;

  void add(CLI::App* app) {
    app->add_option("--data", manifest, "dataset manifest.json")->required();
    app->add_option("--name", name, "dataset label (default: manifest directory name)");
    app->add_option("--raster-size", raster_size, "pad rasters to this square size");
  }

  std::string label() const {
    if (!name.empty()) return name;
    const auto dir = fs::absolute(manifest).parent_path().filename().string();
    return dir.empty() ? "dataset" : dir;
  }

  Dataset load() const {
    AssembleOptions o;
    o.dataset_name = label();
    if (raster_size > 0) o.raster_size = raster_size;
    return load_dataset(manifest, o);
  }
};

// Linear or neural method description shared by crossval and ood.
struct MethodArgs {
  std::string kind = "linear";
  std::string features = "area";
  std::string target = "raw";
  std::string rows = "per_image";
  std::string name;
  double trim = 0.05;

  void add(CLI::App* app) {
    app->add_option("--method", kind, "linear | neural")->check(CLI::IsMember({"linear", "neural"}));
    app->add_option("--features", features, "area | area_speed (linear)");
    app->add_option("--target", target, "raw | log (linear)");
    app->add_option("--rows", rows, "per_image | specimen_mean (linear)")
        ->check(CLI::IsMember({"per_image", "specimen_mean"}));
    app->add_option("--trim", trim, "trim fraction of the per-specimen aggregate");
    app->add_option("--label", name, "method label in reports");
  }

  Method build(const nlohmann::json& cfg) const {
    Method m;
    m.trim_fraction = trim;
    if (kind == "linear") {
      m.kind = MethodKind::Linear;
      m.features = parse_feature_spec(features);
      m.linear_target = parse_target_space(target);
      m.rows = rows == "per_image" ? FitRows::PerImage : FitRows::SpecimenMean;
      m.name = m.features == FeatureSpec::AreaOnly ? "lin_a" : "lin_as";
      if (m.linear_target == TargetSpace::Log) m.name += "_log";
    } else {
      m.kind = MethodKind::Neural;
      if (cfg.contains("model")) cfg.at("model").get_to(m.model);
      if (cfg.contains("train")) cfg.at("train").get_to(m.train);
      m.trim_fraction = m.train.trim_fraction;
      m.name = std::string("nn_") + nn::to_string(m.model.architecture);
    }
    if (!name.empty()) m.name = name;
    return m;
  }
};

std::string model_kind(const std::string& text) {
  try {
    return nlohmann::json::parse(text).at("kind").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("model file: ") + e.what());
  }
}

MassModel load_mass_model(const std::string& path) {
  const std::string text = read_file(path);
  if (model_kind(text) == "linear") return linear_model_from_json(text);
  return nn::trained_model_from_json(text);
}

void write_history(const fs::path& path, const nn::TrainedModel& m) {
  std::string csv = "epoch,val_loss\n";
  for (std::size_t i = 0; i < m.val_loss_history.size(); ++i)
    csv += std::to_string(i + 1) + "," + format_double(m.val_loss_history[i]) + "\n";
  write_file(path, csv);
}

std::pair<Dataset, Dataset> train_val(const Dataset& d, const std::string& val_manifest, const DataArgs& args,
                                      std::uint64_t seed) {
  if (!val_manifest.empty()) {
    DataArgs v = args;
    v.manifest = val_manifest;
    v.name.clear();
    return {d, v.load()};
  }
  auto [tr, va] = split_train_val(d, 0.2, seed);
  return {subset(d, tr), subset(d, va)};
}

void print_error(const std::string& code, const std::string& message) {
  std::cerr << nlohmann::json{{"error", code}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Specimen biomass estimation from imaging metadata and rasters"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "master random seed");
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "validate a manifest and write a normalized dataset");
  std::string ingest_manifest, ingest_name;
  int ingest_size = 0;
  ingest->add_option("--manifest", ingest_manifest, "input manifest.json")->required();
  ingest->add_option("--name", ingest_name, "dataset name");
  ingest->add_option("--raster-size", ingest_size, "pad rasters to this square size");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset with ground truth");
  int per_group = 100, synth_raster = 0;
  synth->add_option("--per-group", per_group, "specimens per group when no --config is given");
  synth->add_option("--raster-size", synth_raster, "also render square rasters of this size");

  auto* features = app.add_subcommand("features", "per-specimen features as CSV");
  DataArgs features_data;
  features_data.add(features);

  auto* fit = app.add_subcommand("fit-linear", "fit a linear mass model");
  DataArgs fit_data;
  fit_data.add(fit);
  std::string fit_features = "area", fit_target = "raw", fit_rows = "per_image";
  fit->add_option("--features", fit_features, "area | area_speed");
  fit->add_option("--target", fit_target, "raw | log");
  fit->add_option("--rows", fit_rows, "per_image | specimen_mean")->check(CLI::IsMember({"per_image", "specimen_mean"}));

  auto* train = app.add_subcommand("train", "train a neural model");
  DataArgs train_data;
  train_data.add(train);
  std::string train_val_manifest;
  train->add_option("--val", train_val_manifest, "validation manifest (default: 20% stratified split)");

  auto* finetune = app.add_subcommand("finetune", "continue training a neural model");
  DataArgs ft_data;
  ft_data.add(finetune);
  std::string ft_model, ft_val, ft_freeze;
  finetune->add_option("--model", ft_model, "base model JSON")->required();
  finetune->add_option("--val", ft_val, "validation manifest (default: 20% stratified split)");
  finetune->add_option("--freeze", ft_freeze, "none | encoder | encoder_metadata");

  auto* crossval = app.add_subcommand("crossval", "k-fold cross-validation with pooled test predictions");
  DataArgs cv_data;
  cv_data.add(crossval);
  MethodArgs cv_method;
  cv_method.add(crossval);
  int folds = 5, cv_draws = 1000;
  crossval->add_option("--folds", folds, "number of folds")->check(CLI::Range(2, 1000));
  crossval->add_option("--draws", cv_draws, "bootstrap draws (0 disables intervals)");

  auto* evaluate = app.add_subcommand("evaluate", "predict a dataset with a saved model and score it");
  DataArgs ev_data;
  ev_data.add(evaluate);
  std::string ev_model;
  double ev_trim = 0.05;
  int ev_draws = 1000;
  evaluate->add_option("--model", ev_model, "model JSON")->required();
  evaluate->add_option("--trim", ev_trim, "trim fraction (linear models)");
  evaluate->add_option("--draws", ev_draws, "bootstrap draws (0 disables intervals)");

  auto* ood = app.add_subcommand("ood", "hold out one taxon, train on the rest");
  DataArgs ood_data;
  ood_data.add(ood);
  MethodArgs ood_method;
  ood_method.add(ood);
  std::string holdout;
  int ood_draws = 1000;
  ood->add_option("--holdout", holdout, "taxon to hold out")->required();
  ood->add_option("--draws", ood_draws, "bootstrap draws (0 disables intervals)");

  auto* pipeline = app.add_subcommand("pipeline", "classify specimens, then estimate their masses");
  DataArgs pl_data;
  pl_data.add(pipeline);
  std::string classifier_path, shared_model;
  std::vector<std::string> taxon_models;
  pipeline->add_option("--classifier", classifier_path, "classification model JSON")->required();
  pipeline->add_option("--mass-model", shared_model, "mass model used for every taxon");
  pipeline->add_option("--taxon-model", taxon_models, "TAXON=model.json (repeatable)");
  bool raw_pearson = false;
  pipeline->add_flag("--raw-pearson", raw_pearson, "correlate raw instead of log masses");

  auto* report = app.add_subcommand("report", "consolidate metric reports into one table");
  std::vector<std::string> report_inputs;
  report->add_option("inputs", report_inputs, "report JSON files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what());
    return 2;
  }

  const fs::path out(g.out);
  try {
    if (*ingest) {
      AssembleOptions o;
      o.dataset_name = ingest_name.empty() ? "dataset" : ingest_name;
      if (ingest_size > 0) o.raster_size = ingest_size;
      const Dataset d = load_dataset(ingest_manifest, o);
      write_dataset(d, out);
    } else if (*synth) {
      const std::uint64_t seed = require_seed(g, "synth");
      SynthConfig c = g.config.empty() ? default_synth_config(per_group, seed) : synth_config_from_json(read_file(g.config));
      c.seed = seed;
      if (synth_raster > 0) c.raster_size = synth_raster;
      const auto [d, truth] = generate(c);
      write_synth(d, truth, out);
    } else if (*features) {
      write_file(out / "features.csv", features_csv(features_data.load()));
    } else if (*fit) {
      const LinearModel m = fit_linear(fit_data.load(), parse_feature_spec(fit_features), parse_target_space(fit_target),
                                       fit_rows == "per_image" ? FitRows::PerImage : FitRows::SpecimenMean);
      write_file(out / "model.json", to_json(m));
    } else if (*train) {
      const std::uint64_t seed = require_seed(g, "train");
      const auto cfg = config_json(g);
      nn::ModelConfig mc;
      nn::TrainConfig tc;
      if (cfg.contains("model")) cfg.at("model").get_to(mc);
      if (cfg.contains("train")) cfg.at("train").get_to(tc);
      tc.seed = seed;
      const auto [tr, va] = train_val(train_data.load(), train_val_manifest, train_data, seed);
      const auto m = nn::train(tr, va, mc, tc);
      write_file(out / "model.json", nn::to_json(m));
      write_history(out / "history.csv", m);
    } else if (*finetune) {
      const std::uint64_t seed = require_seed(g, "finetune");
      const auto base = nn::trained_model_from_json(read_file(ft_model));
      const auto cfg = config_json(g);
      nn::TrainConfig tc = base.train_config;
      if (cfg.contains("train")) cfg.at("train").get_to(tc);
      if (!ft_freeze.empty()) tc.freeze = nn::parse_freeze(ft_freeze);
      tc.seed = seed;
      const auto [tr, va] = train_val(ft_data.load(), ft_val, ft_data, seed);
      const auto m = nn::fine_tune(base, tr, va, tc);
      write_file(out / "model.json", nn::to_json(m));
      write_history(out / "history.csv", m);
    } else if (*crossval) {
      const std::uint64_t seed = require_seed(g, "crossval");
      const Dataset d = cv_data.load();
      const Method method = cv_method.build(config_json(g));
      const auto r = run_crossval(d, method, folds, seed, cv_draws, g.threads);
      write_file(out / "report.json", labeled_report_json({method.name, d.name, r.pooled_report}));
      write_file(out / "predictions.csv", predictions_csv(r.pooled));
      write_file(out / "splits.json", split_plan_json(r.plan));
      nlohmann::json folds_json = nlohmann::json::array();
      for (std::size_t f = 0; f < r.fold_reports.size(); ++f)
        folds_json.push_back(nlohmann::json::parse(
            labeled_report_json({method.name, d.name + ":fold" + std::to_string(f), r.fold_reports[f]})));
      write_file(out / "folds.json", folds_json.dump(1) + "\n");
    } else if (*evaluate) {
      const std::uint64_t seed = require_seed(g, "evaluate");
      const Dataset d = ev_data.load();
      const std::string text = read_file(ev_model);
      PredictionSet p;
      std::string method;
      if (model_kind(text) == "linear") {
        const auto m = linear_model_from_json(text);
        p = predict_dataset(m, d, ev_trim);
        method = std::string(m.feature_spec == FeatureSpec::AreaOnly ? "lin_a" : "lin_as") +
                 (m.target_space == TargetSpace::Log ? "_log" : "");
      } else {
        const auto m = nn::trained_model_from_json(text);
        method = std::string("nn_") + nn::to_string(m.config.architecture);
        if (m.config.task == nn::Task::Classification) {
          std::vector<std::string> truth, pred;
          for (const auto& s : d.specimens) {
            truth.push_back(s.taxon);
            pred.push_back(nn::predict_taxon(m, s));
          }
          const auto c = classification_report(truth, pred, m.classes);
          nlohmann::json j{{"classes", c.classes}, {"accuracy", c.accuracy}};
          for (std::size_t i = 0; i < c.classes.size(); ++i)
            j["per_class"].push_back({{"taxon", c.classes[i]},
                                      {"precision", c.per_class[i].precision},
                                      {"recall", c.per_class[i].recall},
                                      {"f1", c.per_class[i].f1},
                                      {"support", c.per_class[i].support}});
          write_file(out / "classification.json", j.dump(1) + "\n");
          return 0;
        }
        p = nn::predict_dataset(m, d);
      }
      const auto rep = ev_draws > 0 ? bootstrap_report(p, ev_draws, 0.95, seed) : compute_metrics(p);
      write_file(out / "report.json", labeled_report_json({method, d.name, rep}));
      write_file(out / "report.csv", report_rows_csv(report_rows({{method, d.name, rep}})));
      write_file(out / "predictions.csv", predictions_csv(p));
    } else if (*ood) {
      const std::uint64_t seed = require_seed(g, "ood");
      const Dataset d = ood_data.load();
      const Method method = ood_method.build(config_json(g));
      const auto r = run_ood(d, holdout, method, seed, ood_draws);
      write_file(out / "report.json", labeled_report_json({method.name, d.name + ":ood:" + holdout, r.report}));
      write_file(out / "predictions.csv", predictions_csv(r.predictions));
    } else if (*pipeline) {
      const Dataset d = pl_data.load();
      const auto classifier = nn::trained_model_from_json(read_file(classifier_path));
      MassModels models;
      if (!shared_model.empty()) models.shared = load_mass_model(shared_model);
      for (const auto& spec : taxon_models) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--taxon-model expects TAXON=path");
        models.per_taxon.emplace(spec.substr(0, eq), load_mass_model(spec.substr(eq + 1)));
      }
      if (!models.shared && models.per_taxon.empty()) throw Error(ErrorCode::ModelMissing, "no mass model given");
      const auto r = run_pipeline(d, classifier, models, !raw_pearson);
      write_file(out / "pipeline.json", pipeline_json(r));
      write_file(out / "predictions.csv", predictions_csv(r.predictions));
    } else if (*report) {
      std::vector<LabeledReport> reports;
      for (const auto& path : report_inputs) reports.push_back(labeled_report_from_json(read_file(path)));
      const auto rows = report_rows(reports);
      write_file(out / "report.csv", report_rows_csv(rows));
      write_file(out / "report.json", report_rows_json(rows));
    }
  } catch (const Error& e) {
    print_error(to_string(e.code()), e.what());
    return is_numeric(e.code()) ? 3 : 2;
  } catch (const nlohmann::json::exception& e) {
    print_error("InvalidConfig", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return 2;
  }
  return 0;
}
