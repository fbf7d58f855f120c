#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "biomass/data_model.hpp"
#include "biomass/eval.hpp"
#include "biomass/linear.hpp"
#include "biomass/nn/trainer.hpp"

namespace biomass {

enum class MethodKind { Linear, Neural };

/// A mass estimator recipe: either an OLS fit or a neural training run.
struct Method {
  std::string name = "lin_a";
  MethodKind kind = MethodKind::Linear;
  FeatureSpec features = FeatureSpec::AreaOnly;
  TargetSpace linear_target = TargetSpace::Raw;
  FitRows rows = FitRows::PerImage;
  double trim_fraction = 0.05;
  nn::ModelConfig model;
  nn::TrainConfig train;
};

/// Linear methods fit on train and val together (nothing to select); neural
/// methods train on train and pick the checkpoint on val.
PredictionSet fit_predict(const Method& method, const Dataset& train, const Dataset& val, const Dataset& test,
                          std::uint64_t seed);

/// Stratified specimen-level train/validation split: per taxon, round(val_fraction·n)
/// specimens (at least one when the taxon has two or more) go to validation.
std::pair<std::vector<std::string>, std::vector<std::string>> split_train_val(const Dataset& d, double val_fraction,
                                                                              std::uint64_t seed);

struct CrossvalResult {
  SplitPlan plan;
  std::vector<PredictionSet> folds;
  std::vector<MetricReport> fold_reports;
  PredictionSet pooled;
  MetricReport pooled_report;
};

/// k-fold run with jackknife-style pooling of test predictions. Folds run on
/// up to `threads` threads; results do not depend on the thread count.
CrossvalResult run_crossval(const Dataset& d, const Method& method, int k, std::uint64_t seed,
                            int bootstrap_draws = 1000, int threads = 1);

struct OodResult {
  std::string holdout;
  std::size_t train_count = 0;
  PredictionSet predictions;
  MetricReport report;
};

/// Trains on every taxon except `holdout`, evaluates on `holdout` only.
OodResult run_ood(const Dataset& d, const std::string& holdout, const Method& method, std::uint64_t seed,
                  int bootstrap_draws = 1000);

using MassModel = std::variant<LinearModel, nn::TrainedModel>;

struct MassModels {
  std::optional<MassModel> shared;
  std::map<std::string, MassModel> per_taxon;
};

double predict_mass(const MassModel& m, const SpecimenRecord& s);

struct GroupResult {
  std::string taxon;
  std::size_t n = 0;
  std::size_t n_misclassified = 0;
  KsResult ks;
  /// Pearson r (on log masses by default); absent for fewer than two specimens or zero variance.
  std::optional<double> r;
};

struct PipelineReport {
  PredictionSet predictions;
  std::vector<GroupResult> groups;
  ClassificationReport classification;
};

using Classifier = std::function<std::string(const SpecimenRecord&)>;
using MassEstimator = std::function<double(const std::string& predicted_taxon, const SpecimenRecord&)>;

/// Classify, then estimate mass with the model of the predicted taxon. Groups
/// are formed by predicted taxon; misclassified specimens stay in them.
/// `log_pearson` selects log or raw masses for the per-group Pearson r.
PipelineReport run_pipeline(const Dataset& d, const Classifier& classify, const MassEstimator& estimate,
                            bool log_pearson = true);
PipelineReport run_pipeline(const Dataset& d, const nn::TrainedModel& classifier, const MassModels& models,
                            bool log_pearson = true);

std::string pipeline_json(const PipelineReport& r);

/// A metric report with its row labels, as exchanged between commands.
struct LabeledReport {
  std::string method;
  std::string dataset;
  MetricReport report;
};

/// MAE and RMSE are presented in milligrams; percentage metrics and R2 are unitless.
std::string labeled_report_json(const LabeledReport& r);
LabeledReport labeled_report_from_json(std::string_view text);

std::string predictions_csv(const PredictionSet& p);
std::string split_plan_json(const SplitPlan& plan);

struct ReportRow {
  std::string dataset;
  std::string method;
  std::string metric;
  double value = 0.0;
  std::optional<double> std;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
};

/// One row per (dataset, method, metric), sorted by (dataset, method), metrics
/// in RMSE, MAE, MAPE, MdAPE, R2 order. Throws NoResults.
std::vector<ReportRow> report_rows(const std::vector<LabeledReport>& reports);
std::string report_rows_csv(const std::vector<ReportRow>& rows);
std::string report_rows_json(const std::vector<ReportRow>& rows);

}  // namespace biomass
