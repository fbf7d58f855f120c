#include "biomass/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "biomass/error.hpp"
#include "biomass/features.hpp"
#include "biomass/ingest.hpp"
#include "biomass/rng.hpp"

namespace biomass {
namespace {

constexpr double kUgPerMg = 1000.0;

bool in_mg(Metric m) { return m == Metric::MAE || m == Metric::RMSE; }

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double number_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

Dataset merge(const Dataset& a, const Dataset& b) {
  Dataset out = a;
  out.specimens.insert(out.specimens.end(), b.specimens.begin(), b.specimens.end());
  return out;
}

}  // namespace

std::pair<std::vector<std::string>, std::vector<std::string>> split_train_val(const Dataset& d, double val_fraction,
                                                                              std::uint64_t seed) {
  std::map<std::string, std::vector<std::string>> by_taxon;
  for (const auto& s : d.specimens) by_taxon[s.taxon].push_back(s.specimen_id);
  std::set<std::string> val;
  for (auto& [taxon, ids] : by_taxon) {
    Rng rng = make_rng(seed, "split:" + taxon);
    shuffle(ids, rng);
    std::size_t n_val = static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(ids.size())));
    if (ids.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, ids.size() - 1);
    else n_val = 0;
    val.insert(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
  }
  std::pair<std::vector<std::string>, std::vector<std::string>> out;
  for (const auto& s : d.specimens) (val.count(s.specimen_id) ? out.second : out.first).push_back(s.specimen_id);
  return out;
}

PredictionSet fit_predict(const Method& method, const Dataset& train, const Dataset& val, const Dataset& test,
                          std::uint64_t seed) {
  if (method.kind == MethodKind::Linear) {
    const LinearModel m = fit_linear(merge(train, val), method.features, method.linear_target, method.rows);
    return predict_dataset(m, test, method.trim_fraction);
  }
  nn::TrainConfig tc = method.train;
  tc.seed = seed;
  tc.trim_fraction = method.trim_fraction;
  const nn::TrainedModel m = nn::train(train, val, method.model, tc);
  return nn::predict_dataset(m, test);
}

CrossvalResult run_crossval(const Dataset& d, const Method& method, int k, std::uint64_t seed, int bootstrap_draws,
                            int threads) {
  for (const auto& s : d.specimens)
    if (!s.dry_mass_ug) throw Error(ErrorCode::NonPositiveMass, "specimen '" + s.specimen_id + "' has no dry mass");

  CrossvalResult out;
  out.plan = make_cv_splits(d, k, 0.2, seed);
  out.folds.resize(static_cast<std::size_t>(k));

  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(k));
  auto run_fold = [&](int f) {
    try {
      const auto& roles = out.plan.folds[static_cast<std::size_t>(f)];
      out.folds[static_cast<std::size_t>(f)] =
          fit_predict(method, subset(d, roles.train), subset(d, roles.val), subset(d, roles.test),
                      substream_seed(seed, "fold", static_cast<std::uint64_t>(f)));
    } catch (...) {
      errors[static_cast<std::size_t>(f)] = std::current_exception();
    }
  };
  const int workers = std::clamp(threads, 1, k);
  if (workers == 1) {
    for (int f = 0; f < k; ++f) run_fold(f);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int f = w; f < k; f += workers) run_fold(f);
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (const auto& fold : out.folds) out.fold_reports.push_back(compute_metrics(fold));
  out.pooled = pool_folds(out.folds);
  out.pooled_report = bootstrap_draws > 0 ? bootstrap_report(out.pooled, bootstrap_draws, 0.95, seed)
                                          : compute_metrics(out.pooled);
  return out;
}

OodResult run_ood(const Dataset& d, const std::string& holdout, const Method& method, std::uint64_t seed,
                  int bootstrap_draws) {
  const auto taxa = d.taxon_set();
  if (!taxa.count(holdout)) throw Error(ErrorCode::UnknownTaxon, "holdout taxon '" + holdout + "' not in dataset");

  std::vector<std::string> rest, test;
  for (const auto& s : d.specimens) (s.taxon == holdout ? test : rest).push_back(s.specimen_id);
  if (rest.empty()) throw Error(ErrorCode::EmptySplit, "no specimens outside the holdout taxon");

  // validation specimens for checkpoint selection come from the training taxa
  std::vector<std::string> train_ids = rest, val_ids;
  if (method.kind == MethodKind::Neural) std::tie(train_ids, val_ids) = split_train_val(subset(d, rest), 0.2, seed);

  OodResult out;
  out.holdout = holdout;
  out.train_count = train_ids.size() + val_ids.size();
  out.predictions = fit_predict(method, subset(d, train_ids), subset(d, val_ids), subset(d, test), seed);
  out.report = bootstrap_draws > 0 && out.predictions.size() >= 2
                   ? bootstrap_report(out.predictions, bootstrap_draws, 0.95, seed)
                   : compute_metrics(out.predictions);
  return out;
}

double predict_mass(const MassModel& m, const SpecimenRecord& s) {
  if (const auto* lin = std::get_if<LinearModel>(&m)) return predict_specimen(*lin, s, compute_features(s));
  return nn::predict_specimen(std::get<nn::TrainedModel>(m), s);
}

PipelineReport run_pipeline(const Dataset& d, const Classifier& classify, const MassEstimator& estimate,
                            bool log_pearson) {
  PipelineReport out;
  std::vector<std::string> truth, predicted;
  for (const auto& s : d.specimens) {
    if (!s.dry_mass_ug) throw Error(ErrorCode::NonPositiveMass, "specimen '" + s.specimen_id + "' has no dry mass");
    const std::string taxon = classify(s);
    out.predictions.entries.push_back({s.specimen_id, s.taxon, *s.dry_mass_ug, estimate(taxon, s), taxon});
    truth.push_back(s.taxon);
    predicted.push_back(taxon);
  }

  std::set<std::string> classes(truth.begin(), truth.end());
  classes.insert(predicted.begin(), predicted.end());
  out.classification = classification_report(truth, predicted, {classes.begin(), classes.end()});

  std::map<std::string, std::vector<const PredictionEntry*>> groups;
  for (const auto& e : out.predictions.entries) groups[*e.predicted_taxon].push_back(&e);
  for (const auto& [taxon, members] : groups) {
    GroupResult g;
    g.taxon = taxon;
    g.n = members.size();
    std::vector<double> pred, true_mass, r_pred, r_true;
    for (const auto* e : members) {
      if (e->taxon != taxon) ++g.n_misclassified;
      pred.push_back(e->predicted_mass_ug);
      true_mass.push_back(e->true_mass_ug);
      r_pred.push_back(log_pearson ? std::log(e->predicted_mass_ug) : e->predicted_mass_ug);
      r_true.push_back(log_pearson ? std::log(e->true_mass_ug) : e->true_mass_ug);
    }
    g.ks = ks_two_sample(pred, true_mass);
    if (members.size() >= 2) {
      try {
        g.r = pearson_r(r_true, r_pred);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroVariance) throw;
      }
    }
    out.groups.push_back(g);
  }
  return out;
}

PipelineReport run_pipeline(const Dataset& d, const nn::TrainedModel& classifier, const MassModels& models,
                            bool log_pearson) {
  if (classifier.config.task != nn::Task::Classification)
    throw Error(ErrorCode::ModelMissing, "pipeline needs a classification model");
  return run_pipeline(
      d, [&](const SpecimenRecord& s) { return nn::predict_taxon(classifier, s); },
      [&](const std::string& taxon, const SpecimenRecord& s) {
        auto it = models.per_taxon.find(taxon);
        if (it != models.per_taxon.end()) return predict_mass(it->second, s);
        if (models.shared) return predict_mass(*models.shared, s);
        throw Error(ErrorCode::ModelMissing, "no mass model for predicted taxon '" + taxon + "'");
      },
      log_pearson);
}

std::string pipeline_json(const PipelineReport& r) {
  nlohmann::json j;
  for (const auto& g : r.groups)
    j["groups"].push_back({{"taxon", g.taxon},
                           {"n", g.n},
                           {"n_misclassified", g.n_misclassified},
                           {"D", g.ks.d},
                           {"p", g.ks.p},
                           {"r", g.r ? nlohmann::json(*g.r) : nlohmann::json(nullptr)}});
  const auto& c = r.classification;
  nlohmann::json cls;
  cls["classes"] = c.classes;
  cls["accuracy"] = c.accuracy;
  for (std::size_t i = 0; i < c.classes.size(); ++i) {
    const auto& m = c.per_class[i];
    cls["per_class"].push_back(
        {{"taxon", c.classes[i]}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}});
    std::vector<double> row(static_cast<std::size_t>(c.confusion_pct.cols()));
    for (Eigen::Index k = 0; k < c.confusion_pct.cols(); ++k)
      row[static_cast<std::size_t>(k)] = c.confusion_pct(static_cast<Eigen::Index>(i), k);
    cls["confusion_pct"].push_back(row);
  }
  j["classification"] = std::move(cls);
  j["n"] = r.predictions.size();
  return j.dump(1) + "\n";
}

std::string labeled_report_json(const LabeledReport& r) {
  nlohmann::json j;
  j["method"] = r.method;
  j["dataset"] = r.dataset;
  j["n"] = r.report.n;
  j["mass_unit"] = "mg";
  for (Metric m : kAllMetrics) {
    const double unit = in_mg(m) ? kUgPerMg : 1.0;
    nlohmann::json entry = {{"value", number_or_null(r.report.get(m) / unit)}};
    auto it = r.report.intervals.find(m);
    if (it != r.report.intervals.end()) {
      entry["std"] = number_or_null(it->second.std / unit);
      entry["ci_low"] = number_or_null(it->second.low / unit);
      entry["ci_high"] = number_or_null(it->second.high / unit);
    }
    j["metrics"][to_string(m)] = entry;
  }
  return j.dump(1) + "\n";
}

LabeledReport labeled_report_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    LabeledReport r;
    r.method = j.at("method").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.report.n = j.at("n").get<std::size_t>();
    for (Metric m : kAllMetrics) {
      const auto& e = j.at("metrics").at(to_string(m));
      const double unit = in_mg(m) ? kUgPerMg : 1.0;
      const double v = number_or_nan(e.at("value")) * unit;
      switch (m) {
        case Metric::RMSE: r.report.rmse = v; break;
        case Metric::MAE: r.report.mae = v; break;
        case Metric::MAPE: r.report.mape = v; break;
        case Metric::MdAPE: r.report.mdape = v; break;
        case Metric::R2Log: r.report.r2_log = v; break;
      }
      if (e.contains("std"))
        r.report.intervals[m] = {number_or_nan(e.at("ci_low")) * unit, number_or_nan(e.at("ci_high")) * unit,
                                 number_or_nan(e.at("std")) * unit};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("metric report: ") + e.what());
  }
}

std::string predictions_csv(const PredictionSet& p) {
  std::string out = "specimen_id,taxon,true_mass_ug,predicted_mass_ug,predicted_taxon\n";
  for (const auto& e : p.entries)
    out += e.specimen_id + "," + e.taxon + "," + format_double(e.true_mass_ug) + "," +
           format_double(e.predicted_mass_ug) + "," + e.predicted_taxon.value_or("") + "\n";
  return out;
}

std::string split_plan_json(const SplitPlan& plan) {
  nlohmann::json j;
  j["fold_assignments"] = plan.fold_assignments;
  for (const auto& f : plan.folds) j["folds"].push_back({{"train", f.train}, {"val", f.val}, {"test", f.test}});
  return j.dump(1) + "\n";
}

std::vector<ReportRow> report_rows(const std::vector<LabeledReport>& reports) {
  if (reports.empty()) throw Error(ErrorCode::NoResults, "no metric reports given");
  std::vector<const LabeledReport*> sorted;
  for (const auto& r : reports) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
    return std::tie(a->dataset, a->method) < std::tie(b->dataset, b->method);
  });

  std::vector<ReportRow> rows;
  for (const auto* r : sorted)
    for (Metric m : kAllMetrics) {
      const double unit = in_mg(m) ? kUgPerMg : 1.0;
      ReportRow row;
      row.dataset = r->dataset;
      row.method = r->method;
      row.metric = to_string(m);
      row.value = r->report.get(m) / unit;
      auto it = r->report.intervals.find(m);
      if (it != r->report.intervals.end()) {
        row.std = it->second.std / unit;
        row.ci_low = it->second.low / unit;
        row.ci_high = it->second.high / unit;
      }
      rows.push_back(row);
    }
  return rows;
}

std::string report_rows_csv(const std::vector<ReportRow>& rows) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::string out = "dataset,method,metric,value,std,ci_low,ci_high\n";
  for (const auto& r : rows)
    out += r.dataset + "," + r.method + "," + r.metric + "," + format_double(r.value) + "," + opt(r.std) + "," +
           opt(r.ci_low) + "," + opt(r.ci_high) + "\n";
  return out;
}

std::string report_rows_json(const std::vector<ReportRow>& rows) {
  auto opt = [](const std::optional<double>& v) { return v ? number_or_null(*v) : nlohmann::json(nullptr); };
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows)
    j.push_back({{"dataset", r.dataset},
                 {"method", r.method},
                 {"metric", r.metric},
                 {"value", number_or_null(r.value)},
                 {"std", opt(r.std)},
                 {"ci_low", opt(r.ci_low)},
                 {"ci_high", opt(r.ci_high)}});
  return j.dump(1) + "\n";
}

}  // namespace biomass
