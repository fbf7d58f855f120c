#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "biomass/experiments.hpp"
#include "biomass/ingest.hpp"
#include "biomass/synth.hpp"
#include "fixtures.hpp"

using namespace biomass;
using fixture::error_code;
namespace fs = std::filesystem;

namespace {

Dataset synthetic(int total, std::uint64_t seed) {
  SynthConfig c = default_synth_config(1, seed);
  const int base = total / 3;
  for (std::size_t g = 0; g < c.groups.size(); ++g) c.groups[g].count = base + (static_cast<int>(g) < total % 3);
  return generate(c).first;
}

Method area_speed() {
  Method m;
  m.name = "lin_as";
  m.features = FeatureSpec::AreaPlusSpeed;
  return m;
}

std::set<std::string> ids(const PredictionSet& p) {
  std::set<std::string> out;
  for (const auto& e : p.entries) out.insert(e.specimen_id);
  return out;
}

std::set<std::string> ids(const Dataset& d) {
  std::set<std::string> out;
  for (const auto& s : d.specimens) out.insert(s.specimen_id);
  return out;
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(BIOMASS_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("train/validation split") {
  const Dataset d = fixture::counted({10, 5, 1});
  const auto [train, val] = split_train_val(d, 0.2, 4);
  CHECK(train.size() + val.size() == 16);
  std::map<std::string, int> per;
  for (const auto& id : val) ++per[d.specimens[static_cast<std::size_t>(std::stoi(id.substr(1)))].taxon];
  CHECK(per["t0"] == 2);
  CHECK(per["t1"] == 1);
  CHECK(per.count("t2") == 0);
  CHECK(split_train_val(d, 0.2, 4) == split_train_val(d, 0.2, 4));
}

TEST_CASE("cross-validation covers every specimen once") {
  const Dataset d = synthetic(60, 2);
  const auto r = run_crossval(d, area_speed(), 5, 9, 0);
  CHECK(r.folds.size() == 5);
  CHECK(r.pooled.size() == 60);
  CHECK(ids(r.pooled) == ids(d));
  std::size_t total = 0;
  for (std::size_t f = 0; f < r.folds.size(); ++f) {
    total += r.folds[f].size();
    CHECK(ids(r.folds[f]) == std::set<std::string>(r.plan.folds[f].test.begin(), r.plan.folds[f].test.end()));
  }
  CHECK(total == 60);
  CHECK(r.pooled_report.n == 60);
  CHECK(r.pooled_report.intervals.empty());

  const auto threaded = run_crossval(d, area_speed(), 5, 9, 50, 3);
  const auto serial = run_crossval(d, area_speed(), 5, 9, 50, 1);
  CHECK(labeled_report_json({"m", "d", threaded.pooled_report}) == labeled_report_json({"m", "d", serial.pooled_report}));
  CHECK(predictions_csv(threaded.pooled) == predictions_csv(serial.pooled));
  CHECK(threaded.pooled_report.intervals.size() == kAllMetrics.size());

  Dataset missing = d;
  missing.specimens[3].dry_mass_ug.reset();
  CHECK(error_code([&] { run_crossval(missing, area_speed(), 5, 9, 0); }).has_value());
}

TEST_CASE("out-of-distribution split") {
  const Dataset d = synthetic(45, 3);
  const auto r = run_ood(d, "group_b", area_speed(), 1, 0);
  std::size_t held = 0;
  for (const auto& s : d.specimens) held += s.taxon == "group_b";
  CHECK(r.predictions.size() == held);
  CHECK(r.train_count == d.specimens.size() - held);
  CHECK(r.train_count + r.predictions.size() == d.specimens.size());
  for (const auto& e : r.predictions.entries) CHECK(e.taxon == "group_b");
  CHECK(error_code([&] { run_ood(d, "group_z", area_speed(), 1, 0); }) == ErrorCode::UnknownTaxon);

  // the holdout never reaches the fit: its masses can be anything
  Dataset poisoned = d;
  for (auto& s : poisoned.specimens)
    if (s.taxon == "group_b") s.dry_mass_ug = *s.dry_mass_ug * 1000;
  const auto p = run_ood(poisoned, "group_b", area_speed(), 1, 0);
  for (std::size_t i = 0; i < p.predictions.size(); ++i)
    CHECK(p.predictions.entries[i].predicted_mass_ug == r.predictions.entries[i].predicted_mass_ug);

  Dataset one_taxon = d;
  std::erase_if(one_taxon.specimens, [](const SpecimenRecord& s) { return s.taxon != "group_b"; });
  CHECK(error_code([&] { run_ood(one_taxon, "group_b", area_speed(), 1, 0); }) == ErrorCode::EmptySplit);
}

TEST_CASE("pipeline") {
  const Dataset d = synthetic(30, 4);
  const LinearModel lin = fit_linear(d, FeatureSpec::AreaPlusSpeed, TargetSpace::Raw, FitRows::PerImage);
  int calls = 0;
  const auto r = run_pipeline(
      d,
      [&](const SpecimenRecord& s) { return ++calls % 5 == 0 ? std::string("group_c") : s.taxon; },
      [&](const std::string&, const SpecimenRecord& s) { return predict_mass(lin, s); });
  CHECK(r.predictions.size() == d.specimens.size());
  std::size_t grouped = 0, wrong = 0;
  for (const auto& g : r.groups) {
    grouped += g.n;
    wrong += g.n_misclassified;
    CHECK(g.ks.d >= 0);
    CHECK(g.ks.d <= 1);
  }
  CHECK(grouped == d.specimens.size());
  std::size_t expected_wrong = 0;
  for (const auto& e : r.predictions.entries) expected_wrong += *e.predicted_taxon != e.taxon;
  CHECK(wrong == expected_wrong);
  CHECK(r.classification.accuracy == doctest::Approx(1.0 - double(expected_wrong) / 30));

  const auto j = nlohmann::json::parse(pipeline_json(r));
  CHECK(j.contains("groups"));
  CHECK(j.contains("classification"));
  CHECK(j["groups"].size() == r.groups.size());
  CHECK(j["classification"]["confusion_pct"].size() == r.classification.classes.size());

  MassModels none;
  nn::TrainedModel regressor;
  CHECK(error_code([&] { run_pipeline(d, regressor, none); }) == ErrorCode::ModelMissing);
}

TEST_CASE("labeled reports") {
  const Dataset d = synthetic(30, 5);
  const auto cv = run_crossval(d, area_speed(), 3, 5, 100);
  const LabeledReport lr{"lin_as", "synthetic", cv.pooled_report};
  const auto back = labeled_report_from_json(labeled_report_json(lr));
  CHECK(back.method == "lin_as");
  CHECK(back.dataset == "synthetic");
  for (Metric m : kAllMetrics) {
    CHECK(back.report.get(m) == doctest::Approx(lr.report.get(m)).epsilon(1e-12));
    CHECK(back.report.intervals.at(m).low == doctest::Approx(lr.report.intervals.at(m).low).epsilon(1e-12));
  }
  const auto j = nlohmann::json::parse(labeled_report_json(lr));
  CHECK(j["metrics"][to_string(Metric::MAE)]["value"].get<double>() ==
        doctest::Approx(lr.report.mae / 1000).epsilon(1e-12));
  CHECK(error_code([] { labeled_report_from_json("{}"); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("report rows") {
  CHECK(error_code([] { report_rows({}); }) == ErrorCode::NoResults);
  MetricReport a;
  a.mape = 0.1;
  a.mdape = 0.05;
  a.mae = 2000;
  a.rmse = 3000;
  a.r2_log = 0.9;
  a.n = 10;
  MetricReport b = a;
  b.intervals[Metric::MAPE] = {0.08, 0.12, 0.01};
  const auto rows = report_rows({{"m2", "ds", a}, {"m1", "ds", b}, {"m0", "alpha", a}});
  REQUIRE(rows.size() == 15);
  CHECK(rows[0].dataset == "alpha");
  CHECK(rows[5].method == "m1");
  CHECK(rows[10].method == "m2");
  std::set<std::tuple<std::string, std::string, std::string>> keys;
  for (const auto& r : rows) keys.insert({r.dataset, r.method, r.metric});
  CHECK(keys.size() == rows.size());
  for (std::size_t i = 0; i < kAllMetrics.size(); ++i) CHECK(rows[i].metric == to_string(kAllMetrics[i]));
  CHECK(rows[0].value == 3.0);  // RMSE in mg
  CHECK(rows[1].value == 2.0);

  const std::string csv = report_rows_csv(rows);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "dataset,method,metric,value,std,ci_low,ci_high");
  std::getline(in, line);
  CHECK(line.ends_with(",,,"));
  CHECK(csv.find("0.08") != std::string::npos);

  const auto j = nlohmann::json::parse(report_rows_json(rows));
  CHECK(j.size() == 15);
  CHECK(j[0]["ci_low"].is_null());
}

TEST_CASE("command-line exit codes") {
  const fs::path tmp = fs::temp_directory_path() / ("biomass_cli_" + std::to_string(::getpid()));
  fs::create_directories(tmp);
  const std::string out = "--out " + tmp.string();
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("no-such-command") == 2);
  CHECK(run_cli(out + " synth --per-group 5") == 2);  // seed is required
  CHECK(run_cli(out + " crossval --data " + (tmp / "missing.json").string()) == 2);
  REQUIRE(run_cli("--seed 1 " + out + " synth --per-group 5") == 0);
  CHECK(fs::exists(tmp / "manifest.json"));
  CHECK(fs::exists(tmp / "ground_truth.json"));
  const fs::path cv = tmp / "cv";
  CHECK(run_cli("--seed 1 --out " + cv.string() + " crossval --data " + (tmp / "manifest.json").string() +
                " --folds 3 --draws 0") == 0);
  CHECK(fs::exists(cv / "report.json"));
  CHECK(fs::exists(cv / "predictions.csv"));
  CHECK(run_cli(out + " report") == 2);
  fs::remove_all(tmp);
}

TEST_CASE("pipeline correlation scale") {
  Dataset d;
  for (int i = 0; i < 4; ++i) d.specimens.push_back(fixture::specimen("s" + std::to_string(i), "t", 1.0 + i, {10, 20}));
  const std::vector<double> pred = {1, 2, 3, 40};
  auto estimate = [&](const std::string&, const SpecimenRecord& s) { return pred[std::stoul(s.specimen_id.substr(1))]; };
  auto same = [](const SpecimenRecord& s) { return s.taxon; };
  const auto log_r = run_pipeline(d, same, estimate).groups.at(0).r;
  const auto raw_r = run_pipeline(d, same, estimate, false).groups.at(0).r;
  std::vector<double> y = {1, 2, 3, 4}, ly, lp;
  for (std::size_t i = 0; i < 4; ++i) ly.push_back(std::log(y[i])), lp.push_back(std::log(pred[i]));
  CHECK(*log_r == doctest::Approx(pearson_r(ly, lp)).epsilon(1e-12));
  CHECK(*raw_r == doctest::Approx(pearson_r(y, pred)).epsilon(1e-12));
  CHECK(*log_r != doctest::Approx(*raw_r));
}
