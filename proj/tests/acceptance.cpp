// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "biomass/eval.hpp"
#include "biomass/experiments.hpp"
#include "biomass/features.hpp"
#include "biomass/ingest.hpp"
#include "biomass/linear.hpp"
#include "biomass/nn/trainer.hpp"
#include "biomass/rng.hpp"
#include "biomass/synth.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace biomass;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

PredictionSet predictions(const std::vector<double>& y, const std::vector<double>& yhat) {
  PredictionSet p;
  for (std::size_t i = 0; i < y.size(); ++i) p.entries.push_back({"s" + std::to_string(i), "t", y[i], yhat[i], {}});
  return p;
}

Outcome metric_oracle() {
  const auto r = compute_metrics(predictions({1, 2, 4}, {2, 2, 2}));
  bool ok = std::abs(r.mae - 1.0) < 1e-12 && std::abs(r.mape - 0.5) < 1e-12 && std::abs(r.mdape - 0.5) < 1e-12 &&
            std::abs(r.rmse - std::sqrt(5.0 / 3.0)) < 1e-12;
  const auto same = compute_metrics(predictions({1, 2, 4}, {1, 2, 4}));
  ok = ok && same.mae == 0 && same.mape == 0 && same.mdape == 0 && same.rmse == 0 && std::abs(same.r2_log - 1) < 1e-12;
  const std::vector<double> y = {1, 2, 4, 7};
  double mean_log = 0;
  for (double v : y) mean_log += std::log(v) / 4;
  const auto flat = compute_metrics(predictions(y, std::vector<double>(4, std::exp(mean_log))));
  ok = ok && std::abs(flat.r2_log) < 1e-12;
  return {ok, "MAE=" + fmt(r.mae) + " MAPE=" + fmt(r.mape) + " MdAPE=" + fmt(r.mdape) + " RMSE=" + fmt(r.rmse) +
                  " r2_log(const)=" + fmt(flat.r2_log)};
}

Outcome ols_oracle() {
  Rng rng = make_rng(11, "ols");
  double worst_coef = 0, worst_orth = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const int p = 1 + inst % 2;
    Eigen::MatrixXd X(50, p);
    Eigen::VectorXd y(50);
    for (int i = 0; i < 50; ++i) {
      for (int j = 0; j < p; ++j) X(i, j) = uniform(rng, -5, 50);
      y(i) = 3 - 2 * X(i, 0) + (p == 2 ? 0.5 * X(i, 1) : 0) + 4 * standard_normal(rng);
    }
    const auto fit = fit_ols(X, y);
    const auto ref = oracle::normal_equations(X, y);
    std::vector<double> got = {fit.intercept};
    for (int j = 0; j < p; ++j) got.push_back(fit.coefficients(j));
    for (std::size_t j = 0; j < got.size(); ++j)
      worst_coef = std::max(worst_coef, std::abs(got[j] - ref[j]) / std::max(std::abs(ref[j]), 1e-300));
    const Eigen::VectorXd resid = y - (X * fit.coefficients).array().matrix() - Eigen::VectorXd::Constant(50, fit.intercept);
    worst_orth = std::max(worst_orth, std::abs(resid.sum()) / (resid.norm() * std::sqrt(50.0)));
    for (int j = 0; j < p; ++j)
      worst_orth = std::max(worst_orth, std::abs(resid.dot(X.col(j))) / (resid.norm() * X.col(j).norm()));
  }
  return {worst_coef < 1e-8 && worst_orth < 1e-8,
          "max coef rel err " + fmt(worst_coef) + ", max residual cosine " + fmt(worst_orth)};
}

Outcome gradient_check() {
  using namespace nn;
  double worst = 0;
  std::string worst_at;
  int variants = 0;
  for (auto arch : {Architecture::SingleView, Architecture::MultiView, Architecture::MetadataAware})
    for (auto kind : {LossKind::L1, LossKind::L2, LossKind::APE})
      for (auto space : {LossSpace::Linear, LossSpace::Log})
        for (auto head : {HeadKind::OneLayer, HeadKind::TwoLayer}) {
          ModelConfig c;
          c.architecture = arch;
          c.head = head;
          c.head_hidden = 5;
          c.encoder_channels = {2, 3};
          c.input_size = 16;
          c.target_space = space == LossSpace::Log ? TargetSpace::Log : TargetSpace::Raw;
          if (arch == Architecture::MetadataAware)
            c.metadata_inputs = {MetaInput::FrameArea, MetaInput::MeanArea, MetaInput::SinkingSpeed};
          Rng rng = make_rng(5, "gradcheck", static_cast<std::uint64_t>(variants));
          Network net = Network::initialize(c, rng);
          // zero biases put dead-input activations exactly on the ReLU kink;
          // check at a generic point instead
          for (auto& [name, t] : net.params())
            if (name.ends_with("bias"))
              for (auto& b : t.data) b = uniform(rng, -0.1, 0.1);
          std::vector<Input> inputs(4);
          std::vector<Target> targets(4);
          std::vector<double> y(4);
          for (int s = 0; s < 4; ++s) {
            for (int v = 0; v < c.views(); ++v) {
              Eigen::VectorXd img(256);
              for (auto& px : img) px = uniform01(rng);
              inputs[s].views.push_back(img);
            }
            if (c.uses_metadata()) {
              inputs[s].metadata.resize(3);
              for (auto& m : inputs[s].metadata) m = standard_normal(rng);
            }
            y[s] = uniform(rng, 2, 10);
            targets[s].mass = y[s];
          }
          const auto analytic = backward(net, inputs, targets, kind, space);
          const auto numeric = oracle::numeric_gradient(net, inputs, y, kind, space);
          for (const auto& [name, g] : analytic.grads)
            for (Eigen::Index i = 0; i < g.data.size(); ++i) {
              const double a = g.data(i), f = numeric.at(name).data(i);
              const double rel = std::abs(a - f) / (std::abs(a) + 1e-8);
              if (rel > worst) {
                worst = rel;
                worst_at = std::string(to_string(arch)) + "/" + to_string(kind) + "/" + to_string(space) + "/" +
                           to_string(head) + " " + name + "[" + std::to_string(i) + "] analytic " + fmt(a) + " numeric " + fmt(f);
              }
            }
          ++variants;
        }
  return {worst < 1e-4, std::to_string(variants) + " variants, max rel err " + fmt(worst) +
                            (worst_at.empty() ? "" : " at " + worst_at)};
}

double pooled_mdape(const Dataset& d, const Method& m, std::uint64_t seed) {
  return run_crossval(d, m, 5, seed, 0).pooled_report.mdape;
}

Outcome linear_speed_advantage() {
  SynthConfig c = default_synth_config(100, 42);
  c.area_noise_cv = 0.05;
  const auto [d, truth] = generate(c);
  Method area;
  Method speed;
  speed.features = FeatureSpec::AreaPlusSpeed;
  const double a = pooled_mdape(d, area, 42);
  const double as = pooled_mdape(d, speed, 42);
  return {as <= 0.8 * a, "MdAPE area " + fmt(a) + ", area+speed " + fmt(as) + ", ratio " + fmt(as / a)};
}

Outcome metadata_advantage() {
  const auto [d, truth] = generate(fixture::raster_config(200, 3));
  Method image;
  image.kind = MethodKind::Neural;
  image.model.architecture = nn::Architecture::SingleView;
  image.train.epochs = 50;
  Method meta = image;
  meta.model.architecture = nn::Architecture::MetadataAware;
  meta.model.metadata_inputs = {nn::MetaInput::FrameArea, nn::MetaInput::MeanArea, nn::MetaInput::SinkingSpeed};
  const double img = pooled_mdape(d, image, 3);
  const double md = pooled_mdape(d, meta, 3);
  return {md <= 0.8 * img, "MdAPE image-only " + fmt(img) + ", metadata-aware " + fmt(md) + ", ratio " + fmt(md / img)};
}

Outcome trimmed_median_robustness() {
  std::vector<double> areas(30);
  std::iota(areas.begin(), areas.end(), 1.0);
  const LinearModel identity{FeatureSpec::AreaOnly, 0.0, Eigen::VectorXd::Ones(1), TargetSpace::Raw};
  auto s = fixture::specimen("x", "t", 1.0, areas);
  const double before = predict_specimen(identity, s, compute_features(s));
  const double mean_before = std::accumulate(areas.begin(), areas.end(), 0.0) / 30;
  s.frames.back().area_px *= 100;  // the sorted maximum
  s.frames.back().bottom = s.frames.back().top + 100;
  s.frames.back().right = s.frames.back().left + 100;
  const double after = predict_specimen(identity, s, compute_features(s));
  double mean_after = 0;
  for (const auto& f : s.frames) mean_after += f.area_px / 30;
  const double mean_change = (mean_after - mean_before) / mean_before;
  return {after == before && mean_change > 3.0,
          "trimmed median " + fmt(before) + " -> " + fmt(after) + ", mean change " + fmt(100 * mean_change) + "%"};
}

Outcome split_integrity() {
  Rng rng = make_rng(99, "splits");
  int failures = 0;
  std::string first;
  for (int trial = 0; trial < 1000; ++trial) {
    const int taxa = 2 + static_cast<int>(uniform_index(rng, 5));
    const int lo = std::max(20, 5 * taxa);
    const int n = lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(200 - lo + 1)));
    std::vector<int> counts(static_cast<std::size_t>(taxa), 5);
    for (int extra = n - 5 * taxa; extra > 0; --extra) ++counts[uniform_index(rng, static_cast<std::uint64_t>(taxa))];
    const Dataset d = fixture::counted(counts);
    const auto plan = make_cv_splits(d, 5, 0.2, static_cast<std::uint64_t>(trial));

    std::string why;
    std::multiset<std::string> tested;
    for (const auto& f : plan.folds) {
      std::set<std::string> roles;
      for (const auto* part : {&f.train, &f.val, &f.test})
        for (const auto& id : *part)
          if (!roles.insert(id).second) why = "specimen in two roles";
      if (roles.size() != d.specimens.size()) why = "fold does not cover dataset";
      tested.insert(f.test.begin(), f.test.end());
      const double N = n;
      if (std::abs(f.test.size() - 0.20 * N) > 1 || std::abs(f.val.size() - 0.16 * N) > 1 ||
          std::abs(f.train.size() - 0.64 * N) > 1)
        why = "role sizes " + std::to_string(f.train.size()) + "/" + std::to_string(f.val.size()) + "/" +
              std::to_string(f.test.size()) + " for n=" + std::to_string(n);
    }
    if (tested.size() != d.specimens.size() || std::set<std::string>(tested.begin(), tested.end()).size() != tested.size())
      why = "test folds do not partition the dataset";
    for (int t = 0; t < taxa; ++t) {
      int mn = 1 << 30, mx = 0;
      for (const auto& f : plan.folds) {
        int c = 0;
        for (const auto& id : f.test) c += d.find(id)->taxon == "t" + std::to_string(t);
        mn = std::min(mn, c);
        mx = std::max(mx, c);
      }
      if (mx - mn > 1) why = "taxon fold counts differ by " + std::to_string(mx - mn);
    }
    if (!why.empty() && failures++ == 0) first = "trial " + std::to_string(trial) + ": " + why;
  }
  return {failures == 0, "1000 datasets, " + std::to_string(failures) + " failing" + (first.empty() ? "" : " (" + first + ")")};
}

Outcome ks_correctness() {
  Rng rng = make_rng(8, "ks");
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(30), b(30);
    for (auto& v : a) v = standard_normal(rng);
    for (auto& v : b) v = 0.3 + standard_normal(rng);
    if (ks_two_sample(a, b).d != oracle::ks_brute_force(a, b)) ++mismatches;
  }
  const std::vector<double> s = {3, 1, 2, 2, 5};
  const auto same = ks_two_sample(s, s);
  const auto disjoint = ks_two_sample(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5});
  const bool ok = mismatches == 0 && same.d == 0 && disjoint.d == 1 && std::abs(same.p - 1.0) < 1e-9;
  return {ok, std::to_string(mismatches) + "/200 mismatches vs brute force; D(same)=" + fmt(same.d) +
                  " p=" + fmt(same.p) + "; D(disjoint)=" + fmt(disjoint.d)};
}

Outcome bootstrap_coverage() {
  // |y - yhat| is half-normal with known mean sigma*sqrt(2/pi)
  const double sigma = 10;
  const double population_mae = sigma * std::sqrt(2.0 / M_PI);
  const MetricFn mae = [](const Eigen::ArrayXd& y, const Eigen::ArrayXd& yh) {
    return metric_value(Metric::MAE, y, yh);
  };
  int covered = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Rng rng = make_rng(17, "coverage", static_cast<std::uint64_t>(trial));
    std::vector<double> y(500, 100.0), yhat(500);
    for (auto& v : yhat) v = 100.0 + sigma * standard_normal(rng);
    const auto ci = bootstrap(mae, predictions(y, yhat), 1000, 0.95, static_cast<std::uint64_t>(trial));
    covered += ci.low <= population_mae && population_mae <= ci.high;
  }
  return {covered >= 180, "coverage " + std::to_string(covered) + "/200"};
}

Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / ("biomass_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::vector<std::string> payloads;
  for (const char* run : {"run1", "run2"}) {
    const fs::path dir = root / run;
    fs::create_directories(dir);
    const std::string cli = std::string("\"") + BIOMASS_CLI + "\"";
    const std::string d = "\"" + dir.string() + "\"";
    const std::vector<std::string> cmds = {
        cli + " --seed 21 --out " + d + "/raw synth --per-group 40",
        cli + " --out " + d + "/data ingest --manifest " + d + "/raw/manifest.json --name synthetic",
        cli + " --seed 21 --out " + d + "/cv_a crossval --data " + d + "/data/manifest.json --features area",
        cli + " --seed 21 --out " + d + "/cv_as crossval --data " + d + "/data/manifest.json --features area_speed",
        cli + " --out " + d + "/report report " + d + "/cv_a/report.json " + d + "/cv_as/report.json",
    };
    for (const auto& cmd : cmds)
      if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
    payloads.push_back(read_file(dir / "report" / "report.csv") + read_file(dir / "report" / "report.json") +
                       read_file(dir / "cv_as" / "predictions.csv"));
  }
  fs::remove_all(root);
  return {payloads[0] == payloads[1] && !payloads[0].empty(),
          "report payload " + std::to_string(payloads[0].size()) + " bytes, identical=" +
              (payloads[0] == payloads[1] ? "yes" : "no")};
}

Outcome freeze_contract() {
  const auto [d, truth] = generate(fixture::raster_config(30, 4, 16));
  const auto [tr, va] = split_train_val(d, 0.2, 4);
  nn::ModelConfig mc;
  mc.architecture = nn::Architecture::MetadataAware;
  mc.metadata_inputs = {nn::MetaInput::MeanArea, nn::MetaInput::SinkingSpeed};
  mc.input_size = 16;
  mc.head_hidden = 8;
  nn::TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 4;
  const auto base = nn::train(subset(d, tr), subset(d, va), mc, tc);

  std::string detail;
  bool ok = true;
  for (auto mode : {nn::Freeze::Encoder, nn::Freeze::EncoderAndMetadata}) {
    nn::TrainConfig ft = tc;
    ft.freeze = mode;
    ft.seed = 5;
    const auto tuned = nn::fine_tune(base, subset(d, tr), subset(d, va), ft);
    int frozen_changed = 0, trainable_changed = 0, frozen = 0;
    for (const auto& [name, t] : base.parameters) {
      const bool same = tuned.parameters.at(name) == t;
      if (nn::Network::is_frozen(name, mode)) {
        ++frozen;
        frozen_changed += !same;
      } else {
        trainable_changed += !same;
      }
    }
    ok = ok && frozen > 0 && frozen_changed == 0 && trainable_changed > 0;
    detail += std::string(nn::to_string(mode)) + ": " + std::to_string(frozen) + " frozen tensors, " +
              std::to_string(frozen_changed) + " changed, " + std::to_string(trainable_changed) + " trainable changed; ";
  }
  return {ok, detail};
}

Outcome classification_and_pipeline() {
  std::vector<std::string> truth, pred;
  auto add = [&](const char* t, const char* p, int count) {
    for (int i = 0; i < count; ++i) {
      truth.push_back(t);
      pred.push_back(p);
    }
  };
  add("pos", "pos", 3);
  add("neg", "pos", 1);
  add("pos", "neg", 1);
  add("neg", "neg", 5);
  const auto rep = classification_report(truth, pred, {"neg", "pos"});
  const auto& m = rep.per_class[1];
  bool ok = std::abs(m.precision - 0.75) < 1e-12 && std::abs(m.recall - 0.75) < 1e-12 && std::abs(m.f1 - 0.75) < 1e-12;

  SynthConfig c = default_synth_config(40, 6);
  const auto [d, gt] = generate(c);
  const LinearModel model = fit_linear(d, FeatureSpec::AreaPlusSpeed);
  int counter = 0;
  const auto groups = d.taxon_set();
  const std::vector<std::string> names(groups.begin(), groups.end());
  const auto report = run_pipeline(
      d,
      [&](const SpecimenRecord& s) {
        // every seventh specimen goes to the next group
        if (counter++ % 7 != 0) return s.taxon;
        const auto it = std::find(names.begin(), names.end(), s.taxon);
        return names[static_cast<std::size_t>(it - names.begin() + 1) % names.size()];
      },
      [&](const std::string&, const SpecimenRecord& s) { return predict_specimen(model, s, compute_features(s)); });
  std::size_t total = 0, misclassified = 0;
  for (const auto& g : report.groups) {
    total += g.n;
    misclassified += g.n_misclassified;
  }
  ok = ok && total == d.specimens.size() && misclassified > 0;
  return {ok, "P=R=F1=" + fmt(m.precision) + "/" + fmt(m.recall) + "/" + fmt(m.f1) + "; pipeline groups hold " +
                  std::to_string(total) + " of " + std::to_string(d.specimens.size()) + " specimens (" +
                  std::to_string(misclassified) + " misclassified)"};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "metric oracle", 1, metric_oracle},
      {2, "OLS matches normal equations", 5, ols_oracle},
      {3, "analytic gradients match finite differences", 120, gradient_check},
      {4, "area+speed linear model beats area-only", 30, linear_speed_advantage},
      {5, "metadata-aware network beats image-only", 900, metadata_advantage},
      {6, "trimmed median ignores a corrupted maximum", 1, trimmed_median_robustness},
      {7, "cross-validation split integrity", 60, split_integrity},
      {8, "KS statistic and p-value", 5, ks_correctness},
      {9, "bootstrap interval coverage", 120, bootstrap_coverage},
      {10, "end-to-end CLI determinism", 120, cli_determinism},
      {11, "fine-tuning freeze contract", 120, freeze_contract},
      {12, "classification report and pipeline counts", 10, classification_and_pipeline},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_s) {
      o.pass = false;
      o.detail += " [over time budget " + fmt(c.budget_s) + " s]";
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << " — " << o.detail << " ("
              << fmt(secs) << " s)" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
