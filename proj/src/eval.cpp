#include "biomass/eval.hpp"

#include <algorithm>
#include <numbers>
#include <set>
#include <unordered_set>

#include "biomass/rng.hpp"

namespace biomass {

const char* to_string(Metric m) {
  switch (m) {
    case Metric::RMSE: return "rmse";
    case Metric::MAE: return "mae";
    case Metric::MAPE: return "mape";
    case Metric::MdAPE: return "mdape";
    case Metric::R2Log: return "r2_log";
  }
  return "?";
}

double MetricReport::get(Metric m) const {
  switch (m) {
    case Metric::RMSE: return rmse;
    case Metric::MAE: return mae;
    case Metric::MAPE: return mape;
    case Metric::MdAPE: return mdape;
    case Metric::R2Log: return r2_log;
  }
  return 0.0;
}

std::pair<Eigen::ArrayXd, Eigen::ArrayXd> mass_arrays(const PredictionSet& p) {
  if (p.empty()) throw Error(ErrorCode::EmptyPredictions, "no prediction entries");
  Eigen::ArrayXd y(static_cast<Eigen::Index>(p.size())), yhat(static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& e = p.entries[i];
    if (!(e.true_mass_ug > 0.0) || !(e.predicted_mass_ug > 0.0))
      throw Error(ErrorCode::NonPositiveMass, "specimen '" + e.specimen_id + "'");
    y(static_cast<Eigen::Index>(i)) = e.true_mass_ug;
    yhat(static_cast<Eigen::Index>(i)) = e.predicted_mass_ug;
  }
  return {std::move(y), std::move(yhat)};
}

MetricReport compute_metrics(const PredictionSet& p) {
  const auto [y, yhat] = mass_arrays(p);
  MetricReport r;
  r.n = p.size();
  r.mape = metric_value(Metric::MAPE, y, yhat);
  r.mdape = metric_value(Metric::MdAPE, y, yhat);
  r.mae = metric_value(Metric::MAE, y, yhat);
  r.rmse = metric_value(Metric::RMSE, y, yhat);
  r.r2_log = metric_value(Metric::R2Log, y, yhat);
  return r;
}

double pearson_r(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::ShapeMismatch, "pearson_r on unequal lengths");
  if (a.size() < 2) throw Error(ErrorCode::TooFewEntries, "pearson_r needs at least 2 pairs");
  const Eigen::Map<const Eigen::ArrayXd> x(a.data(), static_cast<Eigen::Index>(a.size()));
  const Eigen::Map<const Eigen::ArrayXd> y(b.data(), static_cast<Eigen::Index>(b.size()));
  const Eigen::ArrayXd dx = x - x.mean();
  const Eigen::ArrayXd dy = y - y.mean();
  const double sxx = dx.square().sum();
  const double syy = dy.square().sum();
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ZeroVariance, "pearson_r input has zero variance");
  return std::clamp((dx * dy).sum() / std::sqrt(sxx * syy), -1.0, 1.0);
}

double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // theta-function form of the same distribution; converges fast for small lambda
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0.0;
    for (int j = 1; j <= 100; ++j) {
      const double odd = 2.0 * j - 1.0;
      const double term = std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
      cdf += term;
      if (term < 1e-18) break;
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double q = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    q += (j % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyInput, "ks_two_sample needs non-empty samples");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());

  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double t = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == t) ++i;
    while (j < sb.size() && sb[j] == t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }

  const double ne = na * nb / (na + nb);
  const double root = std::sqrt(ne);
  return {d, kolmogorov_q((root + 0.12 + 0.11 / root) * d)};
}

namespace {

double percentile(const std::vector<double>& sorted, double q) {
  // linear interpolation between order statistics
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Interval summarize(std::vector<double> stats, double level) {
  const double n = static_cast<double>(stats.size());
  double mean = 0.0;
  for (double s : stats) mean += s;
  mean /= n;
  double var = 0.0;
  for (double s : stats) var += (s - mean) * (s - mean);
  std::sort(stats.begin(), stats.end());
  const double alpha = 1.0 - level;
  return {percentile(stats, alpha / 2.0), percentile(stats, 1.0 - alpha / 2.0),
          stats.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0};
}

template <typename Fn>
void for_each_resample(const Eigen::ArrayXd& y, const Eigen::ArrayXd& yhat, int draws, std::uint64_t seed, Fn&& fn) {
  const Eigen::Index n = y.size();
  Eigen::ArrayXd ry(n), ryhat(n);
  for (int b = 0; b < draws; ++b) {
    Rng rng = make_rng(seed, "bootstrap", static_cast<std::uint64_t>(b));
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
      ry(i) = y(k);
      ryhat(i) = yhat(k);
    }
    fn(ry, ryhat);
  }
}

void check_bootstrap_args(const PredictionSet& p, int draws, double level) {
  if (p.size() < 2) throw Error(ErrorCode::TooFewEntries, "bootstrap needs at least 2 entries");
  if (draws < 2) throw Error(ErrorCode::InvalidConfig, "bootstrap needs at least 2 draws");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::InvalidConfig, "level must lie in (0, 1)");
}

}  // namespace

Interval bootstrap(const MetricFn& metric_fn, const PredictionSet& p, int draws, double level, std::uint64_t seed) {
  check_bootstrap_args(p, draws, level);
  const auto [y, yhat] = mass_arrays(p);
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(draws));
  for_each_resample(y, yhat, draws, seed,
                    [&](const Eigen::ArrayXd& ry, const Eigen::ArrayXd& ryhat) { stats.push_back(metric_fn(ry, ryhat)); });
  return summarize(std::move(stats), level);
}

MetricReport bootstrap_report(const PredictionSet& p, int draws, double level, std::uint64_t seed) {
  check_bootstrap_args(p, draws, level);
  MetricReport report = compute_metrics(p);
  const auto [y, yhat] = mass_arrays(p);
  std::map<Metric, std::vector<double>> stats;
  for_each_resample(y, yhat, draws, seed, [&](const Eigen::ArrayXd& ry, const Eigen::ArrayXd& ryhat) {
    for (Metric m : kAllMetrics) stats[m].push_back(metric_value(m, ry, ryhat));
  });
  for (auto& [m, s] : stats) report.intervals[m] = summarize(std::move(s), level);
  return report;
}

SplitPlan make_cv_splits(const Dataset& d, int k, double val_fraction, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::InvalidConfig, "k must be at least 2");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0))
    throw Error(ErrorCode::InvalidConfig, "val fraction must lie in [0, 1)");

  std::map<std::string, std::vector<std::string>> by_taxon;
  for (const auto& s : d.specimens) by_taxon[s.taxon].push_back(s.specimen_id);
  for (const auto& [taxon, ids] : by_taxon)
    if (static_cast<int>(ids.size()) < k)
      throw Error(ErrorCode::TaxonTooSmall,
                  "taxon '" + taxon + "' has " + std::to_string(ids.size()) + " specimens, k = " + std::to_string(k));

  Rng rng = make_rng(seed, "split");
  std::vector<std::string> order;  // taxa in lexicographic order, shuffled within each
  std::map<std::string, std::string> taxon_of;
  for (auto& [taxon, ids] : by_taxon) {
    shuffle(ids, rng);
    for (const auto& id : ids) {
      order.push_back(id);
      taxon_of[id] = taxon;
    }
  }

  SplitPlan plan;
  for (std::size_t i = 0; i < order.size(); ++i) plan.fold_assignments[order[i]] = static_cast<int>(i % k);

  // Val count per fold sits at the midpoint of the two integer windows that
  // keep val and train each within one specimen of their global targets.
  const double n_total = static_cast<double>(order.size());
  const double test_frac = 1.0 / k;
  const double val_target = (1.0 - test_frac) * val_fraction * n_total;
  const double train_target = (1.0 - test_frac) * (1.0 - val_fraction) * n_total;

  plan.folds.resize(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) {
    std::vector<std::string> rest;
    std::map<std::string, std::vector<std::string>> rest_by_taxon;
    for (const auto& id : order) {
      if (plan.fold_assignments[id] == f) continue;
      rest.push_back(id);
      rest_by_taxon[taxon_of[id]].push_back(id);
    }
    const double m = static_cast<double>(rest.size());
    const auto v_total = static_cast<std::size_t>(
        std::clamp(std::lround((val_target + m - train_target) / 2.0), 0L, static_cast<long>(rest.size())));

    // largest-remainder apportionment of the val count across taxa
    std::vector<std::pair<std::string, double>> remainders;
    std::map<std::string, std::size_t> quota;
    std::size_t assigned = 0;
    for (const auto& [taxon, ids] : rest_by_taxon) {
      const double exact = static_cast<double>(v_total) * static_cast<double>(ids.size()) / m;
      quota[taxon] = static_cast<std::size_t>(std::floor(exact));
      assigned += quota[taxon];
      remainders.emplace_back(taxon, exact - std::floor(exact));
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = 0; assigned < v_total && i < remainders.size(); ++i, ++assigned)
      ++quota[remainders[i].first];

    std::set<std::string> val_ids;
    for (const auto& [taxon, ids] : rest_by_taxon)
      for (std::size_t i = 0; i < quota[taxon]; ++i) val_ids.insert(ids[i]);

    auto& roles = plan.folds[static_cast<std::size_t>(f)];
    for (const auto& s : d.specimens) {
      const auto& id = s.specimen_id;
      if (plan.fold_assignments[id] == f)
        roles.test.push_back(id);
      else if (val_ids.count(id))
        roles.val.push_back(id);
      else
        roles.train.push_back(id);
    }
  }
  return plan;
}

PredictionSet pool_folds(const std::vector<PredictionSet>& per_fold) {
  PredictionSet out;
  std::unordered_set<std::string> seen;
  for (const auto& fold : per_fold)
    for (const auto& e : fold.entries) {
      if (!seen.insert(e.specimen_id).second)
        throw Error(ErrorCode::DuplicateSpecimenAcrossFolds, "specimen '" + e.specimen_id + "'");
      out.entries.push_back(e);
    }
  return out;
}

ClassificationReport classification_report(const std::vector<std::string>& true_taxa,
                                           const std::vector<std::string>& predicted_taxa,
                                           std::vector<std::string> classes) {
  if (true_taxa.size() != predicted_taxa.size())
    throw Error(ErrorCode::ShapeMismatch, "true and predicted label counts differ");
  if (true_taxa.empty()) throw Error(ErrorCode::EmptyInput, "no labels");
  if (classes.empty()) {
    std::set<std::string> s(true_taxa.begin(), true_taxa.end());
    classes.assign(s.begin(), s.end());
  }
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < classes.size(); ++i) index[classes[i]] = static_cast<int>(i);

  const auto c = static_cast<Eigen::Index>(classes.size());
  ClassificationReport r;
  r.classes = classes;
  r.confusion_counts = Eigen::MatrixXi::Zero(c, c);
  for (std::size_t i = 0; i < true_taxa.size(); ++i) {
    auto t = index.find(true_taxa[i]);
    auto p = index.find(predicted_taxa[i]);
    if (t == index.end()) throw Error(ErrorCode::LabelMismatch, "true label '" + true_taxa[i] + "'");
    if (p == index.end()) throw Error(ErrorCode::LabelMismatch, "predicted label '" + predicted_taxa[i] + "'");
    ++r.confusion_counts(t->second, p->second);
  }

  const Eigen::MatrixXd counts = r.confusion_counts.cast<double>();
  r.confusion_pct = Eigen::MatrixXd::Zero(c, c);
  for (Eigen::Index i = 0; i < c; ++i) {
    const double row = counts.row(i).sum();
    if (row > 0) r.confusion_pct.row(i) = counts.row(i) * (100.0 / row);
  }
  for (Eigen::Index i = 0; i < c; ++i) {
    const double tp = counts(i, i);
    const double predicted = counts.col(i).sum();
    const double actual = counts.row(i).sum();
    ClassMetrics m;
    m.support = static_cast<std::size_t>(actual);
    m.precision = predicted > 0 ? tp / predicted : 0.0;
    m.recall = actual > 0 ? tp / actual : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    r.per_class.push_back(m);
  }
  r.accuracy = counts.trace() / counts.sum();
  return r;
}

}  // namespace biomass
