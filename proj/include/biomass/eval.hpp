#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "biomass/data_model.hpp"
#include "biomass/error.hpp"

namespace biomass {

/// Median with the mean-of-central-pair convention for even counts.
template <typename Derived>
typename Derived::Scalar median(const Eigen::DenseBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> v = values.derived().array();
  const Eigen::Index n = v.size();
  if (n == 0) throw Error(ErrorCode::EmptyInput, "median of empty set");
  std::sort(v.data(), v.data() + n);
  return n % 2 == 1 ? v(n / 2) : Scalar(0.5) * (v(n / 2 - 1) + v(n / 2));
}

enum class Metric { RMSE, MAE, MAPE, MdAPE, R2Log };
inline constexpr std::array<Metric, 5> kAllMetrics = {Metric::RMSE, Metric::MAE, Metric::MAPE, Metric::MdAPE,
                                                      Metric::R2Log};
const char* to_string(Metric m);

/// Point value of one metric on true masses `y` and predictions `yhat`.
/// R2Log is the coefficient of determination of ln(yhat) against ln(y); it is
/// NaN when ln(y) has zero variance.
template <typename D1, typename D2>
typename D1::Scalar metric_value(Metric m, const Eigen::ArrayBase<D1>& y, const Eigen::ArrayBase<D2>& yhat) {
  using Scalar = typename D1::Scalar;
  const auto n = static_cast<Scalar>(y.size());
  switch (m) {
    case Metric::MAE:
      return (y - yhat).abs().sum() / n;
    case Metric::RMSE:
      return std::sqrt((y - yhat).square().sum() / n);
    case Metric::MAPE:
      return ((y - yhat) / y).abs().sum() / n;
    case Metric::MdAPE:
      return median(((y - yhat) / y).abs());
    case Metric::R2Log: {
      const Eigen::Array<Scalar, Eigen::Dynamic, 1> ly = y.log();
      const Scalar ss_tot = (ly - ly.mean()).square().sum();
      if (ss_tot == Scalar(0)) return std::numeric_limits<Scalar>::quiet_NaN();
      return Scalar(1) - (ly - yhat.log()).square().sum() / ss_tot;
    }
  }
  return Scalar(0);
}

struct Interval {
  double low = 0.0;
  double high = 0.0;
  double std = 0.0;
};

struct MetricReport {
  double mape = 0.0;
  double mdape = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  double r2_log = 0.0;
  std::size_t n = 0;
  std::map<Metric, Interval> intervals;

  double get(Metric m) const;
};

/// Throws EmptyPredictions or NonPositiveMass.
MetricReport compute_metrics(const PredictionSet& p);

/// Splits a prediction set into (true, predicted) arrays.
std::pair<Eigen::ArrayXd, Eigen::ArrayXd> mass_arrays(const PredictionSet& p);

double pearson_r(std::span<const double> a, std::span<const double> b);

struct KsResult {
  double d = 0.0;
  double p = 1.0;
};

/// Two-sample Kolmogorov-Smirnov statistic with the asymptotic p-value.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Asymptotic Kolmogorov survival function Q(lambda).
double kolmogorov_q(double lambda);

using MetricFn = std::function<double(const Eigen::ArrayXd& y, const Eigen::ArrayXd& yhat)>;

/// Percentile bootstrap over entries. Draw b uses its own seeded substream.
Interval bootstrap(const MetricFn& metric_fn, const PredictionSet& p, int draws = 1000, double level = 0.95,
                   std::uint64_t seed = 0);

/// Point metrics plus a bootstrap interval for every metric, all from the same draws.
MetricReport bootstrap_report(const PredictionSet& p, int draws = 1000, double level = 0.95, std::uint64_t seed = 0);

struct FoldRoles {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

struct SplitPlan {
  std::map<std::string, int> fold_assignments;
  std::vector<FoldRoles> folds;
};

/// Stratified k-fold split on specimen level. Per fold, the non-test
/// specimens are divided into train/val so that the global proportions land
/// within one specimen of (1-1/k)(1-val_fraction) / (1-1/k)val_fraction / 1/k.
SplitPlan make_cv_splits(const Dataset& d, int k = 5, double val_fraction_within_train = 0.2, std::uint64_t seed = 0);

/// Concatenates fold predictions; throws DuplicateSpecimenAcrossFolds.
PredictionSet pool_folds(const std::vector<PredictionSet>& per_fold);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct ClassificationReport {
  std::vector<std::string> classes;
  std::vector<ClassMetrics> per_class;
  /// Row = true class, column = predicted class, in percent of the row total.
  Eigen::MatrixXd confusion_pct;
  Eigen::MatrixXi confusion_counts;
  double accuracy = 0.0;
};

/// Classes default to the sorted set of true labels.
ClassificationReport classification_report(const std::vector<std::string>& true_taxa,
                                           const std::vector<std::string>& predicted_taxa,
                                           std::vector<std::string> classes = {});

}  // namespace biomass
