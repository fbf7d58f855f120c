#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "biomass/data_model.hpp"
#include "biomass/error.hpp"
#include "biomass/features.hpp"

namespace biomass {

enum class FeatureSpec { AreaOnly, AreaPlusSpeed };
enum class TargetSpace { Raw, Log };
enum class FitRows { PerImage, SpecimenMean };

template <typename Scalar>
struct OlsFit {
  Scalar intercept{};
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> coefficients;
};

/// Least-squares fit of y ~ intercept + X * beta.
///
/// Columns are rescaled to unit norm before a column-pivoting QR so that raw
/// pixel areas and speeds of very different magnitudes do not trip the rank
/// test. Throws TooFewRows when rows < p + 2 and RankDeficient when the
/// augmented design [1 X] lacks full column rank.
template <typename DerivedX, typename DerivedY>
OlsFit<typename DerivedX::Scalar> fit_ols(const Eigen::MatrixBase<DerivedX>& X,
                                          const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (y.size() != n) throw Error(ErrorCode::ShapeMismatch, "target length differs from row count");
  if (n < p + 2) throw Error(ErrorCode::TooFewRows, std::to_string(n) + " rows for " + std::to_string(p) + " features");

  Matrix design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = X;

  Vector scale = design.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < scale.size(); ++j)
    if (scale(j) == Scalar(0)) throw Error(ErrorCode::RankDeficient, "all-zero feature column");
  design *= scale.cwiseInverse().asDiagonal();

  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  if (qr.rank() < p + 1) throw Error(ErrorCode::RankDeficient, "design rank " + std::to_string(qr.rank()));
  const Vector beta = qr.solve(y.derived().template cast<Scalar>()).cwiseQuotient(scale);

  OlsFit<Scalar> fit;
  fit.intercept = beta(0);
  fit.coefficients = beta.tail(p);
  return fit;
}

struct LinearModel {
  FeatureSpec feature_spec = FeatureSpec::AreaOnly;
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  TargetSpace target_space = TargetSpace::Raw;

  std::size_t feature_count() const { return feature_spec == FeatureSpec::AreaOnly ? 1 : 2; }
};

/// Fits from a dataset; every specimen must carry a dry mass (and a speed for
/// AreaPlusSpeed). PerImage rows pair each frame's area with the specimen mass.
LinearModel fit_linear(const Dataset& d, FeatureSpec spec, TargetSpace space = TargetSpace::Raw,
                       FitRows rows = FitRows::PerImage);

/// One mass prediction per frame, clamped to kMassFloorUg.
std::vector<double> predict_per_image(const LinearModel& m, const SpecimenRecord& specimen,
                                      const SpecimenFeatures& f);

/// Drops floor(trim_fraction * n) values from each end of the sorted list and
/// returns the median of the rest.
double trimmed_median(std::span<const double> values, double trim_fraction = 0.05);

double predict_specimen(const LinearModel& m, const SpecimenRecord& specimen, const SpecimenFeatures& f,
                        double trim_fraction = 0.05);

PredictionSet predict_dataset(const LinearModel& m, const Dataset& d, double trim_fraction = 0.05);

std::string to_json(const LinearModel& m);
LinearModel linear_model_from_json(std::string_view text);

FeatureSpec parse_feature_spec(std::string_view s);
TargetSpace parse_target_space(std::string_view s);
const char* to_string(FeatureSpec s);
const char* to_string(TargetSpace s);

}  // namespace biomass
