#include "biomass/linear.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace biomass {

FeatureSpec parse_feature_spec(std::string_view s) {
  if (s == "area" || s == "AreaOnly") return FeatureSpec::AreaOnly;
  if (s == "area_speed" || s == "AreaPlusSpeed") return FeatureSpec::AreaPlusSpeed;
  throw Error(ErrorCode::InvalidConfig, "unknown feature spec '" + std::string(s) + "'");
}

TargetSpace parse_target_space(std::string_view s) {
  if (s == "raw" || s == "Raw") return TargetSpace::Raw;
  if (s == "log" || s == "Log") return TargetSpace::Log;
  throw Error(ErrorCode::InvalidConfig, "unknown target space '" + std::string(s) + "'");
}

const char* to_string(FeatureSpec s) { return s == FeatureSpec::AreaOnly ? "area" : "area_speed"; }
const char* to_string(TargetSpace s) { return s == TargetSpace::Raw ? "raw" : "log"; }

LinearModel fit_linear(const Dataset& d, FeatureSpec spec, TargetSpace space, FitRows rows) {
  const bool with_speed = spec == FeatureSpec::AreaPlusSpeed;
  std::vector<double> xs, ys;
  std::size_t n = 0;
  for (const auto& s : d.specimens) {
    if (!s.dry_mass_ug) throw Error(ErrorCode::NonPositiveMass, "specimen '" + s.specimen_id + "' has no dry mass");
    const auto f = compute_features(s);
    if (with_speed && !f.sinking_speed)
      throw Error(ErrorCode::MissingSpeed, "specimen '" + s.specimen_id + "'");
    const double target = space == TargetSpace::Log ? log_mass(*s.dry_mass_ug) : *s.dry_mass_ug;
    auto push = [&](double area) {
      xs.push_back(area);
      if (with_speed) xs.push_back(*f.sinking_speed);
      ys.push_back(target);
      ++n;
    };
    if (rows == FitRows::SpecimenMean) {
      push(f.mean_area_px);
    } else {
      for (const auto& frame : s.frames) push(frame.area_px);
    }
  }
  const Eigen::Index p = with_speed ? 2 : 1;
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(
      xs.data(), static_cast<Eigen::Index>(n), p);
  const Eigen::Map<const Eigen::VectorXd> y(ys.data(), static_cast<Eigen::Index>(n));
  const auto fit = fit_ols(X, y);

  LinearModel m;
  m.feature_spec = spec;
  m.target_space = space;
  m.intercept = fit.intercept;
  m.coefficients = fit.coefficients;
  return m;
}

std::vector<double> predict_per_image(const LinearModel& m, const SpecimenRecord& specimen,
                                      const SpecimenFeatures& f) {
  if (static_cast<std::size_t>(m.coefficients.size()) != m.feature_count())
    throw Error(ErrorCode::ShapeMismatch, "coefficient count does not match feature spec");
  const bool with_speed = m.feature_spec == FeatureSpec::AreaPlusSpeed;
  if (with_speed && !f.sinking_speed) throw Error(ErrorCode::MissingSpeed, "specimen '" + specimen.specimen_id + "'");

  std::vector<double> out;
  out.reserve(specimen.frames.size());
  for (const auto& frame : specimen.frames) {
    double v = m.intercept + m.coefficients(0) * frame.area_px;
    if (with_speed) v += m.coefficients(1) * *f.sinking_speed;
    if (m.target_space == TargetSpace::Log) v = std::exp(v);
    out.push_back(std::max(v, kMassFloorUg));
  }
  return out;
}

double trimmed_median(std::span<const double> values, double trim_fraction) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "trimmed_median of empty list");
  if (!(trim_fraction >= 0.0 && trim_fraction < 0.5))
    throw Error(ErrorCode::InvalidConfig, "trim_fraction must lie in [0, 0.5)");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  // the epsilon guards products like 0.05 * 60 landing just below an integer
  const auto k = static_cast<std::size_t>(std::floor(trim_fraction * static_cast<double>(v.size()) + 1e-9));
  const std::size_t m = v.size() - 2 * k;
  const std::size_t mid = k + m / 2;
  return m % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

double predict_specimen(const LinearModel& m, const SpecimenRecord& specimen, const SpecimenFeatures& f,
                        double trim_fraction) {
  const auto per_image = predict_per_image(m, specimen, f);
  return trimmed_median(per_image, trim_fraction);
}

PredictionSet predict_dataset(const LinearModel& m, const Dataset& d, double trim_fraction) {
  PredictionSet out;
  for (const auto& s : d.specimens) {
    if (!s.dry_mass_ug) throw Error(ErrorCode::NonPositiveMass, "specimen '" + s.specimen_id + "' has no dry mass");
    out.entries.push_back({s.specimen_id, s.taxon, *s.dry_mass_ug,
                           predict_specimen(m, s, compute_features(s), trim_fraction), std::nullopt});
  }
  return out;
}

std::string to_json(const LinearModel& m) {
  nlohmann::json j;
  j["kind"] = "linear";
  j["feature_spec"] = to_string(m.feature_spec);
  j["intercept"] = m.intercept;
  j["coefficients"] = std::vector<double>(m.coefficients.data(), m.coefficients.data() + m.coefficients.size());
  j["target_space"] = to_string(m.target_space);
  return j.dump(1) + "\n";
}

LinearModel linear_model_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    LinearModel m;
    m.feature_spec = parse_feature_spec(j.at("feature_spec").get<std::string>());
    m.target_space = parse_target_space(j.at("target_space").get<std::string>());
    m.intercept = j.at("intercept").get<double>();
    const auto c = j.at("coefficients").get<std::vector<double>>();
    m.coefficients = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    if (c.size() != m.feature_count()) throw Error(ErrorCode::ShapeMismatch, "coefficient count");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("linear model JSON: ") + e.what());
  }
}

}  // namespace biomass
