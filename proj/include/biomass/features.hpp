#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biomass/data_model.hpp"

namespace biomass {

struct SpecimenFeatures {
  double mean_area_px = 0.0;
  /// Frame count of the reference camera (A, falling back to B).
  int image_count = 0;
  std::optional<double> sinking_speed;
  double pseudo_mass = 0.0;
  std::optional<Camera> reference_camera;
};

/// (top of first frame - top of last frame) / n, in pixels per frame, for one
/// camera's ordered frames. Throws TooFewFrames when n < 2.
double sinking_speed(std::span<const FrameMeta> frames);

/// Mean area over all given frames. Throws EmptyInput on no frames.
double mean_area(std::span<const FrameMeta> frames);

/// Throws NonPositiveMass for y <= 0.
double log_mass(double y);
inline double exp_mass(double log_y) { return std::exp(log_y); }

SpecimenFeatures compute_features(const SpecimenRecord& specimen);

/// `features` CSV: one row per specimen, empty fields for absent values.
std::string features_csv(const Dataset& d);

}  // namespace biomass
