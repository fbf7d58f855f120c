#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "biomass/data_model.hpp"

namespace biomass {

struct GroupSpec {
  std::string name;
  /// Density relative to the fluid; values above 1 sink.
  double density_lo = 1.5;
  double density_hi = 2.0;
  /// Linear size (square root of silhouette area, px) is lognormal(mu, sigma).
  double size_mu = 2.5;
  double size_sigma = 0.2;
  int count = 1;
};

struct SynthConfig {
  std::vector<GroupSpec> groups;
  double cuvette_height_px = 600.0;
  double dt = 1.0;
  double area_noise_cv = 0.05;
  std::uint64_t seed = 0;
  /// Stokes-regime terminal speed v = speed_coeff * (density - 1) * size^2.
  double speed_coeff = 0.05;
  /// mass = density * mass_coeff * size^3, micrograms.
  double mass_coeff = 0.1;
  int n_max = 200;
  bool two_cameras = true;
  /// Silhouette aspect ratio is uniform in [1, aspect_max].
  double aspect_max = 1.5;
  /// When set, every frame gets a raster_size x raster_size silhouette and
  /// sizes are redrawn until the silhouette fits.
  std::optional<int> raster_size;
};

struct TruthEntry {
  std::string group;
  double density = 0.0;
  double size = 0.0;
  double volume = 0.0;
  double mass = 0.0;
  /// Pixels per frame, positive for sinkers.
  double true_speed = 0.0;
  double aspect = 1.0;
  double orientation = 0.0;
};

using GroundTruth = std::map<std::string, TruthEntry>;

/// Three groups with disjoint density ranges and overlapping sizes.
SynthConfig default_synth_config(int specimens_per_group = 100, std::uint64_t seed = 0);

SynthConfig synth_config_from_json(std::string_view text);
std::string to_json(const SynthConfig& c);

/// Throws InvalidConfig.
std::pair<Dataset, GroundTruth> generate(const SynthConfig& config);

/// One silhouette per frame in `frames`: a dark ellipse of exactly
/// round(area_px) pixels on a light background. Throws SilhouetteTooLarge.
std::vector<Raster> rasterize(const TruthEntry& truth, const std::vector<FrameMeta>& frames, RasterDims dims,
                              std::uint64_t seed);

/// Pixels darker than the threshold.
std::size_t count_dark_pixels(const Raster& r, std::uint8_t threshold = 128);

/// Writes manifest.json, frames/<id>.csv, rasters/<id>/<cam>_<idx>.pgm (when
/// rasters exist) and ground_truth.json.
void write_synth(const Dataset& d, const GroundTruth& truth, const std::filesystem::path& out_dir);

std::string ground_truth_json(const GroundTruth& truth);

}  // namespace biomass
