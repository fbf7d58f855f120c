#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace biomass {

/// Smallest mass any estimator may report, in micrograms.
inline constexpr double kMassFloorUg = 1e-3;

enum class Camera { A, B };

char to_char(Camera c);

/// One saved crop of a sinking specimen. Row coordinates are in the full
/// cuvette frame; only differences between frames carry meaning.
struct FrameMeta {
  Camera camera_id = Camera::A;
  std::int64_t frame_index = 0;
  std::int64_t top = 0;
  std::int64_t bottom = 0;
  std::int64_t left = 0;
  std::int64_t right = 0;
  double area_px = 0.0;

  bool operator==(const FrameMeta&) const = default;
};

/// 8-bit grayscale image, row-major.
struct Raster {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
  std::uint8_t& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }

  bool operator==(const Raster&) const = default;
};

struct SpecimenRecord {
  std::string specimen_id;
  std::string taxon;
  std::optional<double> dry_mass_ug;
  std::vector<FrameMeta> frames;
  /// Either empty or aligned 1:1 with `frames`.
  std::vector<std::string> raster_refs;
  /// Decoded (and padded) rasters; either empty or aligned 1:1 with `frames`.
  std::vector<Raster> rasters;

  std::vector<FrameMeta> frames_for(Camera c) const;
  /// Indices into `frames` belonging to camera `c`, in stored order.
  std::vector<std::size_t> frame_indices_for(Camera c) const;
  bool has_camera(Camera c) const;
};

struct RasterDims {
  int height = 0;
  int width = 0;
  bool operator==(const RasterDims&) const = default;
};

struct Dataset {
  std::string name;
  std::vector<SpecimenRecord> specimens;
  std::optional<RasterDims> raster_dims;

  std::set<std::string> taxon_set() const;
  const SpecimenRecord* find(const std::string& specimen_id) const;
};

struct PredictionEntry {
  std::string specimen_id;
  std::string taxon;
  double true_mass_ug = 0.0;
  double predicted_mass_ug = 0.0;
  std::optional<std::string> predicted_taxon;
};

struct PredictionSet {
  std::vector<PredictionEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

struct Violation {
  std::string specimen_id;
  std::string field;
  std::string message;
};

using ValidationReport = std::vector<Violation>;

/// Lists every structural invariant violation; never throws, never mutates.
ValidationReport validate_dataset(const Dataset& d);

/// Throws InvalidDataset carrying the first violation if the report is non-empty.
void require_valid(const Dataset& d);

/// Subset of `d` restricted to the given ids, in the order given.
Dataset subset(const Dataset& d, const std::vector<std::string>& ids);

}  // namespace biomass
