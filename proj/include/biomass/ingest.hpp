#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "biomass/data_model.hpp"

namespace biomass {

inline constexpr std::string_view kFrameCsvHeader = "camera_id,frame_index,top,bottom,left,right,area_px";

/// Parses a frame-metadata CSV. Throws MalformedRow (message carries the
/// 1-based line number) or EmptyFile.
std::vector<FrameMeta> parse_frame_csv(std::string_view text);

/// Line number of a MalformedRow error message, or -1.
int malformed_row_line(const std::string& what);

std::string serialize_frame_csv(const std::vector<FrameMeta>& frames);

/// Decodes a binary PGM (P5, maxval 255).
Raster load_raster(std::string_view bytes,
                   std::optional<RasterDims> expected = std::nullopt);
std::string encode_pgm(const Raster& r);

/// Symmetric (edge-inclusive) mirror padding on all four sides.
Raster pad_mirror(const Raster& r, int pad);

struct ManifestEntry {
  std::string specimen_id;
  std::string taxon;
  std::optional<double> dry_mass_ug;
  std::filesystem::path metadata_csv;
  std::optional<std::filesystem::path> raster_dir;
};

/// Parses the manifest JSON array; relative paths resolve against `base_dir`.
std::vector<ManifestEntry> parse_manifest(std::string_view json_text,
                                          const std::filesystem::path& base_dir);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path);
std::string serialize_manifest(const std::vector<ManifestEntry>& entries,
                               const std::filesystem::path& base_dir);

struct AssembleOptions {
  std::string dataset_name = "dataset";
  /// Square side every raster is padded to; defaults to the largest raster seen.
  std::optional<int> raster_size;
};

Dataset assemble_dataset(const std::vector<ManifestEntry>& manifest,
                         const AssembleOptions& options = {});

/// Read a manifest and assemble the dataset it describes.
Dataset load_dataset(const std::filesystem::path& manifest_path, const AssembleOptions& options = {});

/// Write manifest.json, frames/<id>.csv and rasters/<id>/<cam>_<idx>.pgm under out_dir.
void write_dataset(const Dataset& d, const std::filesystem::path& out_dir);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace biomass
