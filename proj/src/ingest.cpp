#include "biomass/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "biomass/error.hpp"

namespace biomass {
namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if constexpr (std::is_floating_point_v<T>) {
    if (*first == '+') ++first;
  }
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

[[noreturn]] void malformed(int line_no, const std::string& why) {
  throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": " + why);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<FrameMeta> parse_frame_csv(std::string_view text) {
  std::vector<std::string_view> lines = split(text, '\n');
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorCode::EmptyFile, "no header row");
  if (lines.front() != kFrameCsvHeader) malformed(1, "unexpected header");

  std::vector<FrameMeta> frames;
  frames.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i) + 1;
    const auto fields = split(lines[i], ',');
    if (fields.size() != 7) malformed(line_no, "expected 7 fields, got " + std::to_string(fields.size()));
    FrameMeta f;
    if (fields[0] == "A") {
      f.camera_id = Camera::A;
    } else if (fields[0] == "B") {
      f.camera_id = Camera::B;
    } else {
      malformed(line_no, "camera_id must be A or B");
    }
    if (!parse_number(fields[1], f.frame_index) || !parse_number(fields[2], f.top) ||
        !parse_number(fields[3], f.bottom) || !parse_number(fields[4], f.left) ||
        !parse_number(fields[5], f.right) || !parse_number(fields[6], f.area_px))
      malformed(line_no, "non-numeric field");
    frames.push_back(f);
  }
  if (frames.empty()) throw Error(ErrorCode::EmptyFile, "header only, no data rows");
  return frames;
}

int malformed_row_line(const std::string& what) {
  const auto pos = what.find("line ");
  if (pos == std::string::npos) return -1;
  int line = -1;
  const char* first = what.data() + pos + 5;
  std::from_chars(first, what.data() + what.size(), line);
  return line;
}

std::string serialize_frame_csv(const std::vector<FrameMeta>& frames) {
  std::string out(kFrameCsvHeader);
  out += '\n';
  for (const auto& f : frames) {
    out += to_char(f.camera_id);
    for (auto v : {f.frame_index, f.top, f.bottom, f.left, f.right}) {
      out += ',';
      out += std::to_string(v);
    }
    out += ',';
    out += format_double(f.area_px);
    out += '\n';
  }
  return out;
}

Raster load_raster(std::string_view bytes, std::optional<RasterDims> expected) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw Error(ErrorCode::UnsupportedFormat, "not a PNM file");
  if (bytes[1] != '5')
    throw Error(ErrorCode::UnsupportedFormat, std::string("PNM variant P") + bytes[1] + " (only binary P5)");

  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    long value = -1;
    if (!parse_number(bytes.substr(start, pos - start), value))
      throw Error(ErrorCode::UnsupportedFormat, "malformed PGM header");
    return value;
  };

  const long width = next_token();
  const long height = next_token();
  const long maxval = next_token();
  if (width <= 0 || height <= 0) throw Error(ErrorCode::UnsupportedFormat, "non-positive dimensions");
  if (maxval != 255) throw Error(ErrorCode::UnsupportedFormat, "maxval " + std::to_string(maxval) + " (only 255)");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw Error(ErrorCode::UnsupportedFormat, "missing separator before raster data");
  ++pos;

  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - pos < n) throw Error(ErrorCode::UnsupportedFormat, "truncated raster data");

  Raster r;
  r.height = static_cast<int>(height);
  r.width = static_cast<int>(width);
  r.pixels.assign(reinterpret_cast<const std::uint8_t*>(bytes.data() + pos),
                  reinterpret_cast<const std::uint8_t*>(bytes.data() + pos + n));
  if (expected && (expected->height != r.height || expected->width != r.width))
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(r.height) + "x" + std::to_string(r.width) + " vs expected " +
                    std::to_string(expected->height) + "x" + std::to_string(expected->width));
  return r;
}

std::string encode_pgm(const Raster& r) {
  std::string out = "P5\n" + std::to_string(r.width) + " " + std::to_string(r.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(r.pixels.data()), r.pixels.size());
  return out;
}

Raster pad_mirror(const Raster& r, int pad) {
  if (pad < 0) throw Error(ErrorCode::PadTooLarge, "negative pad");
  if (pad == 0) return r;
  if (pad >= std::min(r.height, r.width))
    throw Error(ErrorCode::PadTooLarge, "pad " + std::to_string(pad) + " >= min(height, width)");

  // -1 -> 0, -2 -> 1, n -> n-1, n+1 -> n-2
  auto reflect = [](int i, int n) { return i < 0 ? -i - 1 : (i >= n ? 2 * n - i - 1 : i); };

  Raster out;
  out.height = r.height + 2 * pad;
  out.width = r.width + 2 * pad;
  out.pixels.resize(static_cast<std::size_t>(out.height) * out.width);
  for (int row = 0; row < out.height; ++row) {
    const int src_row = reflect(row - pad, r.height);
    for (int col = 0; col < out.width; ++col)
      out.at(row, col) = r.at(src_row, reflect(col - pad, r.width));
  }
  return out;
}

std::vector<ManifestEntry> parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidManifest, e.what());
  }
  if (!j.is_array()) throw Error(ErrorCode::InvalidManifest, "manifest must be a JSON array");

  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };

  std::vector<ManifestEntry> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& o = j[i];
    try {
      ManifestEntry e;
      e.specimen_id = o.at("specimen_id").get<std::string>();
      e.taxon = o.at("taxon").get<std::string>();
      if (o.contains("dry_mass_ug") && !o["dry_mass_ug"].is_null()) e.dry_mass_ug = o["dry_mass_ug"].get<double>();
      e.metadata_csv = resolve(o.at("metadata_csv").get<std::string>());
      if (o.contains("raster_dir") && !o["raster_dir"].is_null())
        e.raster_dir = resolve(o["raster_dir"].get<std::string>());
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::InvalidManifest, "entry " + std::to_string(i) + ": " + ex.what());
    }
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path) {
  return parse_manifest(read_file(manifest_path), manifest_path.parent_path());
}

std::string serialize_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& base_dir) {
  auto rel = [&](const std::filesystem::path& p) { return p.lexically_relative(base_dir).generic_string(); };
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json o;
    o["specimen_id"] = e.specimen_id;
    o["taxon"] = e.taxon;
    o["dry_mass_ug"] = e.dry_mass_ug ? nlohmann::json(*e.dry_mass_ug) : nlohmann::json(nullptr);
    o["metadata_csv"] = rel(e.metadata_csv);
    o["raster_dir"] = e.raster_dir ? nlohmann::json(rel(*e.raster_dir)) : nlohmann::json(nullptr);
    j.push_back(std::move(o));
  }
  return j.dump(1) + "\n";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

Dataset assemble_dataset(const std::vector<ManifestEntry>& manifest, const AssembleOptions& options) {
  Dataset d;
  d.name = options.dataset_name;

  auto with_context = [](const std::string& id, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      throw Error(e.code(), "specimen '" + id + "': " + e.what());
    }
  };

  int largest = 0;
  for (const auto& entry : manifest) {
    SpecimenRecord s;
    s.specimen_id = entry.specimen_id;
    s.taxon = entry.taxon;
    s.dry_mass_ug = entry.dry_mass_ug;
    s.frames = with_context(entry.specimen_id, [&] { return parse_frame_csv(read_file(entry.metadata_csv)); });
    if (entry.raster_dir) {
      for (const auto& f : s.frames) {
        const auto path = *entry.raster_dir /
                          (std::string(1, to_char(f.camera_id)) + "_" + std::to_string(f.frame_index) + ".pgm");
        Raster r = with_context(entry.specimen_id, [&] { return load_raster(read_file(path)); });
        if (r.height != r.width)
          throw Error(ErrorCode::NonSquareRaster, "specimen '" + entry.specimen_id + "': " + path.string());
        largest = std::max(largest, r.height);
        s.raster_refs.push_back(path.string());
        s.rasters.push_back(std::move(r));
      }
    }
    d.specimens.push_back(std::move(s));
  }

  const int target = options.raster_size.value_or(largest);
  if (target > 0 && largest > 0) {
    d.raster_dims = RasterDims{target, target};
    for (auto& s : d.specimens) {
      for (auto& r : s.rasters) {
        if (r.height > target)
          throw Error(ErrorCode::RasterLargerThanTarget, "specimen '" + s.specimen_id + "': " +
                                                             std::to_string(r.height) + " > " + std::to_string(target));
        if ((target - r.height) % 2 != 0)
          throw Error(ErrorCode::DimensionMismatch,
                      "specimen '" + s.specimen_id + "': odd padding needed to reach " + std::to_string(target));
        r = pad_mirror(r, (target - r.height) / 2);
      }
    }
  }

  require_valid(d);
  return d;
}

Dataset load_dataset(const std::filesystem::path& manifest_path, const AssembleOptions& options) {
  return assemble_dataset(read_manifest(manifest_path), options);
}

void write_dataset(const Dataset& d, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<ManifestEntry> manifest;
  for (const auto& s : d.specimens) {
    ManifestEntry e;
    e.specimen_id = s.specimen_id;
    e.taxon = s.taxon;
    e.dry_mass_ug = s.dry_mass_ug;
    e.metadata_csv = out_dir / "frames" / (s.specimen_id + ".csv");
    write_file(e.metadata_csv, serialize_frame_csv(s.frames));
    if (!s.rasters.empty()) {
      e.raster_dir = out_dir / "rasters" / s.specimen_id;
      for (std::size_t i = 0; i < s.frames.size(); ++i) {
        const auto& f = s.frames[i];
        write_file(*e.raster_dir / (std::string(1, to_char(f.camera_id)) + "_" + std::to_string(f.frame_index) + ".pgm"),
                   encode_pgm(s.rasters[i]));
      }
    }
    manifest.push_back(std::move(e));
  }
  write_file(out_dir / "manifest.json", serialize_manifest(manifest, out_dir));
}

}  // namespace biomass
