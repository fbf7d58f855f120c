#include "biomass/data_model.hpp"

#include <map>
#include <unordered_map>
#include <unordered_set>

#include "biomass/error.hpp"

namespace biomass {

char to_char(Camera c) { return c == Camera::A ? 'A' : 'B'; }

std::vector<FrameMeta> SpecimenRecord::frames_for(Camera c) const {
  std::vector<FrameMeta> out;
  for (const auto& f : frames)
    if (f.camera_id == c) out.push_back(f);
  return out;
}

std::vector<std::size_t> SpecimenRecord::frame_indices_for(Camera c) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (frames[i].camera_id == c) out.push_back(i);
  return out;
}

bool SpecimenRecord::has_camera(Camera c) const {
  for (const auto& f : frames)
    if (f.camera_id == c) return true;
  return false;
}

std::set<std::string> Dataset::taxon_set() const {
  std::set<std::string> out;
  for (const auto& s : specimens) out.insert(s.taxon);
  return out;
}

const SpecimenRecord* Dataset::find(const std::string& specimen_id) const {
  for (const auto& s : specimens)
    if (s.specimen_id == specimen_id) return &s;
  return nullptr;
}

ValidationReport validate_dataset(const Dataset& d) {
  ValidationReport report;
  auto add = [&](const std::string& id, std::string field, std::string msg) {
    report.push_back({id, std::move(field), std::move(msg)});
  };

  std::unordered_set<std::string> seen;
  for (const auto& s : d.specimens) {
    const std::string& id = s.specimen_id;
    if (id.empty()) add(id, "specimen_id", "specimen_id must be non-empty");
    if (!seen.insert(id).second) add(id, "specimen_id", "specimen_id must be unique");
    if (s.dry_mass_ug && !(*s.dry_mass_ug > 0.0)) add(id, "dry_mass_ug", "dry_mass_ug > 0");
    if (s.frames.empty()) add(id, "frames", "frames must be non-empty");

    std::map<Camera, std::int64_t> last_index;
    for (const auto& f : s.frames) {
      const std::string where = std::string("frames[") + to_char(f.camera_id) + "," +
                                std::to_string(f.frame_index) + "]";
      if (f.frame_index < 0) add(id, where + ".frame_index", "frame_index >= 0");
      if (!(f.top < f.bottom)) add(id, where + ".top", "top < bottom");
      if (!(f.left < f.right)) add(id, where + ".left", "left < right");
      if (!(f.area_px >= 0.0)) add(id, where + ".area_px", "area_px >= 0");
      if (f.top < f.bottom && f.left < f.right &&
          f.area_px > static_cast<double>((f.bottom - f.top) * (f.right - f.left)))
        add(id, where + ".area_px", "area_px <= (bottom-top)*(right-left)");
      auto it = last_index.find(f.camera_id);
      if (it != last_index.end() && !(f.frame_index > it->second))
        add(id, where + ".frame_index", "frame_index strictly increasing per camera");
      last_index[f.camera_id] = f.frame_index;
    }

    if (!s.raster_refs.empty() && s.raster_refs.size() != s.frames.size())
      add(id, "raster_refs", "raster_refs must align 1:1 with frames");
    if (!s.rasters.empty()) {
      if (s.rasters.size() != s.frames.size())
        add(id, "rasters", "rasters must align 1:1 with frames");
      for (const auto& r : s.rasters) {
        if (r.pixels.size() != static_cast<std::size_t>(r.height) * r.width) {
          add(id, "rasters", "pixel count must equal height*width");
          break;
        }
        if (d.raster_dims && (r.height != d.raster_dims->height || r.width != d.raster_dims->width)) {
          add(id, "rasters", "raster dimensions must equal dataset raster_dims");
          break;
        }
      }
    }
  }
  return report;
}

void require_valid(const Dataset& d) {
  const auto report = validate_dataset(d);
  if (!report.empty()) {
    const auto& v = report.front();
    throw Error(ErrorCode::InvalidDataset,
                "specimen '" + v.specimen_id + "' field " + v.field + ": " + v.message +
                    (report.size() > 1 ? " (+" + std::to_string(report.size() - 1) + " more)" : ""));
  }
}

Dataset subset(const Dataset& d, const std::vector<std::string>& ids) {
  std::unordered_map<std::string, const SpecimenRecord*> index;
  for (const auto& s : d.specimens) index.emplace(s.specimen_id, &s);
  Dataset out;
  out.name = d.name;
  out.raster_dims = d.raster_dims;
  out.specimens.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) throw Error(ErrorCode::InvalidDataset, "unknown specimen id '" + id + "'");
    out.specimens.push_back(*it->second);
  }
  return out;
}

}  // namespace biomass
