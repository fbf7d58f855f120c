// Small builders shared by the unit and acceptance tests.
#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "biomass/data_model.hpp"
#include "biomass/error.hpp"
#include "biomass/rng.hpp"
#include "biomass/synth.hpp"

namespace fixture {

// Code of the biomass::Error thrown by f, if any.
template <typename F>
std::optional<biomass::ErrorCode> error_code(F&& f) {
  try {
    f();
  } catch (const biomass::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline biomass::FrameMeta frame(biomass::Camera cam, int index, int top, double area) {
  return {cam, index, top, top + 40, 10, 50, area};
}

// Specimen sinking `step` px per frame on camera A with the given per-frame areas.
inline biomass::SpecimenRecord specimen(const std::string& id, const std::string& taxon, double mass,
                                        const std::vector<double>& areas, int step = 5) {
  biomass::SpecimenRecord s;
  s.specimen_id = id;
  s.taxon = taxon;
  s.dry_mass_ug = mass;
  for (std::size_t i = 0; i < areas.size(); ++i)
    s.frames.push_back(frame(biomass::Camera::A, static_cast<int>(i), 1000 - step * static_cast<int>(i), areas[i]));
  return s;
}

// Metadata-only dataset with `per_taxon[t]` specimens of taxon "t<t>".
inline biomass::Dataset counted(const std::vector<int>& per_taxon) {
  biomass::Dataset d;
  d.name = "counted";
  int next = 0;
  for (std::size_t t = 0; t < per_taxon.size(); ++t)
    for (int i = 0; i < per_taxon[t]; ++i) {
      const std::string id = "s" + std::to_string(next++);
      d.specimens.push_back(specimen(id, "t" + std::to_string(t), 1.0 + i, {100.0 + i, 110.0 + i}));
    }
  return d;
}

// Rasterized three-group configuration sized for desk-scale neural training.
inline biomass::SynthConfig raster_config(int total, std::uint64_t seed, int raster = 32) {
  biomass::SynthConfig c = biomass::default_synth_config(1, seed);
  c.cuvette_height_px = 150;
  c.raster_size = raster;
  const int base = total / 3;
  for (std::size_t g = 0; g < c.groups.size(); ++g)
    c.groups[g].count = base + (static_cast<int>(g) < total % 3 ? 1 : 0);
  return c;
}

}  // namespace fixture
