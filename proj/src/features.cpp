#include "biomass/features.hpp"

#include <cmath>

#include "biomass/error.hpp"
#include "biomass/ingest.hpp"

namespace biomass {

double sinking_speed(std::span<const FrameMeta> frames) {
  const auto n = frames.size();
  if (n < 2) throw Error(ErrorCode::TooFewFrames, "n = " + std::to_string(n));
  const double first = static_cast<double>(frames.front().top);
  const double last = static_cast<double>(frames.back().top);
  return (first - last) / static_cast<double>(n);
}

double mean_area(std::span<const FrameMeta> frames) {
  if (frames.empty()) throw Error(ErrorCode::EmptyInput, "mean_area of zero frames");
  double sum = 0.0;
  for (const auto& f : frames) sum += f.area_px;
  return sum / static_cast<double>(frames.size());
}

double log_mass(double y) {
  if (!(y > 0.0)) throw Error(ErrorCode::NonPositiveMass, "log of " + format_double(y));
  return std::log(y);
}

SpecimenFeatures compute_features(const SpecimenRecord& specimen) {
  SpecimenFeatures f;
  f.mean_area_px = mean_area(specimen.frames);

  const auto a = specimen.frames_for(Camera::A);
  const auto b = specimen.frames_for(Camera::B);
  if (a.size() >= 2) {
    f.reference_camera = Camera::A;
    f.sinking_speed = sinking_speed(a);
    f.image_count = static_cast<int>(a.size());
  } else if (b.size() >= 2) {
    f.reference_camera = Camera::B;
    f.sinking_speed = sinking_speed(b);
    f.image_count = static_cast<int>(b.size());
  } else {
    // no usable sequence; count whatever the preferred camera saw
    f.image_count = static_cast<int>(!a.empty() ? a.size() : b.size());
  }
  f.pseudo_mass = f.mean_area_px * f.image_count;
  return f;
}

std::string features_csv(const Dataset& d) {
  std::string out = "specimen_id,taxon,dry_mass_ug,mean_area_px,image_count,sinking_speed,pseudo_mass\n";
  for (const auto& s : d.specimens) {
    const auto f = compute_features(s);
    out += s.specimen_id + "," + s.taxon + ",";
    if (s.dry_mass_ug) out += format_double(*s.dry_mass_ug);
    out += "," + format_double(f.mean_area_px) + "," + std::to_string(f.image_count) + ",";
    if (f.sinking_speed) out += format_double(*f.sinking_speed);
    out += "," + format_double(f.pseudo_mass) + "\n";
  }
  return out;
}

}  // namespace biomass
