#include "biomass/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

#include "biomass/error.hpp"
#include "biomass/ingest.hpp"
#include "biomass/rng.hpp"

namespace biomass {
namespace {

constexpr double kNoiseClip = 3.0;

double semi_major(double area, double aspect) { return std::sqrt(area * aspect / std::numbers::pi); }

bool silhouette_fits(double area, double aspect, RasterDims dims) {
  // two pixels of slack for the centre jitter
  return 2.0 * semi_major(area, aspect) + 2.0 <= static_cast<double>(std::min(dims.height, dims.width));
}

std::string pad_index(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", i);
  return buf;
}

}  // namespace

SynthConfig default_synth_config(int specimens_per_group, std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed;
  c.groups = {
      {"group_a", 1.15, 1.45, std::log(13.0), 0.2, specimens_per_group},
      {"group_b", 1.80, 2.30, std::log(13.0), 0.2, specimens_per_group},
      {"group_c", 2.80, 3.60, std::log(13.0), 0.2, specimens_per_group},
  };
  return c;
}

SynthConfig synth_config_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SynthConfig c;
    c.cuvette_height_px = j.value("cuvette_height_px", c.cuvette_height_px);
    c.dt = j.value("dt", c.dt);
    c.area_noise_cv = j.value("area_noise_cv", c.area_noise_cv);
    c.seed = j.value("seed", c.seed);
    c.speed_coeff = j.value("speed_coeff", c.speed_coeff);
    c.mass_coeff = j.value("mass_coeff", c.mass_coeff);
    c.n_max = j.value("n_max", c.n_max);
    c.two_cameras = j.value("two_cameras", c.two_cameras);
    c.aspect_max = j.value("aspect_max", c.aspect_max);
    if (j.contains("raster_size") && !j["raster_size"].is_null()) c.raster_size = j["raster_size"].get<int>();
    for (const auto& g : j.at("groups")) {
      GroupSpec s;
      s.name = g.at("name").get<std::string>();
      const auto range = g.at("density_range").get<std::vector<double>>();
      if (range.size() != 2) throw Error(ErrorCode::InvalidConfig, "density_range needs two values");
      s.density_lo = range[0];
      s.density_hi = range[1];
      const auto size = g.at("size_lognormal").get<std::vector<double>>();
      if (size.size() != 2) throw Error(ErrorCode::InvalidConfig, "size_lognormal needs (mu, sigma)");
      s.size_mu = size[0];
      s.size_sigma = size[1];
      s.count = g.at("count").get<int>();
      c.groups.push_back(s);
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("synth config: ") + e.what());
  }
}

std::string to_json(const SynthConfig& c) {
  nlohmann::json j;
  j["cuvette_height_px"] = c.cuvette_height_px;
  j["dt"] = c.dt;
  j["area_noise_cv"] = c.area_noise_cv;
  j["seed"] = c.seed;
  j["speed_coeff"] = c.speed_coeff;
  j["mass_coeff"] = c.mass_coeff;
  j["n_max"] = c.n_max;
  j["two_cameras"] = c.two_cameras;
  j["aspect_max"] = c.aspect_max;
  j["raster_size"] = c.raster_size ? nlohmann::json(*c.raster_size) : nlohmann::json(nullptr);
  for (const auto& g : c.groups)
    j["groups"].push_back({{"name", g.name},
                           {"density_range", {g.density_lo, g.density_hi}},
                           {"size_lognormal", {g.size_mu, g.size_sigma}},
                           {"count", g.count}});
  return j.dump(1) + "\n";
}

std::pair<Dataset, GroundTruth> generate(const SynthConfig& config) {
  if (config.groups.empty()) throw Error(ErrorCode::InvalidConfig, "no groups");
  if (!(config.cuvette_height_px > 0.0) || !(config.dt > 0.0) || config.n_max < 1 || !(config.area_noise_cv >= 0.0) ||
      !(config.speed_coeff > 0.0) || !(config.mass_coeff > 0.0) || !(config.aspect_max >= 1.0))
    throw Error(ErrorCode::InvalidConfig, "non-positive physical constant");
  for (const auto& g : config.groups) {
    if (g.count < 1) throw Error(ErrorCode::InvalidConfig, "group '" + g.name + "' count < 1");
    if (!(g.density_lo > 0.0) || !(g.density_hi >= g.density_lo))
      throw Error(ErrorCode::InvalidConfig, "group '" + g.name + "' density range");
    if (!(g.size_sigma >= 0.0)) throw Error(ErrorCode::InvalidConfig, "group '" + g.name + "' size sigma");
  }
  std::optional<RasterDims> dims;
  if (config.raster_size) {
    if (*config.raster_size < 4) throw Error(ErrorCode::InvalidConfig, "raster_size < 4");
    dims = RasterDims{*config.raster_size, *config.raster_size};
  }

  Dataset d;
  d.name = "synthetic";
  d.raster_dims = dims;
  GroundTruth truth;
  std::uint64_t index = 0;
  for (const auto& g : config.groups) {
    for (int i = 0; i < g.count; ++i, ++index) {
      Rng rng = make_rng(config.seed, "synth", index);
      TruthEntry t;
      t.group = g.name;
      t.density = uniform(rng, g.density_lo, g.density_hi);
      t.aspect = uniform(rng, 1.0, config.aspect_max);
      t.orientation = uniform(rng, 0.0, std::numbers::pi);
      const double max_area_factor = 1.0 + kNoiseClip * config.area_noise_cv;
      for (int attempt = 0;; ++attempt) {
        t.size = std::exp(g.size_mu + g.size_sigma * standard_normal(rng));
        if (!dims || silhouette_fits(t.size * t.size * max_area_factor, t.aspect, *dims)) break;
        if (attempt > 1000)
          throw Error(ErrorCode::InvalidConfig, "group '" + g.name + "' sizes never fit the raster");
      }
      t.volume = t.size * t.size * t.size;
      t.mass = t.density * config.mass_coeff * t.volume;
      const double v = config.speed_coeff * (t.density - 1.0) * t.size * t.size;
      t.true_speed = v * config.dt;

      const double step = std::abs(t.true_speed);
      int n = step > 0.0 ? static_cast<int>(std::ceil(config.cuvette_height_px / step)) : config.n_max;
      n = std::clamp(n, 1, config.n_max);
      // row coordinates grow upward from the cuvette floor, so sinkers lose height
      const double start = t.true_speed >= 0.0 ? config.cuvette_height_px : 0.0;
      const double base_area = t.size * t.size;

      SpecimenRecord s;
      s.specimen_id = g.name + "_" + pad_index(i);
      s.taxon = g.name;
      s.dry_mass_ug = t.mass;
      const std::int64_t left0 = 200 + static_cast<std::int64_t>(uniform_index(rng, 200));
      for (Camera cam : {Camera::A, Camera::B}) {
        if (cam == Camera::B && !config.two_cameras) break;
        for (int k = 0; k < n; ++k) {
          const double eps = std::clamp(config.area_noise_cv * standard_normal(rng), -kNoiseClip * config.area_noise_cv,
                                        kNoiseClip * config.area_noise_cv);
          FrameMeta f;
          f.camera_id = cam;
          f.frame_index = k;
          f.area_px = config.area_noise_cv == 0.0 ? base_area : base_area * (1.0 + eps);
          const auto side = static_cast<std::int64_t>(std::ceil(2.0 * semi_major(f.area_px, t.aspect))) + 4;
          f.top = std::llround(start - static_cast<double>(k) * t.true_speed);
          f.bottom = f.top + side;
          f.left = left0;
          f.right = left0 + side;
          s.frames.push_back(f);
        }
      }
      if (dims) s.rasters = rasterize(t, s.frames, *dims, substream_seed(config.seed, "raster", index));
      truth.emplace(s.specimen_id, t);
      d.specimens.push_back(std::move(s));
    }
  }
  return {std::move(d), std::move(truth)};
}

std::vector<Raster> rasterize(const TruthEntry& truth, const std::vector<FrameMeta>& frames, RasterDims dims,
                              std::uint64_t seed) {
  const int h = dims.height;
  const int w = dims.width;
  Rng rng(seed);
  std::vector<Raster> out;
  out.reserve(frames.size());
  std::vector<std::pair<double, int>> order(static_cast<std::size_t>(h) * w);
  for (const auto& f : frames) {
    const auto target = static_cast<std::size_t>(std::llround(f.area_px));
    if (target > order.size() || !silhouette_fits(f.area_px, truth.aspect, dims))
      throw Error(ErrorCode::SilhouetteTooLarge, "area " + format_double(f.area_px) + " in " + std::to_string(h) + "x" +
                                                     std::to_string(w));
    const double cy = (h - 1) / 2.0 + uniform(rng, -1.0, 1.0);
    const double cx = (w - 1) / 2.0 + uniform(rng, -1.0, 1.0);
    const double a = semi_major(std::max(f.area_px, 1.0), truth.aspect);
    const double b = a / truth.aspect;
    const double c = std::cos(truth.orientation), s = std::sin(truth.orientation);
    for (int row = 0; row < h; ++row)
      for (int col = 0; col < w; ++col) {
        const double dx = col - cx, dy = row - cy;
        const double u = (c * dx + s * dy) / a, v = (-s * dx + c * dy) / b;
        order[static_cast<std::size_t>(row) * w + col] = {u * u + v * v, row * w + col};
      }
    // the `target` pixels closest to the centre in ellipse metric form the silhouette
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(target), order.end());

    Raster r;
    r.height = h;
    r.width = w;
    r.pixels.resize(static_cast<std::size_t>(h) * w);
    for (auto& p : r.pixels) p = static_cast<std::uint8_t>(222 + uniform_index(rng, 17));
    for (std::size_t i = 0; i < target; ++i)
      r.pixels[static_cast<std::size_t>(order[i].second)] = static_cast<std::uint8_t>(30 + uniform_index(rng, 17));
    out.push_back(std::move(r));
  }
  return out;
}

std::size_t count_dark_pixels(const Raster& r, std::uint8_t threshold) {
  return static_cast<std::size_t>(
      std::count_if(r.pixels.begin(), r.pixels.end(), [&](std::uint8_t p) { return p < threshold; }));
}

std::string ground_truth_json(const GroundTruth& truth) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, t] : truth)
    j[id] = {{"group", t.group},     {"density", t.density}, {"size", t.size},
             {"volume", t.volume},   {"mass", t.mass},       {"true_speed", t.true_speed},
             {"aspect", t.aspect},   {"orientation", t.orientation}};
  return j.dump(1) + "\n";
}

void write_synth(const Dataset& d, const GroundTruth& truth, const std::filesystem::path& out_dir) {
  write_dataset(d, out_dir);
  write_file(out_dir / "ground_truth.json", ground_truth_json(truth));
}

}  // namespace biomass
