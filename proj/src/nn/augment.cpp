#include "biomass/nn/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "biomass/error.hpp"

namespace biomass::nn {
namespace {

void require_square(const Raster& r) {
  if (r.height != r.width)
    throw Error(ErrorCode::NonSquareRaster, std::to_string(r.height) + "x" + std::to_string(r.width));
}

std::uint8_t border_median(const Raster& r) {
  std::vector<std::uint8_t> border;
  for (int c = 0; c < r.width; ++c) {
    border.push_back(r.at(0, c));
    border.push_back(r.at(r.height - 1, c));
  }
  for (int row = 1; row + 1 < r.height; ++row) {
    border.push_back(r.at(row, 0));
    border.push_back(r.at(row, r.width - 1));
  }
  std::nth_element(border.begin(), border.begin() + static_cast<std::ptrdiff_t>(border.size() / 2), border.end());
  return border[border.size() / 2];
}

Raster rot90(const Raster& r) {
  // counter-clockwise: out(row, col) = in(col, n-1-row)
  const int n = r.height;
  Raster out = r;
  for (int row = 0; row < n; ++row)
    for (int col = 0; col < n; ++col) out.at(row, col) = r.at(col, n - 1 - row);
  return out;
}

}  // namespace

Raster flip_horizontal(const Raster& r) {
  Raster out = r;
  for (int row = 0; row < r.height; ++row)
    for (int col = 0; col < r.width; ++col) out.at(row, col) = r.at(row, r.width - 1 - col);
  return out;
}

Raster dihedral(const Raster& r, int k) {
  require_square(r);
  Raster out = k >= 4 ? flip_horizontal(r) : r;
  for (int i = 0; i < k % 4; ++i) out = rot90(out);
  return out;
}

namespace {

// trig roundoff must not push exact grid points off the raster edge
double snap(double v) {
  const double k = std::round(v);
  return std::abs(v - k) < 1e-9 ? k : v;
}

}  // namespace

Raster rotate(const Raster& r, double angle_rad) {
  require_square(r);
  const int n = r.height;
  const double centre = (n - 1) / 2.0;
  const double c = std::cos(angle_rad), s = std::sin(angle_rad);
  const double fill = border_median(r);

  Raster out = r;
  for (int row = 0; row < n; ++row)
    for (int col = 0; col < n; ++col) {
      const double dx = col - centre, dy = row - centre;
      // inverse mapping: where in the source does this output pixel come from
      const double sx = snap(centre + c * dx + s * dy);
      const double sy = snap(centre - s * dx + c * dy);
      double value = fill;
      if (sx >= 0.0 && sy >= 0.0 && sx <= n - 1 && sy <= n - 1) {
        const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
        const int x1 = std::min(x0 + 1, n - 1), y1 = std::min(y0 + 1, n - 1);
        const double fx = sx - x0, fy = sy - y0;
        value = (1 - fy) * ((1 - fx) * r.at(y0, x0) + fx * r.at(y0, x1)) +
                fy * ((1 - fx) * r.at(y1, x0) + fx * r.at(y1, x1));
      }
      out.at(row, col) = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
    }
  return out;
}

Raster augment(const Raster& r, Augmentation policy, Rng& rng) {
  require_square(r);
  switch (policy) {
    case Augmentation::None:
      return r;
    case Augmentation::Flips90:
      return dihedral(r, static_cast<int>(uniform_index(rng, 8)));
    case Augmentation::ContinuousRotation:
      return rotate(r, uniform(rng, 0.0, 2.0 * std::numbers::pi));
    case Augmentation::PhotometricLite: {
      const double brightness = uniform(rng, -20.0, 20.0);
      const double contrast = uniform(rng, 0.8, 1.2);
      double mean = 0.0;
      for (auto p : r.pixels) mean += p;
      mean /= static_cast<double>(r.pixels.size());
      Raster out = r;
      for (auto& p : out.pixels)
        p = static_cast<std::uint8_t>(std::clamp(std::lround((p - mean) * contrast + mean + brightness), 0L, 255L));
      return out;
    }
  }
  return r;
}

}  // namespace biomass::nn
