#pragma once

#include "biomass/data_model.hpp"
#include "biomass/nn/config.hpp"
#include "biomass/rng.hpp"

namespace biomass::nn {

/// Element `k` (0..7) of the dihedral group of the square: k % 4 quarter
/// turns counter-clockwise, preceded by a horizontal flip when k >= 4.
Raster dihedral(const Raster& r, int k);

Raster flip_horizontal(const Raster& r);

/// Rotation about the centre with bilinear resampling; uncovered corners are
/// filled with the median of the border pixels.
Raster rotate(const Raster& r, double angle_rad);

/// Random non-warping augmentation. Throws NonSquareRaster.
Raster augment(const Raster& r, Augmentation policy, Rng& rng);

}  // namespace biomass::nn
