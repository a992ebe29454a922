#pragma once

#include <vector>

#include "tumorsynth/volume.hpp"

namespace tumorsynth {

/// Separable Gaussian smoothing, sigma in voxels, kernel truncated at
/// ceil(3 sigma) and renormalized; edges replicate. sigma <= 0 is a no-op.
Field gaussian_smooth(const Field& in, double sigma_voxels);
void gaussian_smooth_inplace(Field& f, double sigma_voxels);

/// Factor-2 block averaging. Odd extents keep the trailing half block.
Field downsample2(const Field& in);
GridGeometry downsample2(const GridGeometry& g);

/// Trilinear resampling of a coarse field onto a finer grid where each
/// coarse voxel covers `factor` fine voxels per axis (cell-centered).
Field upsample(const Field& coarse, const GridGeometry& fine, double factor = 2.0);

/// Binary dilation with a (2r+1)^3 box structuring element.
Mask dilate(const Mask& mask, int radius);

/// Linear-interpolated quantile (numpy "linear" rule) of an unsorted sample.
double quantile(std::vector<double> values, double q);

/// Rescale so that the [lo_pct, hi_pct] percentile range over `support`
/// maps to [0,1], clamping outside. Empty support or zero spread yields zeros.
Field normalize_percentile(const ScalarVolume& vol, const Mask& support, double lo_pct = 1.0,
                           double hi_pct = 99.0);

}  // namespace tumorsynth
