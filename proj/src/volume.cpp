#include "tumorsynth/volume.hpp"

#include <algorithm>
#include <sstream>

namespace tumorsynth {

double GridGeometry::min_spacing() const noexcept {
  return std::min({spacing[0], spacing[1], spacing[2]});
}

void GridGeometry::validate(std::size_t voxel_cap) const {
  std::size_t total = 1;
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) data_error("grid dimension " + std::to_string(a) + " is zero");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
      data_error("grid spacing along axis " + std::to_string(a) + " must be positive");
    }
    if (!std::isfinite(origin[a])) data_error("grid origin is not finite");
    if (dims[a] > voxel_cap || total > voxel_cap / dims[a]) {
      data_error("grid " + describe(*this) + " exceeds the voxel cap of " + std::to_string(voxel_cap));
    }
    total *= dims[a];
  }
}

bool GridGeometry::contains(const std::array<double, 3>& voxel) const noexcept {
  for (int a = 0; a < 3; ++a) {
    if (!(voxel[a] >= 0.0) || voxel[a] > static_cast<double>(dims[a] - 1)) return false;
  }
  return true;
}

GridGeometry cube_geometry(std::size_t n, double spacing) {
  GridGeometry g;
  g.dims = {n, n, n};
  g.spacing = {spacing, spacing, spacing};
  return g;
}

std::string describe(const GridGeometry& g) {
  std::ostringstream os;
  os << g.dims[0] << "x" << g.dims[1] << "x" << g.dims[2] << " @ " << g.spacing[0] << "," << g.spacing[1]
     << "," << g.spacing[2] << " mm";
  return os.str();
}

void check_labels(const LabelVolume& labels) {
  const auto vals = labels.values();
  for (std::size_t n = 0; n < vals.size(); ++n) {
    if (!label::is_valid(vals[n])) {
      data_error("invalid label " + std::to_string(vals[n]) + " at voxel index " + std::to_string(n));
    }
  }
}

void check_finite(const ScalarVolume& vol, const std::string& what) {
  const auto vals = vol.values();
  for (std::size_t n = 0; n < vals.size(); ++n) {
    if (!std::isfinite(vals[n])) data_error(what + ": non-finite intensity at voxel index " + std::to_string(n));
  }
}

Mask brain_mask(const LabelVolume& seg) {
  Mask mask(seg.geometry(), 0);
  for (std::size_t n = 0; n < seg.size(); ++n) mask[n] = seg[n] != label::kBackground ? 1 : 0;
  return mask;
}

std::size_t count(const Mask& mask) {
  return static_cast<std::size_t>(std::count_if(mask.values().begin(), mask.values().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

double sample_trilinear(const ScalarVolume& vol, const std::array<double, 3>& point) {
  return sample_trilinear(vol, point[0], point[1], point[2]);
}

ScalarVolume to_scalar(const Field& field) {
  std::vector<float> out(field.size());
  std::transform(field.values().begin(), field.values().end(), out.begin(),
                 [](double v) { return static_cast<float>(v); });
  return ScalarVolume(field.geometry(), std::move(out));
}

}  // namespace tumorsynth
