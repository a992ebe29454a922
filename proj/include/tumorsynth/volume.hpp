#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tumorsynth/error.hpp"

namespace tumorsynth {

/// Voxel lattice shared by every volume of a case: voxels per axis, voxel
/// size in mm, and the world position of voxel (0,0,0).
struct GridGeometry {
  static constexpr std::size_t kDefaultVoxelCap = std::size_t{512} * 512 * 512;

  std::array<std::size_t, 3> dims{1, 1, 1};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::array<double, 3> origin{0.0, 0.0, 0.0};

  std::size_t voxel_count() const noexcept { return dims[0] * dims[1] * dims[2]; }
  double voxel_volume() const noexcept { return spacing[0] * spacing[1] * spacing[2]; }
  double min_spacing() const noexcept;

  /// Throws Error(Data) unless dims >= 1, spacing > 0 and count <= cap.
  void validate(std::size_t voxel_cap = kDefaultVoxelCap) const;

  bool contains(const std::array<double, 3>& voxel) const noexcept;

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

GridGeometry cube_geometry(std::size_t n, double spacing = 1.0);

std::string describe(const GridGeometry& g);

/// Dense 3D grid with x-fastest ordering (NIfTI on-disk order).
template <class T>
class Volume {
 public:
  using value_type = T;

  Volume() = default;
  explicit Volume(const GridGeometry& geometry, T fill = T{})
      : geometry_(geometry), data_(geometry.voxel_count(), fill) {
    geometry_.validate();
  }
  Volume(const GridGeometry& geometry, std::vector<T> data) : geometry_(geometry), data_(std::move(data)) {
    geometry_.validate();
    if (data_.size() != geometry_.voxel_count()) {
      data_error("volume data size " + std::to_string(data_.size()) + " does not match geometry " +
                 describe(geometry_));
    }
  }

  const GridGeometry& geometry() const noexcept { return geometry_; }
  const std::array<std::size_t, 3>& dims() const noexcept { return geometry_.dims; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return i + geometry_.dims[0] * (j + geometry_.dims[1] * k);
  }

  T& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept { return data_[index(i, j, k)]; }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return data_[index(i, j, k)];
  }
  T& operator[](std::size_t n) noexcept { return data_[n]; }
  const T& operator[](std::size_t n) const noexcept { return data_[n]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  GridGeometry geometry_;
  std::vector<T> data_;
};

using ScalarVolume = Volume<float>;
using LabelVolume = Volume<std::uint8_t>;
/// Binary mask; stored as 0/1 bytes.
using Mask = Volume<std::uint8_t>;
/// Double-precision field used for solver state and displacement components.
using Field = Volume<double>;

// Label encoding.
namespace label {
inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kNecrotic = 1;
inline constexpr std::uint8_t kEdema = 2;
inline constexpr std::uint8_t kEnhancing = 4;
inline constexpr std::uint8_t kCsf = 5;
inline constexpr std::uint8_t kGray = 6;
inline constexpr std::uint8_t kWhite = 7;
inline constexpr std::uint8_t kGlial = 8;

inline constexpr std::array<std::uint8_t, 8> kAll{0, 1, 2, 4, 5, 6, 7, 8};
inline constexpr std::array<std::uint8_t, 3> kTumor{1, 2, 4};
inline constexpr std::array<std::uint8_t, 4> kHealthy{5, 6, 7, 8};

constexpr bool is_valid(unsigned v) noexcept { return v <= 8 && v != 3; }
constexpr bool is_tumor(unsigned v) noexcept { return v == 1 || v == 2 || v == 4; }
constexpr bool is_healthy(unsigned v) noexcept { return v >= 5 && v <= 8; }
}  // namespace label

/// Throws Error(Data) naming the first voxel whose label is not in the allowed set.
void check_labels(const LabelVolume& labels);
void check_finite(const ScalarVolume& vol, const std::string& what);

Mask brain_mask(const LabelVolume& seg);
std::size_t count(const Mask& mask);

/// Trilinear interpolation at a continuous voxel coordinate; coordinates are
/// clamped to [0, dim-1] per axis first.
template <class T>
double sample_trilinear(const Volume<T>& vol, double x, double y, double z);

double sample_trilinear(const ScalarVolume& vol, const std::array<double, 3>& point);

template <class T>
Volume<double> to_field(const Volume<T>& vol) {
  std::vector<double> out(vol.values().begin(), vol.values().end());
  return Volume<double>(vol.geometry(), std::move(out));
}

ScalarVolume to_scalar(const Field& field);

template <class A, class B>
void require_same_geometry(const Volume<A>& a, const Volume<B>& b, const char* what) {
  if (!(a.geometry() == b.geometry())) {
    data_error(std::string(what) + ": geometry mismatch (" + describe(a.geometry()) + " vs " +
               describe(b.geometry()) + ")");
  }
}

// -- implementation --------------------------------------------------------

template <class T>
double sample_trilinear(const Volume<T>& vol, double x, double y, double z) {
  const auto& d = vol.dims();
  const auto clamp_axis = [](double c, std::size_t n, std::size_t& lo, std::size_t& hi, double& f) {
    const double top = static_cast<double>(n - 1);
    if (!(c > 0.0)) c = 0.0;  // also maps NaN to 0
    if (c > top) c = top;
    const double fl = std::floor(c);
    lo = static_cast<std::size_t>(fl);
    hi = lo + 1 < n ? lo + 1 : lo;
    f = c - fl;
  };
  std::size_t x0, x1, y0, y1, z0, z1;
  double fx, fy, fz;
  clamp_axis(x, d[0], x0, x1, fx);
  clamp_axis(y, d[1], y0, y1, fy);
  clamp_axis(z, d[2], z0, z1, fz);

  const double c00 = (1 - fx) * vol(x0, y0, z0) + fx * vol(x1, y0, z0);
  const double c10 = (1 - fx) * vol(x0, y1, z0) + fx * vol(x1, y1, z0);
  const double c01 = (1 - fx) * vol(x0, y0, z1) + fx * vol(x1, y0, z1);
  const double c11 = (1 - fx) * vol(x0, y1, z1) + fx * vol(x1, y1, z1);
  const double c0 = (1 - fy) * c00 + fy * c10;
  const double c1 = (1 - fy) * c01 + fy * c11;
  return (1 - fz) * c0 + fz * c1;
}

}  // namespace tumorsynth
