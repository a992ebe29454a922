#include "tumorsynth/filters.hpp"

#include <algorithm>
#include <cmath>

namespace tumorsynth {
namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    const double w = std::exp(-0.5 * (t * t) / (sigma * sigma));
    k[t + radius] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

// Convolves every line of `f` along `axis` with `kernel`, replicating edges.
void convolve_axis(Field& f, int axis, const std::vector<double>& kernel) {
  const auto& d = f.dims();
  const std::size_t n = d[axis];
  if (n == 1) return;
  const int radius = static_cast<int>(kernel.size() / 2);
  const std::size_t stride = axis == 0 ? 1 : (axis == 1 ? d[0] : d[0] * d[1]);
  const int a1 = axis == 0 ? 1 : 0;
  const int a2 = axis == 2 ? 1 : 2;

  std::vector<double> padded(n + 2 * radius);
  auto values = f.values();
  for (std::size_t v = 0; v < d[a2]; ++v) {
    for (std::size_t u = 0; u < d[a1]; ++u) {
      std::array<std::size_t, 3> start{0, 0, 0};
      start[a1] = u;
      start[a2] = v;
      const std::size_t base = f.index(start[0], start[1], start[2]);
      for (int t = 0; t < radius; ++t) padded[t] = values[base];
      for (std::size_t t = 0; t < n; ++t) padded[t + radius] = values[base + t * stride];
      for (int t = 0; t < radius; ++t) padded[n + radius + t] = values[base + (n - 1) * stride];
      for (std::size_t t = 0; t < n; ++t) {
        const double* p = padded.data() + t;
        double acc = 0.0;
        for (std::size_t q = 0; q < kernel.size(); ++q) acc += kernel[q] * p[q];
        values[base + t * stride] = acc;
      }
    }
  }
}

}  // namespace

void gaussian_smooth_inplace(Field& f, double sigma_voxels) {
  if (!(sigma_voxels > 0.0)) return;
  const auto kernel = gaussian_kernel(sigma_voxels);
  for (int axis = 0; axis < 3; ++axis) convolve_axis(f, axis, kernel);
}

Field gaussian_smooth(const Field& in, double sigma_voxels) {
  Field out = in;
  gaussian_smooth_inplace(out, sigma_voxels);
  return out;
}

GridGeometry downsample2(const GridGeometry& g) {
  GridGeometry c = g;
  for (int a = 0; a < 3; ++a) {
    c.dims[a] = (g.dims[a] + 1) / 2;
    c.spacing[a] = g.spacing[a] * 2.0;
    // Center of coarse voxel 0 sits between fine voxels 0 and 1.
    c.origin[a] = g.origin[a] + 0.5 * g.spacing[a];
  }
  return c;
}

Field downsample2(const Field& in) {
  const GridGeometry cg = downsample2(in.geometry());
  Field out(cg, 0.0);
  const auto& fd = in.dims();
  for (std::size_t k = 0; k < cg.dims[2]; ++k) {
    for (std::size_t j = 0; j < cg.dims[1]; ++j) {
      for (std::size_t i = 0; i < cg.dims[0]; ++i) {
        double sum = 0.0;
        int cnt = 0;
        for (std::size_t dk = 0; dk < 2; ++dk) {
          for (std::size_t dj = 0; dj < 2; ++dj) {
            for (std::size_t di = 0; di < 2; ++di) {
              const std::size_t x = 2 * i + di, y = 2 * j + dj, z = 2 * k + dk;
              if (x < fd[0] && y < fd[1] && z < fd[2]) {
                sum += in(x, y, z);
                ++cnt;
              }
            }
          }
        }
        out(i, j, k) = sum / cnt;
      }
    }
  }
  return out;
}

Field upsample(const Field& coarse, const GridGeometry& fine, double factor) {
  Field out(fine, 0.0);
  const auto& d = fine.dims;
  const double shift = 0.5 / factor - 0.5;
  for (std::size_t k = 0; k < d[2]; ++k) {
    const double z = k / factor + shift;
    for (std::size_t j = 0; j < d[1]; ++j) {
      const double y = j / factor + shift;
      for (std::size_t i = 0; i < d[0]; ++i) {
        out(i, j, k) = sample_trilinear(coarse, i / factor + shift, y, z);
      }
    }
  }
  return out;
}

Mask dilate(const Mask& mask, int radius) {
  if (radius <= 0) return mask;
  // Separable: a box dilation is three 1D max filters.
  Mask cur = mask;
  const auto& d = mask.dims();
  for (int axis = 0; axis < 3; ++axis) {
    Mask next = cur;
    const long n = static_cast<long>(d[axis]);
    for (std::size_t k = 0; k < d[2]; ++k) {
      for (std::size_t j = 0; j < d[1]; ++j) {
        for (std::size_t i = 0; i < d[0]; ++i) {
          std::array<long, 3> p{static_cast<long>(i), static_cast<long>(j), static_cast<long>(k)};
          const long c = p[axis];
          std::uint8_t on = 0;
          for (long t = std::max(0L, c - radius); t <= std::min(n - 1, c + radius) && !on; ++t) {
            p[axis] = t;
            on = cur(p[0], p[1], p[2]);
          }
          next(i, j, k) = on ? 1 : 0;
        }
      }
    }
    cur = std::move(next);
  }
  return cur;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) data_error("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (values.size() - 1) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - lo) * (values[hi] - values[lo]);
}

Field normalize_percentile(const ScalarVolume& vol, const Mask& support, double lo_pct, double hi_pct) {
  require_same_geometry(vol, support, "normalize_percentile");
  std::vector<double> sample;
  for (std::size_t n = 0; n < vol.size(); ++n) {
    if (support[n]) sample.push_back(vol[n]);
  }
  Field out(vol.geometry(), 0.0);
  if (sample.empty()) return out;
  std::sort(sample.begin(), sample.end());
  const auto pick = [&](double pct) {
    const double h = (sample.size() - 1) * pct / 100.0;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sample.size() - 1);
    return sample[lo] + (h - lo) * (sample[hi] - sample[lo]);
  };
  const double lo = pick(lo_pct);
  const double hi = pick(hi_pct);
  if (!(hi > lo)) return out;
  for (std::size_t n = 0; n < vol.size(); ++n) {
    out[n] = std::clamp((vol[n] - lo) / (hi - lo), 0.0, 1.0);
  }
  return out;
}

}  // namespace tumorsynth
