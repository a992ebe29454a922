#include "tumorsynth/registration.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "tumorsynth/filters.hpp"
#include "tumorsynth/nifti.hpp"
#include "tumorsynth/parallel.hpp"

namespace tumorsynth::reg {
namespace {

// Corner indices and fractional offsets of a clamped trilinear lookup,
// shared by the three components of a vector field.
struct Stencil {
  std::array<std::size_t, 8> idx;
  double fx, fy, fz;

  // Same association order as sample_trilinear so identity lookups are exact.
  template <class T>
  double operator()(std::span<const T> v) const {
    const double c00 = (1 - fx) * v[idx[0]] + fx * v[idx[1]];
    const double c10 = (1 - fx) * v[idx[2]] + fx * v[idx[3]];
    const double c01 = (1 - fx) * v[idx[4]] + fx * v[idx[5]];
    const double c11 = (1 - fx) * v[idx[6]] + fx * v[idx[7]];
    return (1 - fz) * ((1 - fy) * c00 + fy * c10) + fz * ((1 - fy) * c01 + fy * c11);
  }
};

Stencil make_stencil(const std::array<std::size_t, 3>& d, double x, double y, double z) {
  std::array<std::size_t, 3> lo, hi;
  std::array<double, 3> f;
  const std::array<double, 3> c{x, y, z};
  for (int a = 0; a < 3; ++a) {
    double v = c[a];
    const double top = static_cast<double>(d[a] - 1);
    if (!(v > 0.0)) v = 0.0;
    if (v > top) v = top;
    const double fl = std::floor(v);
    lo[a] = static_cast<std::size_t>(fl);
    hi[a] = lo[a] + 1 < d[a] ? lo[a] + 1 : lo[a];
    f[a] = v - fl;
  }
  const std::size_t sy = d[0], sz = d[0] * d[1];
  Stencil s;
  int n = 0;
  for (int kz = 0; kz < 2; ++kz) {
    for (int ky = 0; ky < 2; ++ky) {
      for (int kx = 0; kx < 2; ++kx) {
        s.idx[n++] = (kx ? hi[0] : lo[0]) + sy * (ky ? hi[1] : lo[1]) + sz * (kz ? hi[2] : lo[2]);
      }
    }
  }
  s.fx = f[0];
  s.fy = f[1];
  s.fz = f[2];
  return s;
}

double vec_max_norm(const Field& x, const Field& y, const Field& z) {
  double m2 = 0.0;
  for (std::size_t v = 0; v < x.size(); ++v) m2 = std::max(m2, x[v] * x[v] + y[v] * y[v] + z[v] * z[v]);
  return std::sqrt(m2);
}

void require_finite(const Field& f, const char* what) {
  for (double v : f.values()) {
    if (!std::isfinite(v)) numerical_error(std::string(what) + " contains non-finite values");
  }
}

Mask nonzero(const ScalarVolume& v) {
  Mask m(v.geometry(), 0);
  for (std::size_t n = 0; n < v.size(); ++n) m[n] = v[n] != 0.0f ? 1 : 0;
  return m;
}

Mask downsample_mask(const Mask& m) {
  Field coarse = downsample2(to_field(m));
  Mask out(coarse.geometry(), 0);
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = coarse[n] >= 0.5 ? 1 : 0;
  return out;
}

}  // namespace

VelocityField VelocityField::zeros(const GridGeometry& g) { return {Field(g, 0.0), Field(g, 0.0), Field(g, 0.0)}; }

double VelocityField::max_norm() const { return vec_max_norm(vx, vy, vz); }

DeformationField DeformationField::identity(const GridGeometry& g) {
  return {Field(g, 0.0), Field(g, 0.0), Field(g, 0.0), 1.0};
}

double DeformationField::max_norm() const { return vec_max_norm(dx, dy, dz); }

void RegistrationParams::validate() const {
  if (levels < 1) usage_error("registration levels must be >= 1");
  if (iters_per_level.size() != static_cast<std::size_t>(levels)) {
    usage_error("iters_per_level must list one count per pyramid level");
  }
  for (int it : iters_per_level) {
    if (it < 0) usage_error("iteration counts must be >= 0");
  }
  if (!(sigma_fluid >= 0.0) || !(sigma_diff >= 0.0)) usage_error("smoothing sigmas must be >= 0");
  if (!(force_epsilon > 0.0)) usage_error("force_epsilon must be > 0");
  if (!(max_step > 0.0)) usage_error("max_step must be > 0");
}

void Atlas::validate() const {
  require_same_geometry(t1, labels, ("atlas " + id).c_str());
  check_finite(t1, "atlas " + id + " t1");
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v] != label::kBackground && !label::is_healthy(labels[v])) {
      data_error("atlas " + id + " carries non-healthy label " + std::to_string(labels[v]));
    }
  }
}

DeformationField compose(const DeformationField& outer, const DeformationField& inner) {
  require_same_geometry(outer.dx, inner.dx, "compose");
  const auto& d = inner.geometry().dims;
  DeformationField out = DeformationField::identity(inner.geometry());
  const auto ox = outer.dx.values(), oy = outer.dy.values(), oz = outer.dz.values();
  for (std::size_t k = 0; k < d[2]; ++k) {
    for (std::size_t j = 0; j < d[1]; ++j) {
      for (std::size_t i = 0; i < d[0]; ++i) {
        const std::size_t v = inner.dx.index(i, j, k);
        const double ux = inner.dx[v], uy = inner.dy[v], uz = inner.dz[v];
        const Stencil s = make_stencil(d, i + ux, j + uy, k + uz);
        out.dx[v] = ux + s(ox);
        out.dy[v] = uy + s(oy);
        out.dz[v] = uz + s(oz);
      }
    }
  }
  return out;
}

double min_jacobian(const DeformationField& phi) {
  const auto& d = phi.geometry().dims;
  if (d[0] < 3 || d[1] < 3 || d[2] < 3) return 1.0;
  const std::array<std::size_t, 3> stride{1, d[0], d[0] * d[1]};
  const std::array<const Field*, 3> comp{&phi.dx, &phi.dy, &phi.dz};
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k + 1 < d[2]; ++k) {
    for (std::size_t j = 1; j + 1 < d[1]; ++j) {
      for (std::size_t i = 1; i + 1 < d[0]; ++i) {
        const std::size_t v = phi.dx.index(i, j, k);
        double J[3][3];
        for (int a = 0; a < 3; ++a) {
          for (int b = 0; b < 3; ++b) {
            const Field& f = *comp[a];
            J[a][b] = (a == b ? 1.0 : 0.0) + 0.5 * (f[v + stride[b]] - f[v - stride[b]]);
          }
        }
        const double det = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                           J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                           J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
        lowest = std::min(lowest, det);
      }
    }
  }
  return lowest;
}

DeformationField exponentiate(const VelocityField& v) {
  const double vmax = v.max_norm();
  if (!std::isfinite(vmax)) numerical_error("exponentiate: velocity field is not finite");
  int squarings = 0;
  if (vmax > 0.5) squarings = static_cast<int>(std::ceil(std::log2(vmax / 0.5)));
  const double scale = std::ldexp(1.0, -squarings);

  DeformationField phi = DeformationField::identity(v.geometry());
  for (std::size_t n = 0; n < phi.dx.size(); ++n) {
    phi.dx[n] = v.vx[n] * scale;
    phi.dy[n] = v.vy[n] * scale;
    phi.dz[n] = v.vz[n] * scale;
  }
  for (int s = 0; s < squarings; ++s) phi = compose(phi, phi);

  require_finite(phi.dx, "deformation");
  require_finite(phi.dy, "deformation");
  require_finite(phi.dz, "deformation");
  phi.min_jacobian = min_jacobian(phi);
  return phi;
}

Field warp(const Field& vol, const DeformationField& phi) {
  require_same_geometry(vol, phi.dx, "warp");
  const auto& d = vol.dims();
  Field out(vol.geometry(), 0.0);
  const auto src = vol.values();
  for (std::size_t k = 0; k < d[2]; ++k) {
    for (std::size_t j = 0; j < d[1]; ++j) {
      for (std::size_t i = 0; i < d[0]; ++i) {
        const std::size_t v = vol.index(i, j, k);
        out[v] = make_stencil(d, i + phi.dx[v], j + phi.dy[v], k + phi.dz[v])(src);
      }
    }
  }
  return out;
}

ScalarVolume warp(const ScalarVolume& vol, const DeformationField& phi, Interp interp) {
  require_same_geometry(vol, phi.dx, "warp");
  const auto& d = vol.dims();
  ScalarVolume out(vol.geometry(), 0.0f);
  const auto src = vol.values();
  for (std::size_t k = 0; k < d[2]; ++k) {
    for (std::size_t j = 0; j < d[1]; ++j) {
      for (std::size_t i = 0; i < d[0]; ++i) {
        const std::size_t v = vol.index(i, j, k);
        const double x = i + phi.dx[v], y = j + phi.dy[v], z = k + phi.dz[v];
        if (interp == Interp::Linear) {
          out[v] = static_cast<float>(make_stencil(d, x, y, z)(src));
        } else {
          const auto near = [](double c, std::size_t n) {
            const double r = std::round(std::clamp(c, 0.0, static_cast<double>(n - 1)));
            return static_cast<std::size_t>(r);
          };
          out[v] = vol(near(x, d[0]), near(y, d[1]), near(z, d[2]));
        }
      }
    }
  }
  return out;
}

LabelVolume warp(const LabelVolume& vol, const DeformationField& phi, Interp interp) {
  if (interp != Interp::Nearest) usage_error("label volumes can only be warped with nearest-neighbour lookup");
  require_same_geometry(vol, phi.dx, "warp");
  const auto& d = vol.dims();
  LabelVolume out(vol.geometry(), 0);
  const auto near = [](double c, std::size_t n) {
    return static_cast<std::size_t>(std::round(std::clamp(c, 0.0, static_cast<double>(n - 1))));
  };
  for (std::size_t k = 0; k < d[2]; ++k) {
    for (std::size_t j = 0; j < d[1]; ++j) {
      for (std::size_t i = 0; i < d[0]; ++i) {
        const std::size_t v = vol.index(i, j, k);
        out[v] = vol(near(i + phi.dx[v], d[0]), near(j + phi.dy[v], d[1]), near(k + phi.dz[v], d[2]));
      }
    }
  }
  return out;
}

VelocityField demons_force(const Field& fixed, const Field& warped_moving, const Mask& valid, double eps,
                           double max_step) {
  require_same_geometry(fixed, warped_moving, "demons_force");
  require_same_geometry(fixed, valid, "demons_force");
  const auto& d = fixed.dims();
  VelocityField u = VelocityField::zeros(fixed.geometry());
  const std::array<std::size_t, 3> stride{1, d[0], d[0] * d[1]};
  const auto m = warped_moving.values();
  for (std::size_t k = 0; k < d[2]; ++k) {
    for (std::size_t j = 0; j < d[1]; ++j) {
      for (std::size_t i = 0; i < d[0]; ++i) {
        const std::size_t v = fixed.index(i, j, k);
        if (!valid[v]) continue;
        const std::array<std::size_t, 3> c{i, j, k};
        std::array<double, 3> g;
        for (int a = 0; a < 3; ++a) {
          const std::size_t lo = c[a] > 0 ? v - stride[a] : v;
          const std::size_t hi = c[a] + 1 < d[a] ? v + stride[a] : v;
          g[a] = 0.5 * (m[hi] - m[lo]);
        }
        const double g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
        if (g2 == 0.0) continue;
        const double r = fixed[v] - m[v];
        const double denom = g2 + r * r + eps;
        double sx = r * g[0] / denom, sy = r * g[1] / denom, sz = r * g[2] / denom;
        const double norm = std::sqrt(sx * sx + sy * sy + sz * sz);
        if (norm > max_step) {
          const double s = max_step / norm;
          sx *= s;
          sy *= s;
          sz *= s;
        }
        u.vx[v] = sx;
        u.vy[v] = sy;
        u.vz[v] = sz;
      }
    }
  }
  return u;
}

double masked_mse(const Field& a, const Field& b, const Mask& mask) {
  require_same_geometry(a, b, "masked_mse");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t v = 0; v < a.size(); ++v) {
    if (!mask[v]) continue;
    const double r = a[v] - b[v];
    sum += r * r;
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

void smooth(VelocityField& v, double sigma) {
  gaussian_smooth_inplace(v.vx, sigma);
  gaussian_smooth_inplace(v.vy, sigma);
  gaussian_smooth_inplace(v.vz, sigma);
}

RegistrationResult register_images(const ScalarVolume& fixed, const ScalarVolume& moving, const Mask& exclude,
                                   const RegistrationParams& params) {
  params.validate();
  require_same_geometry(fixed, moving, "register");
  require_same_geometry(fixed, exclude, "register");

  // Pyramid level 0 is the finest grid.
  std::vector<Field> fixed_pyr{normalize_percentile(fixed, nonzero(fixed))};
  std::vector<Field> moving_pyr{normalize_percentile(moving, nonzero(moving))};
  Mask valid(fixed.geometry(), 0);
  for (std::size_t v = 0; v < valid.size(); ++v) {
    valid[v] = (fixed[v] != 0.0f || moving[v] != 0.0f) && !exclude[v] ? 1 : 0;
  }
  std::vector<Mask> valid_pyr{valid};
  for (int l = 1; l < params.levels; ++l) {
    fixed_pyr.push_back(downsample2(fixed_pyr.back()));
    moving_pyr.push_back(downsample2(moving_pyr.back()));
    valid_pyr.push_back(downsample_mask(valid_pyr.back()));
  }

  RegistrationResult result;
  result.similarity_initial = masked_mse(fixed_pyr[0], moving_pyr[0], valid_pyr[0]);

  VelocityField v = VelocityField::zeros(fixed_pyr.back().geometry());
  for (int l = params.levels - 1; l >= 0; --l) {
    const Field& f = fixed_pyr[l];
    const Field& m = moving_pyr[l];
    if (!(v.geometry() == f.geometry())) {
      const GridGeometry& g = f.geometry();
      v = {upsample(v.vx, g), upsample(v.vy, g), upsample(v.vz, g)};
      for (Field* c : {&v.vx, &v.vy, &v.vz}) {
        for (double& x : c->values()) x *= 2.0;
      }
    }
    const int iters = params.iters_per_level[params.levels - 1 - l];
    for (int it = 0; it < iters; ++it) {
      const DeformationField phi = exponentiate(v);
      const Field warped = warp(m, phi);
      VelocityField u = demons_force(f, warped, valid_pyr[l], params.force_epsilon, params.max_step);
      smooth(u, params.sigma_fluid);
      for (std::size_t n = 0; n < v.vx.size(); ++n) {
        v.vx[n] += u.vx[n];
        v.vy[n] += u.vy[n];
        v.vz[n] += u.vz[n];
      }
      smooth(v, params.sigma_diff);
      ++result.iterations_run;
    }
  }

  require_finite(v.vx, "velocity field");
  require_finite(v.vy, "velocity field");
  require_finite(v.vz, "velocity field");
  const DeformationField phi = exponentiate(v);
  result.similarity_final = masked_mse(fixed_pyr[0], warp(moving_pyr[0], phi), valid_pyr[0]);
  result.min_jacobian = phi.min_jacobian;
  result.velocity = std::move(v);
  return result;
}

LabelVolume fuse_labels(std::span<const LabelVolume> warped_atlas_labels, std::span<const double> similarities,
                        bool background_votes) {
  if (warped_atlas_labels.empty()) usage_error("fuse_labels: no atlas label maps given");
  if (similarities.size() != warped_atlas_labels.size()) {
    usage_error("fuse_labels: one similarity per atlas label map is required");
  }
  const auto& first = warped_atlas_labels.front();
  for (const auto& l : warped_atlas_labels) require_same_geometry(first, l, "fuse_labels");

  LabelVolume out(first.geometry(), 0);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < out.size(); ++v) {
    std::array<int, 9> votes{};
    std::array<double, 9> best{kInf, kInf, kInf, kInf, kInf, kInf, kInf, kInf, kInf};
    for (std::size_t a = 0; a < warped_atlas_labels.size(); ++a) {
      const std::uint8_t l = warped_atlas_labels[a][v];
      if (l == label::kBackground ? !background_votes : !label::is_healthy(l)) continue;
      ++votes[l];
      best[l] = std::min(best[l], similarities[a]);
    }
    int winner = -1;
    for (int l = 0; l < 9; ++l) {
      if (votes[l] == 0) continue;
      if (winner < 0 || votes[l] > votes[winner] || (votes[l] == votes[winner] && best[l] < best[winner])) {
        winner = l;
      }
    }
    out[v] = winner < 0 ? label::kBackground : static_cast<std::uint8_t>(winner);
  }
  return out;
}

Mask tumor_exclusion_mask(const LabelVolume& seg, int radius) {
  Mask tumor(seg.geometry(), 0);
  for (std::size_t v = 0; v < seg.size(); ++v) tumor[v] = label::is_tumor(seg[v]) ? 1 : 0;
  return dilate(tumor, radius);
}

EnrichResult enrich_case(const MultimodalCase& c, std::span<const Atlas> atlases, const RegistrationParams& params,
                         std::size_t jobs) {
  if (atlases.empty()) usage_error("enrich_case: at least one atlas is required");
  c.validate();
  params.validate();
  for (const auto& a : atlases) {
    a.validate();
    require_same_geometry(c.t1, a.t1, ("atlas " + a.id).c_str());
  }

  const Mask exclude = tumor_exclusion_mask(c.seg, 2);
  std::vector<AtlasOutcome> outcomes(atlases.size());
  std::vector<LabelVolume> warped(atlases.size());
  parallel_for(atlases.size(), jobs, [&](std::size_t a) {
    AtlasOutcome& o = outcomes[a];
    o.atlas_id = atlases[a].id;
    try {
      const RegistrationResult r = register_images(c.t1, atlases[a].t1, exclude, params);
      const DeformationField phi = exponentiate(r.velocity);
      warped[a] = warp(atlases[a].labels, phi, Interp::Nearest);
      o.ok = true;
      o.similarity_initial = r.similarity_initial;
      o.similarity_final = r.similarity_final;
      o.min_jacobian = r.min_jacobian;
    } catch (const Error& e) {
      o.error = e.what();
    }
  });

  std::vector<LabelVolume> used;
  std::vector<double> sims;
  for (std::size_t a = 0; a < atlases.size(); ++a) {
    if (outcomes[a].ok) {
      used.push_back(std::move(warped[a]));
      sims.push_back(outcomes[a].similarity_final);
    } else {
      std::cerr << "warning: registration of atlas " << outcomes[a].atlas_id << " failed: " << outcomes[a].error
                << "\n";
    }
  }
  if (used.empty()) numerical_error("enrich_case: registration failed for every atlas");

  // Inside the case brain, background is never the right answer.
  const LabelVolume fused = fuse_labels(used, sims, false);
  const Mask brain = case_brain_mask(c);
  EnrichResult result{LabelVolume(c.geometry(), 0), std::move(outcomes)};
  for (std::size_t v = 0; v < fused.size(); ++v) {
    if (label::is_tumor(c.seg[v])) {
      result.seg[v] = c.seg[v];
    } else if (brain[v]) {
      result.seg[v] = fused[v];
    }
  }

  // Brain voxels no atlas covered with tissue take the nearest fused healthy
  // label (breadth-first over 6-neighbours, scan order breaks ties).
  const auto d = c.geometry().dims;
  const std::size_t sx = 1, sy = d[0], sz = d[0] * d[1];
  std::vector<std::size_t> frontier;
  for (std::size_t v = 0; v < result.seg.size(); ++v)
    if (label::is_healthy(result.seg[v])) frontier.push_back(v);
  for (std::size_t head = 0; head < frontier.size(); ++head) {
    const std::size_t v = frontier[head];
    const std::size_t x = v % d[0], y = (v / d[0]) % d[1], z = v / sz;
    const std::array<std::pair<bool, std::size_t>, 6> nb{{{x > 0, v - sx},
                                                           {x + 1 < d[0], v + sx},
                                                           {y > 0, v - sy},
                                                           {y + 1 < d[1], v + sy},
                                                           {z > 0, v - sz},
                                                           {z + 1 < d[2], v + sz}}};
    for (const auto& [inside, w] : nb) {
      if (!inside || !brain[w] || result.seg[w] != label::kBackground) continue;
      result.seg[w] = result.seg[v];
      frontier.push_back(w);
    }
  }
  return result;
}

Atlas read_atlas(const std::filesystem::path& dir) {
  Atlas a;
  a.id = dir.filename().string();
  a.t1 = nifti::read_scalar(dir / "t1.nii");
  a.labels = nifti::read_label(dir / "labels.nii");
  a.validate();
  return a;
}

std::vector<Atlas> read_atlas_set(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) data_error("atlas directory " + root.string() + " does not exist");
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(root)) {
    if (e.is_directory() && std::filesystem::exists(e.path() / "labels.nii")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<Atlas> atlases;
  for (const auto& d : dirs) atlases.push_back(read_atlas(d));
  if (atlases.empty()) data_error("no atlases found under " + root.string());
  return atlases;
}

void write_atlas(const Atlas& a, const std::filesystem::path& dir) {
  a.validate();
  std::filesystem::create_directories(dir);
  nifti::write(a.t1, dir / "t1.nii");
  nifti::write(a.labels, dir / "labels.nii");
}

}  // namespace tumorsynth::reg
