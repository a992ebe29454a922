#include "tumorsynth/growth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace tumorsynth::growth {
namespace {

double max_value(const Field& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, v);
  return m;
}

double harmonic(double a, double b) {
  if (a <= 0.0 || b <= 0.0) return 0.0;
  return 2.0 * a * b / (a + b);
}

void require_nonnegative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) usage_error(std::string("growth parameter ") + name + " must be >= 0");
}

void require_open_unit(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0)) usage_error(std::string("growth parameter ") + name + " must lie in (0,1)");
}

void check_finite_state(const SpeciesState& s, double dt, const TissueCoefficients& coeffs) {
  for (const Field* f : {&s.p, &s.i, &s.n}) {
    for (double v : f->values()) {
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "tumor growth step produced a non-finite value (dt = " << dt
           << " days, D_max = " << std::max(max_value(coeffs.diff_p), max_value(coeffs.diff_i)) << " mm^2/day)";
        numerical_error(os.str());
      }
    }
  }
}

void react_and_clip(SpeciesState& s, const Field& growth_scale, const GrowthParams& prm, double dt) {
  auto p = s.p.values();
  auto i = s.i.values();
  auto n = s.n.values();
  const auto gs = growth_scale.values();
  for (std::size_t v = 0; v < p.size(); ++v) {
    const double pv = p[v], iv = i[v], nv = n[v];
    const double c = pv + iv + nv;
    const double h = 0.5 * (1.0 + std::tanh((c - prm.c_h) / prm.sigma_h));
    const double free = 1.0 - c;
    double pn = pv + dt * (prm.rho_p * gs[v] * pv * free - prm.alpha_pi * pv + prm.beta_ip * iv - prm.gamma * h * pv);
    double in = iv + dt * (prm.rho_i * gs[v] * iv * free + prm.alpha_pi * pv - prm.beta_ip * iv - prm.gamma * h * iv);
    double nn = nv + dt * prm.gamma * h * (pv + iv);

    // Clip onto {p,i,n >= 0, p+i+n <= 1}. Only the mobile species are
    // rescaled so the necrotic fraction never decreases.
    pn = std::max(pn, 0.0);
    in = std::max(in, 0.0);
    nn = std::min(std::max(nn, 0.0), 1.0);
    const double room = 1.0 - nn;
    const double mobile = pn + in;
    if (mobile > room) {
      const double scale = room / mobile;
      pn *= scale;
      in *= scale;
    }
    p[v] = pn;
    i[v] = in;
    n[v] = nn;
  }
}

}  // namespace

void GrowthParams::validate() const {
  require_nonnegative(d_w, "d_w");
  if (!(kappa_gw > 0.0 && kappa_gw <= 1.0)) usage_error("growth parameter kappa_gw must lie in (0,1]");
  if (!(kappa_i >= 1.0) || !std::isfinite(kappa_i)) usage_error("growth parameter kappa_i must be >= 1");
  require_nonnegative(rho_p, "rho_p");
  require_nonnegative(rho_i, "rho_i");
  require_nonnegative(alpha_pi, "alpha_pi");
  require_nonnegative(beta_ip, "beta_ip");
  require_nonnegative(gamma, "gamma");
  require_open_unit(c_h, "c_h");
  if (!(sigma_h > 0.0) || !std::isfinite(sigma_h)) usage_error("growth parameter sigma_h must be > 0");
  if (!(seed_sigma > 0.0) || !std::isfinite(seed_sigma)) usage_error("growth parameter seed_sigma must be > 0");
  if (!(seed_amplitude >= 0.0 && seed_amplitude <= 1.0)) usage_error("seed_amplitude must lie in [0,1]");
  if (!(t_final > 0.0) || !std::isfinite(t_final)) usage_error("t_final must be > 0");
  require_open_unit(cfl_safety, "cfl_safety");
  require_open_unit(tau_p, "tau_p");
  require_open_unit(tau_i, "tau_i");
  require_open_unit(tau_n, "tau_n");
  if (record_every < 1) usage_error("record_every must be >= 1");
}

void GrowthParams::validate(const GridGeometry& g) const {
  validate();
  if (!g.contains(seed_center)) {
    std::ostringstream os;
    os << "seed center (" << seed_center[0] << ", " << seed_center[1] << ", " << seed_center[2]
       << ") lies outside the grid " << describe(g);
    usage_error(os.str());
  }
}

TissueCoefficients derive_tissue_coefficients(const LabelVolume& labels, const GrowthParams& params) {
  check_labels(labels);
  const auto& g = labels.geometry();
  TissueCoefficients c{Field(g, 0.0), Field(g, 0.0), Field(g, 0.0)};
  for (std::size_t v = 0; v < labels.size(); ++v) {
    double d = 0.0;
    bool permissive = true;
    switch (labels[v]) {
      case label::kBackground:
      case label::kCsf: permissive = false; break;
      case label::kGray: d = params.d_w * params.kappa_gw; break;
      default: d = params.d_w; break;  // white, glial, and tumor-occupied tissue
    }
    c.diff_p[v] = d;
    c.diff_i[v] = params.kappa_i * d;
    c.growth_scale[v] = permissive ? 1.0 : 0.0;
  }
  return c;
}

SpeciesState seed_tumor(const GridGeometry& geom, const GrowthParams& params) {
  params.validate(geom);
  SpeciesState s{Field(geom, 0.0), Field(geom, 0.0), Field(geom, 0.0), 0.0};
  if (params.seed_amplitude == 0.0) return s;
  const double inv = 1.0 / (2.0 * params.seed_sigma * params.seed_sigma);
  const auto& d = geom.dims;
  for (std::size_t k = 0; k < d[2]; ++k) {
    const double dz = (k - params.seed_center[2]) * geom.spacing[2];
    for (std::size_t j = 0; j < d[1]; ++j) {
      const double dy = (j - params.seed_center[1]) * geom.spacing[1];
      for (std::size_t i = 0; i < d[0]; ++i) {
        const double dx = (i - params.seed_center[0]) * geom.spacing[0];
        const double v = params.seed_amplitude * std::exp(-(dx * dx + dy * dy + dz * dz) * inv);
        s.p(i, j, k) = v < 1e-6 ? 0.0 : v;
      }
    }
  }
  return s;
}

double diffusion_dt_limit(const GridGeometry& g, double d_max, double cfl_safety) {
  if (!(d_max > 0.0)) return std::numeric_limits<double>::infinity();
  const double h = g.min_spacing();
  return cfl_safety * h * h / (6.0 * d_max);
}

double stable_dt(const TissueCoefficients& coeffs, const GrowthParams& params) {
  const double d_max = std::max(max_value(coeffs.diff_p), max_value(coeffs.diff_i));
  double dt = diffusion_dt_limit(coeffs.diff_p.geometry(), d_max, params.cfl_safety);
  const double rate = std::max(params.rho_p, params.rho_i) + params.alpha_pi + params.beta_ip + params.gamma;
  if (rate > 0.0) dt = std::min(dt, 0.5 / rate);
  return std::min(dt, params.t_final);
}

void diffuse(Field& s, const Field& diffusivity, double dt, double cfl_safety) {
  require_same_geometry(s, diffusivity, "diffuse");
  const double d_max = max_value(diffusivity);
  if (!(d_max > 0.0) || !(dt > 0.0)) return;
  const auto& g = s.geometry();
  const auto& d = g.dims;
  const double limit = diffusion_dt_limit(g, d_max, cfl_safety);
  const auto substeps = static_cast<std::size_t>(std::max(1.0, std::ceil(dt / limit)));
  const double h = dt / static_cast<double>(substeps);

  // Face conductances D_face / spacing^2 toward the +axis neighbour.
  const std::array<std::size_t, 3> stride{1, d[0], d[0] * d[1]};
  std::array<std::vector<double>, 3> face;
  for (int a = 0; a < 3; ++a) {
    face[a].assign(s.size(), 0.0);
    if (d[a] < 2) continue;
    const double inv_h2 = 1.0 / (g.spacing[a] * g.spacing[a]);
    for (std::size_t k = 0; k < d[2]; ++k) {
      for (std::size_t j = 0; j < d[1]; ++j) {
        for (std::size_t i = 0; i < d[0]; ++i) {
          const std::array<std::size_t, 3> c{i, j, k};
          if (c[a] + 1 >= d[a]) continue;
          const std::size_t v = s.index(i, j, k);
          face[a][v] = harmonic(diffusivity[v], diffusivity[v + stride[a]]) * inv_h2;
        }
      }
    }
  }

  auto vals = s.values();
  std::vector<double> next(vals.begin(), vals.end());
  for (std::size_t it = 0; it < substeps; ++it) {
    for (int a = 0; a < 3; ++a) {
      const auto& fa = face[a];
      const std::size_t st = stride[a];
      for (std::size_t v = 0; v < vals.size(); ++v) {
        if (fa[v] == 0.0) continue;
        const double flux = h * (fa[v] * (vals[v + st] - vals[v]));
        next[v] += flux;
        next[v + st] -= flux;
      }
    }
    std::copy(next.begin(), next.end(), vals.begin());
  }
}

SpeciesState step(const SpeciesState& state, const TissueCoefficients& coeffs, const GrowthParams& params,
                  double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) usage_error("step: dt must be positive and finite");
  require_same_geometry(state.p, coeffs.diff_p, "step");
  SpeciesState next = state;
  diffuse(next.p, coeffs.diff_p, dt, params.cfl_safety);
  diffuse(next.i, coeffs.diff_i, dt, params.cfl_safety);
  react_and_clip(next, coeffs.growth_scale, params, dt);
  next.t = state.t + dt;
  check_finite_state(next, dt, coeffs);
  return next;
}

LabelVolume species_to_labels(const SpeciesState& state, const GrowthParams& params) {
  LabelVolume out(state.p.geometry(), label::kBackground);
  for (std::size_t v = 0; v < out.size(); ++v) {
    if (state.n[v] >= params.tau_n) {
      out[v] = label::kNecrotic;
    } else if (state.p[v] >= params.tau_p) {
      out[v] = label::kEnhancing;
    } else if (state.i[v] >= params.tau_i) {
      out[v] = label::kEdema;
    }
  }
  return out;
}

double total_mass(const Field& f) {
  double sum = 0.0;
  for (double v : f.values()) sum += v;
  return sum * f.geometry().voxel_volume();
}

MassSample masses(const SpeciesState& s) { return {s.t, total_mass(s.p), total_mass(s.i), total_mass(s.n)}; }

GrowthResult simulate(const LabelVolume& labels, const GrowthParams& params) {
  const auto& g = labels.geometry();
  params.validate(g);
  const TissueCoefficients coeffs = derive_tissue_coefficients(labels, params);

  const std::size_t seed_voxel = labels.index(static_cast<std::size_t>(std::lround(params.seed_center[0])),
                                              static_cast<std::size_t>(std::lround(params.seed_center[1])),
                                              static_cast<std::size_t>(std::lround(params.seed_center[2])));
  if (!(coeffs.diff_p[seed_voxel] > 0.0)) {
    usage_error("tumor seed placed in zero-diffusivity tissue (label " + std::to_string(labels[seed_voxel]) + ")");
  }

  GrowthResult result;
  SpeciesState state = seed_tumor(g, params);
  result.mass_series.push_back(masses(state));

  const double dt_max = stable_dt(coeffs, params);
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(params.t_final / dt_max - 1e-9)));
  const double dt = params.t_final / static_cast<double>(steps);
  for (std::size_t s = 1; s <= steps; ++s) {
    state = step(state, coeffs, params, dt);
    state.t = params.t_final * static_cast<double>(s) / static_cast<double>(steps);
    if (s % static_cast<std::size_t>(params.record_every) == 0 || s == steps) {
      result.mass_series.push_back(masses(state));
    }
  }
  result.tumor_labels = species_to_labels(state, params);
  result.final = std::move(state);
  return result;
}

}  // namespace tumorsynth::growth
