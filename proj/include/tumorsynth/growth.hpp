#pragma once

#include <array>
#include <vector>

#include "tumorsynth/volume.hpp"

namespace tumorsynth::growth {

/// Parameters of the three-species (proliferative p, infiltrative i,
/// necrotic n) reaction-diffusion model. Units: mm, days.
struct GrowthParams {
  double d_w = 0.13;       // proliferative diffusivity in white matter, mm^2/day
  double kappa_gw = 0.1;   // gray/white diffusivity ratio
  double kappa_i = 5.0;    // infiltrative diffusivity multiplier
  double rho_p = 0.1;      // logistic growth, 1/day
  double rho_i = 0.05;
  double alpha_pi = 0.05;  // p -> i conversion, 1/day
  double beta_ip = 0.01;   // i -> p conversion, 1/day
  double gamma = 0.1;      // necrosis rate, 1/day
  double c_h = 0.9;        // crowding threshold of the necrosis switch
  double sigma_h = 0.05;   // switch width
  std::array<double, 3> seed_center{0.0, 0.0, 0.0};  // voxel coordinates
  double seed_sigma = 4.0;                           // mm
  double seed_amplitude = 0.5;
  double t_final = 300.0;  // days
  double cfl_safety = 0.9;
  double tau_p = 0.4;
  double tau_i = 0.02;
  double tau_n = 0.5;
  int record_every = 10;  // steps between mass_series samples

  /// Throws Error(Usage) when a documented invariant is violated.
  void validate() const;
  void validate(const GridGeometry& g) const;
};

/// Cell volume fractions of the three species at time t (days).
struct SpeciesState {
  Field p, i, n;
  double t = 0.0;
};

struct TissueCoefficients {
  Field diff_p, diff_i;  // mm^2/day
  Field growth_scale;    // multiplier on rho
};

struct MassSample {
  double t, mass_p, mass_i, mass_n;  // mm^3
};

struct GrowthResult {
  SpeciesState final;
  LabelVolume tumor_labels;
  std::vector<MassSample> mass_series;
};

TissueCoefficients derive_tissue_coefficients(const LabelVolume& labels, const GrowthParams& params);

/// Gaussian proliferative seed; values below 1e-6 are truncated to 0.
SpeciesState seed_tumor(const GridGeometry& geom, const GrowthParams& params);

/// Largest stable explicit diffusion step for diffusivity `d_max`.
double diffusion_dt_limit(const GridGeometry& g, double d_max, double cfl_safety);

/// Largest step used by simulate(): the diffusion bound, further limited so
/// the explicit reaction update stays monotone.
double stable_dt(const TissueCoefficients& coeffs, const GrowthParams& params);

/// One split step: conservative diffusion (sub-stepped when needed), then the
/// pointwise reaction update, then clipping back onto the simplex.
SpeciesState step(const SpeciesState& state, const TissueCoefficients& coeffs, const GrowthParams& params,
                  double dt);

/// Diffusion half only, exposed for oracle tests.
void diffuse(Field& s, const Field& diffusivity, double dt, double cfl_safety);

LabelVolume species_to_labels(const SpeciesState& state, const GrowthParams& params);

GrowthResult simulate(const LabelVolume& labels, const GrowthParams& params);

double total_mass(const Field& f);

MassSample masses(const SpeciesState& s);

}  // namespace tumorsynth::growth
