#include <cmath>
#include <numbers>

#include "doctest.h"
#include "tumorsynth/growth.hpp"
#include "tumorsynth/phantom.hpp"
#include "tumorsynth/rng.hpp"

using namespace tumorsynth;
using namespace tumorsynth::growth;

namespace {

/// White-matter voxel closest to the grid center.
std::array<double, 3> white_matter_seed(const LabelVolume& labels) {
  const auto d = labels.geometry().dims;
  std::array<double, 3> best{};
  double best_d = 1e300;
  for (std::size_t z = 0; z < d[2]; ++z)
    for (std::size_t y = 0; y < d[1]; ++y)
      for (std::size_t x = 0; x < d[0]; ++x) {
        if (labels(x, y, z) != label::kWhite) continue;
        const double dx = x - d[0] / 2.0, dy = y - d[1] / 2.0, dz = z - d[2] / 2.0;
        const double r = dx * dx + dy * dy + dz * dz;
        if (r < best_d) {
          best_d = r;
          best = {double(x), double(y), double(z)};
        }
      }
  return best;
}

GrowthParams no_reactions() {
  GrowthParams p;
  p.rho_p = p.rho_i = p.alpha_pi = p.beta_ip = p.gamma = 0.0;
  return p;
}

double sum(const Field& f) {
  double s = 0;
  for (double v : f.values()) s += v;
  return s;
}

}  // namespace

TEST_SUITE("growth") {
  TEST_CASE("tissue coefficients follow the label table") {
    GrowthParams p;
    LabelVolume l(cube_geometry(2));
    const std::uint8_t labels[8] = {0, 5, 6, 7, 8, 1, 2, 4};
    for (int n = 0; n < 8; ++n) l[n] = labels[n];
    const auto c = derive_tissue_coefficients(l, p);
    CHECK(c.diff_p[0] == 0.0);
    CHECK(c.diff_p[1] == 0.0);
    CHECK(c.diff_p[2] == doctest::Approx(0.013));
    CHECK(c.diff_p[3] == 0.13);
    CHECK(c.diff_p[4] == 0.13);
    for (int n = 5; n < 8; ++n) CHECK(c.diff_p[n] == 0.13);
    for (int n = 0; n < 8; ++n) {
      CHECK(c.diff_i[n] == doctest::Approx(5.0 * c.diff_p[n]));
      CHECK(c.growth_scale[n] == (n < 2 ? 0.0 : 1.0));
    }

    const auto csf = derive_tissue_coefficients(LabelVolume(cube_geometry(3), label::kCsf), p);
    CHECK(sum(csf.diff_p) == 0.0);
    CHECK(sum(csf.diff_i) == 0.0);
  }

  TEST_CASE("seed is a truncated Gaussian with the analytic mass") {
    GrowthParams p;
    p.seed_center = {20, 20, 20};
    p.seed_sigma = 4.0;
    p.seed_amplitude = 0.5;
    const auto s = seed_tumor(cube_geometry(41), p);
    CHECK(s.p(20, 20, 20) == 0.5);
    CHECK(sum(s.i) == 0.0);
    CHECK(sum(s.n) == 0.0);
    for (double v : s.p.values()) CHECK((v == 0.0 || v >= 1e-6));
    const double analytic = 0.5 * std::pow(2 * std::numbers::pi, 1.5) * 64.0;
    CHECK(std::abs(total_mass(s.p) - analytic) / analytic < 0.01);

    p.seed_amplitude = 0.0;
    p.seed_center = {4, 4, 4};
    CHECK(sum(seed_tumor(cube_geometry(8), p).p) == 0.0);

    p.seed_center = {50, 0, 0};
    CHECK_THROWS_AS(seed_tumor(cube_geometry(8), p), Error);
  }

  TEST_CASE("pure diffusion conserves mass with no-flux tissue boundaries") {
    const LabelVolume labels = phantom::healthy_labels(cube_geometry(32, 5.0), 0);
    GrowthParams p = no_reactions();
    p.seed_center = {16, 16, 16};
    p.seed_sigma = 10.0;
    const auto coeffs = derive_tissue_coefficients(labels, p);
    SpeciesState s = seed_tumor(labels.geometry(), p);
    s.i = s.p;
    const double dt = stable_dt(coeffs, p);
    double before = total_mass(s.p);
    for (int n = 0; n < 100; ++n) {
      s = step(s, coeffs, p, dt);
      const double after = total_mass(s.p);
      CHECK(std::abs(after - before) / before < 1e-9);
      before = after;
    }
  }

  TEST_CASE("explicit Euler logistic step on a single voxel") {
    GrowthParams p = no_reactions();
    p.d_w = 0.0;
    p.rho_p = 0.1;
    p.c_h = 0.99;
    p.sigma_h = 0.001;
    LabelVolume l(cube_geometry(1), label::kWhite);
    const auto coeffs = derive_tissue_coefficients(l, p);
    SpeciesState s{Field(l.geometry(), 0.1), Field(l.geometry(), 0.0), Field(l.geometry(), 0.0), 0.0};
    const double dt = 0.7;
    const auto next = step(s, coeffs, p, dt);
    CHECK(next.p[0] == doctest::Approx(0.1 + dt * 0.1 * 0.1 * 0.9).epsilon(1e-12));
    CHECK(next.t == dt);
  }

  TEST_CASE("clipping rescales only the mobile species") {
    GrowthParams p = no_reactions();
    p.d_w = 0.0;
    LabelVolume l(cube_geometry(1), label::kWhite);
    const auto coeffs = derive_tissue_coefficients(l, p);
    SpeciesState s{Field(l.geometry(), 0.6), Field(l.geometry(), 0.3), Field(l.geometry(), 0.4), 0.0};
    const auto next = step(s, coeffs, p, 0.1);
    CHECK(next.n[0] == 0.4);
    CHECK(next.p[0] + next.i[0] + next.n[0] == doctest::Approx(1.0));
    CHECK(next.p[0] / next.i[0] == doctest::Approx(2.0));
  }

  TEST_CASE("zero-diffusivity voxels never receive mass by diffusion") {
    LabelVolume l(cube_geometry(12), label::kWhite);
    for (std::size_t k = 0; k < 12; ++k)
      for (std::size_t j = 0; j < 12; ++j) l(6, j, k) = label::kCsf;
    GrowthParams p = no_reactions();
    const auto coeffs = derive_tissue_coefficients(l, p);
    SpeciesState s{Field(l.geometry()), Field(l.geometry()), Field(l.geometry()), 0.0};
    s.p(5, 6, 6) = 0.8;
    s.i(5, 6, 6) = 0.1;
    const double dt = stable_dt(coeffs, p);
    for (int n = 0; n < 50; ++n) s = step(s, coeffs, p, dt);
    for (std::size_t k = 0; k < 12; ++k)
      for (std::size_t j = 0; j < 12; ++j)
        for (std::size_t i = 6; i < 12; ++i) {
          CHECK(s.p(i, j, k) == 0.0);
          CHECK(s.i(i, j, k) == 0.0);
        }
  }

  TEST_CASE("heat kernel on a small grid") {
    const std::size_t n = 40;
    LabelVolume l(cube_geometry(n), label::kWhite);
    GrowthParams p = no_reactions();
    p.seed_center = {20, 20, 20};
    p.seed_sigma = 3.0;
    p.t_final = 30.0;
    const auto r = simulate(l, p);
    const double var = 9.0 + 2 * p.d_w * p.t_final;
    const double amp = p.seed_amplitude * std::pow(9.0 / var, 1.5);
    double err = 0, ref = 0;
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) {
          const double d2 = (i - 20.0) * (i - 20.0) + (j - 20.0) * (j - 20.0) + (k - 20.0) * (k - 20.0);
          const double exact = amp * std::exp(-d2 / (2 * var));
          err += std::pow(r.final.p(i, j, k) - exact, 2);
          ref += exact * exact;
        }
    CHECK(std::sqrt(err / ref) < 0.02);
  }

  TEST_CASE("species to labels priority") {
    GrowthParams p;
    SpeciesState s{Field(cube_geometry(2)), Field(cube_geometry(2)), Field(cube_geometry(2)), 0.0};
    CHECK(std::all_of(species_to_labels(s, p).values().begin(), species_to_labels(s, p).values().end(),
                      [](auto v) { return v == 0; }));
    s.n[0] = 0.9;
    s.p[0] = 0.9;
    s.p[1] = 0.5;
    s.i[2] = 0.05;
    s.i[3] = 0.01;
    const auto l = species_to_labels(s, p);
    CHECK(l[0] == 1);
    CHECK(l[1] == 4);
    CHECK(l[2] == 2);
    CHECK(l[3] == 0);

    p.tau_p = p.tau_i = p.tau_n = 0.5;
    SpeciesState d{Field(cube_geometry(2)), Field(cube_geometry(2)), Field(cube_geometry(2)), 0.0};
    for (std::size_t v = 0; v < 8; ++v) (v < 4 ? d.p : d.i)[v] = 0.6;
    const auto ld = species_to_labels(d, p);
    for (std::size_t v = 0; v < 8; ++v) CHECK(ld[v] == (v < 4 ? 4 : 2));
  }

  TEST_CASE("simulate: early stop yields no labels, runs are bit identical, times increase") {
    const LabelVolume labels = phantom::healthy_labels(phantom::default_geometry(32), 0);
    GrowthParams p;
    p.seed_center = white_matter_seed(labels);
    p.seed_amplitude = 0.01;
    p.t_final = 0.5;
    const auto tiny = simulate(labels, p);
    for (auto v : tiny.tumor_labels.values()) CHECK(v == 0);

    p.seed_amplitude = 0.5;
    p.t_final = 60;
    const auto a = simulate(labels, p);
    const auto b = simulate(labels, p);
    CHECK(a.final.p == b.final.p);
    CHECK(a.final.i == b.final.i);
    CHECK(a.final.n == b.final.n);
    CHECK(a.tumor_labels == b.tumor_labels);
    REQUIRE(a.mass_series.size() >= 2);
    CHECK(a.mass_series.front().t == 0.0);
    CHECK(a.mass_series.back().t == p.t_final);
    for (std::size_t s = 1; s < a.mass_series.size(); ++s) CHECK(a.mass_series[s].t > a.mass_series[s - 1].t);
    for (auto v : a.tumor_labels.values()) CHECK((v == 0 || label::is_tumor(v)));
  }

  TEST_CASE("total tumor mass is non-decreasing along the series") {
    const LabelVolume labels = phantom::healthy_labels(phantom::default_geometry(32), 0);
    GrowthParams p;
    p.seed_center = white_matter_seed(labels);
    p.t_final = 200;
    p.record_every = 1;
    const auto r = simulate(labels, p);
    double prev = 0;
    for (const auto& m : r.mass_series) {
      const double total = m.mass_p + m.mass_i + m.mass_n;
      CHECK(total >= prev * (1 - 1e-12));
      prev = total;
    }
  }

  TEST_CASE("seeding in zero-diffusivity tissue is rejected") {
    LabelVolume l(cube_geometry(8), label::kCsf);
    l(1, 1, 1) = label::kWhite;
    GrowthParams p;
    p.seed_center = {4, 4, 4};
    CHECK_THROWS_AS(simulate(l, p), Error);
  }

  TEST_CASE("invalid parameters are usage errors") {
    GrowthParams p;
    p.gamma = -1;
    try {
      p.validate();
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Usage);
    }
  }
}
