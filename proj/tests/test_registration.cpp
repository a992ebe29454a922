#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "support.hpp"
#include "tumorsynth/growth.hpp"
#include "tumorsynth/phantom.hpp"
#include "tumorsynth/pipeline.hpp"
#include "tumorsynth/registration.hpp"

using namespace tumorsynth;
using namespace tumorsynth::reg;

namespace {

double median_interior_norm(const DeformationField& phi, std::size_t margin) {
  const auto& d = phi.geometry().dims;
  std::vector<double> norms;
  for (std::size_t k = margin; k + margin < d[2]; ++k)
    for (std::size_t j = margin; j + margin < d[1]; ++j)
      for (std::size_t i = margin; i + margin < d[0]; ++i) {
        const std::size_t v = phi.dx.index(i, j, k);
        norms.push_back(std::sqrt(phi.dx[v] * phi.dx[v] + phi.dy[v] * phi.dy[v] + phi.dz[v] * phi.dz[v]));
      }
  std::nth_element(norms.begin(), norms.begin() + norms.size() / 2, norms.end());
  return norms[norms.size() / 2];
}

RegistrationParams fast_params() {
  RegistrationParams p;
  p.levels = 2;
  p.iters_per_level = {60, 40};
  return p;
}

}  // namespace

TEST_SUITE("registration") {
  TEST_CASE("zero velocity exponentiates to the identity") {
    const auto phi = exponentiate(VelocityField::zeros(cube_geometry(8)));
    CHECK(phi.max_norm() == 0.0);
    CHECK(phi.min_jacobian == 1.0);
  }

  TEST_CASE("constant velocity exponentiates to a translation") {
    const GridGeometry g = cube_geometry(16);
    VelocityField v = VelocityField::zeros(g);
    for (auto& x : v.vx.values()) x = 1.7;
    const auto phi = exponentiate(v);
    for (std::size_t k = 3; k < 13; ++k)
      for (std::size_t j = 3; j < 13; ++j)
        for (std::size_t i = 3; i < 12; ++i) {
          CHECK(std::abs(phi.dx(i, j, k) - 1.7) < 1e-4);
          CHECK(std::abs(phi.dy(i, j, k)) < 1e-12);
        }
  }

  TEST_CASE("composition adds translations") {
    const GridGeometry g = cube_geometry(10);
    DeformationField a = DeformationField::identity(g), b = DeformationField::identity(g);
    for (auto& x : a.dx.values()) x = 0.25;
    for (auto& x : b.dy.values()) x = -0.5;
    const auto c = compose(a, b);
    CHECK(c.dx(5, 5, 5) == doctest::Approx(0.25));
    CHECK(c.dy(5, 5, 5) == doctest::Approx(-0.5));
  }

  TEST_CASE("smooth fields stay diffeomorphic and invert by negation") {
    const GridGeometry g = cube_geometry(24);
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      CAPTURE(seed);
      const auto v = testing::random_smooth_velocity(g, 1.0 + static_cast<double>(seed % 5), 2.0, seed);
      const auto fwd = exponentiate(v);
      const auto inv = exponentiate(testing::negate(v));
      CHECK(fwd.min_jacobian > 0.0);
      CHECK(inv.min_jacobian > 0.0);
      CHECK(median_interior_norm(compose(fwd, inv), 3) < 0.1);
    }
  }

  TEST_CASE("warp identities") {
    Rng rng(2);
    ScalarVolume s(cube_geometry(6));
    for (auto& x : s.values()) x = static_cast<float>(rng.uniform());
    const auto id = DeformationField::identity(s.geometry());
    CHECK(warp(s, id) == s);

    LabelVolume l(cube_geometry(5));
    for (std::size_t n = 0; n < l.size(); ++n) l[n] = label::kHealthy[n % 4];
    const auto id5 = DeformationField::identity(l.geometry());
    CHECK(warp(l, id5) == l);
    DeformationField shift = id5;
    for (auto& x : shift.dx.values()) x = 1.0;
    const auto moved = warp(l, shift);
    for (std::size_t k = 0; k < 5; ++k)
      for (std::size_t j = 0; j < 5; ++j)
        for (std::size_t i = 0; i < 5; ++i) CHECK(moved(i, j, k) == l(std::min<std::size_t>(i + 1, 4), j, k));

    CHECK_THROWS_AS(warp(l, id5, Interp::Linear), Error);

    ScalarVolume c(cube_geometry(6), 3.25f);
    const auto v = testing::random_smooth_velocity(c.geometry(), 2.0, 1.5, 9);
    const auto out = warp(c, exponentiate(v));
    for (float x : out.values()) CHECK(x == doctest::Approx(3.25f));
  }

  TEST_CASE("demons force: zero residual, flat gradient, ramp sign") {
    const std::size_t n = 16;
    GridGeometry g;
    g.dims = {n, 4, 4};
    Field m(g), f(g);
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t i = 0; i < n; ++i) {
          m(i, j, k) = static_cast<double>(i) / n;
          f(i, j, k) = (static_cast<double>(i) - 1.0) / n;
        }
    Mask valid(g, 1);
    const auto same = demons_force(m, m, valid, 1e-6, 1.0);
    CHECK(same.max_norm() == 0.0);

    const auto u = demons_force(f, m, valid, 1e-6, 1.0);
    // (f-m) = -1/N, grad m = 1/N: u = (-1/N^2) / (2/N^2 + eps).
    const double expected = (-1.0 / (n * n)) / (2.0 / (n * n) + 1e-6);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      CHECK(u.vx(i, 1, 1) == doctest::Approx(expected).epsilon(1e-9));
      CHECK(u.vx(i, 1, 1) < 0.0);
      CHECK(std::abs(u.vx(i, 1, 1)) <= 1.0);
    }
    // Moving m by u toward the fixed image reduces the residual.
    CHECK(std::abs(m(5, 1, 1) + u.vx(5, 1, 1) / n - f(5, 1, 1)) < std::abs(m(5, 1, 1) - f(5, 1, 1)));

    Field flat(g, 0.5);
    const auto z = demons_force(f, flat, valid, 1e-6, 1.0);
    CHECK(z.max_norm() == 0.0);

    Mask none(g, 0);
    CHECK(demons_force(f, m, none, 1e-6, 1.0).max_norm() == 0.0);

    const auto capped = demons_force(f, m, valid, 1e-6, 0.1);
    CHECK(capped.max_norm() <= 0.1 + 1e-12);
  }

  TEST_CASE("registering an image to itself leaves the velocity at zero") {
    const auto atlas = phantom::make_atlas(phantom::default_geometry(32), 1, "a");
    const auto r = register_images(atlas.t1, atlas.t1, Mask(atlas.t1.geometry(), 0), fast_params());
    CHECK(r.similarity_final < 1e-10);
    CHECK(r.velocity.max_norm() < 0.05);
    CHECK(r.min_jacobian > 0.0);
  }

  TEST_CASE("registration recovers a known smooth warp") {
    const auto atlas = phantom::make_atlas(phantom::default_geometry(32), 0, "a");
    const auto w = testing::random_smooth_velocity(atlas.t1.geometry(), 2.0, 3.0, 21);
    const ScalarVolume moving = warp(atlas.t1, exponentiate(w));
    const auto r = register_images(atlas.t1, moving, Mask(atlas.t1.geometry(), 0), fast_params());
    CHECK(r.similarity_final < 0.25 * r.similarity_initial);
    CHECK(r.min_jacobian > 0.0);
    CHECK(r.iterations_run == 100);
  }

  TEST_CASE("label fusion rules") {
    GridGeometry g;
    g.dims = {4, 1, 1};
    auto vol = [&](std::array<std::uint8_t, 4> v) { return LabelVolume(g, std::vector<std::uint8_t>(v.begin(), v.end())); };

    const std::vector<LabelVolume> one{vol({0, 5, 6, 8})};
    const std::vector<double> s1{0.3};
    CHECK(fuse_labels(one, s1) == one[0]);

    const std::vector<LabelVolume> three{vol({6, 5, 7, 0}), vol({6, 6, 7, 0}), vol({7, 5, 6, 8})};
    const std::vector<double> s3{0.2, 0.1, 0.3};
    const auto f3 = fuse_labels(three, s3);
    CHECK(f3[0] == 6);
    CHECK(f3[1] == 5);
    CHECK(f3[2] == 7);
    CHECK(f3[3] == 0);

    const std::vector<LabelVolume> two{vol({6, 6, 6, 6}), vol({7, 7, 7, 7})};
    CHECK(fuse_labels(two, std::vector<double>{0.01, 0.5})[0] == 6);
    CHECK(fuse_labels(two, std::vector<double>{0.5, 0.01})[0] == 7);
    CHECK(fuse_labels(two, std::vector<double>{0.2, 0.2})[0] == 6);

    const std::vector<LabelVolume> with_bg{vol({0, 0, 0, 0}), vol({0, 0, 0, 0}), vol({7, 0, 0, 0})};
    const std::vector<double> s_bg{0.1, 0.1, 0.1};
    CHECK(fuse_labels(with_bg, s_bg)[0] == 0);
    CHECK(fuse_labels(with_bg, s_bg, false)[0] == 7);
    CHECK(fuse_labels(with_bg, s_bg, false)[1] == 0);

    const std::vector<LabelVolume> tumor{vol({4, 4, 1, 2}), vol({6, 6, 6, 6})};
    const auto ft = fuse_labels(tumor, std::vector<double>{0.0, 1.0});
    for (auto l : ft.values()) CHECK(l == 6);

    CHECK_THROWS_AS(fuse_labels(std::vector<LabelVolume>{}, std::vector<double>{}), Error);
  }

  TEST_CASE("label fusion is permutation invariant") {
    Rng rng(8);
    const GridGeometry g = cube_geometry(6);
    std::vector<LabelVolume> maps;
    std::vector<double> sims;
    for (int a = 0; a < 5; ++a) {
      LabelVolume l(g);
      for (auto& x : l.values()) x = rng.uniform() < 0.2 ? 0 : label::kHealthy[rng.below(4)];
      maps.push_back(l);
      sims.push_back(rng.uniform());
    }
    const auto base = fuse_labels(maps, sims);
    std::vector<std::size_t> order(maps.size());
    std::iota(order.begin(), order.end(), 0);
    for (int trial = 0; trial < 10; ++trial) {
      for (std::size_t n = order.size() - 1; n > 0; --n) std::swap(order[n], order[rng.below(n + 1)]);
      std::vector<LabelVolume> pm;
      std::vector<double> ps;
      for (auto o : order) {
        pm.push_back(maps[o]);
        ps.push_back(sims[o]);
      }
      CHECK(fuse_labels(pm, ps) == base);
    }
  }

  TEST_CASE("enrichment with the case itself as atlas reproduces the atlas labels") {
    const auto atlas = phantom::make_atlas(phantom::default_geometry(24), 2, "self");
    MultimodalCase c;
    c.id = "self";
    c.t1 = c.t1ce = c.t2 = c.flair = atlas.t1;
    c.seg = atlas.labels;
    const std::vector<Atlas> atlases{atlas};
    const auto r = enrich_case(c, atlases, fast_params());
    CHECK(r.seg == atlas.labels);
    REQUIRE(r.atlases.size() == 1);
    CHECK(r.atlases[0].ok);
  }

  TEST_CASE("enrichment preserves tumor voxels and covers the brain") {
    const GridGeometry g = phantom::default_geometry(24);
    MultimodalCase c = phantom::make_reference_case(g, 3, "case");
    std::vector<Atlas> atlases;
    for (int a = 0; a < 3; ++a) atlases.push_back(phantom::make_atlas(g, 10 + a, "atlas" + std::to_string(a)));
    const auto r = enrich_case(c, atlases, fast_params(), 2);
    const Mask brain = case_brain_mask(c);
    std::size_t tumor = 0;
    for (std::size_t v = 0; v < c.seg.size(); ++v) {
      if (label::is_tumor(c.seg[v])) {
        ++tumor;
        CHECK(r.seg[v] == c.seg[v]);
      } else if (brain[v]) {
        CHECK(label::is_healthy(r.seg[v]));
      } else {
        CHECK(r.seg[v] == 0);
      }
    }
    CHECK(tumor > 0);
    for (const auto& o : r.atlases) {
      CHECK(o.ok);
      CHECK(o.min_jacobian > 0.0);
    }
  }

  TEST_CASE("atlases must be healthy-only and geometry-matched") {
    auto atlas = phantom::make_atlas(phantom::default_geometry(16), 0, "a");
    atlas.labels[atlas.labels.size() / 2] = label::kEdema;
    CHECK_THROWS_AS(atlas.validate(), Error);
  }
}
