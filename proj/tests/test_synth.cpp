#include <cmath>

#include "doctest.h"
#include "tumorsynth/phantom.hpp"
#include "tumorsynth/rng.hpp"
#include "tumorsynth/synth.hpp"

using namespace tumorsynth;
using namespace tumorsynth::synth;

namespace {

IntensityModel flat_model(double std_frac = 0.1) {
  IntensityModel m;
  for (std::uint8_t l : IntensityModel::kLabels)
    for (Modality mod : kModalities) {
      const double mean = 10.0 * l + static_cast<double>(mod);
      m.set(l, mod, {mean, std_frac * mean});
    }
  return m;
}

SynthParams degenerate() {
  SynthParams p;
  p.pv_sigma = 0.0;
  p.noise_std_frac = 0.0;
  p.bias_amplitude = 0.0;
  return p;
}

MultimodalCase constant_case(const LabelVolume& seg, const std::map<std::uint8_t, float>& t1) {
  MultimodalCase c;
  c.id = "c";
  c.seg = seg;
  c.t1 = ScalarVolume(seg.geometry());
  for (std::size_t v = 0; v < seg.size(); ++v) c.t1[v] = seg[v] ? t1.at(seg[v]) : 0.0f;
  c.t1ce = c.t2 = c.flair = c.t1;
  return c;
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("degenerate parameters give exact class means and zero background") {
    const LabelVolume seg = phantom::healthy_labels(phantom::default_geometry(24), 0);
    const auto model = flat_model();
    const auto c = synthesize(seg, nullptr, model, degenerate());
    for (Modality m : kModalities) {
      const auto& vol = c.modality(m);
      for (std::size_t v = 0; v < seg.size(); ++v) {
        if (seg[v] == 0) {
          CHECK(vol[v] == 0.0f);
        } else {
          CHECK(vol[v] == static_cast<float>(model.at(seg[v], m).mean));
        }
      }
    }
  }

  TEST_CASE("half-and-half volume averages to 50") {
    LabelVolume seg(cube_geometry(8), label::kGray);
    for (std::size_t v = 0; v < seg.size() / 2; ++v) seg[v] = label::kWhite;
    IntensityModel m = flat_model();
    for (Modality mod : kModalities) {
      m.set(label::kGray, mod, {0.0, 1.0});
      m.set(label::kWhite, mod, {100.0, 1.0});
    }
    const auto c = synthesize(seg, nullptr, m, degenerate());
    double sum = 0;
    for (float x : c.t2.values()) sum += x;
    CHECK(std::abs(sum / seg.size() - 50.0) < 1e-4);
  }

  TEST_CASE("same seed reproduces bits, new seed changes only the noise") {
    const LabelVolume seg = phantom::healthy_labels(phantom::default_geometry(24), 1);
    SynthParams p;
    p.rng_seed = 42;
    const auto a = synthesize(seg, nullptr, phantom::reference_model(), p);
    const auto b = synthesize(seg, nullptr, phantom::reference_model(), p);
    for (Modality m : kModalities) CHECK(a.modality(m) == b.modality(m));
    p.rng_seed = 43;
    const auto c = synthesize(seg, nullptr, phantom::reference_model(), p);
    CHECK_FALSE(a.t1 == c.t1);

    p.noise_std_frac = 0.0;
    p.bias_amplitude = 0.0;
    p.rng_seed = 1;
    const auto q1 = synthesize(seg, nullptr, phantom::reference_model(), p);
    p.rng_seed = 2;
    const auto q2 = synthesize(seg, nullptr, phantom::reference_model(), p);
    for (Modality m : kModalities) CHECK(q1.modality(m) == q2.modality(m));
  }

  TEST_CASE("outputs are finite with background exactly zero under full noise and bias") {
    const LabelVolume seg = phantom::healthy_labels(phantom::default_geometry(24), 2);
    SynthParams p;
    p.rng_seed = 5;
    p.bias_amplitude = 0.3;
    const auto c = synthesize(seg, nullptr, phantom::reference_model(), p);
    for (Modality m : kModalities)
      for (std::size_t v = 0; v < seg.size(); ++v) {
        CHECK(std::isfinite(c.modality(m)[v]));
        if (seg[v] == 0) CHECK(c.modality(m)[v] == 0.0f);
      }
  }

  TEST_CASE("bias field spans [-1, 1]") {
    const Field b = bias_field(cube_geometry(16), 4.0, 3);
    double lo = 1e9, hi = -1e9;
    for (double x : b.values()) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    CHECK(lo == doctest::Approx(-1.0));
    CHECK(hi == doctest::Approx(1.0));
  }

  TEST_CASE("missing model entries are reported") {
    const LabelVolume seg(cube_geometry(4), label::kGlial);
    IntensityModel m;
    m.set(label::kWhite, Modality::T1, {1, 0});
    CHECK_THROWS_AS(synthesize(seg, nullptr, m, degenerate()), Error);
    CHECK_THROWS_AS(m.set(label::kWhite, Modality::T1, {1, -1}), Error);
  }

  TEST_CASE("intensity model estimation") {
    LabelVolume seg(cube_geometry(4), label::kGray);
    auto c = constant_case(seg, {{label::kGray, 100.0f}});
    CHECK_THROWS_AS(estimate_intensity_model(std::vector<MultimodalCase>{c}), Error);

    // Every class present with a constant value: exact means, zero spread.
    LabelVolume all(cube_geometry(7));
    for (std::size_t v = 0; v < all.size(); ++v) all[v] = IntensityModel::kLabels[v % 7];
    std::map<std::uint8_t, float> values;
    for (std::uint8_t l : IntensityModel::kLabels) values[l] = 10.0f * l;
    const auto m = estimate_intensity_model(std::vector<MultimodalCase>{constant_case(all, values)});
    for (std::uint8_t l : IntensityModel::kLabels) {
      CHECK(m.at(l, Modality::T1).mean == doctest::Approx(10.0 * l));
      CHECK(m.at(l, Modality::Flair).std == 0.0);
    }
  }

  TEST_CASE("estimated means recover the generating normal parameters") {
    const std::size_t per_class = 100000;
    GridGeometry g;
    g.dims = {per_class, 7, 1};
    LabelVolume seg(g);
    MultimodalCase c;
    c.seg = seg;
    c.t1 = ScalarVolume(g);
    Rng rng(99);
    for (std::size_t row = 0; row < 7; ++row) {
      const std::uint8_t l = IntensityModel::kLabels[row];
      for (std::size_t x = 0; x < per_class; ++x) {
        c.seg(x, row, 0) = l;
        c.t1(x, row, 0) = static_cast<float>(100.0 * l + 7.0 * rng.normal());
      }
    }
    c.t1ce = c.t2 = c.flair = c.t1;
    const auto m = estimate_intensity_model(std::vector<MultimodalCase>{c});
    for (std::uint8_t l : IntensityModel::kLabels) {
      CHECK(std::abs(m.at(l, Modality::T1).mean - 100.0 * l) < 3 * 7.0 / std::sqrt(per_class));
      CHECK(m.at(l, Modality::T1).std == doctest::Approx(7.0).epsilon(0.02));
    }
  }
}
