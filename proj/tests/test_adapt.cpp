#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "doctest.h"
#include "tumorsynth/adapt.hpp"
#include "tumorsynth/phantom.hpp"
#include "tumorsynth/rng.hpp"
#include "tumorsynth/synth.hpp"

using namespace tumorsynth;
using namespace tumorsynth::adapt;

namespace {

Histogram random_hist(Rng& rng, std::size_t bins) {
  Histogram h{0.0, 10.0, std::vector<double>(bins)};
  for (auto& c : h.counts) c = std::floor(rng.uniform(0, 20));
  h.counts[rng.below(bins)] += 1;
  return h;
}

MultimodalCase synthetic_case(std::uint64_t variant, const synth::IntensityModel& model, std::uint64_t seed) {
  synth::SynthParams p;
  p.rng_seed = seed;
  return synth::synthesize(phantom::healthy_labels(phantom::default_geometry(24), variant), nullptr, model, p,
                           "c" + std::to_string(variant));
}

double brain_range(const MultimodalCase& c, Modality m) {
  double lo = 1e300, hi = -1e300;
  for (std::size_t v = 0; v < c.seg.size(); ++v) {
    if (!c.seg[v]) continue;
    lo = std::min<double>(lo, c.modality(m)[v]);
    hi = std::max<double>(hi, c.modality(m)[v]);
  }
  return hi - lo;
}

}  // namespace

TEST_SUITE("adapt") {
  TEST_CASE("quantiles of a constant sample are the constant") {
    const auto t = quantile_table(std::vector<double>(100, 3.5));
    CHECK(t.size() == kQuantiles);
    for (double q : t) CHECK(q == 3.5);
  }

  TEST_CASE("uniform quantiles match the analytic quantile function") {
    Rng rng(12);
    std::vector<double> s(1000000);
    for (auto& x : s) x = rng.uniform();
    const auto t = quantile_table(s);
    double worst = 0;
    for (std::size_t k = 0; k < t.size(); ++k) {
      worst = std::max(worst, std::abs(t[k] - static_cast<double>(k) / (t.size() - 1)));
      if (k) CHECK(t[k] >= t[k - 1]);
    }
    CHECK(worst < 0.01);
  }

  TEST_CASE("reference tables are monotone for random corpora") {
    std::vector<MultimodalCase> corpus{synthetic_case(1, phantom::reference_model(), 1),
                                       synthetic_case(2, phantom::reference_model(), 2)};
    const auto ref = build_reference(corpus);
    CHECK(ref.corpus_cases == 2);
    for (Modality m : kModalities) {
      const auto& t = ref.table(m);
      CHECK(std::is_sorted(t.begin(), t.end()));
    }
  }

  TEST_CASE("wasserstein1 examples and metric properties") {
    Histogram a{0, 4, {1, 2, 3, 4}};
    CHECK(wasserstein1(a, a) == 0.0);

    Histogram u{0, 10, std::vector<double>(10)}, w{0, 10, std::vector<double>(10)};
    u.counts[2] = 1;
    w.counts[7] = 3;
    CHECK(wasserstein1(u, w) == doctest::Approx(5.0).epsilon(1e-12));

    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
      const auto x = random_hist(rng, 32), y = random_hist(rng, 32), z = random_hist(rng, 32);
      CHECK(std::abs(wasserstein1(x, y) - wasserstein1(y, x)) < 1e-12);
      CHECK(wasserstein1(x, z) <= wasserstein1(x, y) + wasserstein1(y, z) + 1e-9);
      CHECK(wasserstein1(x, y) >= 0.0);
    }

    Histogram other{0, 5, std::vector<double>(32, 1.0)};
    CHECK_THROWS_AS(wasserstein1(random_hist(rng, 32), other), Error);
    Histogram empty{0, 10, std::vector<double>(32, 0.0)};
    CHECK_THROWS_AS(wasserstein1(random_hist(rng, 32), empty), Error);
  }

  TEST_CASE("quantile map is monotone and ties share one output") {
    const QuantileMap map({0, 1, 1, 1, 2}, {10, 20, 30, 40, 50});
    CHECK(map(1.0) == doctest::Approx(30.0));
    CHECK(map(0.0) == 10.0);
    CHECK(map(2.0) == 50.0);
    CHECK(map(-5.0) == 10.0);
    CHECK(map(9.0) == 50.0);
    double prev = -1e300;
    for (double x = -1; x < 3; x += 0.01) {
      CHECK(map(x) >= prev);
      prev = map(x);
    }
    const QuantileMap flat({2, 2, 2}, {0, 1, 2});
    CHECK(flat.degenerate());
    CHECK(flat(2.0) == 2.0);
  }

  TEST_CASE("self adaptation is near identity and background is untouched") {
    const auto c = synthetic_case(3, phantom::reference_model(), 7);
    const auto ref = build_reference(std::vector<MultimodalCase>{c});
    const auto [out, report] = adapt::adapt(c, ref);
    for (Modality m : kModalities) {
      const double tol = brain_range(c, m) / kQuantiles;
      for (std::size_t v = 0; v < c.seg.size(); ++v) {
        if (c.seg[v]) {
          CHECK(std::abs(out.modality(m)[v] - c.modality(m)[v]) < tol);
        } else {
          CHECK(std::memcmp(&out.modality(m)[v], &c.modality(m)[v], sizeof(float)) == 0);
        }
      }
      CHECK(report.modalities.at(m).wasserstein1_after <= report.modalities.at(m).wasserstein1_before + 1e-9);
    }
  }

  TEST_CASE("adaptation toward a disjoint reference preserves order and closes the gap") {
    const auto raw = synthetic_case(4, phantom::synthetic_model(), 11);
    std::vector<MultimodalCase> corpus{synthetic_case(5, phantom::reference_model(), 12)};
    const auto ref = build_reference(corpus);
    const auto [out, report] = adapt::adapt(raw, ref);
    std::vector<std::size_t> idx;
    for (std::size_t v = 0; v < raw.seg.size(); ++v)
      if (raw.seg[v]) idx.push_back(v);
    for (Modality m : kModalities) {
      CAPTURE(name(m));
      const auto& mr = report.modalities.at(m);
      CHECK(mr.wasserstein1_after <= 0.1 * mr.wasserstein1_before);
      CHECK_FALSE(mr.degenerate);
      const auto& a = raw.modality(m);
      const auto& b = out.modality(m);
      auto sorted = idx;
      std::sort(sorted.begin(), sorted.end(), [&](auto x, auto y) { return a[x] < a[y]; });
      bool ordered = true;
      for (std::size_t n = 1; n < sorted.size(); ++n) ordered &= b[sorted[n]] >= b[sorted[n - 1]];
      CHECK(ordered);
    }
  }

  TEST_CASE("adaptation is idempotent up to quantization") {
    const auto raw = synthetic_case(6, phantom::synthetic_model(), 13);
    const auto ref = build_reference(std::vector<MultimodalCase>{synthetic_case(7, phantom::reference_model(), 14)});
    const auto once = adapt::adapt(raw, ref).first;
    const auto twice = adapt::adapt(once, ref).first;
    for (Modality m : kModalities) {
      const double tol = brain_range(once, m) / kQuantiles;
      for (std::size_t v = 0; v < raw.seg.size(); ++v) CHECK(std::abs(twice.modality(m)[v] - once.modality(m)[v]) <= tol);
    }
  }

  TEST_CASE("degenerate sources are left unchanged and flagged") {
    MultimodalCase c;
    c.id = "flat";
    c.seg = LabelVolume(cube_geometry(6), label::kWhite);
    c.t1 = ScalarVolume(c.seg.geometry(), 5.0f);
    c.t1ce = c.t2 = c.flair = c.t1;
    const auto ref = build_reference(std::vector<MultimodalCase>{synthetic_case(8, phantom::reference_model(), 1)});
    const auto [out, report] = adapt::adapt(c, ref);
    CHECK(out.t1 == c.t1);
    CHECK(report.modalities.at(Modality::T1).degenerate);
  }
}
