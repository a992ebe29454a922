#include "tumorsynth/phantom.hpp"

#include <cmath>
#include <numbers>

#include "tumorsynth/growth.hpp"
#include "tumorsynth/rng.hpp"

namespace tumorsynth::phantom {
namespace {

struct Ellipsoid {
  std::array<double, 3> center;  // mm
  std::array<double, 3> radii;   // mm

  double level(const std::array<double, 3>& p) const {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double u = (p[a] - center[a]) / radii[a];
      s += u * u;
    }
    return std::sqrt(s);
  }
};

synth::IntensityModel model_from(const double (&means)[7][4], double rel_std) {
  synth::IntensityModel m;
  for (std::size_t l = 0; l < synth::IntensityModel::kLabels.size(); ++l) {
    for (Modality mod : kModalities) {
      const double mean = means[l][static_cast<int>(mod)];
      m.set(synth::IntensityModel::kLabels[l], mod, {mean, rel_std * mean});
    }
  }
  return m;
}

}  // namespace

GridGeometry default_geometry(std::size_t size) {
  GridGeometry g = cube_geometry(size, 160.0 / static_cast<double>(size));
  return g;
}

LabelVolume healthy_labels(const GridGeometry& g, std::uint64_t variant) {
  double scale[3] = {1.0, 1.0, 1.0};
  double shift[3] = {0.0, 0.0, 0.0};
  double phase = 0.0;
  if (variant != 0) {
    Rng rng(mix_seed(0x5eed'a71a5ULL, variant));
    for (int a = 0; a < 3; ++a) scale[a] = rng.uniform(0.93, 1.07);
    for (int a = 0; a < 3; ++a) shift[a] = rng.uniform(-3.0, 3.0);
    phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  // Anatomy is laid out in mm around the grid center; the whole phantom is
  // scaled with the field of view so small test grids stay meaningful.
  const double fov = std::min({g.dims[0] * g.spacing[0], g.dims[1] * g.spacing[1], g.dims[2] * g.spacing[2]});
  const double unit = fov / 160.0;
  const Ellipsoid brain{{shift[0], shift[1], shift[2]}, {60 * scale[0] * unit, 70 * scale[1] * unit, 55 * scale[2] * unit}};
  const std::array<Ellipsoid, 2> ventricles{
      Ellipsoid{{shift[0] - 9 * unit, shift[1] + 5 * unit, shift[2] + 5 * unit}, {5 * unit, 18 * unit, 9 * unit}},
      Ellipsoid{{shift[0] + 9 * unit, shift[1] + 5 * unit, shift[2] + 5 * unit}, {5 * unit, 18 * unit, 9 * unit}}};
  const std::array<Ellipsoid, 2> nuclei{
      Ellipsoid{{shift[0] - 20 * unit, shift[1] - 8 * unit, shift[2] - 6 * unit}, {11 * unit, 14 * unit, 10 * unit}},
      Ellipsoid{{shift[0] + 20 * unit, shift[1] - 8 * unit, shift[2] - 6 * unit}, {11 * unit, 14 * unit, 10 * unit}}};

  LabelVolume out(g, label::kBackground);
  for (std::size_t k = 0; k < g.dims[2]; ++k) {
    for (std::size_t j = 0; j < g.dims[1]; ++j) {
      for (std::size_t i = 0; i < g.dims[0]; ++i) {
        const std::array<double, 3> p{(i - 0.5 * (g.dims[0] - 1)) * g.spacing[0],
                                      (j - 0.5 * (g.dims[1] - 1)) * g.spacing[1],
                                      (k - 0.5 * (g.dims[2] - 1)) * g.spacing[2]};
        const double r = brain.level(p);
        if (r > 1.0) continue;
        const double theta = std::atan2(p[1] - brain.center[1], p[0] - brain.center[0]);
        const double psi = std::atan2(p[2] - brain.center[2], std::hypot(p[0] - brain.center[0], p[1] - brain.center[1]));
        const double fold = 0.04 * std::sin(7.0 * theta + phase) * std::cos(5.0 * psi);
        std::uint8_t l = label::kWhite;
        if (r > 0.92) {
          l = label::kCsf;
        } else if (r > 0.76 + fold) {
          l = label::kGray;
        }
        for (const auto& e : nuclei) {
          if (e.level(p) <= 1.0) l = label::kGlial;
        }
        for (const auto& e : ventricles) {
          if (e.level(p) <= 1.0) l = label::kCsf;
        }
        out(i, j, k) = l;
      }
    }
  }
  return out;
}

synth::IntensityModel reference_model() {
  // Rows follow IntensityModel::kLabels (1,2,4,5,6,7,8); columns t1,t1ce,t2,flair.
  static const double means[7][4] = {
      {250, 300, 1400, 500},   // necrotic
      {500, 560, 1300, 1200},  // edema
      {700, 1300, 1000, 900},  // enhancing
      {300, 320, 1500, 200},   // CSF
      {600, 640, 900, 700},    // gray
      {850, 880, 650, 550},    // white
      {700, 720, 800, 650},    // glial
  };
  return model_from(means, 0.06);
}

synth::IntensityModel synthetic_model() {
  static const double means[7][4] = {
      {0.20, 0.25, 0.70, 0.35},
      {0.40, 0.42, 0.65, 0.60},
      {0.55, 0.80, 0.55, 0.50},
      {0.25, 0.25, 0.75, 0.20},
      {0.45, 0.46, 0.50, 0.45},
      {0.60, 0.60, 0.40, 0.40},
      {0.52, 0.53, 0.45, 0.42},
  };
  return model_from(means, 0.04);
}

reg::Atlas make_atlas(const GridGeometry& g, std::uint64_t variant, const std::string& id) {
  reg::Atlas a;
  a.id = id;
  a.labels = healthy_labels(g, variant);
  synth::SynthParams sp;
  sp.noise_std_frac = 0.3;
  sp.bias_amplitude = 0.0;
  sp.rng_seed = mix_seed(0xa71a5ULL, variant);
  a.t1 = synth::synthesize(a.labels, nullptr, reference_model(), sp, id).t1;
  return a;
}

std::vector<std::size_t> voxels_with_label(const LabelVolume& labels, std::uint8_t l) {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v] == l) out.push_back(v);
  }
  return out;
}

MultimodalCase make_reference_case(const GridGeometry& g, std::uint64_t variant, const std::string& id) {
  const LabelVolume healthy = healthy_labels(g, variant);
  Rng rng(mix_seed(0x4ea1ULL, variant));
  const auto white = voxels_with_label(healthy, label::kWhite);
  if (white.empty()) data_error("phantom has no white matter to seed a tumor in");
  const std::size_t v = white[rng.below(white.size())];
  const auto& d = g.dims;

  growth::GrowthParams gp;
  gp.seed_center = {static_cast<double>(v % d[0]), static_cast<double>((v / d[0]) % d[1]),
                    static_cast<double>(v / (d[0] * d[1]))};
  gp.t_final = 200.0;
  const auto grown = growth::simulate(healthy, gp);

  LabelVolume seg = healthy;
  for (std::size_t n = 0; n < seg.size(); ++n) {
    if (grown.tumor_labels[n] != label::kBackground && seg[n] != label::kBackground) seg[n] = grown.tumor_labels[n];
  }
  synth::SynthParams sp;
  sp.rng_seed = mix_seed(0x4ea1ULL, variant + 1);
  return synth::synthesize(seg, &grown.final, reference_model(), sp, id);
}

}  // namespace tumorsynth::phantom
