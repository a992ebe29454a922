#include "tumorsynth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tumorsynth/filters.hpp"
#include "tumorsynth/rng.hpp"

namespace tumorsynth::synth {

void IntensityModel::set(std::uint8_t label, Modality m, ClassStats s) {
  if (!label::is_tumor(label) && !label::is_healthy(label)) {
    usage_error("intensity model label " + std::to_string(label) + " is not a tissue or tumor class");
  }
  if (!(s.std >= 0.0) || !std::isfinite(s.mean) || !std::isfinite(s.std)) {
    usage_error("intensity model entry " + std::to_string(label) + "/" + std::string(name(m)) +
                " needs a finite mean and std >= 0");
  }
  table_[{label, m}] = s;
}

const ClassStats& IntensityModel::at(std::uint8_t label, Modality m) const {
  const auto it = table_.find({label, m});
  if (it == table_.end()) {
    data_error("intensity model has no entry for label " + std::to_string(label) + " / " + std::string(name(m)));
  }
  return it->second;
}

bool IntensityModel::contains(std::uint8_t label, Modality m) const { return table_.count({label, m}) != 0; }

void IntensityModel::require_complete() const {
  for (std::uint8_t l : kLabels) {
    for (Modality m : kModalities) at(l, m);
  }
}

void SynthParams::validate() const {
  for (double v : {pv_sigma, noise_std_frac, bias_amplitude, bias_sigma}) {
    if (!(v >= 0.0) || !std::isfinite(v)) usage_error("synthesis parameters must be finite and >= 0");
  }
}

IntensityModel estimate_intensity_model(std::span<const MultimodalCase> cases) {
  struct Acc {
    std::size_t n = 0;
    double sum = 0.0;
  };
  std::array<std::array<Acc, 4>, 9> acc{};
  for (const auto& c : cases) {
    c.validate();
    for (Modality m : kModalities) {
      const auto& vol = c.modality(m);
      for (std::size_t v = 0; v < vol.size(); ++v) {
        auto& a = acc[c.seg[v]][static_cast<int>(m)];
        ++a.n;
        a.sum += vol[v];
      }
    }
  }
  // Second pass for a numerically stable variance.
  std::array<std::array<double, 4>, 9> ss{};
  for (const auto& c : cases) {
    for (Modality m : kModalities) {
      const auto& vol = c.modality(m);
      for (std::size_t v = 0; v < vol.size(); ++v) {
        const auto& a = acc[c.seg[v]][static_cast<int>(m)];
        const double r = vol[v] - a.sum / static_cast<double>(a.n);
        ss[c.seg[v]][static_cast<int>(m)] += r * r;
      }
    }
  }

  IntensityModel model;
  for (std::uint8_t l : IntensityModel::kLabels) {
    for (Modality m : kModalities) {
      const auto& a = acc[l][static_cast<int>(m)];
      if (a.n == 0) {
        data_error("intensity model: label " + std::to_string(l) + " / " + std::string(name(m)) +
                   " is not observed in the corpus");
      }
      const double mean = a.sum / static_cast<double>(a.n);
      const double var = a.n > 1 ? ss[l][static_cast<int>(m)] / static_cast<double>(a.n - 1) : 0.0;
      model.set(l, m, {mean, std::sqrt(var)});
    }
  }
  return model;
}

Field bias_field(const GridGeometry& g, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  Field b(g, 0.0);
  for (double& v : b.values()) v = rng.normal();
  gaussian_smooth_inplace(b, sigma);
  double lo = b[0], hi = b[0];
  for (double v : b.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) return Field(g, 0.0);
  for (double& v : b.values()) v = 2.0 * (v - lo) / (hi - lo) - 1.0;
  return b;
}

MultimodalCase synthesize(const LabelVolume& labels, const growth::SpeciesState* species, const IntensityModel& model,
                          const SynthParams& params, const std::string& id) {
  params.validate();
  check_labels(labels);
  if (species) require_same_geometry(labels, species->p, "synthesize");
  const auto& g = labels.geometry();

  std::vector<std::uint8_t> present;
  for (std::uint8_t l : IntensityModel::kLabels) {
    if (std::find(labels.values().begin(), labels.values().end(), l) != labels.values().end()) present.push_back(l);
  }
  for (std::uint8_t l : present) {
    for (Modality m : kModalities) model.at(l, m);
  }

  // Partial-volume weights: smoothed indicators renormalized inside the brain.
  std::vector<Field> weight;
  for (std::uint8_t l : present) {
    Field ind(g, 0.0);
    for (std::size_t v = 0; v < labels.size(); ++v) ind[v] = labels[v] == l ? 1.0 : 0.0;
    gaussian_smooth_inplace(ind, params.pv_sigma);
    weight.push_back(std::move(ind));
  }
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v] == label::kBackground) continue;
    double total = 0.0;
    for (const auto& w : weight) total += w[v];
    for (auto& w : weight) w[v] /= total;
  }

  MultimodalCase out;
  out.id = id;
  out.seg = labels;
  for (Modality m : kModalities) {
    const auto mi = static_cast<std::uint64_t>(m);
    Rng noise(mix_seed(params.rng_seed, 2 * mi));
    Field bias = params.bias_amplitude > 0.0 ? bias_field(g, params.bias_sigma, mix_seed(params.rng_seed, 2 * mi + 1))
                                             : Field(g, 0.0);
    std::vector<ClassStats> stats;
    for (std::uint8_t l : present) stats.push_back(model.at(l, m));
    ScalarVolume vol(g, 0.0f);
    for (std::size_t v = 0; v < labels.size(); ++v) {
      if (labels[v] == label::kBackground) continue;
      double mean = 0.0, sd = 0.0;
      for (std::size_t c = 0; c < present.size(); ++c) {
        const double w = weight[c][v];
        if (w == 0.0) continue;
        mean += w * stats[c].mean;
        sd += w * stats[c].std;
      }
      double value = mean;
      if (params.noise_std_frac > 0.0) value += noise.normal() * sd * params.noise_std_frac;
      if (params.bias_amplitude > 0.0) value *= 1.0 + params.bias_amplitude * bias[v];
      vol[v] = static_cast<float>(value);
    }
    out.modality(m) = std::move(vol);
  }
  return out;
}

}  // namespace tumorsynth::synth
