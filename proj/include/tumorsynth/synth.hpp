#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>

#include "tumorsynth/case.hpp"
#include "tumorsynth/growth.hpp"
#include "tumorsynth/volume.hpp"

namespace tumorsynth::synth {

struct ClassStats {
  double mean = 0.0;
  double std = 0.0;

  friend bool operator==(const ClassStats&, const ClassStats&) = default;
};

/// Per-(label, modality) Gaussian intensity statistics. Background is
/// implicitly mean 0.
class IntensityModel {
 public:
  static constexpr std::array<std::uint8_t, 7> kLabels{1, 2, 4, 5, 6, 7, 8};

  void set(std::uint8_t label, Modality m, ClassStats s);
  /// Throws Error(Data) when the pair is missing.
  const ClassStats& at(std::uint8_t label, Modality m) const;
  bool contains(std::uint8_t label, Modality m) const;

  /// Throws Error(Data) naming the first missing pair.
  void require_complete() const;

  const std::map<std::pair<std::uint8_t, Modality>, ClassStats>& table() const { return table_; }

  friend bool operator==(const IntensityModel&, const IntensityModel&) = default;

 private:
  std::map<std::pair<std::uint8_t, Modality>, ClassStats> table_;
};

struct SynthParams {
  double pv_sigma = 0.7;         // voxels
  double noise_std_frac = 0.5;   // fraction of the mixed class std
  double bias_amplitude = 0.2;   // multiplicative bias in [1-a, 1+a]
  double bias_sigma = 16.0;      // voxels
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Sample mean and sample standard deviation (n-1 denominator, 0 for a
/// single voxel) per label/modality pair, pooled over the corpus.
IntensityModel estimate_intensity_model(std::span<const MultimodalCase> cases);

/// Partial-volume mixed class means, Gaussian noise, smooth multiplicative
/// bias; background forced to 0. Deterministic in (inputs, rng_seed).
/// `species` is accepted for geometry checking only: intensities depend on
/// the tumor through the label map.
MultimodalCase synthesize(const LabelVolume& labels, const growth::SpeciesState* species, const IntensityModel& model,
                          const SynthParams& params, const std::string& id = "synthetic");

/// Smooth field rescaled to [-1, 1] (all zeros if the noise is constant).
Field bias_field(const GridGeometry& g, double sigma, std::uint64_t seed);

}  // namespace tumorsynth::synth
