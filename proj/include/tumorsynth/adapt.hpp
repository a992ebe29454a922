#pragma once

#include <map>
#include <span>
#include <utility>
#include <vector>

#include "tumorsynth/case.hpp"

namespace tumorsynth::adapt {

inline constexpr std::size_t kQuantiles = 1024;
inline constexpr std::size_t kReportBins = 256;

/// Q evenly spaced quantiles (probabilities j/(Q-1)) of a sample, linear
/// interpolation between order statistics.
std::vector<double> quantile_table(std::vector<double> sample, std::size_t q = kQuantiles);

/// Per-modality quantile tables of brain-mask intensities pooled over a corpus.
struct ReferenceDistribution {
  std::map<Modality, std::vector<double>> quantiles;
  std::size_t corpus_cases = 0;
  std::map<Modality, std::size_t> corpus_voxels;

  const std::vector<double>& table(Modality m) const;
  void validate() const;
};

struct ModalityReport {
  double wasserstein1_before = 0.0;
  double wasserstein1_after = 0.0;
  bool degenerate = false;  // zero source spread: identity mapping was used
};

struct AdaptationReport {
  std::size_t bins = kReportBins;
  std::size_t quantiles = kQuantiles;
  std::map<Modality, ModalityReport> modalities;
};

struct Histogram {
  double lo = 0.0, hi = 1.0;
  std::vector<double> counts;

  double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
};

Histogram histogram(std::span<const double> values, double lo, double hi, std::size_t bins);

/// W1 = sum over bins of |CDF_A - CDF_B| * bin width, masses normalized.
double wasserstein1(const Histogram& a, const Histogram& b);

/// Monotone piecewise-linear quantile-to-quantile transfer. Values inside a
/// run of equal source quantiles map to the run's middle rank.
class QuantileMap {
 public:
  QuantileMap(std::vector<double> source, std::vector<double> target);

  double operator()(double x) const;
  /// Fractional index into the source table.
  double rank(double x) const;
  bool degenerate() const { return source_.front() == source_.back(); }

 private:
  std::vector<double> source_, target_;
};

ReferenceDistribution build_reference(std::span<const MultimodalCase> cases, std::size_t q = kQuantiles);

/// Maps every brain voxel through its modality's QuantileMap; background is
/// copied unchanged.
std::pair<MultimodalCase, AdaptationReport> adapt(const MultimodalCase& c, const ReferenceDistribution& ref);

/// W1 between the case's brain intensities of one modality and the reference
/// table, binned over their joint range.
double distance_to_reference(const MultimodalCase& c, const ReferenceDistribution& ref, Modality m,
                             std::size_t bins = kReportBins);

}  // namespace tumorsynth::adapt
