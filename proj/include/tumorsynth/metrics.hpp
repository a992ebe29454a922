#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tumorsynth/volume.hpp"

namespace tumorsynth::metrics {

/// A named union of labels scored as one binary region.
struct RegionSpec {
  std::string name;
  std::vector<std::uint8_t> members;

  bool contains(std::uint8_t l) const;
};

RegionSpec enhancing_tumor();  // ET = {4}
RegionSpec whole_tumor();      // WT = {1,2,4}
RegionSpec tumor_core();       // TC = {1,4}
RegionSpec single_class(std::uint8_t l);

/// ET, WT, TC followed by the per-class regions 1,2,4,5,6,7,8.
std::vector<RegionSpec> standard_regions();

/// 2|A n B| / (|A| + |B|); 1.0 when both regions are empty.
double dice(const LabelVolume& pred, const LabelVolume& truth, const RegionSpec& region);

struct ImbalanceReport {
  std::array<std::size_t, 9> counts{};  // indexed by label value; index 3 stays 0
  std::size_t total = 0;
  /// Largest over smallest count among foreground labels present; empty when
  /// no foreground label is present.
  std::optional<double> foreground_ratio;
  /// Tumor (1,2,4) over healthy (5..8) voxels; empty when no healthy voxel.
  std::optional<double> tumor_to_healthy;
  /// Largest over smallest count among all labels present, background
  /// included: the class skew a segmentation network trains against.
  std::optional<double> all_class_ratio;
};

ImbalanceReport class_frequencies(const LabelVolume& seg);

/// Keeps tumor labels and maps every healthy label to background.
LabelVolume tumor_only(const LabelVolume& seg);

}  // namespace tumorsynth::metrics
