#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>

#include "tumorsynth/volume.hpp"

namespace tumorsynth {

enum class Modality { T1 = 0, T1ce = 1, T2 = 2, Flair = 3 };

inline constexpr std::array<Modality, 4> kModalities{Modality::T1, Modality::T1ce, Modality::T2, Modality::Flair};

std::string_view name(Modality m) noexcept;
Modality modality_from_name(std::string_view s);

/// One dataset instance: four co-registered modalities and a label map.
struct MultimodalCase {
  std::string id;
  ScalarVolume t1, t1ce, t2, flair;
  LabelVolume seg;

  ScalarVolume& modality(Modality m);
  const ScalarVolume& modality(Modality m) const;
  const GridGeometry& geometry() const { return seg.geometry(); }

  /// Throws Error(Data) unless all five geometries agree and labels are valid.
  void validate() const;
};

/// Brain voxels: nonzero label or nonzero intensity in any modality.
Mask case_brain_mask(const MultimodalCase& c);

/// Reads `<dir>/{t1,t1ce,t2,flair,seg}.nii`; the case id is the directory name.
MultimodalCase read_case(const std::filesystem::path& dir);
/// Writes the five volumes into `dir` (created if missing). meta.json is not touched.
void write_case(const MultimodalCase& c, const std::filesystem::path& dir);

inline constexpr std::array<const char*, 5> kCaseVolumeFiles{"t1.nii", "t1ce.nii", "t2.nii", "flair.nii", "seg.nii"};

}  // namespace tumorsynth
