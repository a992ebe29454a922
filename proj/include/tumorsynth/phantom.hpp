#pragma once

#include <cstdint>
#include <string>

#include "tumorsynth/case.hpp"
#include "tumorsynth/registration.hpp"
#include "tumorsynth/synth.hpp"

namespace tumorsynth::phantom {

/// Default phantom grid: 64^3 voxels of 2.5 mm.
GridGeometry default_geometry(std::size_t size = 64);

/// Healthy ellipsoidal brain (CSF shell and ventricles, folded cortex, white
/// matter, deep glial nuclei). `variant` perturbs scale, position and folding;
/// variant 0 is the canonical anatomy.
LabelVolume healthy_labels(const GridGeometry& g, std::uint64_t variant);

/// Intensity statistics resembling real scans (arbitrary MR units).
synth::IntensityModel reference_model();
/// Flat, low-contrast statistics used as the raw generator default.
synth::IntensityModel synthetic_model();

reg::Atlas make_atlas(const GridGeometry& g, std::uint64_t variant, const std::string& id);

/// A "real-looking" case: phantom anatomy, a grown tumor, reference-model
/// intensities.
MultimodalCase make_reference_case(const GridGeometry& g, std::uint64_t variant, const std::string& id);

/// Linear indices of the voxels carrying label `l`, ascending.
std::vector<std::size_t> voxels_with_label(const LabelVolume& labels, std::uint8_t l);

}  // namespace tumorsynth::phantom
