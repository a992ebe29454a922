#include "tumorsynth/case.hpp"

#include "tumorsynth/nifti.hpp"

namespace tumorsynth {

std::string_view name(Modality m) noexcept {
  switch (m) {
    case Modality::T1: return "t1";
    case Modality::T1ce: return "t1ce";
    case Modality::T2: return "t2";
    case Modality::Flair: return "flair";
  }
  return "?";
}

Modality modality_from_name(std::string_view s) {
  for (Modality m : kModalities) {
    if (name(m) == s) return m;
  }
  data_error("unknown modality \"" + std::string(s) + "\"");
}

ScalarVolume& MultimodalCase::modality(Modality m) {
  switch (m) {
    case Modality::T1: return t1;
    case Modality::T1ce: return t1ce;
    case Modality::T2: return t2;
    case Modality::Flair: return flair;
  }
  return t1;
}

const ScalarVolume& MultimodalCase::modality(Modality m) const {
  return const_cast<MultimodalCase*>(this)->modality(m);
}

void MultimodalCase::validate() const {
  for (Modality m : kModalities) {
    require_same_geometry(modality(m), seg, ("case " + id + " " + std::string(name(m))).c_str());
    check_finite(modality(m), "case " + id + " " + std::string(name(m)));
  }
  check_labels(seg);
}

Mask case_brain_mask(const MultimodalCase& c) {
  Mask mask = brain_mask(c.seg);
  for (Modality m : kModalities) {
    const auto& vol = c.modality(m);
    for (std::size_t v = 0; v < mask.size(); ++v) {
      if (vol[v] != 0.0f) mask[v] = 1;
    }
  }
  return mask;
}

MultimodalCase read_case(const std::filesystem::path& dir) {
  MultimodalCase c;
  c.id = dir.filename().string();
  if (c.id.empty()) c.id = dir.parent_path().filename().string();
  for (Modality m : kModalities) c.modality(m) = nifti::read_scalar(dir / (std::string(name(m)) + ".nii"));
  c.seg = nifti::read_label(dir / "seg.nii");
  c.validate();
  return c;
}

void write_case(const MultimodalCase& c, const std::filesystem::path& dir) {
  c.validate();
  std::filesystem::create_directories(dir);
  for (Modality m : kModalities) nifti::write(c.modality(m), dir / (std::string(name(m)) + ".nii"));
  nifti::write(c.seg, dir / "seg.nii");
}

}  // namespace tumorsynth
