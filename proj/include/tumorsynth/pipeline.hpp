#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tumorsynth/adapt.hpp"
#include "tumorsynth/growth.hpp"
#include "tumorsynth/registration.hpp"
#include "tumorsynth/rng.hpp"
#include "tumorsynth/serialize.hpp"
#include "tumorsynth/synth.hpp"

namespace tumorsynth::pipeline {

/// Dataset layout revision written to manifest.json and every meta.json.
inline constexpr const char* kDatasetRevision = "tumorsynth-dataset/1";

struct ParamRange {
  double min = 0.0;
  double max = 0.0;
};

struct PipelineConfig {
  std::filesystem::path atlas_dir;
  std::filesystem::path reference;        // reference_dist.json or a directory of case dirs
  std::filesystem::path intensity_model;  // intensity_model.json or a directory of case dirs
  growth::GrowthParams growth;            // base values; ranges below override per case
  std::map<std::string, ParamRange> growth_ranges;
  /// When unset, each case seeds its tumor at a random white-matter voxel.
  std::optional<std::array<double, 3>> seed_center;
  synth::SynthParams synth;  // rng_seed is replaced by the per-case seed
  std::size_t count = 1;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::filesystem::path output;

  void validate() const;
};

/// Growth fields that may carry a sampling range.
const std::vector<std::string>& rangeable_growth_fields();

/// Relative paths are resolved against `base_dir`.
PipelineConfig config_from_json(const Json& j, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);
Json to_json(const PipelineConfig& c);

struct CaseEntry {
  std::size_t index = 0;
  std::string id;
  std::string atlas_id;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  growth::GrowthParams growth;
  adapt::AdaptationReport adaptation;
  std::map<std::string, std::string> files;  // path relative to the case dir -> sha256
};

struct DatasetManifest {
  std::string revision = kDatasetRevision;
  std::uint64_t master_seed = 0;
  std::vector<CaseEntry> cases;

  std::size_t succeeded() const;
};

Json to_json(const CaseEntry& e);
Json to_json(const DatasetManifest& m);

std::string case_id(std::size_t index);

/// Per-case seed: splitmix64(master XOR index).
inline std::uint64_t case_seed(std::uint64_t master, std::size_t index) { return mix_seed(master, index); }

/// Uniform draws for every configured range, in sorted key order.
growth::GrowthParams sample_growth_params(const growth::GrowthParams& base,
                                          const std::map<std::string, ParamRange>& ranges, Rng& rng);

/// Voxel coordinates of a uniformly drawn white-matter voxel.
std::array<double, 3> random_white_matter_seed(const LabelVolume& labels, Rng& rng);

/// Tumor labels replace healthy labels inside the brain; outside stays 0.
LabelVolume merge_tumor(const LabelVolume& healthy, const LabelVolume& tumor);

adapt::ReferenceDistribution load_reference(const std::filesystem::path& path);
synth::IntensityModel load_intensity_model(const std::filesystem::path& path);

/// Subdirectories of `root` that contain seg.nii, sorted by name.
std::vector<std::filesystem::path> case_directories(const std::filesystem::path& root);

/// simulate -> implant -> synthesize -> adapt for every case; writes case
/// directories and manifest.json under config.output. Failed cases are
/// recorded in the manifest and leave no directory behind.
DatasetManifest generate(const PipelineConfig& config);

struct CaseFindings {
  std::string id;
  std::vector<std::string> findings;
};

struct ValidationReport {
  std::vector<std::string> dataset_findings;
  std::vector<CaseFindings> cases;

  bool ok() const;
};

ValidationReport validate_dataset(const std::filesystem::path& dir);
Json to_json(const ValidationReport& r);

std::string sha256_file(const std::filesystem::path& path);

}  // namespace tumorsynth::pipeline
