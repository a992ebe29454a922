#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tumorsynth/case.hpp"
#include "tumorsynth/volume.hpp"

namespace tumorsynth::reg {

/// Stationary velocity field, components in voxels.
struct VelocityField {
  Field vx, vy, vz;

  static VelocityField zeros(const GridGeometry& g);
  const GridGeometry& geometry() const { return vx.geometry(); }
  double max_norm() const;
};

/// Displacement field in voxels: phi(x) = x + d(x).
struct DeformationField {
  Field dx, dy, dz;
  double min_jacobian = 1.0;

  static DeformationField identity(const GridGeometry& g);
  const GridGeometry& geometry() const { return dx.geometry(); }
  double max_norm() const;
};

struct RegistrationParams {
  int levels = 3;
  std::vector<int> iters_per_level{100, 75, 50};  // coarse to fine
  double sigma_fluid = 1.0;
  double sigma_diff = 1.5;
  double force_epsilon = 1e-6;
  double max_step = 1.0;

  void validate() const;
};

struct RegistrationResult {
  VelocityField velocity;
  double similarity_initial = 0.0;  // masked MSE of normalized intensities
  double similarity_final = 0.0;
  double min_jacobian = 1.0;
  int iterations_run = 0;
};

struct Atlas {
  std::string id;
  ScalarVolume t1;
  LabelVolume labels;  // healthy classes only: {0,5,6,7,8}

  void validate() const;
};

enum class Interp { Linear, Nearest };

/// Scaling and squaring: scale so every vector is under half a voxel, then
/// self-compose. The result carries its interior minimum Jacobian determinant.
DeformationField exponentiate(const VelocityField& v);

/// (outer o inner)(x) = inner(x) + outer(x + inner(x)).
DeformationField compose(const DeformationField& outer, const DeformationField& inner);

/// Minimum of det(I + grad d) over interior voxels, central differences.
double min_jacobian(const DeformationField& phi);

ScalarVolume warp(const ScalarVolume& vol, const DeformationField& phi, Interp interp = Interp::Linear);
LabelVolume warp(const LabelVolume& vol, const DeformationField& phi, Interp interp = Interp::Nearest);
Field warp(const Field& vol, const DeformationField& phi);

/// Demons update pulling the warped moving image toward the fixed image:
/// u = (f - m) grad m / (|grad m|^2 + (f - m)^2 + eps), zero outside
/// `valid`, magnitude capped at `max_step`.
VelocityField demons_force(const Field& fixed, const Field& warped_moving, const Mask& valid, double eps,
                           double max_step);

double masked_mse(const Field& a, const Field& b, const Mask& mask);

void smooth(VelocityField& v, double sigma);

/// Diffeomorphic demons with a stationary velocity field. `exclude` marks
/// voxels ignored by the similarity (e.g. a dilated tumor mask); pass an
/// all-zero mask to use every brain voxel.
RegistrationResult register_images(const ScalarVolume& fixed, const ScalarVolume& moving, const Mask& exclude,
                                   const RegistrationParams& params);

/// Majority vote; ties go to the label whose best-scoring voter has the
/// lowest similarity (then the smaller label). Output restricted to healthy
/// labels and background. With `background_votes` false, background only
/// wins where no atlas votes a healthy label.
LabelVolume fuse_labels(std::span<const LabelVolume> warped_atlas_labels, std::span<const double> similarities,
                        bool background_votes = true);

struct AtlasOutcome {
  std::string atlas_id;
  bool ok = false;
  std::string error;
  double similarity_initial = 0.0;
  double similarity_final = 0.0;
  double min_jacobian = 0.0;
};

struct EnrichResult {
  LabelVolume seg;
  std::vector<AtlasOutcome> atlases;
};

/// Registers every atlas T1 to the case T1 with the dilated tumor masked
/// out, warps and fuses the atlas labels, and keeps the case's tumor labels.
EnrichResult enrich_case(const MultimodalCase& c, std::span<const Atlas> atlases, const RegistrationParams& params,
                         std::size_t jobs = 1);

/// Tumor voxels (labels 1, 2, 4) dilated by `radius` voxels.
Mask tumor_exclusion_mask(const LabelVolume& seg, int radius = 2);

/// Reads `<dir>/t1.nii` and `<dir>/labels.nii`; id = directory name.
Atlas read_atlas(const std::filesystem::path& dir);
/// All atlas subdirectories of `root`, sorted by name.
std::vector<Atlas> read_atlas_set(const std::filesystem::path& root);
void write_atlas(const Atlas& a, const std::filesystem::path& dir);

}  // namespace tumorsynth::reg
