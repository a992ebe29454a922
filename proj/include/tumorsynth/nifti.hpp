#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tumorsynth/volume.hpp"

namespace tumorsynth::nifti {

// NIfTI-1 datatype codes accepted by the reader.
enum class Datatype : std::int16_t {
  UInt8 = 2,
  Int16 = 4,
  Float32 = 16,
  Float64 = 64,
  UInt16 = 512,
};

int bytes_per_voxel(Datatype dt);
bool is_supported(std::int16_t code) noexcept;

inline constexpr std::size_t kHeaderSize = 348;
inline constexpr std::size_t kVoxOffset = 352;

/// The subset of header fields this toolkit reads and writes.
struct Header {
  std::array<std::int16_t, 8> dim{};
  std::int16_t datatype = 0;
  std::int16_t bitpix = 0;
  std::array<float, 8> pixdim{};
  float vox_offset = static_cast<float>(kVoxOffset);
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::array<float, 3> qoffset{};
};

/// Little-endian 348-byte encoding with identity orientation (qform_code 1,
/// zero quaternion, qoffset = origin) and magic "n+1".
std::array<std::uint8_t, kHeaderSize> encode_header(const Header& h);

/// Parses and validates a header; throws Error(Data) on any malformation.
Header decode_header(std::span<const std::uint8_t> bytes, std::size_t voxel_cap = GridGeometry::kDefaultVoxelCap);

GridGeometry geometry_of(const Header& h);
Header header_for(const GridGeometry& g, Datatype dt);

ScalarVolume read_scalar(const std::filesystem::path& path,
                         std::size_t voxel_cap = GridGeometry::kDefaultVoxelCap);
LabelVolume read_label(const std::filesystem::path& path,
                       std::size_t voxel_cap = GridGeometry::kDefaultVoxelCap);

/// Scalar volumes are written as float32.
void write(const ScalarVolume& vol, const std::filesystem::path& path);
/// Label volumes are validated, then written as uint8.
void write(const LabelVolume& vol, const std::filesystem::path& path);

/// Writes `values` converted to an arbitrary supported datatype (values are
/// rounded and range-checked for integer types).
void write_as(const ScalarVolume& vol, const std::filesystem::path& path, Datatype dt);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace tumorsynth::nifti
