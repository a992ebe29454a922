#include "tumorsynth/nifti.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace tumorsynth::nifti {
namespace {

static_assert(std::endian::native == std::endian::little, "only little-endian hosts are supported");

// Byte offsets inside the 348-byte header.
constexpr std::size_t kOffSizeofHdr = 0;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffDescrip = 148;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffQoffset = 268;
constexpr std::size_t kOffMagic = 344;

template <class T>
void put(std::span<std::uint8_t> buf, std::size_t off, T v) {
  std::memcpy(buf.data() + off, &v, sizeof(T));
}

template <class T>
T get(std::span<const std::uint8_t> buf, std::size_t off) {
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  return v;
}

template <class T>
double load(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return static_cast<double>(v);
}

// Converts raw voxel bytes to doubles with scl_slope/scl_inter applied.
std::vector<double> decode_values(const Header& h, std::span<const std::uint8_t> raw, std::size_t count) {
  const auto dt = static_cast<Datatype>(h.datatype);
  const int bpv = bytes_per_voxel(dt);
  std::vector<double> out(count);
  for (std::size_t n = 0; n < count; ++n) {
    const std::uint8_t* p = raw.data() + n * bpv;
    switch (dt) {
      case Datatype::UInt8: out[n] = *p; break;
      case Datatype::Int16: out[n] = load<std::int16_t>(p); break;
      case Datatype::UInt16: out[n] = load<std::uint16_t>(p); break;
      case Datatype::Float32: out[n] = load<float>(p); break;
      case Datatype::Float64: out[n] = load<double>(p); break;
    }
  }
  if (h.scl_slope != 0.0f && std::isfinite(h.scl_slope)) {
    const double slope = h.scl_slope;
    const double inter = std::isfinite(h.scl_inter) ? h.scl_inter : 0.0;
    for (double& v : out) v = v * slope + inter;
  }
  return out;
}

std::vector<double> read_values(const std::filesystem::path& path, std::size_t voxel_cap, GridGeometry& geom) {
  const auto bytes = read_file(path);
  if (bytes.size() < kHeaderSize) {
    data_error(path.string() + ": file too short for a NIfTI-1 header (" + std::to_string(bytes.size()) + " bytes)");
  }
  Header h;
  try {
    h = decode_header(std::span(bytes).first(kHeaderSize), voxel_cap);
  } catch (const Error& e) {
    data_error(path.string() + ": " + e.what());
  }
  geom = geometry_of(h);
  const std::size_t count = geom.voxel_count();
  const auto offset = static_cast<std::size_t>(h.vox_offset);
  const std::size_t need = offset + count * bytes_per_voxel(static_cast<Datatype>(h.datatype));
  if (bytes.size() < need) {
    data_error(path.string() + ": truncated data (" + std::to_string(bytes.size()) + " bytes, expected " +
               std::to_string(need) + ")");
  }
  return decode_values(h, std::span(bytes).subspan(offset), count);
}

void write_raw(const GridGeometry& g, Datatype dt, std::span<const std::uint8_t> data,
               const std::filesystem::path& path) {
  const auto header = encode_header(header_for(g, dt));
  std::vector<std::uint8_t> out(kVoxOffset + data.size(), 0);
  std::memcpy(out.data(), header.data(), kHeaderSize);
  // bytes 348..351: extension flag, all zero
  std::memcpy(out.data() + kVoxOffset, data.data(), data.size());
  write_file(path, out);
}

}  // namespace

int bytes_per_voxel(Datatype dt) {
  switch (dt) {
    case Datatype::UInt8: return 1;
    case Datatype::Int16: return 2;
    case Datatype::UInt16: return 2;
    case Datatype::Float32: return 4;
    case Datatype::Float64: return 8;
  }
  data_error("unsupported NIfTI datatype " + std::to_string(static_cast<int>(dt)));
}

bool is_supported(std::int16_t code) noexcept {
  return code == 2 || code == 4 || code == 16 || code == 64 || code == 512;
}

std::array<std::uint8_t, kHeaderSize> encode_header(const Header& h) {
  std::array<std::uint8_t, kHeaderSize> buf{};
  std::span<std::uint8_t> s(buf);
  put<std::int32_t>(s, kOffSizeofHdr, static_cast<std::int32_t>(kHeaderSize));
  for (int a = 0; a < 8; ++a) put<std::int16_t>(s, kOffDim + 2 * a, h.dim[a]);
  put<std::int16_t>(s, kOffDatatype, h.datatype);
  put<std::int16_t>(s, kOffBitpix, h.bitpix);
  for (int a = 0; a < 8; ++a) put<float>(s, kOffPixdim + 4 * a, h.pixdim[a]);
  put<float>(s, kOffVoxOffset, h.vox_offset);
  put<float>(s, kOffSclSlope, h.scl_slope);
  put<float>(s, kOffSclInter, h.scl_inter);
  buf[kOffXyztUnits] = 2;  // NIFTI_UNITS_MM
  constexpr char kDescrip[] = "tumorsynth";
  std::memcpy(buf.data() + kOffDescrip, kDescrip, sizeof(kDescrip) - 1);
  put<std::int16_t>(s, kOffQformCode, 1);
  for (int a = 0; a < 3; ++a) put<float>(s, kOffQoffset + 4 * a, h.qoffset[a]);
  constexpr char kMagic[4] = {'n', '+', '1', '\0'};
  std::memcpy(buf.data() + kOffMagic, kMagic, 4);
  return buf;
}

Header decode_header(std::span<const std::uint8_t> bytes, std::size_t voxel_cap) {
  if (bytes.size() < kHeaderSize) data_error("header shorter than 348 bytes");
  const auto sizeof_hdr = get<std::int32_t>(bytes, kOffSizeofHdr);
  if (sizeof_hdr != static_cast<std::int32_t>(kHeaderSize)) {
    const auto u = static_cast<std::uint32_t>(sizeof_hdr);
    const std::uint32_t swapped = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
    if (swapped == kHeaderSize) {
      data_error("big-endian NIfTI files are not supported");
    }
    data_error("malformed header: sizeof_hdr = " + std::to_string(sizeof_hdr));
  }
  if (std::memcmp(bytes.data() + kOffMagic, "n+1\0", 4) != 0) {
    data_error("malformed header: magic is not \"n+1\" (only single-file .nii is supported)");
  }

  Header h;
  for (int a = 0; a < 8; ++a) h.dim[a] = get<std::int16_t>(bytes, kOffDim + 2 * a);
  h.datatype = get<std::int16_t>(bytes, kOffDatatype);
  h.bitpix = get<std::int16_t>(bytes, kOffBitpix);
  for (int a = 0; a < 8; ++a) h.pixdim[a] = get<float>(bytes, kOffPixdim + 4 * a);
  h.vox_offset = get<float>(bytes, kOffVoxOffset);
  h.scl_slope = get<float>(bytes, kOffSclSlope);
  h.scl_inter = get<float>(bytes, kOffSclInter);
  for (int a = 0; a < 3; ++a) h.qoffset[a] = get<float>(bytes, kOffQoffset + 4 * a);

  const int ndim = h.dim[0];
  if (ndim < 1 || ndim > 7) data_error("malformed header: dim[0] = " + std::to_string(ndim));
  for (int a = 1; a <= ndim; ++a) {
    if (h.dim[a] < 1) data_error("malformed header: dim[" + std::to_string(a) + "] = " + std::to_string(h.dim[a]));
    if (a > 3 && h.dim[a] != 1) data_error("malformed header: only 3D volumes are supported");
  }
  if (!is_supported(h.datatype)) data_error("unsupported datatype " + std::to_string(h.datatype));
  if (h.bitpix != 8 * bytes_per_voxel(static_cast<Datatype>(h.datatype))) {
    data_error("malformed header: bitpix " + std::to_string(h.bitpix) + " does not match datatype " +
               std::to_string(h.datatype));
  }
  if (!(h.vox_offset >= static_cast<float>(kHeaderSize)) || !std::isfinite(h.vox_offset)) {
    data_error("malformed header: vox_offset " + std::to_string(h.vox_offset));
  }
  for (int a = 1; a <= std::min(ndim, 3); ++a) {
    if (!(h.pixdim[a] > 0.0f) || !std::isfinite(h.pixdim[a])) {
      data_error("malformed header: pixdim[" + std::to_string(a) + "] must be positive");
    }
  }
  geometry_of(h).validate(voxel_cap);
  return h;
}

GridGeometry geometry_of(const Header& h) {
  GridGeometry g;
  for (int a = 0; a < 3; ++a) {
    const bool used = a + 1 <= h.dim[0];
    g.dims[a] = used ? static_cast<std::size_t>(h.dim[a + 1]) : 1;
    g.spacing[a] = used ? static_cast<double>(h.pixdim[a + 1]) : 1.0;
    g.origin[a] = std::isfinite(h.qoffset[a]) ? static_cast<double>(h.qoffset[a]) : 0.0;
  }
  return g;
}

Header header_for(const GridGeometry& g, Datatype dt) {
  Header h;
  h.dim = {3, 1, 1, 1, 1, 1, 1, 1};
  for (int a = 0; a < 3; ++a) {
    if (g.dims[a] > static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max())) {
      data_error("dimension " + std::to_string(g.dims[a]) + " does not fit a NIfTI-1 header");
    }
    h.dim[a + 1] = static_cast<std::int16_t>(g.dims[a]);
    h.pixdim[a + 1] = static_cast<float>(g.spacing[a]);
    h.qoffset[a] = static_cast<float>(g.origin[a]);
  }
  h.pixdim[0] = 1.0f;  // qfac
  h.datatype = static_cast<std::int16_t>(dt);
  h.bitpix = static_cast<std::int16_t>(8 * bytes_per_voxel(dt));
  return h;
}

ScalarVolume read_scalar(const std::filesystem::path& path, std::size_t voxel_cap) {
  GridGeometry g;
  const auto values = read_values(path, voxel_cap, g);
  std::vector<float> out(values.size());
  for (std::size_t n = 0; n < values.size(); ++n) {
    out[n] = static_cast<float>(values[n]);
    if (!std::isfinite(out[n])) data_error(path.string() + ": non-finite intensity at voxel " + std::to_string(n));
  }
  return ScalarVolume(g, std::move(out));
}

LabelVolume read_label(const std::filesystem::path& path, std::size_t voxel_cap) {
  GridGeometry g;
  const auto values = read_values(path, voxel_cap, g);
  std::vector<std::uint8_t> out(values.size());
  for (std::size_t n = 0; n < values.size(); ++n) {
    const double v = values[n];
    if (!(v >= 0.0 && v <= 8.0) || v != std::floor(v) || !label::is_valid(static_cast<unsigned>(v))) {
      data_error(path.string() + ": label value " + std::to_string(v) + " outside the allowed set at voxel " +
                 std::to_string(n));
    }
    out[n] = static_cast<std::uint8_t>(v);
  }
  return LabelVolume(g, std::move(out));
}

void write(const ScalarVolume& vol, const std::filesystem::path& path) {
  const auto vals = vol.values();
  write_raw(vol.geometry(), Datatype::Float32,
            std::span(reinterpret_cast<const std::uint8_t*>(vals.data()), vals.size_bytes()), path);
}

void write(const LabelVolume& vol, const std::filesystem::path& path) {
  check_labels(vol);
  const auto vals = vol.values();
  write_raw(vol.geometry(), Datatype::UInt8, std::span(vals.data(), vals.size()), path);
}

void write_as(const ScalarVolume& vol, const std::filesystem::path& path, Datatype dt) {
  const int bpv = bytes_per_voxel(dt);
  std::vector<std::uint8_t> data(vol.size() * bpv);
  const auto store_int = [&](std::size_t n, double lo, double hi, auto tag) {
    using I = decltype(tag);
    const double r = std::nearbyint(vol[n]);
    if (r < lo || r > hi) data_error("value " + std::to_string(vol[n]) + " does not fit the target datatype");
    const I v = static_cast<I>(r);
    std::memcpy(data.data() + n * bpv, &v, sizeof(I));
  };
  for (std::size_t n = 0; n < vol.size(); ++n) {
    switch (dt) {
      case Datatype::UInt8: store_int(n, 0, 255, std::uint8_t{}); break;
      case Datatype::Int16: store_int(n, -32768, 32767, std::int16_t{}); break;
      case Datatype::UInt16: store_int(n, 0, 65535, std::uint16_t{}); break;
      case Datatype::Float32: {
        const float v = vol[n];
        std::memcpy(data.data() + n * bpv, &v, 4);
        break;
      }
      case Datatype::Float64: {
        const double v = vol[n];
        std::memcpy(data.data() + n * bpv, &v, 8);
        break;
      }
    }
  }
  write_raw(vol.geometry(), dt, data, path);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) data_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) data_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) data_error("write failed for " + path.string());
}

}  // namespace tumorsynth::nifti
