#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "tumorsynth/filters.hpp"
#include "tumorsynth/registration.hpp"
#include "tumorsynth/rng.hpp"
#include "tumorsynth/volume.hpp"

namespace testing {

/// Unique directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("tumorsynth_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

/// Smooth random velocity field scaled so its largest vector has length
/// `max_norm` voxels.
inline tumorsynth::reg::VelocityField random_smooth_velocity(const tumorsynth::GridGeometry& g, double max_norm,
                                                             double sigma, std::uint64_t seed) {
  using namespace tumorsynth;
  Rng rng(seed);
  auto noise = [&] {
    Field f(g);
    for (auto& v : f.values()) v = rng.normal();
    return gaussian_smooth(f, sigma);
  };
  reg::VelocityField v{noise(), noise(), noise()};
  const double m = v.max_norm();
  if (m > 0) {
    for (Field* c : {&v.vx, &v.vy, &v.vz}) {
      for (auto& x : c->values()) x *= max_norm / m;
    }
  }
  return v;
}

inline tumorsynth::reg::VelocityField negate(tumorsynth::reg::VelocityField v) {
  for (tumorsynth::Field* c : {&v.vx, &v.vy, &v.vz}) {
    for (auto& x : c->values()) x = -x;
  }
  return v;
}

}  // namespace testing
