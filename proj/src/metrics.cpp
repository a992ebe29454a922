#include "tumorsynth/metrics.hpp"

#include <algorithm>

namespace tumorsynth::metrics {

bool RegionSpec::contains(std::uint8_t l) const {
  return std::find(members.begin(), members.end(), l) != members.end();
}

RegionSpec enhancing_tumor() { return {"ET", {label::kEnhancing}}; }
RegionSpec whole_tumor() { return {"WT", {label::kNecrotic, label::kEdema, label::kEnhancing}}; }
RegionSpec tumor_core() { return {"TC", {label::kNecrotic, label::kEnhancing}}; }

RegionSpec single_class(std::uint8_t l) {
  if (l == label::kBackground || !label::is_valid(l)) usage_error("class region needs a foreground label");
  return {"label_" + std::to_string(l), {l}};
}

std::vector<RegionSpec> standard_regions() {
  return {enhancing_tumor(), whole_tumor(), tumor_core()};
}

double dice(const LabelVolume& pred, const LabelVolume& truth, const RegionSpec& region) {
  require_same_geometry(pred, truth, "dice");
  if (region.members.empty()) usage_error("dice: region " + region.name + " has no member labels");
  std::array<bool, 256> in{};
  for (std::uint8_t l : region.members) in[l] = true;
  std::size_t a = 0, b = 0, both = 0;
  for (std::size_t v = 0; v < pred.size(); ++v) {
    const bool pa = in[pred[v]], tb = in[truth[v]];
    a += pa;
    b += tb;
    both += pa && tb;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

ImbalanceReport class_frequencies(const LabelVolume& seg) {
  check_labels(seg);
  ImbalanceReport r;
  for (std::uint8_t l : seg.values()) ++r.counts[l];
  r.total = seg.size();

  const auto ratio = [&](bool with_background) -> std::optional<double> {
    std::size_t lo = 0, hi = 0;
    for (std::uint8_t l : label::kAll) {
      if (l == label::kBackground && !with_background) continue;
      const std::size_t c = r.counts[l];
      if (c == 0) continue;
      lo = lo == 0 ? c : std::min(lo, c);
      hi = std::max(hi, c);
    }
    if (lo == 0) return std::nullopt;
    return static_cast<double>(hi) / static_cast<double>(lo);
  };
  r.foreground_ratio = ratio(false);
  r.all_class_ratio = ratio(true);

  std::size_t tumor = 0, healthy = 0;
  for (std::uint8_t l : label::kTumor) tumor += r.counts[l];
  for (std::uint8_t l : label::kHealthy) healthy += r.counts[l];
  if (healthy > 0) r.tumor_to_healthy = static_cast<double>(tumor) / static_cast<double>(healthy);
  return r;
}

LabelVolume tumor_only(const LabelVolume& seg) {
  LabelVolume out(seg.geometry(), 0);
  for (std::size_t v = 0; v < seg.size(); ++v) out[v] = label::is_tumor(seg[v]) ? seg[v] : label::kBackground;
  return out;
}

}  // namespace tumorsynth::metrics
