#include "tumorsynth/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace tumorsynth::adapt {
namespace {

std::vector<double> brain_values(const MultimodalCase& c, const Mask& brain, Modality m) {
  const auto& vol = c.modality(m);
  std::vector<double> out;
  for (std::size_t v = 0; v < vol.size(); ++v) {
    if (brain[v]) out.push_back(vol[v]);
  }
  return out;
}

// Interpolates `table` at a fractional index.
double at_rank(const std::vector<double>& table, double r) {
  const double top = static_cast<double>(table.size() - 1);
  r = std::clamp(r, 0.0, top);
  const auto lo = static_cast<std::size_t>(std::floor(r));
  if (lo + 1 >= table.size()) return table.back();
  const double f = r - static_cast<double>(lo);
  return f == 0.0 ? table[lo] : table[lo] + f * (table[lo + 1] - table[lo]);
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(std::span<const double> v) {
    for (double x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
};

double binned_w1(std::span<const double> a, std::span<const double> b, const Range& r, std::size_t bins) {
  if (!(r.hi > r.lo)) return 0.0;
  return wasserstein1(histogram(a, r.lo, r.hi, bins), histogram(b, r.lo, r.hi, bins));
}

}  // namespace

std::vector<double> quantile_table(std::vector<double> sample, std::size_t q) {
  if (sample.empty()) data_error("quantile table of an empty sample");
  if (q < 2) usage_error("quantile tables need at least 2 entries");
  std::sort(sample.begin(), sample.end());
  std::vector<double> table(q);
  const double n1 = static_cast<double>(sample.size() - 1);
  for (std::size_t j = 0; j < q; ++j) {
    const double h = n1 * static_cast<double>(j) / static_cast<double>(q - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sample.size() - 1);
    const double f = h - static_cast<double>(lo);
    table[j] = f == 0.0 ? sample[lo] : sample[lo] + f * (sample[hi] - sample[lo]);
  }
  // Guard against interpolation roundoff breaking monotonicity.
  for (std::size_t j = 1; j < q; ++j) table[j] = std::max(table[j], table[j - 1]);
  return table;
}

const std::vector<double>& ReferenceDistribution::table(Modality m) const {
  const auto it = quantiles.find(m);
  if (it == quantiles.end()) data_error("reference distribution has no " + std::string(name(m)) + " table");
  return it->second;
}

void ReferenceDistribution::validate() const {
  for (Modality m : kModalities) {
    const auto& t = table(m);
    if (t.size() < 2) data_error("reference quantile table needs at least 2 entries");
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (!std::isfinite(t[j])) data_error("reference quantile table contains non-finite values");
      if (j > 0 && t[j] < t[j - 1]) data_error("reference quantile table is not non-decreasing");
    }
  }
}

Histogram histogram(std::span<const double> values, double lo, double hi, std::size_t bins) {
  if (bins == 0 || !(hi > lo)) usage_error("histogram needs bins >= 1 and hi > lo");
  Histogram h{lo, hi, std::vector<double>(bins, 0.0)};
  const double scale = static_cast<double>(bins) / (hi - lo);
  for (double x : values) {
    auto b = static_cast<long long>(std::floor((x - lo) * scale));
    b = std::clamp<long long>(b, 0, static_cast<long long>(bins) - 1);
    h.counts[static_cast<std::size_t>(b)] += 1.0;
  }
  return h;
}

double wasserstein1(const Histogram& a, const Histogram& b) {
  if (a.counts.size() != b.counts.size() || a.lo != b.lo || a.hi != b.hi) {
    usage_error("wasserstein1: histograms use different binning");
  }
  double ta = 0.0, tb = 0.0;
  for (double c : a.counts) ta += c;
  for (double c : b.counts) tb += c;
  if (!(ta > 0.0) || !(tb > 0.0)) data_error("wasserstein1: empty histogram");
  double ca = 0.0, cb = 0.0, sum = 0.0;
  for (std::size_t k = 0; k < a.counts.size(); ++k) {
    ca += a.counts[k] / ta;
    cb += b.counts[k] / tb;
    sum += std::abs(ca - cb);
  }
  return sum * a.bin_width();
}

QuantileMap::QuantileMap(std::vector<double> source, std::vector<double> target)
    : source_(std::move(source)), target_(std::move(target)) {
  if (source_.size() < 2 || source_.size() != target_.size()) {
    usage_error("quantile maps need equally sized tables with at least 2 entries");
  }
}

double QuantileMap::rank(double x) const {
  const auto first = source_.begin();
  const auto [run_lo, run_hi] = std::equal_range(source_.begin(), source_.end(), x);
  if (run_lo != run_hi) {
    return 0.5 * static_cast<double>((run_lo - first) + (run_hi - first - 1));
  }
  if (run_lo == source_.begin()) return 0.0;
  if (run_lo == source_.end()) return static_cast<double>(source_.size() - 1);
  const auto j = static_cast<std::size_t>(run_lo - first) - 1;  // source[j] < x < source[j+1]
  return static_cast<double>(j) + (x - source_[j]) / (source_[j + 1] - source_[j]);
}

double QuantileMap::operator()(double x) const {
  if (degenerate()) return x;
  return at_rank(target_, rank(x));
}

ReferenceDistribution build_reference(std::span<const MultimodalCase> cases, std::size_t q) {
  if (cases.empty()) usage_error("build_reference: the reference corpus is empty");
  ReferenceDistribution ref;
  ref.corpus_cases = cases.size();
  std::map<Modality, std::vector<double>> pooled;
  for (const auto& c : cases) {
    c.validate();
    const Mask brain = case_brain_mask(c);
    if (count(brain) == 0) data_error("build_reference: case " + c.id + " has an empty brain mask");
    for (Modality m : kModalities) {
      auto v = brain_values(c, brain, m);
      auto& dst = pooled[m];
      dst.insert(dst.end(), v.begin(), v.end());
    }
  }
  for (Modality m : kModalities) {
    ref.corpus_voxels[m] = pooled[m].size();
    ref.quantiles[m] = quantile_table(std::move(pooled[m]), q);
  }
  return ref;
}

std::pair<MultimodalCase, AdaptationReport> adapt(const MultimodalCase& c, const ReferenceDistribution& ref) {
  c.validate();
  ref.validate();
  const Mask brain = case_brain_mask(c);
  if (count(brain) == 0) data_error("adapt: case " + c.id + " has an empty brain mask");

  MultimodalCase out = c;
  AdaptationReport report;
  for (Modality m : kModalities) {
    const auto& target = ref.table(m);
    report.quantiles = target.size();
    const auto before = brain_values(c, brain, m);
    const QuantileMap map(quantile_table(before, target.size()), target);

    ModalityReport mr;
    mr.degenerate = map.degenerate();
    if (mr.degenerate) {
      std::cerr << "warning: case " << c.id << " " << name(m)
                << " has zero intensity spread; leaving it unchanged\n";
    }
    auto& vol = out.modality(m);
    for (std::size_t v = 0; v < vol.size(); ++v) {
      if (brain[v]) vol[v] = static_cast<float>(map(vol[v]));
    }
    const auto after = brain_values(out, brain, m);

    Range r;
    r.add(before);
    r.add(after);
    r.add(target);
    mr.wasserstein1_before = binned_w1(before, target, r, report.bins);
    mr.wasserstein1_after = binned_w1(after, target, r, report.bins);
    report.modalities[m] = mr;
  }
  return {std::move(out), report};
}

double distance_to_reference(const MultimodalCase& c, const ReferenceDistribution& ref, Modality m,
                             std::size_t bins) {
  const auto values = brain_values(c, case_brain_mask(c), m);
  if (values.empty()) data_error("case " + c.id + " has an empty brain mask");
  const auto& target = ref.table(m);
  Range r;
  r.add(values);
  r.add(target);
  return binned_w1(values, target, r, bins);
}

}  // namespace tumorsynth::adapt
