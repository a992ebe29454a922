#include "tumorsynth/pipeline.hpp"

#include <cstring>
#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

#include "tumorsynth/metrics.hpp"
#include "tumorsynth/nifti.hpp"
#include "tumorsynth/parallel.hpp"
#include "tumorsynth/phantom.hpp"

namespace fs = std::filesystem;

namespace tumorsynth::pipeline {

using tumorsynth::to_json;
namespace {

double* growth_field(growth::GrowthParams& p, const std::string& key) {
  static const std::map<std::string, double growth::GrowthParams::*> fields{
      {"d_w", &growth::GrowthParams::d_w},
      {"kappa_gw", &growth::GrowthParams::kappa_gw},
      {"kappa_i", &growth::GrowthParams::kappa_i},
      {"rho_p", &growth::GrowthParams::rho_p},
      {"rho_i", &growth::GrowthParams::rho_i},
      {"alpha_pi", &growth::GrowthParams::alpha_pi},
      {"beta_ip", &growth::GrowthParams::beta_ip},
      {"gamma", &growth::GrowthParams::gamma},
      {"c_h", &growth::GrowthParams::c_h},
      {"sigma_h", &growth::GrowthParams::sigma_h},
      {"seed_sigma", &growth::GrowthParams::seed_sigma},
      {"seed_amplitude", &growth::GrowthParams::seed_amplitude},
      {"t_final", &growth::GrowthParams::t_final},
      {"tau_p", &growth::GrowthParams::tau_p},
      {"tau_i", &growth::GrowthParams::tau_i},
      {"tau_n", &growth::GrowthParams::tau_n},
  };
  const auto it = fields.find(key);
  return it == fields.end() ? nullptr : &(p.*(it->second));
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string hex(const unsigned char* data, std::size_t n) {
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (std::size_t i = 0; i < n; ++i) os << std::setw(2) << static_cast<int>(data[i]);
  return os.str();
}

std::map<std::string, std::string> checksum_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = sha256_file(e.path());
  }
  return out;
}

struct Inputs {
  std::vector<reg::Atlas> atlases;
  adapt::ReferenceDistribution reference;
  synth::IntensityModel model;
};

Json adaptation_summary(const adapt::AdaptationReport& r) {
  Json j = Json::object();
  for (const auto& [m, mr] : r.modalities) {
    j[std::string(name(m))] = {{"wasserstein1_before", mr.wasserstein1_before},
                               {"wasserstein1_after", mr.wasserstein1_after}};
  }
  return j;
}

CaseEntry generate_case(const PipelineConfig& cfg, const Inputs& in, std::size_t k) {
  CaseEntry e;
  e.index = k;
  e.id = case_id(k);
  e.seed = case_seed(cfg.seed, k);
  const reg::Atlas& atlas = in.atlases[k % in.atlases.size()];
  e.atlas_id = atlas.id;
  const fs::path dir = cfg.output / e.id;
  try {
    Rng rng(e.seed);
    e.growth = sample_growth_params(cfg.growth, cfg.growth_ranges, rng);
    if (cfg.seed_center) {
      e.growth.seed_center = *cfg.seed_center;
    } else {
      e.growth.seed_center = random_white_matter_seed(atlas.labels, rng);
    }

    const growth::GrowthResult grown = growth::simulate(atlas.labels, e.growth);
    const LabelVolume seg = merge_tumor(atlas.labels, grown.tumor_labels);

    synth::SynthParams sp = cfg.synth;
    sp.rng_seed = e.seed;
    const MultimodalCase raw = synth::synthesize(seg, &grown.final, in.model, sp, e.id);
    auto [adapted, report] = adapt::adapt(raw, in.reference);
    e.adaptation = report;

    fs::remove_all(dir);
    write_case(adapted, dir);
    fs::create_directories(dir / "raw");
    for (Modality m : kModalities) nifti::write(raw.modality(m), dir / "raw" / (std::string(name(m)) + ".nii"));

    const growth::MassSample mass = growth::masses(grown.final);
    Json meta{{"id", e.id},
              {"revision", kDatasetRevision},
              {"case_index", k},
              {"atlas_id", e.atlas_id},
              {"seed", e.seed},
              {"rng_algorithm", kRngAlgorithm},
              {"growth_params", to_json(e.growth)},
              {"synth_params", to_json(sp)},
              {"tumor_mass_mm3", {{"p", mass.mass_p}, {"i", mass.mass_i}, {"n", mass.mass_n}}},
              {"class_frequencies", to_json(metrics::class_frequencies(seg))},
              {"adaptation", to_json(report)}};
    write_json(meta, dir / "meta.json");
    e.files = checksum_tree(dir);
    e.ok = true;
  } catch (const std::exception& ex) {
    e.ok = false;
    e.error = ex.what();
    std::error_code ec;
    fs::remove_all(dir, ec);
    std::cerr << "case " << e.id << " failed: " << ex.what() << "\n";
  }
  return e;
}

void check_rank_order(const ScalarVolume& raw, const ScalarVolume& adapted, const Mask& brain, const std::string& what,
                      std::vector<std::string>& findings) {
  std::vector<std::size_t> idx;
  for (std::size_t v = 0; v < raw.size(); ++v) {
    if (brain[v]) {
      idx.push_back(v);
    } else if (std::memcmp(&raw[v], &adapted[v], sizeof(float)) != 0) {
      findings.push_back(what + ": background voxel " + std::to_string(v) + " changed during adaptation");
      return;
    }
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });
  for (std::size_t n = 1; n < idx.size(); ++n) {
    if (adapted[idx[n]] < adapted[idx[n - 1]]) {
      findings.push_back(what + ": adaptation reversed the intensity order of brain voxels");
      return;
    }
  }
}

CaseFindings validate_case(const fs::path& dir, const Json& entry) {
  CaseFindings cf;
  cf.id = entry.value("id", std::string("?"));
  auto& f = cf.findings;
  if (!fs::is_directory(dir)) {
    f.push_back("case directory is missing");
    return cf;
  }
  for (const char* required : {"t1.nii", "t1ce.nii", "t2.nii", "flair.nii", "seg.nii", "meta.json"}) {
    if (!fs::exists(dir / required)) f.push_back(std::string("missing file ") + required);
  }

  std::map<std::string, std::string> listed;
  if (entry.contains("files") && entry.at("files").is_object()) {
    listed = entry.at("files").get<std::map<std::string, std::string>>();
  } else {
    f.push_back("manifest entry lists no files");
  }
  for (const auto& [rel, sum] : listed) {
    const fs::path p = dir / rel;
    if (!fs::exists(p)) {
      f.push_back("listed file " + rel + " is missing");
    } else if (sha256_file(p) != sum) {
      f.push_back("checksum mismatch for " + rel);
    }
  }
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (!listed.count(rel)) f.push_back("file " + rel + " is not listed in the manifest");
  }

  try {
    const MultimodalCase c = read_case(dir);
    if (fs::is_directory(dir / "raw")) {
      const Mask brain = case_brain_mask(c);
      for (Modality m : kModalities) {
        const auto raw = nifti::read_scalar(dir / "raw" / (std::string(name(m)) + ".nii"));
        require_same_geometry(raw, c.seg, ("raw " + std::string(name(m))).c_str());
        check_rank_order(raw, c.modality(m), brain, std::string(name(m)), f);
      }
    }
    const auto freq = metrics::class_frequencies(c.seg);
    const std::size_t sum = std::accumulate(freq.counts.begin(), freq.counts.end(), std::size_t{0});
    if (sum != freq.total) f.push_back("class counts do not sum to the voxel total");
  } catch (const std::exception& e) {
    f.push_back(e.what());
  }
  return cf;
}

}  // namespace

void PipelineConfig::validate() const {
  if (count < 1) usage_error("count must be >= 1");
  if (jobs < 1) usage_error("jobs must be >= 1");
  if (atlas_dir.empty()) usage_error("config is missing atlas_dir");
  if (reference.empty()) usage_error("config is missing reference");
  if (intensity_model.empty()) usage_error("config is missing intensity_model");
  if (output.empty()) usage_error("config is missing output");
  for (const auto& [key, r] : growth_ranges) {
    growth::GrowthParams probe;
    if (!growth_field(probe, key)) usage_error("growth parameter \"" + key + "\" cannot be sampled from a range");
    if (!(r.min <= r.max)) usage_error("growth range for \"" + key + "\" has min > max");
  }
  growth.validate();
  synth.validate();
}

const std::vector<std::string>& rangeable_growth_fields() {
  static const std::vector<std::string> names{"alpha_pi", "beta_ip",  "c_h",        "d_w",
                                              "gamma",    "kappa_gw", "kappa_i",    "rho_i",
                                              "rho_p",    "seed_amplitude", "seed_sigma", "sigma_h",
                                              "t_final",  "tau_i",    "tau_n",      "tau_p"};
  return names;
}

PipelineConfig config_from_json(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) usage_error("pipeline config must be a JSON object");
  PipelineConfig c;
  static const std::set<std::string> known{"atlas_dir", "reference", "intensity_model", "growth", "growth_ranges",
                                           "synth",     "count",     "seed",            "jobs",   "output"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) usage_error("unknown config key \"" + key + "\"");
  }
  try {
    if (j.contains("atlas_dir")) c.atlas_dir = resolve(base_dir, j.at("atlas_dir").get<std::string>());
    if (j.contains("reference")) c.reference = resolve(base_dir, j.at("reference").get<std::string>());
    if (j.contains("intensity_model")) {
      c.intensity_model = resolve(base_dir, j.at("intensity_model").get<std::string>());
    }
    if (j.contains("output")) c.output = resolve(base_dir, j.at("output").get<std::string>());
    if (j.contains("count")) c.count = j.at("count").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("jobs")) c.jobs = j.at("jobs").get<std::size_t>();
    if (j.contains("growth")) {
      apply_json(j.at("growth"), c.growth);
      if (j.at("growth").contains("seed_center")) c.seed_center = c.growth.seed_center;
    }
    if (j.contains("synth")) apply_json(j.at("synth"), c.synth);
    if (j.contains("growth_ranges")) {
      for (const auto& [key, value] : j.at("growth_ranges").items()) {
        const auto pair = value.get<std::vector<double>>();
        if (pair.size() != 2) usage_error("growth range for \"" + key + "\" must be [min, max]");
        c.growth_ranges[key] = {pair[0], pair[1]};
      }
    }
  } catch (const nlohmann::json::exception& e) {
    usage_error(std::string("malformed pipeline config: ") + e.what());
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  return config_from_json(read_json(path), fs::absolute(path).parent_path());
}

Json to_json(const PipelineConfig& c) {
  Json ranges = Json::object();
  for (const auto& [k, r] : c.growth_ranges) ranges[k] = {r.min, r.max};
  Json growth = to_json(c.growth);
  if (!c.seed_center) growth.erase("seed_center");
  Json synth = to_json(c.synth);
  synth.erase("rng_seed");
  return Json{{"atlas_dir", c.atlas_dir.string()},
              {"reference", c.reference.string()},
              {"intensity_model", c.intensity_model.string()},
              {"growth", growth},
              {"growth_ranges", ranges},
              {"synth", synth},
              {"count", c.count},
              {"seed", c.seed},
              {"jobs", c.jobs},
              {"output", c.output.string()}};
}

std::size_t DatasetManifest::succeeded() const {
  return static_cast<std::size_t>(std::count_if(cases.begin(), cases.end(), [](const CaseEntry& e) { return e.ok; }));
}

Json to_json(const CaseEntry& e) {
  Json j{{"index", e.index}, {"id", e.id}, {"atlas_id", e.atlas_id}, {"seed", e.seed},
         {"status", e.ok ? "ok" : "failed"}};
  if (e.ok) {
    j["growth_params"] = to_json(e.growth);
    j["adaptation"] = adaptation_summary(e.adaptation);
    j["files"] = e.files;
  } else {
    j["error"] = e.error;
  }
  return j;
}

Json to_json(const DatasetManifest& m) {
  Json cases = Json::array();
  for (const auto& e : m.cases) cases.push_back(to_json(e));
  return Json{{"revision", m.revision}, {"master_seed", m.master_seed}, {"cases", cases}};
}

std::string case_id(std::size_t index) {
  std::ostringstream os;
  os << "case_" << std::setw(4) << std::setfill('0') << index;
  return os.str();
}

growth::GrowthParams sample_growth_params(const growth::GrowthParams& base,
                                          const std::map<std::string, ParamRange>& ranges, Rng& rng) {
  growth::GrowthParams p = base;
  for (const auto& [key, r] : ranges) {
    double* field = growth_field(p, key);
    if (!field) usage_error("growth parameter \"" + key + "\" cannot be sampled from a range");
    *field = rng.uniform(r.min, r.max);
  }
  return p;
}

std::array<double, 3> random_white_matter_seed(const LabelVolume& labels, Rng& rng) {
  const auto white = phantom::voxels_with_label(labels, label::kWhite);
  if (white.empty()) data_error("label volume has no white matter to seed a tumor in");
  const std::size_t v = white[rng.below(white.size())];
  const auto& d = labels.geometry().dims;
  return {static_cast<double>(v % d[0]), static_cast<double>((v / d[0]) % d[1]), static_cast<double>(v / (d[0] * d[1]))};
}

LabelVolume merge_tumor(const LabelVolume& healthy, const LabelVolume& tumor) {
  require_same_geometry(healthy, tumor, "merge_tumor");
  LabelVolume out = healthy;
  for (std::size_t v = 0; v < out.size(); ++v) {
    if (healthy[v] != label::kBackground && label::is_tumor(tumor[v])) out[v] = tumor[v];
  }
  return out;
}

std::vector<fs::path> case_directories(const fs::path& root) {
  if (!fs::is_directory(root)) data_error(root.string() + " is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "seg.nii")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

adapt::ReferenceDistribution load_reference(const fs::path& path) {
  if (fs::is_directory(path)) {
    std::vector<MultimodalCase> cases;
    for (const auto& d : case_directories(path)) cases.push_back(read_case(d));
    if (cases.empty()) data_error("no reference cases found under " + path.string());
    return adapt::build_reference(cases);
  }
  return reference_from_json(read_json(path));
}

synth::IntensityModel load_intensity_model(const fs::path& path) {
  if (fs::is_directory(path)) {
    std::vector<MultimodalCase> cases;
    for (const auto& d : case_directories(path)) cases.push_back(read_case(d));
    if (cases.empty()) data_error("no cases found under " + path.string());
    return synth::estimate_intensity_model(cases);
  }
  auto model = intensity_model_from_json(read_json(path));
  model.require_complete();
  return model;
}

DatasetManifest generate(const PipelineConfig& config) {
  config.validate();
  Inputs in{reg::read_atlas_set(config.atlas_dir), load_reference(config.reference),
            load_intensity_model(config.intensity_model)};
  fs::create_directories(config.output);

  DatasetManifest manifest;
  manifest.master_seed = config.seed;
  manifest.cases.resize(config.count);
  parallel_for(config.count, config.jobs, [&](std::size_t k) { manifest.cases[k] = generate_case(config, in, k); });
  write_json(to_json(manifest), config.output / "manifest.json");
  return manifest;
}

bool ValidationReport::ok() const {
  if (!dataset_findings.empty()) return false;
  return std::all_of(cases.begin(), cases.end(), [](const CaseFindings& c) { return c.findings.empty(); });
}

ValidationReport validate_dataset(const fs::path& dir) {
  ValidationReport r;
  if (!fs::is_directory(dir)) {
    r.dataset_findings.push_back(dir.string() + " is not a directory");
    return r;
  }
  Json manifest;
  try {
    manifest = read_json(dir / "manifest.json");
  } catch (const Error& e) {
    r.dataset_findings.push_back(std::string("manifest: ") + e.what());
    return r;
  }
  if (manifest.value("revision", std::string()) != kDatasetRevision) {
    r.dataset_findings.push_back("manifest revision is not " + std::string(kDatasetRevision));
  }
  if (!manifest.contains("cases") || !manifest.at("cases").is_array()) {
    r.dataset_findings.push_back("manifest has no case list");
    return r;
  }

  std::set<std::string> expected;
  for (const auto& entry : manifest.at("cases")) {
    const std::string id = entry.value("id", std::string());
    if (id.empty()) {
      r.dataset_findings.push_back("manifest entry without an id");
      continue;
    }
    if (entry.value("status", std::string()) != "ok") {
      if (fs::exists(dir / id)) r.dataset_findings.push_back("failed case " + id + " left a directory behind");
      continue;
    }
    expected.insert(id);
    r.cases.push_back(validate_case(dir / id, entry));
  }
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && !expected.count(e.path().filename().string())) {
      r.dataset_findings.push_back("directory " + e.path().filename().string() + " is not listed in the manifest");
    }
  }
  return r;
}

Json to_json(const ValidationReport& r) {
  Json cases = Json::array();
  for (const auto& c : r.cases) cases.push_back({{"id", c.id}, {"ok", c.findings.empty()}, {"findings", c.findings}});
  return Json{{"ok", r.ok()}, {"dataset_findings", r.dataset_findings}, {"cases", cases}};
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) data_error("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) data_error("sha256 initialisation failed");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = in.gcount();
    if (got > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(got));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  return hex(digest, len);
}

}  // namespace tumorsynth::pipeline
