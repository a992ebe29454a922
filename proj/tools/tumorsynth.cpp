#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tumorsynth/adapt.hpp"
#include "tumorsynth/case.hpp"
#include "tumorsynth/growth.hpp"
#include "tumorsynth/metrics.hpp"
#include "tumorsynth/nifti.hpp"
#include "tumorsynth/parallel.hpp"
#include "tumorsynth/phantom.hpp"
#include "tumorsynth/pipeline.hpp"
#include "tumorsynth/registration.hpp"
#include "tumorsynth/serialize.hpp"
#include "tumorsynth/synth.hpp"

namespace fs = std::filesystem;
using namespace tumorsynth;

namespace {

struct Globals {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<fs::path> output;
};

// A module config may be given on its own or as one section of a pipeline
// config. A pipeline config lacking the section yields defaults.
Json config_section(const Globals& g, const char* key) {
  if (!g.config) return Json::object();
  const Json j = read_json(*g.config);
  if (!j.is_object()) usage_error(g.config->string() + " must hold a JSON object");
  if (j.contains(key)) return j.at(key);
  if (j.contains("atlas_dir") || j.contains("count") || j.contains("output")) return Json::object();
  return j;
}

fs::path require_output(const Globals& g) {
  if (!g.output) usage_error("--output is required");
  fs::create_directories(*g.output);
  return *g.output;
}

void print(const Json& j) { std::cout << j.dump(2) << "\n"; }

std::array<double, 3> parse_triplet(const std::string& s) {
  std::array<double, 3> out{};
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &out[0], &out[1], &out[2]) != 3) {
    usage_error("expected x,y,z but got \"" + s + "\"");
  }
  return out;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  fs::path labels;
  std::optional<std::string> seed_center;
};

void run_simulate(const Globals& g, const SimulateArgs& a) {
  growth::GrowthParams params;
  const Json section = config_section(g, "growth");
  apply_json(section, params);
  const LabelVolume labels = nifti::read_label(a.labels);
  if (a.seed_center) {
    params.seed_center = parse_triplet(*a.seed_center);
  } else if (!section.contains("seed_center")) {
    Rng rng(g.seed.value_or(0));
    params.seed_center = pipeline::random_white_matter_seed(labels, rng);
  }
  const fs::path out = require_output(g);
  const auto result = growth::simulate(labels, params);

  nifti::write(to_scalar(result.final.p), out / "p.nii");
  nifti::write(to_scalar(result.final.i), out / "i.nii");
  nifti::write(to_scalar(result.final.n), out / "n.nii");
  nifti::write(result.tumor_labels, out / "tumor_labels.nii");
  std::ofstream csv(out / "mass_series.csv");
  csv << "t,mass_p,mass_i,mass_n\n";
  char line[128];
  for (const auto& s : result.mass_series) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g\n", s.t, s.mass_p, s.mass_i, s.mass_n);
    csv << line;
  }
  if (!csv) data_error("failed to write mass_series.csv");
  write_json(to_json(params), out / "growth_params.json");
  std::cerr << "simulated to t=" << result.final.t << " in " << result.mass_series.size() << " samples\n";
}

// ---------------------------------------------------------------- register

struct RegisterArgs {
  fs::path fixed, moving;
  std::optional<fs::path> exclude;
};

void run_register(const Globals& g, const RegisterArgs& a) {
  reg::RegistrationParams params;
  apply_json(config_section(g, "registration"), params);
  const ScalarVolume fixed = nifti::read_scalar(a.fixed);
  const ScalarVolume moving = nifti::read_scalar(a.moving);
  require_same_geometry(fixed, moving, "register");
  Mask exclude(fixed.geometry(), 0);
  if (a.exclude) {
    exclude = nifti::read_label(*a.exclude);
    require_same_geometry(fixed, exclude, "exclusion mask");
  }
  const fs::path out = require_output(g);
  const auto result = reg::register_images(fixed, moving, exclude, params);
  const auto phi = reg::exponentiate(result.velocity);

  nifti::write(to_scalar(result.velocity.vx), out / "velocity_x.nii");
  nifti::write(to_scalar(result.velocity.vy), out / "velocity_y.nii");
  nifti::write(to_scalar(result.velocity.vz), out / "velocity_z.nii");
  nifti::write(reg::warp(moving, phi), out / "warped.nii");
  Json report = to_json(result);
  report["registration_params"] = to_json(params);
  write_json(report, out / "report.json");
  print(report);
}

// ----------------------------------------------------------- enrich-labels

struct EnrichArgs {
  fs::path case_dir, atlas_dir;
};

void run_enrich(const Globals& g, const EnrichArgs& a) {
  reg::RegistrationParams params;
  apply_json(config_section(g, "registration"), params);
  const MultimodalCase c = read_case(a.case_dir);
  const auto atlases = reg::read_atlas_set(a.atlas_dir);
  const fs::path out = g.output ? require_output(g) : a.case_dir;
  const auto result = reg::enrich_case(c, atlases, params, g.jobs.value_or(1));

  nifti::write(result.seg, out / "seg.nii");
  Json outcomes = Json::array();
  for (const auto& o : result.atlases) outcomes.push_back(to_json(o));
  const Json report{{"case_id", c.id},
                    {"atlases", outcomes},
                    {"registration_params", to_json(params)},
                    {"class_frequencies", to_json(metrics::class_frequencies(result.seg))}};
  write_json(report, out / "fusion_report.json");
  print(report);
}

// -------------------------------------------------------------- synthesize

struct SynthesizeArgs {
  fs::path labels, model;
  std::optional<fs::path> species;
  std::string id = "synthetic";
};

void run_synthesize(const Globals& g, const SynthesizeArgs& a) {
  synth::SynthParams params;
  apply_json(config_section(g, "synth"), params);
  if (g.seed) params.rng_seed = *g.seed;
  const LabelVolume labels = nifti::read_label(a.labels);
  const auto model = pipeline::load_intensity_model(a.model);

  std::optional<growth::SpeciesState> species;
  if (a.species) {
    species.emplace();
    species->p = to_field(nifti::read_scalar(*a.species / "p.nii"));
    species->i = to_field(nifti::read_scalar(*a.species / "i.nii"));
    species->n = to_field(nifti::read_scalar(*a.species / "n.nii"));
    require_same_geometry(species->p, labels, "species p");
    require_same_geometry(species->i, labels, "species i");
    require_same_geometry(species->n, labels, "species n");
  }
  const fs::path out = require_output(g);
  const MultimodalCase c = synth::synthesize(labels, species ? &*species : nullptr, model, params, a.id);
  write_case(c, out);
  write_json(Json{{"id", a.id}, {"rng_algorithm", kRngAlgorithm}, {"synth_params", to_json(params)}},
             out / "meta.json");
}

// ------------------------------------------------------------------- adapt

struct AdaptArgs {
  fs::path case_dir, reference;
};

void run_adapt(const Globals& g, const AdaptArgs& a) {
  const MultimodalCase c = read_case(a.case_dir);
  const auto ref = pipeline::load_reference(a.reference);
  const fs::path out = g.output ? require_output(g) : a.case_dir;
  auto [adapted, report] = adapt::adapt(c, ref);
  write_case(adapted, out);

  Json meta = Json::object();
  if (fs::exists(a.case_dir / "meta.json")) meta = read_json(a.case_dir / "meta.json");
  meta["adaptation"] = to_json(report);
  write_json(meta, out / "meta.json");
  print(to_json(report));
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::optional<std::size_t> count;
  std::optional<fs::path> atlas_dir, reference, intensity_model;
};

int run_generate(const Globals& g, const GenerateArgs& a) {
  pipeline::PipelineConfig cfg;
  if (g.config) cfg = pipeline::load_config(*g.config);
  if (a.count) cfg.count = *a.count;
  if (g.seed) cfg.seed = *g.seed;
  if (g.jobs) cfg.jobs = *g.jobs;
  if (g.output) cfg.output = fs::absolute(*g.output);
  if (a.atlas_dir) cfg.atlas_dir = fs::absolute(*a.atlas_dir);
  if (a.reference) cfg.reference = fs::absolute(*a.reference);
  if (a.intensity_model) cfg.intensity_model = fs::absolute(*a.intensity_model);

  const auto manifest = pipeline::generate(cfg);
  std::cerr << manifest.succeeded() << " of " << manifest.cases.size() << " cases generated under "
            << cfg.output.string() << "\n";
  return manifest.succeeded() > 0 ? 0 : static_cast<int>(ErrorKind::Data);
}

// ---------------------------------------------------------------- validate

int run_validate(const Globals& g, const std::optional<fs::path>& dataset) {
  const fs::path dir = dataset ? *dataset : (g.output ? *g.output : fs::path());
  if (dir.empty()) usage_error("validate needs a dataset directory");
  const auto report = pipeline::validate_dataset(dir);
  print(to_json(report));
  return report.ok() ? 0 : static_cast<int>(ErrorKind::Data);
}

// -------------------------------------------------------------- dice/stats

struct DiceArgs {
  fs::path pred, truth;
  bool per_class = false;
};

void run_dice(const DiceArgs& a) {
  const LabelVolume pred = nifti::read_label(a.pred);
  const LabelVolume truth = nifti::read_label(a.truth);
  Json out = Json::object();
  for (const auto& r : metrics::standard_regions()) out[r.name] = metrics::dice(pred, truth, r);
  if (a.per_class) {
    for (std::uint8_t l : label::kAll) {
      if (l == label::kBackground) continue;
      const auto r = metrics::single_class(l);
      out[r.name] = metrics::dice(pred, truth, r);
    }
  }
  print(out);
}

struct StatsArgs {
  std::optional<fs::path> seg, case_dir, reference;
  bool tumor_only = false;
};

void run_stats(const StatsArgs& a) {
  if (a.seg.has_value() == a.case_dir.has_value()) usage_error("stats needs exactly one of --seg or --case");
  if (a.seg) {
    LabelVolume seg = nifti::read_label(*a.seg);
    if (a.tumor_only) seg = metrics::tumor_only(seg);
    print(to_json(metrics::class_frequencies(seg)));
    return;
  }
  const MultimodalCase adapted = read_case(*a.case_dir);
  Json out{{"case_id", adapted.id},
           {"class_frequencies",
            to_json(metrics::class_frequencies(a.tumor_only ? metrics::tumor_only(adapted.seg) : adapted.seg))}};
  if (a.reference) {
    const auto ref = pipeline::load_reference(*a.reference);
    Json dist = Json::object();
    const bool has_raw = fs::is_directory(*a.case_dir / "raw");
    MultimodalCase raw = adapted;
    if (has_raw) {
      for (Modality m : kModalities) {
        raw.modality(m) = nifti::read_scalar(*a.case_dir / "raw" / (std::string(name(m)) + ".nii"));
      }
    }
    for (Modality m : kModalities) {
      Json row{{"adapted", adapt::distance_to_reference(adapted, ref, m)}};
      if (has_raw) row["synthetic"] = adapt::distance_to_reference(raw, ref, m);
      dist[std::string(name(m))] = row;
    }
    out["wasserstein1_to_reference"] = dist;
  }
  print(out);
}

// -------------------------------------------------------------- make-demo

struct DemoArgs {
  std::size_t size = 64;
  std::size_t atlases = 3;
  std::size_t reference_cases = 4;
  std::size_t count = 2;
};

void run_make_demo(const Globals& g, const DemoArgs& a) {
  if (a.size < 16) usage_error("--size must be at least 16");
  if (a.atlases < 1 || a.reference_cases < 1) usage_error("need at least one atlas and one reference case");
  const fs::path out = require_output(g);
  const GridGeometry geom = phantom::default_geometry(a.size);

  for (std::size_t k = 0; k < a.atlases; ++k) {
    const std::string id = "atlas_" + std::to_string(k);
    reg::write_atlas(phantom::make_atlas(geom, k, id), out / "atlases" / id);
  }
  std::vector<MultimodalCase> corpus(a.reference_cases);
  parallel_for(a.reference_cases, g.jobs.value_or(1), [&](std::size_t k) {
    corpus[k] = phantom::make_reference_case(geom, 100 + k, "real_" + std::to_string(k));
  });
  for (const auto& c : corpus) write_case(c, out / "reference" / c.id);

  write_json(to_json(adapt::build_reference(corpus)), out / "reference_dist.json");
  write_json(to_json(phantom::synthetic_model()), out / "intensity_model.json");

  pipeline::PipelineConfig cfg;
  cfg.count = a.count;
  cfg.seed = g.seed.value_or(7);
  cfg.jobs = 1;
  // The default kinetics keep p below the default enhancing threshold, so
  // the demo lowers it to get all three tumor classes.
  cfg.growth.tau_p = 0.15;
  cfg.growth_ranges = {{"d_w", {0.08, 0.16}}, {"rho_p", {0.08, 0.12}}, {"t_final", {60.0, 120.0}}};
  Json j = to_json(cfg);
  j["atlas_dir"] = "atlases";
  j["reference"] = "reference_dist.json";
  j["intensity_model"] = "intensity_model.json";
  j["output"] = "dataset";
  write_json(j, out / "config.json");
  std::cerr << "demo bundle written to " << out.string() << "\n";
}

int exit_code(ErrorKind k) { return static_cast<int>(k); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic tumor-bearing brain MRI generation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_option("--seed", g.seed, "Master random seed");
  app.add_option("--jobs", g.jobs, "Worker thread bound")->check(CLI::PositiveNumber);
  app.add_option("--output", g.output, "Output directory");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Grow a tumor on a label volume");
  simulate->add_option("--labels", sim.labels, "Healthy label volume (.nii)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--seed-center", sim.seed_center, "Seed voxel as x,y,z (default: random white-matter voxel)");

  RegisterArgs ra;
  auto* registration = app.add_subcommand("register", "Diffeomorphic demons registration of two volumes");
  registration->add_option("--fixed", ra.fixed)->required()->check(CLI::ExistingFile);
  registration->add_option("--moving", ra.moving)->required()->check(CLI::ExistingFile);
  registration->add_option("--exclude", ra.exclude, "Mask of voxels ignored by the similarity")->check(CLI::ExistingFile);

  EnrichArgs ea;
  auto* enrich = app.add_subcommand("enrich-labels", "Add healthy tissue classes to a tumor segmentation");
  enrich->add_option("--case", ea.case_dir)->required()->check(CLI::ExistingDirectory);
  enrich->add_option("--atlases", ea.atlas_dir)->required()->check(CLI::ExistingDirectory);

  SynthesizeArgs sa;
  auto* synthesize = app.add_subcommand("synthesize", "Render multimodal intensities from labels");
  synthesize->add_option("--labels", sa.labels)->required()->check(CLI::ExistingFile);
  synthesize->add_option("--model", sa.model, "intensity_model.json or a corpus directory")->required()->check(
      CLI::ExistingPath);
  synthesize->add_option("--species", sa.species, "Directory holding p.nii, i.nii, n.nii")->check(
      CLI::ExistingDirectory);
  synthesize->add_option("--id", sa.id, "Case id");

  AdaptArgs aa;
  auto* adapt_cmd = app.add_subcommand("adapt", "Match a case's intensity distributions to a reference");
  adapt_cmd->add_option("--case", aa.case_dir)->required()->check(CLI::ExistingDirectory);
  adapt_cmd->add_option("--reference", aa.reference, "reference_dist.json or a corpus directory")->required()->check(
      CLI::ExistingPath);

  GenerateArgs ga;
  auto* generate = app.add_subcommand("generate", "Generate a synthetic dataset");
  generate->add_option("--count", ga.count)->check(CLI::PositiveNumber);
  generate->add_option("--atlas-dir", ga.atlas_dir)->check(CLI::ExistingDirectory);
  generate->add_option("--reference", ga.reference)->check(CLI::ExistingPath);
  generate->add_option("--intensity-model", ga.intensity_model)->check(CLI::ExistingPath);

  std::optional<fs::path> dataset;
  auto* validate = app.add_subcommand("validate", "Check a generated dataset");
  validate->add_option("dataset", dataset, "Dataset directory (default: --output)");

  DiceArgs da;
  auto* dice = app.add_subcommand("dice", "Dice overlap of tumor regions");
  dice->add_option("--pred", da.pred)->required()->check(CLI::ExistingFile);
  dice->add_option("--truth", da.truth)->required()->check(CLI::ExistingFile);
  dice->add_flag("--per-class", da.per_class, "Also report every single label");

  StatsArgs st;
  auto* stats = app.add_subcommand("stats", "Class frequencies and distribution distances");
  stats->add_option("--seg", st.seg)->check(CLI::ExistingFile);
  stats->add_option("--case", st.case_dir)->check(CLI::ExistingDirectory);
  stats->add_option("--reference", st.reference, "Also report W1 to this reference")->check(CLI::ExistingPath);
  stats->add_flag("--tumor-only", st.tumor_only, "Collapse healthy classes to background first");

  DemoArgs demo;
  auto* make_demo = app.add_subcommand("make-demo", "Write phantom atlases, a reference corpus and a config");
  make_demo->add_option("--size", demo.size, "Grid edge length in voxels");
  make_demo->add_option("--atlases", demo.atlases);
  make_demo->add_option("--reference-cases", demo.reference_cases);
  make_demo->add_option("--count", demo.count, "Case count written into config.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code(ErrorKind::Usage);
  }

  try {
    if (*simulate) run_simulate(g, sim);
    else if (*registration) run_register(g, ra);
    else if (*enrich) run_enrich(g, ea);
    else if (*synthesize) run_synthesize(g, sa);
    else if (*adapt_cmd) run_adapt(g, aa);
    else if (*generate) return run_generate(g, ga);
    else if (*validate) return run_validate(g, dataset);
    else if (*dice) run_dice(da);
    else if (*stats) run_stats(st);
    else if (*make_demo) run_make_demo(g, demo);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(ErrorKind::Data);
  }
  return 0;
}
