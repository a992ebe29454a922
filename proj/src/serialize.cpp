#include "tumorsynth/serialize.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace tumorsynth {
namespace {

using Setter = std::function<void(const Json&)>;

template <class T>
Setter setter(T& field, const std::string& key) {
  return [&field, key](const Json& v) {
    try {
      field = v.get<T>();
    } catch (const nlohmann::json::exception&) {
      usage_error("config key \"" + key + "\" has the wrong type");
    }
  };
}

void apply_fields(const Json& j, const std::map<std::string, Setter>& fields, const char* what) {
  if (!j.is_object()) usage_error(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto it = fields.find(key);
    if (it == fields.end()) usage_error(std::string("unknown ") + what + " key \"" + key + "\"");
    it->second(value);
  }
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) usage_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    usage_error(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_json(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) data_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) data_error("write failed for " + path.string());
}

Json to_json(const growth::GrowthParams& p) {
  return Json{{"d_w", p.d_w},
              {"kappa_gw", p.kappa_gw},
              {"kappa_i", p.kappa_i},
              {"rho_p", p.rho_p},
              {"rho_i", p.rho_i},
              {"alpha_pi", p.alpha_pi},
              {"beta_ip", p.beta_ip},
              {"gamma", p.gamma},
              {"c_h", p.c_h},
              {"sigma_h", p.sigma_h},
              {"seed_center", p.seed_center},
              {"seed_sigma", p.seed_sigma},
              {"seed_amplitude", p.seed_amplitude},
              {"t_final", p.t_final},
              {"cfl_safety", p.cfl_safety},
              {"tau_p", p.tau_p},
              {"tau_i", p.tau_i},
              {"tau_n", p.tau_n},
              {"record_every", p.record_every}};
}

void apply_json(const Json& j, growth::GrowthParams& p) {
  apply_fields(j,
               {{"d_w", setter(p.d_w, "d_w")},
                {"kappa_gw", setter(p.kappa_gw, "kappa_gw")},
                {"kappa_i", setter(p.kappa_i, "kappa_i")},
                {"rho_p", setter(p.rho_p, "rho_p")},
                {"rho_i", setter(p.rho_i, "rho_i")},
                {"alpha_pi", setter(p.alpha_pi, "alpha_pi")},
                {"beta_ip", setter(p.beta_ip, "beta_ip")},
                {"gamma", setter(p.gamma, "gamma")},
                {"c_h", setter(p.c_h, "c_h")},
                {"sigma_h", setter(p.sigma_h, "sigma_h")},
                {"seed_center", setter(p.seed_center, "seed_center")},
                {"seed_sigma", setter(p.seed_sigma, "seed_sigma")},
                {"seed_amplitude", setter(p.seed_amplitude, "seed_amplitude")},
                {"t_final", setter(p.t_final, "t_final")},
                {"cfl_safety", setter(p.cfl_safety, "cfl_safety")},
                {"tau_p", setter(p.tau_p, "tau_p")},
                {"tau_i", setter(p.tau_i, "tau_i")},
                {"tau_n", setter(p.tau_n, "tau_n")},
                {"record_every", setter(p.record_every, "record_every")}},
               "growth parameter");
}

Json to_json(const reg::RegistrationParams& p) {
  return Json{{"levels", p.levels},
              {"iters_per_level", p.iters_per_level},
              {"sigma_fluid", p.sigma_fluid},
              {"sigma_diff", p.sigma_diff},
              {"force_epsilon", p.force_epsilon},
              {"max_step", p.max_step}};
}

void apply_json(const Json& j, reg::RegistrationParams& p) {
  apply_fields(j,
               {{"levels", setter(p.levels, "levels")},
                {"iters_per_level", setter(p.iters_per_level, "iters_per_level")},
                {"sigma_fluid", setter(p.sigma_fluid, "sigma_fluid")},
                {"sigma_diff", setter(p.sigma_diff, "sigma_diff")},
                {"force_epsilon", setter(p.force_epsilon, "force_epsilon")},
                {"max_step", setter(p.max_step, "max_step")}},
               "registration parameter");
}

Json to_json(const synth::SynthParams& p) {
  return Json{{"pv_sigma", p.pv_sigma},
              {"noise_std_frac", p.noise_std_frac},
              {"bias_amplitude", p.bias_amplitude},
              {"bias_sigma", p.bias_sigma},
              {"rng_seed", p.rng_seed}};
}

void apply_json(const Json& j, synth::SynthParams& p) {
  apply_fields(j,
               {{"pv_sigma", setter(p.pv_sigma, "pv_sigma")},
                {"noise_std_frac", setter(p.noise_std_frac, "noise_std_frac")},
                {"bias_amplitude", setter(p.bias_amplitude, "bias_amplitude")},
                {"bias_sigma", setter(p.bias_sigma, "bias_sigma")},
                {"rng_seed", setter(p.rng_seed, "rng_seed")}},
               "synthesis parameter");
}

Json to_json(const synth::IntensityModel& m) {
  Json j = Json::object();
  for (const auto& [key, s] : m.table()) {
    j[std::to_string(key.first) + "/" + std::string(name(key.second))] = {{"mean", s.mean}, {"std", s.std}};
  }
  return j;
}

synth::IntensityModel intensity_model_from_json(const Json& j) {
  if (!j.is_object()) usage_error("intensity model must be a JSON object");
  synth::IntensityModel m;
  for (const auto& [key, value] : j.items()) {
    const auto slash = key.find('/');
    if (slash == std::string::npos) usage_error("intensity model key \"" + key + "\" is not <label>/<modality>");
    int l = -1;
    try {
      l = std::stoi(key.substr(0, slash));
    } catch (const std::exception&) {
      usage_error("intensity model key \"" + key + "\" has a non-numeric label");
    }
    if (l < 0 || l > 255) usage_error("intensity model key \"" + key + "\" has an invalid label");
    Modality mod;
    try {
      mod = modality_from_name(key.substr(slash + 1));
    } catch (const Error&) {
      usage_error("intensity model key \"" + key + "\" names an unknown modality");
    }
    if (!value.is_object() || !value.contains("mean") || !value.contains("std")) {
      usage_error("intensity model entry \"" + key + "\" needs mean and std");
    }
    m.set(static_cast<std::uint8_t>(l), mod, {value.at("mean").get<double>(), value.at("std").get<double>()});
  }
  return m;
}

Json to_json(const adapt::ReferenceDistribution& r) {
  Json tables = Json::object(), voxels = Json::object();
  for (const auto& [m, t] : r.quantiles) tables[std::string(name(m))] = t;
  for (const auto& [m, n] : r.corpus_voxels) voxels[std::string(name(m))] = n;
  const std::size_t q = r.quantiles.empty() ? 0 : r.quantiles.begin()->second.size();
  return Json{{"quantile_count", q}, {"corpus_cases", r.corpus_cases}, {"corpus_voxels", voxels},
              {"quantiles", tables}};
}

adapt::ReferenceDistribution reference_from_json(const Json& j) {
  adapt::ReferenceDistribution r;
  try {
    r.corpus_cases = j.value("corpus_cases", std::size_t{0});
    for (const auto& [key, value] : j.at("quantiles").items()) {
      r.quantiles[modality_from_name(key)] = value.get<std::vector<double>>();
    }
    if (j.contains("corpus_voxels")) {
      for (const auto& [key, value] : j.at("corpus_voxels").items()) {
        r.corpus_voxels[modality_from_name(key)] = value.get<std::size_t>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    data_error(std::string("malformed reference distribution: ") + e.what());
  }
  r.validate();
  return r;
}

Json to_json(const adapt::AdaptationReport& r) {
  Json mods = Json::object();
  for (const auto& [m, mr] : r.modalities) {
    mods[std::string(name(m))] = {{"wasserstein1_before", mr.wasserstein1_before},
                                  {"wasserstein1_after", mr.wasserstein1_after},
                                  {"degenerate", mr.degenerate}};
  }
  return Json{{"bins", r.bins}, {"quantiles", r.quantiles}, {"modalities", mods}};
}

Json to_json(const metrics::ImbalanceReport& r) {
  Json counts = Json::object();
  for (std::uint8_t l : label::kAll) counts[std::to_string(l)] = r.counts[l];
  return Json{{"counts", counts},
              {"total", r.total},
              {"foreground_max_min_ratio", optional_number(r.foreground_ratio)},
              {"tumor_to_healthy_ratio", optional_number(r.tumor_to_healthy)},
              {"all_class_max_min_ratio", optional_number(r.all_class_ratio)}};
}

Json to_json(const reg::RegistrationResult& r) {
  return Json{{"similarity_initial", r.similarity_initial},
              {"similarity_final", r.similarity_final},
              {"min_jacobian", r.min_jacobian},
              {"iterations_run", r.iterations_run},
              {"max_velocity", r.velocity.max_norm()}};
}

Json to_json(const reg::AtlasOutcome& o) {
  Json j{{"atlas_id", o.atlas_id}, {"ok", o.ok}};
  if (o.ok) {
    j["similarity_initial"] = o.similarity_initial;
    j["similarity_final"] = o.similarity_final;
    j["min_jacobian"] = o.min_jacobian;
  } else {
    j["error"] = o.error;
  }
  return j;
}

}  // namespace tumorsynth
