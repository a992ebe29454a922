#pragma once

#include <filesystem>

#include "json.hpp"
#include "tumorsynth/adapt.hpp"
#include "tumorsynth/growth.hpp"
#include "tumorsynth/metrics.hpp"
#include "tumorsynth/registration.hpp"
#include "tumorsynth/synth.hpp"

namespace tumorsynth {

using Json = nlohmann::json;

Json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; key order is sorted so output is
/// byte-stable.
void write_json(const Json& j, const std::filesystem::path& path);

// Objects may be partial: missing keys keep their defaults, unknown keys are
// rejected with Error(Usage).
Json to_json(const growth::GrowthParams& p);
void apply_json(const Json& j, growth::GrowthParams& p);

Json to_json(const reg::RegistrationParams& p);
void apply_json(const Json& j, reg::RegistrationParams& p);

Json to_json(const synth::SynthParams& p);
void apply_json(const Json& j, synth::SynthParams& p);

/// {"<label>/<modality>": {"mean": m, "std": s}, ...}
Json to_json(const synth::IntensityModel& m);
synth::IntensityModel intensity_model_from_json(const Json& j);

Json to_json(const adapt::ReferenceDistribution& r);
adapt::ReferenceDistribution reference_from_json(const Json& j);

Json to_json(const adapt::AdaptationReport& r);
Json to_json(const metrics::ImbalanceReport& r);
Json to_json(const reg::RegistrationResult& r);
Json to_json(const reg::AtlasOutcome& o);

}  // namespace tumorsynth
