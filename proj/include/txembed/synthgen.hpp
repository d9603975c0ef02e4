#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "txembed/cohort.hpp"
#include "txembed/features.hpp"
#include "txembed/ingest.hpp"

namespace txembed {

/// Placement of the latent treatment vectors.
///  gaussian:  i.i.d. standard normal coordinates.
///  clustered: a fixed planar template (tight pair at the origin, tight pair
///             on the radius-2 ring, a ring neighbour of that pair, a point
///             between the rings, isolated points on the radius-3 ring),
///             randomly rotated and mirrored, with small jitter. Only the
///             first two latent coordinates are used.
enum class LatentLayout { gaussian, clustered };

/// g(v) in effect = gamma * g(v).
///  linear: g(v) = v[0]
///  radial: g(v) = cos(pi * |v| / 2)
enum class EffectShape { linear, radial };

std::string to_string(LatentLayout layout);
std::string to_string(EffectShape shape);
LatentLayout parse_latent_layout(std::string_view token);
EffectShape parse_effect_shape(std::string_view token);

struct SynthConfig {
    int n_patients = 2000;
    int n_treatments = 8;
    /// Catalog drugs that are never prescribed. They only shape the
    /// embedding (PCA is fitted over the whole catalog).
    int n_reference_drugs = 4;
    int true_embedding_dim = 2;
    double effect_strength = 0.25;  // gamma
    /// Weights on the standardized covariates, in covariate order:
    /// age, gender, bronchitis count, panniculitis, ulcerative colitis, prior steroid count.
    std::vector<double> covariate_effect{0.05, 0.03, 0.04, 0.03, 0.05, 0.04};
    double noise_sd = 0.05;
    double base_rate = 0.4;
    std::uint64_t seed = 0;
    LatentLayout layout = LatentLayout::gaussian;
    EffectShape effect_shape = EffectShape::linear;
    /// Spread of the log treatment shares; 0 assigns treatments round robin.
    double treatment_share_sd = 0.0;
    /// Thermometer resolution of the synthetic knowledge-base tokens.
    double token_step = 0.1;
};

SynthConfig load_synth_config(const std::filesystem::path& path);
SynthConfig parse_synth_config(std::string_view json_text);
std::string synth_config_to_json(const SynthConfig& config);

struct SynthTruth {
    std::map<std::string, std::vector<double>> latent;  // catalog drug -> latent vector
    std::map<std::string, double> effects;              // treatment -> gamma * g(v)
    std::map<std::string, std::string> patient_treatment;
    /// Noise-free target before clipping: base + beta.x + effect.
    std::map<std::string, double> expected_target;
};

struct SynthData {
    SynthConfig config;
    std::vector<EventRecord> events;  // sorted by (patient_id, date)
    std::map<std::string, Demographics> demographics;
    std::vector<TreatmentCatalogEntry> catalog;
    CohortConfig cohort;
    std::vector<FeatureSpec> features;
    SynthTruth truth;
    /// Flat-file knowledge-base entries keyed by identifier (drug codes only).
    std::map<std::string, std::string> kegg_entries;
};

/// Deterministic given config.seed. Throws ConfigError for an invalid or
/// infeasible configuration (every noise-free target outside (0, 1)).
SynthData generate_synthetic(const SynthConfig& config);

/// Writes events.csv, demographics.csv, catalog.csv, features.json,
/// cohort.json, truth.json, synth_config.json and kegg_cache/<code>.
void write_synthetic(const SynthData& data, const std::filesystem::path& dir);

std::string truth_to_json(const SynthTruth& truth);
SynthTruth truth_from_json(std::string_view text);

}  // namespace txembed
