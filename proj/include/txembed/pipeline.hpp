#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "txembed/cohort.hpp"
#include "txembed/embeddings.hpp"
#include "txembed/evaluation.hpp"
#include "txembed/features.hpp"
#include "txembed/ingest.hpp"
#include "txembed/kegg.hpp"

namespace txembed {

/// Cohort inputs as laid out by `synth`: events.csv, demographics.csv,
/// cohort.json, features.json.
struct CohortInputs {
    std::vector<EventRecord> events;
    std::map<std::string, Demographics> demographics;
    CohortConfig cohort;
    std::vector<FeatureSpec> features;
};

CohortInputs load_cohort_inputs(const std::filesystem::path& events, const std::filesystem::path& demographics,
                                const std::filesystem::path& cohort, const std::filesystem::path& features);

struct CohortBuild {
    std::vector<TreatmentBlock> blocks;
    std::vector<std::optional<double>> targets;  // parallel to blocks
    MasterTable master;
};

CohortBuild build_cohort(const CohortInputs& inputs);

/// KEGG tokens for every catalog entry with a code, keyed by code.
std::map<std::string, std::vector<std::string>> kegg_tokens_for_catalog(kegg::Client& client,
                                                                       std::span<const TreatmentCatalogEntry> catalog);

/// Overlays the keys present in `json_text` onto `base`. Unknown keys throw
/// ConfigError. Keys: n_bootstrap, seed, k_features, feature_selection,
/// methods, one_hot_reference, jobs, n_trees, colsample_bynode,
/// min_child_weight, max_depth, min_samples_leaf, subsample.
EvalConfig parse_eval_config(std::string_view json_text, EvalConfig base = {});
std::string eval_config_to_json(const EvalConfig& config);

}  // namespace txembed
