#include "txembed/pipeline.hpp"

#include <json.hpp>

#include "txembed/error.hpp"

namespace txembed {

using nlohmann::json;

CohortInputs load_cohort_inputs(const std::filesystem::path& events, const std::filesystem::path& demographics,
                                const std::filesystem::path& cohort, const std::filesystem::path& features) {
    CohortInputs in;
    in.events = parse_events(events);
    in.demographics = parse_demographics(demographics);
    in.cohort = load_cohort_config(cohort);
    in.features = load_feature_specs(features);
    return in;
}

CohortBuild build_cohort(const CohortInputs& inputs) {
    CohortBuild out;
    out.blocks = build_treatment_blocks(inputs.events, inputs.cohort.treatment_codes, inputs.cohort.washout_days,
                                        inputs.cohort.onset_days);
    out.targets.reserve(out.blocks.size());
    std::string patient;
    std::vector<EventRecord> steroids;
    for (const auto& b : out.blocks) {
        if (b.patient_id != patient) {
            patient = b.patient_id;
            steroids = steroid_events_for(inputs.events, patient, inputs.cohort.steroid_codes);
        }
        out.targets.push_back(compute_target(b, steroids));
    }
    out.master = build_master_table(out.blocks, inputs.events, inputs.features, inputs.demographics,
                                    inputs.cohort.steroid_codes);
    return out;
}

std::map<std::string, std::vector<std::string>> kegg_tokens_for_catalog(kegg::Client& client,
                                                                       std::span<const TreatmentCatalogEntry> catalog) {
    std::vector<std::string> codes;
    for (const auto& e : catalog)
        if (e.kegg_code) codes.push_back(*e.kegg_code);
    return kegg::collect_tokens(client, codes);
}

EvalConfig parse_eval_config(std::string_view json_text, EvalConfig base) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("evaluation config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("evaluation config must be a JSON object");
    auto& c = base;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "n_bootstrap") c.n_bootstrap = v.get<int>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "k_features") c.k_features = v.get<std::size_t>();
            else if (key == "feature_selection") c.feature_selection = v.get<bool>();
            else if (key == "methods") {
                c.methods.clear();
                for (const auto& m : v) c.methods.push_back(parse_embedding_method(m.get<std::string>()));
            } else if (key == "one_hot_reference") {
                if (v.is_null()) c.one_hot_reference.reset();
                else c.one_hot_reference = v.get<std::string>();
            } else if (key == "jobs") c.jobs = v.get<unsigned>();
            else if (key == "n_trees") c.forest.n_trees = v.get<int>();
            else if (key == "colsample_bynode") c.forest.colsample_bynode = v.get<double>();
            else if (key == "min_child_weight") c.forest.min_child_weight = v.get<double>();
            else if (key == "max_depth") c.forest.max_depth = v.get<int>();
            else if (key == "min_samples_leaf") c.forest.min_samples_leaf = v.get<int>();
            else if (key == "subsample") c.forest.subsample = v.get<double>();
            else throw ConfigError("evaluation config: unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("evaluation config: ") + e.what());
    }
    if (c.n_bootstrap < 1) throw ConfigError("n_bootstrap must be >= 1");
    if (c.forest.n_trees < 1) throw ConfigError("n_trees must be >= 1");
    if (c.methods.empty()) throw ConfigError("at least one method is required");
    return c;
}

std::string eval_config_to_json(const EvalConfig& c) {
    json methods = json::array();
    for (auto m : c.methods) methods.push_back(to_string(m));
    nlohmann::ordered_json j{{"n_bootstrap", c.n_bootstrap},
                             {"seed", c.seed},
                             {"k_features", c.k_features},
                             {"feature_selection", c.feature_selection},
                             {"methods", methods},
                             {"one_hot_reference", c.one_hot_reference ? json(*c.one_hot_reference) : json(nullptr)},
                             {"n_trees", c.forest.n_trees},
                             {"colsample_bynode", c.forest.colsample_bynode},
                             {"min_child_weight", c.forest.min_child_weight},
                             {"max_depth", c.forest.max_depth},
                             {"min_samples_leaf", c.forest.min_samples_leaf},
                             {"subsample", c.forest.subsample}};
    return j.dump(2);
}

}  // namespace txembed
