#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "txembed/date.hpp"
#include "txembed/ingest.hpp"

namespace txembed {

enum class FeatureKind { binary_presence, count };

/// Lookback window relative to the index date. A month is 30 days.
struct LookbackWindow {
    enum class Type { at_index, last_k_months, lifetime };
    Type type = Type::lifetime;
    int months = 0;  // only for last_k_months, >= 1

    static LookbackWindow at_index() { return {Type::at_index, 0}; }
    static LookbackWindow lifetime() { return {Type::lifetime, 0}; }
    static LookbackWindow last_months(int k);

    /// "at_index", "lifetime", "last_<k>_months"
    static LookbackWindow parse(std::string_view token);
    std::string to_string() const;
};

struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::binary_presence;
    std::set<std::string> codes;
    LookbackWindow window;
};

/// Loads a JSON array of {"name", "kind", "codes", "window"} objects.
std::vector<FeatureSpec> load_feature_specs(const std::filesystem::path& path);
std::vector<FeatureSpec> parse_feature_specs(std::string_view json_text);
std::string feature_specs_to_json(std::span<const FeatureSpec> specs);

/// Aggregates the patient's events matching `spec` strictly before `as_of`
/// inside the feature's window. `events` must be sorted by patient_id.
double lookback_aggregate(std::span<const EventRecord> events, std::string_view patient_id, const FeatureSpec& spec,
                          Day as_of);

inline constexpr const char* kAgeFeature = "age";
inline constexpr const char* kGenderFeature = "gender";

/// Covariate names in vector order: age, gender, then one per spec.
std::vector<std::string> covariate_names(std::span<const FeatureSpec> specs);

/// Age at index (floor years), gender indicator (female 1, male 0, unknown
/// 0.5), then lookback_aggregate for each spec.
std::vector<double> assemble_covariates(std::string_view patient_id, Day index_date,
                                        std::span<const EventRecord> events, std::span<const FeatureSpec> specs,
                                        const std::map<std::string, Demographics>& demographics);

}  // namespace txembed
