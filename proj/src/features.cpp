#include "txembed/features.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "txembed/error.hpp"

namespace txembed {

using nlohmann::json;

LookbackWindow LookbackWindow::last_months(int k) {
    if (k < 1) throw ConfigError("last_k_months requires k >= 1");
    return {Type::last_k_months, k};
}

LookbackWindow LookbackWindow::parse(std::string_view token) {
    if (token == "at_index") return at_index();
    if (token == "lifetime") return lifetime();
    constexpr std::string_view prefix = "last_", suffix = "_months";
    if (token.starts_with(prefix) && token.ends_with(suffix) && token.size() > prefix.size() + suffix.size()) {
        auto digits = token.substr(prefix.size(), token.size() - prefix.size() - suffix.size());
        if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }) &&
            digits.size() < 6)
            return last_months(std::stoi(std::string(digits)));
    }
    throw ConfigError("unknown window '" + std::string(token) + "'");
}

std::string LookbackWindow::to_string() const {
    switch (type) {
        case Type::at_index: return "at_index";
        case Type::lifetime: return "lifetime";
        case Type::last_k_months: return "last_" + std::to_string(months) + "_months";
    }
    return "?";
}

namespace {

FeatureSpec spec_from_json(const json& j) {
    FeatureSpec s;
    s.name = j.at("name").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "binary_presence" || kind == "binary")
        s.kind = FeatureKind::binary_presence;
    else if (kind == "count")
        s.kind = FeatureKind::count;
    else
        throw ConfigError("feature '" + s.name + "': unknown kind '" + kind + "'");
    for (const auto& c : j.at("codes")) s.codes.insert(c.get<std::string>());
    if (s.codes.empty()) throw ConfigError("feature '" + s.name + "': empty code set");
    const auto& w = j.at("window");
    if (w.is_string()) {
        s.window = LookbackWindow::parse(w.get<std::string>());
    } else {
        s.window = LookbackWindow::parse(w.at("type").get<std::string>() == "last_k_months"
                                             ? "last_" + std::to_string(w.at("k").get<int>()) + "_months"
                                             : w.at("type").get<std::string>());
    }
    return s;
}

}  // namespace

std::vector<FeatureSpec> parse_feature_specs(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("feature spec JSON: ") + e.what());
    }
    if (doc.is_object() && doc.contains("features")) doc = doc["features"];
    if (!doc.is_array()) throw ConfigError("feature spec JSON must be an array");
    std::vector<FeatureSpec> specs;
    try {
        for (const auto& j : doc) specs.push_back(spec_from_json(j));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("feature spec JSON: ") + e.what());
    }
    return specs;
}

std::vector<FeatureSpec> load_feature_specs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_feature_specs(ss.str());
}

std::string feature_specs_to_json(std::span<const FeatureSpec> specs) {
    json doc = json::array();
    for (const auto& s : specs)
        doc.push_back({{"name", s.name},
                       {"kind", s.kind == FeatureKind::count ? "count" : "binary_presence"},
                       {"codes", s.codes},
                       {"window", s.window.to_string()}});
    return doc.dump(2);
}

double lookback_aggregate(std::span<const EventRecord> events, std::string_view patient_id, const FeatureSpec& spec,
                          Day as_of) {
    auto lo = std::lower_bound(events.begin(), events.end(), patient_id,
                               [](const EventRecord& e, std::string_view id) { return e.patient_id < id; });
    long max_age_days = 0;  // how far back an event may lie, in days before as_of
    switch (spec.window.type) {
        case LookbackWindow::Type::at_index: max_age_days = 1; break;
        case LookbackWindow::Type::last_k_months: max_age_days = 30L * spec.window.months; break;
        case LookbackWindow::Type::lifetime: max_age_days = -1; break;
    }
    double count = 0;
    for (auto it = lo; it != events.end() && it->patient_id == patient_id; ++it) {
        const long age = days_between(it->date, as_of);
        if (age < 1) continue;  // on or after the index date
        if (max_age_days >= 0 && age > max_age_days) continue;
        if (!spec.codes.contains(it->code)) continue;
        count += 1;
    }
    if (spec.kind == FeatureKind::binary_presence) return count > 0 ? 1.0 : 0.0;
    return count;
}

std::vector<std::string> covariate_names(std::span<const FeatureSpec> specs) {
    std::vector<std::string> names{kAgeFeature, kGenderFeature};
    for (const auto& s : specs) names.push_back(s.name);
    return names;
}

std::vector<double> assemble_covariates(std::string_view patient_id, Day index_date,
                                        std::span<const EventRecord> events, std::span<const FeatureSpec> specs,
                                        const std::map<std::string, Demographics>& demographics) {
    auto it = demographics.find(std::string(patient_id));
    if (it == demographics.end()) throw Error("no demographics for patient '" + std::string(patient_id) + "'");
    std::vector<double> x;
    x.reserve(2 + specs.size());
    x.push_back(age_in_years(it->second.birth_date, index_date));
    switch (it->second.gender) {
        case Gender::female: x.push_back(1.0); break;
        case Gender::male: x.push_back(0.0); break;
        case Gender::unknown: x.push_back(0.5); break;
    }
    for (const auto& s : specs) x.push_back(lookback_aggregate(events, patient_id, s, index_date));
    return x;
}

}  // namespace txembed
