#include "txembed/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "txembed/date.hpp"
#include "txembed/error.hpp"
#include "txembed/random.hpp"

namespace txembed {

namespace {

constexpr const char* kSteroidCode = "H02AB07";
constexpr const char* kBronchitis = "J40";
constexpr const char* kPanniculitis = "M79.3";
constexpr const char* kColitis = "K51.90";
constexpr int kRxSupply = 30;
constexpr int kOnsetDays = 28;

std::string pad(int value, int width) {
    auto s = std::to_string(value);
    return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

std::string treatment_name(int t) { return "synthdrug_" + pad(t + 1, 2); }
std::string reference_name(int r) { return "synthref_" + pad(r + 1, 2); }
std::string rx_code(int t) { return "RX" + pad(t + 1, 2); }
std::string kegg_code(int t) { return "D9" + pad(t + 1, 4); }

void validate(const SynthConfig& c) {
    if (c.n_treatments < 2) throw ConfigError("n_treatments must be >= 2");
    if (c.n_patients < c.n_treatments) throw ConfigError("n_patients must be >= n_treatments");
    if (c.n_reference_drugs < 0) throw ConfigError("n_reference_drugs must be >= 0");
    if (c.n_treatments + c.n_reference_drugs > 9999)
        throw ConfigError("n_treatments + n_reference_drugs must be <= 9999");
    if (c.true_embedding_dim < 1) throw ConfigError("true_embedding_dim must be >= 1");
    if (c.layout == LatentLayout::clustered && c.true_embedding_dim < 2)
        throw ConfigError("the clustered layout needs true_embedding_dim >= 2");
    if (!(c.noise_sd >= 0.0)) throw ConfigError("noise_sd must be >= 0");
    if (c.covariate_effect.size() != 6)
        throw ConfigError("covariate_effect needs 6 weights (age, gender, bronchitis, panniculitis, colitis, "
                          "prior steroids), got " + std::to_string(c.covariate_effect.size()));
    if (!(c.token_step > 0.0)) throw ConfigError("token_step must be > 0");
    if (!(c.treatment_share_sd >= 0.0)) throw ConfigError("treatment_share_sd must be >= 0");
}

std::vector<std::vector<double>> draw_latent(const SynthConfig& c) {
    std::mt19937_64 rng(derive_seed(c.seed, 0x1A7E));
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto n = static_cast<std::size_t>(c.n_treatments);
    const auto d = static_cast<std::size_t>(c.true_embedding_dim);
    std::vector<std::vector<double>> v(n, std::vector<double>(d, 0.0));
    if (c.layout == LatentLayout::gaussian) {
        v.resize(n + static_cast<std::size_t>(c.n_reference_drugs), std::vector<double>(d, 0.0));
        for (auto& row : v)
            for (auto& x : row) x = normal(rng);
        return v;
    }
    constexpr double pi = std::numbers::pi;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double rotation = 2.0 * pi * unit(rng);
    // Template in the plane before rotation: a tight pair at the origin, a
    // tight pair on the radius-2 ring, a ring neighbour of that pair, a point
    // between the rings and two isolated points on the radius-3 ring. Further
    // treatments are spread over the radius-3.5 ring.
    const double s0 = 0.15 * (1.0 + 0.3 * unit(rng)), s1 = 0.15 * (1.0 + 0.3 * unit(rng));
    std::vector<std::array<double, 2>> slots{
        {0.0, -s0 / 2}, {0.0, s0 / 2}, {2.0, -s1 / 2}, {2.0, s1 / 2},
        {2.0 * std::cos(0.7), 2.0 * std::sin(0.7)}, {-0.9, 0.0},
        {3.0 * std::cos(2.2), 3.0 * std::sin(2.2)}, {3.0 * std::cos(-2.0), 3.0 * std::sin(-2.0)}};
    for (std::size_t extra = 8; extra < n; ++extra) {
        const double a = 2.0 * pi * static_cast<double>(extra - 8) / static_cast<double>(n - 8) + 0.3;
        slots.push_back({3.5 * std::cos(a), 3.5 * std::sin(a)});
    }
    const double cr = std::cos(rotation), sr = std::sin(rotation);
    const double mirror = unit(rng) < 0.5 ? -1.0 : 1.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double x = slots[t][0] + 0.03 * normal(rng), y = mirror * (slots[t][1] + 0.03 * normal(rng));
        v[t][0] = cr * x - sr * y;
        v[t][1] = sr * x + cr * y;
    }
    // Interleave so that pair members and isolated treatments do not sit in
    // contiguous name ranges.
    std::shuffle(v.begin(), v.end(), rng);
    // Reference drugs: a loose cluster off to one side, so the treatments'
    // centroid does not coincide with the embedding origin.
    const double side = 2.0 * pi * unit(rng);
    for (int r = 0; r < c.n_reference_drugs; ++r) {
        std::vector<double> ref(d, 0.0);
        ref[0] = 6.0 * std::cos(side) + 0.7 * normal(rng);
        ref[1] = 6.0 * std::sin(side) + 0.7 * normal(rng);
        v.push_back(std::move(ref));
    }
    return v;
}

double effect_of(const SynthConfig& c, const std::vector<double>& v) {
    if (c.effect_shape == EffectShape::linear) return c.effect_strength * v[0];
    double r2 = 0.0;
    for (double x : v) r2 += x * x;
    return c.effect_strength * std::cos(std::numbers::pi * std::sqrt(r2) / 2.0);
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string s;
    for (const auto& t : tokens) s += (s.empty() ? "" : " ") + t;
    return s;
}

// Thermometer code per latent axis with complementary tokens, so every entry
// carries the same number of tokens and token overlap tracks L1 distance.
std::map<std::string, std::string> kegg_entries(const SynthConfig& c, const std::vector<std::vector<double>>& latent) {
    const auto d = static_cast<std::size_t>(c.true_embedding_dim);
    std::vector<long> lo(d), hi(d);
    for (std::size_t j = 0; j < d; ++j) {
        double mn = latent[0][j], mx = latent[0][j];
        for (const auto& v : latent) mn = std::min(mn, v[j]), mx = std::max(mx, v[j]);
        lo[j] = std::lround(std::floor(mn / c.token_step)) - 1;
        hi[j] = std::lround(std::ceil(mx / c.token_step)) + 1;
    }
    std::map<std::string, std::string> out;
    for (std::size_t t = 0; t < latent.size(); ++t) {
        const int ti = static_cast<int>(t);
        std::ostringstream e;
        e << "ENTRY       " << kegg_code(ti) << "                      Drug\n";
        e << "NAME        " << (ti < c.n_treatments ? treatment_name(ti) : reference_name(ti - c.n_treatments))
          << " (synthetic)\n";
        for (std::size_t j = 0; j < d; ++j) {
            const long level = std::lround(latent[t][j] / c.token_step) - lo[j];
            std::vector<std::string> tokens;
            for (long l = 0; l < hi[j] - lo[j]; ++l)
                tokens.push_back("A" + std::to_string(j) + (l < level ? "U" : "D") + std::to_string(l));
            e << (j == 0 ? "TARGET      " : "            ") << "latent axis " << j << " [SYN:" << join_tokens(tokens)
              << "]\n";
        }
        e << "///\n";
        out.emplace(kegg_code(ti), e.str());
    }
    return out;
}

std::string smiles_for(const std::vector<double>& v) {
    auto level = [](double x) { return static_cast<std::size_t>(std::clamp(std::lround(x + 5.0), 0L, 10L)); };
    std::string s = "N" + std::string(level(v[0]) + 1, 'C');
    if (v.size() > 1) s += "(=O)" + std::string(level(v[1]) + 1, 'C') + "O";
    return s;
}

std::vector<FeatureSpec> synth_features() {
    return {
        {"bronchitis_last_6_months", FeatureKind::count, {kBronchitis}, LookbackWindow::last_months(6)},
        {"panniculitis_lifetime", FeatureKind::binary_presence, {kPanniculitis}, LookbackWindow::lifetime()},
        {"ulcerative_colitis_lifetime", FeatureKind::binary_presence, {kColitis}, LookbackWindow::lifetime()},
        {"steroid_rx_last_12_months", FeatureKind::count, {kSteroidCode}, LookbackWindow::last_months(12)},
    };
}

struct PatientDraw {
    std::vector<EventRecord> events;
    Demographics demographics;
    double expected = 0.0;
};

PatientDraw draw_patient(const SynthConfig& c, int index, int treatment, double effect) {
    std::mt19937_64 rng(derive_seed(c.seed, 0x5EED, static_cast<std::uint64_t>(index)));
    auto uniform_int = [&](long a, long b) { return std::uniform_int_distribution<long>(a, b)(rng); };
    auto bernoulli = [&](double p) { return std::bernoulli_distribution(p)(rng); };
    std::normal_distribution<double> noise(0.0, 1.0);

    PatientDraw p;
    const std::string id = "P" + pad(index + 1, 6);
    const Day origin = parse_iso_date("2019-01-01");
    const Day index_date = add_days(origin, uniform_int(0, 729));
    const Day birth = add_days(index_date, -uniform_int(18 * 365, 80 * 365));
    const bool female = bernoulli(0.5);
    p.demographics = {id, birth, female ? Gender::female : Gender::male};

    auto add = [&](Day date, EventKind kind, const std::string& code, long supply, double qty) {
        p.events.push_back({id, date, kind, code, supply, qty});
    };
    const long bronchitis = uniform_int(0, 3);
    for (long k = 0; k < bronchitis; ++k) add(add_days(index_date, -uniform_int(1, 180)), EventKind::diagnosis, kBronchitis, 0, 0);
    const bool panniculitis = bernoulli(0.15);
    if (panniculitis) add(add_days(index_date, -uniform_int(1, 2000)), EventKind::diagnosis, kPanniculitis, 0, 0);
    const bool colitis = bernoulli(0.7);
    if (colitis) add(add_days(index_date, -uniform_int(1, 1500)), EventKind::diagnosis, kColitis, 0, 0);
    const long prior = uniform_int(0, 3);
    for (long k = 0; k < prior; ++k)
        add(add_days(index_date, -uniform_int(30, 360)), EventKind::prescription, kSteroidCode, 10, 10);

    const long n_rx = uniform_int(3, 6);
    for (long k = 0; k < n_rx; ++k)
        add(add_days(index_date, k * kRxSupply), EventKind::prescription, rx_code(treatment), kRxSupply, kRxSupply);

    const double age = age_in_years(birth, index_date);
    const std::array<double, 6> x{(age - 50.0) / 15.0,
                                  (female ? 1.0 : 0.0) - 0.5,
                                  (static_cast<double>(bronchitis) - 1.5) / 1.1,
                                  (panniculitis ? 1.0 : 0.0) - 0.15,
                                  (colitis ? 1.0 : 0.0) - 0.7,
                                  (static_cast<double>(prior) - 1.5) / 1.1};
    p.expected = c.base_rate + effect;
    for (std::size_t j = 0; j < x.size(); ++j) p.expected += c.covariate_effect[j] * x[j];
    const double y = std::clamp(p.expected + c.noise_sd * noise(rng), 0.0, 1.0);

    const Day onset_end = add_days(index_date, kOnsetDays);
    const long window = n_rx * kRxSupply - kOnsetDays;
    long remaining = std::lround(y * static_cast<double>(window));
    Day next = add_days(onset_end, 1);
    while (remaining > 0) {
        const long chunk = std::min<long>(remaining, 30);
        add(next, EventKind::prescription, kSteroidCode, chunk, static_cast<double>(chunk));
        next = add_days(next, chunk);
        remaining -= chunk;
    }
    std::stable_sort(p.events.begin(), p.events.end(),
                     [](const EventRecord& a, const EventRecord& b) { return a.date < b.date; });
    return p;
}

}  // namespace

std::string to_string(LatentLayout layout) { return layout == LatentLayout::gaussian ? "gaussian" : "clustered"; }
std::string to_string(EffectShape shape) { return shape == EffectShape::linear ? "linear" : "radial"; }

LatentLayout parse_latent_layout(std::string_view token) {
    if (token == "gaussian") return LatentLayout::gaussian;
    if (token == "clustered") return LatentLayout::clustered;
    throw ConfigError("unknown latent layout '" + std::string(token) + "' (gaussian, clustered)");
}

EffectShape parse_effect_shape(std::string_view token) {
    if (token == "linear") return EffectShape::linear;
    if (token == "radial") return EffectShape::radial;
    throw ConfigError("unknown effect shape '" + std::string(token) + "' (linear, radial)");
}

SynthConfig parse_synth_config(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synth config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("synth config must be a JSON object");
    SynthConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "n_patients") c.n_patients = value.get<int>();
            else if (key == "n_treatments") c.n_treatments = value.get<int>();
            else if (key == "n_reference_drugs") c.n_reference_drugs = value.get<int>();
            else if (key == "true_embedding_dim") c.true_embedding_dim = value.get<int>();
            else if (key == "effect_strength") c.effect_strength = value.get<double>();
            else if (key == "covariate_effect") c.covariate_effect = value.get<std::vector<double>>();
            else if (key == "noise_sd") c.noise_sd = value.get<double>();
            else if (key == "base_rate") c.base_rate = value.get<double>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "layout") c.layout = parse_latent_layout(value.get<std::string>());
            else if (key == "effect_shape") c.effect_shape = parse_effect_shape(value.get<std::string>());
            else if (key == "token_step") c.token_step = value.get<double>();
            else if (key == "treatment_share_sd") c.treatment_share_sd = value.get<double>();
            else throw ConfigError("unknown synth config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synth config has a value of the wrong type: ") + e.what());
    }
    validate(c);
    return c;
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_synth_config(ss.str());
}

std::string synth_config_to_json(const SynthConfig& c) {
    nlohmann::ordered_json j;
    j["n_patients"] = c.n_patients;
    j["n_treatments"] = c.n_treatments;
    j["n_reference_drugs"] = c.n_reference_drugs;
    j["true_embedding_dim"] = c.true_embedding_dim;
    j["effect_strength"] = c.effect_strength;
    j["covariate_effect"] = c.covariate_effect;
    j["noise_sd"] = c.noise_sd;
    j["base_rate"] = c.base_rate;
    j["seed"] = c.seed;
    j["layout"] = to_string(c.layout);
    j["effect_shape"] = to_string(c.effect_shape);
    j["token_step"] = c.token_step;
    j["treatment_share_sd"] = c.treatment_share_sd;
    return j.dump(2) + "\n";
}

SynthData generate_synthetic(const SynthConfig& config) {
    validate(config);
    SynthData data;
    data.config = config;
    const auto latent = draw_latent(config);

    std::vector<double> effects;
    for (int t = 0; t < config.n_treatments; ++t) {
        const auto& v = latent[static_cast<std::size_t>(t)];
        const auto name = treatment_name(t);
        effects.push_back(effect_of(config, v));
        data.truth.latent[name] = v;
        data.truth.effects[name] = effects.back();
        data.catalog.push_back({name, "synthetic", kegg_code(t), smiles_for(v)});
        data.cohort.treatment_codes[rx_code(t)] = name;
    }
    for (int r = 0; r < config.n_reference_drugs; ++r) {
        const int t = config.n_treatments + r;
        const auto& v = latent[static_cast<std::size_t>(t)];
        data.truth.latent[reference_name(r)] = v;
        data.catalog.push_back({reference_name(r), "synthetic reference", kegg_code(t), smiles_for(v)});
    }
    data.cohort.onset_days = kOnsetDays;
    data.cohort.washout_days = 30;
    data.cohort.steroid_codes = {kSteroidCode};
    data.features = synth_features();
    data.kegg_entries = kegg_entries(config, latent);

    // Treatment shares: lognormal weights, every treatment gets at least one patient.
    std::vector<double> share(static_cast<std::size_t>(config.n_treatments), 1.0);
    {
        std::mt19937_64 rng(derive_seed(config.seed, 0x54A7E));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto& w : share) w = std::exp(config.treatment_share_sd * normal(rng));
    }
    std::discrete_distribution<int> pick_treatment(share.begin(), share.end());

    std::size_t feasible = 0;
    for (int i = 0; i < config.n_patients; ++i) {
        int t = i % config.n_treatments;
        if (config.treatment_share_sd > 0.0 && i >= config.n_treatments) {
            std::mt19937_64 rng(derive_seed(config.seed, 0xA551, static_cast<std::uint64_t>(i)));
            t = pick_treatment(rng);
        }
        auto p = draw_patient(config, i, t, effects[static_cast<std::size_t>(t)]);
        if (p.expected > 0.0 && p.expected < 1.0) ++feasible;
        data.truth.patient_treatment[p.demographics.patient_id] = treatment_name(t);
        data.truth.expected_target[p.demographics.patient_id] = p.expected;
        data.demographics.emplace(p.demographics.patient_id, p.demographics);
        data.events.insert(data.events.end(), p.events.begin(), p.events.end());
    }
    if (feasible == 0)
        throw ConfigError("infeasible synth config: every noise-free target lies outside (0, 1); "
                          "reduce effect_strength or covariate_effect, or move base_rate toward 0.5");
    return data;
}

std::string truth_to_json(const SynthTruth& truth) {
    nlohmann::ordered_json j;
    j["latent"] = truth.latent;
    j["effects"] = truth.effects;
    j["patient_treatment"] = truth.patient_treatment;
    j["expected_target"] = truth.expected_target;
    return j.dump(2) + "\n";
}

SynthTruth truth_from_json(std::string_view text) {
    try {
        const auto j = nlohmann::json::parse(text);
        SynthTruth t;
        t.latent = j.at("latent").get<decltype(t.latent)>();
        t.effects = j.at("effects").get<decltype(t.effects)>();
        t.patient_treatment = j.at("patient_treatment").get<decltype(t.patient_treatment)>();
        t.expected_target = j.at("expected_target").get<decltype(t.expected_target)>();
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("truth.json: ") + e.what(), 0);
    }
}

void write_synthetic(const SynthData& data, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "kegg_cache");
    auto open = [&](const fs::path& p) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw Error("cannot write " + p.string());
        return out;
    };
    {
        auto out = open(dir / "events.csv");
        write_events(out, data.events);
    }
    {
        auto out = open(dir / "demographics.csv");
        write_demographics(out, data.demographics);
    }
    {
        auto out = open(dir / "catalog.csv");
        write_treatment_catalog(out, data.catalog);
    }
    open(dir / "features.json") << feature_specs_to_json(data.features);
    open(dir / "cohort.json") << cohort_config_to_json(data.cohort);
    open(dir / "truth.json") << truth_to_json(data.truth);
    open(dir / "synth_config.json") << synth_config_to_json(data.config);
    for (const auto& [code, text] : data.kegg_entries) open(dir / "kegg_cache" / code) << text;
}

}  // namespace txembed
