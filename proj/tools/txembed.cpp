#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "txembed/cohort.hpp"
#include "txembed/embeddings.hpp"
#include "txembed/error.hpp"
#include "txembed/evaluation.hpp"
#include "txembed/ingest.hpp"
#include "txembed/kegg.hpp"
#include "txembed/manifest.hpp"
#include "txembed/meta.hpp"
#include "txembed/parallel.hpp"
#include "txembed/pipeline.hpp"
#include "txembed/synthgen.hpp"

namespace fs = std::filesystem;
using namespace txembed;

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    return out;
}

// Explicit flag, else <data>/<name>.
fs::path resolve(const std::string& flag, const std::string& data, const char* name, const char* what) {
    if (!flag.empty()) return flag;
    if (!data.empty()) return fs::path(data) / name;
    throw ConfigError("missing " + std::string(what) + " (pass it directly or give --data)");
}

class Run {
public:
    Run(std::string command, std::vector<std::string> argv, fs::path out) : out_(std::move(out)) {
        manifest_.command = std::move(command);
        manifest_.argv = std::move(argv);
        manifest_.started_at = utc_timestamp();
        fs::create_directories(out_);
    }

    RunManifest& manifest() { return manifest_; }
    fs::path output(const std::string& name) {
        manifest_.outputs.push_back(name);
        return out_ / name;
    }
    void input(const fs::path& path) { manifest_.add_input(path); }
    void finish() {
        manifest_.finished_at = utc_timestamp();
        write_manifest(manifest_, out_);
    }

private:
    RunManifest manifest_;
    fs::path out_;
};

bool network_enabled(bool offline) {
    if (offline) return false;
    const char* gate = std::getenv("TXEMBED_ALLOW_NETWORK");
    return gate && std::string_view(gate) == "1";
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

struct SynthOptions {
    std::string config, out;
    std::optional<std::uint64_t> seed;
    std::optional<int> n_patients, n_treatments, n_reference_drugs;
    std::optional<double> effect_strength, noise_sd;
    std::string layout, effect_shape;
};

int cmd_synth(const SynthOptions& o, const std::vector<std::string>& argv) {
    SynthConfig c = o.config.empty() ? SynthConfig{} : load_synth_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (o.n_patients) c.n_patients = *o.n_patients;
    if (o.n_treatments) c.n_treatments = *o.n_treatments;
    if (o.n_reference_drugs) c.n_reference_drugs = *o.n_reference_drugs;
    if (o.effect_strength) c.effect_strength = *o.effect_strength;
    if (o.noise_sd) c.noise_sd = *o.noise_sd;
    if (!o.layout.empty()) c.layout = parse_latent_layout(o.layout);
    if (!o.effect_shape.empty()) c.effect_shape = parse_effect_shape(o.effect_shape);

    Run run("synth", argv, o.out);
    if (!o.config.empty()) run.input(o.config);
    run.manifest().seed = c.seed;
    run.manifest().config_json = synth_config_to_json(c);
    const auto data = generate_synthetic(c);
    write_synthetic(data, o.out);
    for (const char* name : {"events.csv", "demographics.csv", "catalog.csv", "features.json", "cohort.json",
                             "truth.json", "synth_config.json", "kegg_cache/"})
        run.output(name);
    run.finish();
    std::cout << "wrote " << data.events.size() << " events for " << c.n_patients << " patients and "
              << c.n_treatments << " treatments to " << o.out << '\n';
    return 0;
}

struct ValidateOptions {
    std::string data, events, catalog, demographics, out;
};

int cmd_validate(const ValidateOptions& o, const std::vector<std::string>& argv) {
    Run run("ingest-validate", argv, o.out);
    const auto events_path = resolve(o.events, o.data, "events.csv", "--events");
    run.input(events_path);
    const auto events = parse_events(events_path);
    const auto report = validate_events(events);
    std::ostringstream text;
    print_report(text, report);
    auto catalog_path = o.catalog.empty() && !o.data.empty() ? fs::path(o.data) / "catalog.csv" : fs::path(o.catalog);
    if (!catalog_path.empty() && fs::exists(catalog_path)) {
        run.input(catalog_path);
        const auto catalog = parse_treatment_catalog(catalog_path);
        std::size_t coded = 0, with_smiles = 0;
        for (const auto& e : catalog) {
            coded += e.kegg_code.has_value();
            with_smiles += e.smiles.has_value();
        }
        text << "catalog: " << catalog.size() << " treatments, " << coded << " with a KEGG code, " << with_smiles
             << " with SMILES\n";
    }
    auto demo_path =
        o.demographics.empty() && !o.data.empty() ? fs::path(o.data) / "demographics.csv" : fs::path(o.demographics);
    if (!demo_path.empty() && fs::exists(demo_path)) {
        run.input(demo_path);
        const auto demo = parse_demographics(demo_path);
        std::size_t missing = 0;
        std::set<std::string> seen;
        for (const auto& e : events)
            if (seen.insert(e.patient_id).second && !demo.contains(e.patient_id)) ++missing;
        text << "demographics: " << demo.size() << " patients, " << missing << " event patients without a record\n";
    }
    open_out(run.output("validation.txt")) << text.str();
    run.finish();
    std::cout << text.str();
    if (report.violation_count() > 0) {
        std::cerr << "error: " << report.violation_count() << " event(s) failed validation\n";
        return 1;
    }
    return 0;
}

struct CohortOptions {
    std::string data, events, demographics, cohort, features, out;
};

int cmd_blocks(const CohortOptions& o, const std::vector<std::string>& argv) {
    Run run("blocks", argv, o.out);
    const auto events_path = resolve(o.events, o.data, "events.csv", "--events");
    const auto cohort_path = resolve(o.cohort, o.data, "cohort.json", "--cohort");
    run.input(events_path);
    run.input(cohort_path);
    const auto events = parse_events(events_path);
    const auto cohort = load_cohort_config(cohort_path);
    run.manifest().config_json = cohort_config_to_json(cohort);
    const auto blocks = build_treatment_blocks(events, cohort.treatment_codes, cohort.washout_days, cohort.onset_days);
    std::vector<std::optional<double>> targets;
    std::string patient;
    std::vector<EventRecord> steroids;
    std::size_t degenerate = 0;
    for (const auto& b : blocks) {
        if (b.patient_id != patient) {
            patient = b.patient_id;
            steroids = steroid_events_for(events, patient, cohort.steroid_codes);
        }
        targets.push_back(compute_target(b, steroids));
        degenerate += !targets.back().has_value();
    }
    auto out = open_out(run.output("blocks.csv"));
    write_blocks(out, blocks, targets);
    out.close();
    run.finish();
    std::cout << blocks.size() << " blocks (" << degenerate << " with an empty target window)\n";
    return 0;
}

int cmd_featurize(const CohortOptions& o, const std::vector<std::string>& argv) {
    Run run("featurize", argv, o.out);
    const auto events = resolve(o.events, o.data, "events.csv", "--events");
    const auto demo = resolve(o.demographics, o.data, "demographics.csv", "--demographics");
    const auto cohort = resolve(o.cohort, o.data, "cohort.json", "--cohort");
    const auto features = resolve(o.features, o.data, "features.json", "--features");
    for (const auto& p : {events, demo, cohort, features}) run.input(p);
    const auto inputs = load_cohort_inputs(events, demo, cohort, features);
    run.manifest().config_json = nlohmann::json{{"cohort", nlohmann::json::parse(cohort_config_to_json(inputs.cohort))},
                                                {"features", nlohmann::json::parse(feature_specs_to_json(inputs.features))}}
                                     .dump(2);
    const auto built = build_cohort(inputs);
    auto out = open_out(run.output("master.csv"));
    write_master_table(out, built.master);
    out.close();
    run.finish();
    std::cout << built.master.rows.size() << " rows, " << built.master.treatments().size() << " treatments, "
              << built.master.covariate_names.size() << " covariates\n";
    return 0;
}

struct EmbedOptions {
    std::string data, catalog, method = "kegg", cache_dir, out;
    std::size_t pca_k = 3, ngram = 3, hash_dim = 512;
    bool offline = false;
};

BuiltEmbedding embed_catalog(const EmbedOptions& o, EmbeddingMethod method, std::span<const TreatmentCatalogEntry> catalog,
                             const fs::path& cache_dir, std::size_t pca_k) {
    switch (method) {
        case EmbeddingMethod::one_hot: return {build_one_hot_embedding(catalog), std::nullopt};
        case EmbeddingMethod::smiles: return build_smiles_embedding(catalog, {o.ngram, o.hash_dim, pca_k});
        case EmbeddingMethod::kegg: {
            kegg::Client client({.cache_dir = cache_dir, .allow_network = network_enabled(o.offline)});
            const auto tokens = kegg_tokens_for_catalog(client, catalog);
            if (client.network_requests() > 0)
                std::clog << "fetched " << client.network_requests() << " KEGG entries into " << cache_dir << '\n';
            return build_kegg_embedding(catalog, tokens, pca_k);
        }
    }
    throw ConfigError("unknown method");
}

fs::path cache_dir_for(const EmbedOptions& o) {
    if (!o.cache_dir.empty()) return o.cache_dir;
    if (!o.data.empty()) return fs::path(o.data) / "kegg_cache";
    return "kegg_cache";
}

nlohmann::json embed_config(const EmbedOptions& o, EmbeddingMethod method, const fs::path& cache_dir, bool network) {
    nlohmann::json j{{"method", to_string(method)}};
    if (method != EmbeddingMethod::one_hot) j["pca_k"] = o.pca_k;
    if (method == EmbeddingMethod::smiles) {
        j["ngram"] = o.ngram;
        j["hash_dim"] = o.hash_dim;
    }
    if (method == EmbeddingMethod::kegg) {
        j["cache_dir"] = cache_dir.string();
        j["network"] = network;
    }
    return j;
}

int cmd_embed(const EmbedOptions& o, const std::vector<std::string>& argv) {
    const auto method = parse_embedding_method(o.method);
    Run run("embed", argv, o.out);
    const auto catalog_path = resolve(o.catalog, o.data, "catalog.csv", "--catalog");
    run.input(catalog_path);
    const auto catalog = parse_treatment_catalog(catalog_path);
    const auto cache_dir = cache_dir_for(o);
    const bool network = method == EmbeddingMethod::kegg && network_enabled(o.offline);
    run.manifest().config_json = embed_config(o, method, cache_dir, network).dump(2);
    const auto built = embed_catalog(o, method, catalog, cache_dir, o.pca_k);
    if (method == EmbeddingMethod::kegg && fs::exists(cache_dir)) run.input(cache_dir);
    const auto name = "embedding_" + to_string(method);
    auto out = open_out(run.output(name + ".csv"));
    write_embedding(out, built.embedding);
    out.close();
    if (built.pca) open_out(run.output("pca_" + to_string(method) + ".json")) << pca_model_to_json(*built.pca);
    run.finish();
    std::cout << built.embedding.vectors.size() << " treatments embedded, dim " << built.embedding.dim << '\n';
    for (const auto& e : catalog)
        if (!built.embedding.contains(e.generic_name))
            std::cout << "  no vector for " << e.generic_name << '\n';
    return 0;
}

struct EvalOptions {
    std::string master, config, out, methods, one_hot_reference;
    std::vector<std::string> embeddings;
    std::optional<int> bootstraps, trees;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> k_features;
    bool no_feature_selection = false;
    unsigned jobs = default_jobs();
};

EvalConfig eval_config_from(const EvalOptions& o) {
    EvalConfig c;
    if (!o.config.empty()) c = parse_eval_config(read_text(o.config), c);
    if (o.bootstraps) c.n_bootstrap = *o.bootstraps;
    if (o.trees) c.forest.n_trees = *o.trees;
    if (o.seed) c.seed = *o.seed;
    if (o.k_features) c.k_features = *o.k_features;
    if (o.no_feature_selection) c.feature_selection = false;
    if (!o.methods.empty()) {
        c.methods.clear();
        for (const auto& m : split_list(o.methods)) c.methods.push_back(parse_embedding_method(m));
    }
    if (!o.one_hot_reference.empty()) c.one_hot_reference = o.one_hot_reference;
    c.jobs = o.jobs;
    return parse_eval_config(eval_config_to_json(c), c);
}

EmbeddingSet load_embeddings(Run& run, const std::vector<std::string>& paths) {
    EmbeddingSet set;
    for (const auto& p : paths) {
        run.input(p);
        auto e = read_embedding(fs::path(p));
        const auto method = e.method;
        if (!set.emplace(method, std::move(e)).second)
            throw ConfigError("two embedding files for method " + to_string(method));
    }
    return set;
}

std::string audit_json(const EvalAudit& a) {
    nlohmann::ordered_json j{{"cells", a.cells},
                             {"disjointness_checks", a.disjointness_checks},
                             {"shared_baselines", a.shared_baselines},
                             {"expected_entries", a.expected_entries},
                             {"observed_entries", a.observed_entries},
                             {"grid_complete", a.grid_complete}};
    return j.dump(2) + "\n";
}

void write_eval_outputs(Run& run, const EvalResult& result) {
    auto rec = open_out(run.output("eval_records.csv"));
    write_eval_records(rec, result.records);
    rec.close();
    auto skips = open_out(run.output("eval_skips.csv"));
    write_eval_skips(skips, result.skips);
    skips.close();
    auto wr = open_out(run.output("win_rates.csv"));
    write_win_rates(wr, summarize_win_rates(result));
    wr.close();
    open_out(run.output("audit.json")) << audit_json(result.audit);
}

int cmd_evaluate(const EvalOptions& o, const std::vector<std::string>& argv) {
    const auto config = eval_config_from(o);
    Run run("evaluate", argv, o.out);
    if (!o.config.empty()) run.input(o.config);
    run.input(o.master);
    run.manifest().seed = config.seed;
    run.manifest().config_json = eval_config_to_json(config);
    const auto master = read_master_table(fs::path(o.master));
    const auto embeddings = load_embeddings(run, o.embeddings);
    for (auto m : config.methods)
        if (m != EmbeddingMethod::one_hot && !embeddings.contains(m))
            throw ConfigError("method " + to_string(m) + " needs --embedding embedding_" + to_string(m) + ".csv");
    const auto result = run_evaluation(master, embeddings, config);
    write_eval_outputs(run, result);
    run.finish();
    std::cout << result.records.size() << " records, " << result.skips.size() << " skips over "
              << result.treatments.size() << " treatments x " << result.n_bootstrap << " bootstraps\n";
    return 0;
}

struct MetaOptions {
    std::string eval_dir, embedding, method = "kegg", out;
};

EvalResult load_eval_dir(Run& run, const fs::path& dir) {
    const auto records_path = dir / "eval_records.csv", skips_path = dir / "eval_skips.csv";
    run.input(records_path);
    std::ifstream rin(records_path);
    if (!rin) throw Error("cannot open '" + records_path.string() + "'");
    auto records = read_eval_records(rin);
    std::vector<EvalSkip> skips;
    if (fs::exists(skips_path)) {
        run.input(skips_path);
        std::ifstream sin(skips_path);
        skips = read_eval_skips(sin);
    }
    return result_from_records(std::move(records), std::move(skips));
}

int cmd_meta(const MetaOptions& o, const std::vector<std::string>& argv) {
    const auto method = parse_embedding_method(o.method);
    Run run("meta", argv, o.out);
    run.manifest().config_json = nlohmann::json{{"method", to_string(method)}}.dump(2);
    const auto result = load_eval_dir(run, o.eval_dir);
    run.input(o.embedding);
    const auto embedding = read_embedding(fs::path(o.embedding));
    const auto rows = build_meta_table(result.records, embedding, method, result.treatments);
    auto table = open_out(run.output("meta_table.csv"));
    write_meta_table(table, rows, method);
    table.close();
    try {
        const auto fits = run_meta_regressions(rows);
        open_out(run.output("regressions.txt")) << regression_report_text(fits, method, rows.size());
        open_out(run.output("regressions.json")) << regression_report_json(fits, method, rows.size()) << '\n';
        run.finish();
        std::cout << regression_report_text(fits, method, rows.size());
    } catch (const DegenerateOutcome&) {
        run.finish();
        throw;
    }
    return 0;
}

struct SweepOptions {
    EmbedOptions embed;
    std::string k_values, master;
    EvalOptions eval;
};

int cmd_pca_sweep(const SweepOptions& o, const std::vector<std::string>& argv) {
    const auto method = parse_embedding_method(o.embed.method);
    if (method == EmbeddingMethod::one_hot) throw ConfigError("pca-sweep needs --method smiles or kegg");
    Run run("pca-sweep", argv, o.embed.out);
    const auto catalog_path = resolve(o.embed.catalog, o.embed.data, "catalog.csv", "--catalog");
    run.input(catalog_path);
    const auto catalog = parse_treatment_catalog(catalog_path);
    const auto cache_dir = cache_dir_for(o.embed);

    std::optional<MasterTable> master;
    EvalConfig config;
    if (!o.master.empty()) {
        run.input(o.master);
        master = read_master_table(fs::path(o.master));
        auto eo = o.eval;
        eo.methods = to_string(method);
        config = eval_config_from(eo);
        run.manifest().seed = config.seed;
    }
    // Largest admissible k: rows - 1 of the matrix PCA sees.
    const auto full = embed_catalog(o.embed, method, catalog, cache_dir, 0);
    if (method == EmbeddingMethod::kegg && fs::exists(cache_dir)) run.input(cache_dir);
    std::set<std::vector<double>> distinct;
    for (const auto& [_, vec] : full.embedding.vectors) distinct.insert(vec);
    const std::size_t n_rows = distinct.size();
    std::vector<std::size_t> ks;
    if (o.k_values.empty()) {
        for (std::size_t k = 1; k + 1 <= n_rows && k <= 10; ++k) ks.push_back(k);
    } else {
        for (const auto& s : split_list(o.k_values)) ks.push_back(std::stoul(s));
    }
    nlohmann::json cfg = embed_config(o.embed, method, cache_dir, network_enabled(o.embed.offline));
    cfg.erase("pca_k");
    cfg["k_values"] = ks;
    if (master) cfg["evaluation"] = nlohmann::json::parse(eval_config_to_json(config));
    run.manifest().config_json = cfg.dump(2);

    auto out = open_out(run.output("pca_sweep.csv"));
    out << "k,explained_variance,mean_win_rate\n";
    for (auto k : ks) {
        const auto built = embed_catalog(o.embed, method, catalog, cache_dir, k);
        const auto& pca = *built.pca;
        const double explained = pca.eigenvalues.sum() / pca.total_variance;
        std::string win = "";
        if (master) {
            EmbeddingSet set{{method, built.embedding}};
            const auto table = summarize_win_rates(run_evaluation(*master, set, config));
            double sum = 0.0;
            int n = 0;
            for (const auto& row : table.percent)
                if (row[0]) sum += *row[0], ++n;
            if (n > 0) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.2f", sum / n);
                win = buf;
            }
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", explained);
        out << k << ',' << buf << ',' << win << '\n';
        std::cout << "k=" << k << " explained=" << buf << (win.empty() ? "" : " mean_win_rate=" + win) << '\n';
    }
    out.close();
    run.finish();
    return 0;
}

struct ReportOptions {
    std::string eval_dir, meta_dir, out;
};

int cmd_report(const ReportOptions& o, const std::vector<std::string>& argv) {
    Run run("report", argv, o.out);
    const auto result = load_eval_dir(run, o.eval_dir);
    const auto audit = audit_records(result);
    const auto table = summarize_win_rates(result);
    std::ostringstream r;
    r << "Evaluation: " << result.treatments.size() << " unseen treatments, " << result.n_bootstrap
      << " bootstrap iterations, " << result.methods.size() << " method(s)\n";
    r << "Records: " << result.records.size() << ", skips: " << result.skips.size()
      << ", grid complete: " << (audit.grid_complete ? "yes" : "no") << "\n\n";
    std::size_t width = 16;
    for (const auto& t : table.treatments) width = std::max(width, t.size() + 2);
    r << std::left << std::setw(static_cast<int>(width)) << "Unseen treatment";
    for (auto m : table.methods) r << std::right << std::setw(26) << method_display_name(m);
    r << '\n';
    std::vector<double> sums(table.methods.size(), 0.0);
    std::vector<int> counts(table.methods.size(), 0);
    for (std::size_t i = 0; i < table.treatments.size(); ++i) {
        r << std::left << std::setw(static_cast<int>(width)) << table.treatments[i];
        for (std::size_t m = 0; m < table.methods.size(); ++m) {
            std::ostringstream cell;
            if (table.percent[i][m]) {
                cell << std::fixed << std::setprecision(2) << *table.percent[i][m] << '%';
                sums[m] += *table.percent[i][m];
                ++counts[m];
            } else {
                cell << "NA";
            }
            r << std::right << std::setw(26) << cell.str();
        }
        r << '\n';
    }
    r << std::left << std::setw(static_cast<int>(width)) << "Mean";
    for (std::size_t m = 0; m < table.methods.size(); ++m) {
        std::ostringstream cell;
        if (counts[m]) cell << std::fixed << std::setprecision(2) << sums[m] / counts[m] << '%';
        else cell << "NA";
        r << std::right << std::setw(26) << cell.str();
    }
    r << '\n';
    if (!o.meta_dir.empty()) {
        const auto path = fs::path(o.meta_dir) / "regressions.txt";
        run.input(path);
        r << '\n' << read_text(path);
    }
    open_out(run.output("report.txt")) << r.str();
    run.finish();
    std::cout << r.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Treatment-embedding evaluation pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);
    std::vector<std::string> args(argv, argv + argc);

    SynthOptions synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic cohort, catalog and knowledge-base cache");
    s->add_option("--config", synth.config, "Synthetic data config (JSON)")->check(CLI::ExistingFile);
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--seed", synth.seed, "Random seed");
    s->add_option("--n-patients", synth.n_patients, "Number of patients");
    s->add_option("--n-treatments", synth.n_treatments, "Number of prescribed treatments");
    s->add_option("--n-reference-drugs", synth.n_reference_drugs, "Catalog-only drugs");
    s->add_option("--effect-strength", synth.effect_strength, "Treatment effect scale (gamma)");
    s->add_option("--noise-sd", synth.noise_sd, "Target noise standard deviation");
    s->add_option("--layout", synth.layout, "Latent layout")->check(CLI::IsMember({"gaussian", "clustered"}));
    s->add_option("--effect-shape", synth.effect_shape, "Effect function")->check(CLI::IsMember({"linear", "radial"}));

    ValidateOptions val;
    auto* v = app.add_subcommand("ingest-validate", "Parse and check events, catalog and demographics");
    v->add_option("--data", val.data, "Directory with events.csv, catalog.csv, demographics.csv");
    v->add_option("--events", val.events, "Events CSV");
    v->add_option("--catalog", val.catalog, "Treatment catalog CSV");
    v->add_option("--demographics", val.demographics, "Demographics CSV");
    v->add_option("--out", val.out, "Output directory")->required();

    CohortOptions blk;
    auto* b = app.add_subcommand("blocks", "Build treatment blocks and steroid-coverage targets");
    b->add_option("--data", blk.data, "Directory with events.csv and cohort.json");
    b->add_option("--events", blk.events, "Events CSV");
    b->add_option("--cohort", blk.cohort, "Cohort config (JSON)");
    b->add_option("--out", blk.out, "Output directory")->required();

    CohortOptions feat;
    auto* f = app.add_subcommand("featurize", "Build the master table (blocks, covariates, targets)");
    f->add_option("--data", feat.data, "Directory with events.csv, demographics.csv, cohort.json, features.json");
    f->add_option("--events", feat.events, "Events CSV");
    f->add_option("--demographics", feat.demographics, "Demographics CSV");
    f->add_option("--cohort", feat.cohort, "Cohort config (JSON)");
    f->add_option("--features", feat.features, "Feature specs (JSON)");
    f->add_option("--out", feat.out, "Output directory")->required();

    auto add_embed_flags = [](CLI::App* cmd, EmbedOptions& e) {
        cmd->add_option("--data", e.data, "Directory with catalog.csv and kegg_cache/");
        cmd->add_option("--catalog", e.catalog, "Treatment catalog CSV");
        cmd->add_option("--method", e.method, "Embedding method")
            ->check(CLI::IsMember({"one_hot", "smiles", "kegg"}))
            ->capture_default_str();
        cmd->add_option("--cache-dir", e.cache_dir, "KEGG entry cache (default <data>/kegg_cache)");
        cmd->add_flag("--offline", e.offline, "Never contact KEGG; every entry must be cached");
        cmd->add_option("--ngram", e.ngram, "SMILES n-gram length")->capture_default_str();
        cmd->add_option("--hash-dim", e.hash_dim, "SMILES hashing dimension")->capture_default_str();
        cmd->add_option("--out", e.out, "Output directory")->required();
    };
    EmbedOptions emb;
    auto* e = app.add_subcommand("embed", "Embed the catalog treatments");
    e->footer("KEGG downloads happen only when TXEMBED_ALLOW_NETWORK=1 and --offline is not given.");
    add_embed_flags(e, emb);
    e->add_option("--pca-k", emb.pca_k, "PCA components (0 keeps the full vectors)")->capture_default_str();

    auto add_eval_flags = [](CLI::App* cmd, EvalOptions& o) {
        cmd->add_option("--bootstraps", o.bootstraps, "Bootstrap iterations (default 10)");
        cmd->add_option("--seed", o.seed, "Random seed (default 0)");
        cmd->add_option("--trees", o.trees, "Trees per forest (default 300)");
        cmd->add_option("--jobs", o.jobs, "Worker threads; results do not depend on it")->capture_default_str();
    };
    EvalOptions ev;
    auto* ec = app.add_subcommand("evaluate", "Leave-one-treatment-out comparison against the baseline");
    ec->add_option("--master", ev.master, "Master table CSV from featurize")->required()->check(CLI::ExistingFile);
    ec->add_option("--embedding", ev.embeddings, "Embedding CSV from embed (repeatable)")->check(CLI::ExistingFile);
    ec->add_option("--config", ev.config, "Evaluation config (JSON); flags override it")->check(CLI::ExistingFile);
    ec->add_option("--methods", ev.methods, "Comma-separated methods (default one_hot,smiles,kegg)");
    ec->add_option("--k-features", ev.k_features, "Features kept by selection (default 20)");
    ec->add_flag("--no-feature-selection", ev.no_feature_selection, "Use every feature");
    ec->add_option("--one-hot-reference", ev.one_hot_reference, "One-hot reference treatment");
    ec->add_option("--out", ev.out, "Output directory")->required();
    add_eval_flags(ec, ev);

    MetaOptions meta;
    auto* m = app.add_subcommand("meta", "Meta table and logistic regressions of wins on novelty");
    m->add_option("--eval", meta.eval_dir, "Output directory of evaluate")->required()->check(CLI::ExistingDirectory);
    m->add_option("--embedding", meta.embedding, "Embedding CSV for the distances")->required()->check(CLI::ExistingFile);
    m->add_option("--method", meta.method, "Method whose win flags are analysed")
        ->check(CLI::IsMember({"one_hot", "smiles", "kegg"}))
        ->capture_default_str();
    m->add_option("--out", meta.out, "Output directory")->required();

    SweepOptions sweep;
    auto* p = app.add_subcommand("pca-sweep", "Explained variance and win rate across PCA sizes");
    add_embed_flags(p, sweep.embed);
    p->add_option("--k", sweep.k_values, "Comma-separated component counts (default 1..min(n-1, 10))");
    p->add_option("--master", sweep.master, "Master table; when given each k is also evaluated")
        ->check(CLI::ExistingFile);
    add_eval_flags(p, sweep.eval);

    ReportOptions rep;
    auto* r = app.add_subcommand("report", "Human-readable summary of evaluate and meta outputs");
    r->add_option("--eval", rep.eval_dir, "Output directory of evaluate")->required()->check(CLI::ExistingDirectory);
    r->add_option("--meta", rep.meta_dir, "Output directory of meta")->check(CLI::ExistingDirectory);
    r->add_option("--out", rep.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::CallForAllHelp& err) {
        return app.exit(err);
    } catch (const CLI::CallForVersion& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return 2;
    }

    try {
        if (*s) return cmd_synth(synth, args);
        if (*v) return cmd_validate(val, args);
        if (*b) return cmd_blocks(blk, args);
        if (*f) return cmd_featurize(feat, args);
        if (*e) return cmd_embed(emb, args);
        if (*ec) return cmd_evaluate(ev, args);
        if (*m) return cmd_meta(meta, args);
        if (*p) return cmd_pca_sweep(sweep, args);
        if (*r) return cmd_report(rep, args);
    } catch (const DegenerateOutcome& err) {
        std::cerr << "error: degenerate outcome: " << err.what() << '\n';
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }
    return 2;
}
