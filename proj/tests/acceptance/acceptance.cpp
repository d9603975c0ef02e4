// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "test_util.hpp"
#include "txembed/cohort.hpp"
#include "txembed/csv.hpp"
#include "txembed/embeddings.hpp"
#include "txembed/error.hpp"
#include "txembed/evaluation.hpp"
#include "txembed/forest.hpp"
#include "txembed/kegg.hpp"
#include "txembed/logistic.hpp"
#include "txembed/meta.hpp"
#include "txembed/pipeline.hpp"
#include "txembed/random.hpp"
#include "txembed/synthgen.hpp"

using namespace txembed;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            if (pass) detail << "first failure: " << what << "; ";
            pass = false;
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + TXEMBED_CLI + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

double max_abs_diff_up_to_sign(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::min((a - b).cwiseAbs().maxCoeff(), (a + b).cwiseAbs().maxCoeff());
}

Outcome c1_numerical_core() {
    Outcome o;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1001);
    std::normal_distribution<double> z(0.0, 1.0);

    double worst_pca = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 19), d = 1 + static_cast<int>(rng() % 12);
        Eigen::MatrixXd x(n, d);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) x(i, j) = z(rng) * (0.5 + j);
        const auto k = static_cast<std::size_t>(std::min(n - 1, d));
        const auto r = pca_fit_transform(x, k);
        const auto [vals, vecs] = oracle::jacobi_eigen(oracle::covariance(x));
        for (std::size_t c = 0; c < k; ++c) {
            const auto ci = static_cast<Eigen::Index>(c);
            worst_pca = std::max(worst_pca, std::abs(r.model.eigenvalues(ci) - vals(ci)));
            worst_pca = std::max(worst_pca, max_abs_diff_up_to_sign(r.model.basis.col(ci), vecs.col(ci)));
        }
    }
    o.require(worst_pca <= 1e-8, "PCA deviates from the Jacobi oracle");
    o.detail << "pca max dev " << worst_pca << "; ";

    Eigen::MatrixXd counts(3, 4);
    counts << 1, 0, 2, 0, 0, 1, 1, 0, 1, 1, 0, 3;
    const auto w = tfidf_transform(counts);
    const double a = std::log(4.0 / 3.0) + 1.0, b = std::log(2.0) + 1.0;
    const double n2 = std::sqrt(2 * a * a + 9 * b * b);
    Eigen::MatrixXd want(3, 4);
    want << 1 / std::sqrt(5.0), 0, 2 / std::sqrt(5.0), 0, 0, 1 / std::sqrt(2.0), 1 / std::sqrt(2.0), 0, a / n2,
        a / n2, 0, 3 * b / n2;
    const double tfidf_dev = (w - want).cwiseAbs().maxCoeff();
    o.require(tfidf_dev <= 4 * std::numeric_limits<double>::epsilon(), "TF-IDF differs from the hand computation");
    o.detail << "tfidf max dev " << tfidf_dev << "; ";

    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_logit = 0.0;
    int solved = 0;
    for (int trial = 0; solved < 50 && trial < 500; ++trial) {
        const int n = 30 + static_cast<int>(rng() % 300);
        const double b0 = 0.5 * z(rng), b1 = z(rng);
        std::vector<double> xs(n);
        std::vector<int> ys(n);
        Eigen::MatrixXd x(n, 2);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            xs[i] = z(rng);
            ys[i] = u(rng) < 1.0 / (1.0 + std::exp(-(b0 + b1 * xs[i])));
            x(i, 0) = 1.0;
            x(i, 1) = xs[i];
            y(i) = ys[i];
        }
        const auto ref = oracle::logistic_newton(xs, ys);
        if (!ref.converged) continue;
        const auto fit = logistic_fit(x, y);
        o.require(fit.converged, "IRLS did not converge where Newton did");
        worst_logit = std::max({worst_logit, std::abs(fit.coefficients(0) - ref.b0),
                                std::abs(fit.coefficients(1) - ref.b1), std::abs(fit.std_errors(1) - ref.se1)});
        ++solved;
    }
    o.require(solved == 50, "fewer than 50 logistic problems had a finite MLE");
    o.require(worst_logit <= 1e-4, "IRLS deviates from the Newton oracle");
    o.detail << "logistic max dev " << worst_logit << " over " << solved << "; ";

    Eigen::VectorXd p(4), t(4);
    p << 1, 2, 3, 4;
    t << 1, 0, 3, 8;
    o.require(mse(p, t) == 5.0, "mse hand value");
    o.require(mse(p, p) == 0.0, "mse of identical vectors");
    o.require(mse(p, t) == mse(t, p), "mse symmetry");
    o.require(mse(p.array() + 0.5, p) == 0.25, "mse of a constant shift");

    const double secs = seconds_since(t0);
    o.require(secs < 10.0, "runtime over 10 s");
    o.detail << "runtime " << secs << " s";
    return o;
}

Outcome c2_cohort_oracle() {
    Outcome o;
    const auto t0 = Clock::now();
    const Day epoch = parse_iso_date("2020-01-01");
    const std::map<std::string, std::string> codes{{"RXA", "drug_a"}, {"RXB", "drug_b"}};
    const std::set<std::string> steroid{"STER"};
    std::mt19937_64 rng(424242);
    std::size_t blocks = 0, targets = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const auto ev = oracle::random_stream(rng, epoch, 50);
        const int washout = 1 + static_cast<int>(rng() % 40);
        const int onset = static_cast<int>(rng() % 40);
        const auto want = oracle::blocks_by_day(ev, epoch, codes, steroid, washout, onset);
        const auto got = build_treatment_blocks(ev, codes, washout, onset);
        if (got.size() != want.size()) {
            o.require(false, "block count differs on stream " + std::to_string(trial));
            continue;
        }
        for (std::size_t i = 0; i < got.size(); ++i) {
            const bool same = got[i].patient_id == want[i].patient && got[i].treatment == want[i].treatment &&
                              days_between(epoch, got[i].start) == want[i].start &&
                              days_between(epoch, got[i].end) == want[i].end &&
                              days_between(epoch, got[i].onset_end) == want[i].onset_end;
            o.require(same, "block differs on stream " + std::to_string(trial));
            const auto t = compute_target(got[i], steroid_events_for(ev, got[i].patient_id, steroid));
            const bool target_ok = t.has_value() == want[i].target.has_value() &&
                                   (!t || std::abs(*t - *want[i].target) <= 1e-12);
            o.require(target_ok, "target differs on stream " + std::to_string(trial));
            ++blocks;
            targets += t.has_value();
        }
    }
    const double secs = seconds_since(t0);
    o.require(secs < 10.0, "runtime over 10 s");
    o.detail << blocks << " blocks, " << targets << " targets checked; runtime " << secs << " s";
    return o;
}

Outcome c3_harness_integrity() {
    Outcome o;
    testutil::TempDir dir("acc_c3");
    const auto data = dir / "data";
    o.require(run_cli("synth --out " + q(data) + " --seed 31 --n-patients 600 --n-treatments 6") == 0, "synth");
    o.require(run_cli("featurize --data " + q(data) + " --out " + q(dir / "feat")) == 0, "featurize");
    for (const char* m : {"smiles", "kegg"})
        o.require(run_cli(std::string("embed --data ") + q(data) + " --offline --method " + m + " --out " +
                          q(dir / "emb")) == 0,
                  std::string("embed ") + m);
    const std::string args = "evaluate --master " + q(dir / "feat" / "master.csv") + " --embedding " +
                             q(dir / "emb" / "embedding_smiles.csv") + " --embedding " +
                             q(dir / "emb" / "embedding_kegg.csv") + " --bootstraps 4 --trees 50 --seed 5";
    o.require(run_cli(args + " --out " + q(dir / "run1")) == 0, "evaluate run 1");
    o.require(run_cli(args + " --out " + q(dir / "run2")) == 0, "evaluate run 2");
    if (!o.pass) return o;

    const auto r1 = testutil::slurp(dir / "run1" / "eval_records.csv");
    o.require(!r1.empty() && r1 == testutil::slurp(dir / "run2" / "eval_records.csv"),
              "eval_records.csv differs between identical runs");

    const auto audit = nlohmann::json::parse(testutil::slurp(dir / "run1" / "audit.json"));
    std::istringstream rin(r1);
    const auto records = read_eval_records(rin);
    std::size_t method_records = 0;
    for (const auto& r : records) method_records += r.method != ModelKind::baseline;
    o.require(audit.at("grid_complete").get<bool>(), "grid incomplete");
    o.require(audit.at("expected_entries") == audit.at("observed_entries"), "entry count mismatch");
    o.require(audit.at("expected_entries").get<std::size_t>() == 4 * 6 * 4, "unexpected grid size");
    o.require(audit.at("disjointness_checks").get<std::size_t>() > 0, "no disjointness checks ran");
    o.require(audit.at("shared_baselines").get<std::size_t>() == method_records,
              "a method record was not scored against its cell's baseline");
    o.detail << "cells " << audit.at("cells") << ", disjointness checks " << audit.at("disjointness_checks")
             << ", shared baselines " << audit.at("shared_baselines") << "/" << method_records
             << ", records byte-identical";
    return o;
}

struct SyntheticRun {
    double lower_half_win = 0.0;
    double mean_win = 0.0;
    std::array<MetaRegression, 4> fits;
    bool degenerate = false;
    double seconds = 0.0;
};

constexpr std::size_t kKeggPcaK = 4;

SyntheticRun synthetic_kegg_run(double gamma, std::uint64_t seed) {
    const auto t0 = Clock::now();
    SynthConfig c;
    c.n_patients = 2000;
    c.n_treatments = 8;
    c.effect_strength = gamma;
    c.noise_sd = 0.05;
    c.layout = LatentLayout::clustered;
    c.effect_shape = EffectShape::radial;
    c.seed = seed;
    const auto data = generate_synthetic(c);
    testutil::TempDir dir("acc_synth");
    write_synthetic(data, dir.path());

    const auto built = build_cohort({data.events, data.demographics, data.cohort, data.features});
    kegg::Client client({.cache_dir = dir / "kegg_cache"});
    const auto tokens = kegg_tokens_for_catalog(client, data.catalog);
    const auto emb = build_kegg_embedding(data.catalog, tokens, kKeggPcaK).embedding;

    EvalConfig cfg;
    cfg.n_bootstrap = 10;
    cfg.seed = seed;
    cfg.methods = {EmbeddingMethod::kegg};
    const auto result = run_evaluation(built.master, {{EmbeddingMethod::kegg, emb}}, cfg);
    const auto rates = summarize_win_rates(result);
    const auto meta = build_meta_table(result.records, emb, EmbeddingMethod::kegg, result.treatments);

    std::map<std::string, double> nearest;
    for (const auto& m : meta) nearest[m.unseen_treatment] = m.novelty.min_eucl;
    std::vector<std::pair<double, double>> by_distance;
    SyntheticRun out;
    for (std::size_t i = 0; i < rates.treatments.size(); ++i) {
        const double pct = rates.percent[i][0].value_or(0.0);
        by_distance.push_back({nearest[rates.treatments[i]], pct});
        out.mean_win += pct / static_cast<double>(rates.treatments.size());
    }
    std::sort(by_distance.begin(), by_distance.end());
    const std::size_t half = by_distance.size() / 2;
    for (std::size_t i = 0; i < half; ++i) out.lower_half_win += by_distance[i].second / static_cast<double>(half);
    try {
        out.fits = run_meta_regressions(meta);
    } catch (const DegenerateOutcome&) {
        out.degenerate = true;
    }
    out.seconds = seconds_since(t0);
    return out;
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

std::map<std::uint64_t, SyntheticRun>& positive_runs() {
    static std::map<std::uint64_t, SyntheticRun> runs = [] {
        std::map<std::uint64_t, SyntheticRun> r;
        for (auto s : kSeeds) r[s] = synthetic_kegg_run(0.25, s);
        return r;
    }();
    return runs;
}

Outcome c4_positive() {
    Outcome o;
    double total = 0.0;
    for (auto s : kSeeds) {
        const auto& r = positive_runs().at(s);
        o.require(r.lower_half_win >= 70.0, "seed " + std::to_string(s) + " lower-half win rate below 70%");
        o.require(r.seconds < 300.0, "seed " + std::to_string(s) + " over 5 minutes");
        o.detail << "seed " << s << ": lower-half " << r.lower_half_win << "%, all " << r.mean_win << "%, "
                 << r.seconds << " s; ";
        total += r.lower_half_win;
    }
    o.detail << "mean lower-half " << total / static_cast<double>(kSeeds.size()) << "%";
    return o;
}

// A separated fit has no finite MLE; its coefficient still carries the sign of
// the divergence, which is what the negative-direction check reads.
bool slope_negative(const MetaRegression& m) { return m.fit.coefficients(1) < 0.0; }

Outcome c5_null() {
    Outcome o;
    int quiet = 0;
    for (auto s : kSeeds) {
        const auto r = synthetic_kegg_run(0.0, s);
        bool nonsig = !r.degenerate;
        if (!r.degenerate)
            for (const auto& f : r.fits) nonsig = nonsig && f.fit.p_values(1) > 0.05;
        quiet += nonsig;
        o.require(std::abs(r.mean_win - 50.0) <= 15.0, "seed " + std::to_string(s) + " mean win rate outside 50 +- 15%");
        o.detail << "seed " << s << ": mean win " << r.mean_win << "%, slopes " << (nonsig ? "non-significant" : "significant")
                 << "; ";
    }
    o.require(quiet >= 2, "meta slopes significant in more than one seed");
    o.detail << "non-significant in " << quiet << "/3";
    return o;
}

Outcome c6_distance_relationship() {
    Outcome o;
    int ok_seeds = 0;
    for (auto s : kSeeds) {
        const auto& r = positive_runs().at(s);
        bool ok = !r.degenerate;
        if (ok) {
            for (const auto& f : r.fits) ok = ok && slope_negative(f);
            for (const auto& f : r.fits) {
                if (f.covariate != NoveltyCovariate::min_cosine && f.covariate != NoveltyCovariate::min_eucl) continue;
                ok = ok && f.fit.converged && f.fit.p_values(1) < 0.05;
            }
        }
        ok_seeds += ok;
        o.detail << "seed " << s << (ok ? " ok" : " not ok") << " [";
        for (const auto& f : r.fits)
            o.detail << covariate_column(f.covariate, EmbeddingMethod::kegg) << " b=" << f.fit.coefficients(1)
                     << " p=" << f.fit.p_values(1) << (f.fit.converged ? "" : " (separated)") << "; ";
        o.detail << "] ";
    }
    o.require(ok_seeds >= 2, "fewer than 2 of 3 seeds show the negative relationship");
    return o;
}

Outcome c7_zero_aliasing() {
    Outcome o;
    // Held-out "unseen" has the same true effect as the reference "anchor".
    const std::map<std::string, double> effect{{"anchor", 0.25}, {"beta", 0.0},   {"gamma", -0.2},
                                               {"delta", 0.1},   {"unseen", 0.25}};
    std::mt19937_64 rng(77);
    std::normal_distribution<double> z(0.0, 1.0);
    MasterTable table;
    table.covariate_names = {"age", "gender", "c"};
    const Day d0 = parse_iso_date("2021-01-01");
    int id = 0;
    for (const auto& [name, e] : effect)
        for (int i = 0; i < 200; ++i) {
            MasterRow r{"P" + std::to_string(id++), name, d0, add_days(d0, 120), {z(rng), double(i % 2), z(rng)}, 0.0};
            r.target = 0.4 + 0.05 * r.covariates[0] + e + 0.03 * z(rng);
            table.rows.push_back(std::move(r));
        }

    EvalConfig cfg;
    cfg.methods = {EmbeddingMethod::one_hot};
    cfg.one_hot_reference = "anchor";
    int wins = 0;
    bool aliased = true;
    for (int it = 0; it < 10; ++it) {
        const auto sample = bootstrap_resample(table.rows, derive_seed(7, 0xB007, static_cast<std::uint64_t>(it)));
        const auto split = loto_split(sample, "unseen");
        if (!split) {
            o.require(false, "unseen treatment absent from a bootstrap sample");
            continue;
        }
        const auto seed = derive_seed(7, static_cast<std::uint64_t>(it) + 1);
        const auto baseline = fit_baseline(split->train, cfg, seed);
        auto encoder = TreatmentEncoder::one_hot(split->train, cfg.one_hot_reference);
        aliased = aliased && *encoder.encode("unseen") == std::vector<double>(encoder.dim(), 0.0);
        const auto model = fit_with_encoder(split->train, std::move(encoder), cfg, seed);
        aliased = aliased && model.predict(split->test) == model.predict(split->test, std::string("anchor"));
        wins += win_flag(score(model, split->test), score(baseline, split->test));
    }
    o.require(aliased, "one-hot predictions differ from the zero-aliased configuration");
    o.require(wins >= 8, "one-hot beat the baseline in fewer than 8/10 iterations");
    o.detail << "aliasing exact: " << (aliased ? "yes" : "no") << "; one-hot wins " << wins << "/10";
    return o;
}

Outcome c8_reference_shape() {
    Outcome o;
    testutil::TempDir dir("acc_c8");
    const auto fx = testutil::fixture("uc14");
    o.require(run_cli("featurize --data " + q(fx) + " --out " + q(dir / "feat")) == 0, "featurize");
    for (const char* m : {"smiles", "kegg"})
        o.require(run_cli(std::string("embed --catalog ") + q(fx / "catalog.csv") + " --cache-dir " +
                          q(testutil::fixture("kegg")) + " --offline --method " + m + " --out " + q(dir / "emb")) == 0,
                  std::string("embed ") + m);
    o.require(run_cli("evaluate --master " + q(dir / "feat" / "master.csv") + " --embedding " +
                      q(dir / "emb" / "embedding_smiles.csv") + " --embedding " +
                      q(dir / "emb" / "embedding_kegg.csv") + " --bootstraps 10 --trees 50 --seed 14 --out " +
                      q(dir / "eval")) == 0,
              "evaluate");
    o.require(run_cli("meta --eval " + q(dir / "eval") + " --embedding " + q(dir / "emb" / "embedding_kegg.csv") +
                      " --method kegg --out " + q(dir / "meta")) == 0,
              "meta");
    if (!o.pass) return o;

    std::ifstream wr(dir / "eval" / "win_rates.csv");
    const auto table = csv::read(wr);
    o.require(table.header == std::vector<std::string>{"Unseen treatment", "One-hot encoding",
                                                       "SMILES-based embeddings", "Kegg-based embeddings"},
              "win_rates header");
    o.require(table.rows.size() == 14, "win_rates row count");
    const std::regex pct(R"(\d{1,3}\.\d{2}%)");
    for (const auto& row : table.rows)
        for (std::size_t c = 1; c < row.fields.size(); ++c)
            o.require(std::regex_match(row.fields[c], pct), "cell '" + row.fields[c] + "' is not a 2-decimal percentage");

    std::ifstream mt(dir / "meta" / "meta_table.csv");
    const auto meta = csv::read(mt);
    const std::vector<std::string> reference_columns{"",
                                              "iteration",
                                              "unseen_treatment",
                                              "ft_kegg_embeddings_perf_higher_than_ft_no_treatment",
                                              "min_kegg_eucl_dist_to_others",
                                              "min_kegg_cosine_dist_to_others",
                                              "kegg_eucl_dist_to_mean",
                                              "kegg_cosine_dist_to_mean"};
    o.require(meta.header == reference_columns, "meta_table column names");
    o.require(!meta.rows.empty(), "meta_table is empty");
    o.detail << table.rows.size() << " x " << table.header.size() - 1 << " win rates, " << meta.rows.size()
             << " meta rows";
    return o;
}

Outcome c9_offline_kegg() {
    Outcome o;
    testutil::TempDir dir("acc_c9");
    const auto fx = testutil::fixture("uc14");
    const std::string args = "embed --catalog " + q(fx / "catalog.csv") + " --cache-dir " +
                             q(testutil::fixture("kegg")) + " --method kegg --offline --out ";
    o.require(run_cli(args + q(dir / "a")) == 0, "first offline embed");
    o.require(run_cli(args + q(dir / "b")) == 0, "second offline embed");
    if (!o.pass) return o;
    const auto a = testutil::slurp(dir / "a" / "embedding_kegg.csv");
    o.require(a == testutil::slurp(dir / "b" / "embedding_kegg.csv"), "vectors differ between runs");
    const auto emb = read_embedding(dir / "a" / "embedding_kegg.csv");
    o.require(emb.vectors.size() == 14, "expected 14 embedded treatments");

    std::size_t drugs = 0, diseases = 0;
    for (const auto& f : fs::directory_iterator(testutil::fixture("kegg")))
        (f.path().filename().string()[0] == 'D' ? drugs : diseases)++;
    o.require(drugs >= 14 && diseases >= 1, "fixture corpus too small");

    kegg::Client client({.cache_dir = testutil::fixture("kegg_multiplicity")});
    const std::vector<std::string> codes{"D90001", "D90002"};
    const auto tokens = kegg::collect_tokens(client, codes);
    const auto& t1 = tokens.at("D90001");
    const auto twice = std::count(t1.begin(), t1.end(), "D90002");
    o.require(twice == 2, "drug linked via two diseases should count 2");
    const auto& t2 = tokens.at("D90002");
    o.require(std::count(t2.begin(), t2.end(), "D90002") == 1, "drug linked via one disease should count 1");
    o.require(client.network_requests() == 0, "offline run touched the network");
    o.detail << drugs << " drugs, " << diseases << " diseases, " << emb.vectors.size()
             << " vectors deterministic, multiplicity count " << twice;
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"C1 numerical core oracles", c1_numerical_core},
        {"C2 cohort oracle", c2_cohort_oracle},
        {"C3 harness integrity", c3_harness_integrity},
        {"C4 positive synthetic reproduction", c4_positive},
        {"C5 null control", c5_null},
        {"C6 negative distance-success relationship", c6_distance_relationship},
        {"C7 zero-encoding aliasing", c7_zero_aliasing},
        {"C8 reference table shape", c8_reference_shape},
        {"C9 offline KEGG pipeline", c9_offline_kegg},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << " | " << o.detail.str() << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
              << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
