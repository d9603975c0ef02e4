#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "test_util.hpp"
#include "txembed/embeddings.hpp"
#include "txembed/error.hpp"
#include "txembed/kegg.hpp"
#include "txembed/pipeline.hpp"
#include "txembed/synthgen.hpp"

using namespace txembed;

namespace {

SynthConfig small(std::uint64_t seed) {
    SynthConfig c;
    c.n_patients = 400;
    c.n_treatments = 6;
    c.seed = seed;
    return c;
}

CohortBuild cohort_of(const SynthData& d) { return build_cohort({d.events, d.demographics, d.cohort, d.features}); }

}  // namespace

TEST_CASE("same seed, same bytes") {
    testutil::TempDir a("synth_a"), b("synth_b"), c("synth_c");
    write_synthetic(generate_synthetic(small(5)), a.path());
    write_synthetic(generate_synthetic(small(5)), b.path());
    write_synthetic(generate_synthetic(small(6)), c.path());
    for (const char* f : {"events.csv", "demographics.csv", "catalog.csv", "truth.json", "cohort.json"}) {
        CHECK(testutil::slurp(a / f) == testutil::slurp(b / f));
    }
    CHECK(testutil::slurp(a / "events.csv") != testutil::slurp(c / "events.csv"));
    const auto truth = truth_from_json(testutil::slurp(a / "truth.json"));
    CHECK(truth.effects == generate_synthetic(small(5)).truth.effects);
}

TEST_CASE("config JSON round trip and validation") {
    auto c = small(9);
    c.layout = LatentLayout::clustered;
    c.effect_shape = EffectShape::radial;
    c.treatment_share_sd = 0.4;
    const auto back = parse_synth_config(synth_config_to_json(c));
    CHECK(synth_config_to_json(back) == synth_config_to_json(c));
    CHECK_THROWS_AS(parse_synth_config(R"({"n_patientz": 10})"), ConfigError);
    auto bad = small(1);
    bad.n_treatments = 1;
    CHECK_THROWS_AS(generate_synthetic(bad), ConfigError);
}

TEST_CASE("an infeasible configuration is rejected") {
    auto c = small(1);
    c.base_rate = 3.0;
    CHECK_THROWS_AS(generate_synthetic(c), ConfigError);
}

TEST_CASE("without noise the cohort reproduces the generating targets") {
    auto c = small(2);
    c.noise_sd = 0.0;
    const auto d = generate_synthetic(c);
    const auto built = cohort_of(d);
    REQUIRE(built.master.rows.size() == static_cast<std::size_t>(c.n_patients));
    for (const auto& r : built.master.rows) {
        CHECK(r.treatment == d.truth.patient_treatment.at(r.patient_id));
        const double want = std::clamp(d.truth.expected_target.at(r.patient_id), 0.0, 1.0);
        const double window = static_cast<double>(days_between(r.block_start, r.block_end) - 28);
        CHECK(std::abs(r.target - want) <= 0.5 / window + 1e-12);
    }
}

TEST_CASE("planted treatment effects are recoverable from the cohort") {
    auto c = small(3);
    c.n_patients = 3000;
    c.n_treatments = 8;
    c.effect_strength = 0.2;
    const auto d = generate_synthetic(c);
    const auto built = cohort_of(d);
    // Mean residual per treatment after removing the covariate part of the truth.
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& r : built.master.rows) {
        const double covariate_part = d.truth.expected_target.at(r.patient_id) - d.truth.effects.at(r.treatment);
        auto& [s, n] = acc[r.treatment];
        s += r.target - covariate_part;
        ++n;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (const auto& [t, sn] : acc) {
        const double x = d.truth.effects.at(t), y = sn.first / sn.second;
        sx += x, sy += y, sxx += x * x, sxy += x * y, ++n;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("knowledge-base tokens preserve the latent geometry") {
    auto c = small(4);
    c.n_treatments = 10;
    const auto d = generate_synthetic(c);
    testutil::TempDir dir("synth_kegg");
    write_synthetic(d, dir.path());
    kegg::Client client({.cache_dir = dir / "kegg_cache"});
    const auto tokens = kegg_tokens_for_catalog(client, d.catalog);
    const auto emb = build_kegg_embedding(d.catalog, tokens, 0).embedding;
    std::vector<double> latent_d, embed_d;
    const auto& names = d.catalog;
    for (std::size_t i = 0; i < names.size(); ++i)
        for (std::size_t j = i + 1; j < names.size(); ++j) {
            const auto& a = names[i].generic_name;
            const auto& b = names[j].generic_name;
            latent_d.push_back(euclidean_distance(d.truth.latent.at(a), d.truth.latent.at(b)));
            embed_d.push_back(euclidean_distance(emb.at(a), emb.at(b)));
        }
    CHECK(oracle::spearman(latent_d, embed_d) >= 0.8);
}
