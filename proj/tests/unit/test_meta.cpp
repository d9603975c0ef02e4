#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "txembed/error.hpp"
#include "txembed/meta.hpp"

using namespace txembed;

namespace {

std::vector<MetaRow> planted_rows(int n, double slope, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<MetaRow> rows;
    for (int i = 0; i < n; ++i) {
        MetaRow r;
        r.iteration = i / 10;
        r.unseen_treatment = "t" + std::to_string(i % 10);
        const double x = u(rng);
        r.novelty = {x * 3.0, x, x * 2.0 + u(rng), 0.5 * x + 0.1 * u(rng)};
        r.win = u(rng) < 1.0 / (1.0 + std::exp(-(1.5 + slope * x)));
        rows.push_back(r);
    }
    return rows;
}

}  // namespace

TEST_CASE("column names follow the reference layout") {
    const auto c = meta_column_names(EmbeddingMethod::kegg);
    CHECK(c == std::vector<std::string>{"", "iteration", "unseen_treatment",
                                        "ft_kegg_embeddings_perf_higher_than_ft_no_treatment",
                                        "min_kegg_eucl_dist_to_others", "min_kegg_cosine_dist_to_others",
                                        "kegg_eucl_dist_to_mean", "kegg_cosine_dist_to_mean"});
    CHECK(covariate_column(NoveltyCovariate::min_cosine, EmbeddingMethod::smiles) ==
          "min_smiles_cosine_dist_to_others");
}

TEST_CASE("meta table rows come from the method's records") {
    TreatmentEmbedding e{EmbeddingMethod::kegg, 2, {{"a", {1, 0}}, {"b", {0, 1}}, {"c", {1, 1}}}};
    const std::vector<EvalRecord> recs{{0, "a", ModelKind::baseline, 1.0, std::nullopt},
                                       {0, "a", ModelKind::kegg, 0.5, 1},
                                       {0, "b", ModelKind::smiles, 0.5, 1},
                                       {1, "b", ModelKind::kegg, 2.0, 0}};
    const std::vector<std::string> treatments{"a", "b", "c"};
    const auto rows = build_meta_table(recs, e, EmbeddingMethod::kegg, treatments);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].win == 1);
    CHECK(rows[1].unseen_treatment == "b");
    CHECK(rows[0].novelty.min_eucl == doctest::Approx(1.0));
    CHECK(rows[0].novelty.min_cosine == doctest::Approx(1.0 - 1.0 / std::sqrt(2.0)));

    std::ostringstream out;
    write_meta_table(out, rows, EmbeddingMethod::kegg);
    const auto text = out.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    CHECK(text.rfind(",iteration,unseen_treatment,ft_kegg_embeddings_perf_higher_than_ft_no_treatment", 0) == 0);
}

TEST_CASE("a planted monotone effect gives a significant negative slope") {
    const auto rows = planted_rows(400, -5.0, 1);
    const auto fits = run_meta_regressions(rows);
    for (const auto& f : fits) {
        REQUIRE(f.fit.converged);
        CHECK(f.fit.coefficients(1) < 0);
        CHECK(f.fit.p_values(1) < 0.01);
    }
    const auto text = regression_report_text(fits, EmbeddingMethod::kegg, rows.size());
    CHECK(text.find("min_kegg_cosine_dist_to_others") != std::string::npos);
    CHECK(regression_report_json(fits, EmbeddingMethod::kegg, rows.size()).find("\"n_observations\"") != std::string::npos);
}

TEST_CASE("permuted outcomes are rarely significant") {
    auto rows = planted_rows(200, -5.0, 2);
    std::mt19937_64 rng(3);
    int quiet = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> wins;
        for (const auto& r : rows) wins.push_back(r.win);
        std::shuffle(wins.begin(), wins.end(), rng);
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i].win = wins[i];
        const auto fits = run_meta_regressions(rows);
        quiet += std::abs(fits[0].fit.z_values(1)) < 1.96;
    }
    CHECK(quiet >= 90);
}

TEST_CASE("identical win flags are degenerate") {
    auto rows = planted_rows(50, 0.0, 4);
    for (auto& r : rows) r.win = 1;
    CHECK_THROWS_AS(run_meta_regressions(rows), DegenerateOutcome);
}
