#include <doctest.h>

#include <json.hpp>

#include "test_util.hpp"
#include "txembed/error.hpp"
#include "txembed/manifest.hpp"
#include "txembed/pipeline.hpp"

using namespace txembed;

TEST_CASE("sha256 reference digests") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    testutil::TempDir dir("sha");
    testutil::spit(dir / "f", "abc");
    CHECK(sha256_file(dir / "f") == sha256_hex("abc"));
    CHECK_THROWS_AS(sha256_file(dir / "missing"), Error);
}

TEST_CASE("manifest records inputs and configuration") {
    testutil::TempDir dir("manifest");
    testutil::spit(dir / "in" / "a.csv", "x\n");
    testutil::spit(dir / "in" / "b.csv", "y\n");
    RunManifest m;
    m.command = "evaluate";
    m.argv = {"txembed", "evaluate"};
    m.seed = 7;
    m.config_json = "{}";
    m.add_input(dir / "in");
    CHECK(m.inputs.size() == 2);
    write_manifest(m, dir.path());
    const auto j = nlohmann::json::parse(testutil::slurp(dir / "manifest.json"));
    CHECK(j.at("command") == "evaluate");
    CHECK(j.at("seed") == 7);
    CHECK(j.at("inputs").size() == 2);
}

TEST_CASE("eval config overlay") {
    const auto c = parse_eval_config(R"({"n_bootstrap": 4, "methods": ["kegg"], "n_trees": 12, "k_features": 5})");
    CHECK(c.n_bootstrap == 4);
    CHECK(c.methods == std::vector<EmbeddingMethod>{EmbeddingMethod::kegg});
    CHECK(c.forest.n_trees == 12);
    CHECK(c.k_features == 5);
    CHECK(c.forest.colsample_bynode == 0.6);
    const auto back = parse_eval_config(eval_config_to_json(c));
    CHECK(eval_config_to_json(back) == eval_config_to_json(c));
    CHECK_THROWS_AS(parse_eval_config(R"({"bootstraps": 3})"), ConfigError);
    CHECK_THROWS_AS(parse_eval_config("[1]"), ConfigError);
}

TEST_CASE("fixture cohort loads and builds") {
    const auto in = load_cohort_inputs(testutil::fixture("uc14/events.csv"), testutil::fixture("uc14/demographics.csv"),
                                       testutil::fixture("uc14/cohort.json"), testutil::fixture("uc14/features.json"));
    const auto built = build_cohort(in);
    CHECK(built.blocks.size() == built.targets.size());
    CHECK(built.master.treatments().size() == 14);
    for (const auto& r : built.master.rows) {
        CHECK(r.target >= 0.0);
        CHECK(r.target <= 1.0);
    }
}
