#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <thread>

#include <httplib.h>

#include "test_util.hpp"
#include "txembed/error.hpp"
#include "txembed/kegg.hpp"

using namespace txembed;
using namespace txembed::kegg;

namespace {

std::size_t count(const std::vector<std::string>& v, const std::string& x) {
    return static_cast<std::size_t>(std::count(v.begin(), v.end(), x));
}

const char* kEntry = R"(ENTRY       D00001                      Drug
NAME        Testamide (JP18); Testamide hydrochloride
FORMULA     C10H10
EFFICACY    Anti-inflammatory; Tumor necrosis factor (TNF) alpha inhibitor,
            Antirheumatic
  DISEASE   Ulcerative colitis [DS:H01466]
            Crohn disease [DS:H00286]
TARGET      TNF [HSA:7124] [KO:K03156]
            PTGS1 [HSA:5742 5743]
  PATHWAY   hsa04060  Cytokine-cytokine receptor interaction
CLASS       DG01934  Anti-TNF antibody
            Immunosuppressant
///
)";

}  // namespace

TEST_CASE("drug entry parsing") {
    const auto r = parse_entry(kEntry);
    CHECK(r.code == "D00001");
    CHECK(r.name == "Testamide");
    CHECK(r.diseases == std::vector<std::string>{"H01466", "H00286"});
    CHECK(r.targets_pathways == std::vector<std::string>{"HSA:7124", "KO:K03156", "HSA:5742", "HSA:5743", "hsa04060"});
    CHECK(r.efficacy == std::vector<std::string>{"anti-inflammatory", "tumor necrosis factor (tnf) alpha inhibitor",
                                                 "antirheumatic"});
    CHECK(r.drug_class == std::vector<std::string>{"DG01934", "immunosuppressant"});
}

TEST_CASE("malformed entries") {
    CHECK_THROWS_AS(parse_entry("NAME        X\n///\n"), ParseError);
    CHECK_THROWS_AS(parse_entry("ENTRY       D00001     Drug\nNAME        X\n"), ParseError);
    CHECK_THROWS_AS(parse_entry("ENTRY       H00001     Disease\n///\n"), ParseError);
    CHECK_THROWS_AS(parse_disease_entry("ENTRY       D00001     Drug\n///\n"), ParseError);
}

TEST_CASE("disease entries and the fixture corpus") {
    const auto uc = parse_disease_entry(testutil::slurp(testutil::fixture("kegg/H01466")));
    CHECK(uc.code == "H01466");
    CHECK(uc.name == "Ulcerative colitis");
    CHECK(std::find(uc.drugs.begin(), uc.drugs.end(), "D00377") != uc.drugs.end());
    std::size_t drugs = 0;
    for (const auto& f : std::filesystem::directory_iterator(testutil::fixture("kegg"))) {
        const auto name = f.path().filename().string();
        const auto text = testutil::slurp(f.path());
        if (name[0] == 'D') {
            CHECK(parse_entry(text).code == name);
            ++drugs;
        } else {
            CHECK(parse_disease_entry(text).code == name);
        }
    }
    CHECK(drugs >= 14);
}

TEST_CASE("a drug linked through two diseases counts twice") {
    Client client({.cache_dir = testutil::fixture("kegg_multiplicity")});
    const std::vector<std::string> codes{"D90001", "D90002"};
    const auto tokens = collect_tokens(client, codes);
    const auto& t1 = tokens.at("D90001");
    CHECK(count(t1, "D90002") == 2);
    CHECK(count(t1, "D90001") == 2);
    CHECK(count(t1, "D90003") == 1);
    CHECK(count(t1, "D90004") == 1);
    CHECK(count(t1, "H90001") == 1);
    const auto& t2 = tokens.at("D90002");
    CHECK(count(t2, "D90002") == 1);
    CHECK(count(t2, "D90004") == 0);
    CHECK(client.network_requests() == 0);
}

TEST_CASE("expand_linked_drugs keeps unknown diseases as bare tokens") {
    KeggRecord r;
    r.code = "D00001";
    r.diseases = {"H1", "H2"};
    r.efficacy = {"x"};
    DiseaseIndex index{{"H1", {"D00002", "D00003"}}};
    const auto t = expand_linked_drugs(r, index);
    CHECK(t == std::vector<std::string>{"H1", "D00002", "D00003", "H2", "x"});
}

TEST_CASE("offline cache miss") {
    testutil::TempDir dir("kegg_offline");
    Client client({.cache_dir = dir.path()});
    CHECK_THROWS_AS(client.fetch_entry("D00001"), OfflineMiss);
    CHECK_THROWS_AS(client.fetch_entry("not-a-code"), Error);
}

TEST_CASE("network fetch fills the cache and honours the request interval") {
    httplib::Server server;
    int hits = 0;
    server.Get(R"(/get/(D\d{5}))", [&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        const std::string code = req.matches[1];
        if (code == "D99999") {
            res.status = 404;
            return;
        }
        std::string body = kEntry;
        body.replace(body.find("D00001"), 6, code);
        res.set_content(body, "text/plain");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    testutil::TempDir dir("kegg_net");
    Client client({.cache_dir = dir.path(),
                   .allow_network = true,
                   .base_url = "http://127.0.0.1:" + std::to_string(port),
                   .min_interval = std::chrono::milliseconds(200)});
    const auto t0 = std::chrono::steady_clock::now();
    const auto body = client.fetch_entry("D00002");
    CHECK(parse_entry(body).code == "D00002");
    CHECK(std::filesystem::exists(dir / "D00002"));
    client.fetch_entry("D00003");
    const auto elapsed = std::chrono::steady_clock::now() - t0;
    CHECK(elapsed >= std::chrono::milliseconds(200));
    CHECK(client.network_requests() == 2);

    // Served from cache now.
    CHECK(client.fetch_entry("D00002") == body);
    CHECK(hits == 2);

    try {
        client.fetch_entry("D99999");
        FAIL("expected FetchError");
    } catch (const FetchError& e) {
        CHECK(e.status() == 404);
    }
    CHECK_FALSE(std::filesystem::exists(dir / "D99999"));

    server.stop();
    worker.join();

    Client offline({.cache_dir = dir.path()});
    CHECK(offline.fetch_entry("D00003").find("D00003") != std::string::npos);
}
