#include <doctest.h>

#include <random>

#include "txembed/error.hpp"
#include "txembed/features.hpp"

using namespace txembed;

namespace {

const Day index_day = parse_iso_date("2021-06-01");

EventRecord dx(const std::string& p, long days_before, const std::string& code) {
    return {p, add_days(index_day, -days_before), EventKind::diagnosis, code, 0, 0.0};
}

FeatureSpec spec(FeatureKind kind, LookbackWindow w) { return {"f", kind, {"J40", "J41"}, w}; }

}  // namespace

TEST_CASE("window tokens") {
    CHECK(LookbackWindow::parse("lifetime").type == LookbackWindow::Type::lifetime);
    CHECK(LookbackWindow::parse("at_index").type == LookbackWindow::Type::at_index);
    const auto w = LookbackWindow::parse("last_6_months");
    CHECK(w.type == LookbackWindow::Type::last_k_months);
    CHECK(w.months == 6);
    CHECK(w.to_string() == "last_6_months");
    CHECK_THROWS(LookbackWindow::parse("last_0_months"));
    CHECK_THROWS(LookbackWindow::parse("recent"));
}

TEST_CASE("lookback counts events strictly before the index date") {
    const std::vector<EventRecord> ev{dx("P", 0, "J40"), dx("P", 1, "J40"), dx("P", 30, "J41"), dx("P", 179, "J40"),
                                      dx("P", 180, "J40"), dx("P", 181, "J40"), dx("P", 5000, "J40"),
                                      dx("P", 3, "K51.90")};
    auto sorted = ev;
    std::sort(sorted.begin(), sorted.end(), [](const EventRecord& a, const EventRecord& b) { return a.date < b.date; });
    CHECK(lookback_aggregate(sorted, "P", spec(FeatureKind::count, LookbackWindow::lifetime()), index_day) == 6);
    CHECK(lookback_aggregate(sorted, "P", spec(FeatureKind::count, LookbackWindow::last_months(6)), index_day) == 4);
    CHECK(lookback_aggregate(sorted, "P", spec(FeatureKind::count, LookbackWindow::at_index()), index_day) == 1);
    CHECK(lookback_aggregate(sorted, "P", spec(FeatureKind::binary_presence, LookbackWindow::last_months(6)),
                             index_day) == 1);
    CHECK(lookback_aggregate(sorted, "Q", spec(FeatureKind::count, LookbackWindow::lifetime()), index_day) == 0);
}

TEST_CASE("lookback matches a direct filter on random histories") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<EventRecord> ev;
        const int n = static_cast<int>(rng() % 30);
        for (int i = 0; i < n; ++i)
            ev.push_back(dx(rng() % 2 ? "A" : "B", static_cast<long>(rng() % 800) - 100, rng() % 3 ? "J40" : "X"));
        std::stable_sort(ev.begin(), ev.end(), [](const EventRecord& a, const EventRecord& b) {
            return std::tie(a.patient_id, a.date) < std::tie(b.patient_id, b.date);
        });
        const int k = 1 + static_cast<int>(rng() % 24);
        const auto s = spec(FeatureKind::count, LookbackWindow::last_months(k));
        double want = 0;
        for (const auto& e : ev) {
            const long age = days_between(e.date, index_day);
            if (e.patient_id == "A" && e.code == "J40" && age >= 1 && age <= 30L * k) ++want;
        }
        CHECK(lookback_aggregate(ev, "A", s, index_day) == want);
    }
}

TEST_CASE("covariates: age, gender indicator, then specs") {
    std::map<std::string, Demographics> demo{{"P", {"P", parse_iso_date("1971-06-02"), Gender::unknown}}};
    const std::vector<EventRecord> ev{dx("P", 10, "J40")};
    const std::vector<FeatureSpec> specs{spec(FeatureKind::count, LookbackWindow::lifetime())};
    const auto x = assemble_covariates("P", index_day, ev, specs, demo);
    REQUIRE(x.size() == 3);
    CHECK(x[0] == 49);
    CHECK(x[1] == 0.5);
    CHECK(x[2] == 1);
    CHECK(covariate_names(specs) == std::vector<std::string>{"age", "gender", "f"});
    CHECK_THROWS_AS(assemble_covariates("Q", index_day, ev, specs, demo), Error);
}

TEST_CASE("feature specs JSON round trip") {
    const std::vector<FeatureSpec> specs{{"bronchitis", FeatureKind::count, {"J40"}, LookbackWindow::last_months(6)},
                                         {"colitis", FeatureKind::binary_presence, {"K51.90"}, LookbackWindow::lifetime()}};
    const auto back = parse_feature_specs(feature_specs_to_json(specs));
    REQUIRE(back.size() == 2);
    CHECK(back[0].name == "bronchitis");
    CHECK(back[0].window.months == 6);
    CHECK(back[1].kind == FeatureKind::binary_presence);
    CHECK(back[1].codes == std::set<std::string>{"K51.90"});
    CHECK_THROWS(parse_feature_specs(R"([{"name":"x","kind":"sum","codes":["A"],"window":"lifetime"}])"));
}
