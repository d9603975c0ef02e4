#include "txembed/cohort.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "txembed/csv.hpp"
#include "txembed/error.hpp"

namespace txembed {

using nlohmann::json;

CohortConfig load_cohort_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    CohortConfig c;
    try {
        json j = json::parse(in);
        c.onset_days = j.value("onset_days", c.onset_days);
        c.washout_days = j.value("washout_days", c.washout_days);
        c.treatment_codes = j.at("treatment_codes").get<std::map<std::string, std::string>>();
        c.steroid_codes = j.at("steroid_codes").get<std::set<std::string>>();
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (c.onset_days < 0) throw ConfigError("onset_days must be >= 0");
    if (c.washout_days <= 0) throw ConfigError("washout_days must be positive");
    return c;
}

std::string cohort_config_to_json(const CohortConfig& c) {
    json j{{"onset_days", c.onset_days},
           {"washout_days", c.washout_days},
           {"treatment_codes", c.treatment_codes},
           {"steroid_codes", c.steroid_codes}};
    return j.dump(2);
}

std::vector<TreatmentBlock> build_treatment_blocks(std::span<const EventRecord> events,
                                                   const std::map<std::string, std::string>& treatment_codes,
                                                   int washout_days, int onset_days) {
    if (washout_days <= 0) throw ConfigError("washout_days must be positive");
    if (onset_days < 0) throw ConfigError("onset window must be >= 0 days");

    struct Rx {
        const std::string* treatment;
        Day date;
        long supply;
    };
    std::vector<TreatmentBlock> blocks;
    std::size_t i = 0;
    while (i < events.size()) {
        std::size_t j = i;
        while (j < events.size() && events[j].patient_id == events[i].patient_id) ++j;

        std::vector<Rx> rx;
        for (std::size_t k = i; k < j; ++k) {
            const auto& e = events[k];
            if (e.kind != EventKind::prescription) continue;
            auto it = treatment_codes.find(e.code);
            if (it == treatment_codes.end()) continue;
            rx.push_back({&it->second, e.date, e.days_supply});
        }
        std::stable_sort(rx.begin(), rx.end(), [](const Rx& a, const Rx& b) {
            if (*a.treatment != *b.treatment) return *a.treatment < *b.treatment;
            return a.date < b.date;
        });

        auto close = [&](const Rx& first, Day cover_end) {
            TreatmentBlock b{events[i].patient_id, *first.treatment, first.date, cover_end,
                             std::min(add_days(first.date, onset_days), cover_end)};
            blocks.push_back(std::move(b));
        };
        std::size_t k = 0;
        while (k < rx.size()) {
            const Rx& first = rx[k];
            Day cover_end = add_days(first.date, first.supply);
            std::size_t m = k + 1;
            for (; m < rx.size() && *rx[m].treatment == *first.treatment; ++m) {
                if (days_between(cover_end, rx[m].date) > washout_days) break;
                cover_end = std::max(cover_end, add_days(rx[m].date, rx[m].supply));
            }
            close(first, cover_end);
            k = m;
        }
        i = j;
    }
    std::stable_sort(blocks.begin(), blocks.end(), [](const TreatmentBlock& a, const TreatmentBlock& b) {
        if (a.patient_id != b.patient_id) return a.patient_id < b.patient_id;
        if (a.start != b.start) return a.start < b.start;
        return a.treatment < b.treatment;
    });
    return blocks;
}

std::optional<double> compute_target(const TreatmentBlock& block, std::span<const EventRecord> steroid_events) {
    const long window = days_between(block.onset_end, block.end);
    if (window <= 0) return std::nullopt;

    // Half-open day intervals clipped to the target window [onset_end+1, end+1).
    const Day lo = add_days(block.onset_end, 1), hi = add_days(block.end, 1);
    std::vector<std::pair<Day, Day>> spans;
    for (const auto& e : steroid_events) {
        if (e.patient_id != block.patient_id) continue;
        Day a = std::max(e.date, lo), b = std::min(add_days(e.date, e.days_supply), hi);
        if (a < b) spans.emplace_back(a, b);
    }
    std::sort(spans.begin(), spans.end());
    long covered = 0;
    Day run_start{}, run_end{};
    bool open = false;
    for (const auto& [a, b] : spans) {
        if (open && a <= run_end) {
            run_end = std::max(run_end, b);
            continue;
        }
        if (open) covered += days_between(run_start, run_end);
        run_start = a;
        run_end = b;
        open = true;
    }
    if (open) covered += days_between(run_start, run_end);
    return std::clamp(static_cast<double>(covered) / static_cast<double>(window), 0.0, 1.0);
}

std::vector<EventRecord> steroid_events_for(std::span<const EventRecord> events, std::string_view patient_id,
                                            const std::set<std::string>& steroid_codes) {
    auto lo = std::lower_bound(events.begin(), events.end(), patient_id,
                               [](const EventRecord& e, std::string_view id) { return e.patient_id < id; });
    std::vector<EventRecord> out;
    for (auto it = lo; it != events.end() && it->patient_id == patient_id; ++it)
        if (it->kind == EventKind::prescription && steroid_codes.contains(it->code)) out.push_back(*it);
    return out;
}

std::vector<std::string> MasterTable::treatments() const {
    std::vector<std::string> out;
    for (const auto& r : rows) out.push_back(r.treatment);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

MasterTable build_master_table(std::span<const TreatmentBlock> blocks, std::span<const EventRecord> events,
                               std::span<const FeatureSpec> specs,
                               const std::map<std::string, Demographics>& demographics,
                               const std::set<std::string>& steroid_codes) {
    MasterTable table;
    table.covariate_names = covariate_names(specs);
    std::optional<std::string> cached_patient;
    std::vector<EventRecord> steroids;
    for (const auto& b : blocks) {
        if (b.patient_id != cached_patient) {
            steroids = steroid_events_for(events, b.patient_id, steroid_codes);
            cached_patient = b.patient_id;
        }
        auto target = compute_target(b, steroids);
        if (!target) continue;
        MasterRow row;
        row.patient_id = b.patient_id;
        row.treatment = b.treatment;
        row.block_start = b.start;
        row.block_end = b.end;
        row.covariates = assemble_covariates(b.patient_id, b.start, events, specs, demographics);
        row.target = *target;
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_master_table(std::ostream& out, const MasterTable& table) {
    std::vector<std::string> header{"patient_id", "treatment", "block_start", "block_end", "target"};
    header.insert(header.end(), table.covariate_names.begin(), table.covariate_names.end());
    csv::write_row(out, header);
    for (const auto& r : table.rows) {
        std::vector<std::string> f{r.patient_id, r.treatment, format_iso_date(r.block_start),
                                   format_iso_date(r.block_end), csv::format_double(r.target)};
        for (double v : r.covariates) f.push_back(csv::format_double(v));
        csv::write_row(out, f);
    }
}

MasterTable read_master_table(std::istream& in) {
    auto t = csv::read(in);
    const std::vector<std::string> fixed{"patient_id", "treatment", "block_start", "block_end", "target"};
    if (t.header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), t.header.begin()))
        throw ParseError("master table header must start with patient_id,treatment,block_start,block_end,target", 1);
    MasterTable table;
    table.covariate_names.assign(t.header.begin() + 5, t.header.end());
    for (const auto& row : t.rows) {
        MasterRow r;
        r.patient_id = row.fields[0];
        r.treatment = row.fields[1];
        try {
            r.block_start = parse_iso_date(row.fields[2]);
            r.block_end = parse_iso_date(row.fields[3]);
        } catch (const ParseError& e) {
            throw ParseError(e.what(), row.line);
        }
        r.target = csv::parse_double(row.fields[4], row.line);
        for (std::size_t c = 5; c < row.fields.size(); ++c)
            r.covariates.push_back(csv::parse_double(row.fields[c], row.line));
        table.rows.push_back(std::move(r));
    }
    return table;
}

MasterTable read_master_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return read_master_table(in);
}

void write_blocks(std::ostream& out, std::span<const TreatmentBlock> blocks,
                  std::span<const std::optional<double>> targets) {
    csv::write_row(out, {"patient_id", "treatment", "block_start", "block_end", "onset_end", "target"});
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& b = blocks[i];
        const auto& t = targets[i];
        csv::write_row(out, {b.patient_id, b.treatment, format_iso_date(b.start), format_iso_date(b.end),
                             format_iso_date(b.onset_end), t ? csv::format_double(*t) : std::string{}});
    }
}

}  // namespace txembed
