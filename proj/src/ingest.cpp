#include "txembed/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <ostream>
#include <set>

#include "txembed/csv.hpp"
#include "txembed/error.hpp"

namespace txembed {

std::string to_string(EventKind kind) {
    switch (kind) {
        case EventKind::diagnosis: return "diagnosis";
        case EventKind::prescription: return "prescription";
        case EventKind::procedure: return "procedure";
    }
    return "?";
}

EventKind parse_event_kind(std::string_view token) {
    if (token == "diagnosis") return EventKind::diagnosis;
    if (token == "prescription") return EventKind::prescription;
    if (token == "procedure") return EventKind::procedure;
    throw ParseError("unknown event kind '" + std::string(token) + "'");
}

bool is_kegg_drug_code(std::string_view code) {
    return code.size() == 6 && code[0] == 'D' &&
           std::all_of(code.begin() + 1, code.end(), [](char c) { return c >= '0' && c <= '9'; });
}

namespace {

std::ifstream open(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return in;
}

template <class F>
auto with_path(const std::filesystem::path& path, F&& f) {
    auto in = open(path);
    try {
        return f(in);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.line());
    }
}

void require_header(const csv::Table& t, std::string_view expected) {
    std::string got;
    for (std::size_t i = 0; i < t.header.size(); ++i) got += (i ? "," : "") + t.header[i];
    if (got != expected) throw ParseError("header '" + got + "' does not match '" + std::string(expected) + "'", 1);
}

// "Generic name" -> "generic_name", "KEGG_code" -> "kegg_code"
std::string normalize_column(std::string_view name) {
    std::string out;
    for (char c : name) {
        if (c == ' ') c = '_';
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    while (!out.empty() && out.front() == '_') out.erase(out.begin());
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out;
}

std::optional<std::string> optional_cell(const std::string& cell) {
    if (cell.empty() || cell == "NaN" || cell == "nan") return std::nullopt;
    return cell;
}

}  // namespace

std::vector<EventRecord> parse_events(std::istream& in) {
    auto table = csv::read(in);
    require_header(table, kEventsHeader);
    std::vector<EventRecord> events;
    events.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        const auto& f = row.fields;
        EventRecord e;
        try {
            e.patient_id = f[0];
            e.date = parse_iso_date(f[1]);
            e.kind = parse_event_kind(f[2]);
        } catch (const ParseError& err) {
            throw ParseError(err.what(), row.line);
        }
        if (e.patient_id.empty()) throw ParseError("empty patient_id", row.line);
        e.code = f[3];
        e.days_supply = csv::parse_long(f[4], row.line);
        e.quantity = csv::parse_double(f[5], row.line);
        if (e.days_supply < 0) throw ParseError("negative days_supply", row.line);
        if (e.quantity < 0) throw ParseError("negative quantity", row.line);
        if (e.kind != EventKind::prescription && e.days_supply != 0)
            throw ParseError("days_supply must be 0 for " + to_string(e.kind) + " events", row.line);
        events.push_back(std::move(e));
    }
    std::stable_sort(events.begin(), events.end(), [](const EventRecord& a, const EventRecord& b) {
        if (a.patient_id != b.patient_id) return a.patient_id < b.patient_id;
        return a.date < b.date;
    });
    return events;
}

std::vector<EventRecord> parse_events(const std::filesystem::path& path) {
    return with_path(path, [](std::istream& in) { return parse_events(in); });
}

void write_events(std::ostream& out, std::span<const EventRecord> events) {
    out << kEventsHeader << '\n';
    for (const auto& e : events)
        csv::write_row(out, {e.patient_id, format_iso_date(e.date), to_string(e.kind), e.code,
                             std::to_string(e.days_supply), csv::format_double(e.quantity)});
}

std::vector<TreatmentCatalogEntry> parse_treatment_catalog(std::istream& in) {
    auto table = csv::read(in);
    for (auto& h : table.header) h = normalize_column(h);
    // Exported pandas frames carry a leading unnamed index column.
    std::size_t idx[4];
    const char* required[4] = {"generic_name", "medication_class", "kegg_code", "smiles"};
    for (int i = 0; i < 4; ++i) {
        idx[i] = table.column(required[i]);
        if (idx[i] == std::string::npos)
            throw ParseError(std::string("catalog is missing required column '") + required[i] + "'", 1);
    }
    std::vector<TreatmentCatalogEntry> entries;
    std::set<std::string> seen;
    for (const auto& row : table.rows) {
        TreatmentCatalogEntry e;
        e.generic_name = row.fields[idx[0]];
        e.medication_class = row.fields[idx[1]];
        e.kegg_code = optional_cell(row.fields[idx[2]]);
        e.smiles = optional_cell(row.fields[idx[3]]);
        if (e.generic_name.empty()) throw ParseError("empty generic_name", row.line);
        if (!seen.insert(e.generic_name).second)
            throw ParseError("duplicate generic_name '" + e.generic_name + "'", row.line);
        if (e.kegg_code && !is_kegg_drug_code(*e.kegg_code))
            throw ParseError("kegg_code '" + *e.kegg_code + "' is not a D-number", row.line);
        entries.push_back(std::move(e));
    }
    return entries;
}

std::vector<TreatmentCatalogEntry> parse_treatment_catalog(const std::filesystem::path& path) {
    return with_path(path, [](std::istream& in) { return parse_treatment_catalog(in); });
}

void write_treatment_catalog(std::ostream& out, std::span<const TreatmentCatalogEntry> catalog) {
    out << kCatalogHeader << '\n';
    for (const auto& e : catalog)
        csv::write_row(out, {e.generic_name, e.medication_class, e.kegg_code.value_or(""), e.smiles.value_or("")});
}

std::map<std::string, Demographics> parse_demographics(std::istream& in) {
    auto table = csv::read(in);
    require_header(table, kDemographicsHeader);
    std::map<std::string, Demographics> out;
    for (const auto& row : table.rows) {
        Demographics d;
        d.patient_id = row.fields[0];
        try {
            d.birth_date = parse_iso_date(row.fields[1]);
        } catch (const ParseError& err) {
            throw ParseError(err.what(), row.line);
        }
        const std::string g = normalize_column(row.fields[2]);
        if (g == "f")
            d.gender = Gender::female;
        else if (g == "m")
            d.gender = Gender::male;
        else if (g == "u" || g.empty())
            d.gender = Gender::unknown;
        else
            throw ParseError("unknown gender '" + row.fields[2] + "'", row.line);
        if (!out.emplace(d.patient_id, d).second)
            throw ParseError("duplicate patient_id '" + d.patient_id + "'", row.line);
    }
    return out;
}

std::map<std::string, Demographics> parse_demographics(const std::filesystem::path& path) {
    return with_path(path, [](std::istream& in) { return parse_demographics(in); });
}

void write_demographics(std::ostream& out, const std::map<std::string, Demographics>& demographics) {
    out << kDemographicsHeader << '\n';
    for (const auto& [id, d] : demographics) {
        const char* g = d.gender == Gender::female ? "F" : d.gender == Gender::male ? "M" : "U";
        csv::write_row(out, {id, format_iso_date(d.birth_date), g});
    }
}

std::size_t ValidationReport::violation_count() const {
    std::size_t n = 0;
    for (const auto& [_, c] : violations) n += c;
    return n;
}

ValidationReport validate_events(std::span<const EventRecord> events) {
    ValidationReport r;
    r.kind_counts = {{EventKind::diagnosis, 0}, {EventKind::prescription, 0}, {EventKind::procedure, 0}};
    r.violations = {{"prescription_zero_supply", 0},
                    {"supply_on_non_prescription", 0},
                    {"negative_quantity", 0},
                    {"empty_code", 0},
                    {"out_of_order", 0}};
    std::set<std::string_view> patients;
    const EventRecord* prev = nullptr;
    for (const auto& e : events) {
        ++r.total;
        ++r.kind_counts[e.kind];
        patients.insert(e.patient_id);
        if (!r.first_date || e.date < *r.first_date) r.first_date = e.date;
        if (!r.last_date || e.date > *r.last_date) r.last_date = e.date;
        if (e.kind == EventKind::prescription && e.days_supply == 0) ++r.violations["prescription_zero_supply"];
        if (e.kind != EventKind::prescription && e.days_supply != 0) ++r.violations["supply_on_non_prescription"];
        if (e.quantity < 0) ++r.violations["negative_quantity"];
        if (e.code.empty()) ++r.violations["empty_code"];
        if (prev && (prev->patient_id > e.patient_id || (prev->patient_id == e.patient_id && prev->date > e.date)))
            ++r.violations["out_of_order"];
        prev = &e;
    }
    r.patients = patients.size();
    return r;
}

void print_report(std::ostream& out, const ValidationReport& r) {
    out << "events: " << r.total << "\npatients: " << r.patients << '\n';
    for (const auto& [k, n] : r.kind_counts) out << "  " << to_string(k) << ": " << n << '\n';
    if (r.first_date)
        out << "date range: " << format_iso_date(*r.first_date) << " .. " << format_iso_date(*r.last_date) << '\n';
    out << "violations:\n";
    for (const auto& [name, n] : r.violations) out << "  " << name << ": " << n << '\n';
}

}  // namespace txembed
