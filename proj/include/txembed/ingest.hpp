#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "txembed/date.hpp"

namespace txembed {

enum class EventKind { diagnosis, prescription, procedure };

std::string to_string(EventKind kind);
/// Throws ParseError on an unknown token.
EventKind parse_event_kind(std::string_view token);

/// One dated patient event from the claims extract.
struct EventRecord {
    std::string patient_id;
    Day date;
    EventKind kind = EventKind::diagnosis;
    std::string code;
    long days_supply = 0;  // 0 unless kind == prescription
    double quantity = 0.0;

    friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

struct TreatmentCatalogEntry {
    std::string generic_name;
    std::string medication_class;
    std::optional<std::string> kegg_code;  // D followed by five digits
    std::optional<std::string> smiles;

    friend bool operator==(const TreatmentCatalogEntry&, const TreatmentCatalogEntry&) = default;
};

enum class Gender { female, male, unknown };

struct Demographics {
    std::string patient_id;
    Day birth_date;
    Gender gender = Gender::unknown;
};

inline constexpr const char* kEventsHeader = "patient_id,date,kind,code,days_supply,quantity";
inline constexpr const char* kCatalogHeader = "generic_name,medication_class,kegg_code,smiles";
inline constexpr const char* kDemographicsHeader = "patient_id,birth_date,gender";

/// Parses an events file. Result is sorted by (patient_id, date), ties kept in
/// input line order.
std::vector<EventRecord> parse_events(std::istream& in);
std::vector<EventRecord> parse_events(const std::filesystem::path& path);
void write_events(std::ostream& out, std::span<const EventRecord> events);

/// Accepts either the snake_case header or the display header
/// ("Generic name, Medication class, KEGG_code, SMILES"). Empty and "NaN"
/// cells become absent optionals.
std::vector<TreatmentCatalogEntry> parse_treatment_catalog(std::istream& in);
std::vector<TreatmentCatalogEntry> parse_treatment_catalog(const std::filesystem::path& path);
void write_treatment_catalog(std::ostream& out, std::span<const TreatmentCatalogEntry> catalog);

/// Gender tokens: F, M, U (case-insensitive).
std::map<std::string, Demographics> parse_demographics(std::istream& in);
std::map<std::string, Demographics> parse_demographics(const std::filesystem::path& path);
void write_demographics(std::ostream& out, const std::map<std::string, Demographics>& demographics);

bool is_kegg_drug_code(std::string_view code);

struct ValidationReport {
    std::size_t total = 0;
    std::map<EventKind, std::size_t> kind_counts;
    std::optional<Day> first_date;
    std::optional<Day> last_date;
    std::size_t patients = 0;
    /// check name -> number of offending events
    std::map<std::string, std::size_t> violations;

    std::size_t violation_count() const;
};

ValidationReport validate_events(std::span<const EventRecord> events);
void print_report(std::ostream& out, const ValidationReport& report);

}  // namespace txembed
