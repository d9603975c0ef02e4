#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "txembed/date.hpp"
#include "txembed/features.hpp"
#include "txembed/ingest.hpp"

namespace txembed {

/// Contiguous exposure of one patient to one treatment. `end` is the exclusive
/// end of drug coverage; the target window is the day range (onset_end, end].
struct TreatmentBlock {
    std::string patient_id;
    std::string treatment;
    Day start;
    Day end;
    Day onset_end;

    friend bool operator==(const TreatmentBlock&, const TreatmentBlock&) = default;
};

struct CohortConfig {
    int onset_days = 28;
    int washout_days = 30;
    /// prescription code -> treatment generic name
    std::map<std::string, std::string> treatment_codes;
    std::set<std::string> steroid_codes;
};

CohortConfig load_cohort_config(const std::filesystem::path& path);
std::string cohort_config_to_json(const CohortConfig& config);

/// Chains each patient's prescriptions of the same treatment into blocks.
/// Consecutive prescriptions are merged while the uncovered gap between the
/// running coverage end and the next prescription date is <= washout_days.
/// Prescriptions whose code is not in `treatment_codes` are ignored.
/// Output is ordered by (patient_id, start, treatment).
std::vector<TreatmentBlock> build_treatment_blocks(std::span<const EventRecord> events,
                                                   const std::map<std::string, std::string>& treatment_codes,
                                                   int washout_days, int onset_days = 28);

/// Fraction of target-window days covered by at least one steroid supply.
/// Returns nullopt for a degenerate block (empty target window).
std::optional<double> compute_target(const TreatmentBlock& block, std::span<const EventRecord> steroid_events);

/// Steroid prescriptions of one patient, in date order.
std::vector<EventRecord> steroid_events_for(std::span<const EventRecord> events, std::string_view patient_id,
                                            const std::set<std::string>& steroid_codes);

/// One row per non-degenerate treatment block.
struct MasterRow {
    std::string patient_id;
    std::string treatment;
    Day block_start;
    Day block_end;
    std::vector<double> covariates;
    double target = 0.0;
};

struct MasterTable {
    std::vector<std::string> covariate_names;
    std::vector<MasterRow> rows;

    std::vector<std::string> treatments() const;  // sorted, unique
};

MasterTable build_master_table(std::span<const TreatmentBlock> blocks, std::span<const EventRecord> events,
                               std::span<const FeatureSpec> specs,
                               const std::map<std::string, Demographics>& demographics,
                               const std::set<std::string>& steroid_codes);

/// Columns: patient_id,treatment,block_start,block_end,target,<covariates...>
void write_master_table(std::ostream& out, const MasterTable& table);
MasterTable read_master_table(std::istream& in);
MasterTable read_master_table(const std::filesystem::path& path);

/// Columns: patient_id,treatment,block_start,block_end,onset_end,target
/// (target empty for degenerate blocks).
void write_blocks(std::ostream& out, std::span<const TreatmentBlock> blocks,
                  std::span<const std::optional<double>> targets);

}  // namespace txembed
