#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "txembed/error.hpp"

namespace txembed::kegg {

/// Drug entry fields consumed by the bag-of-links embedding.
struct KeggRecord {
    std::string code;  // D#####
    std::string name;
    std::vector<std::string> diseases;          // H#####
    std::vector<std::string> targets_pathways;  // e.g. HSA:5743, KO:K11987, hsa04060
    std::vector<std::string> efficacy;          // normalized snippets
    std::vector<std::string> drug_class;        // DG##### or normalized class text
};

struct KeggDisease {
    std::string code;  // H#####
    std::string name;
    std::vector<std::string> drugs;  // D#####
};

class OfflineMiss : public Error {
public:
    using Error::Error;
};

class FetchError : public Error {
public:
    FetchError(const std::string& what, int status = 0) : Error(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

bool is_drug_code(std::string_view code);
bool is_disease_code(std::string_view code);

struct FetchOptions {
    std::filesystem::path cache_dir;
    bool allow_network = false;
    std::string base_url = "https://rest.kegg.jp";
    std::chrono::milliseconds min_interval{350};
    std::chrono::seconds timeout{30};
};

/// Cache-first client for the KEGG REST `get/<entry>` endpoint. One file per
/// entry under cache_dir holds the raw body. Network fetches and cache writes
/// are serialized through this object.
class Client {
public:
    explicit Client(FetchOptions options);

    /// Accepts drug (D#####) and disease (H#####) identifiers.
    std::string fetch_entry(const std::string& code);

    std::size_t network_requests() const;
    const FetchOptions& options() const { return options_; }

private:
    std::filesystem::path cache_path(const std::string& code) const;

    FetchOptions options_;
    mutable std::mutex mutex_;
    std::size_t requests_ = 0;
    std::chrono::steady_clock::time_point last_request_{};
};

/// One-shot convenience over Client.
std::string fetch_entry(const std::string& code, const std::filesystem::path& cache_dir, bool allow_network);

/// Parses a KEGG DRUG flat-file entry. Throws ParseError when the ENTRY line
/// or the `///` terminator is missing.
KeggRecord parse_entry(std::string_view raw);
KeggDisease parse_disease_entry(std::string_view raw);

/// disease code -> drugs linked to it
using DiseaseIndex = std::map<std::string, std::set<std::string>>;
DiseaseIndex build_disease_index(std::span<const KeggDisease> diseases);

/// Token multiset for one drug: each disease code, every drug linked through
/// each disease (repeated once per linking disease), targets/pathways,
/// efficacy snippets and class identifiers. Diseases missing from the index
/// contribute only their own code.
std::vector<std::string> expand_linked_drugs(const KeggRecord& record, const DiseaseIndex& disease_index);

/// Lowercases, splits on commas and semicolons, trims.
std::vector<std::string> normalize_snippets(std::string_view text);

/// Fetches every drug in `codes` plus all diseases they link to, and returns
/// the token multiset per drug code.
std::map<std::string, std::vector<std::string>> collect_tokens(Client& client, std::span<const std::string> codes);

}  // namespace txembed::kegg
