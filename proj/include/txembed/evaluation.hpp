#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "txembed/cohort.hpp"
#include "txembed/embeddings.hpp"
#include "txembed/forest.hpp"

namespace txembed {

/// Model family in the comparison grid: the treatment-blind baseline or one
/// embedding method.
enum class ModelKind { baseline, one_hot, smiles, kegg };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view token);
ModelKind model_kind(EmbeddingMethod method);

struct EvalRecord {
    int iteration = 0;
    std::string unseen_treatment;
    ModelKind method = ModelKind::baseline;
    double mse = 0.0;
    std::optional<int> win;  // absent for the baseline

    friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

inline constexpr const char* kSkipAbsent = "absent_from_bootstrap";
inline constexpr const char* kSkipNoEmbedding = "no_embedding";

/// A grid cell that produced no record.
struct EvalSkip {
    int iteration = 0;
    std::string unseen_treatment;
    ModelKind method = ModelKind::baseline;
    std::string reason;

    friend bool operator==(const EvalSkip&, const EvalSkip&) = default;
};

struct EvalConfig {
    int n_bootstrap = 10;
    std::uint64_t seed = 0;
    std::size_t k_features = 20;
    bool feature_selection = true;
    std::vector<EmbeddingMethod> methods{EmbeddingMethod::one_hot, EmbeddingMethod::smiles, EmbeddingMethod::kegg};
    ForestParams forest;
    /// One-hot reference level (encoded as all zeros). Defaults to the first
    /// training treatment in sorted order.
    std::optional<std::string> one_hot_reference;
    unsigned jobs = 1;
};

/// Counters filled by the instrumented harness.
struct EvalAudit {
    std::size_t cells = 0;                // (iteration, treatment) pairs visited
    std::size_t disjointness_checks = 0;  // train rows verified not to carry the unseen treatment
    std::size_t shared_baselines = 0;     // method records scored against their cell's single baseline
    std::size_t expected_entries = 0;     // n_bootstrap * treatments * (1 + methods)
    std::size_t observed_entries = 0;     // records + skips
    bool grid_complete = false;
};

struct EvalResult {
    std::vector<std::string> treatments;
    std::vector<EmbeddingMethod> methods;
    int n_bootstrap = 0;
    std::vector<EvalRecord> records;  // sorted by (iteration, treatment, method)
    std::vector<EvalSkip> skips;
    EvalAudit audit;
};

using EmbeddingSet = std::map<EmbeddingMethod, TreatmentEmbedding>;

/// Uniform draw of rows.size() rows with replacement.
std::vector<MasterRow> bootstrap_resample(std::span<const MasterRow> rows, std::uint64_t seed);

struct LotoSplit {
    std::vector<MasterRow> train;
    std::vector<MasterRow> test;
};

/// Test = rows of `unseen`, train = the rest. nullopt when `unseen` has no rows.
std::optional<LotoSplit> loto_split(std::span<const MasterRow> rows, const std::string& unseen);

/// Maps a treatment to the vector appended to the covariates for one method.
class TreatmentEncoder {
public:
    /// One-hot: vocabulary of the training treatments minus the reference level.
    static TreatmentEncoder one_hot(std::span<const MasterRow> train, const std::optional<std::string>& reference);
    static TreatmentEncoder from_embedding(const TreatmentEmbedding& embedding);

    EmbeddingMethod method() const { return method_; }
    std::size_t dim() const { return dim_; }
    /// nullopt when the treatment cannot be represented.
    std::optional<std::vector<double>> encode(const std::string& treatment) const;
    const Vocabulary* vocabulary() const { return method_ == EmbeddingMethod::one_hot ? &vocab_ : nullptr; }

private:
    EmbeddingMethod method_ = EmbeddingMethod::one_hot;
    std::size_t dim_ = 0;
    Vocabulary vocab_;
    const TreatmentEmbedding* embedding_ = nullptr;
};

/// An outcome model: covariates (optionally extended by a treatment vector),
/// column selection, forest.
struct FittedModel {
    std::optional<TreatmentEncoder> encoder;  // empty for the baseline
    std::vector<std::size_t> selected;        // columns of the full feature matrix, ascending
    ForestModel forest;

    /// Full feature matrix; `treatment_override` replaces every row's treatment.
    Eigen::MatrixXd features(std::span<const MasterRow> rows,
                             const std::optional<std::string>& treatment_override = std::nullopt) const;
    Eigen::VectorXd predict(std::span<const MasterRow> rows,
                            const std::optional<std::string>& treatment_override = std::nullopt) const;
};

FittedModel fit_baseline(std::span<const MasterRow> train, const EvalConfig& config, std::uint64_t seed);
/// Train rows whose treatment the encoder cannot represent are dropped.
FittedModel fit_with_encoder(std::span<const MasterRow> train, TreatmentEncoder encoder, const EvalConfig& config,
                             std::uint64_t seed);

double score(const FittedModel& model, std::span<const MasterRow> test);

struct PairScore {
    double method_mse = 0.0;
    double baseline_mse = 0.0;
};

/// Fits the baseline and the method model on `train`, scores both on `test`.
/// Throws when the method cannot encode the test treatment.
PairScore evaluate_pair(std::span<const MasterRow> train, std::span<const MasterRow> test, EmbeddingMethod method,
                        const EmbeddingSet& embeddings, const EvalConfig& config, std::uint64_t seed);

/// 1 iff the method's MSE is strictly below the baseline's (lower is better).
int win_flag(double mse_method, double mse_baseline);

/// Bootstrap outer loop, unseen treatment middle loop, method inner loop.
/// The baseline is fitted once per (iteration, treatment) and shared by all
/// methods. Throws std::logic_error if an integrity check fails.
EvalResult run_evaluation(const MasterTable& master, const EmbeddingSet& embeddings, const EvalConfig& config);

/// Recomputes the grid-completeness and baseline-sharing checks of `result`.
EvalAudit audit_records(const EvalResult& result);

struct WinRateTable {
    std::vector<std::string> treatments;
    std::vector<EmbeddingMethod> methods;
    /// percentage per (treatment, method); nullopt when nothing was evaluated
    std::vector<std::vector<std::optional<double>>> percent;
};

/// 100 * wins / evaluated iterations. Iterations skipped because the
/// treatment could not be embedded count as evaluated non-wins; iterations
/// whose bootstrap sample lacked the treatment are left out.
WinRateTable summarize_win_rates(const EvalResult& result);

std::string method_display_name(EmbeddingMethod method);

void write_eval_records(std::ostream& out, std::span<const EvalRecord> records);
std::vector<EvalRecord> read_eval_records(std::istream& in);
void write_eval_skips(std::ostream& out, std::span<const EvalSkip> skips);
std::vector<EvalSkip> read_eval_skips(std::istream& in);
/// Table layout: unseen treatment rows, one column per method, "40.00%" cells.
void write_win_rates(std::ostream& out, const WinRateTable& table);

/// Rebuilds an EvalResult (without audit counters) from saved records and skips.
EvalResult result_from_records(std::vector<EvalRecord> records, std::vector<EvalSkip> skips);

}  // namespace txembed
