#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "txembed/ingest.hpp"

namespace txembed {

enum class EmbeddingMethod { one_hot, smiles, kegg };

std::string to_string(EmbeddingMethod m);
EmbeddingMethod parse_embedding_method(std::string_view token);

/// Ordered set of unique tokens; order is fixed at construction.
class Vocabulary {
public:
    Vocabulary() = default;
    /// Throws if `tokens` has duplicates.
    explicit Vocabulary(std::vector<std::string> tokens);
    /// Sorted unique union of all tokens.
    static Vocabulary sorted_union(const std::map<std::string, std::vector<std::string>>& token_lists);

    std::optional<std::size_t> index_of(std::string_view token) const;
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

/// Treatment name -> vector, all of length `dim`.
struct TreatmentEmbedding {
    EmbeddingMethod method = EmbeddingMethod::one_hot;
    std::size_t dim = 0;
    std::map<std::string, std::vector<double>> vectors;

    bool contains(const std::string& treatment) const { return vectors.contains(treatment); }
    const std::vector<double>& at(const std::string& treatment) const;
};

/// Indicator over `vocabulary`; tokens outside it map to all zeros.
std::vector<double> one_hot_embed(std::string_view treatment, const Vocabulary& vocabulary);

/// 64-bit FNV-1a. Used for SMILES n-gram bucketing.
std::uint64_t fnv1a64(std::string_view bytes);

/// Character n-gram counts hashed into `dim` buckets (bucket = FNV-1a(gram) mod dim).
/// Strings shorter than n contribute a single gram: the whole string.
std::vector<double> smiles_featurize(std::string_view smiles, std::size_t n = 3, std::size_t dim = 512);

/// Rows follow the iteration order of `tokens` (sorted by drug key).
Eigen::MatrixXd kegg_bag_embed(const std::map<std::string, std::vector<std::string>>& tokens,
                               const Vocabulary& vocabulary);

/// tf = raw count, idf = ln((1+N)/(1+df)) + 1, rows L2-normalized.
Eigen::MatrixXd tfidf_transform(const Eigen::MatrixXd& counts);

struct PcaModel {
    Eigen::VectorXd mean;
    Eigen::MatrixXd basis;  // d x k, orthonormal columns
    Eigen::VectorXd eigenvalues;  // k, nonincreasing
    double total_variance = 0.0;  // trace of the sample covariance

    Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& scores) const;
};

struct PcaResult {
    Eigen::MatrixXd scores;  // rows x k
    PcaModel model;
};

/// Projects mean-centred rows onto the top-k eigenvectors of the sample
/// covariance. Each basis column is signed so its largest-magnitude entry is
/// positive. Requires rows >= 2 and 1 <= k <= min(rows - 1, d).
PcaResult pca_fit_transform(const Eigen::MatrixXd& x, std::size_t k);

std::string pca_model_to_json(const PcaModel& model);
PcaModel pca_model_from_json(std::string_view text);

struct NoveltyFeatures {
    double min_eucl = 0.0;
    double min_cosine = 0.0;
    double eucl_to_mean = 0.0;
    double cosine_to_mean = 0.0;
};

double euclidean_distance(std::span<const double> a, std::span<const double> b);
/// 1 - cosine similarity; 1 when either vector is zero.
double cosine_distance(std::span<const double> a, std::span<const double> b);

/// `all_vectors` is the training set plus the unseen vector.
NoveltyFeatures novelty_features(std::span<const double> unseen, std::span<const std::vector<double>> train_vectors,
                                 std::span<const std::vector<double>> all_vectors);

struct SmilesEmbeddingOptions {
    std::size_t ngram = 3;
    std::size_t hash_dim = 512;
    std::size_t pca_k = 3;
};

struct BuiltEmbedding {
    TreatmentEmbedding embedding;
    std::optional<PcaModel> pca;
};

/// Catalog entries without SMILES are left out.
BuiltEmbedding build_smiles_embedding(std::span<const TreatmentCatalogEntry> catalog,
                                      const SmilesEmbeddingOptions& options);

/// `tokens` is keyed by KEGG code. Treatments sharing a code share a vector;
/// entries without a code (or whose code is missing from `tokens`) are left out.
/// pca_k == 0 keeps the full TF-IDF vectors.
BuiltEmbedding build_kegg_embedding(std::span<const TreatmentCatalogEntry> catalog,
                                    const std::map<std::string, std::vector<std::string>>& tokens, std::size_t pca_k);

/// Indicator embedding over all catalog treatments (sorted).
TreatmentEmbedding build_one_hot_embedding(std::span<const TreatmentCatalogEntry> catalog);

/// CSV: treatment,method,dim,v0..v{dim-1}
void write_embedding(std::ostream& out, const TreatmentEmbedding& embedding);
TreatmentEmbedding read_embedding(std::istream& in);
TreatmentEmbedding read_embedding(const std::filesystem::path& path);

}  // namespace txembed
