#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "txembed/embeddings.hpp"
#include "txembed/evaluation.hpp"
#include "txembed/logistic.hpp"

namespace txembed {

/// One (iteration, unseen treatment) tuple of the meta-analysis.
struct MetaRow {
    int iteration = 0;
    std::string unseen_treatment;
    int win = 0;
    NoveltyFeatures novelty;
};

/// Rows for every record of `method`, in record order. Novelty distances use
/// the other entries of `treatments` as the known set.
std::vector<MetaRow> build_meta_table(std::span<const EvalRecord> records, const TreatmentEmbedding& embedding,
                                      EmbeddingMethod method, std::span<const std::string> treatments);

/// Header as used by the reference analysis, e.g. for kegg:
/// ,iteration,unseen_treatment,ft_kegg_embeddings_perf_higher_than_ft_no_treatment,
/// min_kegg_eucl_dist_to_others,min_kegg_cosine_dist_to_others,kegg_eucl_dist_to_mean,kegg_cosine_dist_to_mean
std::vector<std::string> meta_column_names(EmbeddingMethod method);
void write_meta_table(std::ostream& out, std::span<const MetaRow> rows, EmbeddingMethod method);

enum class NoveltyCovariate { min_cosine, min_eucl, cosine_to_mean, eucl_to_mean };

std::string covariate_column(NoveltyCovariate c, EmbeddingMethod method);
double covariate_value(const NoveltyFeatures& f, NoveltyCovariate c);

struct MetaRegression {
    NoveltyCovariate covariate = NoveltyCovariate::min_cosine;
    LogisticFit fit;  // coefficients: (intercept, slope)
};

/// Four univariate logistic regressions of the win flag on each novelty
/// covariate (with intercept). Throws DegenerateOutcome if every win flag is
/// identical.
std::array<MetaRegression, 4> run_meta_regressions(std::span<const MetaRow> rows);

std::string regression_report_text(std::span<const MetaRegression> fits, EmbeddingMethod method, std::size_t n_rows);
std::string regression_report_json(std::span<const MetaRegression> fits, EmbeddingMethod method, std::size_t n_rows);

}  // namespace txembed
