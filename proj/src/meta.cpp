#include "txembed/meta.hpp"

#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "txembed/csv.hpp"
#include "txembed/error.hpp"

namespace txembed {

std::vector<MetaRow> build_meta_table(std::span<const EvalRecord> records, const TreatmentEmbedding& embedding,
                                      EmbeddingMethod method, std::span<const std::string> treatments) {
    const ModelKind kind = model_kind(method);
    std::map<std::string, NoveltyFeatures> novelty;
    auto novelty_of = [&](const std::string& unseen) -> const NoveltyFeatures& {
        auto it = novelty.find(unseen);
        if (it != novelty.end()) return it->second;
        if (!embedding.contains(unseen))
            throw Error("treatment '" + unseen + "' is missing from the " + to_string(method) + " embedding");
        std::vector<std::vector<double>> train, all;
        for (const auto& t : treatments) {
            if (!embedding.contains(t)) continue;
            all.push_back(embedding.at(t));
            if (t != unseen) train.push_back(embedding.at(t));
        }
        if (train.empty())
            throw Error("no known treatments to compare '" + unseen + "' against");
        const auto& v = embedding.at(unseen);
        return novelty.emplace(unseen, novelty_features(v, train, all)).first->second;
    };

    std::vector<MetaRow> rows;
    for (const auto& r : records) {
        if (r.method != kind) continue;
        if (!r.win) throw Error("record for " + r.unseen_treatment + " lacks a win flag");
        rows.push_back({r.iteration, r.unseen_treatment, *r.win, novelty_of(r.unseen_treatment)});
    }
    return rows;
}

std::vector<std::string> meta_column_names(EmbeddingMethod method) {
    const std::string m = to_string(method);
    return {"",
            "iteration",
            "unseen_treatment",
            "ft_" + m + "_embeddings_perf_higher_than_ft_no_treatment",
            "min_" + m + "_eucl_dist_to_others",
            "min_" + m + "_cosine_dist_to_others",
            m + "_eucl_dist_to_mean",
            m + "_cosine_dist_to_mean"};
}

namespace {

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

void write_meta_table(std::ostream& out, std::span<const MetaRow> rows, EmbeddingMethod method) {
    csv::write_row(out, meta_column_names(method));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        csv::write_row(out, {std::to_string(i), std::to_string(r.iteration), r.unseen_treatment, std::to_string(r.win),
                             fixed6(r.novelty.min_eucl), fixed6(r.novelty.min_cosine), fixed6(r.novelty.eucl_to_mean),
                             fixed6(r.novelty.cosine_to_mean)});
    }
}

std::string covariate_column(NoveltyCovariate c, EmbeddingMethod method) {
    const auto names = meta_column_names(method);
    switch (c) {
        case NoveltyCovariate::min_eucl: return names[4];
        case NoveltyCovariate::min_cosine: return names[5];
        case NoveltyCovariate::eucl_to_mean: return names[6];
        case NoveltyCovariate::cosine_to_mean: return names[7];
    }
    return {};
}

double covariate_value(const NoveltyFeatures& f, NoveltyCovariate c) {
    switch (c) {
        case NoveltyCovariate::min_eucl: return f.min_eucl;
        case NoveltyCovariate::min_cosine: return f.min_cosine;
        case NoveltyCovariate::eucl_to_mean: return f.eucl_to_mean;
        case NoveltyCovariate::cosine_to_mean: return f.cosine_to_mean;
    }
    return 0.0;
}

std::array<MetaRegression, 4> run_meta_regressions(std::span<const MetaRow> rows) {
    if (rows.empty()) throw DegenerateOutcome("meta table is empty");
    std::size_t wins = 0;
    for (const auto& r : rows) wins += r.win != 0;
    if (wins == 0 || wins == rows.size())
        throw DegenerateOutcome(wins == 0 ? "every win flag is 0; the logistic regressions are undefined"
                                          : "every win flag is 1; the logistic regressions are undefined");

    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = rows[static_cast<std::size_t>(i)].win != 0 ? 1.0 : 0.0;

    std::array<MetaRegression, 4> out{};
    const NoveltyCovariate order[] = {NoveltyCovariate::min_cosine, NoveltyCovariate::min_eucl,
                                      NoveltyCovariate::cosine_to_mean, NoveltyCovariate::eucl_to_mean};
    for (std::size_t k = 0; k < 4; ++k) {
        Eigen::MatrixXd x(n, 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            x(i, 0) = 1.0;
            x(i, 1) = covariate_value(rows[static_cast<std::size_t>(i)].novelty, order[k]);
        }
        out[k] = {order[k], logistic_fit(x, y)};
    }
    return out;
}

namespace {

std::string num(double v, const char* fmt = "%.4f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

}  // namespace

std::string regression_report_text(std::span<const MetaRegression> fits, EmbeddingMethod method, std::size_t n_rows) {
    const auto m = to_string(method);
    std::ostringstream os;
    for (const auto& f : fits) {
        const auto cov = covariate_column(f.covariate, method);
        os << "Logit: ft_" << m << "_embeddings_perf_higher_than_ft_no_treatment ~ " << cov << "\n";
        os << "No. observations: " << n_rows << "  Log-likelihood: " << num(f.fit.log_likelihood)
           << "  Converged: " << (f.fit.converged ? "True" : "False") << "  Iterations: " << f.fit.n_iter << "\n";
        if (!f.fit.diagnostic.empty()) os << "Warning: " << f.fit.diagnostic << "\n";
        char line[256];
        std::snprintf(line, sizeof line, "%-40s %10s %10s %10s %10s\n", "", "coef", "std err", "z", "P>|z|");
        os << line;
        for (Eigen::Index i = 0; i < f.fit.coefficients.size(); ++i) {
            const std::string label = i == 0 ? std::string("const") : cov;
            std::snprintf(line, sizeof line, "%-40s %10.4f %10.4f %10.3f %10.3f\n", label.c_str(),
                          f.fit.coefficients(i), f.fit.std_errors(i), f.fit.z_values(i), f.fit.p_values(i));
            os << line;
        }
        os << "\n";
    }
    return os.str();
}

std::string regression_report_json(std::span<const MetaRegression> fits, EmbeddingMethod method, std::size_t n_rows) {
    nlohmann::ordered_json doc;
    doc["method"] = to_string(method);
    doc["outcome"] = "ft_" + to_string(method) + "_embeddings_perf_higher_than_ft_no_treatment";
    doc["n_observations"] = n_rows;
    doc["regressions"] = nlohmann::ordered_json::array();
    for (const auto& f : fits) {
        nlohmann::ordered_json r;
        r["covariate"] = covariate_column(f.covariate, method);
        r["converged"] = f.fit.converged;
        r["iterations"] = f.fit.n_iter;
        r["log_likelihood"] = f.fit.log_likelihood;
        if (!f.fit.diagnostic.empty()) r["diagnostic"] = f.fit.diagnostic;
        const char* terms[] = {"intercept", "slope"};
        for (Eigen::Index i = 0; i < f.fit.coefficients.size() && i < 2; ++i)
            r[terms[i]] = {{"coef", f.fit.coefficients(i)},
                           {"std_err", f.fit.std_errors(i)},
                           {"z", f.fit.z_values(i)},
                           {"p", f.fit.p_values(i)}};
        doc["regressions"].push_back(std::move(r));
    }
    return doc.dump(2) + "\n";
}

}  // namespace txembed
