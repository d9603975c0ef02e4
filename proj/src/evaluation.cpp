#include "txembed/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>

#include "txembed/csv.hpp"
#include "txembed/error.hpp"
#include "txembed/parallel.hpp"
#include "txembed/random.hpp"

namespace txembed {

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::baseline: return "baseline";
        case ModelKind::one_hot: return "one_hot";
        case ModelKind::smiles: return "smiles";
        case ModelKind::kegg: return "kegg";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view token) {
    if (token == "baseline") return ModelKind::baseline;
    return model_kind(parse_embedding_method(token));
}

ModelKind model_kind(EmbeddingMethod method) {
    switch (method) {
        case EmbeddingMethod::one_hot: return ModelKind::one_hot;
        case EmbeddingMethod::smiles: return ModelKind::smiles;
        case EmbeddingMethod::kegg: return ModelKind::kegg;
    }
    return ModelKind::baseline;
}

std::vector<MasterRow> bootstrap_resample(std::span<const MasterRow> rows, std::uint64_t seed) {
    if (rows.empty()) throw Error("cannot bootstrap an empty table");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
    std::vector<MasterRow> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out.push_back(rows[pick(rng)]);
    return out;
}

std::optional<LotoSplit> loto_split(std::span<const MasterRow> rows, const std::string& unseen) {
    LotoSplit s;
    for (const auto& r : rows) (r.treatment == unseen ? s.test : s.train).push_back(r);
    if (s.test.empty()) return std::nullopt;
    return s;
}

TreatmentEncoder TreatmentEncoder::one_hot(std::span<const MasterRow> train,
                                           const std::optional<std::string>& reference) {
    std::set<std::string> names;
    for (const auto& r : train) names.insert(r.treatment);
    if (!names.empty()) {
        if (reference && names.contains(*reference))
            names.erase(*reference);
        else
            names.erase(names.begin());
    }
    TreatmentEncoder e;
    e.method_ = EmbeddingMethod::one_hot;
    e.vocab_ = Vocabulary(std::vector<std::string>(names.begin(), names.end()));
    e.dim_ = e.vocab_.size();
    return e;
}

TreatmentEncoder TreatmentEncoder::from_embedding(const TreatmentEmbedding& embedding) {
    TreatmentEncoder e;
    e.method_ = embedding.method;
    e.dim_ = embedding.dim;
    e.embedding_ = &embedding;
    return e;
}

std::optional<std::vector<double>> TreatmentEncoder::encode(const std::string& treatment) const {
    if (method_ == EmbeddingMethod::one_hot && !embedding_) return one_hot_embed(treatment, vocab_);
    auto it = embedding_->vectors.find(treatment);
    if (it == embedding_->vectors.end()) return std::nullopt;
    return it->second;
}

Eigen::MatrixXd FittedModel::features(std::span<const MasterRow> rows,
                                      const std::optional<std::string>& treatment_override) const {
    const std::size_t n_cov = rows.empty() ? 0 : rows.front().covariates.size();
    const std::size_t width = n_cov + (encoder ? encoder->dim() : 0);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    std::map<std::string, std::vector<double>> cache;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const auto ii = static_cast<Eigen::Index>(i);
        if (r.covariates.size() != n_cov) throw Error("master rows have inconsistent covariate counts");
        for (std::size_t c = 0; c < n_cov; ++c) x(ii, static_cast<Eigen::Index>(c)) = r.covariates[c];
        if (!encoder) continue;
        const std::string& t = treatment_override ? *treatment_override : r.treatment;
        auto it = cache.find(t);
        if (it == cache.end()) {
            auto v = encoder->encode(t);
            if (!v) throw Error("treatment '" + t + "' has no " + to_string(encoder->method()) + " vector");
            it = cache.emplace(t, std::move(*v)).first;
        }
        for (std::size_t c = 0; c < it->second.size(); ++c)
            x(ii, static_cast<Eigen::Index>(n_cov + c)) = it->second[c];
    }
    return x;
}

Eigen::VectorXd FittedModel::predict(std::span<const MasterRow> rows,
                                     const std::optional<std::string>& treatment_override) const {
    const Eigen::MatrixXd full = features(rows, treatment_override);
    Eigen::MatrixXd x(full.rows(), static_cast<Eigen::Index>(selected.size()));
    for (std::size_t c = 0; c < selected.size(); ++c)
        x.col(static_cast<Eigen::Index>(c)) = full.col(static_cast<Eigen::Index>(selected[c]));
    return rf_predict(forest, x);
}

namespace {

Eigen::VectorXd targets(std::span<const MasterRow> rows) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) y(static_cast<Eigen::Index>(i)) = rows[i].target;
    return y;
}

FittedModel fit(std::span<const MasterRow> train, std::optional<TreatmentEncoder> encoder, const EvalConfig& config,
                std::uint64_t seed) {
    FittedModel m;
    m.encoder = std::move(encoder);
    const Eigen::MatrixXd full = m.features(train);
    const Eigen::VectorXd y = targets(train);
    const auto d = static_cast<std::size_t>(full.cols());
    const std::size_t k = config.feature_selection ? std::min(config.k_features, d) : d;
    m.selected = select_features(full, y, k, config.forest, mix_seed(seed));
    std::sort(m.selected.begin(), m.selected.end());
    Eigen::MatrixXd x(full.rows(), static_cast<Eigen::Index>(m.selected.size()));
    for (std::size_t c = 0; c < m.selected.size(); ++c)
        x.col(static_cast<Eigen::Index>(c)) = full.col(static_cast<Eigen::Index>(m.selected[c]));
    m.forest = rf_train(x, y, config.forest, seed);
    return m;
}

}  // namespace

FittedModel fit_baseline(std::span<const MasterRow> train, const EvalConfig& config, std::uint64_t seed) {
    return fit(train, std::nullopt, config, seed);
}

FittedModel fit_with_encoder(std::span<const MasterRow> train, TreatmentEncoder encoder, const EvalConfig& config,
                             std::uint64_t seed) {
    std::vector<MasterRow> usable;
    usable.reserve(train.size());
    for (const auto& r : train)
        if (encoder.method() == EmbeddingMethod::one_hot || encoder.encode(r.treatment)) usable.push_back(r);
    return fit(usable, std::move(encoder), config, seed);
}

double score(const FittedModel& model, std::span<const MasterRow> test) {
    return mse(model.predict(test), targets(test));
}

namespace {

TreatmentEncoder make_encoder(EmbeddingMethod method, std::span<const MasterRow> train, const EmbeddingSet& embeddings,
                              const EvalConfig& config) {
    if (method == EmbeddingMethod::one_hot) return TreatmentEncoder::one_hot(train, config.one_hot_reference);
    auto it = embeddings.find(method);
    if (it == embeddings.end()) throw ConfigError("no " + to_string(method) + " embedding supplied");
    return TreatmentEncoder::from_embedding(it->second);
}

}  // namespace

PairScore evaluate_pair(std::span<const MasterRow> train, std::span<const MasterRow> test, EmbeddingMethod method,
                        const EmbeddingSet& embeddings, const EvalConfig& config, std::uint64_t seed) {
    if (train.empty() || test.empty()) throw Error("evaluate_pair needs non-empty train and test sets");
    auto encoder = make_encoder(method, train, embeddings, config);
    if (!encoder.encode(test.front().treatment))
        throw Error("treatment '" + test.front().treatment + "' has no " + to_string(method) + " vector");
    PairScore s;
    s.baseline_mse = score(fit_baseline(train, config, seed), test);
    s.method_mse = score(fit_with_encoder(train, std::move(encoder), config, seed), test);
    return s;
}

int win_flag(double mse_method, double mse_baseline) {
    // MSE is lower-is-better: a win means strictly lower error than the baseline.
    return mse_method < mse_baseline ? 1 : 0;
}

namespace {

struct CellOutput {
    std::vector<EvalRecord> records;
    std::vector<EvalSkip> skips;
    std::size_t disjointness_checks = 0;
    std::size_t shared_baselines = 0;
};

CellOutput run_cell(int iteration, const std::string& unseen, std::span<const MasterRow> sample,
                    const EmbeddingSet& embeddings, const EvalConfig& config, std::uint64_t seed) {
    CellOutput out;
    auto split = loto_split(sample, unseen);
    if (!split) {
        out.skips.push_back({iteration, unseen, ModelKind::baseline, kSkipAbsent});
        for (auto m : config.methods) out.skips.push_back({iteration, unseen, model_kind(m), kSkipAbsent});
        return out;
    }
    for (const auto& r : split->train) {
        if (r.treatment == unseen)
            throw std::logic_error("leakage: training rows contain the unseen treatment '" + unseen + "'");
        ++out.disjointness_checks;
    }
    for (const auto& r : split->test)
        if (r.treatment != unseen) throw std::logic_error("test rows contain a treatment other than '" + unseen + "'");

    const double baseline = score(fit_baseline(split->train, config, seed), split->test);
    out.records.push_back({iteration, unseen, ModelKind::baseline, baseline, std::nullopt});

    for (auto method : config.methods) {
        auto encoder = make_encoder(method, split->train, embeddings, config);
        if (!encoder.encode(unseen)) {
            out.skips.push_back({iteration, unseen, model_kind(method), kSkipNoEmbedding});
            continue;
        }
        const double m = score(fit_with_encoder(split->train, std::move(encoder), config, seed), split->test);
        out.records.push_back({iteration, unseen, model_kind(method), m, win_flag(m, baseline)});
        ++out.shared_baselines;
    }
    return out;
}

}  // namespace

EvalAudit audit_records(const EvalResult& result) {
    EvalAudit a;
    a.expected_entries = static_cast<std::size_t>(result.n_bootstrap) * result.treatments.size() *
                         (1 + result.methods.size());
    a.observed_entries = result.records.size() + result.skips.size();
    std::map<std::tuple<int, std::string, ModelKind>, int> seen;
    std::map<std::pair<int, std::string>, double> baseline;
    for (const auto& r : result.records) {
        ++seen[{r.iteration, r.unseen_treatment, r.method}];
        if (r.method == ModelKind::baseline) baseline[{r.iteration, r.unseen_treatment}] = r.mse;
    }
    for (const auto& s : result.skips) ++seen[{s.iteration, s.unseen_treatment, s.method}];
    bool complete = a.observed_entries == a.expected_entries;
    for (int i = 0; i < result.n_bootstrap && complete; ++i)
        for (const auto& t : result.treatments) {
            if (seen[{i, t, ModelKind::baseline}] != 1) complete = false;
            for (auto m : result.methods)
                if (seen[{i, t, model_kind(m)}] != 1) complete = false;
        }
    a.grid_complete = complete;
    for (const auto& r : result.records) {
        if (r.method == ModelKind::baseline) continue;
        auto it = baseline.find({r.iteration, r.unseen_treatment});
        if (it != baseline.end() && r.win && *r.win == win_flag(r.mse, it->second)) ++a.shared_baselines;
    }
    std::set<std::pair<int, std::string>> cells;
    for (const auto& r : result.records) cells.insert({r.iteration, r.unseen_treatment});
    for (const auto& s : result.skips) cells.insert({s.iteration, s.unseen_treatment});
    a.cells = cells.size();
    return a;
}

EvalResult run_evaluation(const MasterTable& master, const EmbeddingSet& embeddings, const EvalConfig& config) {
    if (config.n_bootstrap < 1) throw ConfigError("n_bootstrap must be >= 1");
    EvalResult result;
    result.treatments = master.treatments();
    result.methods = config.methods;
    result.n_bootstrap = config.n_bootstrap;
    if (result.treatments.size() < 2) throw Error("evaluation needs at least two treatments in the master table");
    for (auto m : config.methods)
        if (m != EmbeddingMethod::one_hot && !embeddings.contains(m))
            throw ConfigError("no " + to_string(m) + " embedding supplied");

    std::vector<std::vector<MasterRow>> samples;
    for (int i = 0; i < config.n_bootstrap; ++i)
        samples.push_back(bootstrap_resample(master.rows, derive_seed(config.seed, 0xB007, static_cast<std::uint64_t>(i))));

    const std::size_t n_treat = result.treatments.size();
    std::vector<CellOutput> cells(static_cast<std::size_t>(config.n_bootstrap) * n_treat);
    parallel_for(cells.size(), config.jobs, [&](std::size_t c) {
        const int iteration = static_cast<int>(c / n_treat);
        const std::size_t t = c % n_treat;
        cells[c] = run_cell(iteration, result.treatments[t], samples[static_cast<std::size_t>(iteration)], embeddings,
                            config, derive_seed(config.seed, static_cast<std::uint64_t>(iteration) + 1, t + 1));
    });

    std::size_t disjoint = 0, shared = 0;
    for (auto& c : cells) {
        result.records.insert(result.records.end(), c.records.begin(), c.records.end());
        result.skips.insert(result.skips.end(), c.skips.begin(), c.skips.end());
        disjoint += c.disjointness_checks;
        shared += c.shared_baselines;
    }
    result.audit = audit_records(result);
    result.audit.disjointness_checks = disjoint;
    if (!result.audit.grid_complete) throw std::logic_error("evaluation grid is incomplete");
    if (result.audit.shared_baselines != shared)
        throw std::logic_error("a method record was not scored against its cell's baseline");
    return result;
}

WinRateTable summarize_win_rates(const EvalResult& result) {
    WinRateTable t;
    t.treatments = result.treatments;
    t.methods = result.methods;
    std::map<std::pair<std::string, ModelKind>, std::pair<int, int>> tally;  // wins, evaluated
    for (const auto& r : result.records) {
        if (!r.win) continue;
        auto& [w, n] = tally[{r.unseen_treatment, r.method}];
        w += *r.win;
        ++n;
    }
    for (const auto& s : result.skips)
        if (s.reason == kSkipNoEmbedding) ++tally[{s.unseen_treatment, s.method}].second;
    for (const auto& name : t.treatments) {
        auto& row = t.percent.emplace_back();
        for (auto m : t.methods) {
            auto it = tally.find({name, model_kind(m)});
            if (it == tally.end() || it->second.second == 0)
                row.push_back(std::nullopt);
            else
                row.push_back(100.0 * it->second.first / it->second.second);
        }
    }
    return t;
}

std::string method_display_name(EmbeddingMethod method) {
    switch (method) {
        case EmbeddingMethod::one_hot: return "One-hot encoding";
        case EmbeddingMethod::smiles: return "SMILES-based embeddings";
        case EmbeddingMethod::kegg: return "Kegg-based embeddings";
    }
    return "?";
}

void write_eval_records(std::ostream& out, std::span<const EvalRecord> records) {
    out << "iteration,unseen_treatment,method,mse,win\n";
    for (const auto& r : records)
        csv::write_row(out, {std::to_string(r.iteration), r.unseen_treatment, to_string(r.method),
                             csv::format_double(r.mse), r.win ? std::to_string(*r.win) : std::string{}});
}

std::vector<EvalRecord> read_eval_records(std::istream& in) {
    auto t = csv::read(in);
    if (t.header != std::vector<std::string>{"iteration", "unseen_treatment", "method", "mse", "win"})
        throw ParseError("eval records header must be iteration,unseen_treatment,method,mse,win", 1);
    std::vector<EvalRecord> out;
    for (const auto& row : t.rows) {
        EvalRecord r;
        r.iteration = static_cast<int>(csv::parse_long(row.fields[0], row.line));
        r.unseen_treatment = row.fields[1];
        r.method = parse_model_kind(row.fields[2]);
        r.mse = csv::parse_double(row.fields[3], row.line);
        if (!row.fields[4].empty()) r.win = static_cast<int>(csv::parse_long(row.fields[4], row.line));
        if ((r.method == ModelKind::baseline) == r.win.has_value())
            throw ParseError("win must be present exactly for non-baseline records", row.line);
        out.push_back(std::move(r));
    }
    return out;
}

void write_eval_skips(std::ostream& out, std::span<const EvalSkip> skips) {
    out << "iteration,unseen_treatment,method,reason\n";
    for (const auto& s : skips)
        csv::write_row(out, {std::to_string(s.iteration), s.unseen_treatment, to_string(s.method), s.reason});
}

std::vector<EvalSkip> read_eval_skips(std::istream& in) {
    auto t = csv::read(in);
    if (t.header != std::vector<std::string>{"iteration", "unseen_treatment", "method", "reason"})
        throw ParseError("eval skips header must be iteration,unseen_treatment,method,reason", 1);
    std::vector<EvalSkip> out;
    for (const auto& row : t.rows)
        out.push_back({static_cast<int>(csv::parse_long(row.fields[0], row.line)), row.fields[1],
                       parse_model_kind(row.fields[2]), row.fields[3]});
    return out;
}

void write_win_rates(std::ostream& out, const WinRateTable& table) {
    std::vector<std::string> header{"Unseen treatment"};
    for (auto m : table.methods) header.push_back(method_display_name(m));
    csv::write_row(out, header);
    for (std::size_t i = 0; i < table.treatments.size(); ++i) {
        std::vector<std::string> f{table.treatments[i]};
        for (const auto& cell : table.percent[i]) {
            if (!cell) {
                f.emplace_back("NA");
                continue;
            }
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.2f%%", *cell);
            f.emplace_back(buf);
        }
        csv::write_row(out, f);
    }
}

EvalResult result_from_records(std::vector<EvalRecord> records, std::vector<EvalSkip> skips) {
    EvalResult r;
    std::set<std::string> treatments;
    std::set<EmbeddingMethod> methods;
    int max_iter = -1;
    auto note = [&](int it, const std::string& t, ModelKind k) {
        treatments.insert(t);
        max_iter = std::max(max_iter, it);
        if (k != ModelKind::baseline) methods.insert(parse_embedding_method(to_string(k)));
    };
    for (const auto& x : records) note(x.iteration, x.unseen_treatment, x.method);
    for (const auto& x : skips) note(x.iteration, x.unseen_treatment, x.method);
    r.treatments.assign(treatments.begin(), treatments.end());
    r.methods.assign(methods.begin(), methods.end());
    r.n_bootstrap = max_iter + 1;
    r.records = std::move(records);
    r.skips = std::move(skips);
    r.audit = audit_records(r);
    return r;
}

}  // namespace txembed
