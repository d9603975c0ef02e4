#include "txembed/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "txembed/error.hpp"
#include "txembed/parallel.hpp"
#include "txembed/random.hpp"

namespace txembed {

namespace {

constexpr double kMinGain = 1e-12;

struct TreeResult {
    RegressionTree tree;
    std::vector<double> importances;
};

// Exact greedy CART on a bootstrap sample. `order[f]` lists all row indices
// sorted by feature f (stable), shared across trees.
class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<std::vector<int>>& order,
                const ForestParams& params, std::uint64_t seed)
        : x_(x), y_(y), params_(params), rng_(seed), d_(static_cast<int>(x.cols())) {
        const auto n = static_cast<std::size_t>(x.rows());
        weight_.assign(n, 0.0);
        const auto draws = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(params.subsample * n)));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (std::size_t i = 0; i < draws; ++i) weight_[pick(rng_)] += 1.0;

        for (std::size_t i = 0; i < n; ++i)
            if (weight_[i] > 0) ++m_;
        sorted_.resize(static_cast<std::size_t>(d_) * m_);
        for (int f = 0; f < d_; ++f) {
            std::size_t k = 0;
            for (int row : order[static_cast<std::size_t>(f)])
                if (weight_[static_cast<std::size_t>(row)] > 0) sorted_[f * m_ + k++] = row;
        }
        features_.resize(static_cast<std::size_t>(d_));
        std::iota(features_.begin(), features_.end(), 0);
        n_candidates_ = std::clamp(static_cast<int>(std::ceil(params.colsample_bynode * d_ - 1e-9)), 1, d_);
        go_left_.assign(n, 0);
        buffer_.resize(m_);
        importances_.assign(static_cast<std::size_t>(d_), 0.0);
    }

    TreeResult build() {
        std::vector<TreeNode> nodes;
        struct Pending {
            std::size_t begin, end;
            int depth;
            int node;
        };
        nodes.emplace_back();
        std::vector<Pending> stack{{0, m_, 0, 0}};
        while (!stack.empty()) {
            const Pending p = stack.back();
            stack.pop_back();
            double w = 0, s = 0;
            const int* rows = &sorted_[p.begin];  // feature 0 ordering; any feature holds the same set
            for (std::size_t i = 0; i < p.end - p.begin; ++i) {
                const auto r = static_cast<std::size_t>(rows[i]);
                w += weight_[r];
                s += weight_[r] * y_(static_cast<Eigen::Index>(r));
            }
            nodes[static_cast<std::size_t>(p.node)].value = s / w;
            if (p.depth >= params_.max_depth) continue;

            const Split split = best_split(p.begin, p.end, w, s);
            if (split.feature < 0) continue;

            importances_[static_cast<std::size_t>(split.feature)] += split.gain;
            const std::size_t mid = partition(p.begin, p.end, split);
            const int left = static_cast<int>(nodes.size());
            nodes.emplace_back();
            nodes.emplace_back();
            auto& node = nodes[static_cast<std::size_t>(p.node)];
            node.feature = split.feature;
            node.threshold = split.threshold;
            node.left = left;
            node.right = left + 1;
            // Right pushed first so the left subtree is expanded first.
            stack.push_back({mid, p.end, p.depth + 1, left + 1});
            stack.push_back({p.begin, mid, p.depth + 1, left});
        }
        return {RegressionTree(std::move(nodes)), std::move(importances_)};
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0;
        double gain = 0;
    };

    Split best_split(std::size_t begin, std::size_t end, double w_total, double s_total) {
        Split best;
        const double min_weight = std::max(static_cast<double>(params_.min_samples_leaf), params_.min_child_weight);
        if (w_total < 2 * min_weight) return best;
        const double parent = s_total * s_total / w_total;

        // Partial Fisher-Yates: the first n_candidates_ entries become the sample.
        for (int i = 0; i < n_candidates_; ++i) {
            std::uniform_int_distribution<int> pick(i, d_ - 1);
            std::swap(features_[static_cast<std::size_t>(i)], features_[static_cast<std::size_t>(pick(rng_))]);
        }
        for (int c = 0; c < n_candidates_; ++c) {
            const int f = features_[static_cast<std::size_t>(c)];
            const int* rows = &sorted_[static_cast<std::size_t>(f) * m_ + begin];
            const std::size_t count = end - begin;
            double wl = 0, sl = 0;
            for (std::size_t i = 0; i + 1 < count; ++i) {
                const auto r = static_cast<std::size_t>(rows[i]);
                wl += weight_[r];
                sl += weight_[r] * y_(static_cast<Eigen::Index>(r));
                const double xa = x_(rows[i], f), xb = x_(rows[i + 1], f);
                if (!(xb > xa)) continue;
                const double wr = w_total - wl;
                if (wl < min_weight || wr < min_weight) continue;
                const double sr = s_total - sl;
                const double gain = sl * sl / wl + sr * sr / wr - parent;
                if (gain > best.gain + kMinGain) {
                    double t = xa + (xb - xa) / 2;
                    if (!(t < xb)) t = xa;
                    best = {f, t, gain};
                }
            }
        }
        return best;
    }

    std::size_t partition(std::size_t begin, std::size_t end, const Split& split) {
        const int* rows = &sorted_[static_cast<std::size_t>(split.feature) * m_ + begin];
        std::size_t n_left = 0;
        for (std::size_t i = 0; i < end - begin; ++i) {
            const bool left = x_(rows[i], split.feature) <= split.threshold;
            go_left_[static_cast<std::size_t>(rows[i])] = left;
            n_left += left;
        }
        for (int f = 0; f < d_; ++f) {
            int* seg = &sorted_[static_cast<std::size_t>(f) * m_ + begin];
            std::size_t l = 0, r = n_left;
            for (std::size_t i = 0; i < end - begin; ++i) {
                if (go_left_[static_cast<std::size_t>(seg[i])])
                    buffer_[l++] = seg[i];
                else
                    buffer_[r++] = seg[i];
            }
            std::copy(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(end - begin), seg);
        }
        return begin + n_left;
    }

    const Eigen::MatrixXd& x_;
    const Eigen::VectorXd& y_;
    const ForestParams& params_;
    std::mt19937_64 rng_;
    int d_;
    std::size_t m_ = 0;  // distinct rows in the bootstrap sample
    std::vector<double> weight_;
    std::vector<int> sorted_;  // d_ segments of m_ row ids
    std::vector<int> features_;
    int n_candidates_ = 1;
    std::vector<char> go_left_;
    std::vector<int> buffer_;
    std::vector<double> importances_;
};

void check_inputs(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() != y.size()) throw Error("feature matrix and target have different row counts");
    if (x.rows() < 2) throw Error("forest training needs at least 2 rows");
    if (x.cols() < 1) throw Error("forest training needs at least one feature");
    if (!x.allFinite() || !y.allFinite()) throw Error("forest training input contains non-finite values");
}

}  // namespace

ForestModel rf_train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestParams& params,
                     std::uint64_t seed) {
    check_inputs(x, y);
    if (params.n_trees < 1) throw ConfigError("n_trees must be >= 1");
    if (!(params.colsample_bynode > 0 && params.colsample_bynode <= 1))
        throw ConfigError("colsample_bynode must be in (0, 1]");
    if (params.max_depth < 0) throw ConfigError("max_depth must be >= 0");

    const auto d = static_cast<std::size_t>(x.cols());
    std::vector<std::vector<int>> order(d);
    for (std::size_t f = 0; f < d; ++f) {
        auto& o = order[f];
        o.resize(static_cast<std::size_t>(x.rows()));
        std::iota(o.begin(), o.end(), 0);
        const auto col = x.col(static_cast<Eigen::Index>(f));
        std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return col(a) < col(b); });
    }

    std::vector<TreeResult> results(static_cast<std::size_t>(params.n_trees));
    parallel_for(results.size(), params.jobs, [&](std::size_t t) {
        TreeBuilder builder(x, y, order, params, derive_seed(seed, t));
        results[t] = builder.build();
    });

    ForestModel model;
    model.params = params;
    model.seed = seed;
    model.n_features = d;
    model.importances.assign(d, 0.0);
    model.trees.reserve(results.size());
    for (auto& r : results) {
        for (std::size_t f = 0; f < d; ++f) model.importances[f] += r.importances[f];
        model.trees.push_back(std::move(r.tree));
    }
    return model;
}

Eigen::VectorXd rf_predict(const ForestModel& model, const Eigen::MatrixXd& x) {
    if (x.rows() == 0) return Eigen::VectorXd(0);
    if (static_cast<std::size_t>(x.cols()) != model.n_features)
        throw Error("prediction matrix has " + std::to_string(x.cols()) + " columns, model expects " +
                    std::to_string(model.n_features));
    if (model.trees.empty()) throw Error("forest has no trees");
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto row = x.row(i);
        double s = 0;
        for (const auto& t : model.trees) s += t.predict(row);
        out(i) = s / static_cast<double>(model.trees.size());
    }
    return out;
}

std::vector<std::size_t> select_features(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t k,
                                         const ForestParams& params, std::uint64_t seed) {
    const auto d = static_cast<std::size_t>(x.cols());
    if (k > d) throw Error("cannot select " + std::to_string(k) + " of " + std::to_string(d) + " features");
    std::vector<std::size_t> idx(d);
    std::iota(idx.begin(), idx.end(), 0);
    if (k == d) return idx;
    const auto model = rf_train(x, y, params, seed);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return model.importances[a] > model.importances[b]; });
    idx.resize(k);
    return idx;
}

std::string forest_to_json(const ForestModel& m) {
    using nlohmann::json;
    json j;
    j["params"] = {{"n_trees", m.params.n_trees},
                   {"colsample_bynode", m.params.colsample_bynode},
                   {"min_child_weight", m.params.min_child_weight},
                   {"max_depth", m.params.max_depth},
                   {"min_samples_leaf", m.params.min_samples_leaf},
                   {"subsample", m.params.subsample}};
    j["seed"] = m.seed;
    j["n_features"] = m.n_features;
    j["feature_names"] = m.feature_names;
    j["importances"] = m.importances;
    auto& trees = j["trees"] = json::array();
    for (const auto& t : m.trees) {
        json nodes = json::array();
        for (const auto& n : t.nodes()) {
            if (n.feature < 0)
                nodes.push_back({{"leaf", n.value}});
            else
                nodes.push_back({{"feature", n.feature},
                                 {"threshold", n.threshold},
                                 {"left", n.left},
                                 {"right", n.right},
                                 {"value", n.value}});
        }
        trees.push_back(std::move(nodes));
    }
    return j.dump(1);
}

ForestModel forest_from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    ForestModel m;
    const auto& p = j.at("params");
    m.params.n_trees = p.at("n_trees");
    m.params.colsample_bynode = p.at("colsample_bynode");
    m.params.min_child_weight = p.at("min_child_weight");
    m.params.max_depth = p.at("max_depth");
    m.params.min_samples_leaf = p.at("min_samples_leaf");
    m.params.subsample = p.at("subsample");
    m.seed = j.at("seed");
    m.n_features = j.at("n_features");
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.importances = j.at("importances").get<std::vector<double>>();
    for (const auto& tj : j.at("trees")) {
        std::vector<TreeNode> nodes;
        for (const auto& nj : tj) {
            TreeNode n;
            if (nj.contains("leaf")) {
                n.value = nj.at("leaf");
            } else {
                n.feature = nj.at("feature");
                n.threshold = nj.at("threshold");
                n.left = nj.at("left");
                n.right = nj.at("right");
                n.value = nj.at("value");
            }
            nodes.push_back(n);
        }
        m.trees.emplace_back(std::move(nodes));
    }
    return m;
}

double mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual) {
    if (pred.size() != actual.size()) throw Error("mse: length mismatch");
    if (pred.size() == 0) throw Error("mse: empty input");
    return (pred - actual).squaredNorm() / static_cast<double>(pred.size());
}

}  // namespace txembed
