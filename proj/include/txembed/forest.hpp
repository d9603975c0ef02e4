#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace txembed {

/// Random-forest regressor settings. Defaults mirror an XGBRFRegressor with
/// n_estimators=300, colsample_bynode=0.6, min_child_weight=0.001.
struct ForestParams {
    int n_trees = 300;
    double colsample_bynode = 0.6;  // fraction of features drawn at every node
    double min_child_weight = 0.001;  // minimum hessian (= sample count) per child
    int max_depth = 6;
    int min_samples_leaf = 1;
    double subsample = 1.0;  // bootstrap sample size as a fraction of the rows
    unsigned jobs = 1;       // worker threads; results do not depend on it
};

struct TreeNode {
    int feature = -1;  // -1 for a leaf
    double threshold = 0.0;  // rows with x <= threshold go left
    int left = -1;
    int right = -1;
    double value = 0.0;  // mean target of the node's bootstrap sample
};

class RegressionTree {
public:
    RegressionTree() = default;
    explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

    template <class Row>
    double predict(const Row& x) const {
        int i = 0;
        while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
            const auto& n = nodes_[static_cast<std::size_t>(i)];
            i = x(n.feature) <= n.threshold ? n.left : n.right;
        }
        return nodes_[static_cast<std::size_t>(i)].value;
    }

    const std::vector<TreeNode>& nodes() const { return nodes_; }

private:
    std::vector<TreeNode> nodes_;
};

struct ForestModel {
    std::vector<RegressionTree> trees;
    ForestParams params;
    std::uint64_t seed = 0;
    std::size_t n_features = 0;
    std::vector<std::string> feature_names;
    /// Total weighted squared-error reduction of the splits on each feature.
    std::vector<double> importances;
};

/// Trains `params.n_trees` trees, each on a bootstrap sample of the rows.
/// Nodes consider ceil(colsample_bynode * d) features drawn without
/// replacement and split at midpoints between sorted distinct values.
/// Per-tree seeds derive from `seed`, so the result does not depend on jobs.
ForestModel rf_train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestParams& params,
                     std::uint64_t seed);

/// Mean of the per-tree predictions for each row of `x`.
Eigen::VectorXd rf_predict(const ForestModel& model, const Eigen::MatrixXd& x);

/// Top-k feature indices by forest importance, highest first, ties to the
/// lower index. With k equal to the column count returns 0..k-1 unchanged.
std::vector<std::size_t> select_features(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t k,
                                         const ForestParams& params, std::uint64_t seed);

/// Tree dump as JSON: split feature, threshold, children and leaf values.
std::string forest_to_json(const ForestModel& model);
ForestModel forest_from_json(const std::string& text);

/// Mean squared error. Throws on empty input or length mismatch.
double mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual);

}  // namespace txembed
