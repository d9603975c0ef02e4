#pragma once

#include <string>

#include <Eigen/Dense>

namespace txembed {

struct LogisticFit {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd std_errors;
    Eigen::VectorXd z_values;
    Eigen::VectorXd p_values;
    bool converged = false;
    int n_iter = 0;
    double log_likelihood = 0.0;
    std::string diagnostic;  // why the fit did not converge, empty otherwise
};

struct LogisticOptions {
    int max_iter = 100;
    double tolerance = 1e-8;  // on the largest absolute coefficient change
    /// Fitted log-odds beyond this magnitude are treated as separation.
    double max_abs_linear_predictor = 30.0;
};

/// Maximum-likelihood logistic regression by iteratively reweighted least
/// squares. `x` must already contain an intercept column if one is wanted.
/// Standard errors come from the inverse observed information at the final
/// estimate; p-values are two-sided Wald tests.
LogisticFit logistic_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LogisticOptions& options = {});

/// Two-sided standard-normal tail probability 2 * (1 - Phi(|z|)).
double two_sided_normal_p(double z);

}  // namespace txembed
