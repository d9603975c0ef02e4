#include "txembed/logistic.hpp"

#include <cmath>

#include "txembed/error.hpp"

namespace txembed {

double two_sided_normal_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& eta) {
    return eta.unaryExpr([](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); });
}

double log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
    // sum y*eta - log(1 + e^eta), computed stably
    double ll = 0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double e = eta(i);
        const double log1pexp = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        ll += y(i) * e - log1pexp;
    }
    return ll;
}

void fill_inference(LogisticFit& fit, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const Eigen::VectorXd eta = x * fit.coefficients;
    const Eigen::VectorXd p = sigmoid(eta);
    const Eigen::VectorXd w = (p.array() * (1.0 - p.array())).matrix();
    const Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    const auto k = x.cols();
    fit.std_errors = Eigen::VectorXd::Constant(k, std::numeric_limits<double>::infinity());
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.vectorD().minCoeff() > 0) {
        const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
        fit.std_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    }
    fit.z_values = fit.coefficients.cwiseQuotient(fit.std_errors);
    fit.p_values = fit.z_values.unaryExpr([](double z) { return std::isfinite(z) ? two_sided_normal_p(z) : 1.0; });
    fit.log_likelihood = log_likelihood(eta, y);
}

}  // namespace

LogisticFit logistic_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LogisticOptions& options) {
    if (x.rows() != y.size()) throw Error("design matrix and outcome have different row counts");
    if (x.rows() < x.cols() || x.cols() == 0) throw Error("logistic regression needs rows >= columns >= 1");
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (y(i) != 0.0 && y(i) != 1.0) throw Error("logistic outcome must be 0/1");

    LogisticFit fit;
    fit.coefficients = Eigen::VectorXd::Zero(x.cols());
    const double ones = y.sum();
    if (ones == 0 || ones == static_cast<double>(y.size())) {
        fit.diagnostic = "outcome has a single class; the likelihood has no maximum";
        fill_inference(fit, x, y);
        return fit;
    }

    for (fit.n_iter = 1; fit.n_iter <= options.max_iter; ++fit.n_iter) {
        const Eigen::VectorXd p = sigmoid(x * fit.coefficients);
        const Eigen::VectorXd w = (p.array() * (1.0 - p.array())).matrix();
        const Eigen::MatrixXd h = x.transpose() * w.asDiagonal() * x;
        const Eigen::VectorXd g = x.transpose() * (y - p);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 1e-300) {
            fit.diagnostic = "information matrix became singular (collinear covariates or separation)";
            break;
        }
        const Eigen::VectorXd step = ldlt.solve(g);
        fit.coefficients += step;
        if (!fit.coefficients.allFinite()) {
            fit.diagnostic = "coefficients became non-finite";
            break;
        }
        if ((x * fit.coefficients).cwiseAbs().maxCoeff() > options.max_abs_linear_predictor) {
            fit.diagnostic = "linear predictor diverging; the outcome looks perfectly separated";
            break;
        }
        if (step.cwiseAbs().maxCoeff() < options.tolerance) {
            fit.converged = true;
            break;
        }
    }
    if (!fit.converged && fit.diagnostic.empty()) {
        fit.diagnostic = "no convergence within " + std::to_string(options.max_iter) + " iterations";
        fit.n_iter = options.max_iter;
    }
    fill_inference(fit, x, y);
    return fit;
}

}  // namespace txembed
