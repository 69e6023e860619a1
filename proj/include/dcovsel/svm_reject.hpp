#pragma once

// Linear SVM with a reject option.
//
// Training minimizes the l1-penalized empirical generalized-hinge risk
//
//     (1/n) sum_i phi_d(y_i (lambda' x_i + b)) + r ||lambda||_1,
//     phi_d(z) = max(0, 1 - z, 1 - a z),  a = (1 - d) / d,
//
// which is a linear program. It is solved through its LP dual
//
//     max  sum_i min(beta_i, 1) / n
//     s.t. 0 <= beta_i <= a,  |sum_i beta_i y_i x_ij| <= n r,  sum_i beta_i y_i = 0,
//
// split as beta_i = beta1_i + beta2_i with beta1_i in [0, 1], beta2_i in [0, a - 1].
// The dual has only M + 1 general rows, so the simplex basis stays small even
// for thousands of subjects. lambda and b are read back from the simplex
// multipliers of those rows, and every fit is certified by the duality gap and
// a subgradient (KKT) residual.

#include "dataset.hpp"
#include "errors.hpp"
#include "simplex.hpp"

#include <fmt/format.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace dcovsel {

struct RejectLossParams {
    double d = 0.25;    ///< cost of withholding a decision, in (0, 1/2)
    double delta = 0.5; ///< withhold when |f(x)| <= delta

    [[nodiscard]] double a() const noexcept { return (1.0 - d) / d; }

    void validate() const
    {
        if (!(d > 0.0 && d < 0.5)) {
            throw ArgumentError(fmt::format("rejection cost d must lie in (0, 1/2), got {}", d));
        }
        if (!(delta > 0.0 && delta <= 1.0)) {
            throw ArgumentError(fmt::format("reject half-width delta must lie in (0, 1], got {}", delta));
        }
    }
};

/// phi_d(z): 1 - a z below 0, 1 - z on [0, 1), 0 from 1 on.
inline double generalized_hinge(double z, const RejectLossParams& params)
{
    if (z < 0.0) {
        return 1.0 - params.a() * z;
    }
    if (z < 1.0) {
        return 1.0 - z;
    }
    return 0.0;
}

struct Decision {
    int label = 0; ///< -1, +1, or 0 for a withheld decision
    double score = 0.0;
};

inline Decision decide(double score, double delta)
{
    if (std::abs(score) <= delta) {
        return {0, score};
    }
    return {score > 0.0 ? 1 : -1, score};
}

/// 1 for a wrong decision, d for a withheld one, 0 when correct.
inline double l_loss(int label, int truth, double d)
{
    if (truth != 1 && truth != -1) {
        throw ArgumentError("truth label must be -1 or +1");
    }
    if (label == 0) {
        return d;
    }
    return label == truth ? 0.0 : 1.0;
}

inline double l_loss(const Decision& decision, int truth, const RejectLossParams& params)
{
    return l_loss(decision.label, truth, params.d);
}

struct FitOptions {
    bool intercept = true;   ///< unpenalized intercept
    bool standardize = true; ///< fit on standardized columns, report coefficients on the input scale
    SimplexOptions simplex;
    double kkt_tolerance = 1e-6; ///< fits whose certificate exceeds this raise SolverError
};

struct RejectModel {
    Eigen::VectorXd lambda; ///< coefficients on the input feature scale
    double intercept = 0.0;
    double r = 0.0;
    RejectLossParams params;
    bool has_intercept = true;
    bool standardized = true;

    /// Coefficients of the problem actually solved (standardized coordinates when standardized).
    Eigen::VectorXd fitted_lambda;
    double fitted_intercept = 0.0;
    Eigen::VectorXd center; ///< per-column shift applied before fitting
    Eigen::VectorXd scale;  ///< per-column divisor applied before fitting

    double objective = 0.0;    ///< penalized empirical risk of the solved problem
    double duality_gap = 0.0;  ///< primal minus dual objective
    double kkt_residual = 0.0; ///< max subgradient-optimality violation
    std::size_t iterations = 0;

    [[nodiscard]] double score(const Eigen::Ref<const Eigen::VectorXd>& x) const
    {
        if (x.size() != lambda.size()) {
            throw DimensionError("expected " + std::to_string(lambda.size()) + " features, got " +
                                 std::to_string(x.size()));
        }
        return lambda.dot(x) + intercept;
    }

    /// Nonzero coefficient indices.
    [[nodiscard]] std::vector<std::size_t> active_features() const
    {
        std::vector<std::size_t> out;
        for (Eigen::Index j = 0; j < lambda.size(); ++j) {
            if (lambda(j) != 0.0) {
                out.push_back(static_cast<std::size_t>(j));
            }
        }
        return out;
    }
};

/// (1/n) sum phi_d(y_i f(x_i)) + r ||lambda||_1 for an explicit coefficient vector.
inline double penalized_risk(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& lambda,
                             double intercept, double r, const RejectLossParams& params)
{
    const Eigen::VectorXd f = x * lambda;
    double total = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        total += generalized_hinge(y[static_cast<std::size_t>(i)] * (f(i) + intercept), params);
    }
    return total / static_cast<double>(x.rows()) + r * lambda.lpNorm<1>();
}

/// Largest violation of the subgradient optimality conditions at (lambda, b)
/// with hinge multipliers theta_i = -beta_i (beta from the LP dual). Margins
/// within `kink_tol` of 0 or 1 are treated as sitting on the kink.
inline double kkt_residual(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& lambda,
                           double intercept, const Eigen::VectorXd& beta, double r, const RejectLossParams& params,
                           bool has_intercept, double kink_tol = 1e-8)
{
    const auto n = static_cast<double>(x.rows());
    const double a = params.a();
    const Eigen::VectorXd f = x * lambda;
    double worst = 0.0;
    Eigen::VectorXd weighted(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const int yi = y[static_cast<std::size_t>(i)];
        const double z = yi * (f(i) + intercept);
        const double theta = -beta(i);
        double lo = 0.0;
        double hi = 0.0;
        if (z > 1.0 + kink_tol) {
            lo = hi = 0.0;
        } else if (z >= 1.0 - kink_tol) {
            lo = -1.0;
            hi = 0.0;
        } else if (z > kink_tol) {
            lo = hi = -1.0;
        } else if (z >= -kink_tol) {
            lo = -a;
            hi = -1.0;
        } else {
            lo = hi = -a;
        }
        const double outside = std::max({0.0, lo - theta, theta - hi});
        worst = std::max(worst, outside / n);
        weighted(i) = theta * yi;
    }
    if (has_intercept) {
        worst = std::max(worst, std::abs(weighted.sum()) / n);
    }
    const Eigen::VectorXd g = x.transpose() * weighted / n;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (lambda(j) > 0.0) {
            worst = std::max(worst, std::abs(g(j) + r));
        } else if (lambda(j) < 0.0) {
            worst = std::max(worst, std::abs(g(j) - r));
        } else {
            worst = std::max(worst, std::max(0.0, std::abs(g(j)) - r));
        }
    }
    return worst;
}

namespace detail {

struct Scaling {
    Eigen::VectorXd center;
    Eigen::VectorXd scale;
};

inline Scaling column_scaling(const Eigen::MatrixXd& x, bool standardize, bool intercept)
{
    Scaling s{Eigen::VectorXd::Zero(x.cols()), Eigen::VectorXd::Ones(x.cols())};
    if (!standardize) {
        return s;
    }
    const double n = static_cast<double>(x.rows());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (intercept) {
            // Centering is only harmless when an intercept can absorb it.
            s.center(j) = x.col(j).mean();
            const double ss = (x.col(j).array() - s.center(j)).matrix().squaredNorm();
            const double sd = std::sqrt(ss / std::max(1.0, n - 1.0));
            s.scale(j) = sd > 0.0 ? sd : 1.0;
        } else {
            const double rms = std::sqrt(x.col(j).squaredNorm() / n);
            s.scale(j) = rms > 0.0 ? rms : 1.0;
        }
    }
    return s;
}

} // namespace detail

/// Fit the reject-option SVM at penalty r.
inline RejectModel fit(const Eigen::MatrixXd& x, const std::vector<int>& y, double r, const RejectLossParams& params,
                       const FitOptions& options = {})
{
    params.validate();
    if (!(r > 0.0) || !std::isfinite(r)) {
        throw ArgumentError("tuning parameter r must be positive and finite");
    }
    const Eigen::Index n = x.rows();
    const Eigen::Index m = x.cols();
    if (static_cast<std::size_t>(n) != y.size()) {
        throw DimensionError("design has " + std::to_string(n) + " rows but " + std::to_string(y.size()) +
                             " labels");
    }
    if (n < 2) {
        throw DataError("fit needs at least 2 subjects");
    }
    if (!x.allFinite()) {
        throw DataError("design matrix contains non-finite values");
    }
    bool has_pos = false;
    bool has_neg = false;
    for (const int v : y) {
        if (v == 1) {
            has_pos = true;
        } else if (v == -1) {
            has_neg = true;
        } else {
            throw DataError("labels must be -1 or +1");
        }
    }
    if (!has_pos || !has_neg) {
        throw DataError("both classes must be present to fit");
    }

    const detail::Scaling scaling = detail::column_scaling(x, options.standardize, options.intercept);
    Eigen::MatrixXd z(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        z.col(j) = (x.col(j).array() - scaling.center(j)) / scaling.scale(j);
    }

    const double a = params.a();
    const double dn = static_cast<double>(n);
    const Eigen::Index rows = m + (options.intercept ? 1 : 0);
    LpProblem lp;
    lp.a.resize(rows, 2 * n);
    lp.cost = Eigen::VectorXd::Zero(2 * n);
    lp.lower = Eigen::VectorXd::Zero(2 * n);
    lp.upper.resize(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double yi = y[static_cast<std::size_t>(i)];
        Eigen::VectorXd col(rows);
        col.head(m) = yi * z.row(i).transpose();
        if (options.intercept) {
            col(m) = yi;
        }
        lp.a.col(i) = col;
        lp.a.col(n + i) = col;
        lp.cost(i) = -1.0;
        lp.upper(i) = 1.0;
        lp.upper(n + i) = a - 1.0;
    }
    lp.row_lower = Eigen::VectorXd::Constant(rows, -dn * r);
    lp.row_upper = Eigen::VectorXd::Constant(rows, dn * r);
    if (options.intercept) {
        lp.row_lower(m) = 0.0;
        lp.row_upper(m) = 0.0;
    }

    const LpSolution sol = solve_lp(lp, options.simplex);

    RejectModel model;
    model.r = r;
    model.params = params;
    model.has_intercept = options.intercept;
    model.standardized = options.standardize;
    model.center = scaling.center;
    model.scale = scaling.scale;
    model.iterations = sol.iterations;
    model.fitted_lambda = -sol.duals.head(m);
    model.fitted_intercept = options.intercept ? -sol.duals(m) : 0.0;
    const double lambda_scale = std::max(1.0, model.fitted_lambda.cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j < m; ++j) {
        if (std::abs(model.fitted_lambda(j)) <= 1e-12 * lambda_scale) {
            model.fitted_lambda(j) = 0.0;
        }
    }

    const Eigen::VectorXd beta = sol.x.head(n) + sol.x.tail(n);
    model.objective = penalized_risk(z, y, model.fitted_lambda, model.fitted_intercept, r, params);
    const double dual_objective = -sol.objective / dn;
    model.duality_gap = model.objective - dual_objective;
    model.kkt_residual = kkt_residual(z, y, model.fitted_lambda, model.fitted_intercept, beta, r, params,
                                      options.intercept);
    if (std::abs(model.duality_gap) > options.kkt_tolerance * std::max(1.0, model.objective) ||
        model.kkt_residual > options.kkt_tolerance) {
        throw SolverError(fmt::format("reject-SVM fit failed its optimality certificate (gap {}, KKT residual {})",
                                      model.duality_gap, model.kkt_residual));
    }

    model.lambda = model.fitted_lambda.cwiseQuotient(scaling.scale);
    model.intercept = model.fitted_intercept - model.lambda.dot(scaling.center);
    return model;
}

inline Decision predict(const RejectModel& model, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    return decide(model.score(x), model.params.delta);
}

inline std::vector<Decision> predict(const RejectModel& model, const Eigen::MatrixXd& x)
{
    if (x.cols() != model.lambda.size()) {
        throw DimensionError("expected " + std::to_string(model.lambda.size()) + " features, got " +
                             std::to_string(x.cols()));
    }
    std::vector<Decision> out;
    out.reserve(static_cast<std::size_t>(x.rows()));
    const Eigen::VectorXd scores = (x * model.lambda).array() + model.intercept;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        out.push_back(decide(scores(i), model.params.delta));
    }
    return out;
}

/// Bayes classifier with reject option: -1 below d, +1 above 1 - d, withhold between.
inline int bayes_rule(double eta, double d)
{
    if (!(eta >= 0.0 && eta <= 1.0)) {
        throw ArgumentError("eta must lie in [0, 1]");
    }
    if (eta < d) {
        return -1;
    }
    if (eta > 1.0 - d) {
        return 1;
    }
    return 0;
}

/// Sample mean of min(eta, 1 - eta, d).
inline double bayes_risk(std::span<const double> eta, double d)
{
    if (eta.empty()) {
        throw ArgumentError("bayes_risk needs at least one eta value");
    }
    double total = 0.0;
    for (const double e : eta) {
        if (!(e >= 0.0 && e <= 1.0)) {
            throw ArgumentError("eta must lie in [0, 1]");
        }
        total += std::min({e, 1.0 - e, d});
    }
    return total / static_cast<double>(eta.size());
}

} // namespace dcovsel
