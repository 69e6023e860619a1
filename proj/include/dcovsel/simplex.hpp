#pragma once

// Dense bounded-variable revised primal simplex.
//
//   minimize    c'x
//   subject to  row_lower <= A x <= row_upper
//               lower     <=   x <= upper
//
// One logical variable per row carries the row bounds, and the all-logical
// basis is the starting basis. The structurals start at a finite bound (or 0
// when free), so the caller must supply a problem whose starting point is
// feasible; there is no phase one. That covers every LP built in this
// library. Pricing is Dantzig with a Harris ratio test; long runs of degenerate
// pivots switch to Bland's rule until progress resumes.

#include "errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace dcovsel {

struct LpProblem {
    Eigen::MatrixXd a;
    Eigen::VectorXd cost;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    Eigen::VectorXd row_lower;
    Eigen::VectorXd row_upper;
};

struct SimplexOptions {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-10;
    double pivot_tol = 1e-11;
    std::size_t refactor_every = 64;
    std::size_t max_iterations = 0; ///< 0 selects 50 * (columns + rows) + 1000
};

struct LpSolution {
    Eigen::VectorXd x;            ///< structural values
    Eigen::VectorXd row_activity; ///< A x
    Eigen::VectorXd duals;        ///< simplex multipliers y = B^-T c_B
    Eigen::VectorXd reduced_costs;
    double objective = 0.0;
    std::size_t iterations = 0;
};

class BoundedSimplex {
public:
    explicit BoundedSimplex(const LpProblem& problem, SimplexOptions options = {})
        : lp_(problem), opt_(options)
    {
        rows_ = lp_.a.rows();
        cols_ = lp_.a.cols();
        check_shapes();
        if (opt_.max_iterations == 0) {
            opt_.max_iterations = 50 * static_cast<std::size_t>(rows_ + cols_) + 1000;
        }
    }

    LpSolution solve()
    {
        initialize();
        std::size_t since_refactor = 0;
        std::size_t degenerate_run = 0;
        bool bland = false;
        std::size_t iterations = 0;
        for (;; ++iterations) {
            if (iterations >= opt_.max_iterations) {
                throw SolverError("simplex iteration limit reached (" + std::to_string(iterations) + ")");
            }
            if (since_refactor >= opt_.refactor_every) {
                refactor();
                since_refactor = 0;
            }
            compute_duals();
            const Eigen::Index entering = price(bland);
            if (entering < 0) {
                // Confirm optimality on a fresh factorization before accepting.
                if (since_refactor == 0) {
                    break;
                }
                refactor();
                since_refactor = 0;
                compute_duals();
                if (price(bland) < 0) {
                    break;
                }
                continue;
            }
            const double step = iterate(entering, bland);
            if (step <= 1e-12) {
                ++degenerate_run;
                if (degenerate_run > static_cast<std::size_t>(2 * rows_ + 20)) {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
            ++since_refactor;
        }
        return finish(iterations);
    }

private:
    enum class Status { basic, at_lower, at_upper, free_zero };

    void check_shapes() const
    {
        if (lp_.cost.size() != cols_ || lp_.lower.size() != cols_ || lp_.upper.size() != cols_) {
            throw DimensionError("LP column data sizes disagree");
        }
        if (lp_.row_lower.size() != rows_ || lp_.row_upper.size() != rows_) {
            throw DimensionError("LP row bound sizes disagree");
        }
        for (Eigen::Index j = 0; j < cols_; ++j) {
            if (lp_.lower(j) > lp_.upper(j)) {
                throw ArgumentError("LP variable " + std::to_string(j) + " has lower > upper");
            }
        }
        for (Eigen::Index i = 0; i < rows_; ++i) {
            if (lp_.row_lower(i) > lp_.row_upper(i)) {
                throw ArgumentError("LP row " + std::to_string(i) + " has lower > upper");
            }
        }
    }

    [[nodiscard]] Eigen::Index total() const noexcept { return cols_ + rows_; }

    [[nodiscard]] double lower(Eigen::Index j) const { return j < cols_ ? lp_.lower(j) : lp_.row_lower(j - cols_); }
    [[nodiscard]] double upper(Eigen::Index j) const { return j < cols_ ? lp_.upper(j) : lp_.row_upper(j - cols_); }
    [[nodiscard]] double cost(Eigen::Index j) const { return j < cols_ ? lp_.cost(j) : 0.0; }

    /// Column j of [A  -I].
    [[nodiscard]] Eigen::VectorXd column(Eigen::Index j) const
    {
        if (j < cols_) {
            return lp_.a.col(j);
        }
        Eigen::VectorXd e = Eigen::VectorXd::Zero(rows_);
        e(j - cols_) = -1.0;
        return e;
    }

    /// y' * column(j)
    [[nodiscard]] double dual_dot(Eigen::Index j) const
    {
        return j < cols_ ? y_.dot(lp_.a.col(j)) : -y_(j - cols_);
    }

    void initialize()
    {
        x_ = Eigen::VectorXd::Zero(total());
        status_.assign(static_cast<std::size_t>(total()), Status::at_lower);
        for (Eigen::Index j = 0; j < cols_; ++j) {
            const double lo = lower(j);
            const double hi = upper(j);
            if (std::isfinite(lo)) {
                x_(j) = lo;
                status_[static_cast<std::size_t>(j)] = Status::at_lower;
            } else if (std::isfinite(hi)) {
                x_(j) = hi;
                status_[static_cast<std::size_t>(j)] = Status::at_upper;
            } else {
                x_(j) = 0.0;
                status_[static_cast<std::size_t>(j)] = Status::free_zero;
            }
        }
        basis_.resize(static_cast<std::size_t>(rows_));
        for (Eigen::Index i = 0; i < rows_; ++i) {
            basis_[static_cast<std::size_t>(i)] = cols_ + i;
            status_[static_cast<std::size_t>(cols_ + i)] = Status::basic;
        }
        refactor();
        for (Eigen::Index i = 0; i < rows_; ++i) {
            const Eigen::Index j = cols_ + i;
            if (x_(j) < lower(j) - opt_.feasibility_tol || x_(j) > upper(j) + opt_.feasibility_tol) {
                throw SolverError("LP starting point violates row " + std::to_string(i) +
                                  " bounds; a feasible starting point is required");
            }
        }
    }

    void refactor()
    {
        Eigen::MatrixXd b(rows_, rows_);
        for (Eigen::Index i = 0; i < rows_; ++i) {
            b.col(i) = column(basis_[static_cast<std::size_t>(i)]);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(b);
        if (!lu.isInvertible()) {
            throw SolverError("simplex basis became singular");
        }
        binv_ = lu.inverse();
        // B x_B = -N x_N
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows_);
        for (Eigen::Index j = 0; j < total(); ++j) {
            if (status_[static_cast<std::size_t>(j)] != Status::basic && x_(j) != 0.0) {
                rhs -= column(j) * x_(j);
            }
        }
        const Eigen::VectorXd xb = binv_ * rhs;
        for (Eigen::Index i = 0; i < rows_; ++i) {
            x_(basis_[static_cast<std::size_t>(i)]) = xb(i);
        }
    }

    void compute_duals()
    {
        Eigen::VectorXd cb(rows_);
        for (Eigen::Index i = 0; i < rows_; ++i) {
            cb(i) = cost(basis_[static_cast<std::size_t>(i)]);
        }
        y_ = binv_.transpose() * cb;
    }

    /// Entering variable, or -1 at optimality. Sets direction_.
    Eigen::Index price(bool bland)
    {
        Eigen::Index best = -1;
        double best_score = 0.0;
        for (Eigen::Index j = 0; j < total(); ++j) {
            const Status s = status_[static_cast<std::size_t>(j)];
            if (s == Status::basic || lower(j) == upper(j)) {
                continue;
            }
            const double d = cost(j) - dual_dot(j);
            int dir = 0;
            if ((s == Status::at_lower || s == Status::free_zero) && d < -opt_.optimality_tol) {
                dir = 1;
            } else if ((s == Status::at_upper || s == Status::free_zero) && d > opt_.optimality_tol) {
                dir = -1;
            }
            if (dir == 0) {
                continue;
            }
            if (bland) {
                direction_ = dir;
                return j;
            }
            if (std::abs(d) > best_score) {
                best_score = std::abs(d);
                best = j;
                direction_ = dir;
            }
        }
        return best;
    }

    /// One simplex step along the entering variable; returns the step length.
    double iterate(Eigen::Index entering, bool bland)
    {
        const Eigen::VectorXd w = binv_ * column(entering);
        const double dir = static_cast<double>(direction_);
        constexpr double inf = std::numeric_limits<double>::infinity();
        const double tol = opt_.feasibility_tol;

        // Rate of change of each basic variable per unit step: -dir * w_i.
        auto bound_ratio = [&](Eigen::Index i, double slack) -> double {
            const Eigen::Index var = basis_[static_cast<std::size_t>(i)];
            const double rate = -dir * w(i);
            if (rate < -opt_.pivot_tol && std::isfinite(lower(var))) {
                return std::max(0.0, x_(var) - lower(var) + slack) / -rate;
            }
            if (rate > opt_.pivot_tol && std::isfinite(upper(var))) {
                return std::max(0.0, upper(var) - x_(var) + slack) / rate;
            }
            return inf;
        };

        Eigen::Index leave = -1;
        double step = inf;
        if (bland) {
            Eigen::Index leave_var = total();
            for (Eigen::Index i = 0; i < rows_; ++i) {
                const double t = bound_ratio(i, 0.0);
                const Eigen::Index var = basis_[static_cast<std::size_t>(i)];
                if (t < step - 1e-15 || (t <= step + 1e-15 && t < inf && var < leave_var)) {
                    step = t;
                    leave = i;
                    leave_var = var;
                }
            }
        } else {
            // Harris: bound on the step with relaxed bounds, then the largest pivot within it.
            double relaxed = inf;
            for (Eigen::Index i = 0; i < rows_; ++i) {
                relaxed = std::min(relaxed, bound_ratio(i, tol));
            }
            double best_pivot = 0.0;
            for (Eigen::Index i = 0; i < rows_; ++i) {
                const double t = bound_ratio(i, 0.0);
                if (t <= relaxed && std::abs(w(i)) > best_pivot) {
                    best_pivot = std::abs(w(i));
                    leave = i;
                    step = t;
                }
            }
        }

        const double flip = upper(entering) - lower(entering);
        if (std::isfinite(flip) && flip <= step) {
            move(entering, dir * flip, w);
            const Status s = status_[static_cast<std::size_t>(entering)];
            status_[static_cast<std::size_t>(entering)] = s == Status::at_lower ? Status::at_upper : Status::at_lower;
            x_(entering) = s == Status::at_lower ? upper(entering) : lower(entering);
            return flip;
        }
        if (leave < 0 || !std::isfinite(step)) {
            throw SolverError("LP is unbounded along variable " + std::to_string(entering));
        }

        move(entering, dir * step, w);
        const Eigen::Index leaving = basis_[static_cast<std::size_t>(leave)];
        const double rate = -dir * w(leave);
        if (rate < 0.0) {
            x_(leaving) = lower(leaving);
            status_[static_cast<std::size_t>(leaving)] = Status::at_lower;
        } else {
            x_(leaving) = upper(leaving);
            status_[static_cast<std::size_t>(leaving)] = Status::at_upper;
        }
        status_[static_cast<std::size_t>(entering)] = Status::basic;
        basis_[static_cast<std::size_t>(leave)] = entering;

        // Product-form update of the explicit inverse.
        const double pivot = w(leave);
        binv_.row(leave) /= pivot;
        for (Eigen::Index i = 0; i < rows_; ++i) {
            if (i != leave && w(i) != 0.0) {
                binv_.row(i) -= w(i) * binv_.row(leave);
            }
        }
        return step;
    }

    void move(Eigen::Index entering, double delta, const Eigen::VectorXd& w)
    {
        x_(entering) += delta;
        for (Eigen::Index i = 0; i < rows_; ++i) {
            x_(basis_[static_cast<std::size_t>(i)]) -= delta * w(i);
        }
    }

    LpSolution finish(std::size_t iterations)
    {
        refactor();
        compute_duals();
        for (Eigen::Index j = 0; j < total(); ++j) {
            const double slack = 10.0 * opt_.feasibility_tol * std::max(1.0, std::abs(x_(j)));
            if (x_(j) < lower(j) - slack || x_(j) > upper(j) + slack) {
                throw SolverError("simplex finished with variable " + std::to_string(j) + " out of bounds");
            }
        }
        LpSolution sol;
        sol.x = x_.head(cols_);
        for (Eigen::Index j = 0; j < cols_; ++j) {
            sol.x(j) = std::clamp(sol.x(j), lower(j), upper(j));
        }
        sol.row_activity = lp_.a * sol.x;
        sol.duals = y_;
        sol.reduced_costs.resize(cols_);
        for (Eigen::Index j = 0; j < cols_; ++j) {
            sol.reduced_costs(j) = cost(j) - dual_dot(j);
        }
        sol.objective = lp_.cost.dot(sol.x);
        sol.iterations = iterations;
        return sol;
    }

    const LpProblem& lp_;
    SimplexOptions opt_;
    Eigen::Index rows_ = 0;
    Eigen::Index cols_ = 0;
    Eigen::VectorXd x_;
    Eigen::VectorXd y_;
    Eigen::MatrixXd binv_;
    std::vector<Status> status_;
    std::vector<Eigen::Index> basis_;
    int direction_ = 0;
};

inline LpSolution solve_lp(const LpProblem& problem, SimplexOptions options = {})
{
    return BoundedSimplex(problem, options).solve();
}

} // namespace dcovsel
