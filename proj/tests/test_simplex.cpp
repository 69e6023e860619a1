#include <dcovsel/simplex.hpp>

#include <gtest/gtest.h>

#include <limits>

using namespace dcovsel;

namespace {
constexpr double inf = std::numeric_limits<double>::infinity();
}

TEST(BoundedSimplex, ClassicTwoVariableMaximization)
{
    // max 3x + 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18, x, y >= 0  -> (2, 6), value 36
    LpProblem lp;
    lp.a.resize(3, 2);
    lp.a << 1, 0, 0, 2, 3, 2;
    lp.cost = Eigen::Vector2d(-3, -5);
    lp.lower = Eigen::Vector2d::Zero();
    lp.upper = Eigen::Vector2d::Constant(inf);
    lp.row_lower = Eigen::Vector3d::Constant(-inf);
    lp.row_upper = Eigen::Vector3d(4, 12, 18);
    const auto sol = solve_lp(lp);
    EXPECT_NEAR(sol.x(0), 2.0, 1e-10);
    EXPECT_NEAR(sol.x(1), 6.0, 1e-10);
    EXPECT_NEAR(sol.objective, -36.0, 1e-10);
    // Shadow prices of the binding rows (x <= 4 is slack).
    EXPECT_NEAR(sol.duals(0), 0.0, 1e-10);
    EXPECT_NEAR(sol.duals(1), -1.5, 1e-10);
    EXPECT_NEAR(sol.duals(2), -1.0, 1e-10);
}

TEST(BoundedSimplex, UpperBoundsAndFreeVariables)
{
    // min -x - y + z  s.t. x + y + z == 0 ... with x in [0, 1], y in [0, 2], z free:
    // z = -(x + y), objective -2(x + y) -> x = 1, y = 2, value -6
    LpProblem lp;
    lp.a.resize(1, 3);
    lp.a << 1, 1, 1;
    lp.cost = Eigen::Vector3d(-1, -1, 1);
    lp.lower = Eigen::Vector3d(0, 0, -inf);
    lp.upper = Eigen::Vector3d(1, 2, inf);
    lp.row_lower = Eigen::VectorXd::Zero(1);
    lp.row_upper = Eigen::VectorXd::Zero(1);
    const auto sol = solve_lp(lp);
    EXPECT_NEAR(sol.objective, -6.0, 1e-10);
    EXPECT_NEAR(sol.x(2), -3.0, 1e-10);
}

TEST(BoundedSimplex, RangedRowsAndBoundFlips)
{
    // min -sum x_i, x_i in [0, 1], 0.5 <= x_0 - x_1 <= 0.75, sum rows ... -> x0 = 1, x1 = 0.25, x2 = 1
    LpProblem lp;
    lp.a.resize(1, 3);
    lp.a << 1, -1, 0;
    lp.cost = -Eigen::Vector3d::Ones();
    lp.lower = Eigen::Vector3d::Zero();
    lp.upper = Eigen::Vector3d::Ones();
    lp.row_lower = Eigen::VectorXd::Constant(1, -1.0);
    lp.row_upper = Eigen::VectorXd::Constant(1, 0.75);
    const auto sol = solve_lp(lp);
    EXPECT_NEAR(sol.objective, -3.0, 1e-10);
    EXPECT_LE(sol.row_activity(0), 0.75 + 1e-12);
}

TEST(BoundedSimplex, DetectsUnboundedness)
{
    LpProblem lp;
    lp.a.resize(1, 2);
    lp.a << 1, -1;
    lp.cost = Eigen::Vector2d(-1, 0);
    lp.lower = Eigen::Vector2d::Zero();
    lp.upper = Eigen::Vector2d::Constant(inf);
    lp.row_lower = Eigen::VectorXd::Constant(1, -inf);
    lp.row_upper = Eigen::VectorXd::Constant(1, 1.0);
    EXPECT_THROW(solve_lp(lp), SolverError);
}

TEST(BoundedSimplex, RequiresFeasibleStart)
{
    LpProblem lp;
    lp.a = Eigen::MatrixXd::Ones(1, 1);
    lp.cost = Eigen::VectorXd::Ones(1);
    lp.lower = Eigen::VectorXd::Zero(1);
    lp.upper = Eigen::VectorXd::Ones(1);
    lp.row_lower = Eigen::VectorXd::Constant(1, 0.5);
    lp.row_upper = Eigen::VectorXd::Constant(1, 1.0);
    EXPECT_THROW(solve_lp(lp), SolverError);
}

TEST(BoundedSimplex, DegenerateVertexTerminates)
{
    // Many redundant constraints through the optimum (a highly degenerate vertex).
    const int k = 30;
    LpProblem lp;
    lp.a.resize(k, 2);
    for (int i = 0; i < k; ++i) {
        const double t = static_cast<double>(i) / k;
        lp.a(i, 0) = 1.0 + t;
        lp.a(i, 1) = 1.0 - t;
    }
    lp.cost = Eigen::Vector2d(-1, -1);
    lp.lower = Eigen::Vector2d::Zero();
    lp.upper = Eigen::Vector2d::Constant(inf);
    lp.row_lower = Eigen::VectorXd::Constant(k, -inf);
    lp.row_upper = lp.a * Eigen::Vector2d(1, 1);
    const auto sol = solve_lp(lp);
    EXPECT_NEAR(sol.objective, -2.0, 1e-9);
}
