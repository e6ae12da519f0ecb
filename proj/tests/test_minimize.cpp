#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "mfgcip/minimize.hpp"
#include "support.hpp"

using namespace mfgcip;
using mfgcip::testing::random_vector;
using mfgcip::testing::small_dataset;

namespace {

/// 0.5 x^T A x - b^T x with A = diag(1, 2, ..., n).
struct DiagonalQuadratic {
    std::size_t n;
    double operator()(const std::vector<double>& x, std::vector<double>& g) const {
        g.resize(n);
        double J = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = static_cast<double>(i + 1);
            J += 0.5 * a * x[i] * x[i] - x[i];
            g[i] = a * x[i] - 1.0;
        }
        return J;
    }
    double minimiser(std::size_t i) const { return 1.0 / static_cast<double>(i + 1); }
};

double rosenbrock(const std::vector<double>& x, std::vector<double>& g) {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    g = {-2.0 * a - 400.0 * x[0] * b, 200.0 * b};
    return a * a + 100.0 * b * b;
}

} // namespace

TEST(MinimizerConfig, Validation) {
    MinimizerConfig c;
    EXPECT_NO_THROW(c.validate());
    c.backtracking = false;
    EXPECT_THROW(c.validate(), Error);
    c.step = 0.1;
    EXPECT_NO_THROW(c.validate());
    c.gradient_tolerance = 0.0;
    EXPECT_THROW(c.validate(), Error);
    EXPECT_EQ(parse_descent_method(to_string(DescentMethod::GradientDescent)), DescentMethod::GradientDescent);
    EXPECT_EQ(parse_descent_method("lbfgs"), DescentMethod::LBFGS);
    EXPECT_THROW(parse_descent_method("newton"), Error);
}

TEST(Descend, GradientDescentOnQuadratic) {
    const DiagonalQuadratic f{6};
    MinimizerConfig c;
    c.method = DescentMethod::GradientDescent;
    // an Armijo test on values cannot resolve |g| much below sqrt(eps |J|)
    c.gradient_tolerance = 1e-6;
    const DescentResult r = descend(f, std::vector<double>(6, 0.0), c);
    EXPECT_EQ(r.trace.reason, StopReason::GradientTolerance);
    EXPECT_TRUE(r.trace.monotone());
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(r.x[i], f.minimiser(i), 1e-6);
}

TEST(Descend, FixedStepWithoutBacktracking) {
    const DiagonalQuadratic f{4};
    MinimizerConfig c;
    c.method = DescentMethod::GradientDescent;
    c.backtracking = false;
    c.step = 0.2;  // below 2 / max eigenvalue
    c.gradient_tolerance = 1e-10;
    const DescentResult r = descend(f, std::vector<double>(4, 0.0), c);
    EXPECT_EQ(r.trace.reason, StopReason::GradientTolerance);
    for (const auto& rec : r.trace.records)
        if (rec.iteration > 0) EXPECT_DOUBLE_EQ(rec.step, 0.2);
}

TEST(Descend, TooLargeFixedStepIsNotMonotone) {
    const DiagonalQuadratic f{4};
    MinimizerConfig c;
    c.method = DescentMethod::GradientDescent;
    c.backtracking = false;
    c.step = 0.75;  // above 2 / 4
    c.max_iterations = 30;
    const DescentResult r = descend(f, std::vector<double>(4, 0.0), c);
    EXPECT_FALSE(r.trace.monotone());
    EXPECT_EQ(r.trace.reason, StopReason::MaxIterations);
}

TEST(Descend, LbfgsSolvesRosenbrock) {
    MinimizerConfig c;
    c.gradient_tolerance = 1e-8;
    const DescentResult r = descend(rosenbrock, {-1.2, 1.0}, c);
    EXPECT_EQ(r.trace.reason, StopReason::GradientTolerance);
    EXPECT_TRUE(r.trace.monotone());
    EXPECT_NEAR(r.x[0], 1.0, 1e-6);
    EXPECT_NEAR(r.x[1], 1.0, 1e-6);
    EXPECT_LT(r.trace.iterations(), 100);
}

TEST(Descend, ExactPreconditionerConvergesInOneStep) {
    const DiagonalQuadratic f{5};
    const Preconditioner inverse = [](const std::vector<double>& in, std::vector<double>& out) {
        out.resize(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] / static_cast<double>(i + 1);
    };
    MinimizerConfig c;
    c.gradient_tolerance = 1e-12;
    const DescentResult r = descend(f, std::vector<double>(5, 0.0), c, {}, inverse);
    EXPECT_EQ(r.trace.iterations(), 1);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(r.x[i], f.minimiser(i), 1e-14);
}

TEST(Descend, ZeroIterationBudgetRecordsStart) {
    MinimizerConfig c;
    c.max_iterations = 0;
    const DescentResult r = descend(DiagonalQuadratic{3}, std::vector<double>(3, 0.0), c);
    ASSERT_EQ(r.trace.records.size(), 1u);
    EXPECT_EQ(r.trace.reason, StopReason::MaxIterations);
    EXPECT_DOUBLE_EQ(r.trace.final_value(), 0.0);
}

TEST(Descend, WrongGradientEndsInStepUnderflow) {
    const ValueAndGradient bad = [](const std::vector<double>& x, std::vector<double>& g) {
        g = {-2.0 * x[0] - 1.0};  // sign flipped
        return x[0] * x[0] + x[0];
    };
    MinimizerConfig c;
    c.method = DescentMethod::GradientDescent;
    const DescentResult r = descend(bad, {0.0}, c);
    EXPECT_EQ(r.trace.reason, StopReason::StepUnderflow);
    EXPECT_FALSE(r.trace.records.back().accepted);
    EXPECT_EQ(r.x[0], 0.0);
}

TEST(Descend, NonFiniteInputs) {
    MinimizerConfig c;
    EXPECT_THROW(descend(DiagonalQuadratic{2}, {std::numeric_limits<double>::infinity(), 0.0}, c), Error);
    const ValueAndGradient nan = [](const std::vector<double>&, std::vector<double>& g) {
        g = {std::numeric_limits<double>::quiet_NaN()};
        return 1.0;
    };
    try {
        descend(nan, {0.0}, c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFinite);
    }
}

TEST(Descend, BallMonitorCountsViolations) {
    MinimizerConfig c;
    c.ball_radius = 0.5;
    c.gradient_tolerance = 1e-10;
    const NormMonitor norm = [](const std::vector<double>& x) { return std::sqrt(detail::vdot(x, x)); };
    const DescentResult r = descend(DiagonalQuadratic{2}, {0.0, 0.0}, c, norm);
    // the minimiser (1, 1/2) lies outside the ball, and the monitor never projects
    EXPECT_GT(r.trace.ball_violations, 0);
    EXPECT_NEAR(r.x[0], 1.0, 1e-9);
}

TEST(Descend, TraceCsvHasOneRowPerRecord) {
    const DescentResult r = descend(DiagonalQuadratic{3}, std::vector<double>(3, 0.0), MinimizerConfig{});
    const std::string csv = r.trace.csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "iteration,J,grad_norm,step,accepted,norm");
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), r.trace.records.size() + 1);
}

TEST(Preconditioner, SymmetricPositiveDefinite) {
    const Objective J(small_dataset().data, CarlemanConfig{});
    const PrincipalPreconditioner M(J);
    const auto a = random_vector(J.dimension(), 1), b = random_vector(J.dimension(), 2);
    std::vector<double> Ma, Mb;
    M.apply(a, Ma);
    M.apply(b, Mb);
    const double ab = detail::vdot(Ma, b), ba = detail::vdot(a, Mb);
    EXPECT_NEAR(ab, ba, 1e-9 * std::abs(ab));
    EXPECT_GT(detail::vdot(a, Ma), 0.0);
    EXPECT_GT(detail::vdot(b, Mb), 0.0);
}

TEST(MinimizeObjective, ReachesToleranceMonotonically) {
    const SyntheticDataset& ds = small_dataset();
    const Objective J(ds.data, CarlemanConfig{});
    const DescentResult r = minimize_objective(J, MinimizerConfig{});
    EXPECT_EQ(r.trace.reason, StopReason::GradientTolerance);
    EXPECT_TRUE(r.trace.monotone());
    EXPECT_LT(r.trace.iterations(), 500);
    const StateVector U = J.state(r.x);
    EXPECT_LT(J.constraints().boundary_violation(U, ds.data), 1e-9);
    const SpatialField k = reconstruct_k(U.v(), ds.data);
    EXPECT_NEAR(k.max(), 2.0, 0.4);
}

TEST(MinimizeObjective, PlainGradientDescentDecreases) {
    const Objective J(small_dataset().data, CarlemanConfig{});
    MinimizerConfig c;
    c.method = DescentMethod::GradientDescent;
    c.max_iterations = 50;
    const DescentResult r = minimize_objective(J, c);
    EXPECT_TRUE(r.trace.monotone());
    EXPECT_LT(r.trace.final_value(), 0.5 * r.trace.records.front().value);
}
