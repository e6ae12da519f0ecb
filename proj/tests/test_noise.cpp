#include <cmath>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "mfgcip/forward.hpp"
#include "mfgcip/noise.hpp"

using namespace mfgcip;

namespace {

bool same_values(const Trace& a, const Trace& b) {
    if (a.values().size() != b.values().size()) return false;
    for (std::size_t k = 0; k < a.values().size(); ++k)
        if (a.values()[k] != b.values()[k]) return false;
    return true;
}

const ProblemData& small_data() {
    static const SyntheticDataset ds = [] {
        ForwardConfig cfg;
        cfg.fine = SpaceTimeGrid::unit(20, 20);
        return generate_dataset(letter_phantom(LetterShape::A, DomainSpec{}, 2.0), DeltaGaussianKernel{0.2},
                                SpaceTimeGrid::unit(20, 10), cfg);
    }();
    return ds.data;
}

/// Natural spline first derivatives at the knots from a dense solve.
std::vector<double> dense_spline_slopes(const std::vector<double>& t, const std::vector<double>& y) {
    const int n = static_cast<int>(t.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    A(0, 0) = 1.0;
    A(n - 1, n - 1) = 1.0;
    for (int k = 1; k + 1 < n; ++k) {
        const double h0 = t[k] - t[k - 1], h1 = t[k + 1] - t[k];
        A(k, k - 1) = h0;
        A(k, k) = 2.0 * (h0 + h1);
        A(k, k + 1) = h1;
        r[k] = 6.0 * ((y[k + 1] - y[k]) / h1 - (y[k] - y[k - 1]) / h0);
    }
    const Eigen::VectorXd M = A.fullPivLu().solve(r);
    std::vector<double> s(t.size());
    for (int k = 0; k < n; ++k) {
        const int seg = k + 1 < n ? k : k - 1;
        const double h = t[seg + 1] - t[seg];
        const double secant = (y[seg + 1] - y[seg]) / h;
        s[k] = k + 1 < n ? secant - h * (2.0 * M[seg] + M[seg + 1]) / 6.0
                         : secant + h * (M[seg] + 2.0 * M[seg + 1]) / 6.0;
    }
    return s;
}

} // namespace

TEST(NoiseDraws, RangeAndDeterminism) {
    const auto a = noise_draws(42, NoiseStream::G0, 5000);
    const auto b = noise_draws(42, NoiseStream::G0, 5000);
    EXPECT_EQ(a, b);
    double mean = 0.0;
    for (double x : a) {
        EXPECT_GE(x, -1.0);
        EXPECT_LT(x, 1.0);
        mean += x / static_cast<double>(a.size());
    }
    EXPECT_LT(std::abs(mean), 0.05);
}

TEST(NoiseDraws, SeedsAndStreamsAreIndependent) {
    const auto a = noise_draws(42, NoiseStream::G0, 64);
    EXPECT_NE(a, noise_draws(43, NoiseStream::G0, 64));
    EXPECT_NE(a, noise_draws(42, NoiseStream::P1, 64));
    // a prefix does not depend on how many draws are requested
    const auto longer = noise_draws(42, NoiseStream::G0, 128);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), longer.begin()));
}

TEST(Perturb, RelativeBoundAndSharedAcrossSpace) {
    const Trace& g0 = small_data().g0;
    const double delta = 0.05;
    const auto xi = noise_draws(7, NoiseStream::G0, static_cast<std::size_t>(g0.grid().nt + 1));
    const Trace noisy = perturb(g0, delta, xi);
    for (int n = 0; n <= g0.grid().nt; ++n) {
        const double ratio0 = noisy.at(0, n) / g0.at(0, n);
        for (std::size_t b = 0; b < g0.node_count(); ++b) {
            const double ratio = noisy.at(b, n) / g0.at(b, n);
            EXPECT_LE(std::abs(ratio - 1.0), delta + 1e-15);
            EXPECT_NEAR(ratio, ratio0, 1e-13);
        }
    }
}

TEST(Perturb, RejectsBadArguments) {
    const Trace& g0 = small_data().g0;
    EXPECT_THROW(perturb(g0, 1.0, std::vector<double>(11, 0.0)), Error);
    EXPECT_THROW(perturb(g0, 0.1, std::vector<double>(3, 0.0)), Error);
    NoiseSpec s;
    s.delta = -0.1;
    EXPECT_THROW(s.validate(), Error);
}

TEST(Spline, InterpolatesKnots) {
    std::vector<double> t, y;
    for (int k = 0; k <= 10; ++k) {
        t.push_back(0.1 * k);
        y.push_back(std::sin(3.0 * t.back()) + t.back());
    }
    const NaturalCubicSpline sp(t, y);
    for (std::size_t k = 0; k < t.size(); ++k) EXPECT_NEAR(sp.value(t[k]), y[k], 1e-14);
}

TEST(Spline, LinearDataIsExact) {
    std::vector<double> t, y;
    for (int k = 0; k <= 10; ++k) {
        t.push_back(0.1 * k);
        y.push_back(2.0 - 3.0 * t.back());
    }
    for (double d : spline_differentiate(t, y, 1)) EXPECT_NEAR(d, -3.0, 1e-12);
    for (double d : spline_differentiate(t, y, 2)) EXPECT_NEAR(d, 0.0, 1e-10);
}

TEST(Spline, MatchesDenseSolve) {
    std::vector<double> t{0.0, 0.1, 0.25, 0.3, 0.55, 0.7, 1.0}, y;
    for (double s : t) y.push_back(std::exp(s) * std::cos(2.0 * s));
    const auto fast = spline_differentiate(t, y, 1);
    const auto ref = dense_spline_slopes(t, y);
    for (std::size_t k = 0; k < t.size(); ++k) EXPECT_NEAR(fast[k], ref[k], 1e-12);
}

TEST(Spline, SecondDerivativeContinuousAndNatural) {
    std::vector<double> t, y;
    for (int k = 0; k <= 12; ++k) {
        t.push_back(k / 12.0);
        y.push_back(std::cos(5.0 * t.back()));
    }
    const NaturalCubicSpline sp(t, y);
    EXPECT_NEAR(sp.derivative(0.0, 2), 0.0, 1e-12);
    EXPECT_NEAR(sp.derivative(1.0, 2), 0.0, 1e-12);
    for (std::size_t k = 1; k + 1 < t.size(); ++k) {
        EXPECT_NEAR(sp.derivative(t[k] - 1e-9, 2), sp.derivative(t[k] + 1e-9, 2), 1e-6);
        EXPECT_NEAR(sp.derivative(t[k] - 1e-9, 1), sp.derivative(t[k] + 1e-9, 1), 1e-6);
    }
}

TEST(Spline, InteriorDerivativeConverges) {
    std::vector<double> err;
    for (int n : {10, 20, 40}) {
        std::vector<double> t, y;
        for (int k = 0; k <= n; ++k) {
            t.push_back(static_cast<double>(k) / n);
            y.push_back(std::sin(2.0 * t.back()));
        }
        const auto d = spline_differentiate(t, y, 1);
        err.push_back(std::abs(d[static_cast<std::size_t>(n / 2)] - 2.0 * std::cos(1.0)));
    }
    EXPECT_GT(err[0] / err[1], 3.0);
    EXPECT_GT(err[1] / err[2], 3.0);
}

TEST(Spline, RejectsTooFewOrUnsortedNodes) {
    EXPECT_THROW(NaturalCubicSpline({0.0, 0.5, 1.0}, {1.0, 2.0, 3.0}), Error);
    EXPECT_THROW(NaturalCubicSpline({0.0, 0.5, 0.4, 1.0}, {1.0, 2.0, 3.0, 4.0}), Error);
    EXPECT_THROW(spline_differentiate(std::vector<double>{0, 1, 2, 3}, std::vector<double>{0, 1, 2, 3}, 3), Error);
}

TEST(ApplyNoise, ZeroLevelIsBitIdentical) {
    const ProblemData& clean = small_data();
    NoiseSpec s;
    s.delta = 0.0;
    s.seed = 99;
    const ProblemData d = apply_noise(clean, s);
    for (int c = 0; c < 4; ++c) {
        EXPECT_TRUE(same_values(d.dirichlet[static_cast<std::size_t>(c)], clean.dirichlet[static_cast<std::size_t>(c)]));
        EXPECT_TRUE(same_values(d.neumann[static_cast<std::size_t>(c)], clean.neumann[static_cast<std::size_t>(c)]));
    }
    EXPECT_TRUE(same_values(d.g0, clean.g0));
    EXPECT_TRUE(same_values(d.p1, clean.p1));
}

TEST(ApplyNoise, SeededAndBounded) {
    const ProblemData& clean = small_data();
    NoiseSpec s;
    s.delta = 0.03;
    s.seed = 5;
    const ProblemData a = apply_noise(clean, s);
    const ProblemData b = apply_noise(clean, s);
    for (int c = 0; c < 4; ++c)
        EXPECT_TRUE(same_values(a.dirichlet[static_cast<std::size_t>(c)], b.dirichlet[static_cast<std::size_t>(c)]));
    s.seed = 6;
    const ProblemData other = apply_noise(clean, s);
    EXPECT_FALSE(same_values(a.g0, other.g0));
    for (std::size_t k = 0; k < clean.p0.values().size(); ++k)
        EXPECT_LE(std::abs(a.p0.values()[k] - clean.p0.values()[k]), 0.03 * std::abs(clean.p0.values()[k]) + 1e-15);
    // interior inputs are untouched
    EXPECT_EQ((a.u0 - clean.u0).max_abs(), 0.0);
    EXPECT_EQ((a.f - clean.f).max_abs(), 0.0);
}

TEST(ApplyNoise, DerivativesRebuiltFromSplines) {
    const ProblemData& clean = small_data();
    NoiseSpec s;
    s.delta = 0.05;
    s.seed = 1;
    const ProblemData d = apply_noise(clean, s);
    EXPECT_TRUE(same_values(d.dirichlet[kV], spline_differentiate(d.g0, 1)));
    EXPECT_TRUE(same_values(d.neumann[kQ], spline_differentiate(d.p1, 2)));
}
