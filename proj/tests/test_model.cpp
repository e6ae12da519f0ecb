#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mfgcip/model.hpp"

using namespace mfgcip;

namespace {

SpaceTimeGrid baseline_grid() { return SpaceTimeGrid::unit(20, 10); }

/// Composite Simpson on [1,2] with 2000 panels; independent of the grid code.
double simpson_gauss(double x2, double sigma) {
    const int n = 2000;
    const double h = 1.0 / n;
    double acc = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double y = 1.0 + k * h;
        const double f = std::exp(-(x2 - y) * (x2 - y) / (sigma * sigma));
        acc += (k == 0 || k == n ? 1.0 : (k % 2 ? 4.0 : 2.0)) * f;
    }
    return acc * h / 3.0;
}

Phantom box_phantom(double x1_lo, double contrast, int passes) {
    Phantom p;
    p.name = "box";
    p.contrast = contrast;
    p.smoothing_passes = passes;
    p.inside = [x1_lo](double x1, double x2) { return x1 > x1_lo && x1 < 1.9 && x2 > 1.1 && x2 < 1.9; };
    return p;
}

} // namespace

TEST(Domain, Validation) {
    DomainSpec d;
    EXPECT_NO_THROW(d.validate());
    d.gradient_floor = 0.0;
    EXPECT_THROW(d.validate(), Error);
    DomainSpec e;
    e.b = 0.5;
    EXPECT_THROW(e.validate(), Error);
}

TEST(Kernel, ZeroDensityGivesZero) {
    const auto g = baseline_grid();
    for (const Kernel& k : {Kernel{DeltaGaussianKernel{0.2}}, make_kernel("heaviside", 0.2), Kernel{ZeroKernel{}}})
        EXPECT_EQ(KernelOperator(k, g).apply(ScalarField(g)).max_abs(), 0.0);
}

TEST(Kernel, UnknownVariant) {
    try {
        make_kernel("cauchy", 0.2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownKernel);
    }
}

TEST(Kernel, HeavisideUnitFactor) {
    const auto g = baseline_grid();
    const auto r = KernelOperator(make_kernel("heaviside", 0.0), g).apply(SpatialField(g, 1.0));
    for (int j = 0; j <= g.n2; ++j)
        for (int i = 0; i <= g.n1; ++i) EXPECT_NEAR(r(i, j), 2.0 - g.x1(i), 1e-12);
}

TEST(Kernel, DeltaGaussianMatchesRefinedQuadrature) {
    const double ref = simpson_gauss(1.5, 0.2);
    std::vector<double> err;
    for (int n : {20, 40}) {
        const auto g = SpaceTimeGrid::unit(n, 2);
        const auto r = KernelOperator(DeltaGaussianKernel{0.2}, g).apply(SpatialField(g, 1.0));
        err.push_back(std::abs(r(n / 2, n / 2) - ref));
    }
    EXPECT_LT(err[0], 2e-3);
    EXPECT_NEAR(err[0] / err[1], 4.0, 0.5);
}

TEST(Kernel, DeltaGaussianCollapsesX1) {
    const auto g = baseline_grid();
    const KernelOperator K(DeltaGaussianKernel{0.2}, g);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    ScalarField m(g);
    for (double& v : m.values()) v = U(rng);
    const auto base = K.apply(m);
    ScalarField bumped = m;
    for (int n = 0; n <= g.nt; ++n)
        for (int j = 0; j <= g.n2; ++j) bumped(7, j, n) += 3.0;
    const auto r = K.apply(bumped);
    for (int n = 0; n <= g.nt; ++n)
        for (int j = 0; j <= g.n2; ++j)
            for (int i = 0; i <= g.n1; ++i)
                if (i != 7) EXPECT_EQ(r(i, j, n), base(i, j, n));
}

TEST(Kernel, LinearBoundedAndTransposed) {
    const auto g = SpaceTimeGrid::unit(8, 4);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (const Kernel& k : {Kernel{DeltaGaussianKernel{0.2}}, make_kernel("heaviside", 0.0)}) {
        const KernelOperator K(k, g);
        ScalarField a(g), b(g);
        for (double& v : a.values()) v = U(rng);
        for (double& v : b.values()) v = U(rng);
        const auto lhs = K.apply(2.0 * a + b);
        const auto rhs = 2.0 * K.apply(a) + K.apply(b);
        EXPECT_LT((lhs - rhs).max_abs(), 1e-12);
        // |Y| <= 1 and the integration set has measure <= 1 on the unit square
        EXPECT_LE(K.apply(a).max_abs(), a.max_abs() * (1.0 + 1e-12));
        EXPECT_NEAR(dot(K.apply(a), b), dot(a, K.apply_transpose(b)), 1e-12);
    }
}

TEST(Phantom, EmptyMaskIsBackground) {
    const auto k = rasterize_phantom(empty_phantom(2.0), baseline_grid());
    EXPECT_EQ(k.min(), 1.0);
    EXPECT_EQ(k.max(), 1.0);
}

TEST(Phantom, UnsmoothedRangeIsOneToContrast) {
    for (LetterShape s : {LetterShape::A, LetterShape::Omega, LetterShape::SZ}) {
        const auto k = rasterize_phantom(letter_phantom(s, DomainSpec{}, 2.0, 0), baseline_grid());
        EXPECT_EQ(k.max(), 2.0) << letter_name(s);
        EXPECT_EQ(k.min(), 1.0) << letter_name(s);
    }
}

TEST(Phantom, SmoothedValuesStayInRange) {
    for (int passes : {1, 2, 4})
        for (LetterShape s : {LetterShape::A, LetterShape::Omega, LetterShape::SZ}) {
            const auto k = rasterize_phantom(letter_phantom(s, DomainSpec{}, 4.0, passes), SpaceTimeGrid::unit(40, 2));
            EXPECT_GE(k.min(), 1.0);
            EXPECT_LE(k.max(), 4.0);
        }
}

TEST(Phantom, EdgeWidth) {
    const auto g = baseline_grid();
    const int j = 10;
    const auto sharp = rasterize_phantom(box_phantom(1.5, 2.0, 0), g);
    EXPECT_EQ(sharp(10, j), 1.0);
    EXPECT_EQ(sharp(11, j), 2.0);

    const auto soft = rasterize_phantom(box_phantom(1.5, 2.0, 2), g);
    int between = 0;
    for (int i = 6; i <= 14; ++i) {
        EXPECT_LE(soft(i - 1, j), soft(i, j) + 1e-15);
        if (soft(i, j) > 1.0 && soft(i, j) < 2.0) ++between;
    }
    EXPECT_GE(between, 2);
}

TEST(Phantom, MaskTouchingBoundaryIsRejected) {
    Phantom p;
    p.inside = [](double x1, double) { return x1 > 1.5; };
    try {
        rasterize_phantom(p, baseline_grid());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MaskTouchesBoundary);
    }
}

TEST(Phantom, BitmapTextRoundTrip) {
    const Bitmap bm = letter_bitmap(LetterShape::Omega);
    const Bitmap back = Bitmap::from_text(bm.to_text());
    ASSERT_EQ(back.rows(), bm.rows());
    EXPECT_EQ(back.to_text(), bm.to_text());
    EXPECT_GT(bm.count(), 100u);
    EXPECT_THROW(Bitmap::from_text("0102\n"), Error);
    EXPECT_THROW(Bitmap::from_text("01\n011\n"), Error);
}

TEST(Phantom, LetterNames) {
    EXPECT_EQ(parse_letter("omega"), LetterShape::Omega);
    EXPECT_EQ(parse_letter("SZ"), LetterShape::SZ);
    EXPECT_THROW(parse_letter("B"), Error);
}

TEST(AnalyticValue, Examples) {
    const auto u = AnalyticValueFunction::product_quadratic();
    EXPECT_DOUBLE_EQ(u.u(1.0, 1.0, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(u.ut(2.0, 2.0, 0.3), 16.0);
    EXPECT_DOUBLE_EQ(u.grad_sq(1.0, 1.0, 0.5), 18.0);
    const auto g = baseline_grid();
    const auto F = analytic_value_fields(u, g);
    EXPECT_DOUBLE_EQ(F.u(10, 10, 5), 1.5 * 1.5 * 1.5 * 1.5 * 1.5);
    EXPECT_EQ(F.utt.max_abs(), 0.0);
    // |grad u(., T/2)|^2 >= 18 on the closed square
    double lo = 1e300;
    for (int j = 0; j <= g.n2; ++j)
        for (int i = 0; i <= g.n1; ++i) lo = std::min(lo, u.grad_sq(g.x1(i), g.x2(j), 0.5));
    EXPECT_DOUBLE_EQ(lo, 18.0);
}
