#pragma once

// Synthetic data generation. The value function is prescribed in closed form,
// the Fokker-Planck equation is solved for the density on a fine grid, the
// source f is backed out of the HJB equation and every observation is
// injected onto the coarse inversion grid.

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "mfgcip/error.hpp"
#include "mfgcip/grid.hpp"
#include "mfgcip/model.hpp"
#include "mfgcip/problem.hpp"
#include "mfgcip/residuals.hpp"

namespace mfgcip {

enum class TimeScheme { BackwardEuler, BDF2 };
enum class LinearSolverKind { SparseLU, BiCGSTAB };
/// Discretisation of div(k m grad u): fluxes formed at nodes and central
/// differenced, or face-averaged fluxes (telescoping sums).
enum class AdvectionForm { NonConservative, Conservative };

struct ForwardConfig {
    SpaceTimeGrid fine = SpaceTimeGrid::unit(160, 320);
    /// Dirichlet datum on the lateral boundary.
    std::function<double(double, double, double)> boundary = [](double x1, double x2, double t) {
        return 1.0 + x1 * x2 * t;
    };
    /// Initial density.
    std::function<double(double, double)> initial = [](double, double) { return 1.0; };
    /// Optional forcing added to the right-hand side (manufactured solutions).
    std::function<double(double, double, double)> source;
    double positivity_floor = 1e-6;
    TimeScheme scheme = TimeScheme::BDF2;
    LinearSolverKind solver = LinearSolverKind::SparseLU;
    AdvectionForm advection = AdvectionForm::NonConservative;
    double iterative_tolerance = 1e-12;

    void validate() const {
        fine.validate();
        require(positivity_floor > 0.0, ErrorCode::InvalidConfig, "positivity floor must be positive");
        require(static_cast<bool>(boundary) && static_cast<bool>(initial), ErrorCode::InvalidConfig,
                "boundary and initial data are required");
        for (int j = 0; j <= fine.n2; ++j)
            for (int i = 0; i <= fine.n1; ++i) {
                if (!fine.is_boundary(i, j)) continue;
                const double x1 = fine.x1(i), x2 = fine.x2(j);
                require(std::abs(boundary(x1, x2, 0.0) - initial(x1, x2)) <= 1e-12, ErrorCode::InvalidConfig,
                        "boundary datum at t=0 differs from the initial density at node (" + std::to_string(i) +
                            "," + std::to_string(j) + ")");
            }
    }
};

/// Implicit finite-difference solve of
///     m_t - lap m - div(k m grad u) = source,   m = boundary on the lateral
/// boundary, m(.,0) = initial. The advection term is discretised in the
/// non-conservative nodal form: the flux k m grad u is formed at nodes and
/// central-differenced.
inline ScalarField solve_fokker_planck(const SpatialField& k, const AnalyticValueFunction& u,
                                       const ForwardConfig& cfg) {
    cfg.validate();
    const SpaceTimeGrid& g = cfg.fine;
    require(k.grid() == g, ErrorCode::InvalidArgument, "k must live on the forward grid");
    const int N1 = g.n1 + 1;
    const int S = static_cast<int>(g.spatial_size());
    const double h1 = g.h1(), h2 = g.h2(), ht = g.ht();
    const double i11 = 1.0 / (h1 * h1), i22 = 1.0 / (h2 * h2);
    const double c1 = 1.0 / (2.0 * h1), c2 = 1.0 / (2.0 * h2);

    ScalarField m(g);
    for (int j = 0; j <= g.n2; ++j)
        for (int i = 0; i <= g.n1; ++i) m(i, j, 0) = cfg.initial(g.x1(i), g.x2(j));

    using SpMat = Eigen::SparseMatrix<double>;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(S) * 5);
    SpMat A(S, S);
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>> it;
    bool analysed = false;
    Eigen::VectorXd rhs(S), sol(S);

    std::vector<double> a1(static_cast<std::size_t>(S)), a2(static_cast<std::size_t>(S));
    for (int n = 1; n <= g.nt; ++n) {
        const double t = g.t(n);
        const bool bdf2 = cfg.scheme == TimeScheme::BDF2 && n >= 2;
        const double c0 = bdf2 ? 1.5 / ht : 1.0 / ht;
        for (int j = 0; j <= g.n2; ++j)
            for (int i = 0; i <= g.n1; ++i) {
                const double x1 = g.x1(i), x2 = g.x2(j);
                const auto s = static_cast<std::size_t>(g.index(i, j));
                a1[s] = k(i, j) * u.ux1(x1, x2, t);
                a2[s] = k(i, j) * u.ux2(x1, x2, t);
            }
        trip.clear();
        for (int j = 0; j <= g.n2; ++j)
            for (int i = 0; i <= g.n1; ++i) {
                const int r = static_cast<int>(g.index(i, j));
                const double x1 = g.x1(i), x2 = g.x2(j);
                if (g.is_boundary(i, j)) {
                    trip.emplace_back(r, r, 1.0);
                    rhs[r] = cfg.boundary(x1, x2, t);
                    continue;
                }
                const auto q = static_cast<std::size_t>(r);
                if (cfg.advection == AdvectionForm::NonConservative) {
                    trip.emplace_back(r, r, c0 + 2.0 * i11 + 2.0 * i22);
                    trip.emplace_back(r, r - 1, -i11 + c1 * a1[q - 1]);
                    trip.emplace_back(r, r + 1, -i11 - c1 * a1[q + 1]);
                    trip.emplace_back(r, r - N1, -i22 + c2 * a2[q - N1]);
                    trip.emplace_back(r, r + N1, -i22 - c2 * a2[q + N1]);
                } else {
                    const double e = 0.5 * (a1[q] + a1[q + 1]), w = 0.5 * (a1[q] + a1[q - 1]);
                    const double nn = 0.5 * (a2[q] + a2[q + N1]), ss = 0.5 * (a2[q] + a2[q - N1]);
                    trip.emplace_back(r, r, c0 + 2.0 * i11 + 2.0 * i22 - c1 * (e - w) - c2 * (nn - ss));
                    trip.emplace_back(r, r - 1, -i11 + c1 * w);
                    trip.emplace_back(r, r + 1, -i11 - c1 * e);
                    trip.emplace_back(r, r - N1, -i22 + c2 * ss);
                    trip.emplace_back(r, r + N1, -i22 - c2 * nn);
                }
                double b = bdf2 ? (2.0 * m(i, j, n - 1) - 0.5 * m(i, j, n - 2)) / ht : m(i, j, n - 1) / ht;
                if (cfg.source) b += cfg.source(x1, x2, t);
                rhs[r] = b;
            }
        A.setFromTriplets(trip.begin(), trip.end());
        if (cfg.solver == LinearSolverKind::SparseLU) {
            if (!analysed) {
                lu.analyzePattern(A);
                analysed = true;
            }
            lu.factorize(A);
            require(lu.info() == Eigen::Success, ErrorCode::SolverFailure,
                    "sparse LU factorisation failed at time step " + std::to_string(n) + ": " +
                        lu.lastErrorMessage());
            sol = lu.solve(rhs);
        } else {
            it.setTolerance(cfg.iterative_tolerance);
            it.compute(A);
            Eigen::VectorXd guess(S);
            for (int s = 0; s < S; ++s) guess[s] = m.values()[static_cast<std::size_t>((n - 1) * S + s)];
            sol = it.solveWithGuess(rhs, guess);
            require(it.info() == Eigen::Success, ErrorCode::SolverFailure,
                    "BiCGSTAB did not converge at time step " + std::to_string(n) + " (error " +
                        std::to_string(it.error()) + ")");
        }
        for (int j = 0; j <= g.n2; ++j)
            for (int i = 0; i <= g.n1; ++i) {
                const double val = sol[static_cast<Eigen::Index>(g.index(i, j))];
                require(std::isfinite(val), ErrorCode::SolverFailure,
                        "non-finite density at node (" + std::to_string(i) + "," + std::to_string(j) + "," +
                            std::to_string(n) + ")");
                if (!(val >= cfg.positivity_floor))
                    throw Error(ErrorCode::PositivityViolation,
                                "m = " + std::to_string(val) + " below the positivity floor at node (" +
                                    std::to_string(i) + "," + std::to_string(j) + "," + std::to_string(n) + ")");
                m(i, j, n) = val;
            }
    }
    return m;
}

/// m_t - lap m - div(k m grad u) evaluated with the grid operators.
inline ScalarField fokker_planck_residual(const ScalarField& m, const SpatialField& k, const ScalarField& ux1,
                                          const ScalarField& ux2) {
    const ScalarField K = ScalarField::constant_in_time(k);
    const ScalarField km = K * m;
    return time_derivative(m, 1) - laplacian(m) - divergence(km * ux1, km * ux2);
}

/// u_t + lap u - k |grad u|^2 / 2 + K m + f m with every derivative of u
/// taken by finite differences on its nodal samples.
inline ScalarField hjb_residual(const ScalarField& u, const ScalarField& m, const SpatialField& k,
                                const ScalarField& f, const KernelOperator& kernel) {
    const ScalarField ux1 = diff(u, Axis::X1), ux2 = diff(u, Axis::X2);
    ScalarField r = time_derivative(u, 1) + laplacian(u);
    r -= 0.5 * ScalarField::constant_in_time(k) * (ux1 * ux1 + ux2 * ux2);
    r += kernel.apply(m);
    r += f * m;
    return r;
}

/// L2 norm over the nodes where the evolution equations are imposed: spatial
/// interior nodes at every time level after the initial one.
inline double evolution_l2_norm(const ScalarField& r) {
    const SpaceTimeGrid& g = r.grid();
    double acc = 0.0;
    for (int n = 1; n <= g.nt; ++n) {
        const double wt = trapezoid_weight(n, g.nt, g.ht());
        for (int j = 1; j < g.n2; ++j)
            for (int i = 1; i < g.n1; ++i) acc += wt * g.h1() * g.h2() * r(i, j, n) * r(i, j, n);
    }
    return std::sqrt(acc);
}

/// f = -(u_t + lap u - k |grad u|^2 / 2 + K m) / m with u differentiated symbolically.
inline ScalarField synthesize_f(const AnalyticValueFunction& u, const ScalarField& m, const SpatialField& k,
                                const KernelOperator& kernel, double floor = 1e-6) {
    const SpaceTimeGrid& g = m.grid();
    require(k.grid() == g, ErrorCode::InvalidArgument, "k and m grids differ");
    ScalarField f = kernel.apply(m);
    for (int n = 0; n <= g.nt; ++n)
        for (int j = 0; j <= g.n2; ++j)
            for (int i = 0; i <= g.n1; ++i) {
                const double x1 = g.x1(i), x2 = g.x2(j), t = g.t(n);
                const double mv = m(i, j, n);
                if (!(std::abs(mv) >= floor))
                    throw Error(ErrorCode::PositivityViolation,
                                "cannot divide by m = " + std::to_string(mv) + " at node (" + std::to_string(i) +
                                    "," + std::to_string(j) + "," + std::to_string(n) + ")");
                const double num = u.ut(x1, x2, t) + u.lap(x1, x2, t) - 0.5 * k(i, j) * u.grad_sq(x1, x2, t) +
                                   f(i, j, n);
                f(i, j, n) = -num / mv;
            }
    return f;
}

namespace detail {

inline void require_refinement(const SpaceTimeGrid& fine, const SpaceTimeGrid& coarse) {
    require(fine.is_refinement_of(coarse), ErrorCode::InvalidGrid,
            "forward grid " + std::to_string(fine.n1) + "x" + std::to_string(fine.n2) + "x" +
                std::to_string(fine.nt) + " is not an integer refinement of the inversion grid " +
                std::to_string(coarse.n1) + "x" + std::to_string(coarse.n2) + "x" + std::to_string(coarse.nt));
}

/// Time derivative of a fine field evaluated only at the fine node (I, J, N).
inline double fine_time_derivative(const ScalarField& f, int I, int J, int N, int order) {
    const SpaceTimeGrid& g = f.grid();
    const StencilRow r = order == 1 ? d1_row(N, g.nt, g.ht()) : d2_row(N, g.nt, g.ht());
    double acc = 0.0;
    for (int s = 0; s < r.len; ++s) acc += r.c[static_cast<std::size_t>(s)] * f(I, J, r.start + s);
    return acc;
}

} // namespace detail

/// Injection of a fine spatial field onto the coarse grid.
inline SpatialField inject(const SpatialField& fine, const SpaceTimeGrid& coarse) {
    detail::require_refinement(fine.grid(), coarse);
    const int r1 = fine.grid().n1 / coarse.n1, r2 = fine.grid().n2 / coarse.n2;
    SpatialField out(coarse);
    for (int j = 0; j <= coarse.n2; ++j)
        for (int i = 0; i <= coarse.n1; ++i) out(i, j) = fine(i * r1, j * r2);
    return out;
}

/// Injection of a fine space-time field (or of its fine-grid time derivative).
inline ScalarField inject(const ScalarField& fine, const SpaceTimeGrid& coarse, int time_order = 0) {
    detail::require_refinement(fine.grid(), coarse);
    const int r1 = fine.grid().n1 / coarse.n1, r2 = fine.grid().n2 / coarse.n2, rt = fine.grid().nt / coarse.nt;
    ScalarField out(coarse);
    for (int n = 0; n <= coarse.nt; ++n)
        for (int j = 0; j <= coarse.n2; ++j)
            for (int i = 0; i <= coarse.n1; ++i)
                out(i, j, n) = time_order == 0 ? fine(i * r1, j * r2, n * rt)
                                               : detail::fine_time_derivative(fine, i * r1, j * r2, n * rt,
                                                                              time_order);
    return out;
}

/// Rasterises a phantom on the forward grid with the smoothing width measured
/// in cells of the inversion grid (the pass count scales with the squared
/// refinement factor so the blur has the same physical width).
inline SpatialField rasterize_phantom_fine(const Phantom& ph, const SpaceTimeGrid& fine, const SpaceTimeGrid& coarse) {
    detail::require_refinement(fine, coarse);
    Phantom scaled = ph;
    const int r = fine.n1 / coarse.n1;
    scaled.smoothing_passes = ph.smoothing_passes * r * r;
    return rasterize_phantom(scaled, fine);
}

/// Grid on which time derivatives of the density and of f are taken.
enum class TimeDifferencing {
    Inversion,  // inject first, then differentiate with the inversion grid's stencils
    Forward,    // differentiate on the forward grid, then inject
};

/// Time derivative of every node series of a trace with the grid's stencils.
inline Trace trace_time_derivative(const Trace& tr, int order) {
    const SpaceTimeGrid& g = tr.grid();
    require(order == 1 || order == 2, ErrorCode::InvalidArgument, "derivative order must be 1 or 2");
    Trace out = tr;
    for (int n = 0; n <= g.nt; ++n) {
        const detail::StencilRow r = order == 1 ? detail::d1_row(n, g.nt, g.ht()) : detail::d2_row(n, g.nt, g.ht());
        for (std::size_t b = 0; b < tr.node_count(); ++b) {
            double acc = 0.0;
            for (int s = 0; s < r.len; ++s) acc += r.c[static_cast<std::size_t>(s)] * tr.at(b, r.start + s);
            out.at(b, n) = acc;
        }
    }
    return out;
}

/// Observations of a forward solution on the inversion grid.
inline std::pair<ProblemData, TruthData> extract_observations(const AnalyticValueFunction& u, const ScalarField& m,
                                                              const ScalarField& f, const SpatialField& k,
                                                              const Kernel& kernel, const SpaceTimeGrid& coarse,
                                                              double gradient_floor = 1.0,
                                                              TimeDifferencing td = TimeDifferencing::Inversion) {
    const SpaceTimeGrid& fine = m.grid();
    detail::require_refinement(fine, coarse);
    require(f.grid() == fine && k.grid() == fine, ErrorCode::InvalidArgument, "forward fields on different grids");
    const int r1 = fine.n1 / coarse.n1;
    const int r2 = fine.n2 / coarse.n2;
    const int rt = fine.nt / coarse.nt;
    const int mid = coarse.mid();
    const double Th = coarse.t(mid);

    ProblemData d;
    d.grid = coarse;
    d.kernel = kernel;
    d.gradient_floor = gradient_floor;
    d.u0 = SpatialField::from_function(coarse, [&](double x1, double x2) { return u.u(x1, x2, Th); });
    d.m0 = SpatialField(coarse);
    for (int j = 0; j <= coarse.n2; ++j)
        for (int i = 0; i <= coarse.n1; ++i) d.m0(i, j) = m(i * r1, j * r2, mid * rt);
    const bool on_fine = td == TimeDifferencing::Forward;
    const ScalarField mc = inject(m, coarse, 0);
    d.f = inject(f, coarse, 0);
    d.ft = on_fine ? inject(f, coarse, 1) : time_derivative(d.f, 1);
    d.ftt = on_fine ? inject(f, coarse, 2) : time_derivative(d.f, 2);
    d.F = compute_F(d.u0, d.m0, d.f.slice(mid), KernelOperator(kernel, coarse));

    // Fine one-sided x1-derivative of m on x1 = b, kept on the fine time axis so
    // it can be differentiated in time before injection.
    const detail::StencilRow edge = detail::d1_row(fine.n1, fine.n1, fine.h1());
    auto m_x1_at_b = [&](int J, int N) {
        double acc = 0.0;
        for (int s = 0; s < edge.len; ++s) acc += edge.c[static_cast<std::size_t>(s)] * m(edge.start + s, J, N);
        return acc;
    };
    auto m_x1_t = [&](int J, int N, int order) {
        const detail::StencilRow r = order == 1 ? detail::d1_row(N, fine.nt, fine.ht()) : detail::d2_row(N, fine.nt, fine.ht());
        double acc = 0.0;
        for (int s = 0; s < r.len; ++s) acc += r.c[static_cast<std::size_t>(s)] * m_x1_at_b(J, r.start + s);
        return acc;
    };

    const Trace lat = Trace::lateral(coarse);
    const Trace right = Trace::right_edge(coarse);
    auto X1 = [&](int i) { return coarse.x1(i); };
    auto X2 = [&](int j) { return coarse.x2(j); };
    auto T = [&](int n) { return coarse.t(n); };

    d.g0 = lat.filled([&](int i, int j, int n) { return u.u(X1(i), X2(j), T(n)); });
    d.p0 = lat.filled([&](int i, int j, int n) { return m(i * r1, j * r2, n * rt); });
    d.g1 = right.filled([&](int i, int j, int n) { return u.ux1(X1(i), X2(j), T(n)); });
    d.p1 = right.filled([&](int, int j, int n) { return m_x1_at_b(j * r2, n * rt); });

    d.dirichlet[kV] = lat.filled([&](int i, int j, int n) { return u.ut(X1(i), X2(j), T(n)); });
    d.dirichlet[kW] = lat.filled([&](int i, int j, int n) { return u.utt(X1(i), X2(j), T(n)); });
    if (on_fine) {
        d.dirichlet[kP] = lat.filled([&](int i, int j, int n) {
            return detail::fine_time_derivative(m, i * r1, j * r2, n * rt, 1);
        });
        d.dirichlet[kQ] = lat.filled([&](int i, int j, int n) {
            return detail::fine_time_derivative(m, i * r1, j * r2, n * rt, 2);
        });
    } else {
        d.dirichlet[kP] = trace_time_derivative(d.p0, 1);
        d.dirichlet[kQ] = trace_time_derivative(d.p0, 2);
    }
    d.neumann[kV] = right.filled([&](int i, int j, int n) { return u.ux1t(X1(i), X2(j), T(n)); });
    d.neumann[kW] = right.filled([&](int i, int j, int n) { return u.ux1tt(X1(i), X2(j), T(n)); });
    if (on_fine) {
        d.neumann[kP] = right.filled([&](int, int j, int n) { return m_x1_t(j * r2, n * rt, 1); });
        d.neumann[kQ] = right.filled([&](int, int j, int n) { return m_x1_t(j * r2, n * rt, 2); });
    } else {
        d.neumann[kP] = trace_time_derivative(d.p1, 1);
        d.neumann[kQ] = trace_time_derivative(d.p1, 2);
    }

    TruthData truth;
    truth.k = inject(k, coarse);
    truth.exact[kV] = ScalarField::from_function(coarse, u.ut);
    truth.exact[kW] = ScalarField::from_function(coarse, u.utt);
    truth.exact[kP] = on_fine ? inject(m, coarse, 1) : time_derivative(mc, 1);
    truth.exact[kQ] = on_fine ? inject(m, coarse, 2) : time_derivative(mc, 2);
    return {std::move(d), std::move(truth)};
}

/// A complete synthetic experiment input.
struct SyntheticDataset {
    ProblemData data;
    TruthData truth;
    double min_density = 0.0;
    double max_density = 0.0;
};

/// Forward solve plus observation extraction for one phantom.
inline SyntheticDataset generate_dataset(const Phantom& phantom, const Kernel& kernel, const SpaceTimeGrid& coarse,
                                         const ForwardConfig& cfg,
                                         const AnalyticValueFunction& u = AnalyticValueFunction::product_quadratic(),
                                         double gradient_floor = 1.0,
                                         TimeDifferencing td = TimeDifferencing::Inversion) {
    detail::require_refinement(cfg.fine, coarse);
    const SpatialField k = rasterize_phantom_fine(phantom, cfg.fine, coarse);
    const ScalarField m = solve_fokker_planck(k, u, cfg);
    const ScalarField f = synthesize_f(u, m, k, KernelOperator(kernel, cfg.fine), cfg.positivity_floor);
    auto [data, truth] = extract_observations(u, m, f, k, kernel, coarse, gradient_floor, td);
    truth.mask = phantom_mask(phantom, coarse);
    truth.contrast = phantom.contrast;
    data.validate();
    SyntheticDataset out{std::move(data), std::move(truth), m.min(), m.max()};
    return out;
}

} // namespace mfgcip
