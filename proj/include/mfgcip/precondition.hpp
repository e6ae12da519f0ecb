#pragma once

// Sparse-matrix forms of the grid operators and a preconditioner for the
// quasi-Newton mode built from the principal (parabolic) part of the
// Hessian of J restricted to the free nodes.

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "mfgcip/error.hpp"
#include "mfgcip/grid.hpp"
#include "mfgcip/objective.hpp"

namespace mfgcip {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Matrix of diff(., ax, order) on the space-time nodes of g.
inline SparseMatrix axis_matrix(const SpaceTimeGrid& g, Axis ax, int order) {
    require(order == 1 || order == 2, ErrorCode::InvalidArgument, "derivative order must be 1 or 2");
    const std::size_t N = g.size();
    const int cells = ax == Axis::X1 ? g.n1 : ax == Axis::X2 ? g.n2 : g.nt;
    const double h = ax == Axis::X1 ? g.h1() : ax == Axis::X2 ? g.h2() : g.ht();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(N * 4);
    for (int n = 0; n <= g.nt; ++n)
        for (int j = 0; j <= g.n2; ++j)
            for (int i = 0; i <= g.n1; ++i) {
                const int k = ax == Axis::X1 ? i : ax == Axis::X2 ? j : n;
                const detail::StencilRow r = order == 1 ? detail::d1_row(k, cells, h) : detail::d2_row(k, cells, h);
                for (int s = 0; s < r.len; ++s) {
                    int a = i, b = j, c = n;
                    (ax == Axis::X1 ? a : ax == Axis::X2 ? b : c) = r.start + s;
                    trip.emplace_back(static_cast<int>(g.index(i, j, n)), static_cast<int>(g.index(a, b, c)),
                                      r.c[static_cast<std::size_t>(s)]);
                }
            }
    SparseMatrix A(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

inline SparseMatrix diagonal_matrix(const ScalarField& d) {
    const auto v = d.values();
    SparseMatrix D(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(v.size()));
    D.reserve(Eigen::VectorXi::Constant(static_cast<Eigen::Index>(v.size()), 1));
    for (std::size_t k = 0; k < v.size(); ++k) D.insert(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = v[k];
    return D;
}

/// Matrix of h2_gram_apply.
inline SparseMatrix h2_gram_matrix(const SpaceTimeGrid& g) {
    const SparseMatrix W = diagonal_matrix(quadrature_weights(g));
    SparseMatrix G = W;
    for (const auto& term : detail::h2_terms()) {
        if (term.count == 0) continue;
        SparseMatrix T = axis_matrix(g, term.axes[0], term.orders[0]);
        if (term.count == 2) T = SparseMatrix(axis_matrix(g, term.axes[1], term.orders[1]) * T);
        G += SparseMatrix(T.transpose()) * W * T;
    }
    return G;
}

/// Matrix of the linear part of ConstraintMap::apply for one component:
/// free values (columns) to all nodes (rows).
inline SparseMatrix constraint_matrix(const ConstraintMap& map) {
    const SpaceTimeGrid& g = map.grid();
    const auto& free = map.free_nodes();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(free.size() + static_cast<std::size_t>((g.nt + 1) * (g.n2 - 1)));
    std::vector<int> column(g.size(), -1);
    for (std::size_t k = 0; k < free.size(); ++k) {
        trip.emplace_back(static_cast<int>(free[k]), static_cast<int>(k), 1.0);
        column[free[k]] = static_cast<int>(k);
    }
    for (int n = 0; n <= g.nt; ++n)
        for (int j = 1; j < g.n2; ++j)
            trip.emplace_back(static_cast<int>(g.index(g.n1 - 1, j, n)), column[g.index(g.n1 - 2, j, n)], 0.25);
    SparseMatrix P(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(free.size()));
    P.setFromTriplets(trip.begin(), trip.end());
    return P;
}

/// Inverse of the block-diagonal matrix
///     2 c P^T (Dt +- Lap)^T W (Dt +- Lap) P + 2 beta P^T G P
/// per component, where W is the Carleman-weighted quadrature and c is the
/// residual factor (lambda^{3/2} for v and w). The lower-order coupling
/// terms of L1..L4 are left out.
class PrincipalPreconditioner {
public:
    explicit PrincipalPreconditioner(const Objective& obj) : per_component_(obj.constraints().free_per_component()) {
        const SpaceTimeGrid& g = obj.data().grid;
        const CarlemanConfig& cfg = obj.config();
        const SparseMatrix P = constraint_matrix(obj.constraints());
        const SparseMatrix Pt = P.transpose();
        const SparseMatrix W = diagonal_matrix(quadrature_weights(g) * cwf_scaled(cfg.lambda, g));
        const SparseMatrix Dt = axis_matrix(g, Axis::T, 1);
        const SparseMatrix Lap = SparseMatrix(axis_matrix(g, Axis::X1, 2) + axis_matrix(g, Axis::X2, 2));
        const SparseMatrix G = SparseMatrix(Pt * h2_gram_matrix(g) * P);

        const std::array<double, 2> sign{1.0, -1.0};
        const std::array<double, 2> factor{std::pow(cfg.lambda, 1.5), 1.0};
        for (std::size_t s = 0; s < 2; ++s) {
            const SparseMatrix A = SparseMatrix((Dt + sign[s] * Lap) * P);
            SparseMatrix M = SparseMatrix(A.transpose()) * W * A;
            M *= 2.0 * factor[s];
            M += (2.0 * cfg.beta) * G;
            solver_[s].compute(M);
            require(solver_[s].info() == Eigen::Success, ErrorCode::SolverFailure,
                    "preconditioner factorisation failed");
        }
    }

    /// out = M^{-1} in over the full free vector (components v, w, p, q).
    void apply(const std::vector<double>& in, std::vector<double>& out) const {
        const auto F = static_cast<Eigen::Index>(per_component_);
        require(in.size() == 4 * per_component_, ErrorCode::InvalidArgument, "preconditioner size mismatch");
        out.resize(in.size());
        for (int c = 0; c < 4; ++c) {
            const std::size_t s = (c == 0 || c == 1) ? 0 : 1;  // v, w | p, q
            const Eigen::Map<const Eigen::VectorXd> x(in.data() + c * F, F);
            Eigen::Map<Eigen::VectorXd> y(out.data() + c * F, F);
            y = solver_[s].solve(x);
        }
    }

private:
    std::size_t per_component_;
    std::array<Eigen::SimplicialLDLT<SparseMatrix>, 2> solver_;
};

} // namespace mfgcip
