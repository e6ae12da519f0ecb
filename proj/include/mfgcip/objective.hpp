#pragma once

// The Carleman-weighted least-squares functional over the free nodes of U,
// its exact discrete gradient, and the elimination of the boundary
// conditions that turns U into a free-node vector.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "mfgcip/error.hpp"
#include "mfgcip/grid.hpp"
#include "mfgcip/problem.hpp"
#include "mfgcip/residuals.hpp"

namespace mfgcip {

struct CarlemanConfig {
    double lambda = 3.0;
    double beta = 0.001;

    void validate() const {
        require(lambda >= 0.0 && std::isfinite(lambda), ErrorCode::InvalidConfig, "lambda must be >= 0");
        require(beta > 0.0 && beta < 1.0, ErrorCode::InvalidConfig, "beta must lie in (0, 1)");
    }
};

/// phi(x, t) = exp(2 lambda (x1^2 - (t - T/2)^2)).
inline ScalarField cwf(double lambda, const SpaceTimeGrid& g) {
    const double Th = 0.5 * g.T;
    return ScalarField::from_function(g, [&](double x1, double, double t) {
        return std::exp(2.0 * lambda * (x1 * x1 - (t - Th) * (t - Th)));
    });
}

/// exp(-2 lambda b^2) phi, formed from its (non-positive) exponent so it never
/// overflows.
inline ScalarField cwf_scaled(double lambda, const SpaceTimeGrid& g) {
    const double Th = 0.5 * g.T;
    const double b2 = g.b * g.b;
    return ScalarField::from_function(g, [&](double x1, double, double t) {
        return std::exp(2.0 * lambda * (x1 * x1 - b2) - 2.0 * lambda * (t - Th) * (t - Th));
    });
}

/// Node classes of one component of U.
enum class NodeClass : unsigned char { Free, Dirichlet, Dependent };

/// Partition of the nodes into Dirichlet nodes (whole lateral boundary),
/// Neumann-dependent nodes (x1 index n1-1, interior rows) and free nodes.
/// A dependent node is eliminated through the one-sided stencil
///     (3 U(n1) - 4 U(n1-1) + U(n1-2)) / (2 h1) = neumann.
class ConstraintMap {
public:
    explicit ConstraintMap(const SpaceTimeGrid& g) : grid_(g) {
        g.validate();
        for (int n = 0; n <= g.nt; ++n)
            for (int j = 1; j < g.n2; ++j)
                for (int i = 1; i <= g.n1 - 2; ++i) free_.push_back(g.index(i, j, n));
    }

    const SpaceTimeGrid& grid() const { return grid_; }
    std::size_t free_per_component() const { return free_.size(); }
    std::size_t size() const { return 4 * free_.size(); }
    const std::vector<std::size_t>& free_nodes() const { return free_; }

    NodeClass classify(int i, int j) const {
        if (grid_.is_boundary(i, j)) return NodeClass::Dirichlet;
        if (i == grid_.n1 - 1) return NodeClass::Dependent;
        return NodeClass::Free;
    }

    /// Builds U from free values and the boundary traces of `data`.
    StateVector apply(const std::vector<double>& x, const ProblemData& data) const {
        require(data.grid == grid_, ErrorCode::DatasetMismatch, "constraint map and data grids differ");
        for (int c = 0; c < 4; ++c)
            require(!data.dirichlet[static_cast<std::size_t>(c)].empty() &&
                        !data.neumann[static_cast<std::size_t>(c)].empty(),
                    ErrorCode::MissingData, "boundary traces are missing");
        return assemble(x, &data);
    }

    /// Same as `apply` with homogeneous boundary data; the linear part of the map.
    StateVector apply_homogeneous(const std::vector<double>& x) const { return assemble(x, nullptr); }

    /// Free-node values of U.
    std::vector<double> extract(const StateVector& U) const {
        std::vector<double> x(size());
        const std::size_t F = free_.size();
        for (int c = 0; c < 4; ++c) {
            auto v = U[c].values();
            for (std::size_t k = 0; k < F; ++k) x[static_cast<std::size_t>(c) * F + k] = v[free_[k]];
        }
        return x;
    }

    /// Transpose of the linear part of `apply`: a gradient with respect to all
    /// nodes of U becomes a gradient with respect to the free values.
    std::vector<double> pullback(const StateVector& gU) const {
        std::array<ScalarField, 4> folded = gU.c;
        const int i = grid_.n1 - 1;
        for (auto& f : folded)
            for (int n = 0; n <= grid_.nt; ++n)
                for (int j = 1; j < grid_.n2; ++j) f(i - 1, j, n) += 0.25 * f(i, j, n);
        return extract(StateVector(folded[0], folded[1], folded[2], folded[3]));
    }

    /// Largest violation of the boundary conditions by U.
    double boundary_violation(const StateVector& U, const ProblemData& data) const {
        double worst = 0.0;
        for (int c = 0; c < 4; ++c) {
            const Trace& D = data.dirichlet[static_cast<std::size_t>(c)];
            const Trace& N = data.neumann[static_cast<std::size_t>(c)];
            for (int n = 0; n <= grid_.nt; ++n) {
                for (std::size_t b = 0; b < D.node_count(); ++b) {
                    const auto [i, j] = D.nodes()[b];
                    worst = std::max(worst, std::abs(U[c](i, j, n) - D.at(b, n)));
                }
                for (std::size_t b = 0; b < N.node_count(); ++b) {
                    const int j = N.nodes()[b][1];
                    if (j == 0 || j == grid_.n2) continue;
                    const int i = grid_.n1;
                    const double d = (3.0 * U[c](i, j, n) - 4.0 * U[c](i - 1, j, n) + U[c](i - 2, j, n)) /
                                     (2.0 * grid_.h1());
                    worst = std::max(worst, std::abs(d - N.at(b, n)));
                }
            }
        }
        return worst;
    }

private:
    StateVector assemble(const std::vector<double>& x, const ProblemData* data) const {
        require(x.size() == size(), ErrorCode::InvalidArgument,
                "free vector has " + std::to_string(x.size()) + " entries, expected " + std::to_string(size()));
        StateVector U(grid_);
        const std::size_t F = free_.size();
        const int i = grid_.n1 - 1;
        for (int c = 0; c < 4; ++c) {
            ScalarField& f = U[c];
            auto v = f.values();
            for (std::size_t k = 0; k < F; ++k) v[free_[k]] = x[static_cast<std::size_t>(c) * F + k];
            if (data) data->dirichlet[static_cast<std::size_t>(c)].scatter_into(f);
            const Trace* N = data ? &data->neumann[static_cast<std::size_t>(c)] : nullptr;
            for (int n = 0; n <= grid_.nt; ++n)
                for (int j = 1; j < grid_.n2; ++j) {
                    // The right-edge trace lists j = 0..n2 in order.
                    const double rhs = N ? 2.0 * grid_.h1() * N->at(static_cast<std::size_t>(j), n) -
                                               3.0 * f(grid_.n1, j, n)
                                         : 0.0;
                    f(i, j, n) = (f(i - 1, j, n) - rhs) / 4.0;
                }
        }
        return U;
    }

    SpaceTimeGrid grid_;
    std::vector<std::size_t> free_;
};

/// Breakdown of J at one state.
struct ObjectiveTerms {
    std::array<double, 4> residual{};  // weighted integrals of L_i^2 (lambda^{3/2} included for L1, L3)
    double regularization = 0.0;       // beta * sum of squared H^2 norms
    double residual_part() const { return residual[0] + residual[1] + residual[2] + residual[3]; }
    double total() const { return residual_part() + regularization; }
};

class Objective {
public:
    Objective(const ProblemData& data, const CarlemanConfig& cfg)
        : data_(data), cfg_(cfg), op_(data), map_(data.grid) {
        cfg.validate();
        data.validate();
        const ScalarField q = quadrature_weights(data.grid);
        weight_ = q * cwf_scaled(cfg.lambda, data.grid);
        lam32_ = std::pow(cfg.lambda, 1.5);
    }

    const ProblemData& data() const { return data_; }
    const CarlemanConfig& config() const { return cfg_; }
    const ConstraintMap& constraints() const { return map_; }
    const ResidualOperator& residuals() const { return op_; }
    std::size_t dimension() const { return map_.size(); }

    StateVector state(const std::vector<double>& x) const { return map_.apply(x, data_); }

    ObjectiveTerms terms(const StateVector& U) const {
        const auto L = op_.evaluate(U);
        check_finite(L);
        ObjectiveTerms t;
        for (int r = 0; r < 4; ++r) {
            const double c = (r == 0 || r == 2) ? lam32_ : 1.0;
            t.residual[static_cast<std::size_t>(r)] =
                c * dot(weight_, L[static_cast<std::size_t>(r)] * L[static_cast<std::size_t>(r)]);
        }
        for (int c = 0; c < 4; ++c) t.regularization += cfg_.beta * h2_inner(U[c], U[c]);
        return t;
    }

    double value_of_state(const StateVector& U) const { return terms(U).total(); }

    /// J and its gradient with respect to every node of U.
    double state_value_and_gradient(const StateVector& U, StateVector& grad) const {
        const AuxiliaryFields aux = op_.auxiliaries(U);
        std::array<ScalarField, 4> L{op_.L1(U, aux), op_.L2(U, aux), op_.L3(U, aux), op_.L4(U, aux)};
        check_finite(L);
        double J = 0.0;
        std::array<ScalarField, 4> seeds;
        for (int r = 0; r < 4; ++r) {
            const double c = (r == 0 || r == 2) ? lam32_ : 1.0;
            const ScalarField wl = weight_ * L[static_cast<std::size_t>(r)];
            J += c * dot(wl, L[static_cast<std::size_t>(r)]);
            seeds[static_cast<std::size_t>(r)] = (2.0 * c) * wl;
        }
        grad = op_.pullback(U, aux, seeds);
        for (int c = 0; c < 4; ++c) {
            const ScalarField G = h2_gram_apply(U[c]);
            J += cfg_.beta * dot(G, U[c]);
            grad[c].axpy(2.0 * cfg_.beta, G);
        }
        return J;
    }

    double value(const std::vector<double>& x) const { return value_of_state(state(x)); }

    double value_and_gradient(const std::vector<double>& x, std::vector<double>& g) const {
        const StateVector U = state(x);
        StateVector gU;
        const double J = state_value_and_gradient(U, gU);
        g = map_.pullback(gU);
        return J;
    }

private:
    void check_finite(const std::array<ScalarField, 4>& L) const {
        const SpaceTimeGrid& g = data_.grid;
        for (int r = 0; r < 4; ++r) {
            const ScalarField& f = L[static_cast<std::size_t>(r)];
            if (f.all_finite()) continue;
            for (int n = 0; n <= g.nt; ++n)
                for (int j = 0; j <= g.n2; ++j)
                    for (int i = 0; i <= g.n1; ++i)
                        if (!std::isfinite(f(i, j, n)))
                            throw Error(ErrorCode::NonFinite, "residual L" + std::to_string(r + 1) +
                                                                  " is not finite at node (" + std::to_string(i) +
                                                                  "," + std::to_string(j) + "," +
                                                                  std::to_string(n) + ")");
        }
    }

    ProblemData data_;
    CarlemanConfig cfg_;
    ResidualOperator op_;
    ConstraintMap map_;
    ScalarField weight_;
    double lam32_ = 0.0;
};

} // namespace mfgcip
