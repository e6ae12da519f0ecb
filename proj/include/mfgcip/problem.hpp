#pragma once

// Everything the inversion is allowed to see, plus the boundary-trace
// containers that carry the lateral data.

#include <array>
#include <string>
#include <vector>

#include "mfgcip/error.hpp"
#include "mfgcip/grid.hpp"
#include "mfgcip/model.hpp"

namespace mfgcip {

/// Values on a fixed set of spatial boundary nodes for every time node.
class Trace {
public:
    Trace() = default;

    /// All nodes of the lateral boundary, counter-clockwise from (0,0).
    static Trace lateral(const SpaceTimeGrid& g) {
        Trace tr;
        tr.grid_ = g;
        for (int i = 0; i < g.n1; ++i) tr.nodes_.push_back({i, 0});
        for (int j = 0; j < g.n2; ++j) tr.nodes_.push_back({g.n1, j});
        for (int i = g.n1; i > 0; --i) tr.nodes_.push_back({i, g.n2});
        for (int j = g.n2; j > 0; --j) tr.nodes_.push_back({0, j});
        tr.values_.assign(tr.nodes_.size() * static_cast<std::size_t>(g.nt + 1), 0.0);
        return tr;
    }

    /// Nodes of the edge x1 = b, j = 0..n2.
    static Trace right_edge(const SpaceTimeGrid& g) {
        Trace tr;
        tr.grid_ = g;
        for (int j = 0; j <= g.n2; ++j) tr.nodes_.push_back({g.n1, j});
        tr.values_.assign(tr.nodes_.size() * static_cast<std::size_t>(g.nt + 1), 0.0);
        return tr;
    }

    /// Same node set, values from fn(i, j, n).
    template <class Fn>
    Trace filled(Fn&& fn) const {
        Trace tr = *this;
        for (int n = 0; n <= grid_.nt; ++n)
            for (std::size_t b = 0; b < nodes_.size(); ++b)
                tr.at(b, n) = fn(nodes_[b][0], nodes_[b][1], n);
        return tr;
    }

    /// Samples a space-time field at the trace nodes.
    Trace sampled(const ScalarField& f) const {
        require(f.grid() == grid_, ErrorCode::InvalidArgument, "trace/field grid mismatch");
        return filled([&](int i, int j, int n) { return f(i, j, n); });
    }

    const SpaceTimeGrid& grid() const { return grid_; }
    const std::vector<std::array<int, 2>>& nodes() const { return nodes_; }
    std::size_t node_count() const { return nodes_.size(); }
    double& at(std::size_t b, int n) { return values_[static_cast<std::size_t>(n) * nodes_.size() + b]; }
    double at(std::size_t b, int n) const { return values_[static_cast<std::size_t>(n) * nodes_.size() + b]; }
    bool empty() const { return nodes_.empty(); }

    std::vector<double> series(std::size_t b) const {
        std::vector<double> s(static_cast<std::size_t>(grid_.nt + 1));
        for (int n = 0; n <= grid_.nt; ++n) s[static_cast<std::size_t>(n)] = at(b, n);
        return s;
    }
    void set_series(std::size_t b, const std::vector<double>& s) {
        for (int n = 0; n <= grid_.nt; ++n) at(b, n) = s[static_cast<std::size_t>(n)];
    }

    /// Writes the trace values into the matching nodes of a field.
    void scatter_into(ScalarField& f) const {
        for (int n = 0; n <= grid_.nt; ++n)
            for (std::size_t b = 0; b < nodes_.size(); ++b) f(nodes_[b][0], nodes_[b][1], n) = at(b, n);
    }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

private:
    SpaceTimeGrid grid_;
    std::vector<std::array<int, 2>> nodes_;
    std::vector<double> values_;
};

/// Index of the four unknown components (v, w, p, q).
enum Component : int { kV = 0, kW = 1, kP = 2, kQ = 3 };

/// Input of the inverse problem on the inversion grid.
struct ProblemData {
    SpaceTimeGrid grid;
    Kernel kernel = DeltaGaussianKernel{0.2};
    double gradient_floor = 1.0;

    SpatialField u0, m0, F;
    ScalarField f, ft, ftt;

    /// Raw observations: u and m on the lateral boundary, their x1-derivatives on x1 = b.
    Trace g0, p0, g1, p1;

    /// Boundary data for (v, w, p, q): Dirichlet values on the whole lateral
    /// boundary and x1-derivatives on x1 = b.
    std::array<Trace, 4> dirichlet;
    std::array<Trace, 4> neumann;

    void validate() const {
        grid.validate();
        require(u0.size() == grid.spatial_size() && m0.size() == grid.spatial_size() &&
                    F.size() == grid.spatial_size(),
                ErrorCode::MissingData, "problem data is missing spatial fields");
        require(f.size() == grid.size() && ft.size() == grid.size() && ftt.size() == grid.size(),
                ErrorCode::MissingData, "problem data is missing f or its time derivatives");
        for (int c = 0; c < 4; ++c) {
            require(!dirichlet[static_cast<std::size_t>(c)].empty() &&
                        !neumann[static_cast<std::size_t>(c)].empty(),
                    ErrorCode::MissingData, "problem data is missing boundary traces");
            require(dirichlet[static_cast<std::size_t>(c)].grid() == grid &&
                        neumann[static_cast<std::size_t>(c)].grid() == grid,
                    ErrorCode::DatasetMismatch, "trace grid does not match the inversion grid");
        }
        const auto [gx, gy] = gradient(u0);
        for (int j = 0; j <= grid.n2; ++j)
            for (int i = 0; i <= grid.n1; ++i) {
                const double g2 = gx(i, j) * gx(i, j) + gy(i, j) * gy(i, j);
                require(g2 >= gradient_floor, ErrorCode::GradientFloor,
                        "|grad u0|^2 = " + std::to_string(g2) + " below floor c = " +
                            std::to_string(gradient_floor) + " at node (" + std::to_string(i) +
                            "," + std::to_string(j) + ")");
            }
    }
};

/// Ground truth kept beside a synthetic data set for scoring only.
struct TruthData {
    SpatialField k;          // target coefficient on the inversion grid
    SpatialField mask;       // inclusion indicator on the inversion grid
    double contrast = 1.0;   // c_a
    std::array<ScalarField, 4> exact;  // (u_t, u_tt, m_t, m_tt) sampled from the forward solution
};

} // namespace mfgcip
