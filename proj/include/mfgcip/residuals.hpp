#pragma once

// The transformed system. After eliminating k(x) from the HJB equation at
// t = T/2 and differentiating twice in time, the unknowns are
// U = (v, w, p, q) = (u_t, u_tt, m_t, m_tt), and four residual operators
// L1..L4 must vanish on Q_T. All of them share the bracket
//
//     Psi = (v - int_{T/2}^t w + F) / |grad u0|^2      (= k/2 on exact data)
//
// together with grad u = int grad v + grad u0 and m = int p + m0.

#include <array>
#include <cmath>
#include <string>

#include "mfgcip/error.hpp"
#include "mfgcip/grid.hpp"
#include "mfgcip/model.hpp"
#include "mfgcip/problem.hpp"

namespace mfgcip {

/// The quadruple (v, w, p, q) of nodal fields on the inversion grid.
struct StateVector {
    std::array<ScalarField, 4> c;

    StateVector() = default;
    explicit StateVector(const SpaceTimeGrid& g) : c{ScalarField(g), ScalarField(g), ScalarField(g), ScalarField(g)} {}
    StateVector(ScalarField v, ScalarField w, ScalarField p, ScalarField q)
        : c{std::move(v), std::move(w), std::move(p), std::move(q)} {}

    ScalarField& operator[](int k) { return c[static_cast<std::size_t>(k)]; }
    const ScalarField& operator[](int k) const { return c[static_cast<std::size_t>(k)]; }
    const ScalarField& v() const { return c[0]; }
    const ScalarField& w() const { return c[1]; }
    const ScalarField& p() const { return c[2]; }
    const ScalarField& q() const { return c[3]; }
    const SpaceTimeGrid& grid() const { return c[0].grid(); }
};

/// F(x) = lap u0 + int K(x,y) m0(y) dy + f(x,T/2) m0(x).
inline SpatialField compute_F(const SpatialField& u0, const SpatialField& m0, const SpatialField& f_mid,
                              const KernelOperator& kernel) {
    SpatialField F = laplacian(u0);
    F += kernel.apply(m0);
    F += f_mid * m0;
    return F;
}

inline SpatialField compute_F(const ProblemData& data, const Kernel& kernel) {
    return compute_F(data.u0, data.m0, data.f.slice(data.grid.mid()), KernelOperator(kernel, data.grid));
}

/// Fields derived from U that every residual needs; rebuilt whenever U changes.
struct AuxiliaryFields {
    ScalarField vx, vy, wx, wy;  // spatial gradients of v and w
    ScalarField Gx, Gy;          // int grad v + grad u0
    ScalarField M;               // int p + m0
    ScalarField Psi;             // (v - int w + F) / |grad u0|^2
};

class ResidualOperator {
public:
    ResidualOperator(const ProblemData& data, const Kernel& kernel)
        : grid_(data.grid), K_(kernel, data.grid) {
        const auto [gx, gy] = gradient(data.u0);
        SpatialField inv(grid_);
        for (int j = 0; j <= grid_.n2; ++j)
            for (int i = 0; i <= grid_.n1; ++i) {
                const double g2 = gx(i, j) * gx(i, j) + gy(i, j) * gy(i, j);
                require(g2 > 0.0, ErrorCode::GradientFloor, "|grad u0| vanishes at node (" +
                                                                std::to_string(i) + "," + std::to_string(j) + ")");
                inv(i, j) = 1.0 / g2;
            }
        u0x_ = ScalarField::constant_in_time(gx);
        u0y_ = ScalarField::constant_in_time(gy);
        inv_g2_ = ScalarField::constant_in_time(inv);
        F_ = ScalarField::constant_in_time(data.F);
        m0_ = ScalarField::constant_in_time(data.m0);
        f_ = data.f;
        ft_ = data.ft;
        ftt_ = data.ftt;
    }

    explicit ResidualOperator(const ProblemData& data) : ResidualOperator(data, data.kernel) {}

    const SpaceTimeGrid& grid() const { return grid_; }
    const KernelOperator& kernel() const { return K_; }

    AuxiliaryFields auxiliaries(const StateVector& U) const {
        AuxiliaryFields a;
        a.vx = diff(U.v(), Axis::X1);
        a.vy = diff(U.v(), Axis::X2);
        a.wx = diff(U.w(), Axis::X1);
        a.wy = diff(U.w(), Axis::X2);
        const ScalarField Iv = volterra_integral(U.v());
        a.Gx = diff(Iv, Axis::X1) + u0x_;
        a.Gy = diff(Iv, Axis::X2) + u0y_;
        a.M = volterra_integral(U.p()) + m0_;
        a.Psi = (U.v() - volterra_integral(U.w()) + F_) * inv_g2_;
        return a;
    }

    /// v_t + lap v - 2 grad v . G Psi + K p + f p + f_t M
    ScalarField L1(const StateVector& U, const AuxiliaryFields& a) const {
        ScalarField r = time_derivative(U.v(), 1) + laplacian(U.v());
        r -= 2.0 * (a.vx * a.Gx + a.vy * a.Gy) * a.Psi;
        r += K_.apply(U.p());
        r += f_ * U.p();
        r += ft_ * a.M;
        return r;
    }

    /// p_t - lap p - 2 div(Psi p G) - 2 div(Psi M grad v)
    ScalarField L2(const StateVector& U, const AuxiliaryFields& a) const {
        ScalarField r = time_derivative(U.p(), 1) - laplacian(U.p());
        const ScalarField pp = a.Psi * U.p();
        r -= 2.0 * divergence(pp * a.Gx, pp * a.Gy);
        const ScalarField pm = a.Psi * a.M;
        r -= 2.0 * divergence(pm * a.vx, pm * a.vy);
        return r;
    }

    /// w_t + lap w - 2 (grad w . G + |grad v|^2) Psi + K q + f q + 2 f_t p + f_tt M
    ScalarField L3(const StateVector& U, const AuxiliaryFields& a) const {
        ScalarField r = time_derivative(U.w(), 1) + laplacian(U.w());
        r -= 2.0 * (a.wx * a.Gx + a.wy * a.Gy + a.vx * a.vx + a.vy * a.vy) * a.Psi;
        r += K_.apply(U.q());
        r += f_ * U.q();
        r += 2.0 * ft_ * U.p();
        r += ftt_ * a.M;
        return r;
    }

    /// q_t - lap q - 2 div(Psi (q G + p grad v)) - 2 div(Psi (M grad w + p grad v))
    ScalarField L4(const StateVector& U, const AuxiliaryFields& a) const {
        ScalarField r = time_derivative(U.q(), 1) - laplacian(U.q());
        const ScalarField& P = a.Psi;
        r -= 2.0 * divergence(P * (U.q() * a.Gx + U.p() * a.vx), P * (U.q() * a.Gy + U.p() * a.vy));
        r -= 2.0 * divergence(P * (a.M * a.wx + U.p() * a.vx), P * (a.M * a.wy + U.p() * a.vy));
        return r;
    }

    std::array<ScalarField, 4> evaluate(const StateVector& U) const {
        const AuxiliaryFields a = auxiliaries(U);
        return {L1(U, a), L2(U, a), L3(U, a), L4(U, a)};
    }

    /// Vector-Jacobian product: returns sum_i (dL_i/dU)^T seeds[i].
    StateVector pullback(const StateVector& U, const AuxiliaryFields& a,
                         const std::array<ScalarField, 4>& seeds) const {
        const ScalarField& v = U.v();
        const ScalarField& p = U.p();
        const ScalarField& q = U.q();
        const ScalarField& a1 = seeds[0];
        const ScalarField& a2 = seeds[1];
        const ScalarField& a3 = seeds[2];
        const ScalarField& a4 = seeds[3];
        const ScalarField& P = a.Psi;

        ScalarField vb(grid_), wb(grid_), pb(grid_), qb(grid_);
        ScalarField vxb(grid_), vyb(grid_), wxb(grid_), wyb(grid_);
        ScalarField Gxb(grid_), Gyb(grid_), Mb(grid_), Psib(grid_);

        // L1
        vb += diff_transpose(a1, Axis::T) + laplacian_transpose(a1);
        {
            const ScalarField c = -2.0 * a1 * P;
            vxb += c * a.Gx;
            vyb += c * a.Gy;
            Gxb += c * a.vx;
            Gyb += c * a.vy;
            Psib -= 2.0 * a1 * (a.vx * a.Gx + a.vy * a.Gy);
        }
        pb += K_.apply_transpose(a1) + f_ * a1;
        Mb += ft_ * a1;

        // L2
        pb += diff_transpose(a2, Axis::T) - laplacian_transpose(a2);
        {
            const ScalarField ex = -2.0 * diff_transpose(a2, Axis::X1);
            const ScalarField ey = -2.0 * diff_transpose(a2, Axis::X2);
            // Psi p G
            Psib += p * (ex * a.Gx + ey * a.Gy);
            pb += P * (ex * a.Gx + ey * a.Gy);
            Gxb += ex * P * p;
            Gyb += ey * P * p;
            // Psi M grad v
            Psib += a.M * (ex * a.vx + ey * a.vy);
            vxb += ex * P * a.M;
            vyb += ey * P * a.M;
            Mb += P * (ex * a.vx + ey * a.vy);
        }

        // L3
        wb += diff_transpose(a3, Axis::T) + laplacian_transpose(a3);
        {
            Psib -= 2.0 * a3 * (a.wx * a.Gx + a.wy * a.Gy + a.vx * a.vx + a.vy * a.vy);
            const ScalarField c = -2.0 * a3 * P;
            wxb += c * a.Gx;
            wyb += c * a.Gy;
            Gxb += c * a.wx;
            Gyb += c * a.wy;
            vxb += 2.0 * c * a.vx;
            vyb += 2.0 * c * a.vy;
        }
        qb += K_.apply_transpose(a3) + f_ * a3;
        pb += 2.0 * ft_ * a3;
        Mb += ftt_ * a3;

        // L4
        qb += diff_transpose(a4, Axis::T) - laplacian_transpose(a4);
        {
            const ScalarField ex = -2.0 * diff_transpose(a4, Axis::X1);
            const ScalarField ey = -2.0 * diff_transpose(a4, Axis::X2);
            // Psi (q G + p grad v)
            Psib += ex * (q * a.Gx + p * a.vx) + ey * (q * a.Gy + p * a.vy);
            qb += P * (ex * a.Gx + ey * a.Gy);
            Gxb += ex * P * q;
            Gyb += ey * P * q;
            pb += P * (ex * a.vx + ey * a.vy);
            vxb += ex * P * p;
            vyb += ey * P * p;
            // Psi (M grad w + p grad v)
            Psib += ex * (a.M * a.wx + p * a.vx) + ey * (a.M * a.wy + p * a.vy);
            wxb += ex * P * a.M;
            wyb += ey * P * a.M;
            Mb += P * (ex * a.wx + ey * a.wy);
            vxb += ex * P * p;
            vyb += ey * P * p;
            pb += P * (ex * a.vx + ey * a.vy);
        }

        // Back through the auxiliaries.
        const ScalarField psi_scaled = Psib * inv_g2_;
        vb += psi_scaled;
        wb -= volterra_integral_transpose(psi_scaled);
        pb += volterra_integral_transpose(Mb);
        vb += volterra_integral_transpose(diff_transpose(Gxb, Axis::X1) + diff_transpose(Gyb, Axis::X2));
        vb += diff_transpose(vxb, Axis::X1) + diff_transpose(vyb, Axis::X2);
        wb += diff_transpose(wxb, Axis::X1) + diff_transpose(wyb, Axis::X2);
        (void)v;
        return StateVector(std::move(vb), std::move(wb), std::move(pb), std::move(qb));
    }

private:
    SpaceTimeGrid grid_;
    KernelOperator K_;
    ScalarField u0x_, u0y_, inv_g2_, F_, m0_, f_, ft_, ftt_;
};

inline ScalarField residual_L1(const StateVector& U, const ProblemData& data, const Kernel& kernel) {
    const ResidualOperator op(data, kernel);
    return op.L1(U, op.auxiliaries(U));
}
inline ScalarField residual_L2(const StateVector& U, const ProblemData& data) {
    const ResidualOperator op(data, ZeroKernel{});
    return op.L2(U, op.auxiliaries(U));
}
inline ScalarField residual_L3(const StateVector& U, const ProblemData& data, const Kernel& kernel) {
    const ResidualOperator op(data, kernel);
    return op.L3(U, op.auxiliaries(U));
}
inline ScalarField residual_L4(const StateVector& U, const ProblemData& data) {
    const ResidualOperator op(data, ZeroKernel{});
    return op.L4(U, op.auxiliaries(U));
}

/// k(x) = 2 (v(x,T/2) + F(x)) / |grad u0(x)|^2.
inline SpatialField reconstruct_k(const ScalarField& v, const ProblemData& data) {
    const SpaceTimeGrid& g = data.grid;
    require(v.grid() == g, ErrorCode::InvalidArgument, "v is not on the inversion grid");
    const auto [gx, gy] = gradient(data.u0);
    const SpatialField vmid = v.slice(g.mid());
    SpatialField k(g);
    for (int j = 0; j <= g.n2; ++j)
        for (int i = 0; i <= g.n1; ++i) {
            const double g2 = gx(i, j) * gx(i, j) + gy(i, j) * gy(i, j);
            if (!(g2 >= data.gradient_floor))
                throw Error(ErrorCode::GradientFloor,
                            "|grad u0|^2 = " + std::to_string(g2) + " below floor at node (" +
                                std::to_string(i) + "," + std::to_string(j) + ")");
            k(i, j) = 2.0 * (vmid(i, j) + data.F(i, j)) / g2;
        }
    return k;
}

} // namespace mfgcip
