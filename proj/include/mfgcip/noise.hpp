#pragma once

// Multiplicative noise on the time-dependent boundary observations and
// natural cubic spline differentiation of the noisy time series.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mfgcip/error.hpp"
#include "mfgcip/problem.hpp"

namespace mfgcip {

/// Identifier of the generator behind every noise draw; recorded in manifests.
inline constexpr const char* kNoiseGenerator = "mt19937_64/u53";

/// Independent draw streams, one per noisy observation.
enum class NoiseStream : int { G0 = 0, P0 = 1, G1 = 2, P1 = 3 };

struct NoiseSpec {
    double delta = 0.0;
    std::uint64_t seed = 12345;

    void validate() const {
        require(delta >= 0.0 && delta < 1.0, ErrorCode::InvalidConfig,
                "noise level must lie in [0, 1)");
    }
};

/// `count` uniform draws on [-1, 1] for one stream. The 53-bit mapping is done
/// by hand so the sequence does not depend on the standard library's
/// distribution implementation.
inline std::vector<double> noise_draws(std::uint64_t seed, NoiseStream stream, std::size_t count) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), 0x6d66u};
    std::mt19937_64 gen(seq);
    std::vector<double> xs(count);
    for (auto& x : xs) {
        const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;  // [0,1)
        x = 2.0 * u - 1.0;
    }
    return xs;
}

/// value(x,t) * (1 + delta * xi(t)) with one draw per time node shared across x.
inline Trace perturb(const Trace& trace, double delta, const std::vector<double>& xi) {
    require(delta >= 0.0 && delta < 1.0, ErrorCode::InvalidArgument, "noise level must lie in [0, 1)");
    require(xi.size() == static_cast<std::size_t>(trace.grid().nt + 1), ErrorCode::InvalidArgument,
            "one noise draw per time node is required");
    Trace out = trace;
    for (int n = 0; n <= trace.grid().nt; ++n)
        for (std::size_t b = 0; b < trace.node_count(); ++b)
            out.at(b, n) = trace.at(b, n) * (1.0 + delta * xi[static_cast<std::size_t>(n)]);
    return out;
}

/// Natural cubic spline through (t_k, y_k).
class NaturalCubicSpline {
public:
    NaturalCubicSpline(std::vector<double> t, std::vector<double> y) : t_(std::move(t)), y_(std::move(y)) {
        const std::size_t n = t_.size();
        require(n >= 4, ErrorCode::InvalidArgument, "spline differentiation needs at least 4 nodes");
        require(y_.size() == n, ErrorCode::InvalidArgument, "spline sample count mismatch");
        for (std::size_t k = 1; k < n; ++k)
            require(t_[k] > t_[k - 1], ErrorCode::InvalidArgument, "spline nodes must increase strictly");
        // Second derivatives M_k with M_0 = M_{n-1} = 0 (Thomas algorithm).
        m_.assign(n, 0.0);
        const std::size_t inner = n - 2;
        std::vector<double> diag(inner), upper(inner), rhs(inner);
        for (std::size_t k = 1; k + 1 < n; ++k) {
            const double h0 = t_[k] - t_[k - 1], h1 = t_[k + 1] - t_[k];
            diag[k - 1] = 2.0 * (h0 + h1);
            upper[k - 1] = h1;
            rhs[k - 1] = 6.0 * ((y_[k + 1] - y_[k]) / h1 - (y_[k] - y_[k - 1]) / h0);
        }
        for (std::size_t k = 1; k < inner; ++k) {
            const double lower = t_[k + 1] - t_[k];  // sub-diagonal of row k is h_{k}
            const double w = lower / diag[k - 1];
            diag[k] -= w * upper[k - 1];
            rhs[k] -= w * rhs[k - 1];
        }
        for (std::size_t k = inner; k-- > 0;) {
            const double nxt = (k + 1 < inner) ? m_[k + 2] : 0.0;
            m_[k + 1] = (rhs[k] - upper[k] * nxt) / diag[k];
        }
    }

    double value(double x) const { return eval(x, 0); }
    double derivative(double x, int order) const { return eval(x, order); }

private:
    double eval(double x, int order) const {
        std::size_t k = 0;
        while (k + 2 < t_.size() && x > t_[k + 1]) ++k;
        const double h = t_[k + 1] - t_[k];
        const double a = (t_[k + 1] - x) / h;
        const double b = (x - t_[k]) / h;
        const double M0 = m_[k], M1 = m_[k + 1];
        switch (order) {
        case 0:
            return a * y_[k] + b * y_[k + 1] + ((a * a * a - a) * M0 + (b * b * b - b) * M1) * h * h / 6.0;
        case 1:
            return (y_[k + 1] - y_[k]) / h - (3.0 * a * a - 1.0) / 6.0 * h * M0 +
                   (3.0 * b * b - 1.0) / 6.0 * h * M1;
        case 2:
            return a * M0 + b * M1;
        default:
            throw Error(ErrorCode::InvalidArgument, "spline derivative order must be 0, 1 or 2");
        }
    }

    std::vector<double> t_, y_, m_;
};

/// First or second derivative of the natural spline through the samples,
/// evaluated at the sample times.
inline std::vector<double> spline_differentiate(const std::vector<double>& times,
                                                const std::vector<double>& values, int order) {
    require(order == 1 || order == 2, ErrorCode::InvalidArgument, "spline derivative order must be 1 or 2");
    const NaturalCubicSpline sp(times, values);
    std::vector<double> out(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) out[k] = sp.derivative(times[k], order);
    return out;
}

/// Applies spline_differentiate to every node series of a trace.
inline Trace spline_differentiate(const Trace& trace, int order) {
    std::vector<double> times(static_cast<std::size_t>(trace.grid().nt + 1));
    for (int n = 0; n <= trace.grid().nt; ++n) times[static_cast<std::size_t>(n)] = trace.grid().t(n);
    Trace out = trace;
    for (std::size_t b = 0; b < trace.node_count(); ++b)
        out.set_series(b, spline_differentiate(times, trace.series(b), order));
    return out;
}

/// Noisy copy of clean data: the four raw boundary observations are perturbed
/// and every boundary condition for (v, w, p, q) is rebuilt from spline
/// derivatives. For delta == 0 the clean (symbolic) traces are kept.
inline ProblemData apply_noise(const ProblemData& clean, const NoiseSpec& spec) {
    spec.validate();
    if (spec.delta == 0.0) return clean;
    const std::size_t nodes = static_cast<std::size_t>(clean.grid.nt + 1);
    ProblemData d = clean;
    d.g0 = perturb(clean.g0, spec.delta, noise_draws(spec.seed, NoiseStream::G0, nodes));
    d.p0 = perturb(clean.p0, spec.delta, noise_draws(spec.seed, NoiseStream::P0, nodes));
    d.g1 = perturb(clean.g1, spec.delta, noise_draws(spec.seed, NoiseStream::G1, nodes));
    d.p1 = perturb(clean.p1, spec.delta, noise_draws(spec.seed, NoiseStream::P1, nodes));
    d.dirichlet[kV] = spline_differentiate(d.g0, 1);
    d.dirichlet[kW] = spline_differentiate(d.g0, 2);
    d.dirichlet[kP] = spline_differentiate(d.p0, 1);
    d.dirichlet[kQ] = spline_differentiate(d.p0, 2);
    d.neumann[kV] = spline_differentiate(d.g1, 1);
    d.neumann[kW] = spline_differentiate(d.g1, 2);
    d.neumann[kP] = spline_differentiate(d.p1, 1);
    d.neumann[kQ] = spline_differentiate(d.p1, 2);
    return d;
}

} // namespace mfgcip
