#pragma once

// Descent on the free-node vector: the plain gradient iteration
// U_n = U_{n-1} - xi J'(U_{n-1}) with optional Armijo backtracking, and a
// limited-memory quasi-Newton variant behind the same interface.

#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mfgcip/error.hpp"
#include "mfgcip/objective.hpp"
#include "mfgcip/precondition.hpp"

namespace mfgcip {

enum class DescentMethod { GradientDescent, LBFGS };
enum class StopReason { GradientTolerance, MaxIterations, StepUnderflow };

inline std::string to_string(DescentMethod m) { return m == DescentMethod::LBFGS ? "lbfgs" : "gradient"; }
inline std::string to_string(StopReason r) {
    switch (r) {
    case StopReason::GradientTolerance: return "gradient_tolerance";
    case StopReason::MaxIterations: return "max_iterations";
    case StopReason::StepUnderflow: return "step_underflow";
    }
    return "unknown";
}

inline DescentMethod parse_descent_method(const std::string& s) {
    if (s == "gradient" || s == "gd") return DescentMethod::GradientDescent;
    if (s == "lbfgs") return DescentMethod::LBFGS;
    throw Error(ErrorCode::InvalidConfig, "unknown descent method '" + s + "'");
}

struct MinimizerConfig {
    DescentMethod method = DescentMethod::LBFGS;
    /// Initial step xi; 0 means "pick by backtracking at iteration 0".
    double step = 0.0;
    int max_iterations = 2000;
    double gradient_tolerance = 1e-2;
    bool backtracking = true;
    double armijo = 1e-4;
    double min_step = 1e-30;
    /// Lets the gradient step double again after an accepted step.
    bool step_growth = true;
    int memory = 10;
    /// Quasi-Newton mode only: seed the inverse-Hessian approximation with the
    /// principal-part preconditioner instead of a scaled identity.
    bool preconditioned = true;
    /// Radius of the admissible ball; only monitored.
    double ball_radius = 1e6;

    void validate() const {
        require(step >= 0.0, ErrorCode::InvalidConfig, "step size must be >= 0 (0 selects it automatically)");
        require(gradient_tolerance > 0.0, ErrorCode::InvalidConfig, "gradient tolerance must be positive");
        require(max_iterations >= 0, ErrorCode::InvalidConfig, "max iterations must be >= 0");
        require(armijo > 0.0 && armijo < 1.0, ErrorCode::InvalidConfig, "Armijo constant must lie in (0, 1)");
        require(memory >= 1, ErrorCode::InvalidConfig, "quasi-Newton memory must be >= 1");
        require(ball_radius > 0.0, ErrorCode::InvalidConfig, "ball radius must be positive");
        require(step > 0.0 || backtracking, ErrorCode::InvalidConfig,
                "a fixed step size is required when backtracking is off");
    }
};

struct IterationRecord {
    int iteration = 0;
    double value = 0.0;
    double gradient_norm = 0.0;
    double step = 0.0;
    bool accepted = true;
    double norm = 0.0;  // monitored norm of the iterate (H^2 of U when available)
};

struct IterationTrace {
    std::vector<IterationRecord> records;
    StopReason reason = StopReason::MaxIterations;
    int ball_violations = 0;

    int iterations() const { return records.empty() ? 0 : records.back().iteration; }
    double final_gradient_norm() const { return records.empty() ? 0.0 : records.back().gradient_norm; }
    double final_value() const { return records.empty() ? 0.0 : records.back().value; }

    bool monotone() const {
        for (std::size_t k = 1; k < records.size(); ++k)
            if (records[k].value > records[k - 1].value) return false;
        return true;
    }

    void write_csv(std::ostream& os) const {
        os << "iteration,J,grad_norm,step,accepted,norm\n";
        os.precision(17);
        for (const auto& r : records)
            os << r.iteration << ',' << r.value << ',' << r.gradient_norm << ',' << r.step << ','
               << (r.accepted ? 1 : 0) << ',' << r.norm << '\n';
    }
    std::string csv() const {
        std::ostringstream os;
        write_csv(os);
        return os.str();
    }
};

/// f(x, g) returns J(x) and writes the gradient into g.
using ValueAndGradient = std::function<double(const std::vector<double>&, std::vector<double>&)>;
using NormMonitor = std::function<double(const std::vector<double>&)>;
/// out = M^{-1} in for a symmetric positive definite M.
using Preconditioner = std::function<void(const std::vector<double>&, std::vector<double>&)>;

struct DescentResult {
    std::vector<double> x;
    IterationTrace trace;
};

namespace detail {

inline double vdot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline void require_finite(double J, const std::vector<double>& g, int iteration) {
    bool ok = std::isfinite(J);
    for (double v : g) ok = ok && std::isfinite(v);
    require(ok, ErrorCode::NonFinite,
            "objective or gradient is not finite at iteration " + std::to_string(iteration));
}

} // namespace detail

inline DescentResult descend(const ValueAndGradient& fg, std::vector<double> x, const MinimizerConfig& cfg,
                             const NormMonitor& monitor = {}, const Preconditioner& precond = {}) {
    cfg.validate();
    for (double v : x) require(std::isfinite(v), ErrorCode::NonFinite, "starting point is not finite");
    DescentResult res;
    IterationTrace& tr = res.trace;
    const std::size_t n = x.size();

    std::vector<double> g(n), gn(n), xn(n), d(n), z(n);
    const bool use_precond = cfg.method == DescentMethod::LBFGS && static_cast<bool>(precond);
    double J = fg(x, g);
    detail::require_finite(J, g, 0);
    double gnorm = std::sqrt(detail::vdot(g, g));
    auto record = [&](int it, double step, bool accepted) {
        IterationRecord r{it, J, gnorm, step, accepted, monitor ? monitor(x) : 0.0};
        if (monitor && r.norm > cfg.ball_radius) ++tr.ball_violations;
        tr.records.push_back(r);
    };
    record(0, 0.0, true);

    std::deque<std::vector<double>> S, Y;
    std::deque<double> rho;
    double xi = cfg.step > 0.0 ? cfg.step : 1.0;

    for (int it = 1;; ++it) {
        if (gnorm < cfg.gradient_tolerance) {
            tr.reason = StopReason::GradientTolerance;
            break;
        }
        if (it > cfg.max_iterations) {
            tr.reason = StopReason::MaxIterations;
            break;
        }

        // Search direction.
        bool quasi_newton = cfg.method == DescentMethod::LBFGS && !S.empty();
        if (quasi_newton) {
            d = g;
            std::vector<double> alpha(S.size());
            for (std::size_t k = S.size(); k-- > 0;) {
                alpha[k] = rho[k] * detail::vdot(S[k], d);
                for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[k] * Y[k][i];
            }
            if (use_precond) {
                precond(Y.back(), z);
                const double gamma = detail::vdot(S.back(), Y.back()) / detail::vdot(Y.back(), z);
                precond(d, z);
                for (std::size_t i = 0; i < n; ++i) d[i] = gamma * z[i];
            } else {
                const double gamma = detail::vdot(S.back(), Y.back()) / detail::vdot(Y.back(), Y.back());
                for (double& v : d) v *= gamma;
            }
            for (std::size_t k = 0; k < S.size(); ++k) {
                const double beta = rho[k] * detail::vdot(Y[k], d);
                for (std::size_t i = 0; i < n; ++i) d[i] += (alpha[k] - beta) * S[k][i];
            }
            for (double& v : d) v = -v;
            if (detail::vdot(d, g) >= 0.0) {  // not a descent direction: restart
                S.clear();
                Y.clear();
                rho.clear();
                quasi_newton = false;
            }
        }
        if (!quasi_newton) {
            if (use_precond) {
                precond(g, z);
                for (std::size_t i = 0; i < n; ++i) d[i] = -z[i];
            } else {
                for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
            }
        }

        double step = quasi_newton || use_precond ? 1.0 : xi;
        if (cfg.method == DescentMethod::LBFGS && !use_precond && !quasi_newton && tr.records.size() == 1 &&
            cfg.step == 0.0)
            step = 1.0 / std::max(gnorm, 1e-300);
        const double slope = detail::vdot(d, g);
        double Jn = 0.0;
        bool accepted = false;
        while (true) {
            for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + step * d[i];
            Jn = fg(xn, gn);
            const bool finite = std::isfinite(Jn);
            if (!cfg.backtracking) {
                detail::require_finite(Jn, gn, it);
                accepted = true;
                break;
            }
            if (finite && Jn <= J + cfg.armijo * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
            if (step < cfg.min_step) break;
        }
        if (!accepted) {
            record(it, step, false);
            tr.reason = StopReason::StepUnderflow;
            break;
        }
        detail::require_finite(Jn, gn, it);

        if (cfg.method == DescentMethod::LBFGS) {
            std::vector<double> s(n), y(n);
            for (std::size_t i = 0; i < n; ++i) {
                s[i] = xn[i] - x[i];
                y[i] = gn[i] - g[i];
            }
            const double sy = detail::vdot(s, y);
            if (sy > 1e-12 * std::sqrt(detail::vdot(s, s) * detail::vdot(y, y))) {
                S.push_back(std::move(s));
                Y.push_back(std::move(y));
                rho.push_back(1.0 / sy);
                if (static_cast<int>(S.size()) > cfg.memory) {
                    S.pop_front();
                    Y.pop_front();
                    rho.pop_front();
                }
            }
        } else {
            xi = cfg.step_growth && cfg.backtracking ? 2.0 * step : step;
        }
        x.swap(xn);
        g.swap(gn);
        J = Jn;
        gnorm = std::sqrt(detail::vdot(g, g));
        record(it, step, true);
    }
    res.x = std::move(x);
    return res;
}

/// Minimises an Objective from the zero free vector.
inline DescentResult minimize_objective(const Objective& obj, const MinimizerConfig& cfg,
                                        std::vector<double> x0 = {}) {
    if (x0.empty()) x0.assign(obj.dimension(), 0.0);
    const ValueAndGradient fg = [&](const std::vector<double>& x, std::vector<double>& g) {
        return obj.value_and_gradient(x, g);
    };
    const NormMonitor mon = [&](const std::vector<double>& x) {
        const StateVector U = obj.state(x);
        double s = 0.0;
        for (int c = 0; c < 4; ++c) s += h2_inner(U[c], U[c]);
        return std::sqrt(s);
    };
    Preconditioner pc;
    if (cfg.method == DescentMethod::LBFGS && cfg.preconditioned) {
        auto M = std::make_shared<PrincipalPreconditioner>(obj);
        pc = [M](const std::vector<double>& in, std::vector<double>& out) { M->apply(in, out); };
    }
    return descend(fg, std::move(x0), cfg, mon, pc);
}

} // namespace mfgcip
