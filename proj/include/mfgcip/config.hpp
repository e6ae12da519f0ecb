#pragma once

// Run configuration: a sectioned `key = value` text file. Keys may also be
// written fully qualified (`carleman.lambda = 3`) outside any section.
// Unknown keys are rejected. Defaults are the baseline experiment.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mfgcip/error.hpp"
#include "mfgcip/experiments.hpp"
#include "mfgcip/forward.hpp"
#include "mfgcip/io.hpp"
#include "mfgcip/minimize.hpp"
#include "mfgcip/model.hpp"
#include "mfgcip/noise.hpp"
#include "mfgcip/objective.hpp"

namespace mfgcip {

struct RunConfig {
    DomainSpec domain;
    int coarse_space = 20;
    int coarse_time = 10;
    int fine_space = 160;
    int fine_time = 320;

    std::string phantom = "A";
    double contrast = 2.0;
    int smoothing_passes = 2;

    std::string kernel = "delta_gaussian";
    double sigma = 0.2;

    TimeScheme scheme = TimeScheme::BDF2;
    LinearSolverKind solver = LinearSolverKind::SparseLU;
    AdvectionForm advection = AdvectionForm::NonConservative;
    double positivity_floor = 1e-6;

    CarlemanConfig carleman;
    MinimizerConfig minimizer;
    NoiseSpec noise;

    std::string dataset = "dataset";
    std::string out = "out";

    SpaceTimeGrid coarse_grid() const { return domain.grid(coarse_space, coarse_space, coarse_time); }
    SpaceTimeGrid fine_grid() const { return domain.grid(fine_space, fine_space, fine_time); }

    ForwardConfig forward() const {
        ForwardConfig f;
        f.fine = fine_grid();
        f.scheme = scheme;
        f.solver = solver;
        f.advection = advection;
        f.positivity_floor = positivity_floor;
        return f;
    }

    Kernel make_kernel_object() const { return make_kernel(kernel, sigma); }

    Phantom make_phantom() const {
        return letter_phantom(parse_letter(phantom), domain, contrast, smoothing_passes);
    }

    void validate() const {
        domain.validate();
        coarse_grid().validate();
        fine_grid().validate();
        require(fine_space % coarse_space == 0 && fine_time % coarse_time == 0, ErrorCode::InvalidConfig,
                "fine grid must refine the coarse grid by whole factors");
        require(contrast >= 1.0, ErrorCode::InvalidConfig, "contrast must be >= 1");
        require(smoothing_passes >= 0, ErrorCode::InvalidConfig, "smoothing passes must be >= 0");
        require(sigma > 0.0, ErrorCode::InvalidConfig, "kernel sigma must be positive");
        (void)parse_letter(phantom);
        (void)make_kernel_object();
        carleman.validate();
        minimizer.validate();
        noise.validate();
    }

    /// Canonical `key = value` listing of every setting, in a fixed order.
    std::string canonical() const;
    std::uint64_t hash() const { return fnv1a(canonical()); }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double parse_real(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    require(used == v.size() && !v.empty(), ErrorCode::InvalidConfig, "'" + key + "' expects a number, got '" + v + "'");
    return x;
}

inline long long parse_integer(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long x = 0;
    try {
        x = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    require(used == v.size() && !v.empty(), ErrorCode::InvalidConfig,
            "'" + key + "' expects an integer, got '" + v + "'");
    return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "off" || v == "no" || v == "0") return false;
    throw Error(ErrorCode::InvalidConfig, "'" + key + "' expects a boolean, got '" + v + "'");
}

inline TimeScheme parse_scheme(const std::string& v) {
    if (v == "bdf2") return TimeScheme::BDF2;
    if (v == "backward_euler") return TimeScheme::BackwardEuler;
    throw Error(ErrorCode::InvalidConfig, "unknown time scheme '" + v + "'");
}
inline std::string scheme_name(TimeScheme s) { return s == TimeScheme::BDF2 ? "bdf2" : "backward_euler"; }

inline LinearSolverKind parse_solver(const std::string& v) {
    if (v == "sparse_lu") return LinearSolverKind::SparseLU;
    if (v == "bicgstab") return LinearSolverKind::BiCGSTAB;
    throw Error(ErrorCode::InvalidConfig, "unknown linear solver '" + v + "'");
}
inline std::string solver_name(LinearSolverKind s) { return s == LinearSolverKind::SparseLU ? "sparse_lu" : "bicgstab"; }

inline AdvectionForm parse_advection(const std::string& v) {
    if (v == "nonconservative") return AdvectionForm::NonConservative;
    if (v == "conservative") return AdvectionForm::Conservative;
    throw Error(ErrorCode::InvalidConfig, "unknown advection form '" + v + "'");
}
inline std::string advection_name(AdvectionForm a) {
    return a == AdvectionForm::NonConservative ? "nonconservative" : "conservative";
}

} // namespace detail

/// Sets one qualified key. Throws INVALID_CONFIG for unknown keys or bad values.
inline void set_config_value(RunConfig& c, const std::string& key, const std::string& v) {
    using namespace detail;
    auto real = [&] { return parse_real(key, v); };
    auto integer = [&] { return static_cast<int>(parse_integer(key, v)); };

    if (key == "domain.a") c.domain.a = real();
    else if (key == "domain.b") c.domain.b = real();
    else if (key == "domain.c2") c.domain.c2 = real();
    else if (key == "domain.d2") c.domain.d2 = real();
    else if (key == "domain.T") c.domain.T = real();
    else if (key == "domain.gradient_floor") c.domain.gradient_floor = real();
    else if (key == "grid.coarse_space") c.coarse_space = integer();
    else if (key == "grid.coarse_time") c.coarse_time = integer();
    else if (key == "grid.fine_space") c.fine_space = integer();
    else if (key == "grid.fine_time") c.fine_time = integer();
    else if (key == "phantom.shape") c.phantom = v;
    else if (key == "phantom.contrast") c.contrast = real();
    else if (key == "phantom.smoothing_passes") c.smoothing_passes = integer();
    else if (key == "kernel.name") c.kernel = v;
    else if (key == "kernel.sigma") c.sigma = real();
    else if (key == "forward.scheme") c.scheme = parse_scheme(v);
    else if (key == "forward.solver") c.solver = parse_solver(v);
    else if (key == "forward.advection") c.advection = parse_advection(v);
    else if (key == "forward.positivity_floor") c.positivity_floor = real();
    else if (key == "carleman.lambda") c.carleman.lambda = real();
    else if (key == "carleman.beta") c.carleman.beta = real();
    else if (key == "minimizer.method") c.minimizer.method = parse_descent_method(v);
    else if (key == "minimizer.step") c.minimizer.step = real();
    else if (key == "minimizer.max_iterations") c.minimizer.max_iterations = integer();
    else if (key == "minimizer.gradient_tolerance") c.minimizer.gradient_tolerance = real();
    else if (key == "minimizer.backtracking") c.minimizer.backtracking = parse_bool(key, v);
    else if (key == "minimizer.step_growth") c.minimizer.step_growth = parse_bool(key, v);
    else if (key == "minimizer.memory") c.minimizer.memory = integer();
    else if (key == "minimizer.preconditioned") c.minimizer.preconditioned = parse_bool(key, v);
    else if (key == "ball.radius") c.minimizer.ball_radius = real();
    else if (key == "noise.delta") c.noise.delta = real();
    else if (key == "noise.seed") c.noise.seed = static_cast<std::uint64_t>(parse_integer(key, v));
    else if (key == "io.dataset") c.dataset = v;
    else if (key == "io.out") c.out = v;
    else throw Error(ErrorCode::InvalidConfig, "unknown configuration key '" + key + "'");
}

inline std::string RunConfig::canonical() const {
    using namespace detail;
    std::ostringstream os;
    auto put = [&](const char* k, const std::string& v) { os << k << " = " << v << '\n'; };
    auto num = [&](const char* k, double v) { put(k, format_double(v)); };
    num("domain.a", domain.a);
    num("domain.b", domain.b);
    num("domain.c2", domain.c2);
    num("domain.d2", domain.d2);
    num("domain.T", domain.T);
    num("domain.gradient_floor", domain.gradient_floor);
    put("grid.coarse_space", std::to_string(coarse_space));
    put("grid.coarse_time", std::to_string(coarse_time));
    put("grid.fine_space", std::to_string(fine_space));
    put("grid.fine_time", std::to_string(fine_time));
    put("phantom.shape", phantom);
    num("phantom.contrast", contrast);
    put("phantom.smoothing_passes", std::to_string(smoothing_passes));
    put("kernel.name", kernel);
    num("kernel.sigma", sigma);
    put("forward.scheme", scheme_name(scheme));
    put("forward.solver", solver_name(solver));
    put("forward.advection", advection_name(advection));
    num("forward.positivity_floor", positivity_floor);
    num("carleman.lambda", carleman.lambda);
    num("carleman.beta", carleman.beta);
    put("minimizer.method", to_string(minimizer.method));
    num("minimizer.step", minimizer.step);
    put("minimizer.max_iterations", std::to_string(minimizer.max_iterations));
    num("minimizer.gradient_tolerance", minimizer.gradient_tolerance);
    put("minimizer.backtracking", minimizer.backtracking ? "true" : "false");
    put("minimizer.step_growth", minimizer.step_growth ? "true" : "false");
    put("minimizer.memory", std::to_string(minimizer.memory));
    put("minimizer.preconditioned", minimizer.preconditioned ? "true" : "false");
    num("ball.radius", minimizer.ball_radius);
    num("noise.delta", noise.delta);
    put("noise.seed", std::to_string(noise.seed));
    put("io.dataset", dataset);
    put("io.out", out);
    return os.str();
}

/// Parses configuration text on top of `base` (defaults when omitted).
inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            require(line.back() == ']', ErrorCode::InvalidConfig,
                    "line " + std::to_string(lineno) + ": malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        require(eq != std::string::npos, ErrorCode::InvalidConfig,
                "line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const std::string full = section.empty() ? key : section + "." + key;
        set_config_value(base, full, value);
    }
    base.validate();
    return base;
}

inline RunConfig load_config(const std::filesystem::path& p) {
    std::ifstream is(p);
    require(static_cast<bool>(is), ErrorCode::MissingData, "cannot open configuration " + p.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

} // namespace mfgcip
