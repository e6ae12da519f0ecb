#pragma once

// Problem configuration: the domain, the global-interaction kernels and their
// discrete convolution, phantom coefficients built from letter masks, and the
// closed-form value function used to manufacture data.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "mfgcip/error.hpp"
#include "mfgcip/grid.hpp"

namespace mfgcip {

/// Rectangle (a,b) x (c2,d2), horizon T, and the floor c of |grad u0|^2.
struct DomainSpec {
    double a = 1.0;
    double b = 2.0;
    double c2 = 1.0;
    double d2 = 2.0;
    double T = 1.0;
    double gradient_floor = 1.0;

    void validate() const {
        require(a < b && c2 < d2, ErrorCode::InvalidConfig, "domain requires a<b and c2<d2");
        require(T > 0.0, ErrorCode::InvalidConfig, "horizon T must be positive");
        require(gradient_floor > 0.0, ErrorCode::InvalidConfig, "gradient floor c must be positive");
    }

    SpaceTimeGrid grid(int n1, int n2, int nt) const {
        return SpaceTimeGrid::make(a, b, c2, d2, T, n1, n2, nt);
    }
};

// ---------------------------------------------------------------------------
// Kernels

/// K == 0. Useful to switch the global interaction off.
struct ZeroKernel {};

/// K(x,y) = delta(x1 - y1) exp(-(x2 - y2)^2 / sigma^2). The delta factor
/// collapses the y1 integral, leaving a 1-D Gaussian convolution in x2.
struct DeltaGaussianKernel {
    double sigma = 0.2;
};

/// K(x,y) = H(y1 - x1) Y2(x, y) with a bounded factor Y2.
struct HeavisideProductKernel {
    std::function<double(double x1, double x2, double y1, double y2)> factor;
    double bound = 1.0;
};

using Kernel = std::variant<ZeroKernel, DeltaGaussianKernel, HeavisideProductKernel>;

inline Kernel make_kernel(const std::string& name, double sigma) {
    if (name == "zero") return ZeroKernel{};
    if (name == "delta_gaussian") {
        require(sigma > 0.0, ErrorCode::InvalidConfig, "kernel sigma must be positive");
        return DeltaGaussianKernel{sigma};
    }
    if (name == "heaviside") {
        return HeavisideProductKernel{[](double, double, double, double) { return 1.0; }, 1.0};
    }
    throw Error(ErrorCode::UnknownKernel, "unknown kernel variant '" + name + "'");
}

inline std::string kernel_name(const Kernel& k) {
    switch (k.index()) {
    case 0: return "zero";
    case 1: return "delta_gaussian";
    default: return "heaviside";
    }
}

/// Trapezoidal discretisation of the global interaction integral on one grid.
class KernelOperator {
public:
    KernelOperator(const Kernel& kernel, const SpaceTimeGrid& grid) : grid_(grid), kernel_(kernel) {
        if (const auto* dg = std::get_if<DeltaGaussianKernel>(&kernel_)) {
            require(dg->sigma > 0.0, ErrorCode::InvalidConfig, "kernel sigma must be positive");
            const int N = grid.n2 + 1;
            gauss_.assign(static_cast<std::size_t>(N * N), 0.0);
            const double s2 = dg->sigma * dg->sigma;
            for (int j = 0; j < N; ++j)
                for (int jp = 0; jp < N; ++jp) {
                    const double d = grid.x2(j) - grid.x2(jp);
                    gauss_[static_cast<std::size_t>(j * N + jp)] =
                        std::exp(-d * d / s2) * trapezoid_weight(jp, grid.n2, grid.h2());
                }
        } else if (const auto* hp = std::get_if<HeavisideProductKernel>(&kernel_)) {
            require(static_cast<bool>(hp->factor), ErrorCode::InvalidConfig,
                    "heaviside kernel needs a factor Y2");
            const std::size_t S = grid.spatial_size();
            // Tabulate K * weights when it fits comfortably in memory.
            if (S * S <= 4'000'000) {
                table_.assign(S * S, 0.0);
                for (int j = 0; j <= grid.n2; ++j)
                    for (int i = 0; i <= grid.n1; ++i) {
                        const std::size_t row = grid.index(i, j) * S;
                        for (int jp = 0; jp <= grid.n2; ++jp)
                            for (int ip = i; ip <= grid.n1; ++ip)
                                table_[row + grid.index(ip, jp)] = heaviside_entry(*hp, i, j, ip, jp);
                    }
            }
        }
    }

    const SpaceTimeGrid& grid() const { return grid_; }
    const Kernel& kernel() const { return kernel_; }
    bool is_zero() const { return std::holds_alternative<ZeroKernel>(kernel_); }

    SpatialField apply(const SpatialField& m) const {
        SpatialField out(grid_);
        apply_slice(m.values().data(), out.values().data(), false);
        return out;
    }

    ScalarField apply(const ScalarField& m) const {
        ScalarField out(grid_);
        const std::size_t S = grid_.spatial_size();
        for (int n = 0; n <= grid_.nt; ++n)
            apply_slice(m.values().data() + n * S, out.values().data() + n * S, false);
        return out;
    }

    ScalarField apply_transpose(const ScalarField& m) const {
        ScalarField out(grid_);
        const std::size_t S = grid_.spatial_size();
        for (int n = 0; n <= grid_.nt; ++n)
            apply_slice(m.values().data() + n * S, out.values().data() + n * S, true);
        return out;
    }

private:
    double heaviside_entry(const HeavisideProductKernel& hp, int i, int j, int ip, int jp) const {
        const double y = hp.factor(grid_.x1(i), grid_.x2(j), grid_.x1(ip), grid_.x2(jp));
        require(std::abs(y) <= hp.bound * (1.0 + 1e-12), ErrorCode::InvalidConfig,
                "heaviside kernel factor exceeds its bound M");
        // Trapezoid over [x1_i, b] uses nodes i..n1 with half weights at both ends.
        const int cells = grid_.n1 - i;
        if (cells == 0) return 0.0;
        const double w1 = (ip == i || ip == grid_.n1) ? 0.5 * grid_.h1() : grid_.h1();
        return y * w1 * trapezoid_weight(jp, grid_.n2, grid_.h2());
    }

    void apply_slice(const double* in, double* out, bool transpose) const {
        const std::size_t S = grid_.spatial_size();
        if (std::holds_alternative<ZeroKernel>(kernel_)) {
            std::fill(out, out + S, 0.0);
            return;
        }
        if (std::holds_alternative<DeltaGaussianKernel>(kernel_)) {
            const int N1 = grid_.n1 + 1;
            const int N2 = grid_.n2 + 1;
            std::fill(out, out + S, 0.0);
            for (int j = 0; j < N2; ++j)
                for (int jp = 0; jp < N2; ++jp) {
                    const double g = transpose ? gauss_[static_cast<std::size_t>(jp * N2 + j)]
                                               : gauss_[static_cast<std::size_t>(j * N2 + jp)];
                    const double* src = in + static_cast<std::size_t>(jp * N1);
                    double* dst = out + static_cast<std::size_t>(j * N1);
                    for (int i = 0; i < N1; ++i) dst[i] += g * src[i];
                }
            return;
        }
        const auto& hp = std::get<HeavisideProductKernel>(kernel_);
        std::fill(out, out + S, 0.0);
        for (int j = 0; j <= grid_.n2; ++j)
            for (int i = 0; i <= grid_.n1; ++i) {
                const std::size_t r = grid_.index(i, j);
                for (int jp = 0; jp <= grid_.n2; ++jp)
                    for (int ip = i; ip <= grid_.n1; ++ip) {
                        const std::size_t c = grid_.index(ip, jp);
                        const double e = table_.empty() ? heaviside_entry(hp, i, j, ip, jp)
                                                        : table_[r * S + c];
                        if (transpose)
                            out[c] += e * in[r];
                        else
                            out[r] += e * in[c];
                    }
            }
    }

    SpaceTimeGrid grid_;
    Kernel kernel_;
    std::vector<double> gauss_;
    std::vector<double> table_;
};

/// One-shot convolution of m with the kernel on m's grid.
inline ScalarField kernel_apply(const Kernel& kernel, const ScalarField& m) {
    return KernelOperator(kernel, m.grid()).apply(m);
}

// ---------------------------------------------------------------------------
// Masks and phantoms

/// Binary image over the domain; row 0 is the top scan line (largest x2).
class Bitmap {
public:
    Bitmap() = default;
    Bitmap(int rows, int cols) : rows_(rows), cols_(cols), bits_(static_cast<std::size_t>(rows * cols), 0) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool at(int r, int c) const { return bits_[static_cast<std::size_t>(r * cols_ + c)] != 0; }
    void set(int r, int c, bool v) { bits_[static_cast<std::size_t>(r * cols_ + c)] = v ? 1 : 0; }
    std::size_t count() const {
        std::size_t n = 0;
        for (auto b : bits_) n += b;
        return n;
    }

    /// Membership of a point in normalised coordinates (u,v) in [0,1]^2.
    bool contains_unit(double u, double v) const {
        if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0 || rows_ == 0) return false;
        const int c = std::min(cols_ - 1, static_cast<int>(u * cols_));
        const int r = std::min(rows_ - 1, static_cast<int>((1.0 - v) * rows_));
        return at(r, c);
    }

    /// Plain-text form: one line per row, characters '0' and '1'.
    std::string to_text() const {
        std::string s;
        for (int r = 0; r < rows_; ++r) {
            for (int c = 0; c < cols_; ++c) s.push_back(at(r, c) ? '1' : '0');
            s.push_back('\n');
        }
        return s;
    }

    static Bitmap from_text(const std::string& text) {
        std::vector<std::string> lines;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            lines.push_back(line);
        }
        require(!lines.empty(), ErrorCode::InvalidConfig, "mask bitmap is empty");
        Bitmap bm(static_cast<int>(lines.size()), static_cast<int>(lines[0].size()));
        for (int r = 0; r < bm.rows_; ++r) {
            const auto& l = lines[static_cast<std::size_t>(r)];
            require(static_cast<int>(l.size()) == bm.cols_, ErrorCode::InvalidConfig,
                    "mask bitmap rows must have equal length");
            for (int c = 0; c < bm.cols_; ++c) {
                require(l[static_cast<std::size_t>(c)] == '0' || l[static_cast<std::size_t>(c)] == '1',
                        ErrorCode::InvalidConfig, "mask bitmap may contain only '0' and '1'");
                bm.set(r, c, l[static_cast<std::size_t>(c)] == '1');
            }
        }
        return bm;
    }

    static Bitmap load(const std::string& path) {
        std::ifstream f(path);
        require(f.good(), ErrorCode::Io, "cannot open mask file '" + path + "'");
        std::stringstream ss;
        ss << f.rdbuf();
        return from_text(ss.str());
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Stroke primitives in the unit square used to draw the letter inclusions.
struct Segment {
    double u0, v0, u1, v1;
};
struct Arc {
    double cu, cv, radius;
    double from_deg, to_deg;  // swept counter-clockwise from `from` to `to`
};
struct StrokeShape {
    std::vector<Segment> segments;
    std::vector<Arc> arcs;
    double thickness = 0.12;

    double distance(double u, double v) const {
        double d = 1e300;
        for (const auto& s : segments) {
            const double dx = s.u1 - s.u0, dy = s.v1 - s.v0;
            const double len2 = dx * dx + dy * dy;
            double tt = len2 > 0 ? ((u - s.u0) * dx + (v - s.v0) * dy) / len2 : 0.0;
            tt = std::clamp(tt, 0.0, 1.0);
            d = std::min(d, std::hypot(u - s.u0 - tt * dx, v - s.v0 - tt * dy));
        }
        for (const auto& a : arcs) {
            const double ang = std::atan2(v - a.cv, u - a.cu) * 180.0 / std::numbers::pi;
            const double sweep = a.to_deg - a.from_deg;
            const double rel = std::fmod(std::fmod(ang - a.from_deg, 360.0) + 360.0, 360.0);
            if (rel <= sweep) {
                d = std::min(d, std::abs(std::hypot(u - a.cu, v - a.cv) - a.radius));
            } else {
                for (double deg : {a.from_deg, a.to_deg}) {
                    const double r = deg * std::numbers::pi / 180.0;
                    d = std::min(d, std::hypot(u - a.cu - a.radius * std::cos(r),
                                               v - a.cv - a.radius * std::sin(r)));
                }
            }
        }
        return d;
    }

    Bitmap rasterize(int resolution) const {
        Bitmap bm(resolution, resolution);
        for (int r = 0; r < resolution; ++r)
            for (int c = 0; c < resolution; ++c) {
                const double u = (c + 0.5) / resolution;
                const double v = 1.0 - (r + 0.5) / resolution;
                bm.set(r, c, distance(u, v) <= 0.5 * thickness);
            }
        return bm;
    }
};

enum class LetterShape { A, Omega, SZ };

/// Resolution of the built-in letter bitmaps.
inline constexpr int kLetterResolution = 64;

inline StrokeShape letter_strokes(LetterShape shape) {
    StrokeShape s;
    switch (shape) {
    case LetterShape::A:
        s.thickness = 0.13;
        s.segments = {{0.20, 0.16, 0.50, 0.84}, {0.80, 0.16, 0.50, 0.84}, {0.34, 0.44, 0.66, 0.44}};
        break;
    case LetterShape::Omega:
        s.thickness = 0.11;
        s.arcs = {{0.50, 0.56, 0.25, -50.0, 230.0}};
        s.segments = {{0.661, 0.368, 0.60, 0.20}, {0.339, 0.368, 0.40, 0.20},
                      {0.60, 0.20, 0.80, 0.20},   {0.40, 0.20, 0.20, 0.20}};
        break;
    case LetterShape::SZ:
        s.thickness = 0.10;
        // S: upper bowl opening right-down, lower bowl opening left-up.
        s.arcs = {{0.25, 0.635, 0.135, 30.0, 270.0}, {0.25, 0.365, 0.135, -150.0, 90.0}};
        // Z
        s.segments = {{0.60, 0.78, 0.92, 0.78}, {0.92, 0.78, 0.60, 0.22}, {0.60, 0.22, 0.92, 0.22}};
        break;
    }
    return s;
}

inline Bitmap letter_bitmap(LetterShape shape) {
    return letter_strokes(shape).rasterize(kLetterResolution);
}

inline std::string letter_name(LetterShape s) {
    switch (s) {
    case LetterShape::A: return "A";
    case LetterShape::Omega: return "Omega";
    case LetterShape::SZ: return "SZ";
    }
    return "?";
}

inline LetterShape parse_letter(const std::string& name) {
    if (name == "A") return LetterShape::A;
    if (name == "Omega" || name == "omega") return LetterShape::Omega;
    if (name == "SZ" || name == "sz") return LetterShape::SZ;
    throw Error(ErrorCode::InvalidConfig, "unknown phantom shape '" + name + "'");
}

/// Piecewise-constant coefficient: `contrast` inside the mask, `background`
/// outside, blurred by `smoothing_passes` applications of the 3x3 binomial
/// filter so the discrete field has bounded second differences.
struct Phantom {
    std::string name = "A";
    std::function<bool(double x1, double x2)> inside;
    double contrast = 2.0;
    double background = 1.0;
    int smoothing_passes = 2;

    void validate() const {
        require(static_cast<bool>(inside), ErrorCode::InvalidConfig, "phantom has no mask");
        require(contrast >= 1.0, ErrorCode::InvalidConfig, "phantom contrast must be >= 1");
        require(smoothing_passes >= 0, ErrorCode::InvalidConfig, "smoothing passes must be >= 0");
    }
};

inline Phantom phantom_from_bitmap(std::string name, Bitmap bm, const DomainSpec& dom, double contrast,
                                   int smoothing_passes = 2) {
    Phantom p;
    p.name = std::move(name);
    p.contrast = contrast;
    p.smoothing_passes = smoothing_passes;
    p.inside = [bm = std::move(bm), dom](double x1, double x2) {
        return bm.contains_unit((x1 - dom.a) / (dom.b - dom.a), (x2 - dom.c2) / (dom.d2 - dom.c2));
    };
    return p;
}

inline Phantom letter_phantom(LetterShape shape, const DomainSpec& dom, double contrast,
                              int smoothing_passes = 2) {
    return phantom_from_bitmap(letter_name(shape), letter_bitmap(shape), dom, contrast, smoothing_passes);
}

inline Phantom empty_phantom(double contrast = 2.0) {
    Phantom p;
    p.name = "empty";
    p.contrast = contrast;
    p.inside = [](double, double) { return false; };
    return p;
}

/// Node-wise 0/1 indicator of the phantom's inclusion on a grid.
inline SpatialField phantom_mask(const Phantom& ph, const SpaceTimeGrid& g) {
    ph.validate();
    SpatialField m(g);
    for (int j = 0; j <= g.n2; ++j)
        for (int i = 0; i <= g.n1; ++i) {
            const bool in = ph.inside(g.x1(i), g.x2(j));
            if (in && g.is_boundary(i, j))
                throw Error(ErrorCode::MaskTouchesBoundary,
                            "phantom '" + ph.name + "' touches the boundary at node (" +
                                std::to_string(i) + "," + std::to_string(j) + ")");
            m(i, j) = in ? 1.0 : 0.0;
        }
    return m;
}

/// Target coefficient on a grid.
inline SpatialField rasterize_phantom(const Phantom& ph, const SpaceTimeGrid& g) {
    const SpatialField mask = phantom_mask(ph, g);
    SpatialField k(g);
    for (std::size_t s = 0; s < k.size(); ++s)
        k.values()[s] = ph.background + (ph.contrast - ph.background) * mask.values()[s];
    static constexpr double w[3] = {0.25, 0.5, 0.25};
    for (int pass = 0; pass < ph.smoothing_passes; ++pass) {
        SpatialField next = k;
        for (int j = 1; j < g.n2; ++j)
            for (int i = 1; i < g.n1; ++i) {
                double acc = 0.0;
                for (int dj = -1; dj <= 1; ++dj)
                    for (int di = -1; di <= 1; ++di) acc += w[di + 1] * w[dj + 1] * k(i + di, j + dj);
                next(i, j) = acc;
            }
        k = std::move(next);
    }
    return k;
}

// ---------------------------------------------------------------------------
// Closed-form value function

/// A value function u(x,t) known in closed form together with the
/// derivatives the data generator needs.
struct AnalyticValueFunction {
    using Fn = std::function<double(double, double, double)>;
    Fn u, ut, utt, ux1, ux2, lap, ux1t, ux2t, ux1tt;

    /// u = x1^2 x2^2 (1 + t).
    static AnalyticValueFunction product_quadratic() {
        AnalyticValueFunction f;
        f.u = [](double x1, double x2, double t) { return x1 * x1 * x2 * x2 * (1.0 + t); };
        f.ut = [](double x1, double x2, double) { return x1 * x1 * x2 * x2; };
        f.utt = [](double, double, double) { return 0.0; };
        f.ux1 = [](double x1, double x2, double t) { return 2.0 * x1 * x2 * x2 * (1.0 + t); };
        f.ux2 = [](double x1, double x2, double t) { return 2.0 * x1 * x1 * x2 * (1.0 + t); };
        f.lap = [](double x1, double x2, double t) { return 2.0 * (x1 * x1 + x2 * x2) * (1.0 + t); };
        f.ux1t = [](double x1, double x2, double) { return 2.0 * x1 * x2 * x2; };
        f.ux2t = [](double x1, double x2, double) { return 2.0 * x1 * x1 * x2; };
        f.ux1tt = [](double, double, double) { return 0.0; };
        return f;
    }

    double grad_sq(double x1, double x2, double t) const {
        const double a = ux1(x1, x2, t), b = ux2(x1, x2, t);
        return a * a + b * b;
    }
};

/// Exact nodal samples of an analytic value function and its derivatives.
struct ValueFields {
    ScalarField u, ut, utt, ux1, ux2, lap;
};

inline ValueFields analytic_value_fields(const AnalyticValueFunction& f, const SpaceTimeGrid& g) {
    return {ScalarField::from_function(g, f.u),   ScalarField::from_function(g, f.ut),
            ScalarField::from_function(g, f.utt), ScalarField::from_function(g, f.ux1),
            ScalarField::from_function(g, f.ux2), ScalarField::from_function(g, f.lap)};
}

} // namespace mfgcip
