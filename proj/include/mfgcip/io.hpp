#pragma once

// Plain-file persistence: binary field files, dataset directories with a
// text manifest, CSV matrices and 16-bit portable graymaps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mfgcip/error.hpp"
#include "mfgcip/forward.hpp"
#include "mfgcip/grid.hpp"
#include "mfgcip/problem.hpp"

namespace mfgcip {

inline constexpr const char* kCodeVersion = "1.0.0";
inline constexpr const char* kDatasetSchema = "mfgcip-dataset/1";

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

/// Shortest text that parses back to exactly the same double.
inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

namespace io {

inline constexpr char kMagic[8] = {'M', 'F', 'G', 'C', 'I', 'P', 'F', '1'};

inline void write_values(const std::filesystem::path& p, std::span<const double> v) {
    std::ofstream os(p, std::ios::binary);
    require(static_cast<bool>(os), ErrorCode::Io, "cannot write " + p.string());
    const std::uint64_t n = v.size();
    os.write(kMagic, sizeof kMagic);
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    require(static_cast<bool>(os), ErrorCode::Io, "write failed for " + p.string());
}

inline std::vector<double> read_values(const std::filesystem::path& p, std::size_t expected) {
    std::ifstream is(p, std::ios::binary);
    require(static_cast<bool>(is), ErrorCode::MissingData, "cannot open " + p.string());
    char magic[8];
    std::uint64_t n = 0;
    is.read(magic, sizeof magic);
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    require(static_cast<bool>(is) && std::memcmp(magic, kMagic, sizeof magic) == 0, ErrorCode::Io,
            p.string() + " is not a field file");
    require(n == expected, ErrorCode::DatasetMismatch,
            p.string() + " holds " + std::to_string(n) + " values, expected " + std::to_string(expected));
    std::vector<double> v(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    require(static_cast<bool>(is), ErrorCode::Io, "truncated field file " + p.string());
    return v;
}

template <class Field>
void write_field(const std::filesystem::path& p, const Field& f) {
    write_values(p, f.values());
}

template <class Field>
Field read_field(const std::filesystem::path& p, const SpaceTimeGrid& g) {
    Field f(g);
    const auto v = read_values(p, f.size());
    std::copy(v.begin(), v.end(), f.values().begin());
    return f;
}

inline void write_trace(const std::filesystem::path& p, const Trace& t) { write_values(p, t.values()); }

inline Trace read_trace(const std::filesystem::path& p, Trace shape) {
    const auto v = read_values(p, shape.values().size());
    std::copy(v.begin(), v.end(), shape.values().begin());
    return shape;
}

} // namespace io

/// Flat key/value text: `key: value` per line, '#' comments.
class Manifest {
public:
    void set(const std::string& k, const std::string& v) {
        if (!entries_.count(k)) order_.push_back(k);
        entries_[k] = v;
    }
    void set(const std::string& k, double v) { set(k, format_double(v)); }
    void set(const std::string& k, int v) { set(k, std::to_string(v)); }
    void set(const std::string& k, std::uint64_t v) { set(k, std::to_string(v)); }

    bool has(const std::string& k) const { return entries_.count(k) != 0; }
    const std::string& get(const std::string& k) const {
        const auto it = entries_.find(k);
        require(it != entries_.end(), ErrorCode::MissingData, "manifest has no key '" + k + "'");
        return it->second;
    }
    double get_double(const std::string& k) const { return std::stod(get(k)); }
    int get_int(const std::string& k) const { return std::stoi(get(k)); }

    std::string text() const {
        std::ostringstream os;
        for (const auto& k : order_) os << k << ": " << entries_.at(k) << '\n';
        return os.str();
    }

    static Manifest parse(const std::string& text) {
        Manifest m;
        std::istringstream is(text);
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            const auto c = line.find(':');
            require(c != std::string::npos, ErrorCode::Io, "malformed manifest line '" + line + "'");
            std::string v = line.substr(c + 1);
            v.erase(0, v.find_first_not_of(' '));
            m.set(line.substr(0, c), v);
        }
        return m;
    }

    void save(const std::filesystem::path& p) const {
        std::ofstream os(p);
        require(static_cast<bool>(os), ErrorCode::Io, "cannot write " + p.string());
        os << text();
    }
    static Manifest load(const std::filesystem::path& p) {
        std::ifstream is(p);
        require(static_cast<bool>(is), ErrorCode::MissingData, "cannot open " + p.string());
        std::stringstream ss;
        ss << is.rdbuf();
        return parse(ss.str());
    }

private:
    std::vector<std::string> order_;
    std::map<std::string, std::string> entries_;
};

inline std::string grid_text(const SpaceTimeGrid& g) {
    std::ostringstream os;
    os << format_double(g.a) << ' ' << format_double(g.b) << ' ' << format_double(g.c2) << ' '
       << format_double(g.d2) << ' ' << format_double(g.T) << ' ' << g.n1 << ' ' << g.n2 << ' ' << g.nt;
    return os.str();
}

inline SpaceTimeGrid parse_grid(const std::string& s) {
    std::istringstream is(s);
    SpaceTimeGrid g;
    is >> g.a >> g.b >> g.c2 >> g.d2 >> g.T >> g.n1 >> g.n2 >> g.nt;
    require(static_cast<bool>(is), ErrorCode::Io, "malformed grid description '" + s + "'");
    g.validate();
    return g;
}

namespace detail {
inline const char* const kComponentNames[4] = {"v", "w", "p", "q"};
}

/// Writes a dataset directory. `extra` entries (config hash, seed, ...) are
/// appended to the manifest.
inline void write_dataset(const std::filesystem::path& dir, const SyntheticDataset& ds, const Manifest& extra) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
    const ProblemData& d = ds.data;
    Manifest m;
    m.set("schema", kDatasetSchema);
    m.set("code_version", kCodeVersion);
    m.set("grid", grid_text(d.grid));
    m.set("kernel", kernel_name(d.kernel));
    if (const auto* dg = std::get_if<DeltaGaussianKernel>(&d.kernel)) m.set("sigma", dg->sigma);
    m.set("gradient_floor", d.gradient_floor);
    m.set("contrast", ds.truth.contrast);
    m.set("min_density", ds.min_density);
    m.set("max_density", ds.max_density);
    std::istringstream ex(extra.text());
    for (std::string line; std::getline(ex, line);) {
        const auto c = line.find(':');
        m.set(line.substr(0, c), line.substr(c + 2));
    }
    m.save(dir / "manifest.txt");

    io::write_field(dir / "u0.bin", d.u0);
    io::write_field(dir / "m0.bin", d.m0);
    io::write_field(dir / "F.bin", d.F);
    io::write_field(dir / "f.bin", d.f);
    io::write_field(dir / "ft.bin", d.ft);
    io::write_field(dir / "ftt.bin", d.ftt);
    io::write_trace(dir / "g0.bin", d.g0);
    io::write_trace(dir / "p0.bin", d.p0);
    io::write_trace(dir / "g1.bin", d.g1);
    io::write_trace(dir / "p1.bin", d.p1);
    for (int c = 0; c < 4; ++c) {
        const std::string n = detail::kComponentNames[c];
        io::write_trace(dir / ("dirichlet_" + n + ".bin"), d.dirichlet[static_cast<std::size_t>(c)]);
        io::write_trace(dir / ("neumann_" + n + ".bin"), d.neumann[static_cast<std::size_t>(c)]);
        io::write_field(dir / ("truth_" + n + ".bin"), ds.truth.exact[static_cast<std::size_t>(c)]);
    }
    io::write_field(dir / "truth_k.bin", ds.truth.k);
    io::write_field(dir / "truth_mask.bin", ds.truth.mask);
}

struct LoadedDataset {
    SyntheticDataset dataset;
    Manifest manifest;
};

inline LoadedDataset read_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    require(fs::is_directory(dir), ErrorCode::MissingData, "dataset directory " + dir.string() + " does not exist");
    LoadedDataset out;
    out.manifest = Manifest::load(dir / "manifest.txt");
    const Manifest& m = out.manifest;
    require(m.get("schema") == kDatasetSchema, ErrorCode::DatasetMismatch,
            "unsupported dataset schema '" + m.get("schema") + "'");
    SyntheticDataset& ds = out.dataset;
    ProblemData& d = ds.data;
    const SpaceTimeGrid g = parse_grid(m.get("grid"));
    d.grid = g;
    d.kernel = make_kernel(m.get("kernel"), m.has("sigma") ? m.get_double("sigma") : 0.2);
    d.gradient_floor = m.get_double("gradient_floor");
    d.u0 = io::read_field<SpatialField>(dir / "u0.bin", g);
    d.m0 = io::read_field<SpatialField>(dir / "m0.bin", g);
    d.F = io::read_field<SpatialField>(dir / "F.bin", g);
    d.f = io::read_field<ScalarField>(dir / "f.bin", g);
    d.ft = io::read_field<ScalarField>(dir / "ft.bin", g);
    d.ftt = io::read_field<ScalarField>(dir / "ftt.bin", g);
    const Trace lat = Trace::lateral(g), right = Trace::right_edge(g);
    d.g0 = io::read_trace(dir / "g0.bin", lat);
    d.p0 = io::read_trace(dir / "p0.bin", lat);
    d.g1 = io::read_trace(dir / "g1.bin", right);
    d.p1 = io::read_trace(dir / "p1.bin", right);
    for (int c = 0; c < 4; ++c) {
        const std::string n = detail::kComponentNames[c];
        d.dirichlet[static_cast<std::size_t>(c)] = io::read_trace(dir / ("dirichlet_" + n + ".bin"), lat);
        d.neumann[static_cast<std::size_t>(c)] = io::read_trace(dir / ("neumann_" + n + ".bin"), right);
        ds.truth.exact[static_cast<std::size_t>(c)] = io::read_field<ScalarField>(dir / ("truth_" + n + ".bin"), g);
    }
    ds.truth.k = io::read_field<SpatialField>(dir / "truth_k.bin", g);
    ds.truth.mask = io::read_field<SpatialField>(dir / "truth_mask.bin", g);
    ds.truth.contrast = m.get_double("contrast");
    ds.min_density = m.get_double("min_density");
    ds.max_density = m.get_double("max_density");
    d.validate();
    return out;
}

// ---------------------------------------------------------------------------
// Matrices and images

/// CSV matrix of a spatial field: one line per x2 scan line, from x2 = c2
/// upward; each line lists x1 = a .. b.
inline std::string field_csv(const SpatialField& f) {
    const SpaceTimeGrid& g = f.grid();
    std::ostringstream os;
    for (int j = 0; j <= g.n2; ++j) {
        for (int i = 0; i <= g.n1; ++i) os << (i ? "," : "") << format_double(f(i, j));
        os << '\n';
    }
    return os.str();
}

inline SpatialField parse_field_csv(const std::string& text, const SpaceTimeGrid& g) {
    SpatialField f(g);
    std::istringstream is(text);
    std::string line;
    int j = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        require(j <= g.n2, ErrorCode::DatasetMismatch, "CSV has more rows than the grid");
        std::istringstream ls(line);
        std::string cell;
        int i = 0;
        while (std::getline(ls, cell, ',')) {
            require(i <= g.n1, ErrorCode::DatasetMismatch, "CSV row " + std::to_string(j) + " is too long");
            f(i++, j) = std::stod(cell);
        }
        require(i == g.n1 + 1, ErrorCode::DatasetMismatch, "CSV row " + std::to_string(j) + " is too short");
        ++j;
    }
    require(j == g.n2 + 1, ErrorCode::DatasetMismatch, "CSV has too few rows");
    return f;
}

/// Gray level of a coefficient value: round(1000 k) clamped to [0, 65535].
inline std::uint16_t gray_level(double k) {
    const double g = std::round(1000.0 * k);
    return static_cast<std::uint16_t>(std::clamp(g, 0.0, 65535.0));
}

/// Binary 16-bit PGM (big-endian samples). The top image row is x2 = d2.
inline std::string field_pgm(const SpatialField& f) {
    const SpaceTimeGrid& g = f.grid();
    std::ostringstream os;
    os << "P5\n# gray = round(1000*k), clamped to [0,65535]; top row is x2 = d2\n"
       << (g.n1 + 1) << ' ' << (g.n2 + 1) << "\n65535\n";
    for (int j = g.n2; j >= 0; --j)
        for (int i = 0; i <= g.n1; ++i) {
            const std::uint16_t v = gray_level(f(i, j));
            os.put(static_cast<char>(v >> 8));
            os.put(static_cast<char>(v & 0xff));
        }
    return os.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream os(p, std::ios::binary);
    require(static_cast<bool>(os), ErrorCode::Io, "cannot write " + p.string());
    os << s;
    require(static_cast<bool>(os), ErrorCode::Io, "write failed for " + p.string());
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    require(static_cast<bool>(is), ErrorCode::MissingData, "cannot open " + p.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace mfgcip
