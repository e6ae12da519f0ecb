#pragma once

// The command implementations behind the `mfgcip` tool. Each command takes a
// validated RunConfig and writes its results under an output directory.

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "mfgcip/config.hpp"
#include "mfgcip/error.hpp"
#include "mfgcip/experiments.hpp"
#include "mfgcip/forward.hpp"
#include "mfgcip/io.hpp"
#include "mfgcip/noise.hpp"

namespace mfgcip {

namespace fs = std::filesystem;

/// Manifest entries that tie a data set to the configuration that made it.
inline Manifest provenance(const RunConfig& cfg) {
    Manifest m;
    m.set("config_hash", hex64(cfg.hash()));
    m.set("seed", cfg.noise.seed);
    m.set("phantom", cfg.phantom);
    m.set("smoothing_passes", cfg.smoothing_passes);
    m.set("fine_grid", grid_text(cfg.fine_grid()));
    m.set("scheme", detail::scheme_name(cfg.scheme));
    return m;
}

inline SyntheticDataset synthesize(const RunConfig& cfg) {
    cfg.validate();
    return generate_dataset(cfg.make_phantom(), cfg.make_kernel_object(), cfg.coarse_grid(), cfg.forward(),
                            AnalyticValueFunction::product_quadratic(), cfg.domain.gradient_floor);
}

/// Forward solve and observation extraction; writes the data set to `dir`.
inline Manifest cmd_generate(const RunConfig& cfg, const fs::path& dir) {
    const SyntheticDataset ds = synthesize(cfg);
    write_dataset(dir, ds, provenance(cfg));
    write_text(dir / "config.txt", cfg.canonical());
    return Manifest::load(dir / "manifest.txt");
}

/// Loads a data set and checks it was made on the configured inversion grid.
inline SyntheticDataset load_checked(const RunConfig& cfg, const fs::path& dir) {
    LoadedDataset L = read_dataset(dir);
    const SpaceTimeGrid want = cfg.coarse_grid();
    const SpaceTimeGrid have = L.dataset.data.grid;
    require(have == want, ErrorCode::DatasetMismatch,
            "dataset grid '" + grid_text(have) + "' differs from configured grid '" + grid_text(want) + "'");
    return std::move(L.dataset);
}

/// Writes report.txt, k.csv, k.pgm and trace.csv for one reconstruction.
inline void write_run(const ReconstructionReport& r, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
    write_text(dir / "report.txt", r.text());
    write_text(dir / "k.csv", field_csv(r.k_computed));
    write_text(dir / "k.pgm", field_pgm(r.k_computed));
    write_text(dir / "trace.csv", r.trace.csv());
}

/// Inverts the data set in `dataset_dir` with the configured noise level.
inline ReconstructionReport cmd_invert(const RunConfig& cfg, const fs::path& dataset_dir, const fs::path& out) {
    cfg.validate();
    const SyntheticDataset ds = load_checked(cfg, dataset_dir);
    RunSpec spec{"invert", cfg.phantom, ds.truth.contrast, cfg.carleman.lambda, cfg.noise.delta, cfg.noise.seed};
    ReconstructionReport r = execute_run(spec, ds, cfg.carleman, cfg.minimizer);
    write_run(r, out);
    return r;
}

/// Directory name of the data set for (phantom, contrast) below a data root.
inline std::string dataset_dirname(const std::string& phantom, double contrast) {
    return letter_name(parse_letter(phantom)) + "_c" + format_double(contrast);
}

/// Looks data sets up below `root`; generates missing ones when `generate`
/// is set, otherwise reports them as missing.
class DatasetStore {
public:
    DatasetStore(RunConfig cfg, fs::path root, bool generate)
        : cfg_(std::move(cfg)), root_(std::move(root)), generate_(generate) {}

    const SyntheticDataset& get(const std::string& phantom, double contrast) {
        const std::string name = dataset_dirname(phantom, contrast);
        auto it = loaded_.find(name);
        if (it != loaded_.end()) return it->second;
        const fs::path dir = root_ / name;
        if (!fs::exists(dir / "manifest.txt")) {
            require(generate_, ErrorCode::MissingData,
                    "dataset " + dir.string() + " does not exist (run generate or pass --generate)");
            RunConfig c = cfg_;
            c.phantom = phantom;
            c.contrast = contrast;
            cmd_generate(c, dir);
        }
        return loaded_.emplace(name, load_checked(cfg_, dir)).first->second;
    }

    DatasetProvider provider() {
        return [this](const std::string& p, double c) -> const SyntheticDataset& { return get(p, c); };
    }

private:
    RunConfig cfg_;
    fs::path root_;
    bool generate_;
    std::map<std::string, SyntheticDataset> loaded_;
};

/// Runs a plan, writes one directory per run and summary.csv; returns the reports.
inline std::vector<ReconstructionReport> cmd_plan(const RunConfig& cfg, const ExperimentPlan& plan,
                                                  DatasetStore& store, const fs::path& out, int jobs) {
    cfg.validate();
    const auto reports = execute_plan(plan, store.provider(), cfg.carleman, cfg.minimizer, jobs);
    for (const auto& r : reports) write_run(r, out / r.run_id);
    write_text(out / "summary.csv", summary_csv(reports));
    return reports;
}

/// The noise plan's seeds: three consecutive seeds from the root seed.
inline std::vector<std::uint64_t> noise_seeds(std::uint64_t root, int count = 3) {
    std::vector<std::uint64_t> s;
    for (int k = 0; k < count; ++k) s.push_back(root + static_cast<std::uint64_t>(k));
    return s;
}

/// Reads a CSV matrix whose shape fixes the node counts; extents come from `dom`.
inline SpatialField load_field_csv(const fs::path& p, const DomainSpec& dom) {
    const std::string text = read_text(p);
    std::istringstream is(text);
    std::string line;
    int rows = 0, cols = -1;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const int c = 1 + static_cast<int>(std::count(line.begin(), line.end(), ','));
        require(cols < 0 || c == cols, ErrorCode::DatasetMismatch, "ragged CSV matrix in " + p.string());
        cols = c;
        ++rows;
    }
    require(rows >= 5 && cols >= 5, ErrorCode::DatasetMismatch, "CSV matrix in " + p.string() + " is too small");
    return parse_field_csv(text, dom.grid(cols - 1, rows - 1, 2));
}

/// Writes <stem>.pgm and <stem>.csv for a field.
inline void cmd_render(const SpatialField& k, const fs::path& out, const std::string& stem) {
    std::error_code ec;
    fs::create_directories(out, ec);
    require(!ec, ErrorCode::Io, "cannot create " + out.string() + ": " + ec.message());
    write_text(out / (stem + ".pgm"), field_pgm(k));
    write_text(out / (stem + ".csv"), field_csv(k));
}

} // namespace mfgcip
