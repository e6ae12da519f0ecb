// mfgcip: synthetic data generation, inversion, experiment sweeps and
// rendering for the mean-field-games coefficient inverse problem.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mfgcip/commands.hpp"

using namespace mfgcip;

namespace {

struct Globals {
    std::string config;
    std::string out;
    int jobs = 1;
    std::optional<std::uint64_t> seed;
};

RunConfig load(const Globals& g) {
    RunConfig cfg = g.config.empty() ? RunConfig{} : load_config(g.config);
    if (g.seed) cfg.noise.seed = *g.seed;
    if (!g.out.empty()) cfg.out = g.out;
    cfg.validate();
    return cfg;
}

void print_summary(const std::vector<ReconstructionReport>& reports) {
    for (const auto& r : reports)
        std::printf("%-28s contrast %.4f (true %g)  relerr %.4g  iou %.3f  iterations %d  |grad| %.3g\n",
                    r.run_id.c_str(), r.computed_contrast, r.correct_contrast, r.relative_l2_error, r.iou,
                    r.iterations, r.final_gradient_norm);
}

int fail(ErrorCode code, const std::string& what) {
    std::cerr << "error: " << to_string(code) << ": " << what << '\n';
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Carleman-convexification inversion for a mean field games coefficient"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "configuration file (sectioned key = value)");
    app.add_option("--out", g.out, "output directory (overrides io.out)");
    app.add_option("--jobs", g.jobs, "concurrent inversions for sweep commands")->check(CLI::PositiveNumber);
    app.add_option("--seed", g.seed, "root noise seed (overrides noise.seed)");

    auto* gen = app.add_subcommand("generate", "solve the forward problem and write a dataset");

    std::string dataset;
    auto* inv = app.add_subcommand("invert", "reconstruct k from a dataset");
    inv->add_option("--dataset", dataset, "dataset directory (overrides io.dataset)");

    std::string data_root;
    bool generate_missing = false;
    auto add_root = [&](CLI::App* c) {
        c->add_option("--data", data_root, "root holding datasets named <shape>_c<contrast>")->required();
        c->add_flag("--generate", generate_missing, "generate missing datasets");
    };
    auto* sweep = app.add_subcommand("sweep", "lambda sweep over {0,1,2,3,5,10} on letter A");
    add_root(sweep);
    auto* contrast = app.add_subcommand("contrast", "letter A with contrasts 4 and 8");
    add_root(contrast);
    auto* shapes = app.add_subcommand("shapes", "letters Omega and SZ");
    add_root(shapes);
    auto* noise = app.add_subcommand("noise", "3% and 5% noise on A and Omega, three seeds");
    add_root(noise);

    std::string field, phantom;
    auto* render = app.add_subcommand("render", "write a 16-bit PGM and a CSV matrix of a k field");
    auto* field_opt = render->add_option("--field", field, "CSV matrix of k (rows are x2 scan lines)");
    render->add_option("--phantom", phantom, "render the true coefficient of a letter phantom instead")
        ->excludes(field_opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(ErrorCode::InvalidArgument, e.what());
    }

    try {
        const RunConfig cfg = load(g);
        const fs::path out = cfg.out;
        if (*gen) {
            const Manifest m = cmd_generate(cfg, out);
            std::printf("dataset written to %s (config_hash %s, min density %s)\n", out.string().c_str(),
                        m.get("config_hash").c_str(), m.get("min_density").c_str());
        } else if (*inv) {
            const ReconstructionReport r = cmd_invert(cfg, dataset.empty() ? cfg.dataset : dataset, out);
            print_summary({r});
        } else if (*render) {
            if (!phantom.empty()) {
                RunConfig c = cfg;
                c.phantom = phantom;
                cmd_render(rasterize_phantom(c.make_phantom(), cfg.coarse_grid()), out, "phantom_" + phantom);
            } else {
                require(!field.empty(), ErrorCode::InvalidArgument, "render needs --field or --phantom");
                cmd_render(load_field_csv(field, cfg.domain), out, fs::path(field).stem().string());
            }
        } else {
            DatasetStore store(cfg, data_root, generate_missing);
            ExperimentPlan plan;
            const double lambda = cfg.carleman.lambda;
            if (*sweep) plan = lambda_sweep_plan();
            if (*contrast) plan = contrast_plan({4.0, 8.0}, lambda);
            if (*shapes) plan = shape_plan(lambda);
            if (*noise) plan = noise_plan(noise_seeds(cfg.noise.seed), {0.03, 0.05}, lambda);
            print_summary(cmd_plan(cfg, plan, store, out, g.jobs));
        }
    } catch (const Error& e) {
        return fail(e.code(), e.what());
    } catch (const std::exception& e) {
        return fail(ErrorCode::Io, e.what());
    }
    return 0;
}
