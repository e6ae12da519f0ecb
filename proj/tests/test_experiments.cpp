#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "mfgcip/commands.hpp"
#include "support.hpp"

using namespace mfgcip;
using mfgcip::testing::small_dataset;
namespace fs = std::filesystem;

namespace {

SpaceTimeGrid square(int n) { return SpaceTimeGrid::unit(n, 2); }

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mfgcip_test_" + name);
    fs::remove_all(p);
    return p;
}

bool bit_equal(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

/// Cheap provider for plan tests: 10x10x6 inversion grid, 20x20x12 forward grid.
DatasetCache mini_cache() {
    ForwardConfig fwd;
    fwd.fine = SpaceTimeGrid::unit(20, 12);
    return DatasetCache(DomainSpec{}, DeltaGaussianKernel{0.2}, SpaceTimeGrid::unit(10, 6), fwd, 1);
}

} // namespace

TEST(Metrics, ComputedContrastIsMaxOverMask) {
    const auto g = square(4);
    SpatialField k(g, 1.0), mask(g);
    mask(2, 2) = 1.0;
    mask(2, 3) = 1.0;
    k(2, 2) = 1.7;
    k(2, 3) = 1.9;
    k(0, 0) = 5.0;  // outside the mask
    EXPECT_DOUBLE_EQ(computed_contrast(k, mask), 1.9);
    EXPECT_THROW(computed_contrast(k, SpatialField(g)), Error);
}

TEST(Metrics, ComponentsAreFourConnected) {
    const auto g = square(6);
    SpatialField mask(g), k(g, 1.0);
    mask(1, 1) = mask(2, 2) = 1.0;  // diagonal neighbours are separate
    mask(4, 4) = mask(4, 5) = 1.0;
    k(1, 1) = 2.0;
    k(2, 2) = 3.0;
    k(4, 5) = 4.0;
    int count = 0;
    label_components(mask, count);
    EXPECT_EQ(count, 3);
    EXPECT_EQ(component_contrasts(k, mask), (std::vector<double>{2.0, 3.0, 4.0}));
}

TEST(Metrics, LetterComponentCounts) {
    const auto g = SpaceTimeGrid::unit(20, 2);
    int count = 0;
    label_components(phantom_mask(letter_phantom(LetterShape::A, DomainSpec{}, 2.0), g), count);
    EXPECT_EQ(count, 1);
    label_components(phantom_mask(letter_phantom(LetterShape::SZ, DomainSpec{}, 2.0), g), count);
    EXPECT_EQ(count, 2);
}

TEST(Metrics, IouAndRelativeError) {
    const auto g = square(4);
    SpatialField mask(g), k(g, 1.0);
    mask(1, 1) = mask(1, 2) = 1.0;
    k(1, 1) = k(2, 2) = 2.0;
    EXPECT_DOUBLE_EQ(mask_iou(k, mask, 1.5), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(mask_iou(SpatialField(g, 1.0), SpatialField(g), 1.5), 1.0);
    EXPECT_DOUBLE_EQ(relative_l2_error(k, k), 0.0);
    EXPECT_NEAR(relative_l2_error(2.0 * k, k), 1.0, 1e-15);
    EXPECT_THROW(relative_l2_error(k, SpatialField(g)), Error);
}

TEST(Metrics, BandErrorIgnoresFarSlices) {
    const auto g = SpaceTimeGrid::unit(4, 10);
    const ScalarField truth(g, 2.0);
    ScalarField u = truth;
    u.set_slice(0, SpatialField(g, 100.0));
    EXPECT_DOUBLE_EQ(band_error(u, truth, 0.25), 0.0);
    u.set_slice(g.mid(), SpatialField(g, 3.0));
    EXPECT_GT(band_error(u, truth, 0.25), 0.0);
}

TEST(Plans, SizesAndUniqueIds) {
    EXPECT_EQ(lambda_sweep_plan().runs.size(), 6u);
    EXPECT_EQ(contrast_plan().runs.size(), 2u);
    EXPECT_EQ(shape_plan().runs.size(), 2u);
    const ExperimentPlan noise = noise_plan({1, 2, 3});
    EXPECT_EQ(noise.runs.size(), 12u);
    EXPECT_NO_THROW(noise.validate());
    for (const auto& r : noise.runs) EXPECT_GT(r.delta, 0.0);
    ExperimentPlan dup = contrast_plan({4.0, 4.0});
    EXPECT_THROW(dup.validate(), Error);
    EXPECT_EQ(lambda_sweep_plan().runs[5].id, "lambda_10");
}

TEST(Io, FormatDoubleRoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0})
        EXPECT_EQ(std::stod(format_double(v)), v);
    EXPECT_EQ(format_double(2.0), "2");
}

TEST(Io, ManifestRoundTrip) {
    Manifest m;
    m.set("b", 0.1);
    m.set("a", std::string("x y"));
    m.set("n", 3);
    const Manifest back = Manifest::parse("# comment\n" + m.text());
    EXPECT_EQ(back.text(), m.text());
    EXPECT_EQ(back.get_int("n"), 3);
    EXPECT_EQ(back.get_double("b"), 0.1);
    EXPECT_THROW(back.get("missing"), Error);
    EXPECT_THROW(Manifest::parse("no separator\n"), Error);
}

TEST(Io, GridTextRoundTrip) {
    const auto g = SpaceTimeGrid::unit(20, 10);
    EXPECT_TRUE(parse_grid(grid_text(g)) == g);
    EXPECT_THROW(parse_grid("1 2 1 2"), Error);
}

TEST(Io, FieldCsvRoundTripIsExact) {
    const SpatialField& k = small_dataset().truth.k;
    const SpatialField back = parse_field_csv(field_csv(k), k.grid());
    EXPECT_TRUE(bit_equal(back.values(), k.values()));
    EXPECT_THROW(parse_field_csv("1,2\n", k.grid()), Error);
}

TEST(Io, PgmLayout) {
    const auto g = SpaceTimeGrid::unit(20, 2);
    SpatialField k(g, 1.0);
    k(0, g.n2) = 2.0;      // top-left pixel
    k(g.n1, 0) = -1.0;     // clamped to 0
    const std::string pgm = field_pgm(k);
    ASSERT_EQ(pgm.substr(0, 3), "P5\n");
    const std::string dims = "21 21\n65535\n";
    const auto at = pgm.find(dims);
    ASSERT_NE(at, std::string::npos);
    const std::size_t body = at + dims.size();
    EXPECT_EQ(pgm.size() - body, 21u * 21u * 2u);
    auto pixel = [&](std::size_t s) {
        return (static_cast<unsigned char>(pgm[body + 2 * s]) << 8) | static_cast<unsigned char>(pgm[body + 2 * s + 1]);
    };
    EXPECT_EQ(pixel(0), 2000);
    EXPECT_EQ(pixel(1), 1000);
    EXPECT_EQ(pixel(21 * 21 - 1), 0);
    EXPECT_EQ(gray_level(1e9), 65535);
}

TEST(Io, DatasetRoundTripIsBitExact) {
    const SyntheticDataset& ds = small_dataset();
    const fs::path dir = scratch_dir("dataset");
    Manifest extra;
    extra.set("seed", 7);
    write_dataset(dir, ds, extra);
    const LoadedDataset L = read_dataset(dir);
    EXPECT_EQ(L.manifest.get("seed"), "7");
    EXPECT_EQ(L.manifest.get("schema"), kDatasetSchema);
    const ProblemData& a = ds.data;
    const ProblemData& b = L.dataset.data;
    EXPECT_TRUE(a.grid == b.grid);
    EXPECT_TRUE(bit_equal(a.u0.values(), b.u0.values()));
    EXPECT_TRUE(bit_equal(a.F.values(), b.F.values()));
    EXPECT_TRUE(bit_equal(a.ftt.values(), b.ftt.values()));
    for (std::size_t c = 0; c < 4; ++c) {
        EXPECT_TRUE(bit_equal(a.dirichlet[c].values(), b.dirichlet[c].values()));
        EXPECT_TRUE(bit_equal(a.neumann[c].values(), b.neumann[c].values()));
        EXPECT_TRUE(bit_equal(ds.truth.exact[c].values(), L.dataset.truth.exact[c].values()));
    }
    EXPECT_EQ(L.dataset.truth.contrast, 2.0);
    fs::remove_all(dir);
}

TEST(Io, TruncatedFileIsRejected) {
    const fs::path dir = scratch_dir("truncated");
    write_dataset(dir, small_dataset(), Manifest{});
    fs::resize_file(dir / "f.bin", 100);
    EXPECT_THROW(read_dataset(dir), Error);
    fs::remove_all(dir);
}

TEST(Config, DefaultsAndOverrides) {
    const RunConfig d = parse_config("");
    EXPECT_EQ(d.coarse_space, 20);
    EXPECT_EQ(d.carleman.lambda, 3.0);
    EXPECT_EQ(d.carleman.beta, 0.001);
    const RunConfig c = parse_config("noise.delta = 0.03\n# comment\n[carleman]\nlambda = 5 ; inline\n");
    EXPECT_EQ(c.carleman.lambda, 5.0);
    EXPECT_EQ(c.noise.delta, 0.03);
}

TEST(Config, UnknownKeyAndBadValues) {
    for (const char* text : {"carleman.gamma = 1\n", "[grid]\ncoarse_space = ten\n", "lambda\n",
                             "minimizer.backtracking = maybe\n", "[grid\n", "grid.coarse_time = 9\n",
                             "grid.fine_space = 150\n"}) {
        try {
            parse_config(text);
            FAIL() << text;
        } catch (const Error& e) {
            EXPECT_TRUE(e.code() == ErrorCode::InvalidConfig || e.code() == ErrorCode::InvalidGrid) << text;
        }
    }
}

TEST(Config, CanonicalTextRoundTripsAndHashes) {
    RunConfig c = parse_config("carleman.lambda = 2\nphantom.shape = Omega\n");
    const RunConfig back = parse_config(c.canonical());
    EXPECT_EQ(back.canonical(), c.canonical());
    EXPECT_EQ(back.hash(), c.hash());
    c.noise.seed += 1;
    EXPECT_NE(back.hash(), c.hash());
}

TEST(Commands, DatasetMismatchIsRefused) {
    const fs::path dir = scratch_dir("mismatch");
    write_dataset(dir, small_dataset(), Manifest{});
    RunConfig cfg;
    cfg.coarse_space = 10;
    try {
        load_checked(cfg, dir);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DatasetMismatch);
    }
    EXPECT_NO_THROW(load_checked(RunConfig{}, dir));
    fs::remove_all(dir);
}

TEST(Commands, MissingDataWithoutGenerate) {
    DatasetStore store(RunConfig{}, scratch_dir("empty_root"), false);
    try {
        store.get("A", 2.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingData);
    }
    EXPECT_EQ(dataset_dirname("omega", 4.0), "Omega_c4");
}

TEST(Commands, LoadFieldCsvInfersGrid) {
    const fs::path dir = scratch_dir("csv");
    fs::create_directories(dir);
    write_text(dir / "k.csv", field_csv(small_dataset().truth.k));
    const SpatialField k = load_field_csv(dir / "k.csv", DomainSpec{});
    EXPECT_EQ(k.grid().n1, 20);
    EXPECT_TRUE(bit_equal(k.values(), small_dataset().truth.k.values()));
    fs::remove_all(dir);
}

TEST(Pipeline, DatasetCacheMemoises) {
    DatasetCache cache = mini_cache();
    const SyntheticDataset* a = &cache.get("A", 2.0);
    EXPECT_EQ(a, &cache.get("A", 2.0));
    EXPECT_NE(a, &cache.get("A", 4.0));
}

TEST(Pipeline, ZeroNoiseRunMatchesCleanInversion) {
    DatasetCache cache = mini_cache();
    const SyntheticDataset& clean = cache.get("A", 2.0);
    const ReconstructionReport r = execute_run({"clean", "A", 2.0, 3.0, 0.0, 99}, clean, CarlemanConfig{}, MinimizerConfig{});
    const InversionResult inv = run_inversion(clean.data, CarlemanConfig{}, MinimizerConfig{});
    EXPECT_TRUE(bit_equal(r.k_computed.values(), inv.k.values()));
    EXPECT_EQ(r.iterations, inv.trace.iterations());
    EXPECT_TRUE(r.monotone);
    EXPECT_EQ(r.iou_threshold, 1.5);
}

TEST(Pipeline, PlanIsDeterministicAcrossJobCounts) {
    DatasetCache cache = mini_cache();
    ExperimentPlan plan = lambda_sweep_plan({1.0, 3.0});
    plan.runs.push_back({"noisy", "A", 2.0, 3.0, 0.05, 4});
    MinimizerConfig mc;
    mc.max_iterations = 60;
    const auto one = execute_plan(plan, cache.provider(), CarlemanConfig{}, mc, 1);
    const auto two = execute_plan(plan, cache.provider(), CarlemanConfig{}, mc, 2);
    ASSERT_EQ(one.size(), 3u);
    for (std::size_t k = 0; k < one.size(); ++k) {
        EXPECT_EQ(one[k].run_id, plan.runs[k].id);
        EXPECT_TRUE(bit_equal(one[k].k_computed.values(), two[k].k_computed.values()));
        EXPECT_EQ(one[k].trace.csv(), two[k].trace.csv());
    }
    const std::string csv = summary_csv(one);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), kSummaryHeader);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
    const Manifest report = Manifest::parse(one[2].text());
    EXPECT_EQ(report.get("schema"), kReportSchema);
    EXPECT_EQ(report.get_double("noise_delta"), 0.05);
    EXPECT_EQ(report.get("noise_seed"), "4");
}
