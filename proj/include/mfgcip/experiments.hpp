#pragma once

// Inversion runs and their scoring: contrast, relative error and mask
// overlap of the reconstructed coefficient, and plans for the lambda sweep,
// the contrast series, the letter shapes and the noisy-data runs.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mfgcip/error.hpp"
#include "mfgcip/forward.hpp"
#include "mfgcip/io.hpp"
#include "mfgcip/minimize.hpp"
#include "mfgcip/noise.hpp"
#include "mfgcip/objective.hpp"
#include "mfgcip/residuals.hpp"

namespace mfgcip {

inline constexpr const char* kReportSchema = "mfgcip-report/1";

// ---------------------------------------------------------------------------
// Metrics

/// max of k over the inclusion mask (background is 1).
inline double computed_contrast(const SpatialField& k, const SpatialField& mask) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < k.size(); ++s)
        if (mask.values()[s] > 0.5) best = std::max(best, k.values()[s]);
    require(std::isfinite(best), ErrorCode::InvalidArgument, "inclusion mask is empty");
    return best;
}

/// 4-connected components of the mask; label 0 is background.
inline std::vector<int> label_components(const SpatialField& mask, int& count) {
    const SpaceTimeGrid& g = mask.grid();
    std::vector<int> label(mask.size(), 0);
    count = 0;
    std::vector<std::pair<int, int>> stack;
    for (int j = 0; j <= g.n2; ++j)
        for (int i = 0; i <= g.n1; ++i) {
            if (mask(i, j) <= 0.5 || label[g.index(i, j)] != 0) continue;
            ++count;
            stack.push_back({i, j});
            label[g.index(i, j)] = count;
            while (!stack.empty()) {
                const auto [a, b] = stack.back();
                stack.pop_back();
                const int nb[4][2] = {{a + 1, b}, {a - 1, b}, {a, b + 1}, {a, b - 1}};
                for (const auto& q : nb) {
                    if (q[0] < 0 || q[1] < 0 || q[0] > g.n1 || q[1] > g.n2) continue;
                    const std::size_t s = g.index(q[0], q[1]);
                    if (mask.values()[s] > 0.5 && label[s] == 0) {
                        label[s] = count;
                        stack.push_back({q[0], q[1]});
                    }
                }
            }
        }
    return label;
}

/// Computed contrast of each connected inclusion, in labelling order.
inline std::vector<double> component_contrasts(const SpatialField& k, const SpatialField& mask) {
    int count = 0;
    const auto label = label_components(mask, count);
    std::vector<double> best(static_cast<std::size_t>(count), -std::numeric_limits<double>::infinity());
    for (std::size_t s = 0; s < label.size(); ++s)
        if (label[s] > 0) best[static_cast<std::size_t>(label[s] - 1)] = std::max(best[static_cast<std::size_t>(label[s] - 1)], k.values()[s]);
    return best;
}

inline double relative_l2_error(const SpatialField& k, const SpatialField& truth) {
    const double den = l2_norm(truth);
    require(den > 0.0, ErrorCode::InvalidArgument, "reference field has zero norm");
    return l2_norm(k - truth) / den;
}

/// Intersection over union of {k >= threshold} and the inclusion mask.
inline double mask_iou(const SpatialField& k, const SpatialField& mask, double threshold) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t s = 0; s < k.size(); ++s) {
        const bool a = k.values()[s] >= threshold;
        const bool b = mask.values()[s] > 0.5;
        inter += (a && b) ? 1 : 0;
        uni += (a || b) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Relative L2 error of a component restricted to |t - T/2| <= gamma.
inline double band_error(const ScalarField& u, const ScalarField& truth, double gamma) {
    const SpaceTimeGrid& g = u.grid();
    double num = 0.0, den = 0.0;
    for (int n = 0; n <= g.nt; ++n) {
        if (std::abs(g.t(n) - 0.5 * g.T) > gamma + 1e-12) continue;
        for (int j = 0; j <= g.n2; ++j)
            for (int i = 0; i <= g.n1; ++i) {
                const double w = trapezoid_weight(i, g.n1, g.h1()) * trapezoid_weight(j, g.n2, g.h2());
                const double d = u(i, j, n) - truth(i, j, n);
                num += w * d * d;
                den += w * truth(i, j, n) * truth(i, j, n);
            }
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

// ---------------------------------------------------------------------------
// Single inversion

struct InversionResult {
    StateVector U;
    SpatialField k;
    IterationTrace trace;
};

/// Minimises J from the zero start and reconstructs k from the minimiser.
inline InversionResult run_inversion(const ProblemData& data, const CarlemanConfig& carleman,
                                     const MinimizerConfig& minimizer) {
    data.validate();
    const Objective obj(data, carleman);
    DescentResult r = minimize_objective(obj, minimizer);
    InversionResult out;
    out.U = obj.state(r.x);
    out.k = reconstruct_k(out.U.v(), data);
    out.trace = std::move(r.trace);
    return out;
}

struct ReconstructionReport {
    std::string run_id;
    std::string phantom;
    SpatialField k_computed;
    double correct_contrast = 0.0;
    double computed_contrast = 0.0;
    std::vector<double> component_contrasts;
    double relative_l2_error = 0.0;
    double iou = 0.0;
    double iou_threshold = 0.0;
    double band_error = 0.0;
    int iterations = 0;
    double final_gradient_norm = 0.0;
    double final_value = 0.0;
    StopReason stop_reason = StopReason::MaxIterations;
    bool monotone = true;
    double seconds = 0.0;
    // configuration echo
    double lambda = 0.0;
    double beta = 0.0;
    double delta = 0.0;
    std::uint64_t seed = 0;
    std::string method;
    SpaceTimeGrid grid;
    IterationTrace trace;

    std::string text() const {
        Manifest m;
        m.set("schema", kReportSchema);
        m.set("run_id", run_id);
        m.set("phantom", phantom);
        m.set("lambda", lambda);
        m.set("beta", beta);
        m.set("noise_delta", delta);
        m.set("noise_seed", seed);
        m.set("noise_generator", kNoiseGenerator);
        m.set("method", method);
        m.set("grid", grid_text(grid));
        m.set("correct_contrast", correct_contrast);
        m.set("computed_contrast", computed_contrast);
        std::ostringstream cc;
        for (std::size_t c = 0; c < component_contrasts.size(); ++c)
            cc << (c ? " " : "") << format_double(component_contrasts[c]);
        m.set("component_contrasts", cc.str());
        m.set("relative_l2_error", relative_l2_error);
        m.set("iou", iou);
        m.set("iou_threshold", iou_threshold);
        m.set("band_error_v", band_error);
        m.set("iterations", iterations);
        m.set("final_gradient_norm", final_gradient_norm);
        m.set("final_J", final_value);
        m.set("stop_reason", to_string(stop_reason));
        m.set("monotone", monotone ? "true" : "false");
        m.set("seconds", seconds);
        return m.text();
    }
};

struct ScoreOptions {
    double band_gamma = 0.25;
};

inline ReconstructionReport score(const InversionResult& inv, const TruthData& truth, const ScoreOptions& opt = {}) {
    ReconstructionReport r;
    r.k_computed = inv.k;
    r.correct_contrast = truth.contrast;
    r.computed_contrast = computed_contrast(inv.k, truth.mask);
    r.component_contrasts = component_contrasts(inv.k, truth.mask);
    r.relative_l2_error = relative_l2_error(inv.k, truth.k);
    r.iou_threshold = 0.5 * (1.0 + truth.contrast);
    r.iou = mask_iou(inv.k, truth.mask, r.iou_threshold);
    r.band_error = truth.exact[kV].size() ? band_error(inv.U.v(), truth.exact[kV], opt.band_gamma) : 0.0;
    r.iterations = inv.trace.iterations();
    r.final_gradient_norm = inv.trace.final_gradient_norm();
    r.final_value = inv.trace.final_value();
    r.stop_reason = inv.trace.reason;
    r.monotone = inv.trace.monotone();
    r.trace = inv.trace;
    r.grid = inv.k.grid();
    return r;
}

// ---------------------------------------------------------------------------
// Plans

struct RunSpec {
    std::string id;
    std::string phantom = "A";
    double contrast = 2.0;
    double lambda = 3.0;
    double delta = 0.0;
    std::uint64_t seed = 12345;
};

struct ExperimentPlan {
    std::vector<RunSpec> runs;

    void validate() const {
        std::set<std::string> ids;
        for (const auto& r : runs)
            require(ids.insert(r.id).second, ErrorCode::InvalidConfig, "duplicate run id '" + r.id + "'");
    }
};

inline const std::vector<double>& default_lambdas() {
    static const std::vector<double> v{0.0, 1.0, 2.0, 3.0, 5.0, 10.0};
    return v;
}

inline std::string run_label(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

inline ExperimentPlan lambda_sweep_plan(const std::vector<double>& lambdas = default_lambdas()) {
    ExperimentPlan p;
    for (double l : lambdas) p.runs.push_back({"lambda_" + run_label(l), "A", 2.0, l, 0.0, 0});
    return p;
}

inline ExperimentPlan contrast_plan(const std::vector<double>& contrasts = {4.0, 8.0}, double lambda = 3.0) {
    ExperimentPlan p;
    for (double c : contrasts) p.runs.push_back({"contrast_" + run_label(c), "A", c, lambda, 0.0, 0});
    return p;
}

inline ExperimentPlan shape_plan(double lambda = 3.0) {
    ExperimentPlan p;
    p.runs.push_back({"shape_Omega", "Omega", 2.0, lambda, 0.0, 0});
    p.runs.push_back({"shape_SZ", "SZ", 2.0, lambda, 0.0, 0});
    return p;
}

inline ExperimentPlan noise_plan(const std::vector<std::uint64_t>& seeds, const std::vector<double>& deltas = {0.03, 0.05},
                                 double lambda = 3.0) {
    ExperimentPlan p;
    for (const char* shape : {"A", "Omega"})
        for (double d : deltas)
            for (std::uint64_t s : seeds)
                p.runs.push_back({std::string("noise_") + shape + "_" + run_label(d) + "_s" + std::to_string(s), shape,
                                  2.0, lambda, d, s});
    return p;
}

/// Supplies the clean synthetic data set for a (phantom, contrast) pair.
using DatasetProvider = std::function<const SyntheticDataset&(const std::string& phantom, double contrast)>;

/// Memoising provider that runs the forward solver on demand.
class DatasetCache {
public:
    DatasetCache(DomainSpec dom, Kernel kernel, SpaceTimeGrid coarse, ForwardConfig fwd, int smoothing_passes)
        : dom_(dom), kernel_(std::move(kernel)), coarse_(coarse), fwd_(std::move(fwd)), passes_(smoothing_passes) {}

    const SyntheticDataset& get(const std::string& phantom, double contrast) {
        const std::string key = phantom + "/" + format_double(contrast);
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const Phantom ph = letter_phantom(parse_letter(phantom), dom_, contrast, passes_);
        return cache_.emplace(key, generate_dataset(ph, kernel_, coarse_, fwd_, AnalyticValueFunction::product_quadratic(),
                                                    dom_.gradient_floor))
            .first->second;
    }

    void put(const std::string& phantom, double contrast, SyntheticDataset ds) {
        std::lock_guard<std::mutex> lock(mu_);
        cache_.insert_or_assign(phantom + "/" + format_double(contrast), std::move(ds));
    }

    DatasetProvider provider() {
        return [this](const std::string& p, double c) -> const SyntheticDataset& { return get(p, c); };
    }

private:
    DomainSpec dom_;
    Kernel kernel_;
    SpaceTimeGrid coarse_;
    ForwardConfig fwd_;
    int passes_;
    std::mutex mu_;
    std::map<std::string, SyntheticDataset> cache_;
};

/// One run of a plan: noise (if any), inversion and scoring.
inline ReconstructionReport execute_run(const RunSpec& spec, const SyntheticDataset& clean, CarlemanConfig carleman,
                                        const MinimizerConfig& minimizer) {
    const auto t0 = std::chrono::steady_clock::now();
    carleman.lambda = spec.lambda;
    const ProblemData data = apply_noise(clean.data, NoiseSpec{spec.delta, spec.seed});
    const InversionResult inv = run_inversion(data, carleman, minimizer);
    ReconstructionReport r = score(inv, clean.truth);
    r.run_id = spec.id;
    r.phantom = spec.phantom;
    r.lambda = carleman.lambda;
    r.beta = carleman.beta;
    r.delta = spec.delta;
    r.seed = spec.seed;
    r.method = to_string(minimizer.method);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

/// Executes every run; data sets are produced first, then up to `jobs`
/// inversions run concurrently. Reports come back in plan order.
inline std::vector<ReconstructionReport> execute_plan(const ExperimentPlan& plan, const DatasetProvider& provider,
                                                      const CarlemanConfig& carleman,
                                                      const MinimizerConfig& minimizer, int jobs = 1) {
    plan.validate();
    std::vector<const SyntheticDataset*> inputs;
    for (const auto& r : plan.runs) inputs.push_back(&provider(r.phantom, r.contrast));
    std::vector<ReconstructionReport> out(plan.runs.size());
    const std::size_t width = static_cast<std::size_t>(std::max(1, jobs));
    for (std::size_t start = 0; start < plan.runs.size(); start += width) {
        std::vector<std::future<ReconstructionReport>> batch;
        for (std::size_t k = start; k < std::min(plan.runs.size(), start + width); ++k)
            batch.push_back(std::async(width == 1 ? std::launch::deferred : std::launch::async,
                                       [&, k] { return execute_run(plan.runs[k], *inputs[k], carleman, minimizer); }));
        for (std::size_t k = 0; k < batch.size(); ++k) out[start + k] = batch[k].get();
    }
    return out;
}

inline constexpr const char* kSummaryHeader =
    "run_id,phantom,correct_contrast,lambda,beta,delta,seed,iterations,final_gradient_norm,computed_contrast,"
    "relative_l2_error,iou,stop_reason";

inline std::string summary_csv(const std::vector<ReconstructionReport>& reports) {
    std::ostringstream os;
    os << kSummaryHeader << '\n';
    for (const auto& r : reports)
        os << r.run_id << ',' << r.phantom << ',' << format_double(r.correct_contrast) << ','
           << format_double(r.lambda) << ',' << format_double(r.beta) << ',' << format_double(r.delta) << ','
           << r.seed << ',' << r.iterations << ',' << format_double(r.final_gradient_norm) << ','
           << format_double(r.computed_contrast) << ',' << format_double(r.relative_l2_error) << ','
           << format_double(r.iou) << ',' << to_string(r.stop_reason) << '\n';
    return os.str();
}

} // namespace mfgcip
