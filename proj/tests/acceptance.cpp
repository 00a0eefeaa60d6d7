// Acceptance suite: one PASS/FAIL line per criterion; exit status is the number of failures.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "windgp/gp.hpp"
#include "windgp/hyperopt.hpp"
#include "windgp/pipeline.hpp"
#include "windgp/preprocessing.hpp"
#include "windgp/synthetic.hpp"

using namespace windgp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Dataset random_inputs(std::mt19937_64& rng, std::size_t n, std::size_t d) {
    Dataset data;
    data.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index r = 0; r < data.X.rows(); ++r)
        for (Eigen::Index c = 0; c < data.X.cols(); ++c) data.X(r, c) = uniform(rng, -2.0, 2.0);
    data.y.resize(static_cast<Eigen::Index>(n));
    return data;
}

HyperParams random_theta(std::mt19937_64& rng, const KernelSpec& spec, double noise_lo, double noise_hi) {
    HyperParams h = HyperParams::unit(spec.active.size(), spec.pairs().size());
    for (Eigen::Index i = 0; i < h.log_signal_sd.size(); ++i) {
        h.log_signal_sd(i) = uniform(rng, -1.0, 1.0);
        h.log_length(i) = uniform(rng, -0.7, 1.0);
    }
    for (Eigen::Index p = 0; p < h.log_pair_sd.size(); ++p) h.log_pair_sd(p) = uniform(rng, -1.0, 0.5);
    h.log_noise_sd = uniform(rng, noise_lo, noise_hi);
    return h;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome additivity() {
    std::mt19937_64 rng(101);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = pick(rng, 10, 200), d = pick(rng, 1, 5);
        auto data = random_inputs(rng, n, d);
        for (Eigen::Index r = 0; r < data.y.size(); ++r)
            data.y(r) = std::sin(data.X.row(r).sum()) + 5.0 + 0.1 * uniform(rng, -1.0, 1.0);
        const auto spec = KernelSpec::first_order(d);
        FitOptions opt;
        opt.center_targets = trial % 2 == 0;
        const auto model = fit(data, random_theta(rng, spec, -2.5, -0.5), spec, opt);
        const auto Xs = random_inputs(rng, 50, d).X;
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(Xs.rows());
        for (std::size_t i = 0; i < d; ++i) sum += predict_component_mean(model, i, Xs.col(static_cast<Eigen::Index>(i)));
        const Eigen::VectorXd gap = predict_mean(model, Xs).array() - model.offset() - sum.array();
        worst = std::max(worst, gap.cwiseAbs().maxCoeff());
    }
    return {worst <= 1e-10, fmt("max gap %.3e", worst)};
}

Outcome gradients() {
    std::mt19937_64 rng(202);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = pick(rng, 5, 60), d = pick(rng, 1, 3);
        auto data = random_inputs(rng, n, d);
        for (Eigen::Index r = 0; r < data.y.size(); ++r)
            data.y(r) = std::cos(data.X(r, 0)) + 0.3 * data.X.row(r).sum() + 0.2 * uniform(rng, -1.0, 1.0);
        const auto spec = trial % 3 == 2 && d > 1 ? KernelSpec::second_order(d) : KernelSpec::first_order(d);
        const auto theta = random_theta(rng, spec, -1.5, 0.0);
        const auto analytic = nlml_grad(data, theta, spec);
        const auto numeric = oracle::central_difference(
            [&](const Eigen::VectorXd& p) {
                return nlml(data, HyperParams::unpack(p, d, spec.pairs().size()), spec);
            },
            theta.pack(), 1e-5);
        worst = std::max(worst, (analytic - numeric).norm() / std::max(numeric.norm(), 1e-12));
    }
    return {worst <= 1e-4, fmt("max relative error %.3e", worst)};
}

Outcome oracle_equivalence() {
    std::mt19937_64 rng(303);
    double kernel = 0.0, likelihood = 0.0, variance = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = pick(rng, 10, 80), d = pick(rng, 1, 4);
        auto data = random_inputs(rng, n, d);
        for (Eigen::Index r = 0; r < data.y.size(); ++r) data.y(r) = std::sin(2.0 * data.X(r, 0)) + uniform(rng, -0.2, 0.2);
        const auto spec = trial % 2 && d > 1 ? KernelSpec::second_order(d) : KernelSpec::first_order(d);
        const auto theta = random_theta(rng, spec, -1.5, -0.5);
        const auto Xs = random_inputs(rng, 30, d).X;
        kernel = std::max(kernel, (kernel_matrix(data.X, Xs, spec, theta) - oracle::brute_kernel_matrix(data.X, Xs, spec, theta))
                                      .cwiseAbs()
                                      .maxCoeff());
        const double b = oracle::brute_nlml(data.X, data.y, spec, theta);
        likelihood = std::max(likelihood, std::abs(nlml(data, theta, spec) - b) / std::max(1.0, std::abs(b)));
        const auto model = fit(data, theta, spec);
        variance = std::max(variance, (predict_variance(model, Xs) - oracle::brute_predict_variance(data.X, Xs, spec, theta))
                                          .cwiseAbs()
                                          .maxCoeff());
    }
    return {kernel <= 1e-8 && likelihood <= 1e-8 && variance <= 1e-8,
            fmt("kernel %.2e, nlml %.2e (relative), variance %.2e", kernel, likelihood, variance)};
}

Outcome interpolation() {
    std::mt19937_64 rng(404);
    auto data = random_inputs(rng, 60, 2);
    data.X *= 2.5;
    for (Eigen::Index r = 0; r < data.y.size(); ++r) data.y(r) = std::sin(data.X(r, 0)) * std::cos(data.X(r, 1)) + data.X(r, 1);
    const double mean = data.y.mean();
    const double var = (data.y.array() - mean).square().mean();
    const auto spec = KernelSpec::first_order(2);
    HyperParams theta = HyperParams::unit(2);
    theta.log_length.setConstant(std::log(0.1));
    theta.log_noise_sd = 0.5 * std::log(1e-12 * var);
    const auto model = fit(data, theta, spec);
    const double err = (predict_mean(model, data.X) - data.y).cwiseAbs().maxCoeff();
    const double bound = 1e-6 * data.y.cwiseAbs().maxCoeff();
    return {err <= bound && model.jitter() == 0.0, fmt("max residual %.3e, bound %.3e, jitter %g", err, bound, model.jitter())};
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::ArrayXd x = a.array() - a.mean(), y = b.array() - b.mean();
    return (x * y).sum() / std::sqrt((x * x).sum() * (y * y).sum());
}

Outcome component_recovery() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::function<double(double)>> truth{
        [](double x) { return std::sin(2.0 * x); },
        [](double x) { return 0.5 * x * x; },
        [](double x) { return std::exp(-2.0 * x * x); },
    };
    std::mt19937_64 rng(505);
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset data;
    data.X.resize(2000, 3);
    data.y.resize(2000);
    for (Eigen::Index r = 0; r < 2000; ++r) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < 3; ++i) {
            data.X(r, i) = uniform(rng, -2.0, 2.0);
            s += truth[static_cast<std::size_t>(i)](data.X(r, i));
        }
        data.y(r) = s;
    }
    const double signal_var = (data.y.array() - data.y.mean()).square().mean();
    const double noise_sd = std::sqrt(signal_var / 20.0);
    for (Eigen::Index r = 0; r < 2000; ++r) data.y(r) += noise_sd * normal(rng);

    Dataset tuning;
    tuning.X = data.X.topRows(500);
    tuning.y = data.y.head(500);
    const auto spec = KernelSpec::first_order(3);
    OptimizerConfig cfg;
    cfg.restarts = 3;
    cfg.seed = 5;
    FitOptions fo;
    fo.center_targets = true;
    const auto tuned = optimize(tuning, spec, cfg, fo);
    const auto model = fit(data, tuned.theta, spec, fo);

    std::string detail = fmt("SNR %.0f; correlations", 20.0);
    double worst = 1.0;
    for (Eigen::Index i = 0; i < 3; ++i) {
        std::vector<double> col(data.X.col(i).data(), data.X.col(i).data() + data.X.rows());
        std::sort(col.begin(), col.end());
        const double lo = col[col.size() * 5 / 100], hi = col[col.size() * 95 / 100];
        const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(100, lo, hi);
        Eigen::VectorXd f(100);
        for (Eigen::Index k = 0; k < 100; ++k) f(k) = truth[static_cast<std::size_t>(i)](grid(k));
        const double c = correlation(predict_component_mean(model, static_cast<std::size_t>(i), grid), f);
        worst = std::min(worst, c);
        detail += fmt(" %.4f", c);
    }
    const double t = seconds_since(t0);
    return {worst >= 0.95 && t < 300.0, detail + fmt(", %.0f s", t)};
}

Outcome filter_scoring() {
    const auto layout = FarmLayout::grid(3, 3, 500.0);
    GeneratorConfig cfg;
    cfg.sample_count = (50000 + layout.turbines.size() - 1) / layout.turbines.size();
    cfg.seed = 606;
    const auto farm = generate(layout, cfg);
    const std::span<const ScadaRecord> records(farm.records.data(), 50000);
    const auto out = filter_records(records, layout.turbines[0].spec);
    std::size_t flagged = 0, caught = 0, nominal = 0, kept = 0;
    for (std::size_t k = 0; k < records.size(); ++k) {
        const bool removed = out.reasons[k].has_value();
        if (farm.truth[k].flag == QualityFlag::Nominal) {
            ++nominal;
            kept += !removed;
        } else {
            ++flagged;
            caught += removed;
        }
    }
    const double recall = static_cast<double>(caught) / static_cast<double>(flagged);
    const double retention = static_cast<double>(kept) / static_cast<double>(nominal);
    return {recall >= 0.9 && retention >= 0.95,
            fmt("flagged removed %.2f%% of %zu, nominal retained %.2f%% of %zu", 100 * recall, flagged, 100 * retention,
                nominal)};
}

Outcome directional_sanity() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto layout = FarmLayout::grid(3, 3, 500.0);
    GeneratorConfig cfg;
    cfg.sample_count = 8000;
    cfg.seed = 1;
    const auto farm = generate(layout, cfg);
    const auto& spec = layout.turbines[0].spec;
    const auto filtered = filter_records(farm.records, spec).retained;
    TrainConfig tc;
    tc.target = {TargetKind::Turbine, "T04"};
    tc.seed = 1;
    tc.turbine = spec;
    const auto trained = train_model(filtered, tc);
    const auto d = decompose(trained.model, GridSpec{});

    Eigen::Index best = 0;
    d.directional.maxCoeff(&best);
    const double reference = unwaked_direction(layout, layout.index_of("T04"), cfg.wake);
    double off = std::abs(d.directions[static_cast<std::size_t>(best)] - reference);
    off = std::min(off, 360.0 - off);

    bool monotone = true;
    for (std::size_t a = 1; a < d.speeds.size(); ++a)
        if (d.speeds[a - 1] >= spec.cut_in_speed && d.speeds[a] <= spec.rated_speed)
            monotone = monotone && d.speed.mean(static_cast<Eigen::Index>(a)) >= d.speed.mean(static_cast<Eigen::Index>(a - 1));
    const double t = seconds_since(t0);
    return {off <= 30.0 && monotone && t < 600.0,
            fmt("%zu training rows, maximum at %.0f deg, unwaked %.0f deg (off by %.0f), speed component %s, %.0f s",
                trained.report.at("training_rows").get<std::size_t>(), d.directions[static_cast<std::size_t>(best)],
                reference, off, monotone ? "monotone" : "not monotone", t)};
}

Outcome hyperparameter_recovery() {
    const auto spec = KernelSpec::first_order(1);
    HyperParams truth = HyperParams::unit(1);
    truth.log_signal_sd(0) = 0.0;
    truth.log_length(0) = std::log(0.5);
    truth.log_noise_sd = std::log(0.1);
    int recovered = 0;
    std::string detail;
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
        std::mt19937_64 rng(800 + trial);
        Dataset data;
        data.X.resize(200, 1);
        for (Eigen::Index r = 0; r < 200; ++r) data.X(r, 0) = uniform(rng, 0.0, 10.0);
        data.y = oracle::sample_gp(data.X, spec, truth, rng);
        OptimizerConfig cfg;
        cfg.seed = trial;
        const auto r = optimize(data, spec, cfg);
        const double err = (r.theta.pack() - truth.pack()).cwiseAbs().maxCoeff();
        recovered += err <= 0.5;
        detail += fmt("%s%.2f", trial ? " " : "", err);
    }
    return {recovered >= 4, fmt("%d of 5 within 0.5 (max log errors %s)", recovered, detail.c_str())};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        files[fs::relative(entry.path(), dir).string()] = ss.str();
    }
    return files;
}

bool sh(const std::string& args) {
    const std::string cmd = std::string(WINDGP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) && WEXITSTATUS(status) == 0;
}

Outcome determinism() {
    const auto root = fs::temp_directory_path() / "windgp_acceptance_determinism";
    fs::remove_all(root);
    std::vector<std::map<std::string, std::string>> runs;
    for (const char* name : {"a", "b"}) {
        const auto dir = root / name;
        for (const char* sub : {"gen", "filter", "turbine", "farm"}) fs::create_directories(dir / sub);
        const auto s = [&](const char* sub) { return (dir / sub).string(); };
        const bool ok =
            sh("generate --seed 13 --n 18000 --out-dir " + s("gen")) &&
            sh("filter --input " + s("gen") + "/scada.csv --out-dir " + s("filter")) &&
            sh("train --input " + s("filter") + "/filtered.csv --output " + s("turbine") + "/model.json --report " +
               s("turbine") + "/report.json --trace " + s("turbine") +
               "/trace.csv --target turbine --turbine-id T04 --subset 800 --opt-subset 300 --restarts 2 --seed 13") &&
            sh("decompose --model " + s("turbine") + "/model.json --out-dir " + s("turbine")) &&
            sh("predict --model " + s("turbine") + "/model.json --output " + s("turbine") + "/grid.csv") &&
            sh("train --input " + s("filter") + "/filtered.csv --output " + s("farm") + "/model.json --report " + s("farm") +
               "/report.json --subset 600 --opt-subset 200 --restarts 2 --seed 13 --order second") &&
            sh("decompose --model " + s("farm") + "/model.json --out-dir " + s("farm"));
        if (!ok) return {false, fmt("pipeline run %s failed", name)};
        runs.push_back(snapshot(dir));
    }
    fs::remove_all(root);
    std::size_t differing = 0;
    for (const auto& [path, bytes] : runs[0]) {
        const auto it = runs[1].find(path);
        differing += it == runs[1].end() || it->second != bytes;
    }
    const bool same = differing == 0 && runs[0].size() == runs[1].size();
    return {same, fmt("%zu files compared, %zu differ", runs[0].size(), differing)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
        {"additivity identity", additivity},
        {"gradient correctness", gradients},
        {"oracle equivalence", oracle_equivalence},
        {"interpolation limit", interpolation},
        {"component recovery", component_recovery},
        {"filter scoring", filter_scoring},
        {"directional sanity", directional_sanity},
        {"hyperparameter recovery", hyperparameter_recovery},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures;
}
