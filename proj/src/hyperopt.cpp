#include "windgp/hyperopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "windgp/csv.hpp"
#include "windgp/error.hpp"
#include "windgp/random.hpp"

namespace windgp {

std::string_view to_string(StopReason reason) {
    switch (reason) {
        case StopReason::Converged: return "converged";
        case StopReason::MaxIterations: return "max_iterations";
        case StopReason::LineSearchStalled: return "line_search_stalled";
        case StopReason::Failed: return "failed";
    }
    return "failed";
}

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

struct Evaluation {
    bool ok = false;
    double value = std::numeric_limits<double>::infinity();
    Eigen::VectorXd gradient;
};

Evaluation evaluate(const Objective& objective, const Eigen::VectorXd& x) {
    Evaluation e;
    e.gradient = Eigen::VectorXd::Zero(x.size());
    try {
        e.value = objective(x, e.gradient);
        e.ok = std::isfinite(e.value) && e.gradient.allFinite();
    } catch (const NumericalError&) {
        e.ok = false;
    }
    return e;
}

}  // namespace

MinimizerResult minimize_bfgs(const Objective& objective, const Eigen::VectorXd& x0, const MinimizerOptions& options) {
    const auto n = x0.size();
    auto current = evaluate(objective, x0);
    if (!current.ok) throw NumericalError("objective cannot be evaluated at the start point");

    MinimizerResult out;
    out.x = x0;
    out.trace.emplace_back(current.value, inf_norm(current.gradient));

    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    bool scaled = false;
    out.stop = StopReason::MaxIterations;

    while (true) {
        if (inf_norm(current.gradient) <= options.gradient_tolerance) {
            out.stop = StopReason::Converged;
            break;
        }
        if (out.iterations >= options.max_iterations) break;

        Evaluation trial;
        Eigen::VectorXd step;
        bool accepted = false;
        // Quasi-Newton direction first; one steepest-descent retry if it fails.
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            Eigen::VectorXd direction = -H * current.gradient;
            double slope = current.gradient.dot(direction);
            if (attempt == 1 || !(slope < 0.0)) {
                H.setIdentity();
                scaled = false;
                direction = -current.gradient;
                slope = current.gradient.dot(direction);
            }
            const double longest = inf_norm(direction);
            if (longest > options.max_step) {
                direction *= options.max_step / longest;
                slope *= options.max_step / longest;
            }
            double t = 1.0;
            for (int k = 0; k < 60; ++k, t *= 0.5) {
                step = t * direction;
                trial = evaluate(objective, out.x + step);
                if (trial.ok && trial.value <= current.value + options.armijo * t * slope) {
                    accepted = true;
                    break;
                }
            }
            if (attempt == 0 && !accepted && H.isIdentity()) break;
        }
        // A step that does not lower f means f is flat to round-off here.
        if (!accepted || !(trial.value < current.value)) {
            out.stop = StopReason::LineSearchStalled;
            break;
        }

        const Eigen::VectorXd y = trial.gradient - current.gradient;
        const double sy = step.dot(y);
        if (sy > 1e-12 * step.norm() * y.norm()) {
            if (!scaled) {
                H *= sy / y.squaredNorm();
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Eigen::VectorXd Hy = H * y;
            // Inverse-Hessian BFGS update written out to keep H symmetric.
            H += (rho * rho * y.dot(Hy) + rho) * step * step.transpose() - rho * (Hy * step.transpose() + step * Hy.transpose());
        }

        out.x += step;
        current = std::move(trial);
        ++out.iterations;
        out.trace.emplace_back(current.value, inf_norm(current.gradient));
    }
    out.value = current.value;
    out.gradient = current.gradient;
    return out;
}

void OptimizerConfig::validate() const {
    if (restarts < 1) throw std::invalid_argument("optimizer needs at least one restart");
    if (!(gradient_tolerance > 0.0)) throw std::invalid_argument("gradient tolerance must be positive");
    if (!(init.length_low_fraction > 0.0 && init.length_low_fraction <= init.length_high_fraction))
        throw std::invalid_argument("length-scale initialization range is empty");
}

HyperParams initial_hyperparams(const Dataset& data, const KernelSpec& spec, const InitRanges& ranges,
                                std::uint64_t seed, std::size_t restart) {
    const auto d = data.dims();
    const auto n_pairs = spec.pairs().size();
    auto rng = make_rng(seed, restart);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    const double mean_y = data.y.mean();
    double sd_y = std::sqrt((data.y.array() - mean_y).square().sum() / std::max<double>(1.0, data.y.size() - 1.0));
    if (!(sd_y > 0.0)) sd_y = 1.0;
    const double log_signal = std::log(sd_y / std::sqrt(static_cast<double>(spec.active.size())));

    HyperParams h = HyperParams::unit(d, n_pairs);
    for (std::size_t i = 0; i < d; ++i) {
        const auto col = data.X.col(static_cast<Eigen::Index>(i));
        double span = col.maxCoeff() - col.minCoeff();
        if (!(span > 0.0)) span = 1.0;
        const auto ii = static_cast<Eigen::Index>(i);
        h.log_length(ii) = uniform(std::log(ranges.length_low_fraction * span), std::log(ranges.length_high_fraction * span));
        h.log_signal_sd(ii) = log_signal + uniform(-ranges.signal_half_width, ranges.signal_half_width);
    }
    for (std::size_t p = 0; p < n_pairs; ++p)
        h.log_pair_sd(static_cast<Eigen::Index>(p)) =
            log_signal - 1.0 + uniform(-ranges.signal_half_width, ranges.signal_half_width);
    h.log_noise_sd = std::log(ranges.noise_fraction * sd_y) + uniform(-ranges.noise_half_width, ranges.noise_half_width);
    return h;
}

OptimizationResult optimize(const Dataset& data, const KernelSpec& spec, const OptimizerConfig& config,
                            const FitOptions& fit_options) {
    config.validate();
    data.validate(fit_options.min_rows);
    spec.validate(data.dims());
    const auto d = data.dims();
    const auto n_pairs = spec.pairs().size();

    const Objective objective = [&](const Eigen::VectorXd& packed, Eigen::VectorXd& grad) {
        const auto eval = nlml_with_grad(data, HyperParams::unpack(packed, d, n_pairs), spec, fit_options);
        grad = eval.gradient;
        return eval.value;
    };
    MinimizerOptions options;
    options.max_iterations = config.max_iterations;
    options.gradient_tolerance = config.gradient_tolerance;

    OptimizationResult result;
    std::vector<std::vector<TraceEntry>> traces(config.restarts);
    for (std::size_t r = 0; r < config.restarts; ++r) {
        RestartOutcome outcome;
        outcome.restart = r;
        outcome.initial = initial_hyperparams(data, spec, config.init, config.seed, r).pack();
        try {
            const auto run = minimize_bfgs(objective, outcome.initial, options);
            outcome.initial_nlml = run.trace.front().first;
            outcome.final = run.x;
            outcome.final_nlml = run.value;
            outcome.gradient_norm = inf_norm(run.gradient);
            outcome.iterations = run.iterations;
            outcome.stop = run.stop;
            for (std::size_t k = 0; k < run.trace.size(); ++k)
                traces[r].push_back({r, k, run.trace[k].first, run.trace[k].second});
        } catch (const NumericalError& e) {
            outcome.stop = StopReason::Failed;
            outcome.failure = e.what();
            outcome.final_nlml = std::numeric_limits<double>::infinity();
        }
        result.restarts.push_back(std::move(outcome));
    }

    const RestartOutcome* best = nullptr;
    for (const auto& o : result.restarts) {
        if (o.stop == StopReason::Failed) continue;
        if (!best || o.final_nlml < best->final_nlml) best = &o;
    }
    if (!best) {
        std::string diagnostics;
        for (const auto& o : result.restarts)
            diagnostics += "\n  restart " + std::to_string(o.restart) + ": " + o.failure;
        throw NumericalError("all " + std::to_string(config.restarts) + " optimizer restarts failed:" + diagnostics);
    }
    result.best_restart = best->restart;
    result.theta = HyperParams::unpack(best->final, d, n_pairs);
    result.nlml = best->final_nlml;
    result.gradient_norm = best->gradient_norm;
    result.stop = best->stop;
    for (auto& t : traces) result.trace.insert(result.trace.end(), t.begin(), t.end());
    return result;
}

void write_trace_csv(const std::filesystem::path& path, const OptimizationResult& result) {
    auto out = csv::open_output(path);
    csv::write_row(out, {"restart", "iteration", "nlml", "gradient_norm"});
    for (const auto& t : result.trace)
        csv::write_row(out, {std::to_string(t.restart), std::to_string(t.iteration), csv::format(t.nlml),
                             csv::format(t.gradient_norm)});
}

}  // namespace windgp
