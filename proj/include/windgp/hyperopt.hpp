#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "windgp/gp.hpp"

namespace windgp {

enum class StopReason { Converged, MaxIterations, LineSearchStalled, Failed };
std::string_view to_string(StopReason reason);

// Generic minimizer -----------------------------------------------------------

/// Returns f(x) and writes ∇f(x) into `grad`. May throw NumericalError, which
/// the line search treats as an infinite value.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct MinimizerOptions {
    std::size_t max_iterations = 200;
    double gradient_tolerance = 1e-6;  // on the ∞-norm
    double max_step = 2.0;             // ∞-norm cap on a single step
    double armijo = 1e-4;
};

struct MinimizerResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    std::size_t iterations = 0;
    StopReason stop = StopReason::MaxIterations;
    /// (value, gradient ∞-norm) at the start point and after every accepted step.
    std::vector<std::pair<double, double>> trace;
};

/// BFGS on the inverse Hessian with a backtracking (sufficient decrease) line
/// search. Updates that would break positive definiteness are skipped.
MinimizerResult minimize_bfgs(const Objective& objective, const Eigen::VectorXd& x0,
                              const MinimizerOptions& options = {});

// Marginal-likelihood tuning ----------------------------------------------------

/// Log-space initialization ranges.
struct InitRanges {
    double length_low_fraction = 0.1;   // log l ~ U[log(low·span), log(high·span)]
    double length_high_fraction = 1.0;
    double signal_half_width = 0.5;     // log σ_f ~ log(std(y)/√D) ± half width
    double noise_fraction = 0.1;        // log σ_n ~ log(fraction·std(y)) ± half width
    double noise_half_width = 0.5;
};

struct OptimizerConfig {
    std::size_t max_iterations = 200;
    double gradient_tolerance = 1e-6;
    std::size_t restarts = 5;
    std::uint64_t seed = 0;
    InitRanges init;

    void validate() const;
};

struct TraceEntry {
    std::size_t restart = 0;
    std::size_t iteration = 0;
    double nlml = 0.0;
    double gradient_norm = 0.0;
};

struct RestartOutcome {
    std::size_t restart = 0;
    Eigen::VectorXd initial;  // packed
    double initial_nlml = 0.0;
    Eigen::VectorXd final;
    double final_nlml = 0.0;
    double gradient_norm = 0.0;
    std::size_t iterations = 0;
    StopReason stop = StopReason::Failed;
    std::string failure;  // set when stop == Failed
};

struct OptimizationResult {
    HyperParams theta;
    double nlml = 0.0;
    double gradient_norm = 0.0;
    std::size_t best_restart = 0;
    StopReason stop = StopReason::Failed;
    std::vector<RestartOutcome> restarts;
    std::vector<TraceEntry> trace;

    bool converged() const { return stop == StopReason::Converged; }
    bool max_iterations_reached() const { return stop == StopReason::MaxIterations; }
};

/// Start point for one restart. Restart r draws from its own (seed, r)
/// substream, so the starts of k restarts are a prefix of those of 2k.
HyperParams initial_hyperparams(const Dataset& data, const KernelSpec& spec, const InitRanges& ranges,
                                std::uint64_t seed, std::size_t restart);

/// Type-II maximum likelihood: minimizes NLML over log-hyperparameters from
/// every restart and keeps the lowest final value (ties: lowest restart index).
/// Throws NumericalError if every restart fails.
OptimizationResult optimize(const Dataset& data, const KernelSpec& spec, const OptimizerConfig& config,
                            const FitOptions& fit_options = {});

/// CSV with columns restart,iteration,nlml,gradient_norm.
void write_trace_csv(const std::filesystem::path& path, const OptimizationResult& result);

}  // namespace windgp
