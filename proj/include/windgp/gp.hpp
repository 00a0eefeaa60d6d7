#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "windgp/kernels.hpp"

namespace windgp {

/// Training inputs (rows are points) and targets in link-transformed space.
struct Dataset {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<std::string> column_names;  // optional, one per column of X

    std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
    std::size_t dims() const { return static_cast<std::size_t>(X.cols()); }

    /// Throws DataError on shape mismatch, non-finite entries or too few rows.
    void validate(std::size_t min_rows = 2) const;
};

/// Exact GP only; larger problems need an approximation this library does not provide.
inline constexpr std::size_t kMaxTrainingRows = 10000;

struct FitOptions {
    /// Subtract mean(y) before fitting and add it back to predictions.
    bool center_targets = false;
    std::size_t min_rows = 2;
};

/// Zero-mean GP conditioned on a dataset: Cholesky factor of
/// A = K + σ_n² I (+ jitter I when needed) and α = A⁻¹ (y - offset).
/// Immutable once built; concurrent predictions are safe.
class TrainedModel {
public:
    const Dataset& dataset() const { return data_; }
    const HyperParams& hyperparams() const { return theta_; }
    const KernelSpec& spec() const { return spec_; }
    Eigen::MatrixXd cholesky_factor() const { return llt_.matrixL(); }
    const Eigen::VectorXd& alpha() const { return alpha_; }
    double offset() const { return offset_; }
    /// Absolute diagonal jitter that was needed for the factorization (0 if none).
    double jitter() const { return jitter_; }

    double log_det() const;
    /// ½ (y-offset)ᵀα + ½ log|A| + (N/2) log 2π.
    double nlml() const;

    /// Solves A v = b with the stored factor.
    Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const { return llt_.solve(b); }
    /// L⁻¹ b.
    Eigen::MatrixXd solve_lower(const Eigen::MatrixXd& b) const;

private:
    friend TrainedModel fit(const Dataset&, const HyperParams&, const KernelSpec&, const FitOptions&);
    friend TrainedModel restore_model(Dataset, const HyperParams&, const KernelSpec&, double, double);

    Dataset data_;
    HyperParams theta_;
    KernelSpec spec_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
    double offset_ = 0.0;
    double jitter_ = 0.0;
};

/// Factorizes K + σ_n² I. If the factorization fails, jitter is escalated
/// from 1e-8 to 1e-4 times mean(diag K) in ×10 steps before giving up with
/// NumericalError.
TrainedModel fit(const Dataset& data, const HyperParams& theta, const KernelSpec& spec, const FitOptions& options = {});

/// Rebuilds a model with a known offset and jitter (used when loading model files).
TrainedModel restore_model(Dataset data, const HyperParams& theta, const KernelSpec& spec, double offset,
                           double jitter);

double nlml(const Dataset& data, const HyperParams& theta, const KernelSpec& spec, const FitOptions& options = {});

struct NlmlEvaluation {
    double value = 0.0;
    Eigen::VectorXd gradient;  // packed order, see HyperParams
};

/// NLML and its gradient with respect to every packed log-hyperparameter,
/// ∂/∂η = ½ tr((A⁻¹ - ααᵀ) ∂A/∂η), sharing one factorization.
NlmlEvaluation nlml_with_grad(const Dataset& data, const HyperParams& theta, const KernelSpec& spec,
                              const FitOptions& options = {});

Eigen::VectorXd nlml_grad(const Dataset& data, const HyperParams& theta, const KernelSpec& spec,
                          const FitOptions& options = {});

/// offset + K(X*, X) α.
Eigen::VectorXd predict_mean(const TrainedModel& model, const Eigen::MatrixXd& X_star);

/// K_i(x*, X[:, i]) α; excludes the offset. Inactive dimensions give zeros.
Eigen::VectorXd predict_component_mean(const TrainedModel& model, std::size_t i, const Eigen::VectorXd& x_star);

/// Mean of the product term for pair index `p` of spec().pairs(); X* is full width.
Eigen::VectorXd predict_pair_mean(const TrainedModel& model, std::size_t p, const Eigen::MatrixXd& X_star);

/// Latent-function variance k(x*, x*) - ‖L⁻¹ k(X, x*)‖²; adds σ_n² when
/// `include_noise`. Round-off negatives are clamped to zero.
Eigen::VectorXd predict_variance(const TrainedModel& model, const Eigen::MatrixXd& X_star, bool include_noise = false);

/// Posterior variance of the dimension-i component alone.
Eigen::VectorXd predict_component_variance(const TrainedModel& model, std::size_t i, const Eigen::VectorXd& x_star);

struct PredictionResult {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
};

PredictionResult predict(const TrainedModel& model, const Eigen::MatrixXd& X_star, bool include_noise = false);

}  // namespace windgp
