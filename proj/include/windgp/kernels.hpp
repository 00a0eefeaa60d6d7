#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace windgp {

enum class KernelOrder { FirstOrderAdditive, SecondOrderAdditive };

/// Which input dimensions enter the kernel and at what interaction order.
/// Second order adds one product term per unordered pair of active dimensions.
struct KernelSpec {
    KernelOrder order = KernelOrder::FirstOrderAdditive;
    std::vector<std::size_t> active;  // ascending, nonempty

    static KernelSpec first_order(std::size_t dims);
    static KernelSpec second_order(std::size_t dims);

    /// Throws std::invalid_argument if `active` is empty, unsorted or out of range.
    void validate(std::size_t dims) const;
    std::vector<std::pair<std::size_t, std::size_t>> pairs() const;
};

/// Kernel hyperparameters, stored as logarithms so that every value is
/// positive by construction.
///
/// Packed order (used by the optimizer and nlml_grad):
///   [log σ_f,0 .. log σ_f,D-1, log l_0 .. log l_D-1, log σ_f,pair.., log σ_n]
struct HyperParams {
    Eigen::VectorXd log_signal_sd;  // per dimension, σ_f,i
    Eigen::VectorXd log_length;     // per dimension, l_i
    Eigen::VectorXd log_pair_sd;    // per pair of KernelSpec::pairs(), σ_f,ij
    double log_noise_sd = 0.0;      // σ_n

    static HyperParams unit(std::size_t dims, std::size_t n_pairs = 0);

    std::size_t dims() const { return static_cast<std::size_t>(log_signal_sd.size()); }
    std::size_t size() const { return 2 * dims() + static_cast<std::size_t>(log_pair_sd.size()) + 1; }

    double signal_variance(std::size_t i) const;
    double pair_variance(std::size_t p) const;
    double length(std::size_t i) const;
    double noise_variance() const;

    Eigen::VectorXd pack() const;
    static HyperParams unpack(const Eigen::VectorXd& packed, std::size_t dims, std::size_t n_pairs);

    /// Throws std::invalid_argument on non-finite values or mismatched sizes.
    void validate(const KernelSpec& spec) const;

    friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

/// σ_f² exp(-(x - x')² / (2 l²)).
double sq_exp(double x, double x_prime, double signal_sd, double length);

/// First-order additive kernel over every dimension: Σ_i k_i(x_i, x'_i).
double additive_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime, const HyperParams& theta);

/// Second-order term for pair (i, j): σ_f,ij² k̃_i k̃_j, where k̃ is the
/// unit-variance squared exponential. Throws std::invalid_argument if i == j.
double product_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime, const HyperParams& theta,
                      std::pair<std::size_t, std::size_t> pair, double pair_signal_sd);

/// Full kernel value under `spec`.
double kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime, const KernelSpec& spec,
              const HyperParams& theta);

/// K[n, m] = k(X_n, X'_m). Rows are points.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& X_prime, const KernelSpec& spec,
                              const HyperParams& theta);

/// Kernel matrix of the single dimension-i term.
Eigen::MatrixXd component_kernel_matrix(const Eigen::VectorXd& x_col, const Eigen::VectorXd& x_col_prime,
                                        std::size_t i, const HyperParams& theta);

/// Kernel matrix of the product term for pair index `p` of spec.pairs();
/// X and X' are full-width inputs.
Eigen::MatrixXd pair_kernel_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& X_prime, std::size_t p,
                                   const KernelSpec& spec, const HyperParams& theta);

/// ∂K/∂η for every kernel log-hyperparameter η, in packed order without the
/// trailing noise entry. Parameters of inactive dimensions get zero matrices.
std::vector<Eigen::MatrixXd> kernel_grad(const Eigen::MatrixXd& X, const KernelSpec& spec, const HyperParams& theta);

/// Prior variance k(x, x) (identical for every x by stationarity).
double prior_variance(const KernelSpec& spec, const HyperParams& theta);

}  // namespace windgp
