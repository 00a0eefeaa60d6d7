#pragma once

// Brute-force reference implementations. They share no code with the library
// beyond the HyperParams container and favour clarity over speed.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "windgp/kernels.hpp"

namespace oracle {

inline double se(double a, double b, double sd, double len) {
    const double r = (a - b) / len;
    return sd * sd * std::exp(-0.5 * r * r);
}

/// Element-by-element kernel over the active dimensions and pairs.
inline double brute_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const windgp::KernelSpec& spec,
                           const windgp::HyperParams& h) {
    double k = 0.0;
    for (auto i : spec.active)
        k += se(x(i), y(i), std::exp(h.log_signal_sd(i)), std::exp(h.log_length(i)));
    if (spec.order == windgp::KernelOrder::SecondOrderAdditive) {
        int p = 0;
        for (std::size_t a = 0; a < spec.active.size(); ++a)
            for (std::size_t b = a + 1; b < spec.active.size(); ++b, ++p) {
                const auto i = spec.active[a], j = spec.active[b];
                const double s = std::exp(h.log_pair_sd(p));
                k += s * s * se(x(i), y(i), 1.0, std::exp(h.log_length(i))) *
                     se(x(j), y(j), 1.0, std::exp(h.log_length(j)));
            }
    }
    return k;
}

inline Eigen::MatrixXd brute_kernel_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                           const windgp::KernelSpec& spec, const windgp::HyperParams& h) {
    Eigen::MatrixXd K(X.rows(), Y.rows());
    for (Eigen::Index n = 0; n < X.rows(); ++n)
        for (Eigen::Index m = 0; m < Y.rows(); ++m)
            K(n, m) = brute_kernel(X.row(n).transpose(), Y.row(m).transpose(), spec, h);
    return K;
}

/// NLML through an explicit inverse and an LU determinant.
inline double brute_nlml(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const windgp::KernelSpec& spec,
                         const windgp::HyperParams& h) {
    const Eigen::MatrixXd A = brute_kernel_matrix(X, X, spec, h) +
                              std::exp(2.0 * h.log_noise_sd) * Eigen::MatrixXd::Identity(X.rows(), X.rows());
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    const Eigen::MatrixXd Ainv = lu.inverse();
    const double quad = y.dot(Ainv * y);
    return 0.5 * quad + 0.5 * std::log(lu.determinant()) +
           0.5 * static_cast<double>(X.rows()) * std::log(2.0 * std::numbers::pi);
}

inline Eigen::VectorXd brute_predict_mean(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::MatrixXd& Xs,
                                          const windgp::KernelSpec& spec, const windgp::HyperParams& h) {
    const Eigen::MatrixXd A = brute_kernel_matrix(X, X, spec, h) +
                              std::exp(2.0 * h.log_noise_sd) * Eigen::MatrixXd::Identity(X.rows(), X.rows());
    return brute_kernel_matrix(Xs, X, spec, h) * A.fullPivLu().solve(y);
}

/// Latent posterior variance diag(K** - K*X A⁻¹ KX*).
inline Eigen::VectorXd brute_predict_variance(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xs,
                                              const windgp::KernelSpec& spec, const windgp::HyperParams& h) {
    const Eigen::MatrixXd A = brute_kernel_matrix(X, X, spec, h) +
                              std::exp(2.0 * h.log_noise_sd) * Eigen::MatrixXd::Identity(X.rows(), X.rows());
    const Eigen::MatrixXd Ainv = A.fullPivLu().inverse();
    const Eigen::MatrixXd Ks = brute_kernel_matrix(Xs, X, spec, h);
    Eigen::VectorXd v(Xs.rows());
    for (Eigen::Index k = 0; k < Xs.rows(); ++k) {
        const Eigen::VectorXd ks = Ks.row(k).transpose();
        v(k) = brute_kernel(Xs.row(k).transpose(), Xs.row(k).transpose(), spec, h) - ks.dot(Ainv * ks);
    }
    return v;
}

/// Central finite-difference gradient.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double h) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd up = x, down = x;
        up(i) += h;
        down(i) -= h;
        g(i) = (f(up) - f(down)) / (2.0 * h);
    }
    return g;
}

/// One draw from N(0, K + σ_n² I) using a plain Cholesky factor.
template <class Rng>
Eigen::VectorXd sample_gp(const Eigen::MatrixXd& X, const windgp::KernelSpec& spec, const windgp::HyperParams& h,
                          Rng& rng) {
    const Eigen::MatrixXd A = brute_kernel_matrix(X, X, spec, h) +
                              std::exp(2.0 * h.log_noise_sd) * Eigen::MatrixXd::Identity(X.rows(), X.rows());
    const Eigen::MatrixXd L = A.llt().matrixL();
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(X.rows());
    for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = normal(rng);
    return L * z;
}

/// Squared Mahalanobis distances with the unbiased sample covariance, via an explicit 2×2 inverse.
inline std::vector<double> mahalanobis_sq(const std::vector<Eigen::Vector2d>& pts) {
    const double n = static_cast<double>(pts.size());
    double mx = 0, my = 0;
    for (const auto& p : pts) { mx += p.x(); my += p.y(); }
    mx /= n;
    my /= n;
    double a = 0, b = 0, d = 0;
    for (const auto& p : pts) {
        a += (p.x() - mx) * (p.x() - mx);
        b += (p.x() - mx) * (p.y() - my);
        d += (p.y() - my) * (p.y() - my);
    }
    a /= n - 1;
    b /= n - 1;
    d /= n - 1;
    const double det = a * d - b * b;
    std::vector<double> out;
    for (const auto& p : pts) {
        const double u = p.x() - mx, v = p.y() - my;
        out.push_back((d * u * u - 2 * b * u * v + a * v * v) / det);
    }
    return out;
}

}  // namespace oracle
