#include "windgp/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace windgp {

KernelSpec KernelSpec::first_order(std::size_t dims) {
    KernelSpec s;
    for (std::size_t i = 0; i < dims; ++i) s.active.push_back(i);
    return s;
}

KernelSpec KernelSpec::second_order(std::size_t dims) {
    auto s = first_order(dims);
    s.order = KernelOrder::SecondOrderAdditive;
    return s;
}

void KernelSpec::validate(std::size_t dims) const {
    if (active.empty()) throw std::invalid_argument("kernel spec has no active dimensions");
    for (std::size_t k = 0; k < active.size(); ++k) {
        if (active[k] >= dims)
            throw std::invalid_argument("active dimension " + std::to_string(active[k]) + " out of range for " +
                                        std::to_string(dims) + " inputs");
        if (k > 0 && active[k] <= active[k - 1]) throw std::invalid_argument("active dimensions must be ascending");
    }
}

std::vector<std::pair<std::size_t, std::size_t>> KernelSpec::pairs() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (order != KernelOrder::SecondOrderAdditive) return out;
    for (std::size_t a = 0; a < active.size(); ++a)
        for (std::size_t b = a + 1; b < active.size(); ++b) out.emplace_back(active[a], active[b]);
    return out;
}

HyperParams HyperParams::unit(std::size_t dims, std::size_t n_pairs) {
    HyperParams h;
    h.log_signal_sd = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims));
    h.log_length = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims));
    h.log_pair_sd = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_pairs));
    h.log_noise_sd = 0.0;
    return h;
}

double HyperParams::signal_variance(std::size_t i) const { return std::exp(2.0 * log_signal_sd(static_cast<Eigen::Index>(i))); }
double HyperParams::pair_variance(std::size_t p) const { return std::exp(2.0 * log_pair_sd(static_cast<Eigen::Index>(p))); }
double HyperParams::length(std::size_t i) const { return std::exp(log_length(static_cast<Eigen::Index>(i))); }
double HyperParams::noise_variance() const { return std::exp(2.0 * log_noise_sd); }

Eigen::VectorXd HyperParams::pack() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(size()));
    const auto d = log_signal_sd.size();
    v.head(d) = log_signal_sd;
    v.segment(d, d) = log_length;
    v.segment(2 * d, log_pair_sd.size()) = log_pair_sd;
    v(v.size() - 1) = log_noise_sd;
    return v;
}

HyperParams HyperParams::unpack(const Eigen::VectorXd& packed, std::size_t dims, std::size_t n_pairs) {
    const auto d = static_cast<Eigen::Index>(dims);
    const auto p = static_cast<Eigen::Index>(n_pairs);
    if (packed.size() != 2 * d + p + 1) throw std::invalid_argument("packed hyperparameter vector has wrong length");
    HyperParams h;
    h.log_signal_sd = packed.head(d);
    h.log_length = packed.segment(d, d);
    h.log_pair_sd = packed.segment(2 * d, p);
    h.log_noise_sd = packed(packed.size() - 1);
    return h;
}

void HyperParams::validate(const KernelSpec& spec) const {
    if (dims() == 0) throw std::invalid_argument("hyperparameters need at least one dimension");
    if (log_length.size() != log_signal_sd.size())
        throw std::invalid_argument("length-scale and signal vectors differ in size");
    if (static_cast<std::size_t>(log_pair_sd.size()) != spec.pairs().size())
        throw std::invalid_argument("pair variance count does not match kernel spec");
    if (!pack().allFinite()) throw std::invalid_argument("hyperparameters must be finite");
    spec.validate(dims());
}

double sq_exp(double x, double x_prime, double signal_sd, double length) {
    const double r = (x - x_prime) / length;
    return signal_sd * signal_sd * std::exp(-0.5 * r * r);
}

double additive_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime, const HyperParams& theta) {
    const auto d = theta.dims();
    if (static_cast<std::size_t>(x.size()) != d || static_cast<std::size_t>(x_prime.size()) != d)
        throw std::invalid_argument("additive_kernel: input dimension does not match hyperparameters");
    double k = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        k += sq_exp(x(ii), x_prime(ii), std::exp(theta.log_signal_sd(ii)), theta.length(i));
    }
    return k;
}

double product_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime, const HyperParams& theta,
                      std::pair<std::size_t, std::size_t> pair, double pair_signal_sd) {
    const auto [i, j] = pair;
    if (i == j) throw std::invalid_argument("product_kernel: pair dimensions must differ");
    const auto d = theta.dims();
    if (i >= d || j >= d || static_cast<std::size_t>(x.size()) != d || static_cast<std::size_t>(x_prime.size()) != d)
        throw std::invalid_argument("product_kernel: dimension out of range");
    const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
    return pair_signal_sd * pair_signal_sd * sq_exp(x(ii), x_prime(ii), 1.0, theta.length(i)) *
           sq_exp(x(jj), x_prime(jj), 1.0, theta.length(j));
}

double kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime, const KernelSpec& spec,
              const HyperParams& theta) {
    theta.validate(spec);
    if (static_cast<std::size_t>(x.size()) != theta.dims() || static_cast<std::size_t>(x_prime.size()) != theta.dims())
        throw std::invalid_argument("kernel: input dimension does not match hyperparameters");
    double k = 0.0;
    for (auto i : spec.active) {
        const auto ii = static_cast<Eigen::Index>(i);
        k += sq_exp(x(ii), x_prime(ii), std::exp(theta.log_signal_sd(ii)), theta.length(i));
    }
    const auto pairs = spec.pairs();
    for (std::size_t p = 0; p < pairs.size(); ++p)
        k += product_kernel(x, x_prime, theta, pairs[p], std::exp(theta.log_pair_sd(static_cast<Eigen::Index>(p))));
    return k;
}

namespace {

void check_inputs(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xp, const KernelSpec& spec,
                  const HyperParams& theta) {
    theta.validate(spec);
    if (static_cast<std::size_t>(X.cols()) != theta.dims() || static_cast<std::size_t>(Xp.cols()) != theta.dims())
        throw std::invalid_argument("kernel_matrix: input has " + std::to_string(X.cols()) + "/" +
                                    std::to_string(Xp.cols()) + " columns, hyperparameters expect " +
                                    std::to_string(theta.dims()));
}

}  // namespace

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xp, const KernelSpec& spec,
                              const HyperParams& theta) {
    check_inputs(X, Xp, spec, theta);
    const auto n = X.rows(), m = Xp.rows();
    const auto& active = spec.active;
    const auto pairs = spec.pairs();

    std::vector<double> variance, inv_two_l2;
    for (auto i : active) {
        variance.push_back(theta.signal_variance(i));
        inv_two_l2.push_back(0.5 / (theta.length(i) * theta.length(i)));
    }
    // Positions of each pair's dimensions within `active`.
    std::vector<std::pair<std::size_t, std::size_t>> pair_slots;
    std::vector<double> pair_var;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        std::size_t a = 0, b = 0;
        for (std::size_t k = 0; k < active.size(); ++k) {
            if (active[k] == pairs[p].first) a = k;
            if (active[k] == pairs[p].second) b = k;
        }
        pair_slots.emplace_back(a, b);
        pair_var.push_back(theta.pair_variance(p));
    }

    Eigen::MatrixXd K(n, m);
    std::vector<double> unit(active.size());
    const bool symmetric = &X == &Xp;
    for (Eigen::Index c = 0; c < m; ++c) {
        const Eigen::Index r0 = symmetric ? c : 0;
        for (Eigen::Index r = r0; r < n; ++r) {
            double k = 0.0;
            for (std::size_t a = 0; a < active.size(); ++a) {
                const auto col = static_cast<Eigen::Index>(active[a]);
                const double diff = X(r, col) - Xp(c, col);
                unit[a] = std::exp(-diff * diff * inv_two_l2[a]);
                k += variance[a] * unit[a];
            }
            for (std::size_t p = 0; p < pair_slots.size(); ++p)
                k += pair_var[p] * unit[pair_slots[p].first] * unit[pair_slots[p].second];
            K(r, c) = k;
        }
    }
    if (symmetric)
        K.triangularView<Eigen::StrictlyUpper>() = K.transpose().triangularView<Eigen::StrictlyUpper>();
    return K;
}

Eigen::MatrixXd component_kernel_matrix(const Eigen::VectorXd& x_col, const Eigen::VectorXd& x_col_prime,
                                        std::size_t i, const HyperParams& theta) {
    if (i >= theta.dims())
        throw std::out_of_range("component index " + std::to_string(i) + " out of range for " +
                                std::to_string(theta.dims()) + " dimensions");
    const double variance = theta.signal_variance(i);
    const double inv_two_l2 = 0.5 / (theta.length(i) * theta.length(i));
    Eigen::MatrixXd K(x_col.size(), x_col_prime.size());
    for (Eigen::Index c = 0; c < K.cols(); ++c)
        for (Eigen::Index r = 0; r < K.rows(); ++r) {
            const double diff = x_col(r) - x_col_prime(c);
            K(r, c) = variance * std::exp(-diff * diff * inv_two_l2);
        }
    return K;
}

Eigen::MatrixXd pair_kernel_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Xp, std::size_t p,
                                   const KernelSpec& spec, const HyperParams& theta) {
    check_inputs(X, Xp, spec, theta);
    const auto pairs = spec.pairs();
    if (p >= pairs.size()) throw std::out_of_range("pair index " + std::to_string(p) + " out of range");
    const auto i = static_cast<Eigen::Index>(pairs[p].first), j = static_cast<Eigen::Index>(pairs[p].second);
    const double li = theta.length(pairs[p].first), lj = theta.length(pairs[p].second);
    const double variance = theta.pair_variance(p);
    Eigen::MatrixXd K(X.rows(), Xp.rows());
    for (Eigen::Index c = 0; c < K.cols(); ++c)
        for (Eigen::Index r = 0; r < K.rows(); ++r) {
            const double di = (X(r, i) - Xp(c, i)) / li;
            const double dj = (X(r, j) - Xp(c, j)) / lj;
            K(r, c) = variance * std::exp(-0.5 * (di * di + dj * dj));
        }
    return K;
}

std::vector<Eigen::MatrixXd> kernel_grad(const Eigen::MatrixXd& X, const KernelSpec& spec, const HyperParams& theta) {
    check_inputs(X, X, spec, theta);
    const auto d = theta.dims();
    const auto n = X.rows();
    const auto pairs = spec.pairs();
    std::vector<Eigen::MatrixXd> grads(2 * d + pairs.size(), Eigen::MatrixXd::Zero(n, n));

    for (auto i : spec.active) {
        const auto ii = static_cast<Eigen::Index>(i);
        const Eigen::MatrixXd Ki = component_kernel_matrix(X.col(ii), X.col(ii), i, theta);
        const double inv_l2 = 1.0 / (theta.length(i) * theta.length(i));
        grads[i] = 2.0 * Ki;
        for (Eigen::Index c = 0; c < n; ++c)
            for (Eigen::Index r = 0; r < n; ++r) {
                const double diff = X(r, ii) - X(c, ii);
                grads[d + i](r, c) = Ki(r, c) * diff * diff * inv_l2;
            }
    }
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const Eigen::MatrixXd Kp = pair_kernel_matrix(X, X, p, spec, theta);
        grads[2 * d + p] = 2.0 * Kp;
        for (auto dim : {pairs[p].first, pairs[p].second}) {
            const auto col = static_cast<Eigen::Index>(dim);
            const double inv_l2 = 1.0 / (theta.length(dim) * theta.length(dim));
            for (Eigen::Index c = 0; c < n; ++c)
                for (Eigen::Index r = 0; r < n; ++r) {
                    const double diff = X(r, col) - X(c, col);
                    grads[d + dim](r, c) += Kp(r, c) * diff * diff * inv_l2;
                }
        }
    }
    return grads;
}

double prior_variance(const KernelSpec& spec, const HyperParams& theta) {
    double v = 0.0;
    for (auto i : spec.active) v += theta.signal_variance(i);
    for (std::size_t p = 0; p < spec.pairs().size(); ++p) v += theta.pair_variance(p);
    return v;
}

}  // namespace windgp
