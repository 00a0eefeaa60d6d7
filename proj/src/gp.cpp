#include "windgp/gp.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "windgp/error.hpp"

namespace windgp {

namespace {

constexpr double kJitterStart = 1e-8;
constexpr double kJitterMax = 1e-4;
constexpr Eigen::Index kPredictChunk = 2048;

void check_columns(const TrainedModel& model, const Eigen::MatrixXd& X_star) {
    if (X_star.cols() != model.dataset().X.cols())
        throw std::invalid_argument("prediction input has " + std::to_string(X_star.cols()) +
                                    " columns, model expects " + std::to_string(model.dataset().X.cols()));
}

void check_component(const TrainedModel& model, std::size_t i) {
    if (i >= model.dataset().dims())
        throw std::out_of_range("component " + std::to_string(i) + " out of range for " +
                                std::to_string(model.dataset().dims()) + " dimensions");
}

bool is_active(const KernelSpec& spec, std::size_t i) {
    for (auto a : spec.active)
        if (a == i) return true;
    return false;
}

Eigen::VectorXd clamp_variance(Eigen::VectorXd v) {
    for (Eigen::Index k = 0; k < v.size(); ++k)
        if (v(k) < 0.0) v(k) = 0.0;
    return v;
}

}  // namespace

void Dataset::validate(std::size_t min_rows) const {
    if (X.rows() != y.size())
        throw DataError("dataset has " + std::to_string(X.rows()) + " input rows but " + std::to_string(y.size()) +
                        " targets");
    if (rows() < min_rows)
        throw DataError("dataset needs at least " + std::to_string(min_rows) + " rows, got " + std::to_string(rows()));
    if (X.cols() < 1) throw DataError("dataset has no input columns");
    if (!X.allFinite() || !y.allFinite()) throw DataError("dataset contains non-finite values");
    if (!column_names.empty() && column_names.size() != dims())
        throw DataError("dataset column names do not match column count");
}

double TrainedModel::log_det() const {
    return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

double TrainedModel::nlml() const {
    const Eigen::VectorXd yc = data_.y.array() - offset_;
    const double n = static_cast<double>(data_.rows());
    return 0.5 * yc.dot(alpha_) + 0.5 * log_det() + 0.5 * n * std::log(2.0 * std::numbers::pi);
}

Eigen::MatrixXd TrainedModel::solve_lower(const Eigen::MatrixXd& b) const {
    return llt_.matrixL().solve(b);
}

namespace {

/// Shared factorization path for fit() and restore_model(). A positive
/// `jitter` on entry is used as-is; otherwise it is escalated on failure.
void factorize(Eigen::LLT<Eigen::MatrixXd>& llt, Eigen::VectorXd& alpha, const Dataset& data,
               const HyperParams& theta, const KernelSpec& spec, double offset, double& jitter) {
    Eigen::MatrixXd A = kernel_matrix(data.X, data.X, spec, theta);
    if (!A.allFinite()) throw NumericalError("kernel matrix contains non-finite entries");
    const double mean_diag = A.diagonal().mean();
    A.diagonal().array() += theta.noise_variance();

    if (jitter > 0.0) {
        A.diagonal().array() += jitter;
        llt.compute(A);
        if (llt.info() != Eigen::Success) throw NumericalError("Cholesky factorization failed with stored jitter");
    } else {
        llt.compute(A);
        for (double relative = kJitterStart; llt.info() != Eigen::Success; relative *= 10.0) {
            if (relative > kJitterMax * (1.0 + 1e-9))
                throw NumericalError("Cholesky factorization failed even with diagonal jitter of " +
                                     std::to_string(kJitterMax) + " x mean(diag K)");
            jitter = relative * mean_diag;
            Eigen::MatrixXd Aj = A;
            Aj.diagonal().array() += jitter;
            llt.compute(Aj);
        }
    }
    const Eigen::VectorXd yc = data.y.array() - offset;
    alpha = llt.solve(yc);
    if (!alpha.allFinite()) throw NumericalError("linear solve produced non-finite weights");
}

}  // namespace

TrainedModel fit(const Dataset& data, const HyperParams& theta, const KernelSpec& spec, const FitOptions& options) {
    data.validate(options.min_rows);
    if (data.rows() > kMaxTrainingRows)
        throw DataError("exact GP is limited to " + std::to_string(kMaxTrainingRows) + " training rows, got " +
                        std::to_string(data.rows()));
    if (theta.dims() != data.dims())
        throw std::invalid_argument("hyperparameters have " + std::to_string(theta.dims()) +
                                    " dimensions, dataset has " + std::to_string(data.dims()));
    theta.validate(spec);

    TrainedModel model;
    model.data_ = data;
    model.theta_ = theta;
    model.spec_ = spec;
    model.offset_ = options.center_targets ? data.y.mean() : 0.0;
    model.jitter_ = 0.0;
    factorize(model.llt_, model.alpha_, model.data_, theta, spec, model.offset_, model.jitter_);
    return model;
}

TrainedModel restore_model(Dataset data, const HyperParams& theta, const KernelSpec& spec, double offset,
                           double jitter) {
    data.validate(1);
    if (theta.dims() != data.dims()) throw DataError("stored hyperparameters do not match stored dataset");
    theta.validate(spec);
    TrainedModel model;
    model.data_ = std::move(data);
    model.theta_ = theta;
    model.spec_ = spec;
    model.offset_ = offset;
    model.jitter_ = jitter;
    factorize(model.llt_, model.alpha_, model.data_, theta, spec, offset, model.jitter_);
    return model;
}

double nlml(const Dataset& data, const HyperParams& theta, const KernelSpec& spec, const FitOptions& options) {
    return fit(data, theta, spec, options).nlml();
}

NlmlEvaluation nlml_with_grad(const Dataset& data, const HyperParams& theta, const KernelSpec& spec,
                              const FitOptions& options) {
    const TrainedModel model = fit(data, theta, spec, options);
    const auto n = static_cast<Eigen::Index>(data.rows());
    const auto d = theta.dims();

    // W = A⁻¹ - ααᵀ; each gradient entry is ½ Σ W ∘ ∂A/∂η.
    Eigen::MatrixXd W = model.solve(Eigen::MatrixXd::Identity(n, n));
    W.noalias() -= model.alpha() * model.alpha().transpose();

    const auto& active = spec.active;
    const auto pairs = spec.pairs();
    std::vector<double> variance, inv_l2;
    for (auto i : active) {
        variance.push_back(theta.signal_variance(i));
        inv_l2.push_back(1.0 / (theta.length(i) * theta.length(i)));
    }
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

    std::vector<double> g_signal(active.size(), 0.0), g_length(active.size(), 0.0), g_pair(pairs.size(), 0.0);
    std::vector<double> unit(active.size()), scaled_sq(active.size());
    const auto& X = data.X;
    for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::Index r = c; r < n; ++r) {
            const double w = (r == c ? 1.0 : 2.0) * W(r, c);
            for (std::size_t a = 0; a < active.size(); ++a) {
                const auto col = static_cast<Eigen::Index>(active[a]);
                const double diff = X(r, col) - X(c, col);
                scaled_sq[a] = diff * diff * inv_l2[a];
                unit[a] = std::exp(-0.5 * scaled_sq[a]);
                const double k = w * variance[a] * unit[a];
                g_signal[a] += k;
                g_length[a] += 0.5 * k * scaled_sq[a];
            }
            for (std::size_t p = 0; p < pair_slots.size(); ++p) {
                const auto [a, b] = pair_slots[p];
                const double k = w * pair_var[p] * unit[a] * unit[b];
                g_pair[p] += k;
                g_length[a] += 0.5 * k * scaled_sq[a];
                g_length[b] += 0.5 * k * scaled_sq[b];
            }
        }
    }

    NlmlEvaluation out;
    out.value = model.nlml();
    out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(theta.size()));
    for (std::size_t a = 0; a < active.size(); ++a) {
        out.gradient(static_cast<Eigen::Index>(active[a])) = g_signal[a];
        out.gradient(static_cast<Eigen::Index>(d + active[a])) = g_length[a];
    }
    for (std::size_t p = 0; p < pairs.size(); ++p) out.gradient(static_cast<Eigen::Index>(2 * d + p)) = g_pair[p];
    out.gradient(out.gradient.size() - 1) = theta.noise_variance() * W.trace();
    return out;
}

Eigen::VectorXd nlml_grad(const Dataset& data, const HyperParams& theta, const KernelSpec& spec,
                          const FitOptions& options) {
    return nlml_with_grad(data, theta, spec, options).gradient;
}

Eigen::VectorXd predict_mean(const TrainedModel& model, const Eigen::MatrixXd& X_star) {
    check_columns(model, X_star);
    Eigen::VectorXd mean(X_star.rows());
    for (Eigen::Index start = 0; start < X_star.rows(); start += kPredictChunk) {
        const auto len = std::min(kPredictChunk, X_star.rows() - start);
        const Eigen::MatrixXd chunk = X_star.middleRows(start, len);
        mean.segment(start, len) =
            kernel_matrix(chunk, model.dataset().X, model.spec(), model.hyperparams()) * model.alpha();
    }
    return mean.array() + model.offset();
}

Eigen::VectorXd predict_component_mean(const TrainedModel& model, std::size_t i, const Eigen::VectorXd& x_star) {
    check_component(model, i);
    if (!is_active(model.spec(), i)) return Eigen::VectorXd::Zero(x_star.size());
    const Eigen::VectorXd column = model.dataset().X.col(static_cast<Eigen::Index>(i));
    return component_kernel_matrix(x_star, column, i, model.hyperparams()) * model.alpha();
}

Eigen::VectorXd predict_pair_mean(const TrainedModel& model, std::size_t p, const Eigen::MatrixXd& X_star) {
    check_columns(model, X_star);
    return pair_kernel_matrix(X_star, model.dataset().X, p, model.spec(), model.hyperparams()) * model.alpha();
}

Eigen::VectorXd predict_variance(const TrainedModel& model, const Eigen::MatrixXd& X_star, bool include_noise) {
    check_columns(model, X_star);
    const double prior = prior_variance(model.spec(), model.hyperparams());
    Eigen::VectorXd var(X_star.rows());
    for (Eigen::Index start = 0; start < X_star.rows(); start += kPredictChunk) {
        const auto len = std::min(kPredictChunk, X_star.rows() - start);
        const Eigen::MatrixXd chunk = X_star.middleRows(start, len);
        const Eigen::MatrixXd V =
            model.solve_lower(kernel_matrix(model.dataset().X, chunk, model.spec(), model.hyperparams()));
        var.segment(start, len) = prior - V.colwise().squaredNorm().transpose().array();
    }
    var = clamp_variance(std::move(var));
    if (include_noise) var.array() += model.hyperparams().noise_variance();
    return var;
}

Eigen::VectorXd predict_component_variance(const TrainedModel& model, std::size_t i, const Eigen::VectorXd& x_star) {
    check_component(model, i);
    if (!is_active(model.spec(), i)) return Eigen::VectorXd::Zero(x_star.size());
    const Eigen::VectorXd column = model.dataset().X.col(static_cast<Eigen::Index>(i));
    const Eigen::MatrixXd V = model.solve_lower(component_kernel_matrix(column, x_star, i, model.hyperparams()));
    Eigen::VectorXd var = model.hyperparams().signal_variance(i) - V.colwise().squaredNorm().transpose().array();
    return clamp_variance(std::move(var));
}

PredictionResult predict(const TrainedModel& model, const Eigen::MatrixXd& X_star, bool include_noise) {
    return {predict_mean(model, X_star), predict_variance(model, X_star, include_noise)};
}

}  // namespace windgp
