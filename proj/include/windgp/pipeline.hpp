#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "windgp/hyperopt.hpp"
#include "windgp/model_io.hpp"
#include "windgp/preprocessing.hpp"
#include "windgp/scada.hpp"

namespace windgp {

enum class TargetKind { Turbine, Farm };

struct TargetSelection {
    TargetKind kind = TargetKind::Farm;
    std::string turbine_id;  // Turbine only

    std::string describe() const;
    nlohmann::ordered_json to_json() const;
    static TargetSelection from_json(const nlohmann::ordered_json& j);
};

/// Column names of the design matrix, in order.
inline const std::vector<std::string> kFeatureNames{"freestream_wind", "yaw_sin", "yaw_cos"};

/// Untransformed modelling rows for one target.
struct TargetTable {
    std::vector<std::int64_t> timestamps;
    std::vector<FeatureVector> features;
    std::vector<double> yaw_deg;
    std::vector<double> power;

    std::size_t size() const { return power.size(); }
};

/// Builds (freestream wind, sin yaw, cos yaw) → power rows. The freestream
/// proxy is the farm-wide maximum wind speed at each timestamp. Farm targets
/// use total power and the yaw of the fastest turbine; timestamps missing
/// turbines are skipped unless `keep_partial`.
TargetTable build_target_table(std::span<const ScadaRecord> records, const TargetSelection& target,
                               bool keep_partial = false);

Eigen::MatrixXd feature_matrix(std::span<const FeatureVector> features);

struct TrainConfig {
    TargetSelection target;
    std::size_t subset_size = 5000;
    /// Rows used for hyperparameter tuning, drawn (stratified) from the
    /// training subset. The final model is fitted on the full subset.
    std::size_t optimizer_subset = 1000;
    std::size_t strata = 36;
    std::uint64_t seed = 0;
    OptimizerConfig optimizer;
    KernelOrder order = KernelOrder::FirstOrderAdditive;
    double link_epsilon = 1e-4;
    double normalizer_quantile = 0.999;
    std::optional<double> normalizer;  // overrides the quantile when set
    bool keep_partial = false;
    TurbineSpec turbine;  // stored with the model for default prediction grids
};

struct TrainOutcome {
    ModelFile model;
    OptimizationResult optimization;
    nlohmann::ordered_json report;
};

TrainOutcome train_model(std::span<const ScadaRecord> records, const TrainConfig& config);

struct GridSpec {
    double speed_min = 0.0;
    std::optional<double> speed_max;  // default 1.2 × rated speed of the stored turbine spec
    std::size_t speed_points = 50;
    std::size_t direction_points = 72;

    std::vector<double> speeds(const ModelFile& model) const;
    std::vector<double> directions() const;
};

struct GridRow {
    double wind_speed = 0.0;
    double direction_deg = 0.0;
    double yaw_sin = 0.0;
    double yaw_cos = 0.0;
    double mean = 0.0;      // transformed space
    double variance = 0.0;  // latent, transformed space
    double power_mean = 0.0;   // inverse_link(mean)
    double power_lower = 0.0;  // inverse_link(mean - 1.96 sd)
    double power_upper = 0.0;  // inverse_link(mean + 1.96 sd)
    /// Delta-method variance: (dP/dz)² · variance at the mean.
    double power_variance = 0.0;
};

/// Speed-major grid (all directions for the first speed, then the next speed).
std::vector<GridRow> predict_grid(const ModelFile& model, const GridSpec& grid);
void write_prediction_csv(const std::filesystem::path& path, std::span<const GridRow> rows);

struct ComponentCurve {
    std::string name;
    std::size_t dimension = 0;
    std::vector<double> axis;     // wind speed or direction in degrees
    Eigen::VectorXd feature;      // value fed to the component (speed, sin θ or cos θ)
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
};

struct Decomposition {
    double offset = 0.0;
    std::vector<double> speeds;
    std::vector<double> directions;
    ComponentCurve speed;
    ComponentCurve yaw_sin;
    ComponentCurve yaw_cos;
    Eigen::VectorXd directional;  // yaw_sin + yaw_cos component means per direction
    /// Second-order terms on the speed × direction grid (speed-major), one per pair.
    std::vector<std::pair<std::string, Eigen::VectorXd>> pair_terms;

    /// offset + every component at grid point (speed index a, direction index b).
    double total(std::size_t a, std::size_t b) const;
};

Decomposition decompose(const ModelFile& model, const GridSpec& grid);

/// Writes component_<name>.csv per dimension, polar_direction.csv,
/// polar_grid.csv and decomposition.json into `dir`.
void write_decomposition(const std::filesystem::path& dir, const Decomposition& d);

struct EvaluationMetrics {
    std::size_t count = 0;
    double rmse_power = 0.0;
    double mae_power = 0.0;
    double nlpd = 0.0;  // mean negative log predictive density, transformed space

    nlohmann::ordered_json to_json() const;
};

/// Mean of -log N(y | mean, variance).
double gaussian_nlpd(const Eigen::VectorXd& y, const Eigen::VectorXd& mean, const Eigen::VectorXd& variance);

/// Metrics for raw inputs and powers; the observation-noise predictive
/// variance is used for NLPD.
EvaluationMetrics evaluate_model(const ModelFile& model, const Eigen::MatrixXd& X, std::span<const double> power);

/// Builds the model's target rows from SCADA records and evaluates on them.
EvaluationMetrics evaluate_records(const ModelFile& model, std::span<const ScadaRecord> records);

/// Min-max rescaling to [0, 1]; constant input maps to zeros.
Eigen::VectorXd min_max_normalize(const Eigen::VectorXd& v);

TurbineSpec turbine_spec_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json turbine_spec_to_json(const TurbineSpec& spec);

}  // namespace windgp
