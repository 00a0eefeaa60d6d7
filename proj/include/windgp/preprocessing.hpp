#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "windgp/scada.hpp"

namespace windgp {

enum class FilterReason : std::uint8_t {
    BelowCutIn,
    AboveCutOut,
    Shutdown,
    Curtailed,
    Boosted,
    MahalanobisOutlier,
};
inline constexpr std::size_t kFilterReasonCount = 6;

std::string_view to_string(FilterReason reason);

struct FilterReport {
    std::size_t input_count = 0;
    std::size_t retained_count = 0;
    std::array<std::size_t, kFilterReasonCount> removed{};
    std::size_t link_clipped = 0;  // targets clipped by link_transform (filled by training)

    std::size_t& removed_for(FilterReason r) { return removed[static_cast<std::size_t>(r)]; }
    std::size_t removed_for(FilterReason r) const { return removed[static_cast<std::size_t>(r)]; }
    std::size_t removed_total() const;
    /// Combines counts from a later filter stage whose input was this stage's output.
    void chain(const FilterReport& next);

    nlohmann::ordered_json to_json() const;
};

/// Squared-distance threshold at the 99th percentile of chi-square with 2 dof: -2 ln(0.01).
inline constexpr double kChiSquare2Dof99 = 9.210340371976184;

struct RuleFilterConfig {
    double curtail_fraction = 0.8;
    bool remove_below_cut_in = false;
};

struct RemovedRecord {
    ScadaRecord record;
    FilterReason reason;
};

struct RuleFilterResult {
    std::vector<ScadaRecord> retained;
    std::vector<RemovedRecord> removed;
    FilterReport report;
};

/// First rule that rejects the record, checked in the order cut-out,
/// shutdown, boosted, curtailed, below cut-in.
std::optional<FilterReason> classify_record(const ScadaRecord& record, const TurbineSpec& spec,
                                            const RuleFilterConfig& config = {});

RuleFilterResult rule_filter(std::span<const ScadaRecord> records, const TurbineSpec& spec,
                             const RuleFilterConfig& config = {});

struct MahalanobisResult {
    std::vector<bool> inlier;
    std::vector<double> distance_sq;
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
    FilterReport report;
};

/// Single-pass squared Mahalanobis screen of a 2-D cloud using its own sample
/// mean and (n-1)-normalized covariance. Points with D² <= threshold are kept.
/// Throws DataError for fewer than three points or a singular covariance.
MahalanobisResult mahalanobis_filter(std::span<const Eigen::Vector2d> points, double threshold = kChiSquare2Dof99);

struct FilterConfig {
    RuleFilterConfig rules;
    double mahalanobis_threshold = kChiSquare2Dof99;
    bool mahalanobis = true;
    /// Fit one (pitch, power) cloud per turbine rather than one for the farm.
    bool per_turbine = true;
};

struct FilterOutcome {
    std::vector<ScadaRecord> retained;  // input order preserved
    std::vector<RemovedRecord> removed;
    std::vector<std::optional<FilterReason>> reasons;  // aligned with the input
    FilterReport report;
};

/// Rule filter followed by the Mahalanobis screen on (pitch_angle, power).
FilterOutcome filter_records(std::span<const ScadaRecord> records, const TurbineSpec& spec,
                             const FilterConfig& config = {});

/// Audit CSV: every input row with a trailing `filter_reason` column (empty when retained).
void write_filter_audit(const std::filesystem::path& path, std::span<const ScadaRecord> input,
                        const FilterOutcome& outcome);

// Features and link ---------------------------------------------------------

struct FeatureVector {
    double freestream_wind = 0.0;
    double yaw_sin = 0.0;
    double yaw_cos = 1.0;
};

/// (sin θ, cos θ) of a yaw angle given in degrees.
std::pair<double, double> yaw_to_features(double yaw_degrees);

/// Logit of normalized power, clipped to [epsilon, 1 - epsilon].
struct LinkSpec {
    double epsilon = 1e-4;
    double normalizer = 1.0;  // kW

    void validate() const;
};

double link_transform(double power, const LinkSpec& link, bool* clipped = nullptr);
double inverse_link(double z, const LinkSpec& link);

/// Linear-interpolation sample quantile (Hyndman-Fan type 7).
double quantile(std::vector<double> values, double q);

/// Link with the normalizer set to the given quantile of the target powers.
LinkSpec fit_link(std::span<const double> powers, double normalizer_quantile = 0.999, double epsilon = 1e-4);

struct SampleResult {
    std::vector<std::size_t> indices;  // ascending
    std::optional<std::string> warning;
};

/// Yaw-stratified sampling without replacement. Bins are equal-width over
/// [0, 360); per-bin quotas follow largest-remainder rounding of the
/// proportional allocation, ties going to the lower bin index.
SampleResult stratified_sample(std::span<const double> yaw_degrees, std::size_t n_target, std::size_t n_bins,
                               std::uint64_t seed);

/// Largest-remainder allocation of `total` across bins with the given counts.
std::vector<std::size_t> proportional_allocation(std::span<const std::size_t> bin_counts, std::size_t total);

}  // namespace windgp
