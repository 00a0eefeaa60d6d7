#include "windgp/preprocessing.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "windgp/csv.hpp"
#include "windgp/error.hpp"
#include "windgp/random.hpp"

namespace windgp {

std::string_view to_string(FilterReason reason) {
    switch (reason) {
        case FilterReason::BelowCutIn: return "below_cut_in";
        case FilterReason::AboveCutOut: return "above_cut_out";
        case FilterReason::Shutdown: return "shutdown";
        case FilterReason::Curtailed: return "curtailed";
        case FilterReason::Boosted: return "boosted";
        case FilterReason::MahalanobisOutlier: return "mahalanobis_outlier";
    }
    return "unknown";
}

std::size_t FilterReport::removed_total() const { return std::accumulate(removed.begin(), removed.end(), std::size_t{0}); }

void FilterReport::chain(const FilterReport& next) {
    if (next.input_count != retained_count)
        throw std::invalid_argument("FilterReport::chain: stage input does not match retained count");
    for (std::size_t i = 0; i < kFilterReasonCount; ++i) removed[i] += next.removed[i];
    retained_count = next.retained_count;
    link_clipped += next.link_clipped;
}

nlohmann::ordered_json FilterReport::to_json() const {
    nlohmann::ordered_json removed_json = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < kFilterReasonCount; ++i)
        removed_json[std::string(to_string(static_cast<FilterReason>(i)))] = removed[i];
    nlohmann::ordered_json j;
    j["input_count"] = input_count;
    j["retained_count"] = retained_count;
    j["removed_total"] = removed_total();
    j["removed"] = removed_json;
    j["link_clipped"] = link_clipped;
    return j;
}

std::optional<FilterReason> classify_record(const ScadaRecord& r, const TurbineSpec& spec,
                                            const RuleFilterConfig& config) {
    if (r.wind_speed >= spec.cut_out_speed) return FilterReason::AboveCutOut;
    if (r.power <= 0.0 && r.wind_speed >= spec.cut_in_speed) return FilterReason::Shutdown;
    if (r.power > spec.boost_limit) return FilterReason::Boosted;
    if (r.wind_speed > spec.cut_in_speed && r.power < config.curtail_fraction * spec.expected_power(r.wind_speed))
        return FilterReason::Curtailed;
    if (config.remove_below_cut_in && r.wind_speed < spec.cut_in_speed) return FilterReason::BelowCutIn;
    return std::nullopt;
}

RuleFilterResult rule_filter(std::span<const ScadaRecord> records, const TurbineSpec& spec,
                             const RuleFilterConfig& config) {
    spec.validate();
    RuleFilterResult out;
    out.report.input_count = records.size();
    for (const auto& r : records) {
        if (auto reason = classify_record(r, spec, config)) {
            ++out.report.removed_for(*reason);
            out.removed.push_back({r, *reason});
        } else {
            out.retained.push_back(r);
        }
    }
    out.report.retained_count = out.retained.size();
    return out;
}

MahalanobisResult mahalanobis_filter(std::span<const Eigen::Vector2d> points, double threshold) {
    const auto n = points.size();
    if (n < 3) throw DataError("mahalanobis_filter: need at least 3 points, got " + std::to_string(n));

    MahalanobisResult out;
    for (const auto& p : points) out.mean += p;
    out.mean /= static_cast<double>(n);
    for (const auto& p : points) {
        const Eigen::Vector2d d = p - out.mean;
        out.covariance += d * d.transpose();
    }
    out.covariance /= static_cast<double>(n - 1);

    const double a = out.covariance(0, 0), b = out.covariance(0, 1), d = out.covariance(1, 1);
    const double det = a * d - b * b;
    if (!(a > 0.0 && d > 0.0 && det > 1e-12 * a * d))
        throw DataError("mahalanobis_filter: sample covariance is singular (collinear or constant points)");

    out.inlier.resize(n);
    out.distance_sq.resize(n);
    std::size_t kept = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const Eigen::Vector2d e = points[k] - out.mean;
        const double dsq = (d * e.x() * e.x() - 2.0 * b * e.x() * e.y() + a * e.y() * e.y()) / det;
        out.distance_sq[k] = dsq;
        out.inlier[k] = dsq <= threshold;
        kept += out.inlier[k] ? 1 : 0;
    }
    out.report.input_count = n;
    out.report.retained_count = kept;
    out.report.removed_for(FilterReason::MahalanobisOutlier) = n - kept;
    return out;
}

FilterOutcome filter_records(std::span<const ScadaRecord> records, const TurbineSpec& spec,
                             const FilterConfig& config) {
    spec.validate();
    FilterOutcome out;
    out.reasons.assign(records.size(), std::nullopt);
    out.report.input_count = records.size();

    std::vector<std::size_t> survivors;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (auto reason = classify_record(records[i], spec, config.rules)) {
            out.reasons[i] = reason;
            ++out.report.removed_for(*reason);
        } else {
            survivors.push_back(i);
        }
    }
    out.report.retained_count = survivors.size();

    if (config.mahalanobis && !survivors.empty()) {
        std::map<std::string, std::vector<std::size_t>> groups;
        for (auto i : survivors) groups[config.per_turbine ? records[i].turbine_id : std::string()].push_back(i);

        FilterReport stage;
        stage.input_count = survivors.size();
        for (const auto& [turbine, members] : groups) {
            std::vector<Eigen::Vector2d> cloud;
            cloud.reserve(members.size());
            for (auto i : members) cloud.emplace_back(records[i].pitch_angle, records[i].power);
            MahalanobisResult m;
            try {
                m = mahalanobis_filter(cloud, config.mahalanobis_threshold);
            } catch (const DataError& e) {
                throw DataError(turbine.empty() ? std::string(e.what()) : "turbine '" + turbine + "': " + e.what());
            }
            for (std::size_t k = 0; k < members.size(); ++k)
                if (!m.inlier[k]) out.reasons[members[k]] = FilterReason::MahalanobisOutlier;
            stage.removed_for(FilterReason::MahalanobisOutlier) += m.report.removed_for(FilterReason::MahalanobisOutlier);
        }
        stage.retained_count = stage.input_count - stage.removed_for(FilterReason::MahalanobisOutlier);
        out.report.chain(stage);
    }

    for (std::size_t i = 0; i < records.size(); ++i) {
        if (out.reasons[i]) out.removed.push_back({records[i], *out.reasons[i]});
        else out.retained.push_back(records[i]);
    }
    return out;
}

void write_filter_audit(const std::filesystem::path& path, std::span<const ScadaRecord> input,
                        const FilterOutcome& outcome) {
    if (outcome.reasons.size() != input.size())
        throw std::invalid_argument("write_filter_audit: outcome does not match input");
    auto out = csv::open_output(path);
    csv::write_row(out, {"timestamp", "turbine_id", "wind_speed", "power", "yaw_angle", "pitch_angle", "filter_reason"});
    for (std::size_t i = 0; i < input.size(); ++i) {
        const auto& r = input[i];
        csv::write_row(out, {std::to_string(r.timestamp), r.turbine_id, csv::format(r.wind_speed), csv::format(r.power),
                             csv::format(r.yaw_angle), csv::format(r.pitch_angle),
                             outcome.reasons[i] ? std::string(to_string(*outcome.reasons[i])) : std::string()});
    }
}

std::pair<double, double> yaw_to_features(double yaw_degrees) {
    const double theta = yaw_degrees * std::numbers::pi / 180.0;
    return {std::sin(theta), std::cos(theta)};
}

void LinkSpec::validate() const {
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw std::invalid_argument("link epsilon must lie in (0, 0.5)");
    if (!(normalizer > 0.0) || !std::isfinite(normalizer))
        throw std::invalid_argument("link normalizer must be positive");
}

double link_transform(double power, const LinkSpec& link, bool* clipped) {
    link.validate();
    const double raw = power / link.normalizer;
    const double p = std::clamp(raw, link.epsilon, 1.0 - link.epsilon);
    if (clipped) *clipped = p != raw;
    return std::log(p / (1.0 - p));
}

double inverse_link(double z, const LinkSpec& link) {
    link.validate();
    const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return link.normalizer * s;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of empty set");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

LinkSpec fit_link(std::span<const double> powers, double normalizer_quantile, double epsilon) {
    LinkSpec link;
    link.epsilon = epsilon;
    link.normalizer = quantile(std::vector<double>(powers.begin(), powers.end()), normalizer_quantile);
    if (!(link.normalizer > 0.0)) throw DataError("link normalizer is not positive; target power is all zero");
    link.validate();
    return link;
}

std::vector<std::size_t> proportional_allocation(std::span<const std::size_t> bin_counts, std::size_t total) {
    const std::size_t available = std::accumulate(bin_counts.begin(), bin_counts.end(), std::size_t{0});
    std::vector<std::size_t> quota(bin_counts.size(), 0);
    if (available == 0 || total == 0) return quota;
    total = std::min(total, available);

    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t b = 0; b < bin_counts.size(); ++b) {
        // Exact integer arithmetic for the floor; the remainder only orders bins.
        const auto scaled = static_cast<unsigned __int128>(total) * bin_counts[b];
        quota[b] = static_cast<std::size_t>(scaled / available);
        remainders.emplace_back(static_cast<double>(scaled % available) / static_cast<double>(available), b);
        assigned += quota[b];
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    for (std::size_t k = 0; assigned < total; ++k) {
        ++quota[remainders[k].second];
        ++assigned;
    }
    return quota;
}

SampleResult stratified_sample(std::span<const double> yaw_degrees, std::size_t n_target, std::size_t n_bins,
                               std::uint64_t seed) {
    if (n_bins == 0) throw std::invalid_argument("stratified_sample: n_bins must be at least 1");
    if (yaw_degrees.empty()) throw DataError("stratified_sample: no records");

    SampleResult out;
    const auto n = yaw_degrees.size();
    if (n_target >= n) {
        if (n_target > n)
            out.warning = "requested " + std::to_string(n_target) + " rows but only " + std::to_string(n) +
                          " are available; using all";
        out.indices.resize(n);
        std::iota(out.indices.begin(), out.indices.end(), std::size_t{0});
        return out;
    }

    const double width = 360.0 / static_cast<double>(n_bins);
    std::vector<std::vector<std::size_t>> bins(n_bins);
    for (std::size_t i = 0; i < n; ++i) {
        auto b = static_cast<std::size_t>(wrap_degrees(yaw_degrees[i]) / width);
        bins[std::min(b, n_bins - 1)].push_back(i);
    }
    std::vector<std::size_t> counts(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) counts[b] = bins[b].size();
    const auto quota = proportional_allocation(counts, n_target);

    for (std::size_t b = 0; b < n_bins; ++b) {
        if (quota[b] == 0) continue;
        auto rng = make_rng(seed, b);
        std::sample(bins[b].begin(), bins[b].end(), std::back_inserter(out.indices), quota[b], rng);
    }
    std::sort(out.indices.begin(), out.indices.end());
    return out;
}

}  // namespace windgp
