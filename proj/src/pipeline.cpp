#include "windgp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "windgp/csv.hpp"
#include "windgp/error.hpp"

namespace windgp {

using json = nlohmann::ordered_json;

namespace {

constexpr double kInterval95 = 1.959963984540054;
constexpr std::uint64_t kOptimizerSubsetSalt = 0x6f7074696d697a65ULL;

std::string format_pair_name(std::size_t i, std::size_t j) {
    return kFeatureNames.at(i) + "_x_" + kFeatureNames.at(j);
}

}  // namespace

std::string TargetSelection::describe() const {
    return kind == TargetKind::Farm ? std::string("farm") : "turbine " + turbine_id;
}

json TargetSelection::to_json() const {
    json j;
    j["kind"] = kind == TargetKind::Farm ? "farm" : "turbine";
    j["turbine_id"] = turbine_id;
    return j;
}

TargetSelection TargetSelection::from_json(const json& j) {
    TargetSelection t;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "farm") t.kind = TargetKind::Farm;
    else if (kind == "turbine") t.kind = TargetKind::Turbine;
    else throw DataError("unknown target kind '" + kind + "'");
    t.turbine_id = j.value("turbine_id", "");
    return t;
}

json turbine_spec_to_json(const TurbineSpec& s) {
    return {{"cut_in_speed", s.cut_in_speed}, {"rated_speed", s.rated_speed}, {"cut_out_speed", s.cut_out_speed},
            {"rated_power", s.rated_power},   {"boost_limit", s.boost_limit}};
}

TurbineSpec turbine_spec_from_json(const json& j) {
    return {j.at("cut_in_speed").get<double>(), j.at("rated_speed").get<double>(), j.at("cut_out_speed").get<double>(),
            j.at("rated_power").get<double>(), j.at("boost_limit").get<double>()};
}

TargetTable build_target_table(std::span<const ScadaRecord> records, const TargetSelection& target,
                               bool keep_partial) {
    if (records.empty()) throw DataError("no records to build training rows from");
    const auto farm = aggregate_farm(records);
    TargetTable table;

    const auto push = [&](std::int64_t ts, double freestream, double yaw, double power) {
        const auto [s, c] = yaw_to_features(yaw);
        table.timestamps.push_back(ts);
        table.features.push_back({freestream, s, c});
        table.yaw_deg.push_back(yaw);
        table.power.push_back(power);
    };

    if (target.kind == TargetKind::Farm) {
        for (const auto& f : farm) {
            if (f.partial && !keep_partial) continue;
            push(f.timestamp, f.max_wind_speed, f.reference_yaw, f.total_power);
        }
    } else {
        std::map<std::int64_t, double> freestream;
        for (const auto& f : farm) freestream.emplace(f.timestamp, f.max_wind_speed);
        for (const auto& r : records) {
            if (r.turbine_id != target.turbine_id) continue;
            push(r.timestamp, freestream.at(r.timestamp), r.yaw_angle, r.power);
        }
    }
    if (table.size() == 0) throw DataError("no training rows for target " + target.describe());
    return table;
}

Eigen::MatrixXd feature_matrix(std::span<const FeatureVector> features) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(features.size()), 3);
    for (std::size_t k = 0; k < features.size(); ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        X(r, 0) = features[k].freestream_wind;
        X(r, 1) = features[k].yaw_sin;
        X(r, 2) = features[k].yaw_cos;
    }
    return X;
}

TrainOutcome train_model(std::span<const ScadaRecord> records, const TrainConfig& config) {
    config.turbine.validate();
    config.optimizer.validate();
    const auto table = build_target_table(records, config.target, config.keep_partial);
    json warnings = json::array();

    const auto subset = stratified_sample(table.yaw_deg, config.subset_size, config.strata, config.seed);
    if (subset.warning) warnings.push_back(*subset.warning);

    std::vector<FeatureVector> features;
    std::vector<double> power, yaw;
    for (auto i : subset.indices) {
        features.push_back(table.features[i]);
        power.push_back(table.power[i]);
        yaw.push_back(table.yaw_deg[i]);
    }

    LinkSpec link = config.normalizer ? LinkSpec{config.link_epsilon, *config.normalizer}
                                      : fit_link(power, config.normalizer_quantile, config.link_epsilon);
    link.validate();

    Dataset data;
    data.X = feature_matrix(features);
    data.y.resize(static_cast<Eigen::Index>(power.size()));
    data.column_names = kFeatureNames;
    std::size_t clipped = 0;
    for (std::size_t k = 0; k < power.size(); ++k) {
        bool was_clipped = false;
        data.y(static_cast<Eigen::Index>(k)) = link_transform(power[k], link, &was_clipped);
        clipped += was_clipped ? 1 : 0;
    }

    const KernelSpec spec = config.order == KernelOrder::SecondOrderAdditive ? KernelSpec::second_order(3)
                                                                             : KernelSpec::first_order(3);
    FitOptions fit_options;
    fit_options.center_targets = true;

    Dataset tuning = data;
    if (config.optimizer_subset < data.rows()) {
        const auto inner = stratified_sample(yaw, config.optimizer_subset, config.strata, config.seed ^ kOptimizerSubsetSalt);
        tuning.X.resize(static_cast<Eigen::Index>(inner.indices.size()), data.X.cols());
        tuning.y.resize(static_cast<Eigen::Index>(inner.indices.size()));
        for (std::size_t k = 0; k < inner.indices.size(); ++k) {
            tuning.X.row(static_cast<Eigen::Index>(k)) = data.X.row(static_cast<Eigen::Index>(inner.indices[k]));
            tuning.y(static_cast<Eigen::Index>(k)) = data.y(static_cast<Eigen::Index>(inner.indices[k]));
        }
    }

    OptimizerConfig opt = config.optimizer;
    opt.seed = config.seed;
    auto optimization = optimize(tuning, spec, opt, fit_options);
    TrainedModel model = fit(data, optimization.theta, spec, fit_options);

    json metadata;
    metadata["target"] = config.target.to_json();
    metadata["features"] = kFeatureNames;
    metadata["turbine_spec"] = turbine_spec_to_json(config.turbine);
    metadata["seed"] = config.seed;

    const auto& theta = model.hyperparams();
    json dims = json::array();
    for (std::size_t i = 0; i < theta.dims(); ++i)
        dims.push_back({{"name", kFeatureNames[i]},
                        {"log_signal_sd", theta.log_signal_sd(static_cast<Eigen::Index>(i))},
                        {"log_length", theta.log_length(static_cast<Eigen::Index>(i))},
                        {"signal_variance", theta.signal_variance(i)},
                        {"length_scale", theta.length(i)}});
    json pairs = json::array();
    const auto spec_pairs = spec.pairs();
    for (std::size_t p = 0; p < spec_pairs.size(); ++p)
        pairs.push_back({{"name", format_pair_name(spec_pairs[p].first, spec_pairs[p].second)},
                         {"signal_variance", theta.pair_variance(p)}});
    json restarts = json::array();
    for (const auto& r : optimization.restarts)
        restarts.push_back({{"restart", r.restart},
                            {"initial_nlml", r.initial_nlml},
                            {"final_nlml", r.final_nlml},
                            {"iterations", r.iterations},
                            {"stop", to_string(r.stop)},
                            {"gradient_norm", r.gradient_norm}});

    json report;
    report["target"] = config.target.to_json();
    report["rows_available"] = table.size();
    report["training_rows"] = data.rows();
    report["optimizer_rows"] = tuning.rows();
    report["link"] = {{"epsilon", link.epsilon}, {"normalizer", link.normalizer}};
    report["link_clipped"] = clipped;
    report["target_offset"] = model.offset();
    report["jitter"] = model.jitter();
    report["optimizer"] = {{"final_nlml", optimization.nlml},
                           {"gradient_norm", optimization.gradient_norm},
                           {"stop", to_string(optimization.stop)},
                           {"best_restart", optimization.best_restart},
                           {"restarts", restarts}};
    report["final_nlml"] = model.nlml();
    report["hyperparameters"] = {{"dimensions", dims},
                                 {"pairs", pairs},
                                 {"noise_variance", theta.noise_variance()},
                                 {"log_noise_sd", theta.log_noise_sd}};
    report["warnings"] = warnings;

    return {ModelFile{std::move(model), link, metadata}, std::move(optimization), std::move(report)};
}

std::vector<double> GridSpec::speeds(const ModelFile& model) const {
    if (speed_points == 0) throw std::invalid_argument("grid needs at least one wind-speed point");
    double hi = 0.0;
    if (speed_max) {
        hi = *speed_max;
    } else if (model.metadata.contains("turbine_spec")) {
        hi = 1.2 * turbine_spec_from_json(model.metadata.at("turbine_spec")).rated_speed;
    } else {
        hi = model.model.dataset().X.col(0).maxCoeff();
    }
    std::vector<double> out(speed_points);
    for (std::size_t k = 0; k < speed_points; ++k)
        out[k] = speed_points == 1 ? speed_min
                                   : speed_min + (hi - speed_min) * static_cast<double>(k) /
                                                     static_cast<double>(speed_points - 1);
    return out;
}

std::vector<double> GridSpec::directions() const {
    if (direction_points == 0) throw std::invalid_argument("grid needs at least one direction point");
    std::vector<double> out(direction_points);
    for (std::size_t k = 0; k < direction_points; ++k)
        out[k] = 360.0 * static_cast<double>(k) / static_cast<double>(direction_points);
    return out;
}

std::vector<GridRow> predict_grid(const ModelFile& model, const GridSpec& grid) {
    if (!model.link) throw DataError("model file has no link specification");
    const auto speeds = grid.speeds(model);
    const auto directions = grid.directions();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(speeds.size() * directions.size()), 3);
    std::vector<GridRow> rows;
    rows.reserve(speeds.size() * directions.size());
    for (double v : speeds)
        for (double deg : directions) {
            const auto [s, c] = yaw_to_features(deg);
            const auto r = static_cast<Eigen::Index>(rows.size());
            X(r, 0) = v;
            X(r, 1) = s;
            X(r, 2) = c;
            rows.push_back({v, deg, s, c});
        }
    const auto prediction = predict(model.model, X);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        auto& row = rows[k];
        row.mean = prediction.mean(static_cast<Eigen::Index>(k));
        row.variance = prediction.variance(static_cast<Eigen::Index>(k));
        const double sd = std::sqrt(row.variance);
        row.power_mean = inverse_link(row.mean, *model.link);
        row.power_lower = inverse_link(row.mean - kInterval95 * sd, *model.link);
        row.power_upper = inverse_link(row.mean + kInterval95 * sd, *model.link);
        const double slope = row.power_mean * (1.0 - row.power_mean / model.link->normalizer);
        row.power_variance = slope * slope * row.variance;
    }
    return rows;
}

void write_prediction_csv(const std::filesystem::path& path, std::span<const GridRow> rows) {
    auto out = csv::open_output(path);
    csv::write_row(out, {"wind_speed", "direction_deg", "yaw_sin", "yaw_cos", "mean", "variance", "power_mean",
                         "power_variance", "power_lower", "power_upper"});
    for (const auto& r : rows)
        csv::write_row(out, {csv::format(r.wind_speed), csv::format(r.direction_deg), csv::format(r.yaw_sin),
                             csv::format(r.yaw_cos), csv::format(r.mean), csv::format(r.variance),
                             csv::format(r.power_mean), csv::format(r.power_variance), csv::format(r.power_lower),
                             csv::format(r.power_upper)});
}

double Decomposition::total(std::size_t a, std::size_t b) const {
    double t = offset + speed.mean(static_cast<Eigen::Index>(a)) + yaw_sin.mean(static_cast<Eigen::Index>(b)) +
               yaw_cos.mean(static_cast<Eigen::Index>(b));
    for (const auto& [name, values] : pair_terms)
        t += values(static_cast<Eigen::Index>(a * directions.size() + b));
    return t;
}

Decomposition decompose(const ModelFile& model, const GridSpec& grid) {
    const auto& gp = model.model;
    if (gp.dataset().dims() != 3) throw DataError("decomposition expects the three wind features");
    Decomposition d;
    d.offset = gp.offset();
    d.speeds = grid.speeds(model);
    d.directions = grid.directions();

    const auto curve = [&](std::string name, std::size_t dim, const std::vector<double>& axis, Eigen::VectorXd feature) {
        ComponentCurve c;
        c.name = std::move(name);
        c.dimension = dim;
        c.axis = axis;
        c.feature = std::move(feature);
        c.mean = predict_component_mean(gp, dim, c.feature);
        c.variance = predict_component_variance(gp, dim, c.feature);
        return c;
    };
    Eigen::VectorXd speed_feature = Eigen::Map<const Eigen::VectorXd>(d.speeds.data(), static_cast<Eigen::Index>(d.speeds.size()));
    Eigen::VectorXd sin_feature(static_cast<Eigen::Index>(d.directions.size()));
    Eigen::VectorXd cos_feature(sin_feature.size());
    for (std::size_t k = 0; k < d.directions.size(); ++k) {
        const auto [s, c] = yaw_to_features(d.directions[k]);
        sin_feature(static_cast<Eigen::Index>(k)) = s;
        cos_feature(static_cast<Eigen::Index>(k)) = c;
    }
    d.speed = curve(kFeatureNames[0], 0, d.speeds, speed_feature);
    d.yaw_sin = curve(kFeatureNames[1], 1, d.directions, sin_feature);
    d.yaw_cos = curve(kFeatureNames[2], 2, d.directions, cos_feature);
    d.directional = d.yaw_sin.mean + d.yaw_cos.mean;

    const auto pairs = gp.spec().pairs();
    if (!pairs.empty()) {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(d.speeds.size() * d.directions.size()), 3);
        Eigen::Index r = 0;
        for (double v : d.speeds)
            for (std::size_t k = 0; k < d.directions.size(); ++k, ++r) {
                X(r, 0) = v;
                X(r, 1) = sin_feature(static_cast<Eigen::Index>(k));
                X(r, 2) = cos_feature(static_cast<Eigen::Index>(k));
            }
        for (std::size_t p = 0; p < pairs.size(); ++p)
            d.pair_terms.emplace_back(format_pair_name(pairs[p].first, pairs[p].second), predict_pair_mean(gp, p, X));
    }
    return d;
}

Eigen::VectorXd min_max_normalize(const Eigen::VectorXd& v) {
    if (v.size() == 0) return v;
    const double lo = v.minCoeff(), hi = v.maxCoeff();
    if (!(hi > lo)) return Eigen::VectorXd::Zero(v.size());
    return (v.array() - lo) / (hi - lo);
}

void write_decomposition(const std::filesystem::path& dir, const Decomposition& d) {
    const auto axis_name = [](const ComponentCurve& c) { return c.dimension == 0 ? "wind_speed" : "direction_deg"; };
    for (const auto* c : {&d.speed, &d.yaw_sin, &d.yaw_cos}) {
        auto out = csv::open_output(dir / ("component_" + c->name + ".csv"));
        csv::write_row(out, {axis_name(*c), c->name, "mean", "variance", "normalized"});
        const auto normalized = min_max_normalize(c->mean);
        for (std::size_t k = 0; k < c->axis.size(); ++k) {
            const auto i = static_cast<Eigen::Index>(k);
            csv::write_row(out, {csv::format(c->axis[k]), csv::format(c->feature(i)), csv::format(c->mean(i)),
                                 csv::format(c->variance(i)), csv::format(normalized(i))});
        }
    }

    {
        auto out = csv::open_output(dir / "polar_direction.csv");
        csv::write_row(out, {"direction_deg", "directional_mean", "normalized"});
        const auto normalized = min_max_normalize(d.directional);
        for (std::size_t k = 0; k < d.directions.size(); ++k) {
            const auto i = static_cast<Eigen::Index>(k);
            csv::write_row(out, {csv::format(d.directions[k]), csv::format(d.directional(i)), csv::format(normalized(i))});
        }
    }

    const auto n_speed = d.speeds.size(), n_dir = d.directions.size();
    Eigen::VectorXd influence(static_cast<Eigen::Index>(n_speed * n_dir));
    for (std::size_t a = 0; a < n_speed; ++a)
        for (std::size_t b = 0; b < n_dir; ++b)
            influence(static_cast<Eigen::Index>(a * n_dir + b)) = d.total(a, b) - d.offset;
    const auto relative = min_max_normalize(influence);
    {
        auto out = csv::open_output(dir / "polar_grid.csv");
        std::vector<std::string> header{"wind_speed", "direction_deg", "speed_component", "directional_component"};
        for (const auto& [name, values] : d.pair_terms) header.push_back(name);
        header.insert(header.end(), {"total_mean", "relative_influence"});
        csv::write_row(out, header);
        for (std::size_t a = 0; a < n_speed; ++a)
            for (std::size_t b = 0; b < n_dir; ++b) {
                const auto k = static_cast<Eigen::Index>(a * n_dir + b);
                std::vector<std::string> row{csv::format(d.speeds[a]), csv::format(d.directions[b]),
                                             csv::format(d.speed.mean(static_cast<Eigen::Index>(a))),
                                             csv::format(d.directional(static_cast<Eigen::Index>(b)))};
                for (const auto& [name, values] : d.pair_terms) row.push_back(csv::format(values(k)));
                row.push_back(csv::format(d.total(a, b)));
                row.push_back(csv::format(relative(k)));
                csv::write_row(out, row);
            }
    }

    Eigen::Index best = 0;
    d.directional.maxCoeff(&best);
    Eigen::Index worst = 0;
    d.directional.minCoeff(&worst);
    json summary;
    summary["space"] = "latent (link-transformed) component means";
    summary["offset"] = d.offset;
    summary["speed_component_range"] = {d.speed.mean.minCoeff(), d.speed.mean.maxCoeff()};
    summary["directional_component_range"] = {d.directional.minCoeff(), d.directional.maxCoeff()};
    summary["strongest_direction_deg"] = d.directions[static_cast<std::size_t>(best)];
    summary["weakest_direction_deg"] = d.directions[static_cast<std::size_t>(worst)];
    json pair_names = json::array();
    for (const auto& [name, values] : d.pair_terms) pair_names.push_back(name);
    summary["pair_terms"] = pair_names;
    auto out = csv::open_output(dir / "decomposition.json");
    out << summary.dump(2) << '\n';
}

json EvaluationMetrics::to_json() const {
    return {{"count", count}, {"rmse_power", rmse_power}, {"mae_power", mae_power}, {"nlpd", nlpd}};
}

double gaussian_nlpd(const Eigen::VectorXd& y, const Eigen::VectorXd& mean, const Eigen::VectorXd& variance) {
    if (y.size() != mean.size() || y.size() != variance.size() || y.size() == 0)
        throw std::invalid_argument("gaussian_nlpd: size mismatch or empty input");
    double total = 0.0;
    for (Eigen::Index k = 0; k < y.size(); ++k) {
        const double r = y(k) - mean(k);
        total += 0.5 * std::log(2.0 * std::numbers::pi * variance(k)) + 0.5 * r * r / variance(k);
    }
    return total / static_cast<double>(y.size());
}

EvaluationMetrics evaluate_model(const ModelFile& model, const Eigen::MatrixXd& X, std::span<const double> power) {
    if (!model.link) throw DataError("model file has no link specification");
    if (static_cast<std::size_t>(X.rows()) != power.size() || power.empty())
        throw DataError("evaluation inputs and targets differ in length or are empty");
    const auto prediction = predict(model.model, X, /*include_noise=*/true);
    EvaluationMetrics m;
    m.count = power.size();
    Eigen::VectorXd z(X.rows());
    double sq = 0.0, abs = 0.0;
    for (std::size_t k = 0; k < power.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        z(i) = link_transform(power[k], *model.link);
        const double err = inverse_link(prediction.mean(i), *model.link) - power[k];
        sq += err * err;
        abs += std::abs(err);
    }
    m.rmse_power = std::sqrt(sq / static_cast<double>(m.count));
    m.mae_power = abs / static_cast<double>(m.count);
    m.nlpd = gaussian_nlpd(z, prediction.mean, prediction.variance);
    return m;
}

EvaluationMetrics evaluate_records(const ModelFile& model, std::span<const ScadaRecord> records) {
    if (!model.metadata.contains("target")) throw DataError("model file does not record its training target");
    const auto target = TargetSelection::from_json(model.metadata.at("target"));
    const auto table = build_target_table(records, target);
    return evaluate_model(model, feature_matrix(table.features), table.power);
}

}  // namespace windgp
