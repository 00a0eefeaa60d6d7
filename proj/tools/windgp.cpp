#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "windgp/csv.hpp"
#include "windgp/error.hpp"
#include "windgp/pipeline.hpp"
#include "windgp/synthetic.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace windgp;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

void add_turbine_options(CLI::App* cmd, TurbineSpec& spec) {
    cmd->add_option("--cut-in", spec.cut_in_speed, "Cut-in wind speed (m/s)")->capture_default_str();
    cmd->add_option("--rated-speed", spec.rated_speed, "Rated wind speed (m/s)")->capture_default_str();
    cmd->add_option("--cut-out", spec.cut_out_speed, "Cut-out wind speed (m/s)")->capture_default_str();
    cmd->add_option("--rated-power", spec.rated_power, "Rated power (kW)")->capture_default_str();
    cmd->add_option("--boost-limit", spec.boost_limit, "Power above which a record counts as boosted (kW)")
        ->capture_default_str();
}

void add_grid_options(CLI::App* cmd, GridSpec& grid, std::optional<double>& speed_max) {
    cmd->add_option("--speed-min", grid.speed_min, "Lowest grid wind speed (m/s)")->capture_default_str();
    cmd->add_option("--speed-max", speed_max, "Highest grid wind speed (m/s); default 1.2 x rated speed");
    cmd->add_option("--speed-points", grid.speed_points, "Number of wind-speed points")
        ->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--direction-points", grid.direction_points, "Number of directions over [0, 360)")
        ->capture_default_str()->check(CLI::PositiveNumber);
}

void require_directory(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("output directory does not exist: " + dir.string());
}

void write_json(const fs::path& path, const json& doc) {
    auto out = csv::open_output(path);
    out << doc.dump(2) << '\n';
    if (!out) throw DataError("cannot write " + path.string());
}

ColumnMapping mapping_from(const std::string& path) {
    return path.empty() ? ColumnMapping{} : ColumnMapping::from_file(path);
}

std::vector<ScadaRecord> load_input(const std::string& path, const std::string& columns, bool skip_invalid) {
    auto loaded = load_records(path, mapping_from(columns), LoadOptions{skip_invalid});
    for (const auto& w : loaded.warnings) std::cerr << "warning: " << path << " line " << w.line << ": " << w.message << '\n';
    for (const auto& r : loaded.rejected) std::cerr << "skipped: " << path << " line " << r.line << ": " << r.message << '\n';
    return std::move(loaded.records);
}

// generate ---------------------------------------------------------------------

struct GenerateArgs {
    std::string out_dir;
    std::size_t records = 52560 * 9;
    std::size_t rows = 3, cols = 3;
    double spacing = 500.0;
    TurbineSpec turbine;
    GeneratorConfig config;
};

void run_generate(const GenerateArgs& a) {
    require_directory(a.out_dir);
    const auto layout = FarmLayout::grid(a.rows, a.cols, a.spacing, a.turbine);
    GeneratorConfig config = a.config;
    const auto turbines = layout.turbines.size();
    config.sample_count = (a.records + turbines - 1) / turbines;
    const auto farm = generate(layout, config);

    const fs::path dir = a.out_dir;
    write_records(dir / "scada.csv", farm.records, /*with_flags=*/false);
    write_truth(dir / "truth.csv", farm.truth);
    write_layout(dir / "layout.csv", layout);
    write_directional_truth(dir / "directional_truth.csv", layout, config.wake);
    std::cout << "generated " << farm.records.size() << " records (" << config.sample_count << " timestamps x "
              << turbines << " turbines) in " << dir.string() << '\n';
}

// filter -----------------------------------------------------------------------

struct FilterArgs {
    std::string input, out_dir, columns;
    bool skip_invalid = false;
    bool no_mahalanobis = false;
    bool pooled = false;
    TurbineSpec turbine;
    FilterConfig config;
};

void run_filter(FilterArgs a) {
    require_directory(a.out_dir);
    a.turbine.validate();
    a.config.mahalanobis = !a.no_mahalanobis;
    a.config.per_turbine = !a.pooled;
    const auto records = load_input(a.input, a.columns, a.skip_invalid);
    const auto outcome = filter_records(records, a.turbine, a.config);

    const fs::path dir = a.out_dir;
    write_records(dir / "filtered.csv", outcome.retained);
    write_filter_audit(dir / "audit.csv", records, outcome);
    write_json(dir / "filter_report.json", outcome.report.to_json());
    std::cout << "retained " << outcome.report.retained_count << " of " << outcome.report.input_count << " records\n";
}

// train ------------------------------------------------------------------------

struct TrainArgs {
    std::string input, output, report, trace, columns;
    std::string target = "farm";
    std::string turbine_id;
    std::string order = "first";
    std::optional<double> normalizer;
    bool skip_invalid = false;
    TrainConfig config;
};

void run_train(TrainArgs a) {
    if (a.target == "turbine") {
        if (a.turbine_id.empty()) throw std::invalid_argument("--target turbine needs --turbine-id");
        a.config.target = {TargetKind::Turbine, a.turbine_id};
    } else {
        if (!a.turbine_id.empty()) throw std::invalid_argument("--turbine-id is only valid with --target turbine");
        a.config.target = {TargetKind::Farm, ""};
    }
    a.config.order = a.order == "second" ? KernelOrder::SecondOrderAdditive : KernelOrder::FirstOrderAdditive;
    a.config.normalizer = a.normalizer;
    const auto records = load_input(a.input, a.columns, a.skip_invalid);
    const auto outcome = train_model(records, a.config);

    save_model(outcome.model.model, a.output, outcome.model.link, outcome.model.metadata);
    if (!a.report.empty()) write_json(a.report, outcome.report);
    if (!a.trace.empty()) write_trace_csv(a.trace, outcome.optimization);
    std::cout << "trained " << a.config.target.describe() << " on " << outcome.model.model.dataset().rows()
              << " rows; NLML " << outcome.model.model.nlml() << " (optimizer: "
              << to_string(outcome.optimization.stop) << ")\n";
}

// predict / decompose / evaluate -------------------------------------------------

struct GridArgs {
    std::string model, output;
    GridSpec grid;
    std::optional<double> speed_max;
};

void run_predict(GridArgs a) {
    a.grid.speed_max = a.speed_max;
    const auto model = load_model(a.model);
    const auto rows = predict_grid(model, a.grid);
    write_prediction_csv(a.output, rows);
    std::cout << "wrote " << rows.size() << " grid predictions to " << a.output << '\n';
}

void run_decompose(GridArgs a) {
    require_directory(a.output);
    a.grid.speed_max = a.speed_max;
    const auto model = load_model(a.model);
    write_decomposition(a.output, decompose(model, a.grid));
    std::cout << "wrote decomposition to " << a.output << '\n';
}

struct EvaluateArgs {
    std::string model, input, output, columns;
    bool skip_invalid = false;
};

void run_evaluate(const EvaluateArgs& a) {
    const auto model = load_model(a.model);
    const auto records = load_input(a.input, a.columns, a.skip_invalid);
    const auto metrics = evaluate_records(model, records).to_json();
    if (a.output.empty()) std::cout << metrics.dump(2) << '\n';
    else write_json(a.output, metrics);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Additive Gaussian process models of wind turbine and wind farm power"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI file with per-command sections; command-line flags take precedence");

    GenerateArgs gen;
    auto* generate_cmd = app.add_subcommand("generate", "Write a synthetic SCADA data set with ground truth");
    generate_cmd->add_option("--out-dir", gen.out_dir, "Existing directory for the output files")->required();
    generate_cmd->add_option("--seed", gen.config.seed, "Random seed")->capture_default_str();
    generate_cmd->add_option("--n", gen.records, "Number of records, rounded up to whole timestamps")
        ->capture_default_str()->check(CLI::PositiveNumber);
    generate_cmd->add_option("--rows", gen.rows, "Turbine rows (south to north)")->capture_default_str();
    generate_cmd->add_option("--cols", gen.cols, "Turbine columns (west to east)")->capture_default_str();
    generate_cmd->add_option("--spacing", gen.spacing, "Grid spacing (m)")->capture_default_str();
    generate_cmd->add_option("--weibull-shape", gen.config.weibull_shape)->capture_default_str();
    generate_cmd->add_option("--weibull-scale", gen.config.weibull_scale, "m/s")->capture_default_str();
    generate_cmd->add_option("--wake-deficit", gen.config.wake.deficit_fraction)->capture_default_str();
    generate_cmd->add_option("--wake-half-angle", gen.config.wake.half_angle_deg, "degrees")->capture_default_str();
    generate_cmd->add_option("--wake-recovery", gen.config.wake.recovery_length, "m")->capture_default_str();
    generate_cmd->add_option("--curtailment-rate", gen.config.events.curtailment)->capture_default_str();
    generate_cmd->add_option("--shutdown-rate", gen.config.events.shutdown)->capture_default_str();
    generate_cmd->add_option("--boost-rate", gen.config.events.boost)->capture_default_str();
    generate_cmd->add_option("--wind-noise", gen.config.noise.wind_speed_sd, "m/s")->capture_default_str();
    generate_cmd->add_option("--power-noise", gen.config.noise.power_relative_sd, "relative")->capture_default_str();
    generate_cmd->add_option("--yaw-noise", gen.config.noise.yaw_sd_deg, "degrees")->capture_default_str();
    generate_cmd->add_option("--pitch-noise", gen.config.noise.pitch_sd_deg, "degrees")->capture_default_str();
    generate_cmd->add_option("--start-time", gen.config.start_time, "Epoch seconds")->capture_default_str();
    generate_cmd->add_option("--step", gen.config.step_seconds, "Seconds between timestamps")->capture_default_str();
    add_turbine_options(generate_cmd, gen.turbine);

    FilterArgs flt;
    auto* filter_cmd = app.add_subcommand("filter", "Remove shutdown, curtailed, boosted and outlying records");
    filter_cmd->add_option("--input", flt.input, "SCADA CSV")->required();
    filter_cmd->add_option("--out-dir", flt.out_dir, "Existing directory for the output files")->required();
    filter_cmd->add_option("--columns", flt.columns, "Column mapping file (key=column lines)");
    filter_cmd->add_flag("--skip-invalid", flt.skip_invalid, "Skip invalid rows instead of failing");
    filter_cmd->add_option("--curtail-fraction", flt.config.rules.curtail_fraction)->capture_default_str();
    filter_cmd->add_flag("--remove-below-cut-in", flt.config.rules.remove_below_cut_in);
    filter_cmd->add_option("--threshold", flt.config.mahalanobis_threshold, "Squared Mahalanobis distance threshold")
        ->capture_default_str();
    filter_cmd->add_flag("--no-mahalanobis", flt.no_mahalanobis, "Apply the rule filter only");
    filter_cmd->add_flag("--pooled", flt.pooled, "One Mahalanobis screen over all turbines");
    add_turbine_options(filter_cmd, flt.turbine);

    TrainArgs trn;
    auto* train_cmd = app.add_subcommand("train", "Fit an additive GP to filtered SCADA data");
    train_cmd->add_option("--input", trn.input, "Filtered SCADA CSV")->required();
    train_cmd->add_option("--output", trn.output, "Model file (JSON)")->required();
    train_cmd->add_option("--report", trn.report, "Training report (JSON)");
    train_cmd->add_option("--trace", trn.trace, "Optimizer trace (CSV)");
    train_cmd->add_option("--columns", trn.columns, "Column mapping file (key=column lines)");
    train_cmd->add_flag("--skip-invalid", trn.skip_invalid, "Skip invalid rows instead of failing");
    train_cmd->add_option("--target", trn.target, "farm or turbine")
        ->capture_default_str()->check(CLI::IsMember({"farm", "turbine"}));
    train_cmd->add_option("--turbine-id", trn.turbine_id, "Turbine to model when --target turbine");
    train_cmd->add_option("--order", trn.order, "Kernel order: first or second")
        ->capture_default_str()->check(CLI::IsMember({"first", "second"}));
    train_cmd->add_option("--seed", trn.config.seed, "Random seed")->capture_default_str();
    train_cmd->add_option("--subset", trn.config.subset_size, "Training rows (stratified by yaw)")
        ->capture_default_str()->check(CLI::PositiveNumber);
    train_cmd->add_option("--opt-subset", trn.config.optimizer_subset, "Rows used for hyperparameter tuning")
        ->capture_default_str()->check(CLI::PositiveNumber);
    train_cmd->add_option("--strata", trn.config.strata, "Yaw bins for stratified sampling")
        ->capture_default_str()->check(CLI::PositiveNumber);
    train_cmd->add_option("--restarts", trn.config.optimizer.restarts)->capture_default_str();
    train_cmd->add_option("--max-iter", trn.config.optimizer.max_iterations)->capture_default_str();
    train_cmd->add_option("--tol", trn.config.optimizer.gradient_tolerance, "Gradient infinity-norm tolerance")
        ->capture_default_str();
    train_cmd->add_option("--epsilon", trn.config.link_epsilon, "Link clipping")->capture_default_str();
    train_cmd->add_option("--normalizer-quantile", trn.config.normalizer_quantile)->capture_default_str();
    train_cmd->add_option("--normalizer", trn.normalizer, "Fixed power normalizer (kW); overrides the quantile");
    train_cmd->add_flag("--keep-partial", trn.config.keep_partial, "Keep farm timestamps with missing turbines");
    add_turbine_options(train_cmd, trn.config.turbine);

    GridArgs prd;
    auto* predict_cmd = app.add_subcommand("predict", "Predict on a wind speed x direction grid");
    predict_cmd->add_option("--model", prd.model, "Model file")->required();
    predict_cmd->add_option("--output", prd.output, "Prediction CSV")->required();
    add_grid_options(predict_cmd, prd.grid, prd.speed_max);

    GridArgs dcp;
    auto* decompose_cmd = app.add_subcommand("decompose", "Write per-component curves and polar files");
    decompose_cmd->add_option("--model", dcp.model, "Model file")->required();
    decompose_cmd->add_option("--out-dir", dcp.output, "Existing directory for the output files")->required();
    add_grid_options(decompose_cmd, dcp.grid, dcp.speed_max);

    EvaluateArgs evl;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a model on held-out SCADA data");
    evaluate_cmd->add_option("--model", evl.model, "Model file")->required();
    evaluate_cmd->add_option("--input", evl.input, "SCADA CSV")->required();
    evaluate_cmd->add_option("--output", evl.output, "Metrics JSON (default: standard output)");
    evaluate_cmd->add_option("--columns", evl.columns, "Column mapping file (key=column lines)");
    evaluate_cmd->add_flag("--skip-invalid", evl.skip_invalid, "Skip invalid rows instead of failing");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*generate_cmd) run_generate(gen);
        else if (*filter_cmd) run_filter(flt);
        else if (*train_cmd) run_train(trn);
        else if (*predict_cmd) run_predict(prd);
        else if (*decompose_cmd) run_decompose(dcp);
        else if (*evaluate_cmd) run_evaluate(evl);
        return kOk;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kUsage;
    } catch (const std::out_of_range& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
}
