#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "windgp/scada.hpp"

namespace windgp {

struct TurbineSite {
    std::string id;
    double east = 0.0;   // m
    double north = 0.0;  // m
    TurbineSpec spec;
};

struct FarmLayout {
    std::vector<TurbineSite> turbines;

    /// rows × cols grid with the given spacing; row 0 is the southern row and
    /// column 0 the western column. Ids are T01, T02, ... in row-major order.
    static FarmLayout grid(std::size_t rows, std::size_t cols, double spacing, const TurbineSpec& spec = {});

    /// Throws std::invalid_argument on duplicate ids/positions or invalid specs.
    void validate() const;
    std::size_t index_of(const std::string& id) const;
};

struct WrappedGaussian {
    double weight = 1.0;
    double mean_deg = 0.0;  // direction the wind blows from
    double sd_deg = 30.0;
};

struct WakeParams {
    double deficit_fraction = 0.25;  // speed deficit directly behind an upwind rotor
    double half_angle_deg = 30.0;
    double recovery_length = 1500.0;  // m; deficit decays linearly to zero here
};

struct EventRates {
    double curtailment = 0.05;  // applied only while the turbine is producing
    double shutdown = 0.03;     // applied to any record
    double boost = 0.02;        // applied only near or above rated power
};

struct NoiseParams {
    double wind_speed_sd = 0.05;    // m/s
    double power_relative_sd = 0.02;
    double yaw_sd_deg = 2.0;
    double pitch_sd_deg = 0.3;
};

struct GeneratorConfig {
    std::size_t sample_count = 52560;  // timestamps; one year of ten-minute steps
    double weibull_shape = 2.0;
    double weibull_scale = 8.0;  // m/s
    std::vector<WrappedGaussian> directions{{0.6, 240.0, 45.0}, {0.4, 100.0, 50.0}};
    WakeParams wake;
    EventRates events;
    NoiseParams noise;
    std::uint64_t seed = 0;
    std::int64_t start_time = 1609459200;  // 2021-01-01T00:00:00Z
    std::int64_t step_seconds = 600;

    void validate() const;
};

struct TruthRecord {
    std::size_t record_id = 0;  // index into the generated record list
    std::int64_t timestamp = 0;
    std::string turbine_id;
    double freestream_speed = 0.0;
    double direction_deg = 0.0;
    double wake_deficit = 0.0;
    double waked_speed = 0.0;
    double unwaked_power = 0.0;  // nominal curve at freestream speed
    double nominal_power = 0.0;  // nominal curve at the waked speed, before events and noise
    QualityFlag flag = QualityFlag::Nominal;
};

struct SyntheticFarm {
    std::vector<ScadaRecord> records;  // flags carry the ground truth
    std::vector<TruthRecord> truth;    // aligned with records
};

/// Fractional speed deficit at `turbine` for wind from `direction_deg`: the
/// strongest single top-hat cone wake among upwind turbines, decaying
/// linearly with downstream distance. Zero if no turbine is upwind.
double wake_deficit(const FarmLayout& layout, std::size_t turbine, double direction_deg, const WakeParams& wake);

/// Pitch angle of a turbine operating normally at the given speed.
double nominal_pitch(const TurbineSpec& spec, double wind_speed);

/// Each timestamp draws from its own (seed, index) substream, so output is
/// bitwise reproducible and independent of generation order.
SyntheticFarm generate(const FarmLayout& layout, const GeneratorConfig& config);

/// record_id,timestamp,turbine_id,freestream_speed,direction_deg,wake_deficit,
/// waked_speed,unwaked_power,nominal_power,true_flag
void write_truth(const std::filesystem::path& path, std::span<const TruthRecord> truth);
std::vector<TruthRecord> read_truth(const std::filesystem::path& path);

/// turbine_id,east,north,cut_in_speed,rated_speed,cut_out_speed,rated_power,boost_limit
void write_layout(const std::filesystem::path& path, const FarmLayout& layout);
FarmLayout read_layout(const std::filesystem::path& path);

/// turbine_id,direction_deg,wake_deficit at 1° resolution.
void write_directional_truth(const std::filesystem::path& path, const FarmLayout& layout, const WakeParams& wake);

/// Centre of the widest contiguous arc (1° resolution) of directions with zero
/// wake deficit for the turbine. Throws std::invalid_argument if none exists.
double unwaked_direction(const FarmLayout& layout, std::size_t turbine, const WakeParams& wake);

}  // namespace windgp
