#include "windgp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

#include "windgp/csv.hpp"
#include "windgp/error.hpp"
#include "windgp/random.hpp"

namespace windgp {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kFeatheredPitch = 90.0;

// Event magnitudes. Curtailment scales available power down, boosting lifts
// output above rated, and both move the blade pitch.
constexpr double kCurtailLow = 0.2, kCurtailHigh = 0.6;
constexpr double kBoostLow = 1.12, kBoostHigh = 1.25;
constexpr double kBoostMinAvailable = 0.9;  // fraction of rated power
constexpr double kCurtailPitchLow = 4.0, kCurtailPitchHigh = 15.0;

std::vector<std::string_view> read_fields(const std::string& line, std::size_t expected, std::size_t line_no,
                                          const std::filesystem::path& path) {
    auto fields = csv::split(line);
    if (fields.size() != expected)
        throw DataError(path.string() + ": line " + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                        " fields");
    return fields;
}

double field_number(std::string_view s, std::size_t line_no, const std::filesystem::path& path) {
    double v = 0.0;
    if (!csv::parse_double(s, v))
        throw DataError(path.string() + ": line " + std::to_string(line_no) + ": cannot parse '" + std::string(s) + "'");
    return v;
}

}  // namespace

FarmLayout FarmLayout::grid(std::size_t rows, std::size_t cols, double spacing, const TurbineSpec& spec) {
    FarmLayout layout;
    std::size_t k = 0;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            ++k;
            char id[16];
            std::snprintf(id, sizeof(id), "T%02zu", k);
            layout.turbines.push_back({id, static_cast<double>(c) * spacing, static_cast<double>(r) * spacing, spec});
        }
    return layout;
}

void FarmLayout::validate() const {
    if (turbines.empty()) throw std::invalid_argument("farm layout has no turbines");
    std::set<std::string> ids;
    std::set<std::pair<double, double>> positions;
    for (const auto& t : turbines) {
        t.spec.validate();
        if (t.id.empty() || !ids.insert(t.id).second) throw std::invalid_argument("duplicate or empty turbine id '" + t.id + "'");
        if (!positions.insert({t.east, t.north}).second)
            throw std::invalid_argument("turbine '" + t.id + "' shares its position with another turbine");
    }
}

std::size_t FarmLayout::index_of(const std::string& id) const {
    for (std::size_t k = 0; k < turbines.size(); ++k)
        if (turbines[k].id == id) return k;
    throw std::invalid_argument("unknown turbine id '" + id + "'");
}

void GeneratorConfig::validate() const {
    const auto probability = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
    };
    probability(events.curtailment, "curtailment rate");
    probability(events.shutdown, "shutdown rate");
    probability(events.boost, "boost rate");
    if (events.curtailment + events.shutdown + events.boost > 1.0)
        throw std::invalid_argument("event rates sum to more than 1");
    if (!(wake.deficit_fraction >= 0.0 && wake.deficit_fraction < 1.0))
        throw std::invalid_argument("wake deficit fraction must lie in [0, 1)");
    if (!(wake.half_angle_deg > 0.0 && wake.half_angle_deg < 90.0))
        throw std::invalid_argument("wake half angle must lie in (0, 90) degrees");
    if (!(wake.recovery_length > 0.0)) throw std::invalid_argument("wake recovery length must be positive");
    if (!(weibull_shape > 0.0 && weibull_scale > 0.0)) throw std::invalid_argument("Weibull parameters must be positive");
    if (directions.empty()) throw std::invalid_argument("direction mixture is empty");
    for (const auto& d : directions)
        if (!(d.weight > 0.0 && d.sd_deg >= 0.0)) throw std::invalid_argument("direction mixture weights must be positive");
    if (noise.wind_speed_sd < 0.0 || noise.power_relative_sd < 0.0 || noise.yaw_sd_deg < 0.0 || noise.pitch_sd_deg < 0.0)
        throw std::invalid_argument("noise standard deviations must be nonnegative");
    if (sample_count == 0) throw std::invalid_argument("sample count must be positive");
    if (step_seconds <= 0) throw std::invalid_argument("time step must be positive");
}

double wake_deficit(const FarmLayout& layout, std::size_t turbine, double direction_deg, const WakeParams& wake) {
    const double theta = direction_deg * kDegToRad;
    // Unit vector of the direction the air travels (opposite to "from").
    const double ue = -std::sin(theta), un = -std::cos(theta);
    const double cos_half = std::cos(wake.half_angle_deg * kDegToRad);
    const auto& target = layout.turbines.at(turbine);

    double deficit = 0.0;
    for (std::size_t j = 0; j < layout.turbines.size(); ++j) {
        if (j == turbine) continue;
        const double ve = target.east - layout.turbines[j].east;
        const double vn = target.north - layout.turbines[j].north;
        const double dist = std::hypot(ve, vn);
        const double downstream = ve * ue + vn * un;
        if (downstream <= 0.0 || downstream > wake.recovery_length) continue;
        if (downstream < cos_half * dist) continue;  // outside the cone
        deficit = std::max(deficit, wake.deficit_fraction * (1.0 - downstream / wake.recovery_length));
    }
    return deficit;
}

double nominal_pitch(const TurbineSpec& spec, double wind_speed) {
    if (wind_speed >= spec.cut_out_speed) return kFeatheredPitch;
    if (wind_speed <= spec.rated_speed) return 0.0;
    return 4.0 * std::sqrt(wind_speed - spec.rated_speed);
}

SyntheticFarm generate(const FarmLayout& layout, const GeneratorConfig& config) {
    layout.validate();
    config.validate();

    std::vector<double> cumulative;
    double total_weight = 0.0;
    for (const auto& d : config.directions) cumulative.push_back(total_weight += d.weight);

    const auto n_turbines = layout.turbines.size();
    SyntheticFarm out;
    out.records.resize(config.sample_count * n_turbines);
    out.truth.resize(out.records.size());

    const auto& events = config.events;
    const auto& noise = config.noise;
    for (std::size_t t = 0; t < config.sample_count; ++t) {
        auto rng = make_rng(config.seed, t);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::weibull_distribution<double> weibull(config.weibull_shape, config.weibull_scale);

        const auto timestamp = config.start_time + static_cast<std::int64_t>(t) * config.step_seconds;
        const double speed = weibull(rng);
        const double pick = unit(rng) * total_weight;
        const auto component = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin(),
                                     static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
        const auto& mix = config.directions[component];
        const double direction = wrap_degrees(mix.mean_deg + mix.sd_deg * normal(rng));

        for (std::size_t k = 0; k < n_turbines; ++k) {
            const auto& site = layout.turbines[k];
            const auto& spec = site.spec;
            // Fixed draw order per turbine regardless of which branch is taken.
            const double z_speed = normal(rng), z_power = normal(rng), z_yaw = normal(rng), z_pitch = normal(rng);
            const double u_event = unit(rng), u_magnitude = unit(rng), u_pitch = unit(rng);

            const double deficit = wake_deficit(layout, k, direction, config.wake);
            const double waked = speed * (1.0 - deficit);
            const double available = spec.expected_power(waked);

            QualityFlag flag = QualityFlag::Nominal;
            if (u_event < events.shutdown) flag = QualityFlag::Shutdown;
            else if (u_event < events.shutdown + events.curtailment && available > 0.0) flag = QualityFlag::Curtailed;
            else if (u_event < events.shutdown + events.curtailment + events.boost &&
                     available >= kBoostMinAvailable * spec.rated_power)
                flag = QualityFlag::Boosted;

            const double power_noise = 1.0 + noise.power_relative_sd * z_power;
            double power = 0.0;
            double pitch = nominal_pitch(spec, waked);
            switch (flag) {
                case QualityFlag::Nominal: power = available * power_noise; break;
                case QualityFlag::Curtailed:
                    power = available * (kCurtailLow + (kCurtailHigh - kCurtailLow) * u_magnitude) * power_noise;
                    pitch += kCurtailPitchLow + (kCurtailPitchHigh - kCurtailPitchLow) * u_pitch;
                    break;
                case QualityFlag::Boosted:
                    power = spec.rated_power * (kBoostLow + (kBoostHigh - kBoostLow) * u_magnitude) * power_noise;
                    break;
                case QualityFlag::Shutdown:
                    power = 0.0;
                    pitch = kFeatheredPitch - 2.0 * std::abs(z_pitch);
                    break;
                default: break;
            }
            if (flag != QualityFlag::Shutdown) pitch += noise.pitch_sd_deg * z_pitch;

            const std::size_t id = t * n_turbines + k;
            auto& rec = out.records[id];
            rec.timestamp = timestamp;
            rec.turbine_id = site.id;
            rec.wind_speed = std::max(0.0, waked + noise.wind_speed_sd * z_speed);
            rec.power = std::max(0.0, power);
            rec.yaw_angle = wrap_degrees(direction + noise.yaw_sd_deg * z_yaw);
            rec.pitch_angle = pitch;
            rec.flags = FlagSet{flag};

            auto& truth = out.truth[id];
            truth.record_id = id;
            truth.timestamp = timestamp;
            truth.turbine_id = site.id;
            truth.freestream_speed = speed;
            truth.direction_deg = direction;
            truth.wake_deficit = deficit;
            truth.waked_speed = waked;
            truth.unwaked_power = spec.expected_power(speed);
            truth.nominal_power = available;
            truth.flag = flag;
        }
    }
    return out;
}

void write_truth(const std::filesystem::path& path, std::span<const TruthRecord> truth) {
    auto out = csv::open_output(path);
    csv::write_row(out, {"record_id", "timestamp", "turbine_id", "freestream_speed", "direction_deg", "wake_deficit",
                         "waked_speed", "unwaked_power", "nominal_power", "true_flag"});
    for (const auto& t : truth)
        csv::write_row(out, {std::to_string(t.record_id), std::to_string(t.timestamp), t.turbine_id,
                             csv::format(t.freestream_speed), csv::format(t.direction_deg), csv::format(t.wake_deficit),
                             csv::format(t.waked_speed), csv::format(t.unwaked_power), csv::format(t.nominal_power),
                             std::string(to_string(t.flag))});
}

std::vector<TruthRecord> read_truth(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open truth file '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    std::vector<TruthRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        const auto f = read_fields(line, 10, line_no, path);
        TruthRecord t;
        long long integer = 0;
        if (!csv::parse_int(f[0], integer)) throw DataError(path.string() + ": bad record id");
        t.record_id = static_cast<std::size_t>(integer);
        if (!csv::parse_int(f[1], integer)) throw DataError(path.string() + ": bad timestamp");
        t.timestamp = integer;
        t.turbine_id = std::string(f[2]);
        t.freestream_speed = field_number(f[3], line_no, path);
        t.direction_deg = field_number(f[4], line_no, path);
        t.wake_deficit = field_number(f[5], line_no, path);
        t.waked_speed = field_number(f[6], line_no, path);
        t.unwaked_power = field_number(f[7], line_no, path);
        t.nominal_power = field_number(f[8], line_no, path);
        const auto flags = FlagSet::parse(f[9]);
        for (auto flag : {QualityFlag::Nominal, QualityFlag::Curtailed, QualityFlag::Shutdown, QualityFlag::Boosted,
                          QualityFlag::Unknown})
            if (flags.contains(flag)) t.flag = flag;
        out.push_back(std::move(t));
    }
    return out;
}

void write_layout(const std::filesystem::path& path, const FarmLayout& layout) {
    auto out = csv::open_output(path);
    csv::write_row(out, {"turbine_id", "east", "north", "cut_in_speed", "rated_speed", "cut_out_speed", "rated_power",
                         "boost_limit"});
    for (const auto& t : layout.turbines)
        csv::write_row(out, {t.id, csv::format(t.east), csv::format(t.north), csv::format(t.spec.cut_in_speed),
                             csv::format(t.spec.rated_speed), csv::format(t.spec.cut_out_speed),
                             csv::format(t.spec.rated_power), csv::format(t.spec.boost_limit)});
}

FarmLayout read_layout(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open layout file '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    FarmLayout layout;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        const auto f = read_fields(line, 8, line_no, path);
        TurbineSite site;
        site.id = std::string(f[0]);
        site.east = field_number(f[1], line_no, path);
        site.north = field_number(f[2], line_no, path);
        site.spec = {field_number(f[3], line_no, path), field_number(f[4], line_no, path),
                     field_number(f[5], line_no, path), field_number(f[6], line_no, path),
                     field_number(f[7], line_no, path)};
        layout.turbines.push_back(std::move(site));
    }
    try {
        layout.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return layout;
}

void write_directional_truth(const std::filesystem::path& path, const FarmLayout& layout, const WakeParams& wake) {
    auto out = csv::open_output(path);
    csv::write_row(out, {"turbine_id", "direction_deg", "wake_deficit"});
    for (std::size_t k = 0; k < layout.turbines.size(); ++k)
        for (int deg = 0; deg < 360; ++deg)
            csv::write_row(out, {layout.turbines[k].id, std::to_string(deg),
                                 csv::format(wake_deficit(layout, k, deg, wake))});
}

double unwaked_direction(const FarmLayout& layout, std::size_t turbine, const WakeParams& wake) {
    std::vector<bool> clear(360);
    bool any_waked = false, any_clear = false;
    for (int deg = 0; deg < 360; ++deg) {
        clear[static_cast<std::size_t>(deg)] = wake_deficit(layout, turbine, deg, wake) == 0.0;
        any_clear = any_clear || clear[static_cast<std::size_t>(deg)];
        any_waked = any_waked || !clear[static_cast<std::size_t>(deg)];
    }
    if (!any_clear) throw std::invalid_argument("turbine is waked from every direction");
    if (!any_waked) return 0.0;

    // Start scanning just after a waked direction so arcs do not wrap mid-run.
    int start = 0;
    while (clear[static_cast<std::size_t>(start)]) ++start;
    int best_len = 0, best_start = 0, run_len = 0, run_start = 0;
    for (int k = 1; k <= 360; ++k) {
        const int deg = (start + k) % 360;
        if (clear[static_cast<std::size_t>(deg)]) {
            if (run_len == 0) run_start = deg;
            ++run_len;
            if (run_len > best_len) {
                best_len = run_len;
                best_start = run_start;
            }
        } else {
            run_len = 0;
        }
    }
    return wrap_degrees(best_start + 0.5 * (best_len - 1));
}

}  // namespace windgp
