#include "windgp/scada.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "windgp/csv.hpp"
#include "windgp/error.hpp"

namespace windgp {

namespace {

constexpr QualityFlag kAllFlags[] = {QualityFlag::Nominal, QualityFlag::Curtailed, QualityFlag::Shutdown,
                                     QualityFlag::Boosted, QualityFlag::Unknown};

std::string line_prefix(std::size_t line) { return "line " + std::to_string(line) + ": "; }

}  // namespace

std::string_view to_string(QualityFlag flag) {
    switch (flag) {
        case QualityFlag::Nominal: return "Nominal";
        case QualityFlag::Curtailed: return "Curtailed";
        case QualityFlag::Shutdown: return "Shutdown";
        case QualityFlag::Boosted: return "Boosted";
        case QualityFlag::Unknown: return "Unknown";
    }
    return "Unknown";
}

std::string FlagSet::to_string() const {
    std::string out;
    for (auto flag : kAllFlags) {
        if (!contains(flag)) continue;
        if (!out.empty()) out += '|';
        out += windgp::to_string(flag);
    }
    return out;
}

FlagSet FlagSet::parse(std::string_view text) {
    FlagSet set;
    text = csv::trim(text);
    if (text.empty()) return FlagSet{QualityFlag::Unknown};
    while (!text.empty()) {
        const auto pos = text.find('|');
        const auto name = csv::trim(text.substr(0, pos));
        bool matched = false;
        for (auto flag : kAllFlags) {
            if (name == windgp::to_string(flag)) {
                set.insert(flag);
                matched = true;
            }
        }
        if (!matched) throw DataError("unknown quality flag '" + std::string(name) + "'");
        if (pos == std::string_view::npos) break;
        text.remove_prefix(pos + 1);
    }
    return set;
}

void TurbineSpec::validate() const {
    if (!(cut_in_speed > 0.0 && cut_in_speed < rated_speed && rated_speed < cut_out_speed))
        throw std::invalid_argument("turbine spec requires 0 < cut_in < rated < cut_out speed");
    if (!(rated_power > 0.0 && rated_power <= boost_limit))
        throw std::invalid_argument("turbine spec requires 0 < rated_power <= boost_limit");
}

double TurbineSpec::expected_power(double wind_speed) const {
    if (wind_speed < cut_in_speed || wind_speed >= cut_out_speed) return 0.0;
    if (wind_speed >= rated_speed) return rated_power;
    const double lo = cut_in_speed * cut_in_speed * cut_in_speed;
    const double hi = rated_speed * rated_speed * rated_speed;
    return rated_power * (wind_speed * wind_speed * wind_speed - lo) / (hi - lo);
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of empty set");
    const auto n = values.size();
    const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(values.begin(), mid, values.end());
    if (n % 2 == 1) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(values.begin(), mid);
    return 0.5 * (lower + upper);
}

std::vector<FarmSeries> aggregate_farm(std::span<const ScadaRecord> records, std::size_t expected_turbines) {
    if (records.empty()) throw DataError("aggregate_farm: no records");
    if (expected_turbines == 0) {
        std::set<std::string_view> ids;
        for (const auto& r : records) ids.insert(r.turbine_id);
        expected_turbines = ids.size();
    }

    std::map<std::int64_t, std::vector<const ScadaRecord*>> groups;
    for (const auto& r : records) groups[r.timestamp].push_back(&r);

    std::vector<FarmSeries> out;
    out.reserve(groups.size());
    for (const auto& [timestamp, group] : groups) {
        FarmSeries s;
        s.timestamp = timestamp;
        s.turbine_count = group.size();
        s.partial = group.size() < expected_turbines;
        std::vector<double> speeds;
        speeds.reserve(group.size());
        // Sum in turbine-id order so the total does not depend on input order.
        std::vector<const ScadaRecord*> sorted(group);
        std::sort(sorted.begin(), sorted.end(),
                  [](const ScadaRecord* a, const ScadaRecord* b) { return a->turbine_id < b->turbine_id; });
        const ScadaRecord* fastest = sorted.front();
        for (const auto* r : sorted) {
            s.total_power += r->power;
            speeds.push_back(r->wind_speed);
            if (r->wind_speed > fastest->wind_speed) fastest = r;
        }
        s.max_wind_speed = fastest->wind_speed;
        s.reference_yaw = fastest->yaw_angle;
        s.median_wind_speed = median(std::move(speeds));
        out.push_back(s);
    }
    return out;
}

ColumnMapping ColumnMapping::parse(std::string_view text) {
    ColumnMapping m;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto eol = text.find('\n');
        auto line = text.substr(0, eol);
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = csv::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw DataError("column mapping line " + std::to_string(line_no) + ": expected key=column");
        const auto key = csv::trim(line.substr(0, eq));
        const std::string value(csv::trim(line.substr(eq + 1)));
        if (key == "timestamp") m.timestamp = value;
        else if (key == "turbine_id") m.turbine_id = value;
        else if (key == "wind_speed") m.wind_speed = value;
        else if (key == "power") m.power = value;
        else if (key == "yaw_angle") m.yaw_angle = value;
        else if (key == "pitch_angle") m.pitch_angle = value;
        else if (key == "flags") m.flags = value;
        else throw DataError("column mapping line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
    return m;
}

ColumnMapping ColumnMapping::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open column mapping '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

std::int64_t parse_timestamp(std::string_view text) {
    text = csv::trim(text);
    long long epoch = 0;
    if (csv::parse_int(text, epoch)) return epoch;

    const std::string s(text);
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    int consumed = 0;
    char sep = 0;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &year, &month, &day, &sep, &hour, &minute, &consumed) != 6 ||
        (sep != 'T' && sep != ' '))
        throw DataError("unparseable timestamp '" + s + "'");
    std::string_view rest(s.c_str() + consumed);
    if (!rest.empty() && rest.front() == ':') {
        int n = 0;
        if (std::sscanf(rest.data(), ":%2d%n", &second, &n) != 1) throw DataError("unparseable timestamp '" + s + "'");
        rest.remove_prefix(static_cast<std::size_t>(n));
    }
    long long offset = 0;
    if (rest == "Z" || rest.empty()) {
        offset = 0;
    } else if (rest.size() == 6 && (rest[0] == '+' || rest[0] == '-') && rest[3] == ':') {
        int oh = 0, om = 0;
        if (std::sscanf(rest.data() + 1, "%2d:%2d", &oh, &om) != 2) throw DataError("unparseable timestamp '" + s + "'");
        offset = (rest[0] == '+' ? 1 : -1) * (oh * 3600LL + om * 60LL);
    } else {
        throw DataError("unparseable timestamp '" + s + "'");
    }

    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                             std::chrono::day{static_cast<unsigned>(day)}};
    if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) throw DataError("invalid timestamp '" + s + "'");
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days) * 86400 + hour * 3600LL + minute * 60LL + second - offset;
}

std::string format_iso8601(std::int64_t timestamp) {
    using namespace std::chrono;
    const auto day_count = static_cast<long long>(std::floor(static_cast<double>(timestamp) / 86400.0));
    const std::int64_t secs = timestamp - day_count * 86400;
    const year_month_day ymd{sys_days{days{day_count}}};
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(secs / 3600), static_cast<int>(secs % 3600 / 60), static_cast<int>(secs % 60));
    return buffer;
}

double wrap_degrees(double angle) {
    double wrapped = std::fmod(angle, 360.0);
    if (wrapped < 0.0) wrapped += 360.0;
    if (wrapped >= 360.0) wrapped = 0.0;
    return wrapped;
}

LoadResult read_records(std::istream& in, const ColumnMapping& mapping, LoadOptions options) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty SCADA file (no header row)");

    const auto header = csv::split(line);
    const auto find_column = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return std::nullopt;
    };
    const auto require_column = [&](const std::string& name) {
        auto idx = find_column(name);
        if (!idx) throw DataError("missing column '" + name + "'");
        return *idx;
    };
    const std::size_t c_time = require_column(mapping.timestamp);
    const std::size_t c_id = require_column(mapping.turbine_id);
    const std::size_t c_speed = require_column(mapping.wind_speed);
    const std::size_t c_power = require_column(mapping.power);
    const std::size_t c_yaw = require_column(mapping.yaw_angle);
    const std::size_t c_pitch = require_column(mapping.pitch_angle);
    const auto c_flags = find_column(mapping.flags);

    LoadResult result;
    std::map<std::string, std::int64_t, std::less<>> last_timestamp;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        const auto fields = csv::split(line);
        if (fields.size() != header.size())
            throw DataError(line_prefix(line_no) + "expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));

        const auto number = [&](std::size_t col) {
            double v = 0.0;
            if (!csv::parse_double(fields[col], v))
                throw DataError(line_prefix(line_no) + "cannot parse '" + std::string(fields[col]) + "' in column '" +
                                std::string(header[col]) + "'");
            return v;
        };

        ScadaRecord r;
        try {
            r.timestamp = parse_timestamp(fields[c_time]);
        } catch (const DataError& e) {
            throw DataError(line_prefix(line_no) + e.what());
        }
        r.turbine_id = std::string(fields[c_id]);
        r.wind_speed = number(c_speed);
        r.power = number(c_power);
        r.yaw_angle = number(c_yaw);
        r.pitch_angle = number(c_pitch);
        if (c_flags) {
            try {
                r.flags = FlagSet::parse(fields[*c_flags]);
            } catch (const DataError& e) {
                throw DataError(line_prefix(line_no) + e.what());
            }
        }

        std::string invalid;
        if (r.turbine_id.empty()) invalid = "empty turbine id";
        else if (!std::isfinite(r.wind_speed) || !std::isfinite(r.power) || !std::isfinite(r.yaw_angle) ||
                 !std::isfinite(r.pitch_angle))
            invalid = "non-finite value";
        else if (r.wind_speed < 0.0)
            invalid = "wind_speed " + csv::format(r.wind_speed) + " is negative";

        if (invalid.empty()) {
            auto it = last_timestamp.find(r.turbine_id);
            if (it != last_timestamp.end() && r.timestamp <= it->second)
                invalid = "timestamp " + std::to_string(r.timestamp) + " not increasing for turbine '" + r.turbine_id + "'";
        }
        if (!invalid.empty()) {
            if (!options.skip_invalid) throw DataError(line_prefix(line_no) + invalid);
            result.rejected.push_back({line_no, invalid});
            continue;
        }

        if (r.yaw_angle < 0.0 || r.yaw_angle >= 360.0) {
            const double wrapped = wrap_degrees(r.yaw_angle);
            result.warnings.push_back({line_no, "yaw_angle " + csv::format(r.yaw_angle) + " normalized to " +
                                                    csv::format(wrapped)});
            r.yaw_angle = wrapped;
        }
        last_timestamp[r.turbine_id] = r.timestamp;
        result.records.push_back(std::move(r));
    }
    return result;
}

LoadResult load_records(const std::filesystem::path& path, const ColumnMapping& mapping, LoadOptions options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open SCADA file '" + path.string() + "'");
    try {
        return read_records(in, mapping, options);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_records(std::ostream& out, std::span<const ScadaRecord> records, bool with_flags) {
    std::vector<std::string> header{"timestamp", "turbine_id", "wind_speed", "power", "yaw_angle", "pitch_angle"};
    if (with_flags) header.emplace_back("flags");
    csv::write_row(out, header);
    for (const auto& r : records) {
        std::vector<std::string> row{std::to_string(r.timestamp), r.turbine_id,        csv::format(r.wind_speed),
                                     csv::format(r.power),        csv::format(r.yaw_angle), csv::format(r.pitch_angle)};
        if (with_flags) row.push_back(r.flags.to_string());
        csv::write_row(out, row);
    }
}

void write_records(const std::filesystem::path& path, std::span<const ScadaRecord> records, bool with_flags) {
    auto out = csv::open_output(path);
    write_records(out, records, with_flags);
}

}  // namespace windgp
