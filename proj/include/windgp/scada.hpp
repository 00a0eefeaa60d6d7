#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace windgp {

enum class QualityFlag : std::uint8_t {
    Nominal = 1u << 0,
    Curtailed = 1u << 1,
    Shutdown = 1u << 2,
    Boosted = 1u << 3,
    Unknown = 1u << 4,
};

std::string_view to_string(QualityFlag flag);

/// Small bit set of quality flags. Serialized as names joined by '|'.
class FlagSet {
public:
    FlagSet() = default;
    FlagSet(QualityFlag flag) : bits_(static_cast<std::uint8_t>(flag)) {}  // NOLINT: implicit by intent

    void insert(QualityFlag flag) { bits_ |= static_cast<std::uint8_t>(flag); }
    bool contains(QualityFlag flag) const { return (bits_ & static_cast<std::uint8_t>(flag)) != 0; }
    bool empty() const { return bits_ == 0; }

    std::string to_string() const;
    /// Throws DataError on an unknown flag name.
    static FlagSet parse(std::string_view text);

    friend bool operator==(FlagSet, FlagSet) = default;

private:
    std::uint8_t bits_ = 0;
};

/// One ten-minute observation of a single turbine.
struct ScadaRecord {
    std::int64_t timestamp = 0;  // seconds since epoch, UTC
    std::string turbine_id;
    double wind_speed = 0.0;   // m/s
    double power = 0.0;        // kW
    double yaw_angle = 0.0;    // degrees, [0, 360)
    double pitch_angle = 0.0;  // degrees
    FlagSet flags{QualityFlag::Unknown};

    friend bool operator==(const ScadaRecord&, const ScadaRecord&) = default;
};

struct TurbineSpec {
    double cut_in_speed = 3.0;
    double rated_speed = 12.0;
    double cut_out_speed = 25.0;
    double rated_power = 2000.0;
    double boost_limit = 2160.0;

    /// Throws std::invalid_argument when the speed/power ordering is violated.
    void validate() const;

    /// Nominal power curve: zero below cut-in and at/above cut-out, cubic in
    /// speed between cut-in and rated (P ∝ v³ - v_in³), flat at rated power.
    double expected_power(double wind_speed) const;
};

/// Farm-level aggregate at one timestamp.
struct FarmSeries {
    std::int64_t timestamp = 0;
    double median_wind_speed = 0.0;
    double total_power = 0.0;
    double reference_yaw = 0.0;   // yaw of the turbine reporting the maximum wind speed
    double max_wind_speed = 0.0;  // freestream proxy
    std::size_t turbine_count = 0;
    bool partial = false;  // fewer turbines than expected reported at this timestamp
};

/// Median with the even-count convention of averaging the two central values.
double median(std::vector<double> values);

/// Groups records by timestamp (ascending) and aggregates each group.
/// `expected_turbines == 0` means "number of distinct turbine ids in the input".
/// Throws DataError on empty input.
std::vector<FarmSeries> aggregate_farm(std::span<const ScadaRecord> records,
                                       std::size_t expected_turbines = 0);

/// Maps logical fields onto CSV header names.
struct ColumnMapping {
    std::string timestamp = "timestamp";
    std::string turbine_id = "turbine_id";
    std::string wind_speed = "wind_speed";
    std::string power = "power";
    std::string yaw_angle = "yaw_angle";
    std::string pitch_angle = "pitch_angle";
    std::string flags = "flags";  // optional column

    /// Parses `key=column` lines; '#' starts a comment. Unknown keys throw DataError.
    static ColumnMapping parse(std::string_view text);
    static ColumnMapping from_file(const std::filesystem::path& path);
};

struct LoadIssue {
    std::size_t line = 0;  // 1-based line in the file; the header is line 1
    std::string message;
};

struct LoadOptions {
    /// When false the first invalid row throws; when true invalid rows are
    /// collected in LoadResult::rejected. Unparseable rows always throw.
    bool skip_invalid = false;
};

struct LoadResult {
    std::vector<ScadaRecord> records;
    std::vector<LoadIssue> warnings;
    std::vector<LoadIssue> rejected;
};

/// Integer epoch seconds take precedence; otherwise ISO-8601
/// `YYYY-MM-DD[T ]HH:MM[:SS][Z|±HH:MM]`. Throws DataError on failure.
std::int64_t parse_timestamp(std::string_view text);
std::string format_iso8601(std::int64_t timestamp);

LoadResult read_records(std::istream& in, const ColumnMapping& mapping = {}, LoadOptions options = {});
LoadResult load_records(const std::filesystem::path& path, const ColumnMapping& mapping = {},
                        LoadOptions options = {});

/// Writes the default-named columns; timestamps as epoch integers, reals in
/// shortest round-trip form so that load(write(x)) == x.
void write_records(std::ostream& out, std::span<const ScadaRecord> records, bool with_flags = true);
void write_records(const std::filesystem::path& path, std::span<const ScadaRecord> records,
                   bool with_flags = true);

/// Wraps an angle in degrees into [0, 360).
double wrap_degrees(double angle);

}  // namespace windgp
