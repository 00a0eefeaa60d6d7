#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "windgp/error.hpp"
#include "windgp/preprocessing.hpp"

using namespace windgp;

namespace {

ScadaRecord rec(double ws, double p, double pitch = 0.0, std::string id = "T01", std::int64_t ts = 0) {
    return {ts, std::move(id), ws, p, 0.0, pitch, QualityFlag::Nominal};
}

}  // namespace

TEST_CASE("rule classification") {
    const TurbineSpec s;
    CHECK(classify_record(rec(1.2 * s.cut_in_speed, 0.0), s) == FilterReason::Shutdown);
    CHECK(classify_record(rec(15.0, 2300.0), s) == FilterReason::Boosted);
    CHECK(classify_record(rec(10.0, 0.5 * s.expected_power(10.0)), s) == FilterReason::Curtailed);
    CHECK(classify_record(rec(26.0, 0.0), s) == FilterReason::AboveCutOut);
    CHECK_FALSE(classify_record(rec(2.0, 0.0), s).has_value());
    CHECK_FALSE(classify_record(rec(10.0, 0.9 * s.expected_power(10.0)), s).has_value());

    RuleFilterConfig strict;
    strict.remove_below_cut_in = true;
    CHECK(classify_record(rec(2.0, 0.0), s, strict) == FilterReason::BelowCutIn);
}

TEST_CASE("records on the expected curve are never removed by the rules") {
    const TurbineSpec s;
    for (double v = 0.0; v < s.cut_out_speed; v += 0.01)
        CHECK_FALSE(classify_record(rec(v, s.expected_power(v)), s).has_value());
}

TEST_CASE("rule filter report counts") {
    const TurbineSpec s;
    const std::vector<ScadaRecord> r{rec(8.0, s.expected_power(8.0)), rec(8.0, 0.0), rec(14.0, 2500.0),
                                     rec(9.0, 10.0), rec(30.0, 0.0)};
    const auto out = rule_filter(r, s);
    CHECK(out.retained.size() == 1);
    CHECK(out.report.input_count == 5);
    CHECK(out.report.retained_count == 1);
    CHECK(out.report.removed_for(FilterReason::Shutdown) == 1);
    CHECK(out.report.removed_for(FilterReason::Boosted) == 1);
    CHECK(out.report.removed_for(FilterReason::Curtailed) == 1);
    CHECK(out.report.removed_for(FilterReason::AboveCutOut) == 1);
    CHECK(out.report.removed_total() == 4);
    const auto j = out.report.to_json();
    CHECK(j.at("removed").at("shutdown") == 1);
    CHECK(j.at("removed_total") == 4);
    CHECK(j.contains("link_clipped"));
}

TEST_CASE("Mahalanobis distances match an explicit 2x2 inverse") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Eigen::Vector2d> pts;
    for (int k = 0; k < 200; ++k) {
        const double a = n(rng), b = n(rng);
        pts.emplace_back(3.0 * a + 1.0, 0.5 * a + 0.2 * b - 4.0);
    }
    const auto got = mahalanobis_filter(pts);
    const auto want = oracle::mahalanobis_sq(pts);
    for (std::size_t k = 0; k < pts.size(); ++k) {
        CHECK(got.distance_sq[k] == doctest::Approx(want[k]).epsilon(1e-10));
        CHECK(got.inlier[k] == (want[k] <= kChiSquare2Dof99));
    }
}

TEST_CASE("Mahalanobis screen is affine invariant") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Eigen::Vector2d> pts, moved;
        for (int k = 0; k < 100; ++k) pts.emplace_back(n(rng), 2.0 * n(rng) + 0.3 * pts.size());
        Eigen::Matrix2d A;
        do {
            A << n(rng), n(rng), n(rng), n(rng);
        } while (std::abs(A.determinant()) < 0.1);
        const Eigen::Vector2d b(n(rng) * 10.0, n(rng) * 10.0);
        for (const auto& p : pts) moved.push_back(A * p + b);
        const auto r1 = mahalanobis_filter(pts), r2 = mahalanobis_filter(moved);
        CHECK(r1.inlier == r2.inlier);
        for (std::size_t k = 0; k < pts.size(); ++k)
            CHECK(r1.distance_sq[k] == doctest::Approx(r2.distance_sq[k]).epsilon(1e-8));
    }
}

TEST_CASE("Mahalanobis screen removes a planted outlier") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Eigen::Vector2d> pts;
    for (int k = 0; k < 500; ++k) pts.emplace_back(n(rng), n(rng));
    pts.emplace_back(8.0, -8.0);
    const auto r = mahalanobis_filter(pts);
    CHECK_FALSE(r.inlier.back());
    CHECK(r.report.removed_for(FilterReason::MahalanobisOutlier) >= 1);
    CHECK(r.report.retained_count + r.report.removed_total() == pts.size());
}

TEST_CASE("Mahalanobis screen rejects degenerate clouds") {
    CHECK_THROWS_AS(mahalanobis_filter(std::vector<Eigen::Vector2d>{{0, 0}, {1, 1}}), DataError);
    CHECK_THROWS_AS(mahalanobis_filter(std::vector<Eigen::Vector2d>{{0, 0}, {1, 1}, {2, 2}, {3, 3}}), DataError);
}

TEST_CASE("combined filter keeps reasons aligned with the input") {
    const TurbineSpec s;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(4.0, 11.0);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<ScadaRecord> r;
    for (int k = 0; k < 300; ++k) {
        const double v = u(rng);
        r.push_back(rec(v, s.expected_power(v) * (1.0 + 0.01 * n(rng)), 0.2 * n(rng), k % 2 ? "A" : "B", k / 2));
    }
    r[17].power = 0.0;  // shutdown
    const auto out = filter_records(r, s);
    REQUIRE(out.reasons.size() == r.size());
    CHECK(out.reasons[17] == FilterReason::Shutdown);
    std::size_t removed = 0;
    for (const auto& reason : out.reasons) removed += reason.has_value();
    CHECK(removed == out.removed.size());
    CHECK(out.retained.size() + removed == r.size());
    CHECK(out.report.retained_count == out.retained.size());

    const auto path = std::filesystem::temp_directory_path() / "windgp_test_audit.csv";
    write_filter_audit(path, r, out);
    std::ifstream in(path);
    std::string header, line;
    std::getline(in, header);
    CHECK(header.substr(header.rfind(',') + 1) == "filter_reason");
    for (int k = 0; k <= 17; ++k) std::getline(in, line);
    CHECK(line.substr(line.rfind(',') + 1) == "shutdown");
    std::filesystem::remove(path);
}

TEST_CASE("clean nominal data passes the rules untouched") {
    const TurbineSpec s;
    std::vector<ScadaRecord> r;
    for (int k = 0; k < 100; ++k) r.push_back(rec(4.0 + 0.08 * k, s.expected_power(4.0 + 0.08 * k), 0.0, "T", k));
    FilterConfig cfg;
    cfg.mahalanobis = false;
    CHECK(filter_records(r, s, cfg).retained.size() == r.size());
}

TEST_CASE("yaw features") {
    const auto [s90, c90] = yaw_to_features(90.0);
    CHECK(s90 == doctest::Approx(1.0));
    CHECK(c90 == doctest::Approx(0.0).epsilon(1e-15));
    const auto [s180, c180] = yaw_to_features(180.0);
    CHECK(c180 == doctest::Approx(-1.0));
    CHECK(std::abs(s180) < 1e-15);
}

TEST_CASE("link transform") {
    const LinkSpec link{1e-4, 2000.0};
    for (double p = 0.5; p < 1999.5; p += 1.3) CHECK(std::abs(inverse_link(link_transform(p, link), link) - p) <= 1e-12 * 2000.0);
    bool clipped = false;
    CHECK(link_transform(0.0, link, &clipped) == doctest::Approx(std::log(1e-4 / (1 - 1e-4))));
    CHECK(clipped);
    link_transform(2500.0, link, &clipped);
    CHECK(clipped);
    link_transform(1000.0, link, &clipped);
    CHECK_FALSE(clipped);
    CHECK(link_transform(1000.0, link) == doctest::Approx(0.0));
    CHECK(inverse_link(-800.0, link) >= 0.0);
    CHECK(inverse_link(800.0, link) == doctest::Approx(2000.0));
    CHECK_THROWS_AS((LinkSpec{0.7, 1.0}.validate()), std::invalid_argument);
}

TEST_CASE("quantile follows linear interpolation between order statistics") {
    CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.5) == 2.5);
    CHECK(quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.9) == doctest::Approx(4.6));
    CHECK(quantile({7.0}, 0.999) == 7.0);
    const std::vector<double> p{0.0, 100.0, 200.0, 1000.0};
    CHECK(fit_link(p, 1.0).normalizer == 1000.0);
}

TEST_CASE("stratified sampling") {
    std::vector<double> yaw;
    for (int k = 0; k < 7200; ++k) yaw.push_back(k * 0.05);  // uniform over [0, 360)

    SUBCASE("uniform yaw gives equal bins") {
        const auto s = stratified_sample(yaw, 3600, 36, 1);
        REQUIRE(s.indices.size() == 3600);
        std::vector<int> counts(36, 0);
        for (auto i : s.indices) ++counts[static_cast<int>(yaw[i] / 10.0)];
        for (int c : counts) CHECK(c == 100);
        CHECK(std::is_sorted(s.indices.begin(), s.indices.end()));
        CHECK(std::adjacent_find(s.indices.begin(), s.indices.end()) == s.indices.end());
    }
    SUBCASE("deterministic per seed") {
        CHECK(stratified_sample(yaw, 500, 36, 9).indices == stratified_sample(yaw, 500, 36, 9).indices);
        CHECK(stratified_sample(yaw, 500, 36, 9).indices != stratified_sample(yaw, 500, 36, 10).indices);
    }
    SUBCASE("taking everything is the identity") {
        const auto s = stratified_sample(yaw, yaw.size(), 36, 4);
        std::vector<std::size_t> all(yaw.size());
        std::iota(all.begin(), all.end(), 0);
        CHECK(s.indices == all);
        CHECK_FALSE(s.warning.has_value());
    }
    SUBCASE("asking for too much returns everything with a warning") {
        const auto s = stratified_sample(yaw, yaw.size() + 1, 36, 4);
        CHECK(s.indices.size() == yaw.size());
        CHECK(s.warning.has_value());
    }
}

TEST_CASE("largest-remainder allocation") {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> cnt(0, 400);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::size_t> counts(36);
        for (auto& c : counts) c = cnt(rng);
        const std::size_t n = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
        const std::size_t total = n / 3;
        const auto alloc = proportional_allocation(counts, total);
        CHECK(std::accumulate(alloc.begin(), alloc.end(), std::size_t{0}) == total);
        for (std::size_t b = 0; b < counts.size(); ++b) {
            const double exact = static_cast<double>(counts[b]) * static_cast<double>(total) / static_cast<double>(n);
            CHECK(static_cast<double>(alloc[b]) >= std::floor(exact));
            CHECK(static_cast<double>(alloc[b]) <= std::floor(exact) + 1.0);
        }
    }
    // Equal remainders: the lower bin wins.
    const std::vector<std::size_t> counts{1, 1, 1};
    CHECK(proportional_allocation(counts, 1) == std::vector<std::size_t>{1, 0, 0});
}
