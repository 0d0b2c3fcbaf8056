#include <doctest.h>

#include <numeric>
#include <string>
#include <vector>

#include "appusage/featurize.hpp"
#include "appusage/rng.hpp"

using namespace appusage;

namespace {

constexpr std::int32_t kTz = 360;  // UTC+6

// UTC ms for a given local wall-clock instant on day `d`
EpochMs local_ts(int d, int h, int m = 0, int s = 0, int ms = 0) {
    const EpochMs local =
        static_cast<EpochMs>(d) * kMsPerDay + h * kMsPerHour + m * kMsPerMinute + s * kMsPerSecond + ms;
    return local - kTz * kMsPerMinute;
}

UsageInterval iv(EpochMs start, EpochMs end, const std::string& pkg = "p",
                 const std::string& cat = "Unknown") {
    return {pkg, cat, start, end};
}

}  // namespace

TEST_CASE("period assignment boundaries (half-open bins)") {
    CHECK(assign_period(0) == PeriodBin::Night);
    CHECK(assign_period(6 * kMsPerHour - 1) == PeriodBin::Night);
    CHECK(assign_period(6 * kMsPerHour) == PeriodBin::Morning);
    CHECK(assign_period(12 * kMsPerHour - 1) == PeriodBin::Morning);
    CHECK(assign_period(12 * kMsPerHour) == PeriodBin::Afternoon);
    CHECK(assign_period(18 * kMsPerHour) == PeriodBin::Evening);
    CHECK(assign_period(24 * kMsPerHour - 1) == PeriodBin::Evening);
}

TEST_CASE("local_ms_of_day applies the offset") {
    CHECK(local_ms_of_day(local_ts(3, 6, 0), kTz) == 6 * kMsPerHour);
    CHECK(local_ms_of_day(local_ts(3, 23, 59, 59, 999), kTz) == kMsPerDay - 1);
    CHECK(local_ms_of_day(local_ts(3, 0, 0), kTz) == 0);
}

TEST_CASE("interval split across the 06:00 boundary") {
    // 05:59 - 06:02 local: one minute night, two minutes morning
    const auto parts = split_interval_by_period(iv(local_ts(2, 5, 59), local_ts(2, 6, 2)), kTz);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].first == PeriodBin::Night);
    CHECK(parts[0].second == kMsPerMinute);
    CHECK(parts[1].first == PeriodBin::Morning);
    CHECK(parts[1].second == 2 * kMsPerMinute);
}

TEST_CASE("interval split across local midnight") {
    // 23:59 - 00:02 local: one minute evening, two minutes night
    const auto parts = split_interval_by_period(iv(local_ts(2, 23, 59), local_ts(3, 0, 2)), kTz);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].first == PeriodBin::Night);
    CHECK(parts[0].second == 2 * kMsPerMinute);
    CHECK(parts[1].first == PeriodBin::Evening);
    CHECK(parts[1].second == kMsPerMinute);
}

TEST_CASE("multi-day interval split conserves total duration") {
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        const EpochMs start = static_cast<EpochMs>(rng.uniform_int(4 * kMsPerDay));
        const EpochMs dur = 1 + static_cast<EpochMs>(rng.uniform_int(3 * kMsPerDay));
        const auto parts = split_interval_by_period(iv(start, start + dur), kTz);
        EpochMs sum = 0;
        for (auto [p, d] : parts) {
            CHECK(d > 0);
            sum += d;
        }
        CHECK(sum == dur);
    }
}

TEST_CASE("feature grammar: 720 names for 27 categories, deterministic order") {
    const auto names = feature_names(default_categories());
    CHECK(names.size() == 720);
    CHECK(names[0] == "Art & Design.duration.night");
    CHECK(names[4] == "Art & Design.duration.whole");
    CHECK(names.back() == "phone.sessions_engage.whole");
    // every name has the three-part shape
    for (const auto& n : names) CHECK(std::count(n.begin(), n.end(), '.') == 2);
    // 25 usage cells per category, 25 + 20 for phone
    CHECK(std::count_if(names.begin(), names.end(),
                        [](const std::string& n) { return n.rfind("phone.", 0) == 0; }) == 45);
}

TEST_CASE("feature_vector hand case") {
    CategoryMap cm;  // default 27 categories
    cm.add("com.game", "Games");
    cm.add("com.chess", "Games");
    cm.add("com.mail", "Communication");

    std::vector<UsageInterval> ivs = {
        iv(local_ts(1, 7, 0), local_ts(1, 7, 10), "com.game", "Games"),     // morning, 10 min
        iv(local_ts(1, 7, 20), local_ts(1, 7, 25), "com.chess", "Games"),   // morning, 5 min
        iv(local_ts(1, 13, 0), local_ts(1, 13, 6), "com.game", "Games"),    // afternoon, 6 min
        iv(local_ts(1, 13, 30), local_ts(1, 13, 33), "com.mail", "Communication"),
    };
    const auto sessions = build_sessions(ivs);
    const FeatureVector fv = feature_vector(ivs, sessions, cm, kTz);
    REQUIRE(fv.values.size() == 720);

    const auto names = feature_names(cm.category_set());
    auto at = [&](const std::string& n) {
        const auto it = std::find(names.begin(), names.end(), n);
        REQUIRE(it != names.end());
        return fv.values[static_cast<std::size_t>(it - names.begin())];
    };

    CHECK(at("Games.duration.morning") == 15.0 * kMsPerMinute);
    CHECK(at("Games.duration.afternoon") == 6.0 * kMsPerMinute);
    CHECK(at("Games.duration.whole") == 21.0 * kMsPerMinute);
    CHECK(at("Games.launches.morning") == 2.0);
    CHECK(at("Games.launches.whole") == 3.0);
    CHECK(at("Games.n_apps.morning") == 2.0);
    CHECK(at("Games.n_apps.afternoon") == 1.0);
    CHECK(at("Games.n_apps.whole") == 2.0);
    CHECK(at("Games.dur_per_app.whole") == doctest::Approx(21.0 * kMsPerMinute / 2.0));
    CHECK(at("Games.dur_per_launch.whole") == doctest::Approx(21.0 * kMsPerMinute / 3.0));
    CHECK(at("Games.duration.night") == 0.0);
    CHECK(at("Communication.duration.afternoon") == 3.0 * kMsPerMinute);
    CHECK(at("phone.duration.whole") == 24.0 * kMsPerMinute);
    CHECK(at("phone.launches.whole") == 4.0);
    CHECK(at("phone.n_apps.whole") == 3.0);
    // four intervals, gaps > 45s: four sessions; 10/6 min engage, 5/3 min engage too (>60s)
    CHECK(at("phone.sessions_total.whole") == 4.0);
    CHECK(at("phone.sessions_engage.whole") == 4.0);
    CHECK(at("phone.sessions_total.morning") == 2.0);
    CHECK(at("phone.sessions_total.afternoon") == 2.0);
    CHECK(at("phone.sessions_total.night") == 0.0);

    // usage mask: Games active morning/afternoon/whole, not night/evening
    auto mask_at = [&](const std::string& n) {
        const auto it = std::find(names.begin(), names.end(), n);
        return fv.usage_mask[static_cast<std::size_t>(it - names.begin())];
    };
    CHECK(mask_at("Games.duration.morning"));
    CHECK(mask_at("Games.duration.whole"));
    CHECK_FALSE(mask_at("Games.duration.night"));
    CHECK_FALSE(mask_at("Weather.duration.whole"));
}

TEST_CASE("conservation identities on random logs") {
    Rng rng(31);
    const auto& cats = default_categories();
    CategoryMap cm;
    for (int i = 0; i < 40; ++i)
        cm.add("com.p" + std::to_string(i), cats[rng.uniform_int(cats.size())]);

    for (int rep = 0; rep < 10; ++rep) {
        std::vector<UsageInterval> ivs;
        EpochMs t = local_ts(1, 0, 0);
        EpochMs total = 0;
        for (int i = 0; i < 100; ++i) {
            t += static_cast<EpochMs>(rng.uniform_int(2 * kMsPerHour));
            const EpochMs d = 1000 + static_cast<EpochMs>(rng.uniform_int(kMsPerHour));
            const std::string pkg = "com.p" + std::to_string(rng.uniform_int(40));
            ivs.push_back(iv(t, t + d, pkg, cm.lookup(pkg)));
            total += d;
        }
        const auto sessions = build_sessions(ivs);
        const FeatureVector fv = feature_vector(ivs, sessions, cm, kTz);
        const auto names = feature_names(cm.category_set());
        auto at = [&](const std::string& n) {
            return fv.values[static_cast<std::size_t>(
                std::find(names.begin(), names.end(), n) - names.begin())];
        };

        // phone whole-day duration equals the sum of interval durations
        CHECK(at("phone.duration.whole") == static_cast<double>(total));
        // and equals the sum over the four diurnal periods
        for (const std::string metric : {"duration", "launches"}) {
            const double whole = at("phone." + metric + ".whole");
            double periods = 0.0;
            for (const std::string p : {"night", "morning", "afternoon", "evening"})
                periods += at("phone." + metric + "." + p);
            CHECK(whole == periods);
        }
        // category whole-day durations sum to the phone total (every package mapped)
        double cat_sum = 0.0;
        for (const auto& c : cm.category_set()) cat_sum += at(c + ".duration.whole");
        CHECK(cat_sum == at("phone.duration.whole"));
        // session counts: kinds partition the total
        CHECK(at("phone.sessions_total.whole") ==
              at("phone.sessions_micro.whole") + at("phone.sessions_review.whole") +
                  at("phone.sessions_engage.whole"));
        CHECK(at("phone.sessions_total.whole") == static_cast<double>(sessions.size()));
    }
}

TEST_CASE("zero-usage student yields all-zero vector with empty mask") {
    CategoryMap cm;
    const FeatureVector fv = feature_vector({}, {}, cm, kTz);
    CHECK(fv.values.size() == 720);
    for (double v : fv.values) CHECK(v == 0.0);
    for (bool b : fv.usage_mask) CHECK_FALSE(b);
}

TEST_CASE("feature_matrix: analyzable rows only, outcome attached") {
    Cohort c;
    c.students = {{"a", 3.2}, {"ghost", 2.8}};
    EventLog log;
    log.student_id = "a";
    log.window_start = 0;
    log.window_end = 7 * kMsPerDay;
    log.events.push_back({local_ts(1, 9, 0), "com.x", std::nullopt, EventKind::Foreground});
    log.events.push_back({local_ts(1, 9, 5), "com.x", std::nullopt, EventKind::Background});
    c.logs["a"] = log;
    c.skipped = {"ghost"};

    const FeatureMatrix m = feature_matrix(c);
    CHECK(m.names.size() == 720);
    REQUIRE(m.rows.size() == 1);
    CHECK(m.rows[0].student_id == "a");
    CHECK(m.outcome.at("a") == 3.2);
    CHECK(m.rows[0].values[m.col("phone.duration.whole")] == 5.0 * kMsPerMinute);

    Cohort empty;
    empty.students = {{"ghost", 2.8}};
    CHECK_THROWS_AS(feature_matrix(empty), NoAnalyzableStudents);
}
