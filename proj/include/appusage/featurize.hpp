#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "appusage/errors.hpp"
#include "appusage/model.hpp"
#include "appusage/session.hpp"

namespace appusage {

enum class PeriodBin : std::uint8_t { Night = 0, Morning, Afternoon, Evening, WholeDay };

inline const char* period_name(PeriodBin p) {
    switch (p) {
        case PeriodBin::Night: return "night";
        case PeriodBin::Morning: return "morning";
        case PeriodBin::Afternoon: return "afternoon";
        case PeriodBin::Evening: return "evening";
        default: return "whole";
    }
}

// Half-open six-hour bins: [00,06) night, [06,12) morning, [12,18) afternoon,
// [18,24) evening.
inline PeriodBin assign_period(EpochMs local_ms_of_day) {
    return static_cast<PeriodBin>(local_ms_of_day / (6 * kMsPerHour));
}

inline EpochMs local_ms_of_day(EpochMs utc_ms, std::int32_t tz_offset_minutes) {
    EpochMs local = utc_ms + static_cast<EpochMs>(tz_offset_minutes) * kMsPerMinute;
    EpochMs m = local % kMsPerDay;
    return m < 0 ? m + kMsPerDay : m;
}

// Duration apportioned exactly to the local-time periods the interval
// overlaps; pieces sum to the original duration. Handles multi-day intervals.
inline std::vector<std::pair<PeriodBin, EpochMs>> split_interval_by_period(
    const UsageInterval& iv, std::int32_t tz_offset_minutes) {
    std::array<EpochMs, 4> acc{0, 0, 0, 0};
    EpochMs local = iv.start + static_cast<EpochMs>(tz_offset_minutes) * kMsPerMinute;
    EpochMs remaining = iv.duration();
    while (remaining > 0) {
        EpochMs mod = local % kMsPerDay;
        if (mod < 0) mod += kMsPerDay;
        PeriodBin p = assign_period(mod);
        EpochMs period_end = mod - mod % (6 * kMsPerHour) + 6 * kMsPerHour;
        EpochMs take = std::min(remaining, period_end - mod);
        acc[static_cast<std::size_t>(p)] += take;
        local += take;
        remaining -= take;
    }
    std::vector<std::pair<PeriodBin, EpochMs>> out;
    for (std::size_t i = 0; i < 4; ++i)
        if (acc[i] > 0) out.push_back({static_cast<PeriodBin>(i), acc[i]});
    return out;
}

struct CategoryPeriodStats {
    EpochMs duration_ms = 0;
    std::size_t launches = 0;
    std::size_t n_apps = 0;
    double dur_per_app = 0.0;
    double dur_per_launch = 0.0;

    void finish() {
        dur_per_app = n_apps > 0 ? static_cast<double>(duration_ms) / static_cast<double>(n_apps) : 0.0;
        dur_per_launch =
            launches > 0 ? static_cast<double>(duration_ms) / static_cast<double>(launches) : 0.0;
    }
};

inline constexpr std::array<const char*, 5> kUsageMetrics = {
    "duration", "launches", "n_apps", "dur_per_app", "dur_per_launch"};
inline constexpr std::array<const char*, 4> kSessionMetrics = {
    "sessions_total", "sessions_micro", "sessions_review", "sessions_engage"};
inline constexpr std::array<PeriodBin, 5> kAllPeriods = {
    PeriodBin::Night, PeriodBin::Morning, PeriodBin::Afternoon, PeriodBin::Evening,
    PeriodBin::WholeDay};

// "<scope>.<metric>.<period>": every category then "phone"; phone additionally
// carries the four session-count metrics. 27 categories -> 27*25 + 45 = 720.
inline std::vector<std::string> feature_names(const std::vector<std::string>& category_set) {
    std::vector<std::string> names;
    names.reserve(category_set.size() * 25 + 45);
    for (const auto& cat : category_set)
        for (const auto* m : kUsageMetrics)
            for (PeriodBin p : kAllPeriods)
                names.push_back(cat + "." + m + "." + period_name(p));
    for (const auto* m : kUsageMetrics)
        for (PeriodBin p : kAllPeriods)
            names.push_back(std::string("phone.") + m + "." + period_name(p));
    for (const auto* m : kSessionMetrics)
        for (PeriodBin p : kAllPeriods)
            names.push_back(std::string("phone.") + m + "." + period_name(p));
    return names;
}

struct FeatureVector {
    std::string student_id;
    std::vector<double> values;  // aligned with feature_names(category_set)
    std::vector<bool> usage_mask;
};

struct FeatureMatrix {
    std::vector<std::string> names;
    std::vector<FeatureVector> rows;
    std::map<std::string, double> outcome;  // student_id -> cgpa

    std::size_t col(const std::string& name) const {
        auto it = std::find(names.begin(), names.end(), name);
        return it == names.end() ? names.size() : static_cast<std::size_t>(it - names.begin());
    }
};

// A session belongs to the period containing its start instant (local time).
inline SessionCounts session_counts(const std::vector<Session>& sessions, PeriodBin period,
                                    std::int32_t tz_offset_minutes) {
    SessionCounts c;
    for (const auto& s : sessions) {
        if (period != PeriodBin::WholeDay &&
            assign_period(local_ms_of_day(s.start, tz_offset_minutes)) != period)
            continue;
        ++c.total;
        switch (s.kind) {
            case SessionKind::Micro: ++c.micro; break;
            case SessionKind::Review: ++c.review; break;
            case SessionKind::Engage: ++c.engage; break;
        }
    }
    return c;
}

namespace detail {

struct CellAcc {
    EpochMs duration = 0;
    std::uint32_t launches = 0;
    std::vector<std::uint32_t> app_ids;  // package ids with a start in the period

    std::size_t n_apps() {
        std::sort(app_ids.begin(), app_ids.end());
        app_ids.erase(std::unique(app_ids.begin(), app_ids.end()), app_ids.end());
        return app_ids.size();
    }
};

}  // namespace detail

inline FeatureVector feature_vector(const std::vector<UsageInterval>& intervals,
                                    const std::vector<Session>& sessions,
                                    const CategoryMap& categories, std::int32_t tz_offset_minutes) {
    const auto& cats = categories.category_set();
    const std::size_t ncat = cats.size();
    const std::size_t nscope = ncat + 1;  // + phone
    // accumulator grid: scope x 5 periods (index 4 = whole day)
    std::vector<detail::CellAcc> grid(nscope * 5);
    auto cell = [&](std::size_t scope, std::size_t period) -> detail::CellAcc& {
        return grid[scope * 5 + period];
    };

    std::unordered_map<std::string, std::uint32_t> pkg_ids;
    std::unordered_map<std::string, std::uint32_t> cat_ids;
    for (std::size_t i = 0; i < ncat; ++i) cat_ids[cats[i]] = static_cast<std::uint32_t>(i);

    for (const auto& iv : intervals) {
        auto pit = pkg_ids.emplace(iv.package, static_cast<std::uint32_t>(pkg_ids.size()));
        const std::uint32_t pkg = pit.first->second;
        auto cit = cat_ids.find(iv.category);
        const std::size_t ci = cit == cat_ids.end() ? ncat : cit->second;  // unmapped -> phone only
        const std::size_t start_p =
            static_cast<std::size_t>(assign_period(local_ms_of_day(iv.start, tz_offset_minutes)));

        for (auto [p, d] : split_interval_by_period(iv, tz_offset_minutes)) {
            const std::size_t pi = static_cast<std::size_t>(p);
            if (ci < ncat) cell(ci, pi).duration += d;
            cell(ncat, pi).duration += d;
        }
        if (ci < ncat) {
            cell(ci, 4).duration += iv.duration();
            auto& c = cell(ci, start_p);
            ++c.launches;
            c.app_ids.push_back(pkg);
            auto& cw = cell(ci, 4);
            ++cw.launches;
            cw.app_ids.push_back(pkg);
        }
        cell(ncat, 4).duration += iv.duration();
        auto& ph = cell(ncat, start_p);
        ++ph.launches;
        ph.app_ids.push_back(pkg);
        auto& phw = cell(ncat, 4);
        ++phw.launches;
        phw.app_ids.push_back(pkg);
    }

    FeatureVector fv;
    fv.values.reserve(ncat * 25 + 45);
    fv.usage_mask.reserve(ncat * 25 + 45);
    auto emit_scope = [&](std::size_t scope) {
        std::array<CategoryPeriodStats, 5> stats;
        std::array<bool, 5> active;
        for (std::size_t pi = 0; pi < 5; ++pi) {
            auto& c = cell(scope, pi);
            stats[pi].duration_ms = c.duration;
            stats[pi].launches = c.launches;
            stats[pi].n_apps = c.n_apps();
            stats[pi].finish();
            active[pi] = c.duration > 0 || c.launches > 0;
        }
        for (std::size_t mi = 0; mi < 5; ++mi) {
            for (std::size_t pi = 0; pi < 5; ++pi) {
                double v = 0.0;
                switch (mi) {
                    case 0: v = static_cast<double>(stats[pi].duration_ms); break;
                    case 1: v = static_cast<double>(stats[pi].launches); break;
                    case 2: v = static_cast<double>(stats[pi].n_apps); break;
                    case 3: v = stats[pi].dur_per_app; break;
                    case 4: v = stats[pi].dur_per_launch; break;
                }
                fv.values.push_back(v);
                fv.usage_mask.push_back(active[pi]);
            }
        }
        return active;
    };
    for (std::size_t ci = 0; ci < ncat; ++ci) emit_scope(ci);
    auto phone_active = emit_scope(ncat);

    std::array<SessionCounts, 5> sc;
    for (std::size_t pi = 0; pi < 5; ++pi)
        sc[pi] = session_counts(sessions, static_cast<PeriodBin>(pi), tz_offset_minutes);
    for (std::size_t mi = 0; mi < 4; ++mi) {
        for (std::size_t pi = 0; pi < 5; ++pi) {
            std::size_t v = 0;
            switch (mi) {
                case 0: v = sc[pi].total; break;
                case 1: v = sc[pi].micro; break;
                case 2: v = sc[pi].review; break;
                case 3: v = sc[pi].engage; break;
            }
            fv.values.push_back(static_cast<double>(v));
            fv.usage_mask.push_back(phone_active[pi]);
        }
    }
    return fv;
}

struct FeaturizeParams {
    SessionParams session;
};

inline FeatureVector featurize_student(const EventLog& log, const CategoryMap& categories,
                                       const FeaturizeParams& params = {}) {
    auto [intervals, stats] = pair_intervals(log, categories);
    auto sessions = build_sessions(intervals, params.session);
    FeatureVector fv = feature_vector(intervals, sessions, categories, log.tz_offset_minutes);
    fv.student_id = log.student_id;
    return fv;
}

inline FeatureMatrix feature_matrix(const Cohort& cohort, const FeaturizeParams& params = {}) {
    FeatureMatrix m;
    m.names = feature_names(cohort.categories.category_set());
    auto analyzable = cohort.analyzable();
    if (analyzable.empty()) throw NoAnalyzableStudents();
    for (const auto* s : analyzable) {
        m.rows.push_back(featurize_student(cohort.logs.at(s->student_id), cohort.categories, params));
        m.outcome[s->student_id] = s->cgpa;
    }
    return m;
}

}  // namespace appusage
