#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "appusage/errors.hpp"
#include "appusage/featurize.hpp"
#include "appusage/mathkernels.hpp"
#include "appusage/model.hpp"
#include "appusage/rng.hpp"

namespace appusage {

struct PlantedEffect {
    std::string feature_name;  // "<category>.<metric>.<period>"
    double target_spearman = 0.0;
};

enum class OutcomeModel {
    RankLinked,      // CGPA drawn first, planted features rank-coupled to it
    LinearInPlanted  // planted features drawn first, CGPA = linear combo + noise
};

struct SynthConfig {
    std::size_t n_students = 120;
    std::size_t days = 7;
    std::int32_t tz_offset_minutes = 360;
    std::uint64_t seed = 0;
    std::vector<std::string> categories = default_categories();
    std::vector<PlantedEffect> planted_effects;
    std::size_t noise_cells = 30;  // cohort-fixed active (category, period) cells
    OutcomeModel outcome = OutcomeModel::RankLinked;
    std::vector<double> linear_weights;  // per planted effect, LinearInPlanted only
    double linear_intercept = 1.0;
    double noise_sd = 0.2;  // grade points, LinearInPlanted only
};

struct CellTotals {
    EpochMs duration_ms = 0;
    std::size_t launches = 0;
    std::size_t n_apps = 0;
};

struct StudentProfile {
    std::string student_id;
    double cgpa = 0.0;
    // (category index, period index 0-3 or 4 = spread over the whole day)
    std::map<std::pair<std::size_t, std::size_t>, CellTotals> cells;
};

struct GroundTruth {
    std::vector<StudentProfile> profiles;
    // planted feature -> per-student exact values, aligned with profiles
    std::map<std::string, std::vector<double>> planted_values;
};

namespace detail {

struct ParsedFeature {
    std::string scope;
    std::string metric;
    std::string period;
};

inline ParsedFeature parse_feature_name(const std::string& name) {
    const auto p2 = name.rfind('.');
    if (p2 == std::string::npos) throw DataError("bad feature name: " + name);
    const auto p1 = name.rfind('.', p2 - 1);
    if (p1 == std::string::npos) throw DataError("bad feature name: " + name);
    return {name.substr(0, p1), name.substr(p1 + 1, p2 - p1 - 1), name.substr(p2 + 1)};
}

inline std::size_t period_index(const std::string& p) {
    for (std::size_t i = 0; i < 5; ++i)
        if (p == period_name(static_cast<PeriodBin>(i))) return i;
    throw DataError("bad period name: " + p);
}

// metric value from a latent uniform u in (0,1); derived companion totals are
// deterministic functions of the planted one
inline CellTotals totals_from_latent(const std::string& metric, double u) {
    CellTotals t;
    if (metric == "duration") {
        t.duration_ms = 300000 + static_cast<EpochMs>(std::llround(u * 5400000.0));
        t.launches = 1 + static_cast<std::size_t>(t.duration_ms / 600000);
        t.n_apps = std::min<std::size_t>(3, t.launches);
    } else if (metric == "launches") {
        t.launches = 1 + static_cast<std::size_t>(std::llround(u * 29.0));
        t.duration_ms = static_cast<EpochMs>(t.launches) * 120000;
        t.n_apps = std::min<std::size_t>(3, t.launches);
    } else if (metric == "n_apps") {
        t.n_apps = 1 + static_cast<std::size_t>(std::llround(u * 9.0));
        t.launches = t.n_apps;
        t.duration_ms = static_cast<EpochMs>(t.launches) * 120000;
    } else {
        throw DataError("plantable metrics are duration, launches, n_apps; got " + metric);
    }
    return t;
}

inline double planted_metric_value(const std::string& metric, const CellTotals& t) {
    if (metric == "duration") return static_cast<double>(t.duration_ms);
    if (metric == "launches") return static_cast<double>(t.launches);
    return static_cast<double>(t.n_apps);
}

}  // namespace detail

// Places each cell's intervals inside the target local-time period windows so
// featurization reproduces the planted totals integer-exactly. Intervals never
// overlap: a per-(day, period) cursor advances with a 60 s gap.
inline EventLog gen_event_log(const StudentProfile& profile, const SynthConfig& cfg,
                              const CategoryMap& categories) {
    constexpr EpochMs kPeriodMs = 6 * kMsPerHour;
    const EpochMs local_day0 = (1750000000000LL / kMsPerDay) * kMsPerDay;
    const EpochMs tz_ms = static_cast<EpochMs>(cfg.tz_offset_minutes) * kMsPerMinute;

    EventLog log;
    log.student_id = profile.student_id;
    log.tz_offset_minutes = cfg.tz_offset_minutes;
    log.window_start = local_day0 - tz_ms;
    log.window_end = log.window_start + static_cast<EpochMs>(cfg.days) * kMsPerDay;

    // cursor per (day, period): offset of the next free ms inside the slot
    std::map<std::pair<std::size_t, std::size_t>, EpochMs> cursor;
    const auto& cats = categories.category_set();

    for (const auto& [key, totals] : profile.cells) {
        const auto [ci, pi] = key;
        if (totals.launches == 0) continue;
        if (totals.duration_ms < static_cast<EpochMs>(totals.launches) ||
            totals.n_apps > totals.launches)
            throw InfeasibleTotal("cell totals inconsistent");

        // slots this cell may use
        std::vector<std::pair<std::size_t, std::size_t>> slots;
        for (std::size_t d = 0; d < cfg.days; ++d) {
            if (pi < 4) slots.push_back({d, pi});
            else
                for (std::size_t p = 0; p < 4; ++p) slots.push_back({d, p});
        }

        const EpochMs q = totals.duration_ms / static_cast<EpochMs>(totals.launches);
        const EpochMs rem = totals.duration_ms % static_cast<EpochMs>(totals.launches);
        for (std::size_t l = 0; l < totals.launches; ++l) {
            const EpochMs dur = q + (static_cast<EpochMs>(l) < rem ? 1 : 0);
            bool placed = false;
            for (std::size_t attempt = 0; attempt < slots.size() && !placed; ++attempt) {
                const auto slot = slots[(l + attempt) % slots.size()];
                EpochMs& off = cursor[slot];
                if (off + dur > kPeriodMs) continue;
                const EpochMs local_start = local_day0 +
                                            static_cast<EpochMs>(slot.first) * kMsPerDay +
                                            static_cast<EpochMs>(slot.second) * kPeriodMs + off;
                off += dur + 60 * kMsPerSecond;
                const std::string pkg =
                    "pkg." + std::to_string(ci) + "." + std::to_string(l % totals.n_apps);
                const EpochMs start = local_start - tz_ms;
                log.events.push_back({start, pkg, std::nullopt, EventKind::Foreground});
                log.events.push_back({start + dur, pkg, std::nullopt, EventKind::Background});
                placed = true;
            }
            if (!placed)
                throw InfeasibleTotal("no period capacity left for " + cats[ci] + " cell");
        }
    }
    std::stable_sort(log.events.begin(), log.events.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    return log;
}

inline std::pair<Cohort, GroundTruth> gen_cohort(const SynthConfig& cfg) {
    if (cfg.outcome == OutcomeModel::LinearInPlanted &&
        cfg.linear_weights.size() != cfg.planted_effects.size())
        throw DataError("linear_weights must match planted_effects");

    CategoryMap categories(cfg.categories);
    const auto& cats = categories.category_set();
    const std::size_t ncat = cats.size();
    Rng master(cfg.seed);

    struct PlantedCell {
        std::size_t cat;
        std::size_t period;  // 0-3, or 4 = whole day
        std::string metric;
        double target;
    };
    std::vector<PlantedCell> planted;
    std::vector<bool> cat_planted(ncat, false);
    for (const auto& pe : cfg.planted_effects) {
        const auto pf = detail::parse_feature_name(pe.feature_name);
        const std::size_t ci = categories.category_index(pf.scope);
        if (ci >= ncat) throw DataError("planted feature names unknown category: " + pf.scope);
        if (std::fabs(pe.target_spearman) >= 1.0)
            throw DataError("|target_spearman| must be < 1");
        planted.push_back({ci, detail::period_index(pf.period), pf.metric, pe.target_spearman});
        cat_planted[ci] = true;
    }

    // cohort-fixed noise cells, kept clear of planted categories
    std::vector<std::pair<std::size_t, std::size_t>> noise_cells;
    {
        std::vector<std::pair<std::size_t, std::size_t>> pool;
        for (std::size_t c = 0; c < ncat; ++c) {
            if (cat_planted[c]) continue;
            for (std::size_t p = 0; p < 4; ++p) pool.push_back({c, p});
        }
        master.shuffle(pool);
        for (std::size_t i = 0; i < std::min(cfg.noise_cells, pool.size()); ++i)
            noise_cells.push_back(pool[i]);
        std::sort(noise_cells.begin(), noise_cells.end());
    }

    GroundTruth truth;
    for (const auto& pe : cfg.planted_effects)
        truth.planted_values[pe.feature_name] = {};

    // latent normals: one per student for CGPA coupling, one per planted effect
    std::vector<double> g(cfg.n_students);
    std::vector<std::vector<double>> x(planted.size(), std::vector<double>(cfg.n_students));
    for (std::size_t s = 0; s < cfg.n_students; ++s) g[s] = master.normal();
    for (std::size_t e = 0; e < planted.size(); ++e) {
        // Spearman of a bivariate normal with Pearson w is (6/pi) asin(w/2)
        const double w = 2.0 * std::sin(3.14159265358979323846 * planted[e].target / 6.0);
        for (std::size_t s = 0; s < cfg.n_students; ++s) {
            const double eps = master.normal();
            x[e][s] = cfg.outcome == OutcomeModel::RankLinked
                          ? w * g[s] + std::sqrt(1.0 - w * w) * eps
                          : eps;
        }
    }

    std::vector<double> cgpa(cfg.n_students);
    if (cfg.outcome == OutcomeModel::RankLinked) {
        for (std::size_t s = 0; s < cfg.n_students; ++s)
            cgpa[s] = 2.0 + 2.0 * normal_cdf(g[s]);
    } else {
        for (std::size_t s = 0; s < cfg.n_students; ++s) {
            double v = cfg.linear_intercept;
            for (std::size_t e = 0; e < planted.size(); ++e)
                v += cfg.linear_weights[e] * normal_cdf(x[e][s]);
            v += cfg.noise_sd * master.normal();
            cgpa[s] = std::clamp(v, 0.0, 4.0);
        }
    }

    Cohort cohort;
    for (std::size_t s = 0; s < cfg.n_students; ++s) {
        StudentProfile prof;
        char buf[32];
        std::snprintf(buf, sizeof buf, "s%04zu", s + 1);
        prof.student_id = buf;
        prof.cgpa = cgpa[s];

        Rng rng = Rng::substream(cfg.seed, s);
        for (std::size_t e = 0; e < planted.size(); ++e) {
            const CellTotals t = detail::totals_from_latent(planted[e].metric, normal_cdf(x[e][s]));
            auto& cell = prof.cells[{planted[e].cat, planted[e].period}];
            cell.duration_ms += t.duration_ms;
            cell.launches += t.launches;
            cell.n_apps = std::max(cell.n_apps, t.n_apps);
            truth.planted_values[cfg.planted_effects[e].feature_name].push_back(
                detail::planted_metric_value(planted[e].metric, t));
        }
        for (const auto& nc : noise_cells) {
            CellTotals t;
            t.launches = 1 + rng.uniform_int(5);
            t.duration_ms = static_cast<EpochMs>(120000 + rng.uniform_int(1680001)) +
                            static_cast<EpochMs>(t.launches) * 1000;
            t.n_apps = 1 + rng.uniform_int(std::min<std::size_t>(3, t.launches));
            prof.cells[nc] = t;
        }

        cohort.students.push_back({prof.student_id, prof.cgpa});
        cohort.logs[prof.student_id] = gen_event_log(prof, cfg, categories);
        truth.profiles.push_back(std::move(prof));
    }

    // register every generated package so featurization sees the right category
    for (std::size_t c = 0; c < ncat; ++c)
        for (std::size_t a = 0; a < 32; ++a)
            categories.add("pkg." + std::to_string(c) + "." + std::to_string(a), cats[c]);
    cohort.categories = std::move(categories);
    return {std::move(cohort), std::move(truth)};
}

}  // namespace appusage
