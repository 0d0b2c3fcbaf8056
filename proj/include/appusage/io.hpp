#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "appusage/cluster.hpp"
#include "appusage/ingest.hpp"
#include "appusage/featurize.hpp"
#include "appusage/predict.hpp"
#include "appusage/session.hpp"
#include "appusage/stats.hpp"
#include "appusage/synth.hpp"

namespace appusage {

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string csv_quote(const std::string& s) {
    if (s.find(',') == std::string::npos && s.find('"') == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

// local-time ISO 8601 with explicit offset
inline std::string iso_local(EpochMs utc_ms, std::int32_t tz_offset_minutes) {
    const EpochMs local = utc_ms + static_cast<EpochMs>(tz_offset_minutes) * kMsPerMinute;
    EpochMs days = local / kMsPerDay;
    EpochMs rem = local % kMsPerDay;
    if (rem < 0) {
        rem += kMsPerDay;
        --days;
    }
    // civil-from-days (Howard Hinnant's algorithm)
    std::int64_t z = days + 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const std::int64_t doe = z - era * 146097;
    const std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = yoe + era * 400;
    const std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const std::int64_t mp = (5 * doy + 2) / 153;
    const std::int64_t d = doy - (153 * mp + 2) / 5 + 1;
    const std::int64_t m = mp + (mp < 10 ? 3 : -9);
    const std::int64_t year = y + (m <= 2);

    const int hh = static_cast<int>(rem / kMsPerHour);
    const int mi = static_cast<int>(rem % kMsPerHour / kMsPerMinute);
    const int ss = static_cast<int>(rem % kMsPerMinute / kMsPerSecond);
    const int ms = static_cast<int>(rem % kMsPerSecond);
    const char sign = tz_offset_minutes < 0 ? '-' : '+';
    const int off = tz_offset_minutes < 0 ? -tz_offset_minutes : tz_offset_minutes;
    char buf[72];
    std::snprintf(buf, sizeof buf, "%04lld-%02lld-%02lldT%02d:%02d:%02d.%03d%c%02d:%02d",
                  static_cast<long long>(year), static_cast<long long>(m),
                  static_cast<long long>(d), hh, mi, ss, ms, sign, off / 60, off % 60);
    return buf;
}

inline void write_sessions_csv(const std::string& student_id, const std::vector<Session>& sessions,
                               std::int32_t tz_offset_minutes, std::ostream& out) {
    std::size_t i = 0;
    for (const auto& s : sessions) {
        out << csv_quote(student_id) << ',' << i++ << ',' << iso_local(s.start, tz_offset_minutes)
            << ',' << iso_local(s.end, tz_offset_minutes) << ',' << s.spent_ms << ','
            << session_kind_name(s.kind) << ',' << s.intervals.size() << '\n';
    }
}

inline void write_features_csv(const FeatureMatrix& m, std::ostream& out, bool masks = false) {
    out << "student_id,cgpa";
    for (const auto& n : m.names) out << ',' << csv_quote(n);
    out << '\n';
    for (const auto& row : m.rows) {
        out << csv_quote(row.student_id) << ',' << fmt_double(m.outcome.at(row.student_id));
        if (masks)
            for (bool b : row.usage_mask) out << ',' << (b ? 1 : 0);
        else
            for (double v : row.values) out << ',' << fmt_double(v);
        out << '\n';
    }
}

inline const char* corr_method_name(CorrMethod m) {
    return m == CorrMethod::Pearson ? "pearson" : "spearman";
}

inline void write_assoc_csv(const std::vector<AssocCell>& cells, std::ostream& out) {
    out << "feature,n,method,coef,p,p_adj\n";
    for (const auto& c : cells) {
        out << csv_quote(c.feature) << ',' << c.n << ',';
        switch (c.status) {
            case CellStatus::TooFewN: out << "N/A,N/A,N/A,N/A"; break;
            case CellStatus::Constant: out << "constant,N/A,N/A,N/A"; break;
            default:
                out << corr_method_name(c.method) << ',' << fmt_double(c.coef) << ','
                    << fmt_double(c.p) << ',' << fmt_double(c.p_adj);
        }
        out << '\n';
    }
}

inline const char* group_test_name(GroupTest t) {
    switch (t) {
        case GroupTest::StandardT: return "standard_t";
        case GroupTest::WelchT: return "welch_t";
        default: return "mann_whitney_u";
    }
}

inline void write_compare_csv(const std::vector<CompareCell>& cells, std::ostream& out) {
    out << "feature,n_high,n_low,mean_high,mean_low,test,statistic,p,p_adj\n";
    for (const auto& c : cells) {
        out << csv_quote(c.feature) << ',';
        if (!c.valid) {
            out << "N/A,N/A,N/A,N/A,N/A,N/A,N/A,N/A\n";
            continue;
        }
        out << c.high.n << ',' << c.low.n << ',' << fmt_double(c.high.mean) << ','
            << fmt_double(c.low.mean) << ',' << group_test_name(c.test) << ','
            << fmt_double(c.statistic) << ',' << fmt_double(c.p) << ',' << fmt_double(c.p_adj)
            << '\n';
    }
}

inline nlohmann::json assoc_to_json(const AssocReport& rep) {
    auto fam = [](const std::vector<AssocCell>& cells) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& c : cells) {
            nlohmann::json j{{"feature", c.feature}, {"n", c.n}};
            if (c.status == CellStatus::Ok) {
                j["method"] = corr_method_name(c.method);
                j["coef"] = c.coef;
                j["p"] = c.p;
                j["p_adj"] = c.p_adj;
            } else {
                j["status"] = c.status == CellStatus::TooFewN ? "N/A" : "constant";
            }
            a.push_back(j);
        }
        return a;
    };
    return {{"aggregates", fam(rep.aggregates)},
            {"categories_whole", fam(rep.categories_whole)},
            {"categories_periods", fam(rep.categories_periods)}};
}

inline nlohmann::json prediction_to_json(const PredictionReport& rep) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& [id, ap] : rep.per_student)
        per.push_back({{"student_id", id}, {"actual", ap.first}, {"predicted", ap.second}});
    nlohmann::json fams = nlohmann::json::array();
    for (const auto& f : rep.per_family) {
        nlohmann::json h{{"lambda", f.chosen.lambda},
                         {"l1_ratio", f.chosen.l1_ratio},
                         {"k", f.chosen.k},
                         {"inverse_distance", f.chosen.inverse_distance}};
        fams.push_back({{"family", family_name(f.family)},
                        {"chosen_hypers", h},
                        {"mean_train_mae", f.mean_train_mae},
                        {"mean_val_mae", f.mean_val_mae},
                        {"test_mae", f.test_mae},
                        {"in_ensemble", f.in_ensemble}});
    }
    return {{"test_mae", rep.test_mae},
            {"overfit_gap", rep.overfit_gap},
            {"pred_actual_corr",
             {{"coef", rep.pred_actual_corr.coef},
              {"p", rep.pred_actual_corr.p},
              {"method", corr_method_name(rep.pred_actual_corr.method)},
              {"n", rep.pred_actual_corr.n}}},
            {"baseline_test_mae", rep.baseline_test_mae},
            {"per_family", fams},
            {"per_student", per},
            {"selected_features", rep.selected_features},
            {"selection_fallback", rep.selection_fallback}};
}

inline void write_cohort_files(const Cohort& cohort, const std::string& events_path,
                               const std::string& categories_path, const std::string& cgpa_path) {
    {
        std::ofstream ev(events_path);
        std::vector<EventLog> logs;
        for (const auto& [sid, log] : cohort.logs) logs.push_back(log);
        write_events_jsonl(logs, ev);
    }
    {
        std::ofstream cat(categories_path);
        cat << "package,category\n";
        std::vector<std::pair<std::string, std::string>> entries(
            cohort.categories.entries().begin(), cohort.categories.entries().end());
        std::sort(entries.begin(), entries.end());
        for (const auto& [pkg, c] : entries) cat << csv_quote(pkg) << ',' << csv_quote(c) << '\n';
    }
    {
        std::ofstream gp(cgpa_path);
        gp << "student_id,cgpa\n";
        for (const auto& s : cohort.students)
            gp << csv_quote(s.student_id) << ',' << fmt_double(s.cgpa) << '\n';
    }
}

}  // namespace appusage
