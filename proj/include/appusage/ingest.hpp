#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "appusage/errors.hpp"
#include "appusage/model.hpp"

namespace appusage {

enum class EventFormat { Jsonl, Csv };

struct IngestOptions {
    EventFormat format = EventFormat::Jsonl;
    std::int32_t tz_offset_minutes = 360;
    EpochMs span_ms = 7 * kMsPerDay;  // observation span; longer logs keep the trailing span
};

struct IngestStats {
    std::size_t rows = 0;
    std::size_t truncated_events = 0;  // events before the trailing observation window
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    bool quoted = false;
    std::string cur;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline EventKind parse_kind(const std::string& v, std::size_t line) {
    if (v == "fg") return EventKind::Foreground;
    if (v == "bg") return EventKind::Background;
    throw UnknownKind(line, v);
}

struct RawRow {
    std::string student_id;
    UsageEvent event;
    std::size_t order;  // input position, preserves stable order for timestamp ties
};

inline RawRow parse_jsonl_row(const std::string& line, std::size_t lineno) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedRow(lineno, e.what());
    }
    if (!j.is_object() || !j.contains("student_id") || !j.contains("t") ||
        !j.contains("package") || !j.contains("kind"))
        throw MalformedRow(lineno, "missing required field");
    RawRow r;
    try {
        r.student_id = j.at("student_id").get<std::string>();
        r.event.timestamp = j.at("t").get<EpochMs>();
        r.event.package = j.at("package").get<std::string>();
        if (j.contains("app") && !j.at("app").is_null())
            r.event.app_name = j.at("app").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw MalformedRow(lineno, e.what());
    }
    r.event.kind = parse_kind(j.at("kind").is_string() ? j.at("kind").get<std::string>() : std::string(),
                              lineno);
    if (r.event.package.empty()) throw MalformedRow(lineno, "empty package");
    return r;
}

inline RawRow parse_csv_row(const std::string& line, std::size_t lineno) {
    auto f = split_csv_line(line);
    if (f.size() != 5) throw MalformedRow(lineno, "expected 5 columns");
    RawRow r;
    r.student_id = f[0];
    try {
        r.event.timestamp = std::stoll(f[1]);
    } catch (const std::exception&) {
        throw MalformedRow(lineno, "bad timestamp \"" + f[1] + "\"");
    }
    r.event.package = f[2];
    if (!f[3].empty()) r.event.app_name = f[3];
    r.event.kind = parse_kind(f[4], lineno);
    if (r.student_id.empty()) throw MalformedRow(lineno, "empty student_id");
    if (r.event.package.empty()) throw MalformedRow(lineno, "empty package");
    return r;
}

}  // namespace detail

// One EventLog per distinct student_id; events sorted by timestamp with input
// order preserved on ties. Logs longer than the span keep the trailing span.
inline std::vector<EventLog> parse_events(const std::string& path, const IngestOptions& opt = {},
                                          IngestStats* stats = nullptr) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);

    std::map<std::string, std::vector<detail::RawRow>> by_student;
    std::string line;
    std::size_t lineno = 0, rows = 0;
    bool header_skipped = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (opt.format == EventFormat::Csv && !header_skipped) {
            header_skipped = true;
            if (line.rfind("student_id,", 0) == 0) continue;
        }
        detail::RawRow r = opt.format == EventFormat::Jsonl ? detail::parse_jsonl_row(line, lineno)
                                                            : detail::parse_csv_row(line, lineno);
        r.order = rows++;
        by_student[r.student_id].push_back(std::move(r));
    }
    if (rows == 0) throw EmptyFile(path);

    IngestStats local;
    local.rows = rows;
    std::vector<EventLog> logs;
    for (auto& [sid, raws] : by_student) {
        std::stable_sort(raws.begin(), raws.end(), [](const auto& a, const auto& b) {
            if (a.event.timestamp != b.event.timestamp) return a.event.timestamp < b.event.timestamp;
            return a.order < b.order;
        });
        EventLog log;
        log.student_id = sid;
        log.tz_offset_minutes = opt.tz_offset_minutes;
        log.window_end = raws.back().event.timestamp;
        log.window_start = log.window_end - opt.span_ms;
        for (auto& r : raws) {
            if (r.event.timestamp < log.window_start) {
                ++local.truncated_events;
                continue;
            }
            log.events.push_back(std::move(r.event));
        }
        logs.push_back(std::move(log));
    }
    if (stats) *stats = local;
    return logs;
}

inline void write_events_jsonl(const std::vector<EventLog>& logs, std::ostream& out) {
    for (const auto& log : logs) {
        for (const auto& e : log.events) {
            nlohmann::json j{{"student_id", log.student_id},
                             {"t", e.timestamp},
                             {"package", e.package},
                             {"app", e.app_name ? nlohmann::json(*e.app_name) : nlohmann::json()},
                             {"kind", e.kind == EventKind::Foreground ? "fg" : "bg"}};
            out << j.dump() << '\n';
        }
    }
}

inline CategoryMap parse_categories(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    CategoryMap map;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (lineno == 1 && line.rfind("package,", 0) == 0) continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != 2) throw MalformedRow(lineno, "expected 2 columns");
        if (map.has(f[0]) && map.lookup(f[0]) != f[1]) throw DuplicatePackage(f[0]);
        map.add(f[0], f[1]);
    }
    return map;
}

inline std::vector<StudentRecord> parse_cgpa(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<StudentRecord> out;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (lineno == 1 && line.rfind("student_id,", 0) == 0) continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != 2) throw MalformedRow(lineno, "expected 2 columns");
        StudentRecord r;
        r.student_id = f[0];
        try {
            r.cgpa = std::stod(f[1]);
        } catch (const std::exception&) {
            throw MalformedRow(lineno, "bad cgpa \"" + f[1] + "\"");
        }
        if (r.cgpa < 0.0 || r.cgpa > 4.0) throw CgpaOutOfRange(r.student_id, r.cgpa);
        if (!seen.insert(r.student_id).second) throw DuplicateStudent(r.student_id);
        out.push_back(std::move(r));
    }
    if (out.empty()) throw EmptyFile(path);
    return out;
}

inline Cohort parse_cohort(const std::string& events_path, const std::string& categories_path,
                           const std::string& cgpa_path, const IngestOptions& opt = {}) {
    Cohort c;
    c.students = parse_cgpa(cgpa_path);
    c.categories = parse_categories(categories_path);
    for (auto& log : parse_events(events_path, opt)) c.logs[log.student_id] = std::move(log);
    for (const auto& s : c.students)
        if (!c.logs.count(s.student_id)) c.skipped.push_back(s.student_id);
    return c;
}

struct StudentValidation {
    std::string student_id;
    std::size_t events = 0;
    std::size_t unmatched_foregrounds = 0;
    std::size_t unmatched_backgrounds = 0;
    EpochMs window_start = 0;
    EpochMs window_end = 0;
};

struct ValidationReport {
    std::vector<StudentValidation> per_student;
    std::vector<std::string> violations;
    std::size_t total_events = 0;
    std::size_t unknown_category_packages = 0;
    std::vector<std::string> skipped_students;

    nlohmann::json to_json() const {
        nlohmann::json per = nlohmann::json::array();
        for (const auto& s : per_student)
            per.push_back({{"student_id", s.student_id},
                           {"events", s.events},
                           {"unmatched_fg", s.unmatched_foregrounds},
                           {"unmatched_bg", s.unmatched_backgrounds},
                           {"window_start", s.window_start},
                           {"window_end", s.window_end}});
        return {{"per_student", per},
                {"violations", violations},
                {"total_events", total_events},
                {"unknown_category_packages", unknown_category_packages},
                {"skipped_students", skipped_students}};
    }
};

// report-only; never mutates the cohort
inline ValidationReport validate(const Cohort& cohort) {
    ValidationReport rep;
    rep.skipped_students = cohort.skipped;
    std::set<std::string> unknown_pkgs;
    for (const auto& [sid, log] : cohort.logs) {
        StudentValidation sv;
        sv.student_id = sid;
        sv.events = log.events.size();
        sv.window_start = log.window_start;
        sv.window_end = log.window_end;
        rep.total_events += log.events.size();

        std::map<std::string, std::size_t> open;  // package -> open foreground count
        EpochMs prev = log.window_start;
        for (const auto& e : log.events) {
            if (e.timestamp < log.window_start || e.timestamp > log.window_end)
                rep.violations.push_back("event outside window: student " + sid + " package " +
                                         e.package + " t=" + std::to_string(e.timestamp));
            if (e.timestamp < prev)
                rep.violations.push_back("events out of order: student " + sid + " t=" +
                                         std::to_string(e.timestamp));
            prev = std::max(prev, e.timestamp);
            if (!cohort.categories.has(e.package)) unknown_pkgs.insert(e.package);
            if (e.kind == EventKind::Foreground) {
                ++open[e.package];
            } else {
                auto it = open.find(e.package);
                if (it == open.end() || it->second == 0)
                    ++sv.unmatched_backgrounds;
                else
                    --it->second;
            }
        }
        for (const auto& [pkg, n] : open) sv.unmatched_foregrounds += n;
        bool found = false;
        for (const auto& s : cohort.students) found = found || s.student_id == sid;
        if (!found)
            rep.violations.push_back("log without roster entry: student " + sid);
        rep.per_student.push_back(std::move(sv));
    }
    rep.unknown_category_packages = unknown_pkgs.size();
    return rep;
}

}  // namespace appusage
