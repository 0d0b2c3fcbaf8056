#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "appusage/model.hpp"

namespace appusage {

struct UsageInterval {
    std::string package;
    std::string category;
    EpochMs start = 0;
    EpochMs end = 0;

    EpochMs duration() const { return end - start; }
};

struct PairingStats {
    std::size_t unmatched_foregrounds = 0;  // closed at window_end
    std::size_t unmatched_backgrounds = 0;  // discarded
    std::size_t zero_length = 0;            // discarded
};

enum class SessionKind { Micro, Review, Engage };

struct SessionParams {
    EpochMs gap_threshold_ms = 45 * kMsPerSecond;
    EpochMs micro_max_ms = 15 * kMsPerSecond;
    EpochMs review_max_ms = 60 * kMsPerSecond;
};

struct Session {
    std::vector<UsageInterval> intervals;
    EpochMs start = 0;
    EpochMs end = 0;      // max interval end
    EpochMs spent_ms = 0; // sum of interval durations, not the span
    SessionKind kind = SessionKind::Micro;
};

// Per-package pairing: each foreground is matched with the earliest subsequent
// background of the same package. Dangling foregrounds close at window_end,
// dangling backgrounds are dropped; both are counted, never silently lost.
inline std::pair<std::vector<UsageInterval>, PairingStats> pair_intervals(
    const EventLog& log, const CategoryMap& categories) {
    std::vector<UsageInterval> out;
    PairingStats stats;
    std::map<std::string, std::vector<EpochMs>> open;  // package -> open fg timestamps (FIFO)
    for (const auto& e : log.events) {
        if (e.kind == EventKind::Foreground) {
            open[e.package].push_back(e.timestamp);
        } else {
            auto it = open.find(e.package);
            if (it == open.end() || it->second.empty()) {
                ++stats.unmatched_backgrounds;
                continue;
            }
            EpochMs start = it->second.front();
            it->second.erase(it->second.begin());
            EpochMs start_c = std::clamp(start, log.window_start, log.window_end);
            EpochMs end_c = std::clamp(e.timestamp, log.window_start, log.window_end);
            if (end_c <= start_c) {
                ++stats.zero_length;
                continue;
            }
            out.push_back({e.package, categories.lookup(e.package), start_c, end_c});
        }
    }
    for (const auto& [pkg, starts] : open) {
        for (EpochMs s : starts) {
            ++stats.unmatched_foregrounds;
            EpochMs start_c = std::clamp(s, log.window_start, log.window_end);
            if (log.window_end <= start_c) {
                ++stats.zero_length;
                continue;
            }
            out.push_back({pkg, categories.lookup(pkg), start_c, log.window_end});
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.start < b.start; });
    return {std::move(out), stats};
}

inline SessionKind classify_session(EpochMs spent_ms, const SessionParams& p = {}) {
    if (spent_ms <= p.micro_max_ms) return SessionKind::Micro;
    if (spent_ms <= p.review_max_ms) return SessionKind::Review;
    return SessionKind::Engage;
}

// Cross-app sessions: a new session begins when the gap to the previous
// session's end exceeds the threshold. Overlapping or touching intervals are
// always co-session.
inline std::vector<Session> build_sessions(std::vector<UsageInterval> intervals,
                                           const SessionParams& p = {}) {
    std::stable_sort(intervals.begin(), intervals.end(),
                     [](const auto& a, const auto& b) { return a.start < b.start; });
    std::vector<Session> out;
    for (auto& iv : intervals) {
        if (out.empty() || iv.start - out.back().end > p.gap_threshold_ms) {
            out.push_back(Session{});
            out.back().start = iv.start;
            out.back().end = iv.end;
        }
        Session& s = out.back();
        s.end = std::max(s.end, iv.end);
        s.spent_ms += iv.duration();
        s.intervals.push_back(std::move(iv));
    }
    for (auto& s : out) s.kind = classify_session(s.spent_ms, p);
    return out;
}

struct SessionCounts {
    std::size_t total = 0;
    std::size_t micro = 0;
    std::size_t review = 0;
    std::size_t engage = 0;
};

inline const char* session_kind_name(SessionKind k) {
    switch (k) {
        case SessionKind::Micro: return "micro";
        case SessionKind::Review: return "review";
        default: return "engage";
    }
}

}  // namespace appusage
