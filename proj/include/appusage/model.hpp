#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace appusage {

using EpochMs = std::int64_t;

constexpr EpochMs kMsPerSecond = 1000;
constexpr EpochMs kMsPerMinute = 60 * kMsPerSecond;
constexpr EpochMs kMsPerHour = 60 * kMsPerMinute;
constexpr EpochMs kMsPerDay = 24 * kMsPerHour;

enum class EventKind { Foreground, Background };

struct UsageEvent {
    EpochMs timestamp = 0;  // UTC ms
    std::string package;
    std::optional<std::string> app_name;
    EventKind kind = EventKind::Foreground;

    bool operator==(const UsageEvent&) const = default;
};

struct EventLog {
    std::string student_id;
    EpochMs window_start = 0;
    EpochMs window_end = 0;
    std::int32_t tz_offset_minutes = 360;  // local-time offset for diurnal binning
    std::vector<UsageEvent> events;        // sorted by timestamp, stable

    bool operator==(const EventLog&) const = default;
};

inline const std::vector<std::string>& default_categories() {
    static const std::vector<std::string> names = {
        "Art & Design",
        "Auto & Vehicles",
        "Books & Reference",
        "Browser & Search",
        "Business",
        "Communication",
        "Education",
        "Entertainment",
        "Finance",
        "Food & Drink",
        "Games",
        "Health & Fitness",
        "Lifestyle",
        "Medical",
        "Music & Audio",
        "News & Magazines",
        "Personalization",
        "Photography",
        "Productivity",
        "Shopping",
        "Social Media",
        "Sports",
        "Tools",
        "Travel & Local",
        "Unknown",
        "Video Players & Editors",
        "Weather",
    };
    return names;
}

class CategoryMap {
public:
    CategoryMap() : category_set_(default_categories()) {}

    explicit CategoryMap(std::vector<std::string> category_set)
        : category_set_(std::move(category_set)) {}

    // appends the category to category_set if it is new
    void add(const std::string& package, const std::string& category) {
        entries_[package] = category;
        if (std::find(category_set_.begin(), category_set_.end(), category) == category_set_.end())
            category_set_.push_back(category);
    }

    bool has(const std::string& package) const { return entries_.count(package) > 0; }

    // unmapped packages fall back to "Unknown"
    const std::string& lookup(const std::string& package) const {
        static const std::string unknown = "Unknown";
        auto it = entries_.find(package);
        return it == entries_.end() ? unknown : it->second;
    }

    std::size_t category_index(const std::string& category) const {
        auto it = std::find(category_set_.begin(), category_set_.end(), category);
        return it == category_set_.end() ? category_set_.size() : static_cast<std::size_t>(it - category_set_.begin());
    }

    const std::vector<std::string>& category_set() const { return category_set_; }
    const std::unordered_map<std::string, std::string>& entries() const { return entries_; }

private:
    std::unordered_map<std::string, std::string> entries_;
    std::vector<std::string> category_set_;
};

struct StudentRecord {
    std::string student_id;
    double cgpa = 0.0;  // grade points, [0, 4]
};

struct Cohort {
    std::vector<StudentRecord> students;
    std::map<std::string, EventLog> logs;
    CategoryMap categories;
    std::vector<std::string> skipped;  // students with CGPA but no event log

    std::vector<const StudentRecord*> analyzable() const {
        std::vector<const StudentRecord*> out;
        for (const auto& s : students)
            if (logs.count(s.student_id)) out.push_back(&s);
        return out;
    }
};

}  // namespace appusage
