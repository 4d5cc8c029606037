#pragma once

#include <array>
#include <charconv>
#include <chrono>
#include <compare>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace trendsearch {

// Calendar date as a day count since 1970-01-01. Arithmetic is in calendar
// days; there is no trading-calendar awareness anywhere in the library.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::sys_days d) : days_(d.time_since_epoch().count()) {}

    static constexpr Date from_days(long days) {
        Date d;
        d.days_ = days;
        return d;
    }

    static Date from_ymd(int y, unsigned m, unsigned d) {
        const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                              std::chrono::day{d}};
        if (!ymd.ok())
            throw std::invalid_argument("invalid calendar date " + std::to_string(y) + "-" +
                                        std::to_string(m) + "-" + std::to_string(d));
        return Date(std::chrono::sys_days{ymd});
    }

    // Strict YYYY-MM-DD.
    static std::optional<Date> try_parse(std::string_view s) {
        if (s.size() != 10 || s[4] != '-' || s[7] != '-')
            return std::nullopt;
        int y = 0;
        unsigned m = 0, d = 0;
        auto num = [&](std::string_view part, auto& out) {
            auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
            return ec == std::errc{} && p == part.data() + part.size();
        };
        if (!num(s.substr(0, 4), y) || !num(s.substr(5, 2), m) || !num(s.substr(8, 2), d))
            return std::nullopt;
        const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                              std::chrono::day{d}};
        if (!ymd.ok())
            return std::nullopt;
        return Date(std::chrono::sys_days{ymd});
    }

    static Date parse(std::string_view s) {
        if (auto d = try_parse(s))
            return *d;
        throw std::invalid_argument("not an ISO-8601 date: '" + std::string(s) + "'");
    }

    constexpr long days() const { return days_; }

    std::chrono::year_month_day ymd() const {
        return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{days_}}};
    }

    int year() const { return static_cast<int>(ymd().year()); }
    unsigned month() const { return static_cast<unsigned>(ymd().month()); }
    unsigned day() const { return static_cast<unsigned>(ymd().day()); }

    std::string iso() const {
        const auto v = ymd();
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(v.year()),
                      static_cast<unsigned>(v.month()), static_cast<unsigned>(v.day()));
        return buf;
    }

    // "March 13, 2014"
    std::string pretty() const;

    constexpr Date operator+(long n) const { return from_days(days_ + n); }
    constexpr Date operator-(long n) const { return from_days(days_ - n); }
    constexpr long operator-(Date o) const { return days_ - o.days_; }

    constexpr auto operator<=>(const Date&) const = default;

private:
    long days_ = 0;
};

inline constexpr std::array<std::string_view, 12> kMonthNames = {
    "january", "february", "march",     "april",   "may",      "june",
    "july",    "august",   "september", "october", "november", "december"};

inline std::string Date::pretty() const {
    std::string name(kMonthNames[month() - 1]);
    name[0] = static_cast<char>(name[0] - 'a' + 'A');
    return name + " " + std::to_string(day()) + ", " + std::to_string(year());
}

// 1-based month for a full or three-letter English month name; 0 otherwise.
inline unsigned month_from_name(std::string_view word) {
    for (std::size_t i = 0; i < kMonthNames.size(); ++i) {
        const auto full = kMonthNames[i];
        if (word == full || (word.size() == 3 && full.substr(0, 3) == word) ||
            (word == "sept" && i == 8))
            return static_cast<unsigned>(i + 1);
    }
    return 0;
}

}  // namespace trendsearch
