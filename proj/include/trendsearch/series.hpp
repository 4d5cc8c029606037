#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "trendsearch/date.hpp"
#include "trendsearch/error.hpp"

namespace trendsearch {

inline constexpr double kDefaultAspect = 3.0;

struct SeriesPoint {
    Date date;
    double value = 0.0;

    bool operator==(const SeriesPoint&) const = default;
};

struct TimeSeries {
    std::string chart_id;
    std::vector<SeriesPoint> points;

    void validate() const {
        if (points.size() < 2)
            throw InputError("series '" + chart_id + "' needs at least 2 points");
        for (std::size_t i = 1; i < points.size(); ++i)
            if (!(points[i - 1].date < points[i].date))
                throw InputError("series '" + chart_id + "' has non-increasing date at " +
                                 points[i].date.iso());
    }
};

// Chart-space coordinates: x spans [0, aspect], y spans [0, 1]. Index i in
// xs/ys/dates is index i of the source series.
struct NormalizedSeries {
    double aspect = kDefaultAspect;
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<Date> dates;

    std::size_t size() const { return xs.size(); }
};

inline NormalizedSeries normalize(const TimeSeries& series, double aspect = kDefaultAspect) {
    series.validate();
    if (!(aspect > 0.0))
        throw InputError("aspect ratio must be positive");
    const auto& pts = series.points;
    const double t0 = static_cast<double>(pts.front().date.days());
    const double span = static_cast<double>(pts.back().date.days()) - t0;
    const auto [lo, hi] = std::minmax_element(pts.begin(), pts.end(),
                                              [](auto& a, auto& b) { return a.value < b.value; });
    const double vmin = lo->value;
    const double vrange = hi->value - vmin;

    NormalizedSeries out;
    out.aspect = aspect;
    out.xs.reserve(pts.size());
    out.ys.reserve(pts.size());
    out.dates.reserve(pts.size());
    for (const auto& p : pts) {
        out.xs.push_back(aspect * (static_cast<double>(p.date.days()) - t0) / span);
        out.ys.push_back(vrange > 0.0 ? (p.value - vmin) / vrange : 0.0);
        out.dates.push_back(p.date);
    }
    // exact endpoints regardless of rounding
    out.xs.front() = 0.0;
    out.xs.back() = aspect;
    return out;
}

}  // namespace trendsearch
