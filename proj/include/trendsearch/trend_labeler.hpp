#pragma once

// Turns raw univariate series into labeled trend events: normalise to chart
// space, linearise at several resolutions, label segments and segment pairs
// with the fitted density models, add superlative windows, score saliency and
// keep the best-scoring fraction of each label kind.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "trendsearch/date.hpp"
#include "trendsearch/error.hpp"
#include "trendsearch/label_models.hpp"
#include "trendsearch/rdp.hpp"
#include "trendsearch/series.hpp"

namespace trendsearch {

inline const std::vector<double>& default_epsilons() {
    static const std::vector<double> eps{0.03, 0.1, 0.2};
    return eps;
}

inline constexpr double kDefaultKeepFraction = 0.75;
inline constexpr int kDefaultSuperlativeWindow = 15;  // days each side

struct LinearSegment {
    std::size_t start_idx = 0;
    std::size_t end_idx = 0;
    Date start_date;
    Date end_date;
    double perceived_angle = 0.0;
    double epsilon_level = 0.0;
};

inline double rad_to_deg(double r) { return r * 180.0 / std::numbers::pi; }

inline double segment_angle(std::size_t start_idx, std::size_t end_idx,
                            const NormalizedSeries& norm) {
    const double dx = norm.xs[end_idx] - norm.xs[start_idx];
    const double dy = norm.ys[end_idx] - norm.ys[start_idx];
    return rad_to_deg(std::atan2(dy, dx));
}

inline double segment_angle(const LinearSegment& seg, const NormalizedSeries& norm) {
    return segment_angle(seg.start_idx, seg.end_idx, norm);
}

inline std::vector<LinearSegment> linearize(const NormalizedSeries& norm, double epsilon) {
    if (!(epsilon > 0.0))
        throw InputError("linearization epsilon must be positive");
    const auto keep = rdp_keep(norm.xs, norm.ys, epsilon);
    std::vector<LinearSegment> out;
    out.reserve(keep.size());
    for (std::size_t k = 1; k < keep.size(); ++k) {
        LinearSegment seg;
        seg.start_idx = keep[k - 1];
        seg.end_idx = keep[k];
        seg.start_date = norm.dates[seg.start_idx];
        seg.end_date = norm.dates[seg.end_idx];
        seg.perceived_angle = segment_angle(seg, norm);
        seg.epsilon_level = epsilon;
        out.push_back(seg);
    }
    return out;
}

struct ShapeParams {
    double interior_angle = 0.0;  // [0, 180]
    double rotation = 0.0;        // [0, 360), 0 = apex pointing up
};

// Shape of two adjacent segments in chart space. Rotation is the direction the
// apex points, clockwise from straight up: a symmetric peak is 0, a valley 180.
// A straight continuation has no apex; it points along the left-hand normal of
// the line, i.e. up for a flat line.
inline ShapeParams shape_params(const LinearSegment& a, const LinearSegment& b,
                                const NormalizedSeries& norm) {
    if (a.end_idx != b.start_idx)
        throw InputError("shape needs adjacent segments sharing a vertex");
    const std::size_t v = a.end_idx;
    double ax = norm.xs[a.start_idx] - norm.xs[v];
    double ay = norm.ys[a.start_idx] - norm.ys[v];
    double bx = norm.xs[b.end_idx] - norm.xs[v];
    double by = norm.ys[b.end_idx] - norm.ys[v];
    const double la = std::hypot(ax, ay);
    const double lb = std::hypot(bx, by);
    ax /= la;
    ay /= la;
    bx /= lb;
    by /= lb;

    ShapeParams p;
    p.interior_angle = rad_to_deg(std::acos(std::clamp(ax * bx + ay * by, -1.0, 1.0)));
    double px = -(ax + bx);
    double py = -(ay + by);
    if (std::hypot(px, py) < 1e-12) {
        px = -by;
        py = bx;
    }
    double rot = rad_to_deg(std::atan2(px, py));
    if (rot < 0.0)
        rot += 360.0;
    if (rot >= 360.0)
        rot -= 360.0;
    p.rotation = rot;
    return p;
}

// ---------------------------------------------------------------------------
// Events

enum class EventKind { Slope, Compound, Shape, Superlative };

inline std::string_view to_string(EventKind k) {
    switch (k) {
        case EventKind::Slope: return "slope";
        case EventKind::Compound: return "compound";
        case EventKind::Shape: return "shape";
        case EventKind::Superlative: return "superlative";
    }
    return "slope";
}

inline EventKind event_kind_from_string(std::string_view s) {
    if (s == "slope") return EventKind::Slope;
    if (s == "compound") return EventKind::Compound;
    if (s == "shape") return EventKind::Shape;
    if (s == "superlative") return EventKind::Superlative;
    throw InputError("unknown event kind '" + std::string(s) + "'");
}

// A labeled stretch of one chart; the searchable document. The x_/y_ fields
// are saliency operands in data units (x in days since 1970-01-01).
struct LabeledEvent {
    std::string chart_id;
    Date start_date;
    Date end_date;
    std::string label;
    EventKind kind = EventKind::Slope;
    double density = 0.0;
    double saliency = 0.0;
    double epsilon_level = 0.0;  // 0 for superlatives
    double x_event_start = 0.0;
    double x_event_end = 0.0;
    double y_event_start = 0.0;
    double y_event_end = 0.0;
    double y_event_min = 0.0;
    double y_event_max = 0.0;
    double angle = 0.0;     // perceived slope, or interior angle for shapes
    double rotation = 0.0;  // shapes only

    bool operator==(const LabeledEvent&) const = default;
};

struct ChartExtents {
    double x_chart_min = 0.0;
    double x_chart_max = 0.0;
    double y_chart_min = 0.0;
    double y_chart_max = 0.0;
};

inline ChartExtents chart_extents(const TimeSeries& series) {
    series.validate();
    ChartExtents e;
    e.x_chart_min = static_cast<double>(series.points.front().date.days());
    e.x_chart_max = static_cast<double>(series.points.back().date.days());
    e.y_chart_min = e.y_chart_max = series.points.front().value;
    for (const auto& p : series.points) {
        e.y_chart_min = std::min(e.y_chart_min, p.value);
        e.y_chart_max = std::max(e.y_chart_max, p.value);
    }
    return e;
}

// L2 norm of the event's fractional x-span and y-span. Slope-like events use
// the start/end value change, shapes and superlatives the value range inside
// the event. A zero chart extent zeroes that component.
inline double saliency(const LabeledEvent& ev, const ChartExtents& ext) {
    const double xr = ext.x_chart_max - ext.x_chart_min;
    const double yr = ext.y_chart_max - ext.y_chart_min;
    const double dx = xr > 0.0 ? (ev.x_event_end - ev.x_event_start) / xr : 0.0;
    const bool ranged = ev.kind == EventKind::Shape || ev.kind == EventKind::Superlative;
    const double dy_span =
        ranged ? ev.y_event_max - ev.y_event_min : std::abs(ev.y_event_end - ev.y_event_start);
    const double dy = yr > 0.0 ? dy_span / yr : 0.0;
    return std::sqrt(dx * dx + dy * dy);
}

namespace detail {

inline void fill_operands(LabeledEvent& ev, const TimeSeries& s, std::size_t first,
                          std::size_t last) {
    const auto& pts = s.points;
    ev.start_date = pts[first].date;
    ev.end_date = pts[last].date;
    ev.x_event_start = static_cast<double>(pts[first].date.days());
    ev.x_event_end = static_cast<double>(pts[last].date.days());
    ev.y_event_start = pts[first].value;
    ev.y_event_end = pts[last].value;
    ev.y_event_min = ev.y_event_max = pts[first].value;
    for (std::size_t i = first; i <= last; ++i) {
        ev.y_event_min = std::min(ev.y_event_min, pts[i].value);
        ev.y_event_max = std::max(ev.y_event_max, pts[i].value);
    }
}

inline auto event_order_key(const LabeledEvent& e) {
    return std::make_tuple(std::string_view(e.chart_id), static_cast<int>(e.kind),
                           e.epsilon_level, e.start_date, e.end_date, std::string_view(e.label));
}

}  // namespace detail

inline void sort_events(std::vector<LabeledEvent>& events) {
    std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
        return detail::event_order_key(a) < detail::event_order_key(b);
    });
}

// Global maximum and minimum windows; ties on the extreme go to the earliest
// date, windows are clamped to the series range.
inline std::vector<LabeledEvent> superlative_events(const TimeSeries& series,
                                                    int window_days = kDefaultSuperlativeWindow) {
    series.validate();
    const auto& pts = series.points;
    const auto ext = chart_extents(series);
    std::size_t imax = 0, imin = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (pts[i].value > pts[imax].value)
            imax = i;
        if (pts[i].value < pts[imin].value)
            imin = i;
    }
    std::vector<LabeledEvent> out;
    for (auto [idx, label] : {std::pair{imax, "maximum"}, std::pair{imin, "minimum"}}) {
        const Date lo = std::max(pts.front().date, pts[idx].date - window_days);
        const Date hi = std::min(pts.back().date, pts[idx].date + window_days);
        LabeledEvent ev;
        ev.chart_id = series.chart_id;
        ev.label = label;
        ev.kind = EventKind::Superlative;
        ev.start_date = lo;
        ev.end_date = hi;
        ev.x_event_start = static_cast<double>(lo.days());
        ev.x_event_end = static_cast<double>(hi.days());
        bool first = true;
        for (const auto& p : pts) {
            if (p.date < lo || p.date > hi)
                continue;
            if (first) {
                ev.y_event_start = ev.y_event_min = ev.y_event_max = p.value;
                first = false;
            }
            ev.y_event_end = p.value;
            ev.y_event_min = std::min(ev.y_event_min, p.value);
            ev.y_event_max = std::max(ev.y_event_max, p.value);
        }
        ev.saliency = saliency(ev, ext);
        out.push_back(std::move(ev));
    }
    return out;
}

struct LabelerParams {
    double aspect = kDefaultAspect;
    std::vector<double> epsilons = default_epsilons();
    double keep = kDefaultKeepFraction;
    int superlative_window = kDefaultSuperlativeWindow;
};

// Every candidate event of one chart, before pruning: per epsilon level one
// slope and one compound event per segment and one shape event per adjacent
// segment pair. Kinds whose model set is empty are skipped.
inline std::vector<LabeledEvent> label_segments(const TimeSeries& series,
                                                const LabelModels& models,
                                                const LabelerParams& params = {}) {
    const auto norm = normalize(series, params.aspect);
    const auto ext = chart_extents(series);
    std::vector<LabeledEvent> out;
    for (double eps : params.epsilons) {
        const auto segs = linearize(norm, eps);
        for (const auto& seg : segs) {
            for (auto [kind, map] : {std::pair{EventKind::Slope, &models.slope},
                                     std::pair{EventKind::Compound, &models.compound}}) {
                if (map->empty())
                    continue;
                const auto best = argmax_label(*map, seg.perceived_angle);
                LabeledEvent ev;
                ev.chart_id = series.chart_id;
                ev.label = best.label;
                ev.kind = kind;
                ev.density = best.density;
                ev.epsilon_level = eps;
                ev.angle = seg.perceived_angle;
                detail::fill_operands(ev, series, seg.start_idx, seg.end_idx);
                ev.saliency = saliency(ev, ext);
                out.push_back(std::move(ev));
            }
        }
        if (models.shape.empty())
            continue;
        for (std::size_t k = 1; k < segs.size(); ++k) {
            const auto sp = shape_params(segs[k - 1], segs[k], norm);
            const auto best = argmax_shape_label(models.shape, sp.interior_angle, sp.rotation);
            LabeledEvent ev;
            ev.chart_id = series.chart_id;
            ev.label = best.label;
            ev.kind = EventKind::Shape;
            ev.density = best.density;
            ev.epsilon_level = eps;
            ev.angle = sp.interior_angle;
            ev.rotation = sp.rotation;
            detail::fill_operands(ev, series, segs[k - 1].start_idx, segs[k].end_idx);
            ev.saliency = saliency(ev, ext);
            out.push_back(std::move(ev));
        }
    }
    return out;
}

inline std::size_t retained_count(std::size_t n, double keep) {
    return static_cast<std::size_t>(std::ceil(keep * static_cast<double>(n) - 1e-9));
}

// Keeps the top ceil(keep * n) events by density within each (kind, epsilon
// level) group. Superlatives are never pruned.
inline std::vector<LabeledEvent> prune_by_density(std::vector<LabeledEvent> events, double keep) {
    if (!(keep > 0.0 && keep <= 1.0))
        throw InputError("keep fraction must be in (0, 1]");
    std::map<std::pair<int, double>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < events.size(); ++i)
        groups[{static_cast<int>(events[i].kind), events[i].epsilon_level}].push_back(i);

    std::vector<bool> keep_mask(events.size(), false);
    for (auto& [key, idx] : groups) {
        if (key.first == static_cast<int>(EventKind::Superlative)) {
            for (auto i : idx)
                keep_mask[i] = true;
            continue;
        }
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return events[a].density > events[b].density;
        });
        const auto n = retained_count(idx.size(), keep);
        for (std::size_t k = 0; k < n; ++k)
            keep_mask[idx[k]] = true;
    }
    std::vector<LabeledEvent> out;
    out.reserve(events.size());
    for (std::size_t i = 0; i < events.size(); ++i)
        if (keep_mask[i])
            out.push_back(std::move(events[i]));
    return out;
}

// Labels a whole corpus: candidates for every chart, pruning across the corpus,
// then the superlative windows. Output order is (chart, kind, level, start).
inline std::vector<LabeledEvent> label_charts(std::span<const TimeSeries> charts,
                                              const LabelModels& models,
                                              const LabelerParams& params = {}) {
    std::vector<LabeledEvent> all;
    for (const auto& s : charts) {
        auto evs = label_segments(s, models, params);
        all.insert(all.end(), std::make_move_iterator(evs.begin()),
                   std::make_move_iterator(evs.end()));
    }
    // sort first so density ties break the same way whatever the input order
    sort_events(all);
    auto out = prune_by_density(std::move(all), params.keep);
    for (const auto& s : charts) {
        auto sup = superlative_events(s, params.superlative_window);
        out.insert(out.end(), sup.begin(), sup.end());
    }
    sort_events(out);
    return out;
}

inline std::vector<LabeledEvent> label_chart(const TimeSeries& series, const LabelModels& models,
                                             const LabelerParams& params = {}) {
    return label_charts(std::span(&series, 1), models, params);
}

}  // namespace trendsearch
