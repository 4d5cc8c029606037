#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "test_support.hpp"

using namespace trendsearch;
using ts_test::fixture_corpus;
using ts_test::fixture_models;

namespace {

TimeSeries daily(const std::string& id, Date start, const std::vector<double>& values) {
    TimeSeries s{id, {}};
    for (std::size_t i = 0; i < values.size(); ++i)
        s.points.push_back({start + static_cast<long>(i), values[i]});
    return s;
}

NormalizedSeries manual(std::vector<double> xs, std::vector<double> ys) {
    NormalizedSeries n;
    n.xs = std::move(xs);
    n.ys = std::move(ys);
    for (std::size_t i = 0; i < n.xs.size(); ++i)
        n.dates.push_back(Date::from_ymd(2020, 1, 1) + static_cast<long>(i));
    return n;
}

LabeledEvent slope_event(double xs, double xe, double ys, double ye) {
    LabeledEvent e;
    e.kind = EventKind::Slope;
    e.x_event_start = xs;
    e.x_event_end = xe;
    e.y_event_start = ys;
    e.y_event_end = ye;
    e.y_event_min = std::min(ys, ye);
    e.y_event_max = std::max(ys, ye);
    return e;
}

}  // namespace

TEST(Normalize, MidpointMapsToHalfAspect) {
    const auto n = normalize(daily("x", Date::from_ymd(2020, 1, 1), {1, 2, 3, 4, 5}), 3.0);
    EXPECT_DOUBLE_EQ(n.xs[2], 1.5);
    EXPECT_DOUBLE_EQ(n.xs.front(), 0.0);
    EXPECT_DOUBLE_EQ(n.xs.back(), 3.0);
    EXPECT_DOUBLE_EQ(n.ys.front(), 0.0);
    EXPECT_DOUBLE_EQ(n.ys.back(), 1.0);
}

TEST(Normalize, ConstantSeriesMapsToZero) {
    const auto n = normalize(daily("x", Date::from_ymd(2020, 1, 1), {7, 7, 7}));
    for (double y : n.ys)
        EXPECT_EQ(y, 0.0);
}

TEST(Normalize, FullRangeSpansAspect) {
    const auto n = normalize(daily("x", Date::from_ymd(2020, 1, 1), {3, 1, 4, 1, 5, 9}));
    const auto segs = linearize(n, 10.0);
    ASSERT_EQ(segs.size(), 1u);
    EXPECT_DOUBLE_EQ(n.xs[segs[0].end_idx] - n.xs[segs[0].start_idx], 3.0);
}

TEST(Normalize, RejectsBadSeries) {
    EXPECT_THROW(normalize(daily("x", Date::from_ymd(2020, 1, 1), {1})), InputError);
    TimeSeries dup{"x", {{Date::from_ymd(2020, 1, 1), 1}, {Date::from_ymd(2020, 1, 1), 2}}};
    EXPECT_THROW(normalize(dup), InputError);
    TimeSeries back{"x", {{Date::from_ymd(2020, 1, 2), 1}, {Date::from_ymd(2020, 1, 1), 2}}};
    EXPECT_THROW(normalize(back), InputError);
    EXPECT_THROW(normalize(daily("x", Date::from_ymd(2020, 1, 1), {1, 2}), 0.0), InputError);
}

TEST(Linearize, CollinearPointsGiveOneSegment) {
    const auto n = manual({0, 1, 2}, {0, 0.25, 0.5});
    for (double eps : {1e-9, 0.03, 0.2})
        EXPECT_EQ(linearize(n, eps).size(), 1u);
}

TEST(Linearize, VShapeSplitsOnlyBelowApexDeviation) {
    const auto n = manual({0, 1.5, 3}, {0, 0.15, 0});
    EXPECT_EQ(linearize(n, 0.2).size(), 1u);
    EXPECT_EQ(linearize(n, 0.1).size(), 2u);
}

TEST(Linearize, DefaultEpsilons) {
    EXPECT_EQ(default_epsilons(), (std::vector<double>{0.03, 0.1, 0.2}));
}

TEST(Linearize, RejectsNonPositiveEpsilon) {
    EXPECT_THROW(linearize(manual({0, 1}, {0, 1}), 0.0), InputError);
}

TEST(Linearize, SegmentsAreContiguous) {
    for (const auto& [id, s] : fixture_corpus()) {
        const auto n = normalize(s);
        const auto segs = linearize(n, 0.03);
        EXPECT_EQ(segs.front().start_idx, 0u);
        EXPECT_EQ(segs.back().end_idx, n.size() - 1);
        for (std::size_t k = 1; k < segs.size(); ++k)
            EXPECT_EQ(segs[k - 1].end_idx, segs[k].start_idx);
    }
}

TEST(Linearize, BruteForceErrorWithinEpsilon) {
    for (const auto& [id, s] : fixture_corpus()) {
        const auto n = normalize(s);
        for (double eps : default_epsilons()) {
            double worst = 0.0;
            for (const auto& seg : linearize(n, eps))
                for (auto i = seg.start_idx + 1; i < seg.end_idx; ++i)
                    worst = std::max(worst, ts_oracle::line_distance(n.xs[seg.start_idx], n.ys[seg.start_idx],
                                                          n.xs[seg.end_idx], n.ys[seg.end_idx],
                                                          n.xs[i], n.ys[i]));
            EXPECT_LE(worst, eps) << id << " eps " << eps;
        }
    }
}

TEST(SegmentAngle, HalfByHalfIs45) {
    const auto n = manual({0, 0.5}, {0, 0.5});
    EXPECT_NEAR(segment_angle(0, 1, n), 45.0, 1e-12);
}

TEST(SegmentAngle, FullWidthUnitRise) {
    const auto n = normalize(daily("x", Date::from_ymd(2020, 1, 1), {0, 1, 2, 3, 4}));
    const auto segs = linearize(n, 0.03);
    ASSERT_EQ(segs.size(), 1u);
    EXPECT_NEAR(segs[0].perceived_angle, std::atan(1.0 / 3.0) * 180.0 / M_PI, 1e-12);
    EXPECT_NEAR(segs[0].perceived_angle, 18.43, 0.01);
}

TEST(SegmentAngle, FlatIsZero) {
    EXPECT_EQ(segment_angle(0, 1, manual({0, 1}, {0.3, 0.3})), 0.0);
}

TEST(SegmentAngle, BoundedAndMonotonic) {
    double prev = -90.0;
    for (double dy = -1.0; dy <= 1.0; dy += 0.01) {
        const double a = segment_angle(0, 1, manual({0, 0.01}, {0.0, dy}));
        EXPECT_GT(a, -90.0);
        EXPECT_LT(a, 90.0);
        EXPECT_GT(a, prev);
        prev = a;
    }
}

TEST(ShapeParams, SymmetricPeak) {
    const auto n = manual({0, 0.5, 1.0}, {0, 0.5, 0});
    const auto segs = linearize(n, 0.01);
    ASSERT_EQ(segs.size(), 2u);
    const auto p = shape_params(segs[0], segs[1], n);
    EXPECT_NEAR(p.interior_angle, 90.0, 1e-9);
    EXPECT_NEAR(p.rotation, 0.0, 1e-9);
}

TEST(ShapeParams, SymmetricValley) {
    const auto n = manual({0, 0.5, 1.0}, {0.5, 0, 0.5});
    const auto segs = linearize(n, 0.01);
    const auto p = shape_params(segs[0], segs[1], n);
    EXPECT_NEAR(p.interior_angle, 90.0, 1e-9);
    EXPECT_NEAR(p.rotation, 180.0, 1e-9);
}

TEST(ShapeParams, StraightContinuation) {
    const auto n = manual({0, 1, 2}, {0, 0.2, 0.4});
    LinearSegment a{0, 1, n.dates[0], n.dates[1], 0, 0.03};
    LinearSegment b{1, 2, n.dates[1], n.dates[2], 0, 0.03};
    EXPECT_NEAR(shape_params(a, b, n).interior_angle, 180.0, 1e-6);
}

TEST(ShapeParams, RotationIsClockwiseFromUp) {
    // rise then flat: the apex points up-left of vertical
    const auto n = manual({0, 1, 2}, {0, 1, 1});
    LinearSegment a{0, 1, n.dates[0], n.dates[1], 0, 0.03};
    LinearSegment b{1, 2, n.dates[1], n.dates[2], 0, 0.03};
    const auto p = shape_params(a, b, n);
    EXPECT_NEAR(p.interior_angle, 135.0, 1e-9);
    EXPECT_NEAR(p.rotation, 337.5, 1e-9);
}

TEST(ShapeParams, NonAdjacentIsAnError) {
    const auto n = manual({0, 1, 2, 3}, {0, 1, 0, 1});
    LinearSegment a{0, 1, n.dates[0], n.dates[1], 0, 0.03};
    LinearSegment b{2, 3, n.dates[2], n.dates[3], 0, 0.03};
    EXPECT_THROW(shape_params(a, b, n), InputError);
}

TEST(Superlatives, WindowAroundMaximum) {
    std::vector<double> v(400, 1.0);
    const Date start = Date::from_ymd(2015, 1, 1);
    const long peak = Date::from_ymd(2015, 7, 26) - start;
    v[static_cast<std::size_t>(peak)] = 10.0;
    v[300] = -5.0;
    const auto evs = superlative_events(daily("x", start, v));
    ASSERT_EQ(evs.size(), 2u);
    EXPECT_EQ(evs[0].label, "maximum");
    EXPECT_EQ(evs[0].start_date, Date::from_ymd(2015, 7, 11));
    EXPECT_EQ(evs[0].end_date, Date::from_ymd(2015, 8, 10));
    EXPECT_EQ(evs[1].label, "minimum");
    EXPECT_EQ(evs[1].start_date, start + 285L);
}

TEST(Superlatives, ClampedAtSeriesStart) {
    const auto evs = superlative_events(daily("x", Date::from_ymd(2015, 1, 1), {9, 5, 4, 3, 2, 1}));
    EXPECT_EQ(evs[0].start_date, Date::from_ymd(2015, 1, 1));
    EXPECT_EQ(evs[1].end_date, Date::from_ymd(2015, 1, 6));
}

TEST(Superlatives, ConstantSeriesTiesToFirstDate) {
    const Date start = Date::from_ymd(2015, 3, 1);
    const auto evs = superlative_events(daily("x", start, std::vector<double>(60, 2.0)));
    EXPECT_EQ(evs[0].start_date, start);
    EXPECT_EQ(evs[0].end_date, start + 15L);
    EXPECT_EQ(evs[1].start_date, start);
    EXPECT_EQ(evs[1].end_date, start + 15L);
}

TEST(Saliency, FullChartIsSqrtTwo) {
    const ChartExtents ext{0, 100, 5, 15};
    EXPECT_NEAR(saliency(slope_event(0, 100, 5, 15), ext), std::sqrt(2.0), 1e-12);
}

TEST(Saliency, HalfOfEachAxis) {
    const ChartExtents ext{0, 100, 0, 10};
    EXPECT_NEAR(saliency(slope_event(20, 70, 2, 7), ext), std::sqrt(0.5), 1e-12);
}

TEST(Saliency, ZeroExtentsZeroTheirComponent) {
    const ChartExtents flat{0, 100, 3, 3};
    EXPECT_NEAR(saliency(slope_event(0, 50, 3, 3), flat), 0.5, 1e-12);
    const ChartExtents point{10, 10, 3, 3};
    EXPECT_EQ(saliency(slope_event(10, 10, 3, 3), point), 0.0);
}

TEST(Saliency, RangedKindsUseMinMax) {
    const ChartExtents ext{0, 100, 0, 10};
    auto e = slope_event(0, 0, 2, 2);
    e.y_event_min = 0;
    e.y_event_max = 10;
    EXPECT_EQ(saliency(e, ext), 0.0);
    e.kind = EventKind::Shape;
    EXPECT_NEAR(saliency(e, ext), 1.0, 1e-12);
    e.kind = EventKind::Superlative;
    EXPECT_NEAR(saliency(e, ext), 1.0, 1e-12);
}

TEST(Saliency, MonotoneInEachComponent) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const ChartExtents ext{0, 1000, -50, 50};
    for (int i = 0; i < 10000; ++i) {
        const double x0 = u(rng) * 500, dx = u(rng) * 500, y0 = -50 + u(rng) * 50, dy = u(rng) * 50;
        const double s = saliency(slope_event(x0, x0 + dx, y0, y0 + dy), ext);
        const double grow_x = saliency(slope_event(x0, x0 + dx + u(rng) * 10, y0, y0 + dy), ext);
        const double grow_y = saliency(slope_event(x0, x0 + dx, y0, y0 + dy + u(rng) * 10), ext);
        ASSERT_GE(grow_x, s);
        ASSERT_GE(grow_y, s);
        ASSERT_GE(s, 0.0);
        ASSERT_LE(s, std::sqrt(2.0) + 1e-12);
        ASSERT_EQ(s == 0.0, dx == 0.0 && dy == 0.0);
    }
}

TEST(Saliency, LongerTallerEventScoresHigher) {
    const ChartExtents ext{0, 1000, 0, 100};
    EXPECT_GT(saliency(slope_event(500, 800, 10, 80), ext), saliency(slope_event(100, 150, 40, 50), ext));
}

TEST(Pruning, CeilOfKeepFraction) {
    EXPECT_EQ(retained_count(8, 0.75), 6u);
    EXPECT_EQ(retained_count(9, 0.75), 7u);
    EXPECT_EQ(retained_count(4, 0.75), 3u);
    EXPECT_EQ(retained_count(1, 0.75), 1u);
    EXPECT_EQ(retained_count(0, 0.75), 0u);
}

TEST(Pruning, KeepsDensestPerKindAndLevel) {
    std::vector<LabeledEvent> evs;
    for (int i = 0; i < 8; ++i) {
        LabeledEvent e;
        e.kind = EventKind::Slope;
        e.epsilon_level = 0.1;
        e.density = i;
        evs.push_back(e);
        e.kind = EventKind::Compound;
        evs.push_back(e);
    }
    const auto kept = prune_by_density(evs, 0.75);
    ASSERT_EQ(kept.size(), 12u);
    for (const auto& e : kept)
        EXPECT_GE(e.density, 2.0);
    EXPECT_THROW(prune_by_density(evs, 0.0), InputError);
}

TEST(LabelChart, SingleSegmentChart) {
    const auto evs = label_chart(daily("x", Date::from_ymd(2020, 1, 1), {1, 2}), fixture_models(),
                                 {kDefaultAspect, {0.1}, 1.0, 15});
    std::map<EventKind, int> n;
    for (const auto& e : evs)
        ++n[e.kind];
    EXPECT_EQ(n[EventKind::Slope], 1);
    EXPECT_EQ(n[EventKind::Compound], 1);
    EXPECT_EQ(n[EventKind::Shape], 0);
    EXPECT_EQ(n[EventKind::Superlative], 2);
}

TEST(LabelChart, CorpusPruningCountsPerKindAndLevel) {
    const auto& m = fixture_models();
    std::vector<TimeSeries> charts;
    for (const auto& [id, s] : fixture_corpus())
        charts.push_back(s);
    std::map<std::pair<int, double>, std::size_t> before;
    for (const auto& s : charts)
        for (const auto& e : label_segments(s, m))
            ++before[{static_cast<int>(e.kind), e.epsilon_level}];
    std::map<std::pair<int, double>, std::size_t> after;
    const auto evs = label_charts(charts, m);
    for (const auto& e : evs)
        ++after[{static_cast<int>(e.kind), e.epsilon_level}];
    for (const auto& [k, n] : before)
        EXPECT_EQ(after[k], retained_count(n, 0.75));
    const std::pair<int, double> sup{static_cast<int>(EventKind::Superlative), 0.0};
    EXPECT_EQ(after[sup], 2 * charts.size());
}

TEST(LabelChart, EventInvariants) {
    std::vector<TimeSeries> charts;
    for (const auto& [id, s] : fixture_corpus())
        charts.push_back(s);
    const auto evs = label_charts(charts, fixture_models());
    for (std::size_t i = 0; i < evs.size(); ++i) {
        const auto& e = evs[i];
        EXPECT_LT(e.start_date, e.end_date);
        EXPECT_GE(e.saliency, 0.0);
        EXPECT_LE(e.saliency, std::sqrt(2.0) + 1e-12);
        if (e.kind == EventKind::Slope || e.kind == EventKind::Compound) {
            EXPECT_GT(e.angle, -90.0);
            EXPECT_LT(e.angle, 90.0);
        }
        if (i) {
            const auto& p = evs[i - 1];
            EXPECT_LE(std::tie(p.chart_id, p.kind, p.epsilon_level, p.start_date),
                      std::tie(e.chart_id, e.kind, e.epsilon_level, e.start_date));
        }
    }
}

TEST(LabelChart, InvariantUnderValueAffineRescaling) {
    const auto& m = fixture_models();
    for (const auto& [id, s] : fixture_corpus()) {
        TimeSeries t = s;
        for (auto& p : t.points)
            p.value = 2.5 * p.value + 7.0;
        const auto a = label_segments(s, m);
        const auto b = label_segments(t, m);
        ASSERT_EQ(a.size(), b.size()) << id;
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_EQ(a[i].label, b[i].label) << id << " #" << i;
            EXPECT_EQ(a[i].start_date, b[i].start_date);
        }
    }
}

TEST(LabelChart, InputOrderDoesNotMatter) {
    std::vector<TimeSeries> charts;
    for (const auto& [id, s] : fixture_corpus())
        charts.push_back(s);
    const auto a = label_charts(charts, fixture_models());
    std::reverse(charts.begin(), charts.end());
    EXPECT_EQ(a, label_charts(charts, fixture_models()));
}
