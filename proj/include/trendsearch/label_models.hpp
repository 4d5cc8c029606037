#pragma once

// Gaussian kernel density models that turn angles and two-segment shapes into
// trend labels, plus the modifier-ratio analysis and per-label statistics.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trendsearch/error.hpp"
#include "trendsearch/text.hpp"

namespace trendsearch {

inline constexpr double kDefaultSlopeBandwidth = 5.0;    // degrees
inline constexpr double kDefaultScalarBandwidth = 0.1;   // dimensionless ratio
inline constexpr double kDefaultShapeBandwidth = 15.0;   // degrees

// One crowdsourced slope annotation. Rows without a modifier come from the
// single-word experiment; rows with one carry the participant's anchor angle.
struct LabelSample {
    std::string label;
    std::string modifier;
    double angle = 0.0;
    std::string participant;
    std::optional<double> anchor_angle;

    bool is_compound() const { return !modifier.empty(); }
    // Key under which the sample is modelled: "sharply collapsing".
    std::string model_key() const { return is_compound() ? modifier + " " + label : label; }
};

struct ShapeSample {
    std::string label;
    double shape_angle = 0.0;  // interior angle, [0, 180]
    double rotation = 0.0;     // [0, 360)
    std::string participant;
};

inline double gaussian_kernel(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

// Per-label 1D Gaussian KDE, normalised over its own samples.
class Kde1D {
public:
    Kde1D(std::string label, std::vector<double> points, double bandwidth = kDefaultSlopeBandwidth)
        : label_(std::move(label)), points_(std::move(points)), bandwidth_(bandwidth) {
        if (!(bandwidth_ > 0.0))
            throw InputError("KDE bandwidth must be positive");
        if (points_.empty())
            throw InputError("KDE for '" + label_ + "' needs at least one sample");
    }

    double density(double x) const {
        double sum = 0.0;
        for (double p : points_)
            sum += gaussian_kernel((x - p) / bandwidth_);
        return sum / (static_cast<double>(points_.size()) * bandwidth_);
    }

    const std::string& label() const { return label_; }
    const std::vector<double>& points() const { return points_; }
    double bandwidth() const { return bandwidth_; }

private:
    std::string label_;
    std::vector<double> points_;
    double bandwidth_;
};

using Kde1DMap = std::map<std::string, Kde1D>;

template <class Models>
struct FitResult {
    Models models;
    std::vector<std::string> diagnostics;
};

// One model per distinct model key. Rows with an angle outside [-90, 90] are
// rejected with a diagnostic; an empty input is an error.
inline FitResult<Kde1DMap> fit_slope_kdes(std::span<const LabelSample> samples,
                                          double bandwidth = kDefaultSlopeBandwidth) {
    if (samples.empty())
        throw InputError("cannot fit slope models from an empty sample set");
    if (!(bandwidth > 0.0))
        throw InputError("KDE bandwidth must be positive");

    FitResult<Kde1DMap> out;
    std::map<std::string, std::vector<double>> grouped;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.label.empty()) {
            out.diagnostics.push_back("row " + std::to_string(i) + ": empty label");
            continue;
        }
        if (!(s.angle >= -90.0 && s.angle <= 90.0)) {
            out.diagnostics.push_back("row " + std::to_string(i) + ": angle " +
                                      std::to_string(s.angle) + " outside [-90, 90] for '" +
                                      s.model_key() + "'");
            continue;
        }
        grouped[s.model_key()].push_back(s.angle);
    }
    if (grouped.empty())
        throw InputError("no valid slope samples");
    for (auto& [key, pts] : grouped)
        out.models.emplace(key, Kde1D(key, std::move(pts), bandwidth));
    return out;
}

struct LabelDensity {
    std::string label;
    double density = 0.0;
};

// Highest-density label; ties go to the lexicographically smallest label.
inline LabelDensity argmax_label(const Kde1DMap& models, double angle) {
    if (models.empty())
        throw InputError("argmax over an empty model set");
    LabelDensity best{models.begin()->first, -1.0};
    for (const auto& [label, kde] : models) {
        const double d = kde.density(angle);
        if (d > best.density)
            best = {label, d};
    }
    return best;
}

// ---------------------------------------------------------------------------
// Modifier ratios

enum class ModifierDirection { Softening, Steepening, Unknown };

inline ModifierDirection modifier_direction(const std::string& modifier) {
    if (modifier == "slowly" || modifier == "gradually")
        return ModifierDirection::Softening;
    if (modifier == "quickly" || modifier == "sharply")
        return ModifierDirection::Steepening;
    return ModifierDirection::Unknown;
}

struct CleanedModifierSamples {
    std::vector<LabelSample> retained;
    std::size_t total = 0;

    double retention_fraction() const {
        return total == 0 ? 0.0 : static_cast<double>(retained.size()) / static_cast<double>(total);
    }
};

inline double modifier_ratio(const LabelSample& s) { return s.angle / *s.anchor_angle; }

// Drops rows whose ratio contradicts the modifier's meaning and rows anchored
// at 0 degrees (ratio undefined). Drops are silent; only the fraction reports them.
inline CleanedModifierSamples clean_modifier_samples(std::span<const LabelSample> samples) {
    CleanedModifierSamples out;
    for (const auto& s : samples) {
        if (!s.is_compound() || !s.anchor_angle)
            throw InputError("modifier cleaning needs a modifier and anchor angle on every row");
        ++out.total;
        if (*s.anchor_angle == 0.0)
            continue;
        const double ratio = modifier_ratio(s);
        switch (modifier_direction(s.modifier)) {
            case ModifierDirection::Softening:
                if (ratio > 1.0)
                    continue;
                break;
            case ModifierDirection::Steepening:
                if (ratio < 1.0)
                    continue;
                break;
            case ModifierDirection::Unknown:
                break;
        }
        out.retained.push_back(s);
    }
    return out;
}

struct ModifierScalarModel {
    std::string modifier;
    std::vector<double> scalar_samples;
    double bandwidth = kDefaultScalarBandwidth;
    double peak_scalar = 0.0;

    double density(double x) const {
        double sum = 0.0;
        for (double p : scalar_samples)
            sum += gaussian_kernel((x - p) / bandwidth);
        return sum / (static_cast<double>(scalar_samples.size()) * bandwidth);
    }
};

inline const std::vector<std::string>& standard_modifiers() {
    static const std::vector<std::string> mods{"gradually", "quickly", "sharply", "slowly"};
    return mods;
}

// Peak is searched on a 0.001 grid over [0, 4]; the first maximum wins.
inline FitResult<std::map<std::string, ModifierScalarModel>> fit_modifier_scalars(
    std::span<const LabelSample> retained, double bandwidth = kDefaultScalarBandwidth,
    const std::vector<std::string>& expected_modifiers = standard_modifiers()) {
    if (!(bandwidth > 0.0))
        throw InputError("scalar bandwidth must be positive");
    FitResult<std::map<std::string, ModifierScalarModel>> out;
    std::map<std::string, std::vector<double>> ratios;
    for (const auto& s : retained) {
        if (!s.anchor_angle || *s.anchor_angle == 0.0)
            continue;
        ratios[s.modifier].push_back(modifier_ratio(s));
    }
    for (const auto& m : expected_modifiers)
        if (!ratios.contains(m))
            out.diagnostics.push_back("modifier '" + m + "' has no retained samples; omitted");

    for (auto& [mod, values] : ratios) {
        ModifierScalarModel model{mod, std::move(values), bandwidth, 0.0};
        double best = -1.0;
        for (int i = 0; i <= 4000; ++i) {
            const double x = i / 1000.0;
            const double d = model.density(x);
            if (d > best) {
                best = d;
                model.peak_scalar = x;
            }
        }
        out.models.emplace(mod, std::move(model));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Two-segment shapes

// 2D Gaussian KDE over (interior angle, rotation). Rotation is periodic: every
// sample within wrap_overlap of a seam also contributes through a virtual copy
// shifted by 360 degrees to the other side. The shape-angle axis is not wrapped.
class KdePeriodic2D {
public:
    static constexpr double kFullWrap = 180.0;

    KdePeriodic2D(std::string label, std::vector<std::pair<double, double>> points,
                  double bandwidth = kDefaultShapeBandwidth, double wrap_overlap = kFullWrap)
        : label_(std::move(label)),
          points_(std::move(points)),
          bandwidth_(bandwidth),
          wrap_overlap_(wrap_overlap) {
        if (!(bandwidth_ > 0.0))
            throw InputError("shape KDE bandwidth must be positive");
        if (points_.empty())
            throw InputError("shape KDE for '" + label_ + "' needs at least one sample");
        for (const auto& [a, r] : points_) {
            check_ranges(a, r);
            kernels_.emplace_back(a, r);
            if (r < wrap_overlap_)
                kernels_.emplace_back(a, r + 360.0);
            if (r > 360.0 - wrap_overlap_)
                kernels_.emplace_back(a, r - 360.0);
        }
    }

    double density(double shape_angle, double rotation) const {
        check_ranges(shape_angle, rotation);
        double sum = 0.0;
        for (const auto& [a, r] : kernels_)
            sum += gaussian_kernel((shape_angle - a) / bandwidth_) *
                   gaussian_kernel((rotation - r) / bandwidth_);
        return sum / (static_cast<double>(points_.size()) * bandwidth_ * bandwidth_);
    }

    const std::string& label() const { return label_; }
    const std::vector<std::pair<double, double>>& points() const { return points_; }
    double bandwidth() const { return bandwidth_; }
    double wrap_overlap() const { return wrap_overlap_; }

private:
    static void check_ranges(double shape_angle, double rotation) {
        if (!(shape_angle >= 0.0 && shape_angle <= 180.0))
            throw InputError("shape angle " + std::to_string(shape_angle) + " outside [0, 180]");
        if (!(rotation >= 0.0 && rotation < 360.0))
            throw InputError("rotation " + std::to_string(rotation) + " outside [0, 360)");
    }

    std::string label_;
    std::vector<std::pair<double, double>> points_;
    double bandwidth_;
    double wrap_overlap_;
    std::vector<std::pair<double, double>> kernels_;
};

using ShapeKdeMap = std::map<std::string, KdePeriodic2D>;

inline ShapeKdeMap fit_shape_kdes(std::span<const ShapeSample> samples,
                                  double bandwidth = kDefaultShapeBandwidth,
                                  double wrap_overlap = KdePeriodic2D::kFullWrap) {
    std::map<std::string, std::vector<std::pair<double, double>>> grouped;
    for (const auto& s : samples) {
        if (s.label.empty())
            throw InputError("shape sample with empty label");
        grouped[s.label].emplace_back(s.shape_angle, s.rotation);
    }
    ShapeKdeMap out;
    for (auto& [label, pts] : grouped)
        out.emplace(label, KdePeriodic2D(label, std::move(pts), bandwidth, wrap_overlap));
    return out;
}

inline double density2d(const KdePeriodic2D& model, double shape_angle, double rotation) {
    return model.density(shape_angle, rotation);
}

inline LabelDensity argmax_shape_label(const ShapeKdeMap& models, double shape_angle,
                                       double rotation) {
    if (models.empty())
        throw InputError("argmax over an empty shape model set");
    LabelDensity best{models.begin()->first, -1.0};
    for (const auto& [label, kde] : models) {
        const double d = kde.density(shape_angle, rotation);
        if (d > best.density)
            best = {label, d};
    }
    return best;
}

// ---------------------------------------------------------------------------
// Distribution statistics

struct LabelStats {
    std::string label;
    double mode = 0.0;
    double median = 0.0;
    double iqr_low = 0.0;
    double iqr_high = 0.0;

    double iqr_width() const { return iqr_high - iqr_low; }
};

// Linear-interpolation percentile, q in [0, 1].
inline double percentile(std::vector<double> values, double q) {
    if (values.empty())
        throw InputError("percentile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * frac;
}

// Mode over a 0.1 degree grid on [-90, 90]; quartiles from the raw samples.
inline LabelStats label_stats(const Kde1D& model) {
    LabelStats st;
    st.label = model.label();
    double best = -1.0;
    for (int i = -900; i <= 900; ++i) {
        const double x = i / 10.0;
        const double d = model.density(x);
        if (d > best) {
            best = d;
            st.mode = x;
        }
    }
    st.median = percentile(model.points(), 0.5);
    st.iqr_low = percentile(model.points(), 0.25);
    st.iqr_high = percentile(model.points(), 0.75);
    return st;
}

// ---------------------------------------------------------------------------
// Everything fitted from the label datasets, as consumed by the labeler.

struct FitParams {
    double slope_bandwidth = kDefaultSlopeBandwidth;
    double scalar_bandwidth = kDefaultScalarBandwidth;
    double shape_bandwidth = kDefaultShapeBandwidth;
    double shape_wrap_overlap = KdePeriodic2D::kFullWrap;
};

struct LabelModels {
    Kde1DMap slope;       // single-word labels
    Kde1DMap compound;    // "modifier descriptor" labels, fitted on cleaned rows
    ShapeKdeMap shape;
    std::map<std::string, ModifierScalarModel> modifier_scalars;
    std::size_t modifier_rows = 0;
    std::size_t modifier_rows_retained = 0;
    std::vector<std::string> diagnostics;

    double modifier_retention() const {
        return modifier_rows == 0 ? 0.0
                                  : static_cast<double>(modifier_rows_retained) /
                                        static_cast<double>(modifier_rows);
    }
};

inline LabelModels fit_label_models(std::span<const LabelSample> slope_rows,
                                    std::span<const ShapeSample> shape_rows,
                                    const FitParams& params = {}) {
    LabelModels out;
    std::vector<LabelSample> single, compound;
    for (const auto& s : slope_rows)
        (s.is_compound() ? compound : single).push_back(s);

    auto slope = fit_slope_kdes(single, params.slope_bandwidth);
    out.slope = std::move(slope.models);
    out.diagnostics = std::move(slope.diagnostics);

    if (!compound.empty()) {
        const auto cleaned = clean_modifier_samples(compound);
        out.modifier_rows = cleaned.total;
        out.modifier_rows_retained = cleaned.retained.size();
        auto fitted = fit_slope_kdes(cleaned.retained, params.slope_bandwidth);
        out.compound = std::move(fitted.models);
        out.diagnostics.insert(out.diagnostics.end(), fitted.diagnostics.begin(),
                               fitted.diagnostics.end());
        auto scalars = fit_modifier_scalars(cleaned.retained, params.scalar_bandwidth);
        out.modifier_scalars = std::move(scalars.models);
        out.diagnostics.insert(out.diagnostics.end(), scalars.diagnostics.begin(),
                               scalars.diagnostics.end());
    }
    if (!shape_rows.empty())
        out.shape = fit_shape_kdes(shape_rows, params.shape_bandwidth, params.shape_wrap_overlap);
    return out;
}

// Every word a fitted model can emit as a label, superlatives included.
inline std::set<std::string> model_label_words(const LabelModels& m) {
    std::set<std::string> out{"maximum", "minimum"};
    auto add = [&](const auto& models) {
        for (const auto& [label, model] : models)
            for (auto& w : split_words(to_lower(label)))
                out.insert(std::move(w));
    };
    add(m.slope);
    add(m.compound);
    add(m.shape);
    return out;
}

inline std::map<std::string, LabelStats> all_label_stats(const Kde1DMap& models) {
    std::map<std::string, LabelStats> out;
    for (const auto& [label, kde] : models)
        out.emplace(label, label_stats(kde));
    return out;
}

}  // namespace trendsearch
