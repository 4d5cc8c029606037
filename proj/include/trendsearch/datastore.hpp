#pragma once

// File formats: series and metadata CSV, label-dataset CSV, labeled events as
// JSON lines with a versioned header, fitted models, the postings sidecar and
// the key=value config file. Every writer replaces its target atomically.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "trendsearch/date.hpp"
#include "trendsearch/error.hpp"
#include "trendsearch/facets.hpp"
#include "trendsearch/label_models.hpp"
#include "trendsearch/query_parser.hpp"
#include "trendsearch/search_index.hpp"
#include "trendsearch/sequence_search.hpp"
#include "trendsearch/series.hpp"
#include "trendsearch/trend_labeler.hpp"

namespace trendsearch {

inline constexpr int kEventsFormatVersion = 1;
inline constexpr int kModelsFormatVersion = 1;
inline constexpr int kPostingsFormatVersion = 1;

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Small helpers

inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 14695981039346656037ull) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes to a sibling temporary file and renames it over the target, so a
// reader never sees a half-written file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw InputError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out)
            throw InputError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

// One CSV record; double quotes delimit fields that contain commas.
inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"')
                cur += '"', ++i;
            else if (c == '"')
                quoted = false;
            else
                cur += c;
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"") == std::string_view::npos)
        return std::string(s);
    std::string out = "\"";
    for (char c : s)
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

inline double parse_double(std::string_view s, const std::string& where) {
    const auto t = trim(s);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || p != t.data() + t.size())
        throw InputError(where + ": not a number: '" + std::string(s) + "'");
    return v;
}

namespace detail {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line number, fields)
};

inline CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& expected) {
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty())
            continue;
        auto fields = split_csv_line(line);
        if (t.header.empty()) {
            for (auto& f : fields)
                f = to_lower(trim(f));
            if (fields != expected)
                throw InputError(path.string() + ": expected header '" + join(expected, ",") + "'");
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != expected.size())
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(expected.size()) + " fields, got " +
                             std::to_string(fields.size()));
        t.rows.emplace_back(lineno, std::move(fields));
    }
    if (t.header.empty())
        throw InputError(path.string() + ": empty file");
    return t;
}

inline std::string where(const std::filesystem::path& p, std::size_t line) {
    return p.string() + ":" + std::to_string(line);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Series and metadata

// Per-ticker series sorted by date. Duplicate (ticker, date) rows are an error
// naming the offending line.
inline std::map<std::string, TimeSeries> load_series_csv(const std::filesystem::path& path) {
    const auto t = detail::read_csv(path, {"date", "ticker", "value"});
    if (t.rows.empty())
        throw InputError(path.string() + ": no data rows");
    std::map<std::string, TimeSeries> out;
    std::map<std::pair<std::string, long>, std::size_t> seen;
    for (const auto& [line, f] : t.rows) {
        const auto d = Date::try_parse(trim(f[0]));
        if (!d)
            throw InputError(detail::where(path, line) + ": bad date '" + f[0] + "'");
        const auto ticker = trim(f[1]);
        if (ticker.empty())
            throw InputError(detail::where(path, line) + ": empty ticker");
        const double v = parse_double(f[2], detail::where(path, line));
        if (auto [it, fresh] = seen.emplace(std::pair{ticker, d->days()}, line); !fresh)
            throw InputError(detail::where(path, line) + ": duplicate row for " + ticker + " on " +
                             d->iso() + " (first at line " + std::to_string(it->second) + ")");
        auto& s = out[ticker];
        s.chart_id = ticker;
        s.points.push_back({*d, v});
    }
    for (auto& [id, s] : out)
        std::sort(s.points.begin(), s.points.end(),
                  [](const auto& a, const auto& b) { return a.date < b.date; });
    return out;
}

inline std::vector<ChartMeta> load_metadata_csv(const std::filesystem::path& path) {
    const auto t = detail::read_csv(path, {"ticker", "company", "aliases"});
    std::vector<ChartMeta> out;
    for (const auto& [line, f] : t.rows) {
        ChartMeta m{trim(f[0]), trim(f[1]), {}};
        if (m.ticker.empty())
            throw InputError(detail::where(path, line) + ": empty ticker");
        std::stringstream ss(f[2]);
        for (std::string a; std::getline(ss, a, ';');)
            if (auto ta = trim(a); !ta.empty())
                m.aliases.push_back(ta);
        out.push_back(std::move(m));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Label datasets

inline std::vector<LabelSample> load_slope_labels_csv(const std::filesystem::path& path) {
    const auto t = detail::read_csv(
        path, {"label", "modifier", "angle_deg", "anchor_angle_deg", "participant_id"});
    std::vector<LabelSample> out;
    for (const auto& [line, f] : t.rows) {
        const auto w = detail::where(path, line);
        LabelSample s;
        s.label = to_lower(trim(f[0]));
        s.modifier = to_lower(trim(f[1]));
        s.angle = parse_double(f[2], w);
        s.participant = trim(f[4]);
        if (!trim(f[3]).empty())
            s.anchor_angle = parse_double(f[3], w);
        if (s.label.empty())
            throw InputError(w + ": empty label");
        if (s.modifier.empty() != !s.anchor_angle)
            throw InputError(w + ": modifier and anchor angle must be given together");
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<ShapeSample> load_shape_labels_csv(const std::filesystem::path& path) {
    const auto t =
        detail::read_csv(path, {"label", "shape_angle_deg", "rotation_deg", "participant_id"});
    std::vector<ShapeSample> out;
    for (const auto& [line, f] : t.rows) {
        const auto w = detail::where(path, line);
        ShapeSample s{to_lower(trim(f[0])), parse_double(f[1], w), parse_double(f[2], w), trim(f[3])};
        if (s.label.empty())
            throw InputError(w + ": empty label");
        if (!(s.shape_angle >= 0.0 && s.shape_angle <= 180.0) ||
            !(s.rotation >= 0.0 && s.rotation < 360.0))
            throw InputError(w + ": shape angle or rotation out of range");
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Models

inline json models_to_json(const LabelModels& m) {
    auto kde_map = [](const Kde1DMap& map) {
        json j = json::object();
        for (const auto& [label, k] : map)
            j[label] = {{"bandwidth", k.bandwidth()}, {"points", k.points()}};
        return j;
    };
    json shapes = json::object();
    for (const auto& [label, k] : m.shape) {
        json pts = json::array();
        for (const auto& [a, r] : k.points())
            pts.push_back({a, r});
        shapes[label] = {{"bandwidth", k.bandwidth()}, {"wrap_overlap", k.wrap_overlap()},
                         {"points", pts}};
    }
    json scalars = json::object();
    for (const auto& [mod, s] : m.modifier_scalars)
        scalars[mod] = {{"bandwidth", s.bandwidth},
                        {"peak_scalar", s.peak_scalar},
                        {"samples", s.scalar_samples}};
    return {{"format", "trendsearch-models"},
            {"version", kModelsFormatVersion},
            {"slope", kde_map(m.slope)},
            {"compound", kde_map(m.compound)},
            {"shape", shapes},
            {"modifier_scalars", scalars},
            {"modifier_rows", m.modifier_rows},
            {"modifier_rows_retained", m.modifier_rows_retained},
            {"diagnostics", m.diagnostics}};
}

// Content hash of the fitted models; independent of file layout.
inline std::string model_fingerprint(const LabelModels& m) {
    return hex64(fnv1a64(models_to_json(m).dump()));
}

inline LabelModels models_from_json(const json& j) {
    if (j.value("format", "") != "trendsearch-models")
        throw InputError("not a models file");
    if (j.value("version", 0) != kModelsFormatVersion)
        throw VersionError("models file version " + std::to_string(j.value("version", 0)) +
                           " is not supported; re-run fit-models");
    LabelModels m;
    auto read_kdes = [](const json& src, Kde1DMap& dst) {
        for (auto& [label, v] : src.items())
            dst.emplace(label, Kde1D(label, v.at("points").get<std::vector<double>>(),
                                     v.at("bandwidth").get<double>()));
    };
    read_kdes(j.at("slope"), m.slope);
    read_kdes(j.at("compound"), m.compound);
    for (auto& [label, v] : j.at("shape").items()) {
        std::vector<std::pair<double, double>> pts;
        for (auto& p : v.at("points"))
            pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        m.shape.emplace(label, KdePeriodic2D(label, std::move(pts), v.at("bandwidth").get<double>(),
                                             v.at("wrap_overlap").get<double>()));
    }
    for (auto& [mod, v] : j.at("modifier_scalars").items())
        m.modifier_scalars.emplace(
            mod, ModifierScalarModel{mod, v.at("samples").get<std::vector<double>>(),
                                     v.at("bandwidth").get<double>(),
                                     v.at("peak_scalar").get<double>()});
    m.modifier_rows = j.at("modifier_rows").get<std::size_t>();
    m.modifier_rows_retained = j.at("modifier_rows_retained").get<std::size_t>();
    m.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
    return m;
}

inline void save_models(const LabelModels& m, const std::filesystem::path& path) {
    auto j = models_to_json(m);
    j["fingerprint"] = model_fingerprint(m);
    write_file_atomic(path, j.dump() + "\n");
}

inline LabelModels load_models(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    auto m = models_from_json(j);
    if (j.contains("fingerprint") && j["fingerprint"] != model_fingerprint(m))
        throw InputError(path.string() + ": fingerprint mismatch, file is corrupt");
    return m;
}

// ---------------------------------------------------------------------------
// Labeled events

inline json event_to_json(const LabeledEvent& e) {
    return {{"chart_id", e.chart_id},
            {"start_date", e.start_date.iso()},
            {"end_date", e.end_date.iso()},
            {"label", e.label},
            {"kind", std::string(to_string(e.kind))},
            {"density", e.density},
            {"saliency", e.saliency},
            {"epsilon_level", e.epsilon_level},
            {"x_event_start", e.x_event_start},
            {"x_event_end", e.x_event_end},
            {"y_event_start", e.y_event_start},
            {"y_event_end", e.y_event_end},
            {"y_event_min", e.y_event_min},
            {"y_event_max", e.y_event_max},
            {"angle", e.angle},
            {"rotation", e.rotation}};
}

inline LabeledEvent event_from_json(const json& j) {
    LabeledEvent e;
    e.chart_id = j.at("chart_id").get<std::string>();
    e.start_date = Date::parse(j.at("start_date").get<std::string>());
    e.end_date = Date::parse(j.at("end_date").get<std::string>());
    e.label = j.at("label").get<std::string>();
    e.kind = event_kind_from_string(j.at("kind").get<std::string>());
    e.density = j.at("density").get<double>();
    e.saliency = j.at("saliency").get<double>();
    e.epsilon_level = j.at("epsilon_level").get<double>();
    e.x_event_start = j.at("x_event_start").get<double>();
    e.x_event_end = j.at("x_event_end").get<double>();
    e.y_event_start = j.at("y_event_start").get<double>();
    e.y_event_end = j.at("y_event_end").get<double>();
    e.y_event_min = j.at("y_event_min").get<double>();
    e.y_event_max = j.at("y_event_max").get<double>();
    e.angle = j.at("angle").get<double>();
    e.rotation = j.at("rotation").get<double>();
    return e;
}

struct EventsHeader {
    int version = kEventsFormatVersion;
    std::string model_fingerprint;
    std::string created;  // UTC timestamp, informational only
};

inline std::string utc_now_iso() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string events_to_jsonl(const std::vector<LabeledEvent>& events, const EventsHeader& h) {
    json header = {{"format", "trendsearch-events"},
                   {"version", h.version},
                   {"model_fingerprint", h.model_fingerprint},
                   {"created", h.created}};
    std::string out = header.dump() + "\n";
    for (const auto& e : events)
        out += event_to_json(e).dump() + "\n";
    return out;
}

inline void persist_events(const std::vector<LabeledEvent>& events, const std::filesystem::path& path,
                           EventsHeader header = {}) {
    if (header.created.empty())
        header.created = utc_now_iso();
    write_file_atomic(path, events_to_jsonl(events, header));
}

struct LoadedEvents {
    EventsHeader header;
    std::vector<LabeledEvent> events;
};

inline LoadedEvents load_events_with_header(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open " + path.string());
    LoadedEvents out;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty())
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw InputError(detail::where(path, lineno) + ": " + e.what());
        }
        if (!have_header) {
            if (j.value("format", "") != "trendsearch-events")
                throw InputError(path.string() + ": missing events header line");
            out.header.version = j.value("version", 0);
            if (out.header.version != kEventsFormatVersion)
                throw VersionError(path.string() + ": events file version " +
                                   std::to_string(out.header.version) + " is not supported (expected " +
                                   std::to_string(kEventsFormatVersion) +
                                   "); re-run the label command to regenerate it");
            out.header.model_fingerprint = j.value("model_fingerprint", "");
            out.header.created = j.value("created", "");
            have_header = true;
            continue;
        }
        try {
            out.events.push_back(event_from_json(j));
        } catch (const std::exception& e) {
            throw InputError(detail::where(path, lineno) + ": " + e.what());
        }
    }
    if (!have_header)
        throw InputError(path.string() + ": empty events file");
    return out;
}

inline std::vector<LabeledEvent> load_events(const std::filesystem::path& path) {
    return load_events_with_header(path).events;
}

// Hash of an events file ignoring the header's creation timestamp.
inline std::string events_digest(const std::filesystem::path& path) {
    const auto content = read_file(path);
    const auto nl = content.find('\n');
    auto header = json::parse(content.substr(0, nl));
    header.erase("created");
    auto h = fnv1a64(header.dump());
    if (nl != std::string::npos)
        h = fnv1a64(std::string_view(content).substr(nl + 1), h);
    return hex64(h);
}

// ---------------------------------------------------------------------------
// Postings sidecar

inline std::string postings_path_for(const std::filesystem::path& events_path) {
    return events_path.string() + ".postings.json";
}

inline void save_postings(const Index& idx, const std::string& digest,
                          const std::filesystem::path& path) {
    json j = {{"format", "trendsearch-postings"},
              {"version", kPostingsFormatVersion},
              {"events_digest", digest},
              {"documents", idx.size()},
              {"words", idx.word_postings()},
              {"trigrams", idx.trigram_postings()}};
    write_file_atomic(path, j.dump() + "\n");
}

struct LoadedPostings {
    std::string events_digest;
    Postings words;
    Postings trigrams;
};

inline LoadedPostings load_postings(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "trendsearch-postings")
        throw InputError(path.string() + ": not a postings file");
    if (j.value("version", 0) != kPostingsFormatVersion)
        throw VersionError(path.string() + ": postings version mismatch; re-run the index command");
    return {j.at("events_digest").get<std::string>(), j.at("words").get<Postings>(),
            j.at("trigrams").get<Postings>()};
}

// Index over an events file: persisted postings when a current sidecar exists,
// rebuilt from the events otherwise.
inline Index load_index(const std::filesystem::path& events_path, bool* used_sidecar = nullptr) {
    auto events = load_events(events_path);
    const auto sidecar = postings_path_for(events_path);
    if (used_sidecar)
        *used_sidecar = false;
    if (std::filesystem::exists(sidecar)) {
        auto p = load_postings(sidecar);
        if (p.events_digest == events_digest(events_path)) {
            if (used_sidecar)
                *used_sidecar = true;
            return Index(std::move(events), std::move(p.words), std::move(p.trigrams));
        }
    }
    return Index(std::move(events));
}

// ---------------------------------------------------------------------------
// Config

struct Config {
    double aspect = kDefaultAspect;
    std::vector<double> epsilons = default_epsilons();
    double keep = kDefaultKeepFraction;
    double slope_bandwidth = kDefaultSlopeBandwidth;
    double scalar_bandwidth = kDefaultScalarBandwidth;
    double shape_bandwidth = kDefaultShapeBandwidth;
    double shape_wrap_overlap = KdePeriodic2D::kFullWrap;
    int max_gap = kDefaultMaxGap;
    double fuzzy_threshold = kDefaultFuzzyThreshold;
    std::size_t r_cap = kDefaultRetrievalCap;
    double flat_threshold = kDefaultFlatThreshold;
    double partial_overlap = kDefaultPartialOverlap;
    int superlative_window = kDefaultSuperlativeWindow;
    std::size_t page_size = 20;

    FitParams fit_params() const {
        return {slope_bandwidth, scalar_bandwidth, shape_bandwidth, shape_wrap_overlap};
    }
    LabelerParams labeler_params() const { return {aspect, epsilons, keep, superlative_window}; }
    FacetParams facet_params() const { return {flat_threshold, partial_overlap}; }

    void validate() const {
        if (!(aspect > 0.0))
            throw InputError("config: aspect must be positive");
        if (epsilons.empty())
            throw InputError("config: epsilons must not be empty");
        for (double e : epsilons)
            if (!(e > 0.0))
                throw InputError("config: epsilons must be positive");
        if (!(keep > 0.0 && keep <= 1.0))
            throw InputError("config: keep must be in (0, 1]");
        if (!(slope_bandwidth > 0.0 && scalar_bandwidth > 0.0 && shape_bandwidth > 0.0))
            throw InputError("config: bandwidths must be positive");
        if (max_gap < 0)
            throw InputError("config: max_gap must be non-negative");
        if (!(fuzzy_threshold > 0.0 && fuzzy_threshold <= 1.0))
            throw InputError("config: fuzzy_threshold must be in (0, 1]");
        if (r_cap == 0 || page_size == 0)
            throw InputError("config: r_cap and page_size must be positive");
        if (superlative_window < 0)
            throw InputError("config: superlative_window must be non-negative");
    }
};

// key = value lines; '#' and ';' start comments, [section] headers are ignored.
inline Config parse_config(std::istream& in, const std::string& name = "config") {
    Config c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto p = line.find_first_of("#;"); p != std::string::npos)
            line.erase(p);
        const auto t = trim(line);
        if (t.empty() || t.front() == '[')
            continue;
        const auto eq = t.find('=');
        const auto w = name + ":" + std::to_string(lineno);
        if (eq == std::string::npos)
            throw InputError(w + ": expected key = value");
        const auto key = to_lower(trim(t.substr(0, eq)));
        const auto val = trim(t.substr(eq + 1));
        auto num = [&] { return parse_double(val, w); };
        auto integer = [&] {
            const double v = num();
            if (v != static_cast<double>(static_cast<long>(v)))
                throw InputError(w + ": " + key + " must be an integer");
            return static_cast<long>(v);
        };
        if (key == "aspect") c.aspect = num();
        else if (key == "epsilons") {
            c.epsilons.clear();
            std::stringstream ss(val);
            for (std::string part; std::getline(ss, part, ',');)
                c.epsilons.push_back(parse_double(part, w));
        }
        else if (key == "keep") c.keep = num();
        else if (key == "slope_bandwidth") c.slope_bandwidth = num();
        else if (key == "scalar_bandwidth") c.scalar_bandwidth = num();
        else if (key == "shape_bandwidth") c.shape_bandwidth = num();
        else if (key == "shape_wrap_overlap") c.shape_wrap_overlap = num();
        else if (key == "max_gap") c.max_gap = static_cast<int>(integer());
        else if (key == "fuzzy_threshold") c.fuzzy_threshold = num();
        else if (key == "r_cap") c.r_cap = static_cast<std::size_t>(integer());
        else if (key == "flat_threshold") c.flat_threshold = num();
        else if (key == "partial_overlap") c.partial_overlap = num();
        else if (key == "superlative_window") c.superlative_window = static_cast<int>(integer());
        else if (key == "page_size") c.page_size = static_cast<std::size_t>(integer());
        else throw InputError(w + ": unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

inline Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open config " + path.string());
    return parse_config(in, path.string());
}

// ---------------------------------------------------------------------------
// Corpus

struct Corpus {
    std::map<std::string, TimeSeries> charts;
    std::vector<ChartMeta> metadata;
    std::vector<LabeledEvent> events;
    std::string model_fingerprint;

    // Every event refers to a known chart.
    void validate() const {
        for (const auto& e : events)
            if (!charts.contains(e.chart_id))
                throw InputError("event refers to unknown chart '" + e.chart_id + "'");
    }
};

}  // namespace trendsearch
