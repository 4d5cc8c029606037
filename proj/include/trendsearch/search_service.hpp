#pragma once

// The query pipeline behind both the CLI and the HTTP API:
// parse -> retrieve -> score -> facet tree -> exclusions -> page -> JSON.

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "trendsearch/datastore.hpp"
#include "trendsearch/facets.hpp"
#include "trendsearch/query_parser.hpp"
#include "trendsearch/search_index.hpp"
#include "trendsearch/sequence_search.hpp"

namespace trendsearch {

// Everything one query needs, immutable once built.
struct Snapshot {
    Config config;
    Index index;
    std::map<std::string, TimeSeries> charts;
    std::vector<ChartMeta> metadata;
    ParserResources parser;
    std::map<std::string, LabelStats> stats;  // single-word slope labels
};

struct SnapshotPaths {
    std::filesystem::path events;
    std::filesystem::path models;    // optional; needed for "up"/"down"/"flat"
    std::filesystem::path corpus;    // optional; serves chart points
    std::filesystem::path metadata;  // optional; company names and aliases
    std::filesystem::path synonyms;
    std::filesystem::path stop_phrases;
};

inline std::shared_ptr<const Snapshot> build_snapshot(Config config, Index index,
                                                      std::map<std::string, TimeSeries> charts,
                                                      std::vector<ChartMeta> metadata,
                                                      std::map<std::string, std::vector<std::string>> synonyms,
                                                      std::vector<std::vector<std::string>> stop_phrases,
                                                      std::map<std::string, LabelStats> stats,
                                                      std::set<std::string> label_words = {}) {
    auto s = std::make_shared<Snapshot>();
    s->config = std::move(config);
    s->index = std::move(index);
    s->charts = std::move(charts);
    s->metadata = std::move(metadata);
    s->stats = std::move(stats);
    s->parser.vocabulary = s->index.vocabulary();
    s->parser.label_words = std::move(label_words);
    s->parser.synonyms = std::move(synonyms);
    s->parser.stop_phrases = std::move(stop_phrases);
    s->parser.metadata = s->metadata;
    s->parser.fuzzy_threshold = s->config.fuzzy_threshold;
    return s;
}

inline std::shared_ptr<const Snapshot> load_snapshot(const Config& config, const SnapshotPaths& p) {
    auto index = load_index(p.events);
    std::map<std::string, TimeSeries> charts;
    if (!p.corpus.empty())
        charts = load_series_csv(p.corpus);
    std::vector<ChartMeta> meta;
    if (!p.metadata.empty())
        meta = load_metadata_csv(p.metadata);
    std::map<std::string, LabelStats> stats;
    std::set<std::string> label_words;
    if (!p.models.empty()) {
        const auto models = load_models(p.models);
        stats = all_label_stats(models.slope);
        label_words = model_label_words(models);
    }
    auto syn = p.synonyms.empty() ? std::map<std::string, std::vector<std::string>>{}
                                  : load_synonyms(p.synonyms.string());
    auto stops = p.stop_phrases.empty() ? std::vector<std::vector<std::string>>{}
                                        : load_stop_phrases(p.stop_phrases.string());
    return build_snapshot(config, std::move(index), std::move(charts), std::move(meta),
                          std::move(syn), std::move(stops), std::move(stats),
                          std::move(label_words));
}

// Index words standing for a parsed trend term: the word itself when indexed,
// else its synonym expansion (family selectors become the descriptors of the
// selected labels), else the raw word for the fuzzy path.
inline TermGroup resolve_term(const Snapshot& s, const std::string& term) {
    TermGroup g{term, {term}, false};
    const auto& vocab = s.index.vocabulary();
    if (vocab.contains(term))
        return g;
    const auto it = s.parser.synonyms.find(term);
    if (it == s.parser.synonyms.end())
        return g;
    std::vector<std::string> words;
    auto add = [&](const std::string& w) {
        if (vocab.contains(w) && std::find(words.begin(), words.end(), w) == words.end())
            words.push_back(w);
    };
    for (const auto& target : it->second) {
        if (is_family_selector(target)) {
            for (const auto& l : select_family(target, s.stats, s.config.flat_threshold))
                add(descriptor_of(l));
        } else {
            add(target);
        }
    }
    if (!words.empty()) {
        g.words = std::move(words);
        g.inexact = true;
    }
    return g;
}

struct SearchRequest {
    std::string q;
    std::set<std::string> exclude;
    std::size_t page = 1;
    std::optional<int> max_gap;  // overrides the config
};

namespace detail {

inline std::string snippet_verb(const LabeledEvent& e) {
    return e.kind == EventKind::Superlative ? "had a" : "was";
}

inline std::string snippet_span(const LabeledEvent& e) {
    return e.label + " from " + e.start_date.pretty() + " to " + e.end_date.pretty();
}

inline std::string snippet_fragment(const LabeledEvent& e) {
    return "This stock " + snippet_verb(e) + " " + snippet_span(e);
}

// "This stock was A from x to y, B from ..., and had a C from ..."
inline std::string snippet_sentence(const std::vector<const LabeledEvent*>& evs) {
    std::string out;
    for (std::size_t i = 0; i < evs.size(); ++i) {
        const auto& e = *evs[i];
        std::string part = snippet_span(e);
        if (i == 0 || snippet_verb(e) != snippet_verb(*evs[i - 1]))
            part = snippet_verb(e) + " " + part;
        if (i == 0)
            out = "This stock " + part;
        else if (i + 1 < evs.size())
            out += ", " + part;
        else
            out += (evs.size() > 2 ? ", and " : " and ") + part;
    }
    return out.empty() ? out : out + ".";
}

inline json facet_json(const std::vector<FacetNode>& nodes) {
    json arr = json::array();
    for (const auto& n : nodes)
        arr.push_back({{"label", n.label},
                       {"checked", n.checked},
                       {"match_count", n.match_count},
                       {"children", facet_json(n.children)}});
    return arr;
}

inline json date_range_json(const std::optional<DateRange>& r) {
    if (!r)
        return nullptr;
    json j = json::object();
    if (r->gte)
        j["gte"] = r->gte->iso();
    if (r->lt)
        j["lt"] = r->lt->iso();
    return j;
}

}  // namespace detail

inline json parsed_query_json(const ParsedQuery& q) {
    return {{"event_type", std::string(to_string(q.event_type))},
            {"trend_terms", q.trend_terms},
            {"attr", q.attr ? json(*q.attr) : json(nullptr)},
            {"attr_text", q.attr ? json(q.attr_text) : json(nullptr)},
            {"date_range", detail::date_range_json(q.date_range)},
            {"inexact_terms", q.inexact_terms}};
}

inline std::string notification_text(const std::vector<std::string>& inexact) {
    std::string list;
    for (std::size_t i = 0; i < inexact.size(); ++i)
        list += (i ? ", '" : "'") + inexact[i] + "'";
    return "No exact matches for " + list + ". Showing synonyms or partial matches.";
}

struct SearchOutcome {
    ParsedQuery parsed;
    std::vector<std::string> inexact_terms;
    std::vector<Bucket> all_buckets;  // before exclusions
    std::vector<Bucket> buckets;      // after exclusions
    std::vector<FacetNode> facet_tree;
};

// Runs one query against a snapshot. Throws InputError for an empty or
// unparseable query.
inline SearchOutcome run_search(const Snapshot& s, const SearchRequest& req) {
    if (trim(req.q).empty())
        throw InputError("empty query");
    SearchOutcome out;
    out.parsed = parse(req.q, s.parser);
    out.inexact_terms = out.parsed.inexact_terms;
    auto note_inexact = [&](const std::string& t) {
        if (std::find(out.inexact_terms.begin(), out.inexact_terms.end(), t) == out.inexact_terms.end())
            out.inexact_terms.push_back(t);
    };

    const RetrieveOptions opt{s.config.fuzzy_threshold, s.config.r_cap};
    std::vector<std::vector<ScoredMatch>> per_slot;
    for (const auto& slot : out.parsed.trend_terms) {
        SlotQuery sq;
        for (const auto& t : slot) {
            auto g = resolve_term(s, t);
            if (g.inexact)
                note_inexact(t);
            sq.groups.push_back(std::move(g));
        }
        sq.attr = out.parsed.attr;
        sq.date_range = out.parsed.date_range;
        const auto r = retrieve(s.index, sq, opt);
        for (const auto& t : r.inexact_terms)
            note_inexact(t);
        const auto words = r.query_words();
        std::vector<ScoredMatch> ms;
        for (DocId id : r.docs)
            ms.push_back(score_match(s.index, id, words));
        per_slot.push_back(std::move(ms));
    }

    if (per_slot.size() == 1) {
        out.all_buckets = bucket_matches(s.index, per_slot.front());
    } else if (per_slot.size() >= 2) {
        const int gap = req.max_gap.value_or(s.config.max_gap);
        out.all_buckets = bucket_sequences(s.index, search_sequences(s.index, per_slot, gap));
    }
    out.facet_tree = build_facet_tree(count_labels(s.index, out.all_buckets), req.exclude);
    out.buckets = apply_exclusions(s.index, out.all_buckets, req.exclude);
    return out;
}

inline json search_response_json(const Snapshot& s, const SearchRequest& req,
                                  const SearchOutcome& o) {
    const std::size_t page_size = s.config.page_size;
    const std::size_t page = std::max<std::size_t>(req.page, 1);
    json buckets = json::array();
    for (std::size_t i = (page - 1) * page_size; i < o.buckets.size() && i < page * page_size; ++i) {
        const auto& b = o.buckets[i];
        json events = json::array();
        for (const auto& m : b.events) {
            const auto& e = s.index.doc(m.doc).event;
            json ev = {{"doc_id", m.doc},
                       {"start_date", e.start_date.iso()},
                       {"end_date", e.end_date.iso()},
                       {"label", e.label},
                       {"kind", std::string(to_string(e.kind))},
                       {"epsilon_level", e.epsilon_level},
                       {"label_score", m.label_score},
                       {"saliency", e.saliency},
                       {"composite", m.composite}};
            if (m.slot_index >= 0)
                ev["slot_index"] = m.slot_index;
            events.push_back(std::move(ev));
        }
        // top three distinct events by composite; ties keep bucket order, and
        // the same span labeled at several epsilon levels is shown once
        std::vector<std::size_t> order(b.events.size());
        for (std::size_t k = 0; k < order.size(); ++k)
            order[k] = k;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            return b.events[x].composite > b.events[y].composite;
        });
        std::vector<const LabeledEvent*> top;
        json snippets = json::array();
        json snippet_events = json::array();
        std::set<std::string> shown;
        for (auto k : order) {
            if (top.size() == 3)
                break;
            const auto& e = s.index.doc(b.events[k].doc).event;
            auto fragment = detail::snippet_fragment(e);
            if (!shown.insert(fragment).second)
                continue;
            top.push_back(&e);
            snippets.push_back(std::move(fragment));
            snippet_events.push_back(k);
        }
        buckets.push_back({{"chart_id", b.chart_id},
                           {"bucket_score", b.bucket_score},
                           {"match_count", b.events.size()},
                           {"events", std::move(events)},
                           {"snippets", std::move(snippets)},
                           {"snippet_events", std::move(snippet_events)},
                           {"snippet_text", detail::snippet_sentence(top)}});
    }
    json j = {{"query", req.q},
              {"query_echo", parsed_query_json(o.parsed)},
              {"facet_tree", detail::facet_json(o.facet_tree)},
              {"total_buckets", o.buckets.size()},
              {"page", page},
              {"page_size", page_size},
              {"buckets", std::move(buckets)}};
    j["query_echo"]["inexact_terms"] = o.inexact_terms;
    if (!o.inexact_terms.empty())
        j["notification"] = notification_text(o.inexact_terms);
    return j;
}

// Holds the current snapshot; a reload swaps it whole, and a request in
// flight keeps the snapshot it started with.
class SearchService {
public:
    SearchService() = default;
    explicit SearchService(std::shared_ptr<const Snapshot> s) : snap_(std::move(s)) {}

    std::shared_ptr<const Snapshot> snapshot() const {
        std::lock_guard lock(mu_);
        return snap_;
    }

    void reload(std::shared_ptr<const Snapshot> s) {
        std::lock_guard lock(mu_);
        snap_ = std::move(s);
    }

    bool loaded() const { return snapshot() != nullptr; }

    json search(const SearchRequest& req) const {
        const auto s = snapshot();
        if (!s)
            throw std::logic_error("index not loaded");
        return search_response_json(*s, req, run_search(*s, req));
    }

private:
    mutable std::mutex mu_;
    std::shared_ptr<const Snapshot> snap_;
};

// ---------------------------------------------------------------------------
// Transport-independent HTTP routing

struct ApiResponse {
    int status = 200;
    json body;
};

class Api {
public:
    explicit Api(const SearchService& service) : service_(service) {}

    ApiResponse handle(const std::string& method, const std::string& path,
                       const std::map<std::string, std::string>& params) const {
        if (method != "GET")
            return error(405, "method not allowed");
        const auto snap = service_.snapshot();
        if (path == "/api/search")
            return search(snap, params);
        if (path == "/api/labels")
            return snap ? labels(*snap) : error(503, "index not loaded");
        if (path == "/api/hierarchy")
            return snap ? hierarchy(*snap) : error(503, "index not loaded");
        static const std::string charts_prefix = "/api/charts/";
        if (path.starts_with(charts_prefix) && path.size() > charts_prefix.size())
            return snap ? chart(*snap, path.substr(charts_prefix.size()), params)
                        : error(503, "index not loaded");
        return error(404, "no such endpoint");
    }

private:
    static ApiResponse error(int status, const std::string& msg) {
        return {status, {{"error", msg}}};
    }

    static const std::string* param(const std::map<std::string, std::string>& p,
                                    const std::string& key) {
        const auto it = p.find(key);
        return it == p.end() ? nullptr : &it->second;
    }

    ApiResponse search(const std::shared_ptr<const Snapshot>& snap,
                       const std::map<std::string, std::string>& params) const {
        SearchRequest req;
        if (auto q = param(params, "q"))
            req.q = *q;
        if (trim(req.q).empty())
            return error(400, "empty query");
        if (!snap)
            return error(503, "index not loaded");
        if (auto ex = param(params, "exclude")) {
            std::stringstream ss(*ex);
            for (std::string l; std::getline(ss, l, ',');)
                if (auto t = trim(l); !t.empty())
                    req.exclude.insert(to_lower(t));
        }
        if (auto p = param(params, "page")) {
            try {
                const long v = std::stol(*p);
                if (v < 1)
                    return error(400, "page must be >= 1");
                req.page = static_cast<std::size_t>(v);
            } catch (const std::exception&) {
                return error(400, "bad page");
            }
        }
        try {
            return {200, search_response_json(*snap, req, run_search(*snap, req))};
        } catch (const InputError& e) {
            return error(400, e.what());
        }
    }

    static ApiResponse labels(const Snapshot& s) {
        std::map<std::string, std::set<std::string>> kinds;
        std::map<std::string, std::size_t> counts;
        for (const auto& d : s.index.docs()) {
            kinds[d.event.label].insert(std::string(to_string(d.event.kind)));
            ++counts[d.event.label];
        }
        json labels = json::array();
        std::map<std::string, std::vector<std::string>> families;
        for (const auto& [label, ks] : kinds) {
            const auto fam = descriptor_of(label);
            families[fam].push_back(label);
            labels.push_back(
                {{"label", label}, {"kinds", ks}, {"family", fam}, {"count", counts[label]}});
        }
        return {200,
                {{"labels", labels}, {"families", families}, {"vocabulary", s.index.vocabulary()}}};
    }

    static ApiResponse hierarchy(const Snapshot& s) {
        std::vector<LabelStats> st;
        for (const auto& [l, v] : s.stats)
            st.push_back(v);
        json edges = json::array();
        for (const auto& e : derive_hierarchy(st, s.config.partial_overlap))
            edges.push_back({{"hypernym", e.hypernym},
                             {"hyponym", e.hyponym},
                             {"kind", std::string(to_string(e.kind))}});
        return {200, {{"edges", edges}}};
    }

    static ApiResponse chart(const Snapshot& s, const std::string& id,
                             const std::map<std::string, std::string>& params) {
        const auto it = s.charts.find(id);
        if (it == s.charts.end())
            return error(404, "unknown chart '" + id + "'");
        std::optional<Date> from, to;
        if (auto f = param(params, "from")) {
            from = Date::try_parse(*f);
            if (!from)
                return error(400, "bad 'from' date");
        }
        if (auto t = param(params, "to")) {
            to = Date::try_parse(*t);
            if (!to)
                return error(400, "bad 'to' date");
        }
        if (from && to && *to < *from)
            return error(400, "'to' precedes 'from'");
        json pts = json::array();
        for (const auto& p : it->second.points) {
            if ((from && p.date < *from) || (to && !(p.date < *to)))
                continue;
            pts.push_back({{"date", p.date.iso()}, {"value", p.value}});
        }
        json body = {{"chart_id", id}, {"points", pts}};
        for (const auto& m : s.metadata)
            if (m.ticker == id)
                body["company"] = m.company;
        return {200, body};
    }

    const SearchService& service_;
};

}  // namespace trendsearch
