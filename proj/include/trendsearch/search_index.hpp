#pragma once

// In-process inverted index over labeled events, with overlap retrieval,
// label scoring, composite scoring and per-chart buckets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "trendsearch/query_parser.hpp"
#include "trendsearch/text.hpp"
#include "trendsearch/trend_labeler.hpp"

namespace trendsearch {

using DocId = std::uint32_t;
using Postings = std::map<std::string, std::vector<DocId>>;

inline constexpr std::size_t kDefaultRetrievalCap = 1000;

inline const std::set<std::string>& modifier_lexicon() {
    static const std::set<std::string> s{"slowly", "gradually", "quickly", "sharply", "slow",
                                         "fast",   "gradual",   "sharp",   "quick",   "rapid",
                                         "rapidly", "slight",   "slightly", "steep",  "steeply",
                                         "suddenly", "sudden"};
    return s;
}

enum class LabelPart { Descriptor, Modifier };

inline LabelPart word_part(std::string_view w) {
    return modifier_lexicon().contains(std::string(w)) ? LabelPart::Modifier
                                                       : LabelPart::Descriptor;
}

// Last non-modifier word of a label; a label made only of modifiers is its
// own descriptor.
inline std::string descriptor_of(std::string_view label) {
    const auto words = split_words(to_lower(label));
    for (auto it = words.rbegin(); it != words.rend(); ++it)
        if (word_part(*it) == LabelPart::Descriptor)
            return *it;
    return to_lower(label);
}

struct Document {
    LabeledEvent event;
    EncodedText tokens;
};

class Index {
public:
    Index() = default;

    explicit Index(std::vector<LabeledEvent> events) {
        add_documents(std::move(events));
        for (DocId id = 0; id < docs_.size(); ++id) {
            for (const auto& w : docs_[id].tokens.words)
                words_[w].push_back(id);
            for (const auto& g : docs_[id].tokens.trigrams)
                trigrams_[g].push_back(id);
        }
    }

    // Uses persisted postings instead of rebuilding them; they must agree with
    // the events' token sets.
    Index(std::vector<LabeledEvent> events, Postings words, Postings trigrams) {
        add_documents(std::move(events));
        words_ = std::move(words);
        trigrams_ = std::move(trigrams);
        if (!consistent())
            throw InputError("postings do not match the indexed events; rebuild the index");
    }

    std::size_t size() const { return docs_.size(); }
    const Document& doc(DocId id) const { return docs_.at(id); }
    const std::vector<Document>& docs() const { return docs_; }
    const Postings& word_postings() const { return words_; }
    const Postings& trigram_postings() const { return trigrams_; }
    const std::set<std::string>& vocabulary() const { return vocabulary_; }
    const std::set<std::string>& labels() const { return labels_; }
    const std::set<std::string>& chart_ids() const { return charts_; }

    const std::vector<DocId>& postings(const std::string& word) const {
        static const std::vector<DocId> none;
        const auto it = words_.find(word);
        return it == words_.end() ? none : it->second;
    }

    bool is_descriptor(const std::string& word) const {
        return vocabulary_.contains(word) && word_part(word) == LabelPart::Descriptor;
    }

    // Postings must be exactly the inverse of the documents' token sets.
    bool consistent() const {
        Postings w, g;
        for (DocId id = 0; id < docs_.size(); ++id) {
            for (const auto& t : docs_[id].tokens.words)
                w[t].push_back(id);
            for (const auto& t : docs_[id].tokens.trigrams)
                g[t].push_back(id);
        }
        return w == words_ && g == trigrams_;
    }

private:
    void add_documents(std::vector<LabeledEvent> events) {
        docs_.reserve(events.size());
        for (auto& e : events) {
            auto tokens = encode(e.label);
            if (tokens.empty())
                throw InputError("event with empty label in chart '" + e.chart_id + "'");
            vocabulary_.insert(tokens.words.begin(), tokens.words.end());
            labels_.insert(e.label);
            charts_.insert(e.chart_id);
            docs_.push_back({std::move(e), std::move(tokens)});
        }
    }

    std::vector<Document> docs_;
    Postings words_;
    Postings trigrams_;
    std::set<std::string> vocabulary_;
    std::set<std::string> labels_;
    std::set<std::string> charts_;
};

// ---------------------------------------------------------------------------
// Retrieval

// One query term and the index words that stand for it. A literal term is
// its own single word; synonyms expand to several alternatives.
struct TermGroup {
    std::string source;
    std::vector<std::string> words;
    bool inexact = false;
};

struct SlotQuery {
    std::vector<TermGroup> groups;
    std::optional<std::string> attr;
    std::optional<DateRange> date_range;
};

struct RetrieveOptions {
    double fuzzy_threshold = kDefaultFuzzyThreshold;
    std::size_t cap = kDefaultRetrievalCap;
};

struct RetrievalResult {
    std::vector<DocId> docs;
    std::vector<TermGroup> groups;  // after fuzzy substitution
    std::vector<std::string> inexact_terms;

    // distinct query words across all groups
    std::set<std::string> query_words() const {
        std::set<std::string> out;
        for (const auto& g : groups)
            out.insert(g.words.begin(), g.words.end());
        return out;
    }
};

namespace detail {

inline bool group_has_hits(const Index& idx, const TermGroup& g) {
    return std::any_of(g.words.begin(), g.words.end(),
                       [&](const auto& w) { return !idx.postings(w).empty(); });
}

// Groups whose words include an indexed descriptor constrain every result to
// carry one of those descriptors.
inline std::vector<std::set<std::string>> descriptor_constraints(
    const Index& idx, const std::vector<TermGroup>& groups) {
    std::vector<std::set<std::string>> out;
    for (const auto& g : groups) {
        std::set<std::string> ds;
        for (const auto& w : g.words)
            if (idx.is_descriptor(w))
                ds.insert(w);
        if (!ds.empty())
            out.push_back(std::move(ds));
    }
    return out;
}

inline bool passes_filters(const Document& d, const std::vector<std::set<std::string>>& constraints,
                           const SlotQuery& q) {
    for (const auto& ds : constraints)
        if (std::none_of(ds.begin(), ds.end(),
                         [&](const auto& w) { return d.tokens.words.contains(w); }))
            return false;
    if (q.attr && d.event.chart_id != *q.attr)
        return false;
    if (q.date_range && !q.date_range->intersects(d.event.start_date, d.event.end_date))
        return false;
    return true;
}

}  // namespace detail

// Replaces every group without a single indexed word by its fuzzy matches in
// the index vocabulary. Matched groups are flagged inexact.
inline std::vector<TermGroup> apply_fuzzy_fallback(const Index& idx, std::vector<TermGroup> groups,
                                                   double threshold,
                                                   std::vector<std::string>* inexact = nullptr) {
    for (auto& g : groups) {
        if (detail::group_has_hits(idx, g))
            continue;
        std::vector<std::string> subs;
        for (const auto& w : g.words) {
            for (auto& c : fuzzy_candidates(w, idx.vocabulary(), threshold))
                if (std::find(subs.begin(), subs.end(), c) == subs.end())
                    subs.push_back(std::move(c));
        }
        if (subs.empty())
            continue;
        g.words = std::move(subs);
        g.inexact = true;
        if (inexact)
            inexact->push_back(g.source);
    }
    return groups;
}

// Overlap candidates through the word postings, descriptor/attr/date filters,
// then the top `cap` by overlap (ties by doc id).
inline RetrievalResult retrieve(const Index& idx, const SlotQuery& q,
                                const RetrieveOptions& opt = {}) {
    RetrievalResult out;
    out.groups = apply_fuzzy_fallback(idx, q.groups, opt.fuzzy_threshold, &out.inexact_terms);
    const auto words = out.query_words();
    const auto constraints = detail::descriptor_constraints(idx, out.groups);

    std::map<DocId, std::size_t> overlap;
    for (const auto& w : words)
        for (DocId id : idx.postings(w))
            ++overlap[id];

    std::vector<std::pair<std::size_t, DocId>> ranked;
    for (const auto& [id, n] : overlap)
        if (detail::passes_filters(idx.doc(id), constraints, q))
            ranked.emplace_back(n, id);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    if (ranked.size() > opt.cap)
        ranked.resize(opt.cap);
    for (const auto& [n, id] : ranked)
        out.docs.push_back(id);
    return out;
}

// ---------------------------------------------------------------------------
// Scoring

// Distinct query words present in the label over the square root of the
// label's non-space character count.
inline double label_score(const std::set<std::string>& query_words, std::string_view label) {
    const auto lw = encode(label).words;
    std::size_t hits = 0;
    for (const auto& w : query_words)
        hits += lw.count(w);
    const auto len = non_space_chars(label);
    return len == 0 ? 0.0 : static_cast<double>(hits) / std::sqrt(static_cast<double>(len));
}

inline double label_score(std::string_view query, std::string_view label) {
    return label_score(encode(query).words, label);
}

struct ScoredMatch {
    DocId doc = 0;
    std::size_t matched_tokens = 0;
    double label_score = 0.0;
    double composite = 0.0;
    int slot_index = -1;  // sequence slot, -1 for single queries

    bool operator==(const ScoredMatch&) const = default;
};

struct Bucket {
    std::string chart_id;
    std::vector<ScoredMatch> events;
    double bucket_score = 0.0;
    // sequence buckets: members of one chain stay adjacent
    std::vector<std::vector<ScoredMatch>> chains;
    std::vector<double> chain_scores;
};

inline ScoredMatch score_match(const Index& idx, DocId id, const std::set<std::string>& words) {
    const auto& d = idx.doc(id);
    ScoredMatch m;
    m.doc = id;
    for (const auto& w : words)
        m.matched_tokens += d.tokens.words.count(w);
    m.label_score = label_score(words, d.event.label);
    m.composite = m.label_score * d.event.saliency;
    return m;
}

inline void sort_matches(const Index& idx, std::vector<ScoredMatch>& ms) {
    std::sort(ms.begin(), ms.end(), [&](const ScoredMatch& a, const ScoredMatch& b) {
        if (a.composite != b.composite)
            return a.composite > b.composite;
        const auto& ea = idx.doc(a.doc).event;
        const auto& eb = idx.doc(b.doc).event;
        if (ea.start_date != eb.start_date)
            return ea.start_date < eb.start_date;
        return a.doc < b.doc;
    });
}

inline void sort_buckets(std::vector<Bucket>& buckets) {
    std::sort(buckets.begin(), buckets.end(), [](const Bucket& a, const Bucket& b) {
        return a.bucket_score != b.bucket_score ? a.bucket_score > b.bucket_score
                                                : a.chart_id < b.chart_id;
    });
}

// Groups scored matches per chart. bucket_score is summed in the final member
// order so it is reproducible bit for bit.
inline std::vector<Bucket> bucket_matches(const Index& idx, const std::vector<ScoredMatch>& matches) {
    std::map<std::string, Bucket> by_chart;
    for (const auto& m : matches) {
        auto& b = by_chart[idx.doc(m.doc).event.chart_id];
        b.chart_id = idx.doc(m.doc).event.chart_id;
        b.events.push_back(m);
    }
    std::vector<Bucket> out;
    for (auto& [id, b] : by_chart) {
        sort_matches(idx, b.events);
        b.bucket_score = 0.0;
        for (const auto& m : b.events)
            b.bucket_score += m.composite;
        out.push_back(std::move(b));
    }
    sort_buckets(out);
    return out;
}

inline std::vector<Bucket> score_and_bucket(const Index& idx, const std::vector<DocId>& docs,
                                            const std::set<std::string>& query_words) {
    std::vector<ScoredMatch> ms;
    ms.reserve(docs.size());
    for (DocId id : docs)
        ms.push_back(score_match(idx, id, query_words));
    return bucket_matches(idx, ms);
}

}  // namespace trendsearch
