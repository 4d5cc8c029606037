#pragma once

// Label families for the facet sidebar, family selectors for vague terms
// ("up", "flat"), checkbox exclusions, and IQR-based hypernym suggestions.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "trendsearch/label_models.hpp"
#include "trendsearch/search_index.hpp"

namespace trendsearch {

inline constexpr double kDefaultFlatThreshold = 10.0;    // degrees
inline constexpr double kDefaultPartialOverlap = 0.5;    // share of the hyponym's IQR

struct FacetNode {
    std::string label;
    std::vector<FacetNode> children;
    bool checked = true;
    std::size_t match_count = 0;
};

namespace detail {

inline void sort_nodes(std::vector<FacetNode>& nodes) {
    std::sort(nodes.begin(), nodes.end(), [](const FacetNode& a, const FacetNode& b) {
        return a.match_count != b.match_count ? a.match_count > b.match_count : a.label < b.label;
    });
}

}  // namespace detail

// Groups labels by descriptor. The bare descriptor label is the parent and
// its modifier variants the children; a family with a single label is a leaf.
// A family whose bare label did not match still gets a parent named after
// the descriptor, with its own count 0.
inline std::vector<FacetNode> build_facet_tree(const std::map<std::string, std::size_t>& label_counts,
                                               const std::set<std::string>& excluded = {}) {
    std::map<std::string, std::vector<std::string>> families;
    for (const auto& [label, n] : label_counts)
        families[descriptor_of(label)].push_back(label);

    std::vector<FacetNode> out;
    for (const auto& [desc, labels] : families) {
        auto count_of = [&](const std::string& l) {
            const auto it = label_counts.find(l);
            return it == label_counts.end() ? std::size_t{0} : it->second;
        };
        if (labels.size() == 1) {
            out.push_back({labels.front(), {}, !excluded.contains(labels.front()),
                           count_of(labels.front())});
            continue;
        }
        FacetNode parent{desc, {}, !excluded.contains(desc), count_of(desc)};
        for (const auto& l : labels) {
            if (l == desc)
                continue;
            parent.children.push_back({l, {}, parent.checked && !excluded.contains(l), count_of(l)});
            parent.match_count += count_of(l);
        }
        detail::sort_nodes(parent.children);
        out.push_back(std::move(parent));
    }
    detail::sort_nodes(out);
    return out;
}

inline std::map<std::string, std::size_t> count_labels(const Index& idx,
                                                       const std::vector<Bucket>& buckets) {
    std::map<std::string, std::size_t> out;
    for (const auto& b : buckets)
        for (const auto& m : b.events)
            ++out[idx.doc(m.doc).event.label];
    return out;
}

// Excluding a family parent excludes every label of that family.
inline std::set<std::string> expand_exclusions(const std::set<std::string>& excluded,
                                               const std::set<std::string>& labels) {
    std::set<std::string> out = excluded;
    for (const auto& l : labels) {
        const auto d = descriptor_of(l);
        if (excluded.contains(d))
            out.insert(l);
    }
    return out;
}

// Drops excluded events; a sequence chain with any excluded member is dropped
// whole. Scores are recomputed, so an empty exclusion set is the identity.
inline std::vector<Bucket> apply_exclusions(const Index& idx, const std::vector<Bucket>& buckets,
                                            const std::set<std::string>& excluded) {
    if (excluded.empty())
        return buckets;
    const auto all = expand_exclusions(excluded, idx.labels());
    auto bad = [&](const ScoredMatch& m) { return all.contains(idx.doc(m.doc).event.label); };
    std::vector<Bucket> out;
    for (const auto& b : buckets) {
        Bucket nb;
        nb.chart_id = b.chart_id;
        if (b.chains.empty()) {
            for (const auto& m : b.events)
                if (!bad(m)) {
                    nb.events.push_back(m);
                    nb.bucket_score += m.composite;
                }
        } else {
            for (std::size_t ci = 0; ci < b.chains.size(); ++ci) {
                const auto& chain = b.chains[ci];
                if (std::any_of(chain.begin(), chain.end(), bad))
                    continue;
                nb.events.insert(nb.events.end(), chain.begin(), chain.end());
                nb.chains.push_back(chain);
                nb.chain_scores.push_back(b.chain_scores[ci]);
                nb.bucket_score += b.chain_scores[ci];
            }
        }
        if (!nb.events.empty())
            out.push_back(std::move(nb));
    }
    sort_buckets(out);
    return out;
}

// ---------------------------------------------------------------------------
// Family selectors

struct FacetParams {
    double flat_threshold = kDefaultFlatThreshold;
    double partial_overlap = kDefaultPartialOverlap;
};

inline bool is_family_selector(const std::string& s) {
    return s == "+slope" || s == "-slope" || s == "flat";
}

inline std::set<std::string> select_family(const std::string& selector,
                                           const std::map<std::string, LabelStats>& stats,
                                           double flat_threshold = kDefaultFlatThreshold) {
    std::set<std::string> out;
    for (const auto& [label, st] : stats) {
        const bool hit = selector == "+slope"   ? st.mode > flat_threshold
                         : selector == "-slope" ? st.mode < -flat_threshold
                         : selector == "flat"   ? std::abs(st.mode) <= flat_threshold
                                                : false;
        if (hit)
            out.insert(label);
    }
    return out;
}

// Labels related to a query term: the family of a known label, the labels
// containing a known word, or the families a synonym expands to. Empty when
// the term is unknown.
inline std::set<std::string> related_labels(const std::string& term,
                                            const std::set<std::string>& labels,
                                            const std::map<std::string, LabelStats>& stats,
                                            const std::map<std::string, std::vector<std::string>>& synonyms,
                                            const FacetParams& params = {}) {
    auto family_of = [&](const std::string& desc, std::set<std::string>& out) {
        for (const auto& l : labels)
            if (descriptor_of(l) == desc)
                out.insert(l);
    };
    auto containing = [&](const std::string& word, std::set<std::string>& out) {
        for (const auto& l : labels)
            if (encode(l).words.contains(word))
                out.insert(l);
    };
    std::set<std::string> out;
    if (labels.contains(term)) {
        family_of(descriptor_of(term), out);
        return out;
    }
    containing(term, out);
    if (!out.empty())
        return out;
    const auto it = synonyms.find(term);
    if (it == synonyms.end())
        return out;
    for (const auto& target : it->second) {
        if (is_family_selector(target)) {
            for (const auto& l : select_family(target, stats, params.flat_threshold))
                family_of(descriptor_of(l), out);
        } else {
            containing(target, out);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// IQR hierarchy

enum class EdgeKind { Full, Partial };

inline std::string_view to_string(EdgeKind k) { return k == EdgeKind::Full ? "full" : "partial"; }

struct SubsumptionEdge {
    std::string hypernym;
    std::string hyponym;
    EdgeKind kind = EdgeKind::Full;

    bool operator==(const SubsumptionEdge&) const = default;
};

// Full edge when the hyponym's IQR lies inside the hypernym's (bounds
// inclusive, so identical IQRs give edges both ways). Otherwise a partial edge
// when the overlap covers at least `partial_overlap` of the hyponym's IQR.
inline std::vector<SubsumptionEdge> derive_hierarchy(const std::vector<LabelStats>& stats,
                                                     double partial_overlap = kDefaultPartialOverlap) {
    std::vector<SubsumptionEdge> out;
    for (const auto& a : stats)
        for (const auto& b : stats) {
            if (a.label == b.label)
                continue;
            if (a.iqr_low <= b.iqr_low && b.iqr_high <= a.iqr_high) {
                out.push_back({a.label, b.label, EdgeKind::Full});
                continue;
            }
            const double w = b.iqr_width();
            const double overlap = std::min(a.iqr_high, b.iqr_high) - std::max(a.iqr_low, b.iqr_low);
            if (w > 0.0 && overlap >= partial_overlap * w)
                out.push_back({a.label, b.label, EdgeKind::Partial});
        }
    return out;
}

}  // namespace trendsearch
