#pragma once

// Multi-slot trend sequences: contiguous sub-sequences of the query slots are
// joined per chart into chronological chains and scored with an offset penalty.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "trendsearch/error.hpp"
#include "trendsearch/search_index.hpp"

namespace trendsearch {

inline constexpr int kDefaultMaxGap = 14;  // days

struct SubSequence {
    std::vector<std::size_t> slots;  // consecutive slot indices
    std::size_t offset = 0;          // index of the first slot

    bool operator==(const SubSequence&) const = default;
};

// All contiguous runs of the slot list, longest first, then by offset.
inline std::vector<SubSequence> enumerate_subsequences(std::size_t slot_count) {
    if (slot_count < 2)
        throw InputError("a sequence query needs at least 2 slots");
    std::vector<SubSequence> out;
    for (std::size_t len = slot_count; len >= 1; --len)
        for (std::size_t off = 0; off + len <= slot_count; ++off) {
            SubSequence s{{}, off};
            for (std::size_t k = 0; k < len; ++k)
                s.slots.push_back(off + k);
            out.push_back(std::move(s));
        }
    return out;
}

inline double penalized_score(double score_0, std::size_t l_seq, std::size_t l_q,
                              std::size_t offset) {
    if (l_seq < 1 || l_seq > l_q)
        throw InputError("matched length must be in [1, query length]");
    const double r = static_cast<double>(l_seq) / static_cast<double>(l_q + offset);
    return score_0 * r * r;
}

struct SequenceMatch {
    std::string chart_id;
    std::vector<ScoredMatch> events;  // chronological, slot_index set
    std::size_t l_seq = 0;
    std::size_t offset_seq = 0;
    double score_0 = 0.0;
    double score = 0.0;
};

inline bool can_follow(const LabeledEvent& prev, const LabeledEvent& next, int max_gap) {
    const long gap = next.start_date - prev.end_date;
    return gap >= 0 && gap <= max_gap;
}

namespace detail {

inline double chain_sum(const std::vector<ScoredMatch>& chain) {
    double s = 0.0;
    for (const auto& m : chain)
        s += m.composite;
    return s;
}

}  // namespace detail

// Chains of one event per sub-sequence slot, per chart, each link satisfying
// 0 <= start(next) - end(prev) <= max_gap. Of all valid chains, the best one
// per (chart, first-event start) is kept; equal scores go to the smaller doc
// ids. per_slot[k] holds the scored matches of query slot k.
inline std::vector<SequenceMatch> join_sequences(const Index& idx,
                                                 const std::vector<std::vector<ScoredMatch>>& per_slot,
                                                 const SubSequence& sub, std::size_t l_q,
                                                 int max_gap = kDefaultMaxGap) {
    if (max_gap < 0)
        throw InputError("max_gap must be non-negative");
    if (sub.slots.empty() || sub.slots.back() >= per_slot.size())
        throw InputError("sub-sequence refers to a missing slot");

    // chart -> position in sub -> matches
    std::map<std::string, std::vector<std::vector<ScoredMatch>>> charts;
    for (std::size_t k = 0; k < sub.slots.size(); ++k)
        for (auto m : per_slot[sub.slots[k]]) {
            m.slot_index = static_cast<int>(sub.slots[k]);
            auto& v = charts[idx.doc(m.doc).event.chart_id];
            v.resize(sub.slots.size());
            v[k].push_back(m);
        }

    std::vector<SequenceMatch> out;
    const std::size_t len = sub.slots.size();
    for (auto& [chart, cols] : charts) {
        if (cols.size() < len || std::any_of(cols.begin(), cols.end(),
                                             [](const auto& c) { return c.empty(); }))
            continue;
        for (auto& c : cols)
            std::sort(c.begin(), c.end(), [](auto& a, auto& b) { return a.doc < b.doc; });

        // best[k][i]: best suffix score from cols[k][i]; next[k][i]: chosen successor
        std::vector<std::vector<double>> best(len);
        std::vector<std::vector<long>> next(len);
        for (std::size_t k = len; k-- > 0;) {
            best[k].assign(cols[k].size(), -1.0);
            next[k].assign(cols[k].size(), -1);
            for (std::size_t i = 0; i < cols[k].size(); ++i) {
                if (k + 1 == len) {
                    best[k][i] = cols[k][i].composite;
                    continue;
                }
                const auto& ev = idx.doc(cols[k][i].doc).event;
                for (std::size_t j = 0; j < cols[k + 1].size(); ++j) {
                    if (best[k + 1][j] < 0.0 || !can_follow(ev, idx.doc(cols[k + 1][j].doc).event, max_gap))
                        continue;
                    if (next[k][i] < 0 || best[k + 1][j] > best[k + 1][static_cast<std::size_t>(next[k][i])])
                        next[k][i] = static_cast<long>(j);
                }
                if (next[k][i] >= 0)
                    best[k][i] = cols[k][i].composite +
                                 best[k + 1][static_cast<std::size_t>(next[k][i])];
            }
        }

        std::map<Date, SequenceMatch> by_start;
        for (std::size_t i = 0; i < cols[0].size(); ++i) {
            if (best[0][i] < 0.0)
                continue;
            SequenceMatch sm;
            sm.chart_id = chart;
            for (std::size_t k = 0, at = i;; ++k) {
                sm.events.push_back(cols[k][at]);
                if (k + 1 == len)
                    break;
                at = static_cast<std::size_t>(next[k][at]);
            }
            sm.l_seq = len;
            sm.offset_seq = sub.offset;
            sm.score_0 = detail::chain_sum(sm.events);
            sm.score = penalized_score(sm.score_0, len, l_q, sub.offset);
            const Date start = idx.doc(sm.events.front().doc).event.start_date;
            auto it = by_start.find(start);
            if (it == by_start.end() || sm.score_0 > it->second.score_0)
                by_start[start] = std::move(sm);
        }
        for (auto& [d, sm] : by_start)
            out.push_back(std::move(sm));
    }
    return out;
}

// Every sub-sequence joined, full and partial matches together.
inline std::vector<SequenceMatch> search_sequences(const Index& idx,
                                                   const std::vector<std::vector<ScoredMatch>>& per_slot,
                                                   int max_gap = kDefaultMaxGap) {
    std::vector<SequenceMatch> out;
    for (const auto& sub : enumerate_subsequences(per_slot.size())) {
        auto ms = join_sequences(idx, per_slot, sub, per_slot.size(), max_gap);
        out.insert(out.end(), std::make_move_iterator(ms.begin()), std::make_move_iterator(ms.end()));
    }
    return out;
}

// One bucket per chart; bucket_score is the sum of the penalized chain scores
// and events are the chain members, best chain first.
inline std::vector<Bucket> bucket_sequences(const Index& idx, std::vector<SequenceMatch> matches) {
    std::sort(matches.begin(), matches.end(), [&](const SequenceMatch& a, const SequenceMatch& b) {
        if (a.score != b.score)
            return a.score > b.score;
        const auto sa = idx.doc(a.events.front().doc).event.start_date;
        const auto sb = idx.doc(b.events.front().doc).event.start_date;
        if (sa != sb)
            return sa < sb;
        return std::tie(a.offset_seq, a.l_seq) < std::tie(b.offset_seq, b.l_seq);
    });
    std::map<std::string, Bucket> by_chart;
    for (auto& m : matches) {
        auto& b = by_chart[m.chart_id];
        b.chart_id = m.chart_id;
        b.bucket_score += m.score;
        b.events.insert(b.events.end(), m.events.begin(), m.events.end());
        b.chains.push_back(std::move(m.events));
        b.chain_scores.push_back(m.score);
    }
    std::vector<Bucket> out;
    for (auto& [c, b] : by_chart)
        out.push_back(std::move(b));
    sort_buckets(out);
    return out;
}

}  // namespace trendsearch
