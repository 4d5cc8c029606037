#pragma once

// Tokenisation shared by the query parser and the index.

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace trendsearch {

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty())
                out.push_back(std::move(cur)), cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty())
        out.push_back(std::move(cur));
    return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i)
            out += sep;
        out += parts[i];
    }
    return out;
}

// Unpadded character trigrams of one word; empty for words under 3 chars.
inline std::vector<std::string> word_trigrams(std::string_view w) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i + 3 <= w.size(); ++i)
        out.emplace_back(w.substr(i, 3));
    return out;
}

// Token set of a text: lowercase words, and separately the trigrams of every
// word with at least 3 characters. Kept apart so a 3-letter word never
// collides with a trigram of a longer word.
struct EncodedText {
    std::set<std::string> words;
    std::set<std::string> trigrams;

    bool empty() const { return words.empty(); }
    bool operator==(const EncodedText&) const = default;
};

inline EncodedText encode(std::string_view text) {
    EncodedText out;
    for (auto& w : split_words(to_lower(text))) {
        for (auto& g : word_trigrams(w))
            out.trigrams.insert(std::move(g));
        out.words.insert(std::move(w));
    }
    return out;
}

// Boundary-padded trigram set used for typo matching.
inline std::set<std::string> padded_trigrams(std::string_view w) {
    const std::string p = " " + std::string(w) + " ";
    std::set<std::string> out;
    for (std::size_t i = 0; i + 3 <= p.size(); ++i)
        out.insert(p.substr(i, 3));
    return out;
}

// Share of the candidate's padded trigrams that also occur in the query word.
// "tankng" vs "tanking" shares 4 of the 7 trigrams of "tanking".
inline double trigram_similarity(std::string_view query_word, std::string_view candidate) {
    const auto q = padded_trigrams(query_word);
    const auto c = padded_trigrams(candidate);
    if (c.empty())
        return 0.0;
    std::size_t common = 0;
    for (const auto& g : c)
        common += q.count(g);
    return static_cast<double>(common) / static_cast<double>(c.size());
}

inline constexpr double kDefaultFuzzyThreshold = 0.5;
inline constexpr std::size_t kMinFuzzyWordLength = 3;

// Vocabulary words within the fuzzy threshold of word, best first (ties by
// word). Exact matches are excluded; short words never fuzzy-match.
inline std::vector<std::string> fuzzy_candidates(std::string_view word,
                                                 const std::set<std::string>& vocabulary,
                                                 double threshold = kDefaultFuzzyThreshold) {
    std::vector<std::pair<double, std::string>> scored;
    if (word.size() < kMinFuzzyWordLength)
        return {};
    for (const auto& v : vocabulary) {
        if (v == word || v.size() < kMinFuzzyWordLength)
            continue;
        const double s = trigram_similarity(word, v);
        if (s >= threshold)
            scored.emplace_back(s, v);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<std::string> out;
    for (auto& [s, v] : scored)
        out.push_back(std::move(v));
    return out;
}

inline std::size_t non_space_chars(std::string_view s) {
    return static_cast<std::size_t>(std::count_if(
        s.begin(), s.end(), [](char c) { return !std::isspace(static_cast<unsigned char>(c)); }));
}

}  // namespace trendsearch
