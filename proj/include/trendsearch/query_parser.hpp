#pragma once

// Rule-based parser from a raw trend query to its structured form:
//   event_type, trend_terms (one list per sequence slot), attr, date_range,
// plus the tokens that could not be matched exactly.

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "trendsearch/date.hpp"
#include "trendsearch/error.hpp"
#include "trendsearch/text.hpp"

namespace trendsearch {

enum class EventType { Single, Sequence };

inline std::string_view to_string(EventType t) {
    return t == EventType::Single ? "single" : "sequence";
}

// Half-open [gte, lt); either bound may be open.
struct DateRange {
    std::optional<Date> gte;
    std::optional<Date> lt;

    bool empty() const { return gte && lt && !(*gte < *lt); }
    // Event interval [start, end) intersects the range.
    bool intersects(Date start, Date end) const {
        if (lt && !(start < *lt))
            return false;
        if (gte && !(*gte < end))
            return false;
        return true;
    }
    bool operator==(const DateRange&) const = default;
};

enum class TokenRole { Stop, Trend, Attr, Date, Inexact, Separator };

inline std::string_view to_string(TokenRole r) {
    switch (r) {
        case TokenRole::Stop: return "stop";
        case TokenRole::Trend: return "trend";
        case TokenRole::Attr: return "attr";
        case TokenRole::Date: return "date";
        case TokenRole::Inexact: return "inexact";
        case TokenRole::Separator: return "separator";
    }
    return "stop";
}

struct ParsedToken {
    std::string text;
    TokenRole role = TokenRole::Stop;
};

struct ParsedQuery {
    EventType event_type = EventType::Single;
    std::vector<std::vector<std::string>> trend_terms;
    std::optional<std::string> attr;  // resolved ticker
    std::string attr_text;            // the words that named it
    std::optional<DateRange> date_range;
    std::vector<std::string> inexact_terms;
    std::vector<ParsedToken> tokens;  // every query token with its role

    std::size_t slot_count() const { return trend_terms.size(); }
};

struct ChartMeta {
    std::string ticker;
    std::string company;
    std::vector<std::string> aliases;
};

struct ParserResources {
    std::set<std::string> vocabulary;   // words occurring in stored labels
    std::set<std::string> label_words;  // model label words, indexed or not
    std::map<std::string, std::vector<std::string>> synonyms;
    std::vector<std::vector<std::string>> stop_phrases;
    std::vector<ChartMeta> metadata;
    double fuzzy_threshold = kDefaultFuzzyThreshold;
};

// ---------------------------------------------------------------------------
// Resource loading

inline std::map<std::string, std::vector<std::string>> load_synonyms(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open synonym table " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("synonym table " + path + ": " + e.what());
    }
    if (!j.is_object())
        throw InputError("synonym table " + path + " must be a JSON object");
    std::map<std::string, std::vector<std::string>> out;
    for (auto& [k, v] : j.items()) {
        if (!v.is_array())
            throw InputError("synonym entry '" + k + "' must be a list");
        auto& targets = out[to_lower(k)];
        for (auto& t : v)
            targets.push_back(to_lower(t.get<std::string>()));
    }
    return out;
}

inline std::vector<std::vector<std::string>> parse_stop_phrases(std::istream& in) {
    std::vector<std::vector<std::string>> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto t = trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        out.push_back(split_words(to_lower(t)));
    }
    return out;
}

inline std::vector<std::vector<std::string>> load_stop_phrases(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open stop-phrase list " + path);
    return parse_stop_phrases(in);
}

// ---------------------------------------------------------------------------
// Tokenising and lemmatising

// Lowercase words; commas become their own token, other punctuation is dropped.
inline std::vector<std::string> query_tokens(std::string_view raw) {
    std::string s = to_lower(raw);
    for (std::size_t p; (p = s.find("'s")) != std::string::npos;)
        s.erase(p, 2);
    std::string cleaned;
    for (char c : s) {
        const auto u = static_cast<unsigned char>(c);
        if (c == ',')
            cleaned += " , ";
        else if (std::isalnum(u) || c == '-')
            cleaned += c;
        else
            cleaned += ' ';
    }
    return split_words(cleaned);
}

inline const std::map<std::string, std::string>& irregular_verbs() {
    static const std::map<std::string, std::string> m{
        {"fell", "falling"},   {"fallen", "falling"}, {"rose", "rising"},  {"risen", "rising"},
        {"sank", "sinking"},   {"sunk", "sinking"},   {"grew", "growing"}, {"grown", "growing"},
        {"slid", "sliding"},   {"dove", "diving"},    {"lost", "losing"},  {"shrank", "shrinking"},
        {"shrunk", "shrinking"}};
    return m;
}

namespace detail {

inline bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

inline void gerund_forms(const std::string& w, std::vector<std::string>& out) {
    if (w.size() < 2)
        return;
    out.push_back(w + "ing");
    if (w.back() == 'e')
        out.push_back(w.substr(0, w.size() - 1) + "ing");
    const std::size_t n = w.size();
    if (n >= 3 && !is_vowel(w[n - 1]) && is_vowel(w[n - 2]) && !is_vowel(w[n - 3]))
        out.push_back(w + w.back() + "ing");
}

}  // namespace detail

// Candidate base forms for a word, most specific first: irregular map, the
// word as a gerund, past tense and plural/third-person stripped.
inline std::vector<std::string> lemma_candidates(const std::string& w) {
    std::vector<std::string> out;
    if (auto it = irregular_verbs().find(w); it != irregular_verbs().end())
        out.push_back(it->second);
    if (w.size() > 3 && w.ends_with("ing"))
        return out;
    if (w.size() > 3 && w.ends_with("ed")) {
        const auto stem = w.substr(0, w.size() - 2);
        out.push_back(stem + "ing");
        out.push_back(stem.substr(0, stem.size() - 1) + "ing");  // "dropped" -> "dropping" too
        detail::gerund_forms(w.substr(0, w.size() - 1), out);      // "increased" -> "increase"
    } else if (w.size() > 3 && w.ends_with("s") && !w.ends_with("ss")) {
        const auto base = w.substr(0, w.size() - 1);
        out.push_back(base);
        detail::gerund_forms(base, out);
    } else {
        detail::gerund_forms(w, out);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dates

inline bool is_year_token(std::string_view t) {
    if (t.size() != 4 || !std::all_of(t.begin(), t.end(), ::isdigit))
        return false;
    const int y = std::stoi(std::string(t));
    return y >= 1800 && y <= 2200;
}

inline DateRange month_range(int year, unsigned month) {
    const Date first = Date::from_ymd(year, month, 1);
    const Date next = month == 12 ? Date::from_ymd(year + 1, 1, 1) : Date::from_ymd(year, month + 1, 1);
    return {first, next};
}

inline DateRange year_range(int year) {
    return {Date::from_ymd(year, 1, 1), Date::from_ymd(year + 1, 1, 1)};
}

namespace detail {

struct DateMatch {
    std::size_t consumed = 0;  // tokens used, including the preposition
    DateRange range;
};

// A date operand at tokens[i]: "M Y", "Y", or an ISO date. Returns the range
// the operand denotes and how many tokens it used.
inline std::optional<std::pair<std::size_t, DateRange>> date_operand(
    const std::vector<std::string>& t, std::size_t i, bool& exact_day) {
    exact_day = false;
    if (i >= t.size())
        return std::nullopt;
    if (auto d = Date::try_parse(t[i])) {
        exact_day = true;
        return std::pair{std::size_t{1}, DateRange{*d, *d + 1}};
    }
    if (is_year_token(t[i]))
        return std::pair{std::size_t{1}, year_range(std::stoi(t[i]))};
    if (const unsigned m = month_from_name(t[i]); m && i + 1 < t.size() && is_year_token(t[i + 1]))
        return std::pair{std::size_t{2}, month_range(std::stoi(t[i + 1]), m)};
    return std::nullopt;
}

inline std::optional<DateMatch> match_date(const std::vector<std::string>& t, std::size_t i) {
    static const std::set<std::string> preps{"before", "after", "since", "in", "during"};
    bool exact_day = false;
    if (preps.contains(t[i])) {
        auto op = date_operand(t, i + 1, exact_day);
        if (!op)
            return std::nullopt;
        const auto& r = op->second;
        DateMatch m{op->first + 1, {}};
        if (t[i] == "before")
            m.range.lt = *r.gte;
        else if (t[i] == "after")
            m.range.gte = exact_day ? *r.gte + 1 : *r.lt;
        else if (t[i] == "since")
            m.range.gte = exact_day ? *r.gte : *r.lt;
        else
            m.range = r;
        return m;
    }
    if (auto op = date_operand(t, i, exact_day); op && !exact_day)
        return DateMatch{op->first, op->second};
    return std::nullopt;
}

}  // namespace detail

// Parses one date phrase on its own; nullopt when it is not a supported form.
inline std::optional<DateRange> parse_date_range(std::string_view phrase) {
    const auto t = query_tokens(phrase);
    if (t.empty())
        return std::nullopt;
    auto m = detail::match_date(t, 0);
    if (!m || m->consumed != t.size())
        return std::nullopt;
    return m->range;
}

// ---------------------------------------------------------------------------
// Parsing

enum class TermMatch { Exact, Synonym, Unindexed, Fuzzy, None };

struct TermClass {
    TermMatch match = TermMatch::None;
    std::string term;  // vocabulary word for exact matches, the raw word otherwise
};

inline TermClass classify_term(const std::string& w, const ParserResources& res) {
    if (res.vocabulary.contains(w))
        return {TermMatch::Exact, w};
    const auto lemmas = lemma_candidates(w);
    for (const auto& l : lemmas)
        if (res.vocabulary.contains(l))
            return {TermMatch::Exact, l};
    if (res.synonyms.contains(w))
        return {TermMatch::Synonym, w};
    for (const auto& l : lemmas)
        if (res.synonyms.contains(l))
            return {TermMatch::Synonym, l};
    if (res.label_words.contains(w))
        return {TermMatch::Unindexed, w};
    for (const auto& l : lemmas)
        if (res.label_words.contains(l))
            return {TermMatch::Unindexed, l};
    if (std::any_of(w.begin(), w.end(), ::isalpha) &&
        !fuzzy_candidates(w, res.vocabulary, res.fuzzy_threshold).empty())
        return {TermMatch::Fuzzy, w};
    return {TermMatch::None, w};
}

namespace detail {

inline const std::set<std::string>& relative_time_words() {
    static const std::set<std::string> s{"recently", "lately", "recent", "today", "yesterday",
                                         "ytd"};
    return s;
}

inline const std::set<std::string>& relative_time_units() {
    static const std::set<std::string> s{"year", "years", "month", "months", "week",
                                         "weeks", "quarter", "decade", "days"};
    return s;
}

}  // namespace detail

inline ParsedQuery parse(std::string_view raw, const ParserResources& res) {
    auto words = query_tokens(raw);
    ParsedQuery q;
    const std::size_t n = words.size();
    std::vector<std::optional<TokenRole>> role(n);
    std::vector<std::string> term(n);  // normalized form for trend tokens

    // "went up" -> "up"
    static const std::set<std::string> motion{"went", "go", "goes", "going", "gone", "moved",
                                              "move", "moving", "trended", "trending", "headed"};
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (motion.contains(words[i]) && (words[i + 1] == "up" || words[i + 1] == "down"))
            role[i] = TokenRole::Stop;
    // "followed by" -> "then"
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (words[i] == "followed" && words[i + 1] == "by") {
            role[i] = TokenRole::Stop;
            words[i + 1] = "then";
        }

    // Attribute: longest alias n-gram, first occurrence.
    std::vector<std::pair<std::vector<std::string>, std::string>> aliases;
    for (const auto& m : res.metadata) {
        aliases.emplace_back(query_tokens(m.ticker), m.ticker);
        aliases.emplace_back(query_tokens(m.company), m.ticker);
        for (const auto& a : m.aliases)
            aliases.emplace_back(query_tokens(a), m.ticker);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (role[i])
            continue;
        std::size_t best_len = 0;
        std::string best_ticker;
        for (const auto& [toks, ticker] : aliases) {
            if (toks.empty() || toks.size() <= best_len || i + toks.size() > n)
                continue;
            bool ok = true;
            for (std::size_t k = 0; k < toks.size() && ok; ++k)
                ok = !role[i + k] && words[i + k] == toks[k];
            if (ok) {
                best_len = toks.size();
                best_ticker = ticker;
            }
        }
        if (!best_len)
            continue;
        std::vector<std::string> span(words.begin() + i, words.begin() + i + best_len);
        if (!q.attr) {
            q.attr = best_ticker;
            q.attr_text = join(span, " ");
            for (std::size_t k = 0; k < best_len; ++k)
                role[i + k] = TokenRole::Attr;
        } else if (best_ticker != *q.attr) {
            // a second, different chart: not supported
            q.inexact_terms.push_back(join(span, " "));
            for (std::size_t k = 0; k < best_len; ++k)
                role[i + k] = TokenRole::Inexact;
        } else {
            for (std::size_t k = 0; k < best_len; ++k)
                role[i + k] = TokenRole::Attr;
        }
        i += best_len - 1;
    }

    // Dates and relative-time phrases.
    static const std::set<std::string> date_preps{"before", "after", "since", "during"};
    for (std::size_t i = 0; i < n; ++i) {
        if (role[i])
            continue;
        if (auto m = detail::match_date(words, i);
            m && std::all_of(role.begin() + i, role.begin() + i + m->consumed,
                             [](auto& r) { return !r.has_value(); })) {
            std::vector<std::string> span(words.begin() + i, words.begin() + i + m->consumed);
            DateRange merged = m->range;
            if (q.date_range) {
                const auto& p = *q.date_range;
                if (p.gte && (!merged.gte || *merged.gte < *p.gte))
                    merged.gte = p.gte;
                if (p.lt && (!merged.lt || *p.lt < *merged.lt))
                    merged.lt = p.lt;
            }
            const TokenRole r = merged.empty() ? TokenRole::Inexact : TokenRole::Date;
            if (r == TokenRole::Date)
                q.date_range = merged;
            else
                q.inexact_terms.push_back(join(span, " "));
            for (std::size_t k = 0; k < m->consumed; ++k)
                role[i + k] = r;
            i += m->consumed - 1;
            continue;
        }
        if (detail::relative_time_words().contains(words[i])) {
            role[i] = TokenRole::Inexact;
            q.inexact_terms.push_back(words[i]);
            continue;
        }
        static const std::set<std::string> rel_heads{"last", "past", "this", "previous", "next"};
        if (rel_heads.contains(words[i]) && i + 1 < n && !role[i + 1] &&
            detail::relative_time_units().contains(words[i + 1])) {
            role[i] = role[i + 1] = TokenRole::Inexact;
            q.inexact_terms.push_back(words[i] + " " + words[i + 1]);
            ++i;
            continue;
        }
        if (date_preps.contains(words[i])) {
            // a date preposition without a supported operand
            role[i] = TokenRole::Inexact;
            std::string phrase = words[i];
            if (i + 1 < n && !role[i + 1] && month_from_name(words[i + 1])) {
                phrase += " " + words[i + 1];
                role[++i] = TokenRole::Inexact;
            }
            q.inexact_terms.push_back(phrase);
        }
    }

    // Stop phrases, longest first.
    for (std::size_t i = 0; i < n; ++i) {
        if (role[i])
            continue;
        std::size_t best = 0;
        for (const auto& sp : res.stop_phrases) {
            if (sp.size() <= best || i + sp.size() > n)
                continue;
            bool ok = true;
            for (std::size_t k = 0; k < sp.size() && ok; ++k)
                ok = !role[i + k] && words[i + k] == sp[k];
            if (ok)
                best = sp.size();
        }
        for (std::size_t k = 0; k < best; ++k)
            role[i + k] = TokenRole::Stop;
        if (best)
            i += best - 1;
    }

    // Trend terms and separators.
    for (std::size_t i = 0; i < n; ++i) {
        if (role[i])
            continue;
        if (words[i] == "then" || words[i] == ",") {
            role[i] = TokenRole::Separator;
            continue;
        }
        const auto c = classify_term(words[i], res);
        switch (c.match) {
            case TermMatch::Exact:
                role[i] = TokenRole::Trend;
                term[i] = c.term;
                break;
            case TermMatch::Synonym:
            case TermMatch::Unindexed:
            case TermMatch::Fuzzy:
                role[i] = TokenRole::Trend;
                term[i] = c.term;
                if (!res.vocabulary.contains(c.term))
                    q.inexact_terms.push_back(c.term);
                break;
            case TermMatch::None:
                role[i] = TokenRole::Inexact;
                q.inexact_terms.push_back(words[i]);
                break;
        }
    }

    // Slots: split on "then"; a comma splits only between two trend terms.
    auto neighbour_is_trend = [&](std::size_t i, int dir) {
        for (auto j = static_cast<long>(i) + dir; j >= 0 && j < static_cast<long>(n); j += dir) {
            const auto r = *role[static_cast<std::size_t>(j)];
            if (r == TokenRole::Stop)
                continue;
            return r == TokenRole::Trend;
        }
        return false;
    };
    std::vector<std::string> slot;
    auto flush = [&] {
        if (!slot.empty())
            q.trend_terms.push_back(std::move(slot));
        slot.clear();
    };
    for (std::size_t i = 0; i < n; ++i) {
        if (*role[i] == TokenRole::Trend) {
            if (std::find(slot.begin(), slot.end(), term[i]) == slot.end())
                slot.push_back(term[i]);
        } else if (*role[i] == TokenRole::Separator) {
            if (words[i] == "then" || (neighbour_is_trend(i, -1) && neighbour_is_trend(i, +1)))
                flush();
            else
                role[i] = TokenRole::Stop;
        }
    }
    flush();
    q.event_type = q.trend_terms.size() >= 2 ? EventType::Sequence : EventType::Single;

    for (std::size_t i = 0; i < n; ++i)
        q.tokens.push_back({words[i], *role[i]});

    if (q.trend_terms.empty() && !q.attr && !q.date_range && q.inexact_terms.empty())
        throw InputError("no query terms");
    return q;
}

// Canonical text that parses back to the same slots, attr and date range.
inline std::string render(const ParsedQuery& q) {
    std::vector<std::string> slots;
    for (const auto& s : q.trend_terms)
        slots.push_back(join(s, " "));
    std::string out = join(slots, " then ");
    if (q.attr)
        out += " " + to_lower(*q.attr);
    if (q.date_range) {
        if (q.date_range->gte)
            out += " since " + q.date_range->gte->iso();
        if (q.date_range->lt)
            out += " before " + q.date_range->lt->iso();
    }
    return trim(out);
}

}  // namespace trendsearch
