#include "semxc/descpipe.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <regex>
#include <set>
#include <unordered_set>

#include "semxc/error.hpp"
#include "semxc/io.hpp"
#include "semxc/rng.hpp"
#include "semxc/sparse.hpp"

namespace semxc {

using nlohmann::json;

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || std::isalnum(u) != 0;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (is_space(c)) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

// Lower-cased word with surrounding punctuation removed and in-word
// apostrophes deleted ("I'm" -> "im").
std::string bare_word(std::string_view token) {
    std::size_t b = 0, e = token.size();
    while (b < e && !is_alnum(token[b])) ++b;
    while (e > b && !is_alnum(token[e - 1])) --e;
    std::string out;
    for (char c : token.substr(b, e - b)) {
        if (c == '\'') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

constexpr std::string_view kEllipsis = "\xE2\x80\xA6";

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

// Count of non-overlapping occurrences of each phrase in the normalised
// token stream.
std::size_t phrase_hits(const std::string& normalised, const std::vector<std::string>& phrases) {
    std::size_t hits = 0;
    for (const auto& p : phrases) {
        const std::string needle = " " + join(tokenize(p), " ") + " ";
        if (needle.size() <= 2) continue;
        for (std::size_t pos = normalised.find(needle); pos != std::string::npos;
             pos = normalised.find(needle, pos + needle.size() - 1))
            ++hits;
    }
    return hits;
}

std::string normalise_tokens(std::string_view text) { return " " + join(tokenize(text), " ") + " "; }

const std::unordered_set<std::string>& closed_class() {
    static const std::unordered_set<std::string> words{
        // determiners and quantifiers
        "a", "an", "the", "this", "that", "these", "those", "some", "any", "each", "every", "no", "all", "both",
        "either", "neither", "few", "several", "many", "much", "more", "most", "less", "least", "other", "another",
        "such", "own", "same",
        // pronouns
        "i", "me", "my", "mine", "myself", "we", "us", "our", "ours", "ourselves", "you", "your", "yours",
        "yourself", "he", "him", "his", "himself", "she", "her", "hers", "herself", "it", "its", "itself", "they",
        "them", "their", "theirs", "themselves", "one", "someone", "something", "anyone", "anything",
        // wh-words
        "what", "which", "who", "whom", "whose", "where", "when", "why", "how", "whether",
        // prepositions and particles
        "of", "in", "on", "at", "by", "for", "from", "to", "with", "without", "into", "onto", "over", "under",
        "about", "above", "below", "between", "among", "through", "during", "before", "after", "against", "within",
        "across", "along", "around", "behind", "beyond", "near", "off", "out", "up", "down", "upon", "via", "per",
        "than", "like", "as",
        // conjunctions
        "and", "or", "but", "nor", "so", "yet", "if", "because", "although", "though", "while", "unless", "since",
        // common adverbs and adjectives
        "not", "very", "too", "also", "just", "only", "even", "still", "already", "again", "here", "there", "then",
        "now", "often", "always", "never", "sometimes", "well", "best", "better", "good", "great", "new", "old",
        "big", "small", "large", "little", "high", "low", "long", "short", "free", "first", "last", "next", "main",
        "whole", "real", "sure", "able", "necessary", "important", "common", "different", "various",
        // interjections
        "oh", "yes", "hello", "hi", "wow"};
    return words;
}

bool adjective_or_adverb_suffix(const std::string& w) {
    static const char* suffixes[] = {"ly", "ous", "ful", "ive", "able", "ible", "less", "ish"};
    if (w.size() <= 4) return false;
    for (const char* s : suffixes)
        if (ends_with(w, s)) return true;
    return false;
}

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

// Reject-class check evaluated on one text.
struct RejectCheck {
    bool fired = false;
    std::string detail;
};

RejectCheck check_reject(Heuristic h, std::string_view text, const RuleConfig& rules) {
    RejectCheck r;
    switch (h) {
        case Heuristic::kPunctDensity: {
            const std::size_t n = punctuation_count(text);
            r.fired = n > rules.max_punctuation;
            r.detail = "punctuation=" + std::to_string(n);
            break;
        }
        case Heuristic::kUrlCurrency:
            r.fired = has_url_or_currency(text);
            r.detail = r.fired ? "url or currency found" : "";
            break;
        case Heuristic::kInterrogative: {
            std::size_t n = 0;
            for (const auto& s : split_sentences(text)) {
                std::string t = s;
                while (!t.empty() && is_closer(t.back())) t.pop_back();
                if (!t.empty() && t.back() == '?') ++n;
            }
            r.fired = n > rules.max_interrogatives;
            r.detail = "questions=" + std::to_string(n);
            break;
        }
        case Heuristic::kAdNgram: {
            const std::size_t n = phrase_hits(normalise_tokens(text), rules.ad_ngrams);
            r.fired = n > 0;
            r.detail = "ad_ngrams=" + std::to_string(n);
            break;
        }
        case Heuristic::kProfanity: {
            const std::set<std::string> bad(rules.profanity.begin(), rules.profanity.end());
            std::size_t n = 0;
            for (const auto& t : split_ws(text)) n += bad.count(bare_word(t));
            r.fired = n > 0;
            r.detail = "profane=" + std::to_string(n);
            break;
        }
        case Heuristic::kSpam: {
            const double s = spam_score(text, rules);
            r.fired = s > rules.spam_threshold;
            r.detail = "spam_score=" + std::to_string(s);
            break;
        }
        case Heuristic::kFirstPerson: {
            const std::set<std::string> fp(rules.first_person.begin(), rules.first_person.end());
            std::size_t n = 0;
            for (const auto& t : split_ws(text)) n += fp.count(bare_word(t));
            r.fired = n > rules.max_first_person;
            r.detail = "first_person=" + std::to_string(n);
            break;
        }
        default:
            throw std::logic_error("not a reject heuristic");
    }
    return r;
}

std::size_t word_count(std::string_view sentence) {
    std::size_t n = 0;
    for (const auto& t : split_ws(sentence))
        if (std::any_of(t.begin(), t.end(), is_alnum)) ++n;
    return n;
}

}  // namespace

std::string to_string(Heuristic h) {
    switch (h) {
        case Heuristic::kIncompleteSentence: return "incomplete_sentence";
        case Heuristic::kPunctDensity: return "punct_density";
        case Heuristic::kUrlCurrency: return "url_currency";
        case Heuristic::kShortSentences: return "short_sentences";
        case Heuristic::kInterrogative: return "interrogative";
        case Heuristic::kAdNgram: return "ad_ngram";
        case Heuristic::kProfanity: return "profanity";
        case Heuristic::kSpam: return "spam";
        case Heuristic::kFirstPerson: return "first_person";
    }
    return "unknown";
}

bool is_dropping(Heuristic h) { return h == Heuristic::kIncompleteSentence || h == Heuristic::kShortSentences; }

std::vector<RawSnippet> parse_snippets(const std::string& jsonl, const std::string& source) {
    std::vector<RawSnippet> out;
    io::for_each_line(jsonl, [&](std::size_t line_no, std::string_view line) {
        const std::string where = source + ":" + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw InputError(where + ": invalid JSON: " + e.what());
        }
        if (!j.is_object()) throw InputError(where + ": expected an object");
        RawSnippet s;
        if (!j.contains("label_id") || !j["label_id"].is_string())
            throw InputError(where + ": missing string field 'label_id'");
        if (!j.contains("text") || !j["text"].is_string()) throw InputError(where + ": missing string field 'text'");
        s.label_id = j["label_id"].get<std::string>();
        s.text = j["text"].get<std::string>();
        if (auto it = j.find("rank"); it != j.end()) {
            if (!it->is_number_integer() || it->get<int>() < 1)
                throw InputError(where + ": 'rank' must be an integer >= 1");
            s.rank = it->get<int>();
        }
        out.push_back(std::move(s));
    });
    return out;
}

std::vector<RawSnippet> load_snippets(const std::filesystem::path& path) {
    return parse_snippets(io::read_file(path), path.string());
}

json RuleConfig::to_json() const {
    return json{{"lexicon_version", kLexiconVersion},
                {"max_punctuation", max_punctuation},
                {"max_interrogatives", max_interrogatives},
                {"max_first_person", max_first_person},
                {"min_sentence_words", min_sentence_words},
                {"spam_threshold", spam_threshold},
                {"dedup_min_chars", dedup_min_chars},
                {"ad_ngrams", ad_ngrams},
                {"profanity", profanity},
                {"promo_cues", promo_cues},
                {"first_person", first_person},
                {"spam_weights",
                 {{"bias", spam.bias},
                  {"exclamation_density", spam.exclamation_density},
                  {"ad_ngram_count", spam.ad_ngram_count},
                  {"caps_ratio", spam.caps_ratio},
                  {"promo_cue_count", spam.promo_cue_count},
                  {"placeholder_count", spam.placeholder_count}}}};
}

RuleConfig RuleConfig::from_json(const json& j) {
    if (!j.is_object()) throw InputError("rules: expected an object");
    RuleConfig r;
    try {
        if (j.contains("lexicon_version") && j["lexicon_version"].get<int>() != kLexiconVersion)
            throw ConsistencyError("rules: lexicon_version " + j["lexicon_version"].dump() + " does not match " +
                                   std::to_string(kLexiconVersion));
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
        };
        get("max_punctuation", r.max_punctuation);
        get("max_interrogatives", r.max_interrogatives);
        get("max_first_person", r.max_first_person);
        get("min_sentence_words", r.min_sentence_words);
        get("spam_threshold", r.spam_threshold);
        get("dedup_min_chars", r.dedup_min_chars);
        get("ad_ngrams", r.ad_ngrams);
        get("profanity", r.profanity);
        get("promo_cues", r.promo_cues);
        get("first_person", r.first_person);
        if (j.contains("spam_weights")) {
            const json& w = j["spam_weights"];
            auto getw = [&](const char* key, double& field) {
                if (w.contains(key)) field = w[key].get<double>();
            };
            getw("bias", r.spam.bias);
            getw("exclamation_density", r.spam.exclamation_density);
            getw("ad_ngram_count", r.spam.ad_ngram_count);
            getw("caps_ratio", r.spam.caps_ratio);
            getw("promo_cue_count", r.spam.promo_cue_count);
            getw("placeholder_count", r.spam.placeholder_count);
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("rules: ") + e.what());
    }
    if (!(r.spam_threshold >= 0.0 && r.spam_threshold <= 1.0))
        throw InputError("rules: spam_threshold must lie in [0, 1]");
    if (r.dedup_min_chars == 0) throw InputError("rules: dedup_min_chars must be positive");
    for (auto& w : r.profanity) w = lower(w);
    for (auto& w : r.first_person) w = lower(w);
    return r;
}

RuleConfig RuleConfig::load(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
        throw InputError(path.string() + ": invalid JSON: " + e.what());
    }
    return from_json(j);
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        std::string s = join(split_ws(cur), " ");
        if (!s.empty()) out.push_back(std::move(s));
        cur.clear();
    };
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '\n' || c == '\r') {
            flush();
            ++i;
            continue;
        }
        const bool ellipsis = text.substr(i, kEllipsis.size()) == kEllipsis;
        if (c == '.' || c == '!' || c == '?' || ellipsis) {
            std::size_t j = i;
            while (j < text.size()) {
                if (text[j] == '.' || text[j] == '!' || text[j] == '?' || is_closer(text[j])) {
                    ++j;
                } else if (text.substr(j, kEllipsis.size()) == kEllipsis) {
                    j += kEllipsis.size();
                } else {
                    break;
                }
            }
            cur.append(text.substr(i, j - i));
            i = j;
            if (i == text.size() || is_space(text[i])) flush();
            continue;
        }
        cur.push_back(c);
        ++i;
    }
    flush();
    return out;
}

std::size_t content_token_count(std::string_view sentence) {
    std::size_t n = 0;
    for (const auto& tok : split_ws(sentence)) {
        const std::string low = lower(tok);
        if (low.find("'re") != std::string::npos || low.find("'ve") != std::string::npos ||
            low.find("n't") != std::string::npos || low.find("'ll") != std::string::npos ||
            low.find("'m") != std::string::npos) {
            ++n;  // contracted auxiliary
            continue;
        }
        const std::string w = bare_word(tok);
        if (w.empty() || all_digits(w)) continue;
        if (!std::any_of(w.begin(), w.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)); }))
            continue;
        if (closed_class().count(w) || adjective_or_adverb_suffix(w)) continue;
        ++n;
    }
    return n;
}

bool is_incomplete_sentence(std::string_view sentence) {
    std::string s = trim(sentence);
    while (!s.empty() && is_closer(s.back())) s.pop_back();
    if (s.empty()) return true;
    if (ends_with(s, "...") || ends_with(s, kEllipsis)) return true;
    const char last = s.back();
    if (last != '.' && last != '!' && last != '?') return true;
    return content_token_count(s) < 2;
}

std::size_t punctuation_count(std::string_view text) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (c >= 0x80 || !std::ispunct(c) || c == '.') continue;
        if ((c == '\'' || c == '-') && i > 0 && i + 1 < text.size() && is_alnum(text[i - 1]) && is_alnum(text[i + 1]))
            continue;
        ++n;
    }
    return n;
}

bool has_url_or_currency(std::string_view text) {
    static const std::regex url(R"((https?://|www\.)\S+|\b[a-z0-9-]+\.(com|org|net|io|co|uk|edu|gov|info|biz)\b)",
                                std::regex::icase);
    static const std::regex money(
        R"((\$|£|€|¥)\s*\d|\d\s*(\$|£|€|¥)|\b(usd|eur|gbp|aud|cad|jpy|brl|clp|thb|inr)\b|\b\d+(\.\d+)?\s*(dollars|euros|pounds)\b)",
        std::regex::icase);
    const std::string s(text);
    return std::regex_search(s, url) || std::regex_search(s, money);
}

double spam_score(std::string_view text, const RuleConfig& rules) {
    const auto sentences = split_sentences(text);
    const double exclam = static_cast<double>(std::count(text.begin(), text.end(), '!')) /
                          static_cast<double>(std::max<std::size_t>(1, sentences.size()));
    const std::string norm = normalise_tokens(text);
    const double ads = static_cast<double>(phrase_hits(norm, rules.ad_ngrams));
    const double promos = static_cast<double>(phrase_hits(norm, rules.promo_cues));
    std::size_t words = 0, caps = 0;
    for (const auto& t : split_ws(text)) {
        std::string letters;
        for (char c : t)
            if (std::isalpha(static_cast<unsigned char>(c))) letters.push_back(c);
        if (letters.empty()) continue;
        ++words;
        if (letters.size() >= 2 && std::all_of(letters.begin(), letters.end(),
                                               [](char c) { return std::isupper(static_cast<unsigned char>(c)); }))
            ++caps;
    }
    const double caps_ratio = words ? static_cast<double>(caps) / static_cast<double>(words) : 0.0;
    static const std::regex placeholder(R"(<[^<>\s]+>)");
    const std::string s(text);
    const double placeholders = static_cast<double>(
        std::distance(std::sregex_iterator(s.begin(), s.end(), placeholder), std::sregex_iterator()));
    const SpamWeights& w = rules.spam;
    const double z = w.bias + w.exclamation_density * exclam + w.ad_ngram_count * ads + w.caps_ratio * caps_ratio +
                     w.promo_cue_count * promos + w.placeholder_count * placeholders;
    return 1.0 / (1.0 + std::exp(-z));
}

const HeuristicReport& CleanResult::report(Heuristic h) const {
    for (const auto& r : reports)
        if (r.heuristic == h) return r;
    throw std::out_of_range("no report for " + to_string(h));
}

CleanResult clean_description(const RawSnippet& snippet, const RuleConfig& rules) {
    CleanResult result;
    std::vector<std::string> kept = split_sentences(snippet.text);

    std::size_t incomplete = 0;
    std::erase_if(kept, [&](const std::string& s) {
        const bool drop = is_incomplete_sentence(s);
        incomplete += drop;
        return drop;
    });
    std::size_t short_ones = 0;
    std::erase_if(kept, [&](const std::string& s) {
        const bool drop = word_count(s) < rules.min_sentence_words;
        short_ones += drop;
        return drop;
    });
    const std::string retained = join(kept, " ");

    bool rejected = false;
    for (Heuristic h : kAllHeuristics) {
        HeuristicReport rep{h, false, {}};
        if (h == Heuristic::kIncompleteSentence) {
            rep.fired = incomplete > 0;
            rep.detail = "dropped=" + std::to_string(incomplete);
        } else if (h == Heuristic::kShortSentences) {
            rep.fired = short_ones > 0;
            rep.detail = "dropped=" + std::to_string(short_ones);
        } else {
            const RejectCheck on_original = check_reject(h, snippet.text, rules);
            rep.fired = on_original.fired;
            rep.detail = on_original.detail;
            if (!rep.fired && !retained.empty()) {
                const RejectCheck on_retained = check_reject(h, retained, rules);
                if (on_retained.fired) {
                    rep.fired = true;
                    rep.detail = on_retained.detail + " (retained text)";
                }
            }
            rejected = rejected || rep.fired;
        }
        result.reports.push_back(std::move(rep));
    }
    result.accepted = !rejected && !retained.empty();
    if (result.accepted) result.cleaned_text = retained;
    return result;
}

SubstringIndex::SubstringIndex(const std::vector<std::string>& documents) {
    for (const auto& d : documents) {
        text_ += d;
        text_.push_back('\0');
    }
    const std::size_t n = text_.size();
    suffixes_.resize(n);
    std::iota(suffixes_.begin(), suffixes_.end(), 0u);
    // Prefix doubling: rank[i] orders suffixes by their first 2^k bytes.
    std::vector<std::uint32_t> rank(n), next(n);
    for (std::size_t i = 0; i < n; ++i) rank[i] = static_cast<unsigned char>(text_[i]);
    for (std::size_t k = 1; n > 1; k <<= 1) {
        auto key = [&](std::uint32_t i) {
            const std::int64_t second = i + k < n ? static_cast<std::int64_t>(rank[i + k]) : -1;
            return std::pair<std::uint32_t, std::int64_t>(rank[i], second);
        };
        std::sort(suffixes_.begin(), suffixes_.end(), [&](std::uint32_t a, std::uint32_t b) { return key(a) < key(b); });
        next[suffixes_[0]] = 0;
        for (std::size_t i = 1; i < n; ++i)
            next[suffixes_[i]] = next[suffixes_[i - 1]] + (key(suffixes_[i - 1]) < key(suffixes_[i]) ? 1 : 0);
        rank.swap(next);
        if (rank[suffixes_[n - 1]] == n - 1) break;
    }
}

bool SubstringIndex::contains(std::string_view needle) const {
    if (needle.empty()) return true;
    if (needle.find('\0') != std::string_view::npos) return false;
    const std::string_view hay(text_);
    auto it = std::lower_bound(suffixes_.begin(), suffixes_.end(), needle, [&](std::uint32_t s, std::string_view nd) {
        return hay.substr(s, nd.size()) < nd;
    });
    return it != suffixes_.end() && hay.substr(*it, needle.size()) == needle;
}

bool SubstringIndex::shares_run(std::string_view text, std::size_t min_chars) const {
    if (min_chars == 0) return true;
    if (text.size() < min_chars) return false;
    for (std::size_t i = 0; i + min_chars <= text.size(); ++i)
        if (contains(text.substr(i, min_chars))) return true;
    return false;
}

std::vector<Description> dedup_against_corpus(const std::vector<Description>& descriptions,
                                              const std::vector<Document>& documents, std::size_t min_match_chars) {
    std::vector<std::string> texts;
    texts.reserve(documents.size());
    for (const auto& d : documents) texts.push_back(d.text);
    const SubstringIndex index(texts);
    std::vector<Description> out;
    for (const auto& d : descriptions)
        if (!index.shares_run(d.text, min_match_chars)) out.push_back(d);
    return out;
}

namespace {

std::string field_value(std::string_view v) {
    std::string s = join(split_ws(v), " ");
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

std::string list_value(const std::vector<std::string>& items) {
    std::vector<std::string> vals;
    for (const auto& i : items) {
        std::string v = field_value(i);
        if (!v.empty()) vals.push_back(std::move(v));
    }
    return join(vals, ", ");
}

std::vector<std::string> resolve_names(const std::vector<std::string>& ids, const LabelSet* labels) {
    std::vector<std::string> out;
    for (const auto& id : ids) {
        const LabelRecord* r = labels ? labels->find(id) : nullptr;
        out.push_back(r ? r->name : id);
    }
    return out;
}

constexpr std::pair<const char*, int> kBlockKeys[] = {
    {"Label is ", 0}, {"Description is ", 1}, {"Parents are ", 2}, {"Children are ", 3},
    {"Alternate Label Names are ", 4}};

}  // namespace

std::string format_with_hierarchy(const LabelRecord& label, std::string_view description_text,
                                  const LabelSet* labels) {
    std::vector<std::string> lines;
    lines.push_back("Label is " + field_value(label.name) + ".");
    if (std::string d = field_value(description_text); !d.empty()) lines.push_back("Description is " + d + ".");
    if (std::string p = list_value(resolve_names(label.parents, labels)); !p.empty())
        lines.push_back("Parents are " + p + ".");
    if (std::string c = list_value(resolve_names(label.children, labels)); !c.empty())
        lines.push_back("Children are " + c + ".");
    if (std::string a = list_value(label.alternate_names); !a.empty())
        lines.push_back("Alternate Label Names are " + a + ".");
    return join(lines, "\n");
}

FormattedBlock parse_formatted_block(std::string_view text) {
    FormattedBlock block;
    bool has_name = false;
    auto split_list = [](const std::string& v) {
        std::vector<std::string> out;
        std::size_t start = 0;
        for (std::size_t pos = v.find(", "); pos != std::string::npos; pos = v.find(", ", start)) {
            out.push_back(v.substr(start, pos - start));
            start = pos + 2;
        }
        out.push_back(v.substr(start));
        return out;
    };
    io::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
        std::string line = trim(raw);
        if (line.empty() || line.back() != '.')
            throw InputError("formatted block line " + std::to_string(line_no) + ": expected a trailing period");
        line.pop_back();
        for (const auto& [key, slot] : kBlockKeys) {
            const std::string_view k(key);
            if (line.compare(0, k.size(), k) != 0) continue;
            const std::string value = line.substr(k.size());
            switch (slot) {
                case 0: block.name = value; has_name = true; break;
                case 1: block.description = value; break;
                case 2: block.parents = split_list(value); break;
                case 3: block.children = split_list(value); break;
                case 4: block.alternate_names = split_list(value); break;
            }
            return;
        }
        throw InputError("formatted block line " + std::to_string(line_no) + ": unknown field in '" + line + "'");
    });
    if (!has_name) throw InputError("formatted block has no 'Label is' line");
    return block;
}

std::vector<Constituent> split_label_constituents(std::string_view label_name) {
    static const std::unordered_set<std::string> stop{
        "a", "an", "the", "of", "in", "on", "at", "by", "for", "from", "to", "with", "and", "or", "&", "about",
        "into", "over", "under", "between", "during", "without", "within", "per", "vs", "via", "as"};
    static const std::unordered_set<std::string> months{
        "january", "february", "march", "april", "may", "june", "july", "august", "september", "october",
        "november", "december"};
    auto numeric = [](const std::string& w) {
        if (all_digits(w)) return true;
        if (w.size() >= 2 && w.back() == 's' && all_digits(std::string_view(w).substr(0, w.size() - 1))) return true;
        if (w.size() >= 3) {
            const std::string_view suf = std::string_view(w).substr(w.size() - 2);
            if ((suf == "st" || suf == "nd" || suf == "rd" || suf == "th") &&
                all_digits(std::string_view(w).substr(0, w.size() - 2)))
                return true;
        }
        return false;
    };

    std::vector<Constituent> out;
    std::vector<std::string> phrase;
    auto flush = [&] {
        if (!phrase.empty()) out.push_back({join(phrase, " "), ConstituentKind::kPhrase});
        phrase.clear();
    };
    const std::vector<std::string> toks = split_ws(label_name);
    for (std::size_t i = 0; i < toks.size(); ++i) {
        std::string tok = toks[i];
        bool boundary_after = false;
        while (!tok.empty() && (tok.back() == ',' || tok.back() == ';' || tok.back() == ':')) {
            tok.pop_back();
            boundary_after = true;
        }
        if (tok.empty()) {
            flush();
            continue;
        }
        const std::string low = lower(tok);
        const bool month_run = months.count(low) && i + 1 < toks.size() && numeric(lower(bare_word(toks[i + 1])));
        if (numeric(low) || month_run) {
            flush();
            // Absorb following numbers ("July 4, 1776").
            std::vector<std::string> ent{tok};
            while (i + 1 < toks.size()) {
                std::string nxt = toks[i + 1];
                while (!nxt.empty() && (nxt.back() == ',' || nxt.back() == ';' || nxt.back() == ':')) nxt.pop_back();
                if (!numeric(lower(nxt))) break;
                ent.push_back(nxt);
                ++i;
            }
            out.push_back({join(ent, " "), ConstituentKind::kEntity});
            continue;
        }
        if (stop.count(low)) {
            flush();
            continue;
        }
        phrase.push_back(tok);
        if (boundary_after) flush();
    }
    flush();
    return out;
}

const std::map<std::string, std::vector<std::string>>& default_thesaurus() {
    static const std::map<std::string, std::vector<std::string>> t{
        {"automobile", {"car", "vehicle"}},
        {"begin", {"start", "commence"}},
        {"big", {"large", "huge"}},
        {"boat", {"vessel", "ship"}},
        {"buy", {"purchase", "acquire"}},
        {"camera", {"recorder"}},
        {"car", {"automobile", "vehicle"}},
        {"children", {"kids", "youngsters"}},
        {"create", {"make", "produce"}},
        {"device", {"gadget", "apparatus"}},
        {"display", {"show", "exhibit"}},
        {"fast", {"quick", "rapid"}},
        {"film", {"movie", "picture"}},
        {"help", {"assist", "aid"}},
        {"home", {"house", "dwelling"}},
        {"house", {"home", "residence"}},
        {"image", {"picture", "photo"}},
        {"instrument", {"tool", "device"}},
        {"large", {"big", "sizable"}},
        {"make", {"create", "build"}},
        {"movie", {"film", "motion picture"}},
        {"music", {"melody", "tunes"}},
        {"people", {"persons", "individuals"}},
        {"photo", {"picture", "image", "photograph"}},
        {"photograph", {"photo", "picture"}},
        {"picture", {"photo", "image"}},
        {"plant", {"flora", "vegetation"}},
        {"quick", {"fast", "swift"}},
        {"ship", {"vessel", "boat"}},
        {"show", {"display", "present"}},
        {"small", {"little", "tiny"}},
        {"song", {"track", "tune"}},
        {"start", {"begin", "launch"}},
        {"store", {"shop", "outlet"}},
        {"tool", {"implement", "instrument"}},
        {"use", {"utilize", "employ"}},
        {"used", {"utilized", "employed"}},
        {"vehicle", {"car", "automobile"}},
        {"water", {"liquid"}},
        {"work", {"job", "labor"}},
    };
    return t;
}

namespace {

struct WordParts {
    std::string prefix, core, suffix;
};

WordParts parts_of(const std::string& token) {
    std::size_t b = 0, e = token.size();
    while (b < e && !is_alnum(token[b])) ++b;
    while (e > b && !is_alnum(token[e - 1])) --e;
    return {token.substr(0, b), token.substr(b, e - b), token.substr(e)};
}

const std::vector<std::string>* synonyms_of(const std::string& token,
                                            const std::map<std::string, std::vector<std::string>>& thesaurus) {
    const std::string core = lower(parts_of(token).core);
    auto it = thesaurus.find(core);
    if (it == thesaurus.end()) return nullptr;
    for (const auto& s : it->second)
        if (lower(s) != core) return &it->second;
    return nullptr;
}

std::string with_case_of(const std::string& like, std::string word) {
    if (!like.empty() && std::isupper(static_cast<unsigned char>(like[0])) && !word.empty())
        word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
    return word;
}

}  // namespace

std::string augment_description(std::string_view text, std::uint64_t seed, double p, const AugmentOps& ops,
                                const std::map<std::string, std::vector<std::string>>& thesaurus) {
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("augmentation probability must lie in [0, 1]");
    const std::vector<std::string> original = split_ws(text);
    if (original.size() < 2) throw InputError("augmentation needs at least two tokens");
    const std::string original_joined = join(original, " ");

    constexpr int kMaxAttempts = 64;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
        std::vector<std::string> toks = original;
        bool edited = false;

        if (ops.deletion && rng.bernoulli(p) && toks.size() >= 2) {
            toks.erase(toks.begin() + static_cast<std::ptrdiff_t>(rng.below(toks.size())));
            edited = true;
        }
        if (ops.swap && rng.bernoulli(p)) {
            std::vector<std::pair<std::size_t, std::size_t>> pairs;
            for (std::size_t i = 0; i < toks.size(); ++i)
                for (std::size_t j = i + 1; j < toks.size(); ++j)
                    if (toks[i] != toks[j]) pairs.emplace_back(i, j);
            if (!pairs.empty()) {
                const auto [i, j] = pairs[rng.below(pairs.size())];
                std::swap(toks[i], toks[j]);
                edited = true;
            }
        }
        if (ops.insertion && rng.bernoulli(p)) {
            std::vector<std::size_t> cands;
            for (std::size_t i = 0; i < toks.size(); ++i)
                if (synonyms_of(toks[i], thesaurus)) cands.push_back(i);
            if (!cands.empty()) {
                const auto& syns = *synonyms_of(toks[cands[rng.below(cands.size())]], thesaurus);
                const std::string word = syns[rng.below(syns.size())];
                toks.insert(toks.begin() + static_cast<std::ptrdiff_t>(rng.below(toks.size() + 1)), word);
                edited = true;
            }
        }
        if (ops.synonym && rng.bernoulli(p)) {
            std::vector<std::size_t> cands;
            for (std::size_t i = 0; i < toks.size(); ++i)
                if (synonyms_of(toks[i], thesaurus)) cands.push_back(i);
            if (!cands.empty()) {
                const std::size_t i = cands[rng.below(cands.size())];
                WordParts wp = parts_of(toks[i]);
                std::vector<std::string> alts;
                for (const auto& s : *synonyms_of(toks[i], thesaurus))
                    if (lower(s) != lower(wp.core)) alts.push_back(s);
                toks[i] = wp.prefix + with_case_of(wp.core, alts[rng.below(alts.size())]) + wp.suffix;
                edited = true;
            }
        }

        std::string out = join(toks, " ");
        if (!edited) return original_joined;
        if (out != original_joined) return out;
    }
    // Edits kept cancelling out; fall back to a single seeded deletion.
    std::vector<std::string> toks = original;
    Rng rng(derive_seed(seed, "fallback"));
    toks.erase(toks.begin() + static_cast<std::ptrdiff_t>(rng.below(toks.size())));
    return join(toks, " ");
}

json CurationReport::to_json() const {
    return json{{"snippets", snippets},         {"accepted", accepted},
                {"rejected", rejected},         {"deduplicated", deduplicated},
                {"fallback_labels", fallback_labels}, {"augmented", augmented},
                {"fired", fired}};
}

CurationResult curate_descriptions(const LabelSet& labels, const std::vector<RawSnippet>& snippets,
                                   const std::vector<Document>& documents, const CurationOptions& options) {
    CurationResult result;
    CurationReport& rep = result.report;
    for (Heuristic h : kAllHeuristics) rep.fired[to_string(h)] = 0;

    // Snippets by key, stable in rank order. Keys are label ids, or
    // lower-cased constituent phrases for constituent lookup.
    std::map<std::string, std::vector<const RawSnippet*>> by_key;
    for (const auto& s : snippets) by_key[s.label_id].push_back(&s);
    for (auto& [k, v] : by_key)
        std::stable_sort(v.begin(), v.end(), [](const RawSnippet* a, const RawSnippet* b) { return a->rank < b->rank; });

    std::vector<std::string> doc_texts;
    doc_texts.reserve(documents.size());
    for (const auto& d : documents) doc_texts.push_back(d.text);
    const SubstringIndex index(doc_texts);

    std::vector<LabelRecord> records;
    for (const LabelRecord& label : labels) {
        std::vector<const RawSnippet*> mine;
        if (auto it = by_key.find(label.id); it != by_key.end()) mine = it->second;
        if (mine.empty() && options.use_constituents) {
            for (const auto& c : split_label_constituents(label.name)) {
                if (c.kind != ConstituentKind::kPhrase) continue;
                const std::string key = lower(c.text);
                if (key == label.id) continue;
                if (auto it = by_key.find(key); it != by_key.end())
                    mine.insert(mine.end(), it->second.begin(), it->second.end());
            }
        }

        std::vector<std::pair<std::string, std::vector<std::string>>> accepted;  // text, flags
        for (const RawSnippet* s : mine) {
            ++rep.snippets;
            const CleanResult cr = clean_description(*s, options.rules);
            std::vector<std::string> flags;
            for (const auto& r : cr.reports) {
                if (!r.fired) continue;
                ++rep.fired[to_string(r.heuristic)];
                flags.push_back((is_dropping(r.heuristic) ? "trimmed:" : "rejected:") + to_string(r.heuristic));
            }
            if (!cr.accepted) {
                ++rep.rejected;
                continue;
            }
            if (index.shares_run(cr.cleaned_text, options.rules.dedup_min_chars)) {
                ++rep.deduplicated;
                continue;
            }
            ++rep.accepted;
            result.cleaned_snippets.push_back({label.id, cr.cleaned_text, s->rank});
            if (std::none_of(accepted.begin(), accepted.end(),
                             [&](const auto& a) { return a.first == cr.cleaned_text; }))
                accepted.emplace_back(cr.cleaned_text, std::move(flags));
        }

        LabelRecord out = label;
        out.descriptions.clear();
        std::set<std::string> seen_texts;
        for (const auto& [text, flags] : accepted) {
            Description d{format_with_hierarchy(label, text, &labels), DescriptionSource::kScraped, flags};
            if (seen_texts.insert(d.text).second) out.descriptions.push_back(std::move(d));
        }
        const std::size_t scraped = out.descriptions.size();
        for (std::size_t i = 0; i < scraped && options.augment_copies > 0; ++i) {
            const std::string& base = accepted[i].first;
            if (split_ws(base).size() < 2) continue;
            for (int c = 0; c < options.augment_copies; ++c) {
                const std::uint64_t seed =
                    derive_seed(derive_seed(derive_seed(options.seed, "augment"), label.id), i * 1024 + c);
                const std::string aug = augment_description(base, seed, options.augment_p);
                Description d{format_with_hierarchy(label, aug, &labels), DescriptionSource::kAugmented, {}};
                if (seen_texts.insert(d.text).second) {
                    out.descriptions.push_back(std::move(d));
                    ++rep.augmented;
                }
            }
        }
        if (out.descriptions.empty()) {
            if (!label.descriptions.empty()) {
                out.descriptions = label.descriptions;
            } else {
                out.descriptions.push_back(
                    {format_with_hierarchy(label, "", &labels), DescriptionSource::kHierarchyFormatted, {"fallback"}});
                ++rep.fallback_labels;
            }
        }
        records.push_back(std::move(out));
    }
    result.labels = LabelSet(std::move(records));
    return result;
}

}  // namespace semxc
