#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "semxc/corpus.hpp"

namespace semxc {

struct RawSnippet {
    std::string label_id;
    std::string text;
    int rank = 1;
};

/// raw_snippets.jsonl rows: {"label_id": str, "rank": int >= 1, "text": str}.
std::vector<RawSnippet> load_snippets(const std::filesystem::path& path);
std::vector<RawSnippet> parse_snippets(const std::string& jsonl, const std::string& source_name);

enum class Heuristic {
    kIncompleteSentence,
    kPunctDensity,
    kUrlCurrency,
    kShortSentences,
    kInterrogative,
    kAdNgram,
    kProfanity,
    kSpam,
    kFirstPerson,
};

inline constexpr Heuristic kAllHeuristics[] = {
    Heuristic::kIncompleteSentence, Heuristic::kPunctDensity, Heuristic::kUrlCurrency,
    Heuristic::kShortSentences,     Heuristic::kInterrogative, Heuristic::kAdNgram,
    Heuristic::kProfanity,          Heuristic::kSpam,          Heuristic::kFirstPerson,
};

std::string to_string(Heuristic h);
/// Dropping heuristics remove sentences; the others reject the snippet.
bool is_dropping(Heuristic h);

struct HeuristicReport {
    Heuristic heuristic;
    bool fired = false;
    std::string detail;
};

/// Logistic spam scorer over hand-set features.
struct SpamWeights {
    double bias = -4.0;
    double exclamation_density = 2.0;  // '!' per sentence
    double ad_ngram_count = 1.5;
    double caps_ratio = 4.0;           // share of ALL-CAPS words (length >= 2)
    double promo_cue_count = 1.5;
    double placeholder_count = 2.0;    // <...> tokens left by templating
};

struct RuleConfig {
    std::size_t max_punctuation = 10;
    std::size_t max_interrogatives = 2;
    std::size_t max_first_person = 3;
    std::size_t min_sentence_words = 5;
    double spam_threshold = 0.9;
    std::size_t dedup_min_chars = 60;
    std::vector<std::string> ad_ngrams{"find great deals", "shipped by", "free shipping", "shop and read reviews",
                                       "near you today"};
    std::vector<std::string> profanity{"fuck", "fucking", "shit", "bullshit", "bitch", "bastard", "asshole",
                                       "dickhead", "motherfucker", "cunt", "wanker", "slut", "whore"};
    std::vector<std::string> promo_cues{"check out", "world's leading", "retailer", "buy now", "order now",
                                       "best price", "lowest price", "limited time", "discount", "click here"};
    std::vector<std::string> first_person{"i", "me", "my", "mine", "myself", "we", "us", "our", "ours",
                                          "ourselves", "im", "ive"};
    SpamWeights spam;

    /// Version of the built-in tagger lexicon the rules were written for.
    static constexpr int kLexiconVersion = 1;

    nlohmann::json to_json() const;
    /// Missing keys keep their defaults.
    static RuleConfig from_json(const nlohmann::json& j);
    static RuleConfig load(const std::filesystem::path& path);
};

/// Sentences split after runs of . ! ? (or a Unicode ellipsis) followed by
/// whitespace, and at line breaks. Internal whitespace is collapsed.
std::vector<std::string> split_sentences(std::string_view text);

/// Closed-class lexicon plus suffix rules; counts tokens that look like
/// nouns, verbs or auxiliaries.
std::size_t content_token_count(std::string_view sentence);

/// True when the sentence has no terminal . ! ?, ends in an ellipsis, or
/// has fewer than two noun/verb/auxiliary tokens.
bool is_incomplete_sentence(std::string_view sentence);

/// Non-period ASCII punctuation; apostrophes and hyphens inside words are
/// not counted.
std::size_t punctuation_count(std::string_view text);
bool has_url_or_currency(std::string_view text);
double spam_score(std::string_view text, const RuleConfig& rules);

struct CleanResult {
    bool accepted = false;
    std::vector<HeuristicReport> reports;  // one per heuristic, in kAllHeuristics order
    std::string cleaned_text;

    const HeuristicReport& report(Heuristic h) const;
    bool fired(Heuristic h) const { return report(h).fired; }
};

/// Drops incomplete and short sentences, then rejects the snippet when any
/// reject heuristic fires on the original text or on the retained text.
/// Rejection is therefore independent of the order the reject checks run
/// in, and cleaning the accepted text again changes nothing. A snippet
/// with no retained sentence is not accepted.
CleanResult clean_description(const RawSnippet& snippet, const RuleConfig& rules);

/// Exact substring index over a document collection (suffix array).
class SubstringIndex {
public:
    explicit SubstringIndex(const std::vector<std::string>& documents);
    bool contains(std::string_view needle) const;
    /// True when `text` shares a run of at least `min_chars` bytes with a document.
    bool shares_run(std::string_view text, std::size_t min_chars) const;

private:
    std::string text_;
    std::vector<std::uint32_t> suffixes_;
};

/// Removes descriptions that share a verbatim run of >= min_match_chars
/// with any document.
std::vector<Description> dedup_against_corpus(const std::vector<Description>& descriptions,
                                              const std::vector<Document>& documents,
                                              std::size_t min_match_chars = 60);

/// "Label is {name}." / "Description is {text}." / "Parents are ..." /
/// "Children are ..." / "Alternate Label Names are ...", newline-separated,
/// empty fields omitted. Hierarchy ids resolve to names through `labels`
/// when given. One trailing period of each value is absorbed by the
/// template.
std::string format_with_hierarchy(const LabelRecord& label, std::string_view description_text,
                                  const LabelSet* labels = nullptr);

struct FormattedBlock {
    std::string name;
    std::string description;
    std::vector<std::string> parents;
    std::vector<std::string> children;
    std::vector<std::string> alternate_names;

    bool operator==(const FormattedBlock&) const = default;
};

/// Inverse of format_with_hierarchy. Throws InputError on unknown keys.
FormattedBlock parse_formatted_block(std::string_view text);

enum class ConstituentKind { kPhrase, kEntity };

struct Constituent {
    std::string text;
    ConstituentKind kind = ConstituentKind::kPhrase;
    bool operator==(const Constituent&) const = default;
};

/// Chunks a label name at stop words. Numbers, decades ("1980s") and
/// month-date runs ("July 4", "June 1984") become entities.
std::vector<Constituent> split_label_constituents(std::string_view label_name);

struct AugmentOps {
    bool deletion = true;
    bool swap = true;
    bool insertion = true;
    bool synonym = true;
};

/// Small bundled thesaurus (word -> synonyms), lower-case keys.
const std::map<std::string, std::vector<std::string>>& default_thesaurus();

/// EDA-style augmentation. Each enabled operation fires independently with
/// probability p and performs one edit: delete a word, swap two differing
/// words, insert a synonym of some word, replace a word by a synonym.
/// Deterministic given seed; when an edit fired the output differs from the
/// input. Throws InputError when the text has fewer than two tokens.
std::string augment_description(std::string_view text, std::uint64_t seed, double p = 0.5,
                                const AugmentOps& ops = {},
                                const std::map<std::string, std::vector<std::string>>& thesaurus = default_thesaurus());

struct CurationOptions {
    RuleConfig rules;
    /// Augmented copies per accepted description (0 disables augmentation).
    int augment_copies = 0;
    double augment_p = 0.5;
    std::uint64_t seed = 0;
    /// Look up snippets per label-name constituent when a label has none.
    bool use_constituents = true;
};

struct CurationReport {
    std::size_t snippets = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t deduplicated = 0;
    std::size_t fallback_labels = 0;
    std::size_t augmented = 0;
    std::map<std::string, std::size_t> fired;  // heuristic id -> snippets it fired on

    nlohmann::json to_json() const;
};

struct CurationResult {
    LabelSet labels;                          // description pools filled in
    std::vector<RawSnippet> cleaned_snippets;  // accepted texts, for re-cleaning
    CurationReport report;
};

/// Cleans, de-duplicates, formats and optionally augments the snippets of
/// every label. Labels with no surviving snippet fall back to their
/// hierarchy-formatted name.
CurationResult curate_descriptions(const LabelSet& labels, const std::vector<RawSnippet>& snippets,
                                   const std::vector<Document>& documents, const CurationOptions& options);

}  // namespace semxc
