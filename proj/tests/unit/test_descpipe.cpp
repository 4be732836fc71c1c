#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "../common/description_fixtures.hpp"
#include "semxc/descpipe.hpp"
#include "semxc/error.hpp"
#include "semxc/rng.hpp"
#include "test_util.hpp"

namespace semxc {
namespace {

const RuleConfig kRules;

TEST(Sentences, SplitAndNormalise) {
    EXPECT_EQ(split_sentences("One two.  Three   four!\nFive six"),
              (std::vector<std::string>{"One two.", "Three four!", "Five six"}));
    EXPECT_EQ(split_sentences("So interested...why? yes. ..."),
              (std::vector<std::string>{"So interested...why?", "yes.", "..."}));
    EXPECT_EQ(split_sentences("He said \"go.\" Then left."),
              (std::vector<std::string>{"He said \"go.\"", "Then left."}));
    EXPECT_TRUE(split_sentences("   ").empty());
}

TEST(Sentences, Incompleteness) {
    EXPECT_TRUE(is_incomplete_sentence("What is the best glue or gel for applying"));
    EXPECT_TRUE(is_incomplete_sentence("Boat Insurance; Boat Financing ..."));
    EXPECT_TRUE(is_incomplete_sentence("Of the very best."));
    EXPECT_FALSE(is_incomplete_sentence("A camera records images."));
    EXPECT_FALSE(is_incomplete_sentence("You're starting a company?"));
}

TEST(Heuristics, Counters) {
    EXPECT_EQ(punctuation_count("real-world user's claims, (yes); ok."), 4u);
    EXPECT_TRUE(has_url_or_currency("Free Shipping on orders over $250."));
    EXPECT_TRUE(has_url_or_currency("see www.example.com for details"));
    EXPECT_TRUE(has_url_or_currency("costs 30 dollars"));
    EXPECT_FALSE(has_url_or_currency("A camera records images."));
    EXPECT_LT(spam_score("A camera records images.", kRules), 0.05);
}

class NoisySnippet : public ::testing::TestWithParam<fixtures::SnippetCase> {};

TEST_P(NoisySnippet, DesignatedHeuristicActs) {
    const auto& c = GetParam();
    const CleanResult r = clean_description({c.label, c.text, 1}, kRules);
    ASSERT_EQ(r.reports.size(), std::size(kAllHeuristics));
    EXPECT_TRUE(r.fired(c.heuristic)) << r.report(c.heuristic).detail;
    EXPECT_EQ(r.accepted, !c.rejected);
    if (!c.rejected) {
        EXPECT_LT(r.cleaned_text.size(), c.text.size());
        EXPECT_EQ(r.cleaned_text, "Adhesives are substances that bind two surfaces together.");
    }
}

INSTANTIATE_TEST_SUITE_P(Fixtures, NoisySnippet, ::testing::ValuesIn(fixtures::noisy_snippets()),
                         [](const auto& info) {
                             std::string name = to_string(info.param.heuristic);
                             std::erase(name, '_');
                             return name;
                         });

TEST(Clean, FragmentAloneIsDropped) {
    const CleanResult r = clean_description({"adh", "What is the best glue or gel for applying", 1}, kRules);
    EXPECT_TRUE(r.fired(Heuristic::kIncompleteSentence));
    EXPECT_FALSE(r.accepted);
}

TEST(Clean, ControlsPassUntouched) {
    for (const auto& text : fixtures::clean_controls()) {
        const CleanResult r = clean_description({"x", text, 1}, kRules);
        EXPECT_TRUE(r.accepted) << text;
        EXPECT_EQ(r.cleaned_text, text);
        for (const auto& rep : r.reports) EXPECT_FALSE(rep.fired) << text << " " << to_string(rep.heuristic);
    }
}

TEST(Clean, Idempotent) {
    std::vector<std::string> texts = fixtures::clean_controls();
    for (const auto& c : fixtures::noisy_snippets()) texts.push_back(c.text);
    texts.push_back("Great product!!! Buy it. It works well for most people in the house. ok");
    texts.push_back("AMAZING DEAL TODAY. Cameras record moving images of a scene. Short one.");
    for (const auto& t : texts) {
        const CleanResult first = clean_description({"x", t, 1}, kRules);
        if (!first.accepted) continue;
        const CleanResult second = clean_description({"x", first.cleaned_text, 1}, kRules);
        EXPECT_TRUE(second.accepted) << t;
        EXPECT_EQ(second.cleaned_text, first.cleaned_text);
        for (const auto& rep : second.reports) EXPECT_FALSE(rep.fired) << to_string(rep.heuristic);
    }
}

TEST(Clean, RejectionIgnoresCheckOrder) {
    // Rejection is an OR over checks on fixed texts, so any permutation of the
    // reject checks agrees; verify by recomputing each check in isolation.
    for (const auto& c : fixtures::noisy_snippets()) {
        const CleanResult r = clean_description({"x", c.text, 1}, kRules);
        bool any = false;
        for (Heuristic h : kAllHeuristics)
            if (!is_dropping(h) && r.fired(h)) any = true;
        std::vector<Heuristic> order(std::begin(kAllHeuristics), std::end(kAllHeuristics));
        do {
            bool rejected = false;
            for (Heuristic h : order) {
                if (!is_dropping(h) && r.fired(h)) {
                    rejected = true;
                    break;
                }
            }
            ASSERT_EQ(rejected, any);
        } while (std::next_permutation(order.begin(), order.begin() + 4));
        if (any) {
            EXPECT_FALSE(r.accepted);
        }
    }
}

TEST(Rules, JsonRoundTripAndOverrides) {
    const RuleConfig back = RuleConfig::from_json(kRules.to_json());
    EXPECT_EQ(back.to_json(), kRules.to_json());
    const RuleConfig strict = RuleConfig::from_json({{"max_first_person", 0}});
    const CleanResult r = clean_description({"x", "We record images of the scene here.", 1}, strict);
    EXPECT_TRUE(r.fired(Heuristic::kFirstPerson));
    EXPECT_THROW(RuleConfig::from_json({{"lexicon_version", 99}}), ConsistencyError);
    EXPECT_THROW(RuleConfig::from_json({{"spam_threshold", 2.0}}), InputError);
    testing::TempDir dir;
    EXPECT_THROW(RuleConfig::load(dir.write("bad.json", "{")), InputError);
}

TEST(Snippets, ParseAndErrors) {
    const auto s = parse_snippets("{\"label_id\":\"a\",\"rank\":2,\"text\":\"t\"}\n{\"label_id\":\"b\",\"text\":\"u\"}\n",
                                  "raw");
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].rank, 2);
    EXPECT_EQ(s[1].rank, 1);
    EXPECT_THROW(parse_snippets("{\"label_id\":\"a\"}\n", "raw"), InputError);
    EXPECT_THROW(parse_snippets("{\"label_id\":\"a\",\"text\":\"t\",\"rank\":0}\n", "raw"), InputError);
    EXPECT_THROW(parse_snippets("nope\n", "raw"), InputError);
}

/// Longest common substring by dynamic programming.
std::size_t longest_common_run(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    std::size_t best = 0;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : 0;
            best = std::max(best, cur[j]);
        }
        std::swap(prev, cur);
    }
    return best;
}

std::string random_text(Rng& rng, std::size_t n, const char* alphabet) {
    const std::string alpha(alphabet);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s.push_back(alpha[rng.below(alpha.size())]);
    return s;
}

TEST(Dedup, SixtyCharacterBoundary) {
    Rng rng(3);
    for (std::size_t run : {59u, 60u, 61u}) {
        const std::string shared = random_text(rng, run, "abcdefghij ");
        const Document doc{"d", "0123 " + shared + " 4567", {}};
        const Description desc{"QRST" + shared + "UVWX", DescriptionSource::kScraped, {}};
        ASSERT_EQ(longest_common_run(doc.text, desc.text), run);
        const auto kept = dedup_against_corpus({desc}, {doc}, 60);
        EXPECT_EQ(kept.empty(), run >= 60) << run;
    }
}

TEST(Dedup, SuffixArrayMatchesNaiveSearch) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> docs;
        for (int d = 0; d < 1 + static_cast<int>(rng.below(4)); ++d)
            docs.push_back(random_text(rng, rng.below(80), "abc"));
        const SubstringIndex index(docs);
        for (int q = 0; q < 20; ++q) {
            const std::string needle = random_text(rng, 1 + rng.below(6), "abc");
            const bool naive = std::any_of(docs.begin(), docs.end(),
                                           [&](const std::string& d) { return d.find(needle) != std::string::npos; });
            ASSERT_EQ(index.contains(needle), naive) << needle;
            const std::string text = random_text(rng, rng.below(30), "abc");
            const std::size_t m = 1 + rng.below(8);
            bool naive_run = false;
            for (const auto& d : docs) naive_run = naive_run || longest_common_run(d, text) >= m;
            ASSERT_EQ(index.shares_run(text, m), naive_run);
        }
    }
}

TEST(Format, HierarchyExample) {
    LabelRecord parent{"p", "video communications", {}, {}, {}, {}};
    LabelRecord label{"v", "video surveillance", {"camera surveillance", "security camera surveillance"}, {"p"}, {},
                      {}};
    const LabelSet labels({parent, label});
    EXPECT_EQ(format_with_hierarchy(label, "Cameras watch a site.", &labels),
              "Label is video surveillance.\nDescription is Cameras watch a site.\nParents are video "
              "communications.\nAlternate Label Names are camera surveillance, security camera surveillance.");
    LabelRecord bare{"x", "x", {}, {}, {}, {}};
    EXPECT_EQ(format_with_hierarchy(bare, "d"), "Label is x.\nDescription is d.");
    EXPECT_EQ(format_with_hierarchy(bare, ""), "Label is x.");
}

TEST(Format, ParseRoundTrip) {
    Rng rng(5);
    auto phrase = [&] {
        std::vector<std::string> words;
        for (std::size_t i = 0, n = 1 + rng.below(4); i < n; ++i) words.push_back(random_text(rng, 1 + rng.below(6), "abcxyz"));
        std::string s;
        for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
        return s;
    };
    for (int trial = 0; trial < 300; ++trial) {
        LabelRecord l{"id", phrase(), {}, {}, {}, {}};
        for (std::size_t i = 0, n = rng.below(3); i < n; ++i) l.parents.push_back(phrase());
        for (std::size_t i = 0, n = rng.below(3); i < n; ++i) l.children.push_back(phrase());
        for (std::size_t i = 0, n = rng.below(3); i < n; ++i) l.alternate_names.push_back(phrase());
        const std::string desc = rng.below(4) ? phrase() + ". " + phrase() : "";
        const FormattedBlock b = parse_formatted_block(format_with_hierarchy(l, desc));
        EXPECT_EQ(b, (FormattedBlock{l.name, desc, l.parents, l.children, l.alternate_names}));
    }
    EXPECT_THROW(parse_formatted_block("Colour is red."), InputError);
    EXPECT_THROW(parse_formatted_block("Description is d."), InputError);
}

TEST(Constituents, StopWordsAndEntities) {
    using K = ConstituentKind;
    EXPECT_EQ(split_label_constituents("Fencers at the 1984 Summer Olympics"),
              (std::vector<Constituent>{{"Fencers", K::kPhrase}, {"1984", K::kEntity}, {"Summer Olympics", K::kPhrase}}));
    EXPECT_EQ(split_label_constituents("Wars of the 1980s"),
              (std::vector<Constituent>{{"Wars", K::kPhrase}, {"1980s", K::kEntity}}));
    EXPECT_EQ(split_label_constituents("Events of July 4, 1776 in Boston"),
              (std::vector<Constituent>{{"Events", K::kPhrase}, {"July 4 1776", K::kEntity}, {"Boston", K::kPhrase}}));
    EXPECT_EQ(split_label_constituents("Lakes of Ontario, Canada"),
              (std::vector<Constituent>{{"Lakes", K::kPhrase}, {"Ontario", K::kPhrase}, {"Canada", K::kPhrase}}));
    EXPECT_EQ(split_label_constituents("May flowers"), (std::vector<Constituent>{{"May flowers", K::kPhrase}}));
}

TEST(Augment, DeletionOnlyWithCertainty) {
    const std::set<std::string> allowed{"b c", "a c", "a b"};
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const std::string out = augment_description("a b c", seed, 1.0, {true, false, false, false});
        EXPECT_TRUE(allowed.count(out)) << out;
    }
}

TEST(Augment, DeterministicAndChangesText) {
    const std::string text = "The camera takes a photo of the big house near the water.";
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const std::string a = augment_description(text, seed, 0.5);
        EXPECT_EQ(a, augment_description(text, seed, 0.5));
        const std::string b = augment_description(text, seed, 1.0);
        EXPECT_NE(b, text);
    }
    EXPECT_EQ(augment_description(text, 1, 0.0), text);
    EXPECT_THROW(augment_description("single", 1, 0.5), InputError);
    EXPECT_THROW(augment_description("two words", 1, 1.5), InputError);
}

TEST(Augment, SynonymOnlyUsesThesaurus) {
    const std::string out = augment_description("take a photo now", 9, 1.0, {false, false, false, true});
    EXPECT_TRUE(out == "take a picture now" || out == "take a image now" || out == "take a photograph now") << out;
    // No synonym available: nothing fires and the text is returned as is.
    EXPECT_EQ(augment_description("qq zz", 9, 1.0, {false, false, false, true}), "qq zz");
}

TEST(Curate, FormatsDedupsAndFallsBack) {
    LabelRecord cam{"cam", "Cameras", {}, {}, {}, {}};
    LabelRecord boat{"boat", "Boats", {}, {}, {}, {}};
    LabelRecord odd{"odd", "Fencers of Olympia", {}, {}, {}, {}};
    const LabelSet labels({cam, boat, odd});
    const std::string copied = "Boats are watercraft designed to travel across lakes and rivers in all seasons.";
    const std::vector<Document> docs{{"d1", "intro " + copied + " outro", {"boat"}}};
    std::vector<RawSnippet> snippets{{"cam", "A camera is a device that records images of a scene.", 2},
                                     {"cam", "Check out deals! Free shipping near you today.", 1},
                                     {"boat", copied, 1},
                                     {"fencers", "Fencers compete with swords in the sport of fencing.", 1}};
    for (const auto& c : fixtures::noisy_snippets()) snippets.push_back({"cam", c.text, 3});
    CurationOptions opts;
    opts.augment_copies = 2;
    opts.seed = 4;
    const CurationResult r = curate_descriptions(labels, snippets, docs, opts);

    const auto& c = r.labels.at("cam").descriptions;
    ASSERT_GE(c.size(), 2u);
    EXPECT_EQ(c[0].text, "Label is Cameras.\nDescription is A camera is a device that records images of a scene.");
    EXPECT_EQ(c[0].source, DescriptionSource::kScraped);
    EXPECT_EQ(c[1].text, "Label is Cameras.\nDescription is Adhesives are substances that bind two surfaces together.");
    EXPECT_TRUE(std::any_of(c.begin(), c.end(), [](const Description& d) { return d.source == DescriptionSource::kAugmented; }));

    const auto& b = r.labels.at("boat").descriptions;
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b[0].text, "Label is Boats.");
    EXPECT_EQ(b[0].source, DescriptionSource::kHierarchyFormatted);
    EXPECT_EQ(r.report.deduplicated, 1u);

    const auto& o = r.labels.at("odd").descriptions;
    EXPECT_EQ(o[0].text, "Label is Fencers of Olympia.\nDescription is Fencers compete with swords in the sport of fencing.");

    EXPECT_EQ(r.report.fallback_labels, 1u);
    EXPECT_EQ(r.report.fired.at("spam"), 1u);
    EXPECT_EQ(r.report.accepted, r.cleaned_snippets.size());
    for (const auto& s : r.cleaned_snippets) EXPECT_TRUE(clean_description(s, opts.rules).accepted);
}

}  // namespace
}  // namespace semxc
