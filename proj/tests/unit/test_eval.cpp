#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "semxc/error.hpp"
#include "semxc/eval.hpp"
#include "semxc/rng.hpp"
#include "test_util.hpp"

namespace semxc {
namespace {

using Ranked = std::vector<std::string>;
using Gold = std::set<std::string>;

/// Independent recount: build the top-k set, intersect with gold.
std::size_t oracle_hits(const Ranked& ranked, const Gold& gold, std::size_t k) {
    std::set<std::string> top(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(std::min(k, ranked.size())));
    std::vector<std::string> inter;
    std::set_intersection(top.begin(), top.end(), gold.begin(), gold.end(), std::back_inserter(inter));
    return inter.size();
}

TEST(Metrics, HandExamples) {
    EXPECT_DOUBLE_EQ(*precision_at_k(Ranked{"a", "b", "c"}, Gold{"a", "c"}, 3), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(*precision_at_k(Ranked{"a", "b"}, Gold{"a", "b", "z"}, 2), 1.0);
    EXPECT_DOUBLE_EQ(*recall_at_k(Ranked{"x", "a", "y", "b", "q", "r", "s", "t", "u", "v"}, Gold{"a", "b", "c", "d"}, 10),
                     0.5);
    // Fewer predictions than k: the denominator stays k.
    EXPECT_DOUBLE_EQ(*precision_at_k(Ranked{"a"}, Gold{"a"}, 5), 0.2);
    EXPECT_FALSE(precision_at_k(Ranked{"a"}, Gold{}, 1).has_value());
    EXPECT_FALSE(recall_at_k(Ranked{"a"}, Gold{}, 1).has_value());
    EXPECT_THROW(precision_at_k(Ranked{"a"}, Gold{"a"}, 0), ConsistencyError);
}

TEST(Metrics, OracleEquivalenceAndIdentities) {
    Rng rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        Ranked ranked;
        std::set<std::string> used;
        const std::size_t n = rng.below(15);
        while (ranked.size() < n) {
            const std::string l = "l" + std::to_string(rng.below(30));
            if (used.insert(l).second) ranked.push_back(l);
        }
        Gold gold;
        const std::size_t g = 1 + rng.below(6);
        while (gold.size() < g) gold.insert("l" + std::to_string(rng.below(30)));
        double prev_hits = -1.0, prev_recall = -1.0;
        for (std::size_t k = 1; k <= 12; ++k) {
            const double p = *precision_at_k(ranked, gold, k);
            const double r = *recall_at_k(ranked, gold, k);
            const double hits = static_cast<double>(oracle_hits(ranked, gold, k));
            EXPECT_NEAR(p, hits / static_cast<double>(k), 1e-12);
            EXPECT_NEAR(r, hits / static_cast<double>(gold.size()), 1e-12);
            EXPECT_NEAR(p * static_cast<double>(k), r * static_cast<double>(gold.size()), 1e-12);
            EXPECT_GE(p * static_cast<double>(k), prev_hits);
            EXPECT_GE(r, prev_recall);
            prev_hits = p * static_cast<double>(k);
            prev_recall = r;
        }
    }
}

Corpus corpus_of(const std::vector<std::pair<std::string, std::vector<std::string>>>& docs,
                 const std::vector<std::string>& labels) {
    Corpus c;
    std::vector<LabelRecord> recs;
    for (const auto& l : labels) recs.push_back(LabelRecord{l, l, {}, {}, {}, {}});
    c.labels = LabelSet(recs);
    for (const auto& [id, gold] : docs) c.documents.push_back(Document{id, "t", gold});
    c.reindex();
    return c;
}

SplitSpec zs_split(const Corpus& c, const std::set<std::string>& unseen) {
    SplitSpec s;
    for (const auto& l : c.labels) (unseen.count(l.id) ? s.unseen_labels : s.seen_labels).insert(l.id);
    for (const auto& d : c.documents) {
        bool seen = false, any_unseen = false;
        for (const auto& g : d.gold_labels) (unseen.count(g) ? any_unseen : seen) = true;
        if (seen) s.train_docs.insert(d.id);
        if (any_unseen) s.test_docs.insert(d.id);
    }
    return s;
}

TEST(Evaluate, HandScoredToySplit) {
    // Unseen: u1 u2 u3. Seen: s1 s2.
    const Corpus c = corpus_of({{"d1", {"u1"}}, {"d2", {"u1", "u2"}}, {"d3", {"s1", "u3"}}, {"d4", {"u2", "u3"}},
                                {"d5", {"s2"}}},
                               {"s1", "s2", "u1", "u2", "u3"});
    const SplitSpec split = zs_split(c, {"u1", "u2", "u3"});
    const RankedPredictions preds{{"d1", {"u1", "u2", "u3"}},
                                  {"d2", {"u3", "u2", "u1"}},
                                  {"d3", {"u1", "u2", "u3"}},
                                  {"d4", {"u1", "u3", "u2"}}};
    const EvalReport r = evaluate(preds, c, split, Setting::kZS, {1, 2, 3});
    EXPECT_EQ(r.evaluated_docs, 4u);
    EXPECT_EQ(r.excluded_docs, 0u);
    EXPECT_EQ(r.candidate_labels, 3u);
    // P@1: d1 1, d2 0, d3 0, d4 0.
    EXPECT_NEAR(r.metrics.at("P@1"), 1.0 / 4.0, 1e-12);
    // P@2: d1 1/2, d2 1/2, d3 0, d4 1/2.
    EXPECT_NEAR(r.metrics.at("P@2"), (0.5 + 0.5 + 0.0 + 0.5) / 4.0, 1e-12);
    // R@2: d1 1, d2 1/2, d3 0, d4 1/2.
    EXPECT_NEAR(r.metrics.at("R@2"), (1.0 + 0.5 + 0.0 + 0.5) / 4.0, 1e-12);
    // P@3: d1 1/3, d2 2/3, d3 1/3, d4 2/3; R@3 all 1.
    EXPECT_NEAR(r.metrics.at("P@3"), (1.0 + 2.0 + 1.0 + 2.0) / 12.0, 1e-12);
    EXPECT_NEAR(r.metrics.at("R@3"), 1.0, 1e-12);
}

TEST(Evaluate, PerfectAndSeenOnlyPredictors) {
    Rng rng(2);
    std::vector<std::pair<std::string, std::vector<std::string>>> docs;
    std::vector<std::string> labels;
    for (int i = 0; i < 10; ++i) labels.push_back("l" + std::to_string(i));
    for (int d = 0; d < 20; ++d) {
        std::set<std::string> g;
        const auto n = 1 + rng.below(3);
        while (g.size() < n) g.insert(labels[rng.below(10)]);
        docs.push_back({"d" + std::to_string(d), std::vector<std::string>(g.begin(), g.end())});
    }
    const Corpus c = corpus_of(docs, labels);
    const SplitSpec split = zs_split(c, {"l0", "l1", "l2", "l3", "l4"});
    RankedPredictions perfect, seen_only;
    for (const auto& d : c.documents) {
        Ranked r;
        for (const auto& g : d.gold_labels)
            if (split.unseen_labels.count(g)) r.push_back(g);
        perfect[d.id] = r;
        seen_only[d.id] = Ranked(split.seen_labels.begin(), split.seen_labels.end());
    }
    EXPECT_DOUBLE_EQ(evaluate(perfect, c, split, Setting::kZS).metrics.at("P@1"), 1.0);
    const EvalReport bad = evaluate(seen_only, c, split, Setting::kZS);
    for (const auto& [name, v] : bad.metrics) EXPECT_EQ(v, 0.0) << name;
    EXPECT_GT(bad.out_of_candidate_predictions, 0u);

    // Metrics stay in [0, 1] and do not depend on map insertion order.
    RankedPredictions reversed;
    for (auto it = perfect.rbegin(); it != perfect.rend(); ++it) reversed.insert(*it);
    EXPECT_EQ(evaluate(reversed, c, split, Setting::kGZS).to_json(), evaluate(perfect, c, split, Setting::kGZS).to_json());
}

TEST(Evaluate, RandomSplitMatchesOracleAverage) {
    Rng rng(3);
    std::vector<std::string> labels;
    for (int i = 0; i < 12; ++i) labels.push_back("l" + std::to_string(i));
    std::vector<std::pair<std::string, std::vector<std::string>>> docs;
    for (int d = 0; d < 20; ++d) {
        std::set<std::string> g;
        const auto n = 1 + rng.below(4);
        while (g.size() < n) g.insert(labels[rng.below(12)]);
        docs.push_back({"d" + std::to_string(d), std::vector<std::string>(g.begin(), g.end())});
    }
    const Corpus c = corpus_of(docs, labels);
    const SplitSpec split = zs_split(c, {"l0", "l3", "l5", "l7", "l9", "l11"});
    RankedPredictions preds;
    for (const auto& d : c.documents) {
        Ranked r(split.unseen_labels.begin(), split.unseen_labels.end());
        rng.shuffle(r);
        preds[d.id] = r;
    }
    const EvalReport rep = evaluate(preds, c, split, Setting::kZS, {1, 3, 5});
    for (std::size_t k : {1u, 3u, 5u}) {
        double p = 0.0, rr = 0.0;
        int n = 0;
        for (const auto& id : split.test_docs) {
            Gold gold;
            for (const auto& g : c.find_document(id)->gold_labels)
                if (split.unseen_labels.count(g)) gold.insert(g);
            if (gold.empty()) continue;
            ++n;
            const double h = static_cast<double>(oracle_hits(preds[id], gold, k));
            p += h / static_cast<double>(k);
            rr += h / static_cast<double>(gold.size());
        }
        EXPECT_NEAR(rep.metrics.at("P@" + std::to_string(k)), p / n, 1e-12);
        EXPECT_NEAR(rep.metrics.at("R@" + std::to_string(k)), rr / n, 1e-12);
    }
}

TEST(Evaluate, MismatchesRejected) {
    const Corpus c = corpus_of({{"d1", {"u"}}}, {"s", "u"});
    SplitSpec split = zs_split(c, {"u"});
    EXPECT_THROW(evaluate({}, c, split, Setting::kZS), ConsistencyError);
    EXPECT_THROW(evaluate({{"d1", {"u"}}}, c, split, Setting::kFS), ConsistencyError);
    split.fewshot_k = 1;
    EXPECT_THROW(evaluate({{"d1", {"u"}}}, c, split, Setting::kZS), ConsistencyError);
}

TEST(OracleSeen, Diagnostics) {
    const Corpus c = corpus_of({{"all_seen", {"s1", "s2"}}, {"all_unseen", {"u1"}}, {"mixed", {"s1", "s2", "u1", "u2"}}},
                               {"s1", "s2", "s3", "s4", "u1", "u2"});
    SplitSpec split = zs_split(c, {"u1", "u2"});
    split.test_docs = {"all_seen", "all_unseen", "mixed"};

    const auto ranking = oracle_seen_ranking(*c.find_document("mixed"), split, 10);
    for (const auto& l : ranking) EXPECT_TRUE(split.seen_labels.count(l));
    EXPECT_EQ(ranking.front(), "s1");

    const Corpus mixed_only = corpus_of({{"mixed", {"s1", "s2", "u1", "u2"}}}, {"s1", "s2", "s3", "s4", "u1", "u2"});
    SplitSpec ms = zs_split(mixed_only, {"u1", "u2"});
    EXPECT_DOUBLE_EQ(oracle_seen(mixed_only, ms, {10}).metrics.at("R@10"), 0.5);

    const Corpus seen_only = corpus_of({{"all_seen", {"s1", "s2"}}}, {"s1", "s2", "s3", "u1"});
    SplitSpec ss = zs_split(seen_only, {"u1"});
    ss.test_docs = {"all_seen"};
    EXPECT_DOUBLE_EQ(oracle_seen(seen_only, ss, {2}).metrics.at("P@2"), 1.0);

    const Corpus unseen_only = corpus_of({{"all_unseen", {"u1"}}}, {"s1", "u1"});
    SplitSpec us = zs_split(unseen_only, {"u1"});
    const EvalReport ur = oracle_seen(unseen_only, us, {1, 10});
    EXPECT_EQ(ur.metrics.at("P@10"), 0.0);
    EXPECT_EQ(ur.metrics.at("R@10"), 0.0);
}

TEST(PUnseen, FilterThenCount) {
    const std::set<std::string> unseen{"u1", "u2", "u3"};
    EXPECT_EQ(*p_unseen(Ranked{"s1", "s2", "s3"}, Gold{"s1", "u1"}, unseen, 1), 0.0);
    EXPECT_EQ(*p_unseen(Ranked{"u1", "s1", "u2"}, Gold{"u1", "u2"}, unseen, 2), 1.0);
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        Ranked r{"s1", "u1", "s2", "u2", "u3", "s3"};
        rng.shuffle(r);
        const Gold gold{"u2", "s1"};
        Ranked filtered;
        std::copy_if(r.begin(), r.end(), std::back_inserter(filtered), [&](const std::string& l) { return unseen.count(l); });
        for (std::size_t k = 1; k <= 4; ++k)
            EXPECT_NEAR(*p_unseen(r, gold, unseen, k), static_cast<double>(oracle_hits(filtered, gold, k)) / k, 1e-12);
    }
}

TEST(Predictions, LoadAndRejectDuplicates) {
    semxc::testing::TempDir dir;
    const auto p = dir.write("p.jsonl", R"({"doc":"a","labels":[{"id":"x","score":1},{"id":"y","score":0.5}]})" "\n");
    EXPECT_EQ(load_predictions(p).at("a"), (Ranked{"x", "y"}));
    const auto dup = dir.write("d.jsonl", R"({"doc":"a","labels":[]})" "\n" R"({"doc":"a","labels":[]})" "\n");
    EXPECT_THROW(load_predictions(dup), InputError);
}

}  // namespace
}  // namespace semxc
