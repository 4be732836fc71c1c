#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "semxc/error.hpp"
#include "semxc/match.hpp"
#include "semxc/rng.hpp"
#include "test_util.hpp"

namespace semxc {
namespace {

Matrix bounded(Eigen::Index r, Eigen::Index c, Rng& rng) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::tanh(rng.normal());
    return m;
}

Encoding random_encoding(Eigen::Index n, Eigen::Index d, Rng& rng) {
    return Encoding{bounded(d, 1, rng), bounded(n, d, rng)};
}

TEST(Sigmoid, StableAtExtremes) {
    EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
    EXPECT_EQ(sigmoid(-1000.0), 0.0);
    EXPECT_EQ(sigmoid(1000.0), 1.0);
    EXPECT_NEAR(sigmoid(1.0), 0.7310585786300049, 1e-15);
}

TEST(Biencoder, ClosedForms) {
    Encoding a{Vector::Unit(3, 0), Matrix::Zero(1, 3)};
    Encoding b{Vector::Unit(3, 1), Matrix::Zero(1, 3)};
    EXPECT_DOUBLE_EQ(score_biencoder(a, b).probability, 0.5);
    EXPECT_NEAR(score_biencoder(a, a).probability, 0.7311, 1e-4);
    Rng rng(1);
    const Encoding x = random_encoding(2, 5, rng), y = random_encoding(3, 5, rng);
    double dot = 0.0;
    for (int i = 0; i < 5; ++i) dot += x.cls(i) * y.cls(i);
    const ScoredLabel s = score_biencoder(x, y);
    EXPECT_NEAR(s.logit, dot, 1e-12);
    EXPECT_NEAR(s.probability, 1.0 / (1.0 + std::exp(-dot)), 1e-12);
    EXPECT_THROW(score_biencoder(x, random_encoding(1, 4, rng)), ConsistencyError);
}

TEST(RelaxedCoil, ZeroMaskEqualsBiencoder) {
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        const Encoding x = random_encoding(1 + static_cast<Eigen::Index>(rng.below(6)), 4, rng);
        const Encoding y = random_encoding(1 + static_cast<Eigen::Index>(rng.below(6)), 4, rng);
        const OverlapMask m = OverlapMask::zeros(static_cast<std::size_t>(y.tokens.rows()),
                                                 static_cast<std::size_t>(x.tokens.rows()));
        EXPECT_NEAR(score_relaxed_coil(x, y, m).logit, score_biencoder(x, y).logit, 1e-12);
    }
}

TEST(RelaxedCoil, TwoTokenHandUnrolled) {
    Rng rng(3);
    const Encoding e = random_encoding(2, 3, rng);
    OverlapMask full = OverlapMask::zeros(2, 2);
    for (std::size_t l = 0; l < 2; ++l)
        for (std::size_t k = 0; k < 2; ++k) full.set(l, k, true);
    const auto v0 = e.tokens.row(0), v1 = e.tokens.row(1);
    const double want = e.cls.dot(e.cls) + std::max(v0.dot(v0), v0.dot(v1)) + std::max(v1.dot(v0), v1.dot(v1));
    EXPECT_NEAR(score_relaxed_coil(e, e, full).logit, want, 1e-12);
}

TEST(RelaxedCoil, MaxSemantics) {
    // One document token against three description tokens with dots 0.2, 0.9, -0.4.
    Encoding doc{Vector::Zero(2), Matrix(1, 2)};
    doc.tokens << 1.0, 0.0;
    Encoding desc{Vector::Zero(2), Matrix(3, 2)};
    desc.tokens << 0.2, 0.5, 0.9, -0.3, -0.4, 0.1;
    OverlapMask m = OverlapMask::zeros(3, 1);
    for (std::size_t l = 0; l < 3; ++l) m.set(l, 0, true);
    EXPECT_DOUBLE_EQ(score_relaxed_coil(doc, desc, m).logit, 0.9);
    EXPECT_THROW(score_relaxed_coil(doc, desc, OverlapMask::zeros(2, 1)), ConsistencyError);
}

TEST(RelaxedCoil, ContributionIsMaxOverEnabledSet) {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const Encoding doc = random_encoding(1, 3, rng);
        const Encoding desc = random_encoding(5, 3, rng);
        OverlapMask m = OverlapMask::zeros(5, 1);
        std::optional<double> want;
        for (std::size_t l = 0; l < 5; ++l)
            if (rng.bernoulli(0.5)) {
                m.set(l, 0, true);
                const double d = doc.tokens.row(0).dot(desc.tokens.row(static_cast<Eigen::Index>(l)));
                want = want ? std::max(*want, d) : d;
            }
        const double base = doc.cls.dot(desc.cls);
        EXPECT_NEAR(score_relaxed_coil(doc, desc, m).logit - base, want.value_or(0.0), 1e-12);
    }
}

TEST(RelaxedCoil, LogitBound) {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = 1 + static_cast<Eigen::Index>(rng.below(8));
        const Encoding x = random_encoding(n, 6, rng), y = random_encoding(4, 6, rng);
        OverlapMask m = OverlapMask::zeros(4, static_cast<std::size_t>(n));
        for (auto& b : m.bits) b = rng.bernoulli(0.4);
        const ScoredLabel s = score_relaxed_coil(x, y, m);
        EXPECT_LE(std::abs(s.logit), 6.0 * (1.0 + static_cast<double>(n)));
        EXPECT_NEAR(s.probability, sigmoid(s.logit), 1e-12);
    }
}

TEST(RelaxedCoil, SingletonClustersEqualExactCoil) {
    const Vocabulary v = build_vocab({"red green blue cyan magenta"});
    const ClusterMap singles = ClusterMap::singletons(v.size());
    Rng rng(6);
    const std::vector<std::string> pool{"red", "green", "blue", "cyan", "magenta", "zzz", "yyy"};
    for (int trial = 0; trial < 100; ++trial) {
        std::string dt, qt;
        for (int i = 0; i < 6; ++i) dt += pool[rng.below(pool.size())] + " ";
        for (int i = 0; i < 4; ++i) qt += pool[rng.below(pool.size())] + " ";
        const TokenizedText doc = prepare_text(dt, v, singles, 0);
        const TokenizedText desc = prepare_text(qt, v, singles, 0);
        const Encoding x = random_encoding(6, 3, rng), y = random_encoding(4, 3, rng);
        const double exact = score_exact_coil(x, y, doc.words, desc.words).logit;
        EXPECT_NEAR(relaxed_coil_logit(x, y, doc.cluster_keys, desc.cluster_keys), exact, 1e-12);
        EXPECT_NEAR(score_relaxed_coil(x, y, overlap_mask(desc.cluster_keys, doc.cluster_keys)).logit, exact, 1e-12);
    }
}

TEST(PrepareText, TruncatesAndHandlesEmpty) {
    const Vocabulary v = build_vocab({"a b c"});
    const ClusterMap m = ClusterMap::singletons(v.size());
    EXPECT_EQ(prepare_text("a b c a", v, m, 2).words, (std::vector<std::string>{"a", "b"}));
    const TokenizedText e = prepare_text("?!", v, m, 0);
    ASSERT_EQ(e.size(), 1u);
    EXPECT_EQ(e.ids[0], -1);
    EXPECT_LT(e.cluster_keys[0], 0);
}

struct Fixture {
    Vocabulary vocab;
    ClusterMap map;
    ModelParams params;
    LabelSet labels;

    explicit Fixture(int num_labels, int descriptions_per_label) {
        Rng rng(77);
        std::vector<std::string> words;
        for (int i = 0; i < 40; ++i) words.push_back("w" + std::to_string(i));
        std::vector<LabelRecord> recs;
        std::vector<std::string> texts;
        for (int i = 0; i < num_labels; ++i) {
            char id[8];
            std::snprintf(id, sizeof id, "L%02d", i);
            LabelRecord r{id, id, {}, {}, {}, {}};
            for (int d = 0; d < descriptions_per_label; ++d) {
                std::string t;
                for (int k = 0; k < 5; ++k) t += words[rng.below(words.size())] + " ";
                r.descriptions.push_back(Description{t, DescriptionSource::kScraped, {}});
                texts.push_back(t);
            }
            recs.push_back(r);
        }
        labels = LabelSet(recs);
        vocab = build_vocab(texts);
        map = ClusterMap::singletons(vocab.size());
        ModelConfig c;
        c.input_dim = 8;
        c.output_dim = 6;
        params = init_model(vocab, c, 3);
    }

    Shortlister shortlister() const {
        std::vector<std::string> ids;
        std::vector<SparseVector> vecs;
        for (const auto& l : labels) {
            ids.push_back(l.id);
            vecs.push_back(tfidf_vector(label_text(l), vocab));
        }
        return Shortlister(ids, vecs, vocab.size());
    }
};

TEST(Store, CardinalityReloadAndGuards) {
    const Fixture f(3, 2);
    const DescriptionStore store = precompute_store(f.params, f.labels, f.vocab, f.map, 0);
    EXPECT_EQ(store.size(), 6u);
    EXPECT_GT(store.payload_bytes(), 0u);

    semxc::testing::TempDir dir;
    store.save(dir.path() / "store.bin");
    const DescriptionStore back = DescriptionStore::load(dir.path() / "store.bin", f.params, f.vocab, f.map);
    ASSERT_EQ(back.size(), store.size());
    Rng rng(8);
    const Encoding doc = random_encoding(4, 8, rng);
    const std::vector<std::int64_t> keys{0, 1, 2, 3};
    for (std::size_t i = 0; i < store.size(); ++i) {
        EXPECT_EQ(back.entries()[i].encoding.tokens, store.entries()[i].encoding.tokens);
        EXPECT_EQ(relaxed_coil_logit(doc, back.entries()[i].encoding, keys, back.entries()[i].tokens.cluster_keys),
                  relaxed_coil_logit(doc, store.entries()[i].encoding, keys, store.entries()[i].tokens.cluster_keys));
    }

    ModelParams perturbed = f.params;
    perturbed.output.context_mixer(0, 0) += 1e-9;
    EXPECT_THROW(DescriptionStore::load(dir.path() / "store.bin", perturbed, f.vocab, f.map), ConsistencyError);
    EXPECT_THROW(DescriptionStore::load(dir.path() / "store.bin", f.params, f.vocab, ClusterMap({std::vector<std::int32_t>(f.vocab.size(), 0)})),
                 ConsistencyError);
}

TEST(Store, ReproducibleBitExactly) {
    const Fixture f(4, 3);
    const DescriptionStore a = precompute_store(f.params, f.labels, f.vocab, f.map, 0);
    const DescriptionStore b = precompute_store(f.params, f.labels, f.vocab, f.map, 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.entries()[i].encoding.cls, b.entries()[i].encoding.cls);
        EXPECT_EQ(a.entries()[i].encoding.tokens, b.entries()[i].encoding.tokens);
    }
}

TEST(Predict, TotalShortlistEqualsBruteForce) {
    const Fixture f(50, 2);
    const DescriptionStore store = precompute_store(f.params, f.labels, f.vocab, f.map, 0);
    const Shortlister sl = f.shortlister();
    PredictConfig cfg;
    cfg.k_shortlist = 50;
    cfg.k_out = 50;
    cfg.seed = 11;
    const Predictor p(f.params, f.vocab, f.map, store, sl, cfg);
    const Document doc{"doc1", "w1 w2 w3 w5 w8 w13 w21 w34", {}};

    // Brute force: encode, pick the seeded description, score, sort.
    const TokenizedText t = prepare_text(doc.text, f.vocab, f.map, 0);
    const Encoding x = encode(f.params.input, f.params.input.rows_for(t.ids));
    std::vector<std::pair<double, std::string>> want;
    for (const auto& l : f.labels) {
        const auto idx = sample_description(11, doc.id, l.id, l.descriptions.size());
        const TokenizedText d = prepare_text(l.descriptions[idx].text, f.vocab, f.map, 0);
        const Encoding y = project_description(f.params, encode(f.params.output, f.params.output.rows_for(d.ids)));
        const double logit = score_relaxed_coil(x, y, overlap_mask(d.cluster_keys, t.cluster_keys)).logit;
        want.emplace_back(-logit, l.id);
    }
    std::sort(want.begin(), want.end());
    const auto got = p.predict(doc);
    ASSERT_EQ(got.size(), 50u);
    for (std::size_t i = 0; i < 50; ++i) {
        EXPECT_EQ(got[i].label_id, want[i].second);
        EXPECT_NEAR(got[i].logit, -want[i].first, 1e-12);
    }
}

TEST(Predict, OutputConfinedToShortlist) {
    const Fixture f(30, 1);
    const DescriptionStore store = precompute_store(f.params, f.labels, f.vocab, f.map, 0);
    const Shortlister sl = f.shortlister();
    PredictConfig cfg;
    cfg.k_shortlist = 5;
    cfg.k_out = 10;
    const Predictor p(f.params, f.vocab, f.map, store, sl, cfg);
    const Document doc{"d", "w3 w4 w5", {}};
    std::set<std::string> allowed;
    for (const auto& s : sl.shortlist(tfidf_vector(doc.text, f.vocab), 5)) allowed.insert(s.id);
    const auto got = p.predict(doc);
    EXPECT_EQ(got.size(), 5u);
    for (const auto& s : got) EXPECT_TRUE(allowed.count(s.label_id));
}

TEST(Predict, ParallelMatchesSerialAndEnsembleRange) {
    const Fixture f(20, 2);
    const DescriptionStore store = precompute_store(f.params, f.labels, f.vocab, f.map, 0);
    const Shortlister sl = f.shortlister();
    std::vector<Document> docs;
    for (int i = 0; i < 12; ++i) docs.push_back(Document{"d" + std::to_string(i), "w" + std::to_string(i) + " w7 w9", {}});
    PredictConfig cfg;
    cfg.k_shortlist = 10;
    cfg.k_out = 5;
    cfg.ensemble_alpha = 0.3;
    const Predictor p(f.params, f.vocab, f.map, store, sl, cfg);
    const auto a = p.predict_all(docs);
    const auto b = p.predict_all_serial(docs);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_EQ(a[i].size(), 5u);
        for (std::size_t j = 0; j < a[i].size(); ++j) {
            EXPECT_EQ(a[i][j].label_id, b[i][j].label_id);
            EXPECT_EQ(a[i][j].score, b[i][j].score);
            EXPECT_GE(a[i][j].score, 0.0);
            EXPECT_LE(a[i][j].score, 1.0);
        }
    }
}

TEST(Predict, StaleStoreRejected) {
    const Fixture f(5, 1);
    const DescriptionStore store = precompute_store(f.params, f.labels, f.vocab, f.map, 0);
    const Shortlister sl = f.shortlister();
    ModelParams other = f.params;
    other.input.cls_projector(1, 1) += 0.5;
    EXPECT_THROW(Predictor(other, f.vocab, f.map, store, sl, PredictConfig{}), ConsistencyError);
}

}  // namespace
}  // namespace semxc
