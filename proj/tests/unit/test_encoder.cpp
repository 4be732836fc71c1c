#include <gtest/gtest.h>

#include "semxc/cluster.hpp"
#include "semxc/encoder.hpp"
#include "semxc/error.hpp"
#include "semxc/gradcheck.hpp"
#include "semxc/rng.hpp"
#include "semxc/sparse.hpp"
#include "test_util.hpp"

namespace semxc {
namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

EncoderParams random_encoder(Eigen::Index vocab_rows, Eigen::Index d, int window, Rng& rng) {
    EncoderParams p;
    p.token_embeddings = random_matrix(vocab_rows, d, rng, 0.7);
    p.context_mixer = random_matrix(d, d, rng, 0.6);
    p.cls_projector = random_matrix(d, d, rng, 0.6);
    p.window = window;
    return p;
}

Matrix dense_rows(const SparseRows& s, Eigen::Index rows, Eigen::Index cols) {
    Matrix m = Matrix::Zero(rows, cols);
    for (const auto& [r, g] : s.rows) m.row(r) = g.transpose();
    return m;
}

TEST(Encode, ZeroFixedPoint) {
    EncoderParams p;
    p.token_embeddings = Matrix::Zero(2, 3);
    p.context_mixer = Matrix::Identity(3, 3);
    p.cls_projector = Matrix::Identity(3, 3);
    const std::vector<std::int32_t> rows{0};
    const Encoding e = encode(p, rows);
    EXPECT_EQ(e.cls, Vector::Zero(3));
    EXPECT_EQ(e.tokens, Matrix::Zero(1, 3));
}

TEST(Encode, BoundedAndDeterministic) {
    Rng rng(1);
    EncoderParams p = random_encoder(8, 5, 1, rng);
    p.token_embeddings *= 3.0;
    const std::vector<std::int32_t> rows{0, 3, 3, 7, 1};
    const Encoding a = encode(p, rows);
    const Encoding b = encode(p, rows);
    EXPECT_EQ(a.tokens, b.tokens);
    EXPECT_EQ(a.cls, b.cls);
    EXPECT_EQ(a.tokens.rows(), 5);
    EXPECT_LT(a.tokens.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_LT(a.cls.cwiseAbs().maxCoeff(), 1.0);
}

TEST(Encode, PermutationWithoutContextPermutesRows) {
    Rng rng(2);
    const EncoderParams p = random_encoder(6, 4, 0, rng);
    const std::vector<std::int32_t> rows{0, 1, 2, 5};
    const std::vector<std::int32_t> perm{5, 2, 0, 1};
    const Encoding a = encode(p, rows);
    const Encoding b = encode(p, perm);
    EXPECT_EQ(a.tokens.row(3), b.tokens.row(0));
    EXPECT_EQ(a.tokens.row(2), b.tokens.row(1));
    EXPECT_EQ(a.tokens.row(0), b.tokens.row(2));
    EXPECT_EQ(a.tokens.row(1), b.tokens.row(3));
    EXPECT_TRUE(a.cls.isApprox(b.cls, 1e-14));
}

TEST(Encode, RejectsBadInput) {
    Rng rng(3);
    const EncoderParams p = random_encoder(4, 3, 1, rng);
    EXPECT_THROW(encode(p, std::vector<std::int32_t>{}), ConsistencyError);
    EXPECT_THROW(encode(p, std::vector<std::int32_t>{4}), ConsistencyError);
    const std::vector<std::int32_t> rows{0, 1};
    EXPECT_THROW(encode_backward(p, rows, Vector::Zero(3), Matrix::Zero(3, 3)), ConsistencyError);
}

TEST(EncodeBackward, ZeroUpstreamGivesZeroGradients) {
    Rng rng(4);
    const EncoderParams p = random_encoder(5, 3, 1, rng);
    const std::vector<std::int32_t> rows{0, 2, 4};
    const EncoderGrads g = encode_backward(p, rows, Vector::Zero(3), Matrix::Zero(3, 3));
    EXPECT_EQ(g.context_mixer.norm(), 0.0);
    EXPECT_EQ(g.cls_projector.norm(), 0.0);
    EXPECT_EQ(g.token_embeddings.squared_norm(), 0.0);
}

TEST(EncodeBackward, UnusedRowsReceiveNoGradient) {
    Rng rng(5);
    const EncoderParams p = random_encoder(6, 3, 1, rng);
    const std::vector<std::int32_t> rows{1, 4};
    const EncoderGrads g = encode_backward(p, rows, Vector::Ones(3), Matrix::Ones(2, 3));
    for (const auto& [r, v] : g.token_embeddings.rows) EXPECT_TRUE(r == 1 || r == 4);
}

class EncoderGradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(EncoderGradientCheck, MatchesCentralDifferences) {
    Rng rng(100 + static_cast<std::uint64_t>(GetParam()));
    const int window = GetParam() % 3;
    EncoderParams p = random_encoder(7, 4, window, rng);
    std::vector<std::int32_t> rows(2 + rng.below(4));
    for (auto& r : rows) r = static_cast<std::int32_t>(rng.below(7));
    const Vector g_cls = random_matrix(4, 1, rng);
    const Matrix g_tok = random_matrix(static_cast<Eigen::Index>(rows.size()), 4, rng);

    auto objective = [&] {
        const Encoding e = encode(p, rows);
        return g_cls.dot(e.cls) + (g_tok.array() * e.tokens.array()).sum();
    };
    const EncoderGrads g = encode_backward(p, rows, g_cls, g_tok);
    EXPECT_LT(relative_error(dense_rows(g.token_embeddings, 7, 4), numeric_gradient(objective, p.token_embeddings)), 1e-4);
    EXPECT_LT(relative_error(g.context_mixer, numeric_gradient(objective, p.context_mixer)), 1e-4);
    EXPECT_LT(relative_error(g.cls_projector, numeric_gradient(objective, p.cls_projector)), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(RandomPoints, EncoderGradientCheck, ::testing::Range(0, 20));

TEST(Adapter, BackwardMatchesCentralDifferences) {
    Rng rng(6);
    ModelParams m;
    m.adapter = random_matrix(3, 5, rng);
    const Encoding raw{random_matrix(5, 1, rng), random_matrix(4, 5, rng)};
    const Vector g_cls = random_matrix(3, 1, rng);
    const Matrix g_tok = random_matrix(4, 3, rng);
    auto objective = [&] {
        const Encoding e = project_description(m, raw);
        return g_cls.dot(e.cls) + (g_tok.array() * e.tokens.array()).sum();
    };
    Matrix g_adapter = Matrix::Zero(3, 5);
    const Encoding g_raw = project_description_backward(m, raw, g_cls, g_tok, &g_adapter);
    EXPECT_LT(relative_error(g_adapter, numeric_gradient(objective, *m.adapter)), 1e-6);

    Encoding moved = raw;
    auto raw_objective = [&] {
        const Encoding e = project_description(m, moved);
        return g_cls.dot(e.cls) + (g_tok.array() * e.tokens.array()).sum();
    };
    Matrix cls_as_matrix = moved.cls;
    auto via_cls = [&] {
        moved.cls = cls_as_matrix;
        return raw_objective();
    };
    EXPECT_LT(relative_error(g_raw.cls, numeric_gradient(via_cls, cls_as_matrix)), 1e-6);
    moved.cls = raw.cls;
    EXPECT_LT(relative_error(g_raw.tokens, numeric_gradient(raw_objective, moved.tokens)), 1e-6);
}

TEST(InitModel, DeterministicAndLemmaAware) {
    const Vocabulary v = build_vocab({"walk walking walked tree river photo"});
    ModelConfig c;
    const ModelParams a = init_model(v, c, 42);
    const ModelParams b = init_model(v, c, 42);
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_NE(a.hash(), init_model(v, c, 43).hash());
    EXPECT_FALSE(a.adapter.has_value());

    const Matrix& e = a.input.token_embeddings;
    auto cos = [&](const std::string& x, const std::string& y) {
        const auto rx = e.row(v.lookup(x));
        const auto ry = e.row(v.lookup(y));
        return rx.dot(ry) / (rx.norm() * ry.norm());
    };
    EXPECT_GT(cos("walk", "walking"), 0.6);
    EXPECT_LT(std::abs(cos("walk", "river")), 0.6);

    c.output_dim = 32;
    const ModelParams asym = init_model(v, c, 42);
    ASSERT_TRUE(asym.adapter.has_value());
    EXPECT_EQ(asym.adapter->rows(), 64);
    EXPECT_EQ(asym.adapter->cols(), 32);
}

TEST(Freeze, FrozenBlocksStayBitIdentical) {
    const Vocabulary v = build_vocab({"a b c d"});
    ModelParams m = init_model(v, ModelConfig{8, 8, 1}, 1);
    const ModelParams before = m;
    const FreezeMask mask = freeze(m, {"token_embeddings"});
    Rng rng(9);
    for (int step = 0; step < 10; ++step) {
        ModelGrads g = ModelGrads::zeros_like(m);
        g.input.token_embeddings.add(1, random_matrix(8, 1, rng));
        g.output.token_embeddings.add(2, random_matrix(8, 1, rng));
        g.input.context_mixer = random_matrix(8, 8, rng);
        apply_sgd(m, g, mask, 0.1, 0.1, 0.01);
    }
    EXPECT_EQ(m.input.token_embeddings, before.input.token_embeddings);
    EXPECT_EQ(m.output.token_embeddings, before.output.token_embeddings);
    EXPECT_NE(m.input.context_mixer, before.input.context_mixer);
    EXPECT_THROW(freeze(m, {"attention"}), ConsistencyError);
    EXPECT_EQ(freeze(m, component_ids(m)).frozen.size(), 6u);
}

TEST(Freeze, NothingFrozenEverythingMoves) {
    const Vocabulary v = build_vocab({"a b"});
    ModelParams m = init_model(v, ModelConfig{4, 4, 1}, 2);
    const ModelParams before = m;
    ModelGrads g = ModelGrads::zeros_like(m);
    for (auto* enc : {&g.input, &g.output}) {
        enc->token_embeddings.add(0, Vector::Ones(4));
        enc->context_mixer.setOnes();
        enc->cls_projector.setOnes();
    }
    apply_sgd(m, g, FreezeMask{}, 0.1, 0.1);
    EXPECT_NE(m.input.token_embeddings, before.input.token_embeddings);
    EXPECT_NE(m.input.context_mixer, before.input.context_mixer);
    EXPECT_NE(m.input.cls_projector, before.input.cls_projector);
    EXPECT_NE(m.output.token_embeddings, before.output.token_embeddings);
    EXPECT_NE(m.output.context_mixer, before.output.context_mixer);
    EXPECT_NE(m.output.cls_projector, before.output.cls_projector);
}

TEST(ModelFile, RoundTripAndVocabularyGuard) {
    semxc::testing::TempDir dir;
    const Vocabulary v = build_vocab({"x y z"});
    ModelConfig c;
    c.input_dim = 6;
    c.output_dim = 4;
    const ModelParams m = init_model(v, c, 5);
    save_model(m, v, dir.path() / "params.bin");
    const ModelParams back = load_model(dir.path() / "params.bin", v);
    EXPECT_EQ(back.hash(), m.hash());
    EXPECT_THROW(load_model(dir.path() / "params.bin", build_vocab({"x y w"})), ConsistencyError);
}

}  // namespace
}  // namespace semxc
