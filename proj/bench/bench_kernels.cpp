// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include <memory>

#include "semxc/cluster.hpp"
#include "semxc/demo.hpp"
#include "semxc/descpipe.hpp"
#include "semxc/encoder.hpp"
#include "semxc/match.hpp"
#include "semxc/rng.hpp"
#include "semxc/sparse.hpp"
#include "semxc/train.hpp"

namespace semxc {
namespace {

/// Planted-signal task large enough for the kernels to dominate.
struct Workload {
    Corpus corpus;
    Vocabulary vocab;
    ModelParams params;
    ClusterMap map;
    Shortlister shortlister;
    SplitSpec split;
    std::vector<SparseVector> queries;
    std::vector<BatchPlan> plans;
    std::unique_ptr<TrainingText> text;
    DescriptionStore store;

    Workload() {
        DemoConfig dc;
        dc.num_labels = 1000;
        dc.num_docs = 2000;
        const DemoData demo = generate_demo(dc);
        corpus.documents = demo.documents;
        corpus.labels = curate_descriptions(demo.labels, demo.snippets, demo.documents, CurationOptions{}).labels;
        corpus.reindex();

        std::vector<std::string> texts, ids, label_texts;
        for (const auto& d : corpus.documents) texts.push_back(d.text);
        for (const auto& l : corpus.labels) {
            texts.push_back(label_text(l));
            ids.push_back(l.id);
            label_texts.push_back(label_text(l));
            split.seen_labels.insert(l.id);
        }
        vocab = build_vocab(texts);
        std::vector<SparseVector> vecs;
        for (const auto& t : label_texts) vecs.push_back(tfidf_vector(t, vocab));
        shortlister = Shortlister(ids, vecs, vocab.size());
        for (const auto& d : corpus.documents) {
            queries.push_back(tfidf_vector(d.text, vocab));
            split.train_docs.insert(d.id);
        }

        ModelConfig mc;
        mc.input_dim = mc.output_dim = 32;
        params = init_model(vocab, mc, 1);
        const Lemmatizer lem;
        map = merge_by_lemma(embed_similarity_clusters(params.input.token_embeddings.topRows(
                                 static_cast<Eigen::Index>(vocab.size()))),
                             vocab, [&](const std::string& w) { return lem(w); });
        text = std::make_unique<TrainingText>(corpus, vocab, map, 0);
        for (std::size_t i = 0; i < 64; ++i)
            plans.push_back(sample_negatives(corpus.documents[i], split, corpus.labels, vocab, shortlister, 64, i));
        store = precompute_store(params, corpus.labels, vocab, map, 0);
    }
};

const Workload& workload() {
    static const Workload w;
    return w;
}

void BM_ShortlistBatch(benchmark::State& state) {
    const Workload& w = workload();
    const bool parallel = state.range(0) != 0;
    for (auto _ : state) {
        auto r = parallel ? w.shortlister.shortlist_batch(w.queries, 100)
                          : w.shortlister.shortlist_batch_serial(w.queries, 100);
        benchmark::DoNotOptimize(r);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.queries.size()));
}
BENCHMARK(BM_ShortlistBatch)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_EmbedSimilarityClusters(benchmark::State& state) {
    Rng rng(3);
    Matrix e(state.range(1), 16);
    for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = rng.normal();
    const bool parallel = state.range(0) != 0;
    for (auto _ : state) {
        auto m = parallel ? embed_similarity_clusters(e) : embed_similarity_clusters_serial(e);
        benchmark::DoNotOptimize(m);
    }
}
BENCHMARK(BM_EmbedSimilarityClusters)
    ->ArgNames({"parallel", "tokens"})
    ->Args({0, 4000})
    ->Args({1, 4000})
    ->Unit(benchmark::kMillisecond);

void BM_BatchLossAndGrads(benchmark::State& state) {
    const Workload& w = workload();
    const bool parallel = state.range(0) != 0;
    for (auto _ : state) {
        auto r = parallel ? batch_loss_and_grads(w.params, w.plans, *w.text, ScorerMode::kRelaxed)
                          : batch_loss_and_grads_serial(w.params, w.plans, *w.text, ScorerMode::kRelaxed);
        benchmark::DoNotOptimize(r);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.plans.size()));
}
BENCHMARK(BM_BatchLossAndGrads)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_PredictAll(benchmark::State& state) {
    const Workload& w = workload();
    PredictConfig pc;
    pc.k_shortlist = 100;
    const Predictor predictor(w.params, w.vocab, w.map, w.store, w.shortlister, pc);
    const std::vector<Document> docs(w.corpus.documents.begin(), w.corpus.documents.begin() + 200);
    const bool parallel = state.range(0) != 0;
    for (auto _ : state) {
        auto r = parallel ? predictor.predict_all(docs) : predictor.predict_all_serial(docs);
        benchmark::DoNotOptimize(r);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(docs.size()));
}
BENCHMARK(BM_PredictAll)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace semxc

BENCHMARK_MAIN();
