#include "semxc/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "semxc/cluster.hpp"
#include "semxc/corpus.hpp"
#include "semxc/descpipe.hpp"
#include "semxc/error.hpp"
#include "semxc/io.hpp"
#include "semxc/rng.hpp"
#include "semxc/sparse.hpp"

namespace semxc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

json PipelineConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["demo"] = {{"num_labels", demo.num_labels},         {"num_docs", demo.num_docs},
                 {"signatures", demo.signatures},         {"bare_probability", demo.bare_probability},
                 {"filler_min", demo.filler_min},         {"filler_max", demo.filler_max},
                 {"junk_only_every", demo.junk_only_every}};
    j["clean"] = {{"rules", rules_path ? json(*rules_path) : json(nullptr)},
                  {"augment_copies", augment_copies},
                  {"augment_p", augment_p},
                  {"use_constituents", use_constituents}};
    j["split"] = {{"unseen_fraction", unseen_fraction}, {"fewshot_k", fewshot_k ? json(*fewshot_k) : json(nullptr)}};
    j["index"] = {{"min_df", min_df}};
    j["model"] = model.to_json();
    j["cluster"] = {{"threshold", cluster_threshold}, {"lemma_merge", lemma_merge}, {"embedding_table", cluster_table}};
    json t = train.to_json();
    t.erase("seed");
    j["train"] = t;
    j["predict"] = {{"k_shortlist", k_shortlist},
                    {"k_out", k_out},
                    {"scorer", scorer},
                    {"ensemble_alpha", ensemble_alpha ? json(*ensemble_alpha) : json(nullptr)}};
    j["eval"] = {{"setting", semxc::to_string(setting)}, {"ks", ks}};
    return j;
}

PipelineConfig PipelineConfig::from_json(const json& j) {
    if (!j.is_object()) throw InputError("config: expected a JSON object");
    PipelineConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        if (auto it = j.find("demo"); it != j.end()) {
            c.demo.num_labels = it->value("num_labels", c.demo.num_labels);
            c.demo.num_docs = it->value("num_docs", c.demo.num_docs);
            c.demo.signatures = it->value("signatures", c.demo.signatures);
            c.demo.bare_probability = it->value("bare_probability", c.demo.bare_probability);
            c.demo.filler_min = it->value("filler_min", c.demo.filler_min);
            c.demo.filler_max = it->value("filler_max", c.demo.filler_max);
            c.demo.junk_only_every = it->value("junk_only_every", c.demo.junk_only_every);
        }
        if (auto it = j.find("clean"); it != j.end()) {
            if (it->contains("rules") && (*it)["rules"].is_string()) c.rules_path = (*it)["rules"].get<std::string>();
            c.augment_copies = it->value("augment_copies", c.augment_copies);
            c.augment_p = it->value("augment_p", c.augment_p);
            c.use_constituents = it->value("use_constituents", c.use_constituents);
        }
        if (auto it = j.find("split"); it != j.end()) {
            c.unseen_fraction = it->value("unseen_fraction", c.unseen_fraction);
            if (it->contains("fewshot_k") && !(*it)["fewshot_k"].is_null()) c.fewshot_k = (*it)["fewshot_k"].get<int>();
        }
        if (auto it = j.find("index"); it != j.end()) c.min_df = it->value("min_df", c.min_df);
        if (auto it = j.find("model"); it != j.end()) c.model = ModelConfig::from_json(*it);
        if (auto it = j.find("cluster"); it != j.end()) {
            c.cluster_threshold = it->value("threshold", c.cluster_threshold);
            c.lemma_merge = it->value("lemma_merge", c.lemma_merge);
            c.cluster_table = it->value("embedding_table", c.cluster_table);
            if (c.cluster_table != "input" && c.cluster_table != "output")
                throw InputError("cluster.embedding_table must be \"input\" or \"output\"");
        }
        if (auto it = j.find("train"); it != j.end()) c.train = TrainConfig::from_json(*it);
        if (auto it = j.find("predict"); it != j.end()) {
            c.k_shortlist = it->value("k_shortlist", c.k_shortlist);
            c.k_out = it->value("k_out", c.k_out);
            c.scorer = it->value("scorer", c.scorer);
            if (it->contains("ensemble_alpha") && !(*it)["ensemble_alpha"].is_null())
                c.ensemble_alpha = (*it)["ensemble_alpha"].get<double>();
        }
        if (auto it = j.find("eval"); it != j.end()) {
            if (it->contains("setting")) c.setting = setting_from_string((*it)["setting"].get<std::string>());
            c.ks = it->value("ks", c.ks);
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("config: ") + e.what());
    }
    if (c.scorer != "tfidf") scorer_mode_from_string(c.scorer);
    if (!(c.unseen_fraction > 0.0 && c.unseen_fraction < 1.0))
        throw InputError("config: split.unseen_fraction must lie in (0, 1)");
    if (c.ks.empty() || std::count(c.ks.begin(), c.ks.end(), 0u)) throw InputError("config: eval.ks must be positive");
    return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
        throw InputError(path.string() + ": invalid JSON: " + e.what());
    }
    PipelineConfig c = from_json(j);
    // A relative rules path is relative to the config file.
    if (c.rules_path && fs::path(*c.rules_path).is_relative())
        c.rules_path = (path.parent_path() / *c.rules_path).lexically_normal().string();
    return c;
}

json RunManifest::to_json() const {
    return json{{"command", command}, {"config_hash", config_hash}, {"inputs", inputs},
                {"seeds", seeds},     {"artifacts", artifacts},     {"timings", timings}};
}

std::uint64_t labels_fingerprint(const LabelSet& labels) {
    Fnv1a h;
    h.str("semxc-labels").u64(labels.size());
    for (const auto& l : labels) h.str(l.id).str(label_text(l));
    return h.digest();
}

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string config_path;
    std::string out_dir = ".";
    int threads = 0;
    bool quiet = false;
};

struct Paths {
    std::string documents, labels, snippets, rules, index, split, clusters, params, init_params, predictions, output;
};

class Context {
public:
    Context(std::string command, const Globals& g)
        : command_(std::move(command)), out_(g.out_dir), quiet_(g.quiet), start_(std::chrono::steady_clock::now()) {
        cfg = g.config_path.empty() ? PipelineConfig{} : PipelineConfig::load(g.config_path);
        if (g.seed) cfg.seed = *g.seed;
        fs::create_directories(out_);
        manifest.command = command_;
        manifest.seeds["seed"] = cfg.seed;
        if (!g.config_path.empty()) input(g.config_path);
    }

    fs::path out(const std::string& name) const { return out_ / name; }
    fs::path pick(const std::string& given, const std::string& fallback) const {
        return given.empty() ? out(fallback) : fs::path(given);
    }
    /// Curated labels when present, else the raw label file.
    fs::path labels_path(const std::string& given) const {
        if (!given.empty()) return given;
        return fs::exists(out("labels.clean.jsonl")) ? out("labels.clean.jsonl") : out("labels.jsonl");
    }

    std::string rel(const fs::path& p) const {
        const fs::path a = fs::weakly_canonical(p), b = fs::weakly_canonical(out_);
        const fs::path r = a.lexically_proximate(b);
        return (r.empty() ? a : r).generic_string();
    }

    void input(const fs::path& p) {
        if (!fs::exists(p)) throw InputError(p.string() + ": file not found");
        manifest.inputs[rel(p)] = io::hex64(io::file_hash(p));
    }
    void artifact(const fs::path& p) { manifest.artifacts.push_back(rel(p)); }
    std::string manifest_name() const { return manifest_name_; }
    /// Commands writing a named output get a manifest named after it, so
    /// repeated runs in one directory keep their provenance apart.
    void name_after(const std::string& output) {
        if (!output.empty()) manifest_name_ = fs::path(output).stem().string() + ".manifest.json";
    }

    void log(const std::string& msg) const {
        if (!quiet_) std::cerr << "[" << command_ << "] " << msg << "\n";
    }
    void lap(const std::string& phase) {
        const auto now = std::chrono::steady_clock::now();
        manifest.timings[phase] = std::chrono::duration<double>(now - lap_).count();
        lap_ = now;
    }

    void finish() {
        manifest.config_hash = io::hex64(fnv1a(io::dump_json(cfg.to_json())));
        manifest.timings["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        io::write_file(out(manifest_name()), io::dump_json(manifest.to_json()));
    }

    PipelineConfig cfg;
    RunManifest manifest;

private:
    std::string command_;
    std::string manifest_name_ = command_ + ".manifest.json";
    fs::path out_;
    bool quiet_;
    std::chrono::steady_clock::time_point start_;
    std::chrono::steady_clock::time_point lap_ = std::chrono::steady_clock::now();
};

Corpus read_corpus(Context& ctx, const fs::path& docs, const fs::path& labels) {
    ctx.input(docs);
    ctx.input(labels);
    Corpus c = load_corpus(docs, labels);
    for (const auto& w : c.warnings) ctx.log("warning: " + w);
    return c;
}

TfidfIndex read_index(Context& ctx, const fs::path& path, const LabelSet& labels) {
    ctx.input(path);
    json meta;
    TfidfIndex idx = TfidfIndex::load(path, &meta);
    if (meta.value("labels_fingerprint", std::string()) != io::hex64(labels_fingerprint(labels)))
        throw ConsistencyError(path.string() + ": index was built from a different label file; rerun `semxc index`");
    return idx;
}

void write_jsonl(const fs::path& path, const std::vector<json>& rows) {
    std::string out;
    for (const auto& r : rows) out += r.dump() + "\n";
    io::write_file(path, out);
}

// ---------------------------------------------------------------------------

int cmd_demo(Context& ctx) {
    DemoConfig dc = ctx.cfg.demo;
    dc.seed = derive_seed(ctx.cfg.seed, "demo");
    ctx.manifest.seeds["demo"] = dc.seed;
    const DemoData data = generate_demo(dc);
    save_documents(data.documents, ctx.out("documents.jsonl"));
    save_labels(data.labels, ctx.out("labels.jsonl"));
    std::vector<json> rows;
    for (const auto& s : data.snippets) rows.push_back({{"label_id", s.label_id}, {"rank", s.rank}, {"text", s.text}});
    write_jsonl(ctx.out("raw_snippets.jsonl"), rows);
    json sig = json::object();
    for (const auto& [id, stems] : data.signatures) sig[id] = stems;
    io::write_file(ctx.out("signatures.json"), io::dump_json(sig));
    for (const char* f : {"documents.jsonl", "labels.jsonl", "raw_snippets.jsonl", "signatures.json"})
        ctx.artifact(ctx.out(f));
    ctx.log("wrote " + std::to_string(data.documents.size()) + " documents, " + std::to_string(data.labels.size()) +
            " labels, " + std::to_string(data.snippets.size()) + " snippets");
    return 0;
}

int cmd_clean(Context& ctx, const Paths& p) {
    const fs::path labels_path = ctx.pick(p.labels, "labels.jsonl");
    const fs::path snippets_path = ctx.pick(p.snippets, "raw_snippets.jsonl");
    const fs::path docs_path = ctx.pick(p.documents, "documents.jsonl");
    ctx.input(labels_path);
    ctx.input(snippets_path);
    const LabelSet labels = load_labels(labels_path);
    const std::vector<RawSnippet> snippets = load_snippets(snippets_path);
    std::vector<Document> docs;
    if (fs::exists(docs_path)) {
        ctx.input(docs_path);
        docs = load_documents(docs_path);
    }
    CurationOptions opts;
    const std::string rules = !p.rules.empty() ? p.rules : ctx.cfg.rules_path.value_or("");
    if (!rules.empty()) {
        ctx.input(rules);
        opts.rules = RuleConfig::load(rules);
    }
    opts.augment_copies = ctx.cfg.augment_copies;
    opts.augment_p = ctx.cfg.augment_p;
    opts.use_constituents = ctx.cfg.use_constituents;
    opts.seed = derive_seed(ctx.cfg.seed, "clean");
    ctx.manifest.seeds["clean"] = opts.seed;

    const CurationResult r = curate_descriptions(labels, snippets, docs, opts);
    const fs::path out_labels = ctx.pick(p.output, "labels.clean.jsonl");
    save_labels(r.labels, out_labels);
    std::vector<json> cleaned;
    for (const auto& s : r.cleaned_snippets) cleaned.push_back({{"label_id", s.label_id}, {"rank", s.rank}, {"text", s.text}});
    write_jsonl(ctx.out("cleaned_snippets.jsonl"), cleaned);
    json report = r.report.to_json();
    report["rules"] = opts.rules.to_json();
    report["manifest"] = ctx.manifest_name();
    io::write_file(ctx.out("clean_report.json"), io::dump_json(report));
    ctx.artifact(out_labels);
    ctx.artifact(ctx.out("cleaned_snippets.jsonl"));
    ctx.artifact(ctx.out("clean_report.json"));
    ctx.log("accepted " + std::to_string(r.report.accepted) + " of " + std::to_string(r.report.snippets) +
            " snippets; " + std::to_string(r.report.fallback_labels) + " labels fell back to their name");
    return 0;
}

int cmd_index(Context& ctx, const Paths& p) {
    const Corpus corpus = read_corpus(ctx, ctx.pick(p.documents, "documents.jsonl"), ctx.labels_path(p.labels));
    std::vector<std::string> texts, ids, label_texts;
    for (const auto& d : corpus.documents) texts.push_back(d.text);
    for (const auto& l : corpus.labels) {
        ids.push_back(l.id);
        label_texts.push_back(label_text(l));
        texts.push_back(label_texts.back());
    }
    const TfidfIndex idx = TfidfIndex::build(texts, ids, label_texts, ctx.cfg.min_df);
    const std::string fingerprint = io::hex64(labels_fingerprint(corpus.labels));
    const fs::path index_path = ctx.pick(p.index, "index.bin");
    idx.save(index_path, {{"labels_fingerprint", fingerprint}, {"manifest", ctx.manifest_name()}});
    ctx.lap("index");

    const std::uint64_t split_seed = derive_seed(ctx.cfg.seed, "split");
    ctx.manifest.seeds["split"] = split_seed;
    SplitSpec split = make_zs_split(corpus, ctx.cfg.unseen_fraction, split_seed);
    if (ctx.cfg.fewshot_k) split = make_fs_split(corpus, split, *ctx.cfg.fewshot_k);
    const fs::path split_path = ctx.pick(p.split, "splits.json");
    save_split(split, split_path);
    ctx.artifact(index_path);
    ctx.artifact(split_path);
    ctx.log("vocabulary " + std::to_string(idx.vocab.size()) + " tokens, " + std::to_string(split.unseen_labels.size()) +
            " unseen labels");
    return 0;
}

int cmd_cluster(Context& ctx, const Paths& p, std::optional<double> threshold) {
    const fs::path index_path = ctx.pick(p.index, "index.bin");
    ctx.input(index_path);
    const TfidfIndex idx = TfidfIndex::load(index_path);
    ModelParams params;
    if (!p.params.empty()) {
        ctx.input(p.params);
        params = load_model(p.params, idx.vocab);
    } else {
        const std::uint64_t init_seed = derive_seed(ctx.cfg.seed, "init");
        ctx.manifest.seeds["init"] = init_seed;
        params = init_model(idx.vocab, ctx.cfg.model, init_seed);
        const fs::path init_path = ctx.pick(p.init_params, "params.init.bin");
        save_model(params, idx.vocab, init_path, {{"manifest", ctx.manifest_name()}});
        ctx.artifact(init_path);
    }
    const double t = threshold.value_or(ctx.cfg.cluster_threshold);
    const EncoderParams& table = ctx.cfg.cluster_table == "output" ? params.output : params.input;
    const Matrix emb = table.token_embeddings.topRows(static_cast<Eigen::Index>(idx.vocab.size()));
    ClusterMap map = embed_similarity_clusters(emb, t);
    if (ctx.cfg.lemma_merge) {
        const Lemmatizer lemma;
        map = merge_by_lemma(map, idx.vocab, [&](const std::string& w) { return lemma(w); });
    }
    const fs::path out = ctx.pick(p.clusters, "clusters.bin");
    save_cluster_map(map, idx.vocab, out,
                     {{"threshold", t},
                      {"lemma_merge", ctx.cfg.lemma_merge},
                      {"embedding_table", ctx.cfg.cluster_table},
                      {"lemmatizer_version", Lemmatizer::kVersion},
                      {"params_hash", io::hex64(params.hash())},
                      {"manifest", ctx.manifest_name()}});
    ctx.artifact(out);
    ctx.log(std::to_string(map.num_clusters()) + " clusters over " + std::to_string(map.size()) + " tokens");
    return 0;
}

struct Loaded {
    Corpus corpus;
    SplitSpec split;
    TfidfIndex index;
    ClusterMap map;
};

Loaded load_common(Context& ctx, const Paths& p) {
    Loaded l;
    l.corpus = read_corpus(ctx, ctx.pick(p.documents, "documents.jsonl"), ctx.labels_path(p.labels));
    const fs::path split_path = ctx.pick(p.split, "splits.json");
    ctx.input(split_path);
    l.split = load_split(split_path);
    l.index = read_index(ctx, ctx.pick(p.index, "index.bin"), l.corpus.labels);
    const fs::path clusters_path = ctx.pick(p.clusters, "clusters.bin");
    ctx.input(clusters_path);
    l.map = load_cluster_map(clusters_path, l.index.vocab);
    return l;
}

int cmd_train(Context& ctx, const Paths& p) {
    const Loaded l = load_common(ctx, p);
    const fs::path init_path = ctx.pick(p.init_params, "params.init.bin");
    ctx.input(init_path);
    ModelParams params = load_model(init_path, l.index.vocab);
    TrainConfig tc = ctx.cfg.train;
    tc.seed = derive_seed(ctx.cfg.seed, "train");
    ctx.manifest.seeds["train"] = tc.seed;
    const Shortlister sl = l.index.shortlister.subset(l.split.trainable_labels());
    ctx.lap("load");
    TrainResult r = train_loop(std::move(params), tc, l.corpus, l.split, l.index.vocab, l.map, sl);
    ctx.lap("train");

    const fs::path out = ctx.pick(p.params, "params.bin");
    save_model(r.params, l.index.vocab, out, {{"manifest", ctx.manifest_name()}});
    json log = json::array();
    for (const auto& e : r.log) {
        log.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"instances", e.instances}});
        ctx.log("epoch " + std::to_string(e.epoch) + " loss " + std::to_string(e.mean_loss));
    }
    json t = tc.to_json();
    io::write_file(ctx.out("train_log.json"),
                   io::dump_json({{"epochs", log},
                                  {"config", t},
                                  {"warnings", r.warnings},
                                  {"divergence", r.divergence ? json(*r.divergence) : json(nullptr)},
                                  {"manifest", ctx.manifest_name()}}));
    ctx.artifact(out);
    ctx.artifact(ctx.out("train_log.json"));
    if (r.divergence) throw NumericError("training diverged: " + *r.divergence + " (last finite parameters saved)");
    return 0;
}

int cmd_predict(Context& ctx, const Paths& p, std::optional<std::size_t> k, const std::string& scorer_flag,
                const std::string& setting_flag, bool all_docs) {
    const Loaded l = load_common(ctx, p);
    const Setting setting = setting_flag.empty() ? ctx.cfg.setting : setting_from_string(setting_flag);
    const std::string scorer = scorer_flag.empty() ? ctx.cfg.scorer : scorer_flag;
    const std::size_t k_out = k.value_or(ctx.cfg.k_out);
    if (k_out == 0) throw ConsistencyError("--k must be at least 1");
    const std::set<std::string> candidates = candidate_labels(l.split, setting);
    const Shortlister sl = l.index.shortlister.subset(candidates);

    std::vector<Document> docs;
    for (const auto& d : l.corpus.documents)
        if (all_docs || l.split.test_docs.count(d.id)) docs.push_back(d);

    std::vector<std::vector<ScoredLabel>> ranked;
    const fs::path out = ctx.pick(p.output, "predictions.jsonl");
    if (scorer == "tfidf") {
        for (const auto& d : docs) ranked.push_back(tfidf_rank(d, l.index.vocab, sl, k_out));
    } else {
        const fs::path params_path = ctx.pick(p.params, "params.bin");
        ctx.input(params_path);
        const ModelParams params = load_model(params_path, l.index.vocab);
        std::vector<LabelRecord> subset;
        for (const auto& r : l.corpus.labels)
            if (candidates.count(r.id)) subset.push_back(r);
        const std::size_t max_tokens = ctx.cfg.train.max_tokens;
        const DescriptionStore store = precompute_store(params, LabelSet(subset), l.index.vocab, l.map, max_tokens);
        const fs::path store_path = out.parent_path() / (out.stem().string() + ".store.bin");
        store.save(store_path);
        ctx.artifact(store_path);
        ctx.lap("store");
        PredictConfig pc;
        pc.k_shortlist = ctx.cfg.k_shortlist;
        pc.k_out = k_out;
        pc.mode = scorer_mode_from_string(scorer);
        pc.ensemble_alpha = ctx.cfg.ensemble_alpha;
        pc.seed = derive_seed(ctx.cfg.seed, "predict");
        pc.max_tokens = max_tokens;
        ctx.manifest.seeds["predict"] = pc.seed;
        const Predictor predictor(params, l.index.vocab, l.map, store, sl, pc);
        ranked = predictor.predict_all(docs);
    }
    ctx.lap("predict");
    std::vector<json> rows;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        json labels = json::array();
        for (const auto& s : ranked[i])
            labels.push_back({{"id", s.label_id}, {"logit", s.logit}, {"probability", s.probability}, {"score", s.score}});
        rows.push_back({{"doc", docs[i].id}, {"labels", labels}});
    }
    write_jsonl(out, rows);
    ctx.artifact(out);
    ctx.log(std::to_string(docs.size()) + " documents scored with " + scorer + " over " +
            std::to_string(candidates.size()) + " " + to_string(setting) + " candidates");
    return 0;
}

int cmd_eval(Context& ctx, const Paths& p, const std::string& setting_flag, bool with_oracle) {
    const Corpus corpus = read_corpus(ctx, ctx.pick(p.documents, "documents.jsonl"), ctx.labels_path(p.labels));
    const fs::path split_path = ctx.pick(p.split, "splits.json");
    ctx.input(split_path);
    const SplitSpec split = load_split(split_path);
    const fs::path pred_path = ctx.pick(p.predictions, "predictions.jsonl");
    ctx.input(pred_path);
    const RankedPredictions preds = load_predictions(pred_path);
    const Setting setting = setting_flag.empty() ? ctx.cfg.setting : setting_from_string(setting_flag);
    const EvalReport report = evaluate(preds, corpus, split, setting, ctx.cfg.ks);
    json j = report.to_json();
    j["p_unseen"] = p_unseen_metrics(preds, corpus, split, ctx.cfg.ks);
    if (with_oracle) j["oracle_seen"] = oracle_seen(corpus, split, ctx.cfg.ks).to_json();
    j["predictions"] = ctx.rel(pred_path);
    j["manifest"] = ctx.manifest_name();
    const fs::path out = ctx.pick(p.output, "eval_report.json");
    io::write_file(out, io::dump_json(j));
    ctx.artifact(out);
    for (const auto& [name, v] : report.metrics) ctx.log(name + " = " + std::to_string(v));
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Zero-shot extreme multi-label classification with curated label descriptions", "semxc"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Master seed (overrides the config)");
    app.add_option("--config", g.config_path, "Pipeline config JSON");
    app.add_option("--out-dir", g.out_dir, "Working directory for artifacts")->capture_default_str();
    app.add_option("--threads", g.threads, "OpenMP threads (0 keeps the runtime default)")->check(CLI::NonNegativeNumber);
    app.add_flag("--quiet", g.quiet, "No progress on standard error");

    Paths p;
    std::optional<std::size_t> k;
    std::optional<double> threshold;
    std::string scorer, setting;
    bool all_docs = false, with_oracle = false;

    auto* demo = app.add_subcommand("demo", "Write the planted-signal synthetic dataset");
    auto* clean = app.add_subcommand("clean", "Clean raw snippets into description pools");
    clean->add_option("--labels", p.labels, "labels.jsonl");
    clean->add_option("--snippets", p.snippets, "raw_snippets.jsonl");
    clean->add_option("--documents", p.documents, "documents.jsonl used for de-duplication");
    clean->add_option("--rules", p.rules, "Heuristic rules JSON");
    clean->add_option("--output", p.output, "Curated labels output");
    auto* index = app.add_subcommand("index", "Build the TF-IDF index and the split");
    index->add_option("--documents", p.documents);
    index->add_option("--labels", p.labels);
    index->add_option("--index", p.index, "Index output");
    index->add_option("--split", p.split, "Split output");
    auto* cluster = app.add_subcommand("cluster", "Initialise parameters and build token clusters");
    cluster->add_option("--index", p.index);
    cluster->add_option("--params", p.params, "Existing params.bin to cluster (default: fresh init)");
    cluster->add_option("--init-params", p.init_params, "Where to write the fresh init");
    cluster->add_option("--threshold", threshold, "Cosine threshold");
    cluster->add_option("--clusters", p.clusters, "Cluster map output");
    auto* train = app.add_subcommand("train", "Train the encoders");
    auto* predict = app.add_subcommand("predict", "Rank labels for documents");
    predict->add_option("--k", k, "Labels per document");
    predict->add_option("--scorer", scorer, "relaxed, coil, biencoder or tfidf");
    predict->add_option("--setting", setting, "ZS, GZS or FS");
    predict->add_option("--params", p.params);
    predict->add_option("--output", p.output, "Predictions output");
    predict->add_flag("--all-docs", all_docs, "Score every document, not only test documents");
    for (auto* sc : {train, predict}) {
        sc->add_option("--documents", p.documents);
        sc->add_option("--labels", p.labels);
        sc->add_option("--index", p.index);
        sc->add_option("--split", p.split);
        sc->add_option("--clusters", p.clusters);
    }
    train->add_option("--init-params", p.init_params);
    train->add_option("--params", p.params, "Trained params output");
    auto* eval = app.add_subcommand("eval", "Score predictions against the split");
    eval->add_option("--predictions", p.predictions);
    eval->add_option("--documents", p.documents);
    eval->add_option("--labels", p.labels);
    eval->add_option("--split", p.split);
    eval->add_option("--setting", setting, "ZS, GZS or FS");
    eval->add_option("--output", p.output, "Report output");
    eval->add_flag("--oracle-seen", with_oracle, "Add the Oracle_Seen diagnostic");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    if (!argv.empty()) argv.pop_back();  // program name
    try {
        app.parse(argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
#ifdef _OPENMP
        if (g.threads > 0) omp_set_num_threads(g.threads);
#endif
        const CLI::App* sub = app.get_subcommands().front();
        Context ctx(sub->get_name(), g);
        if (sub == predict || sub == eval) ctx.name_after(p.output);
        int rc = 0;
        try {
            if (sub == demo) rc = cmd_demo(ctx);
            else if (sub == clean) rc = cmd_clean(ctx, p);
            else if (sub == index) rc = cmd_index(ctx, p);
            else if (sub == cluster) rc = cmd_cluster(ctx, p, threshold);
            else if (sub == train) rc = cmd_train(ctx, p);
            else if (sub == predict) rc = cmd_predict(ctx, p, k, scorer, setting, all_docs);
            else if (sub == eval) rc = cmd_eval(ctx, p, setting, with_oracle);
        } catch (...) {
            ctx.finish();
            throw;
        }
        ctx.finish();
        return rc;
    } catch (const Error& e) {
        std::cerr << "semxc: error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "semxc: unexpected error: " << e.what() << "\n";
        return 1;
    }
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run(args);
}

}  // namespace semxc::cli
