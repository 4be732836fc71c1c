#include "semxc/match.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "semxc/error.hpp"
#include "semxc/io.hpp"
#include "semxc/rng.hpp"

namespace semxc {

std::string to_string(ScorerMode mode) {
    switch (mode) {
        case ScorerMode::kBiencoder: return "biencoder";
        case ScorerMode::kCoil: return "coil";
        case ScorerMode::kRelaxed: return "relaxed";
    }
    return "relaxed";
}

ScorerMode scorer_mode_from_string(const std::string& s) {
    if (s == "biencoder") return ScorerMode::kBiencoder;
    if (s == "coil") return ScorerMode::kCoil;
    if (s == "relaxed") return ScorerMode::kRelaxed;
    throw ConsistencyError("unknown scorer mode '" + s + "' (expected biencoder, coil or relaxed)");
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

ScoredLabel from_logit(double logit) {
    ScoredLabel s;
    s.logit = logit;
    s.probability = sigmoid(logit);
    s.score = logit;
    return s;
}

void check_dims(const Encoding& doc, const Encoding& desc) {
    if (doc.cls.size() != desc.cls.size() || doc.tokens.cols() != desc.tokens.cols() ||
        doc.tokens.cols() != doc.cls.size())
        throw ConsistencyError("score dimension mismatch between document and description encodings");
}

}  // namespace

ScoredLabel score_biencoder(const Encoding& doc, const Encoding& desc) {
    check_dims(doc, desc);
    return from_logit(doc.cls.dot(desc.cls));
}

ScoredLabel score_relaxed_coil(const Encoding& doc, const Encoding& desc, const OverlapMask& mask) {
    check_dims(doc, desc);
    if (mask.rows != static_cast<std::size_t>(desc.tokens.rows()) ||
        mask.cols != static_cast<std::size_t>(doc.tokens.rows()))
        throw ConsistencyError("overlap mask shape does not match the token counts");
    double logit = doc.cls.dot(desc.cls);
    for (std::size_t k = 0; k < mask.cols; ++k) {
        bool any = false;
        double best = 0.0;
        for (std::size_t l = 0; l < mask.rows; ++l) {
            if (!mask.at(l, k)) continue;
            const double d = doc.tokens.row(static_cast<Eigen::Index>(k)).dot(desc.tokens.row(static_cast<Eigen::Index>(l)));
            if (!any || d > best) best = d;
            any = true;
        }
        if (any) logit += best;
    }
    return from_logit(logit);
}

namespace {

/// Index of the best-matching description token for each document token,
/// or -1 when none shares its key.
std::vector<std::ptrdiff_t> best_matches(const Encoding& doc, const Encoding& desc,
                                         std::span<const std::int64_t> doc_keys,
                                         std::span<const std::int64_t> desc_keys, std::vector<double>& best) {
    if (doc_keys.size() != static_cast<std::size_t>(doc.tokens.rows()) ||
        desc_keys.size() != static_cast<std::size_t>(desc.tokens.rows()))
        throw ConsistencyError("token key count does not match the encoding");
    std::vector<std::ptrdiff_t> arg(doc_keys.size(), -1);
    best.assign(doc_keys.size(), 0.0);
    for (std::size_t k = 0; k < doc_keys.size(); ++k) {
        for (std::size_t l = 0; l < desc_keys.size(); ++l) {
            if (desc_keys[l] != doc_keys[k]) continue;
            const double d = doc.tokens.row(static_cast<Eigen::Index>(k)).dot(desc.tokens.row(static_cast<Eigen::Index>(l)));
            if (arg[k] < 0 || d > best[k]) {
                best[k] = d;
                arg[k] = static_cast<std::ptrdiff_t>(l);
            }
        }
    }
    return arg;
}

}  // namespace

double relaxed_coil_logit(const Encoding& doc, const Encoding& desc, std::span<const std::int64_t> doc_keys,
                          std::span<const std::int64_t> desc_keys) {
    check_dims(doc, desc);
    std::vector<double> best;
    const auto arg = best_matches(doc, desc, doc_keys, desc_keys, best);
    double logit = doc.cls.dot(desc.cls);
    for (std::size_t k = 0; k < arg.size(); ++k)
        if (arg[k] >= 0) logit += best[k];
    return logit;
}

ScoredLabel score_exact_coil(const Encoding& doc, const Encoding& desc, const std::vector<std::string>& doc_words,
                             const std::vector<std::string>& desc_words) {
    check_dims(doc, desc);
    if (doc_words.size() != static_cast<std::size_t>(doc.tokens.rows()) ||
        desc_words.size() != static_cast<std::size_t>(desc.tokens.rows()))
        throw ConsistencyError("word count does not match the encoding");
    double logit = doc.cls.dot(desc.cls);
    for (std::size_t k = 0; k < doc_words.size(); ++k) {
        std::optional<double> best;
        for (std::size_t l = 0; l < desc_words.size(); ++l) {
            if (doc_words[k] != desc_words[l]) continue;
            const double d = doc.tokens.row(static_cast<Eigen::Index>(k)).dot(desc.tokens.row(static_cast<Eigen::Index>(l)));
            best = best ? std::max(*best, d) : d;
        }
        if (best) logit += *best;
    }
    return from_logit(logit);
}

EncodingPairGrad relaxed_coil_backward(const Encoding& doc, const Encoding& desc,
                                       std::span<const std::int64_t> doc_keys,
                                       std::span<const std::int64_t> desc_keys, double g_logit) {
    check_dims(doc, desc);
    std::vector<double> best;
    const auto arg = best_matches(doc, desc, doc_keys, desc_keys, best);
    EncodingPairGrad g;
    g.doc.cls = g_logit * desc.cls;
    g.desc.cls = g_logit * doc.cls;
    g.doc.tokens = Matrix::Zero(doc.tokens.rows(), doc.tokens.cols());
    g.desc.tokens = Matrix::Zero(desc.tokens.rows(), desc.tokens.cols());
    for (std::size_t k = 0; k < arg.size(); ++k) {
        if (arg[k] < 0) continue;
        const auto kk = static_cast<Eigen::Index>(k);
        const auto ll = static_cast<Eigen::Index>(arg[k]);
        g.doc.tokens.row(kk) += g_logit * desc.tokens.row(ll);
        g.desc.tokens.row(ll) += g_logit * doc.tokens.row(kk);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Token preparation
// ---------------------------------------------------------------------------

const std::vector<std::int64_t>& TokenizedText::keys(ScorerMode mode) const {
    return mode == ScorerMode::kRelaxed ? cluster_keys : exact_keys;
}

TokenizedText prepare_text(std::string_view text, const Vocabulary& vocab, const ClusterMap& map,
                           std::size_t max_tokens) {
    if (map.size() != vocab.size()) throw ConsistencyError("cluster map size differs from vocabulary size");
    TokenizedText t;
    t.words = tokenize(text);
    if (max_tokens > 0 && t.words.size() > max_tokens) t.words.resize(max_tokens);
    if (t.words.empty()) t.words.emplace_back(kEmptyTextToken);
    t.ids = vocab.lookup_all(t.words);
    t.cluster_keys = cluster_keys(t.words, t.ids, map);
    t.exact_keys.resize(t.words.size());
    for (std::size_t i = 0; i < t.words.size(); ++i)
        t.exact_keys[i] = t.ids[i] >= 0 ? t.ids[i] : cluster_key(t.words[i], -1, map);
    return t;
}

// ---------------------------------------------------------------------------
// Description store
// ---------------------------------------------------------------------------

const std::vector<std::size_t>& DescriptionStore::entries_of(const std::string& label_id) const {
    const auto it = by_label_.find(label_id);
    if (it == by_label_.end()) throw ConsistencyError("label '" + label_id + "' has no stored descriptions");
    return it->second;
}

bool DescriptionStore::has_label(const std::string& label_id) const { return by_label_.count(label_id) != 0; }

std::vector<std::string> DescriptionStore::label_ids() const {
    std::vector<std::string> ids;
    for (const auto& [id, _] : by_label_) ids.push_back(id);
    return ids;
}

void DescriptionStore::add(StoreEntry entry) {
    by_label_[entry.label_id].push_back(entries_.size());
    entries_.push_back(std::move(entry));
}

std::size_t DescriptionStore::payload_bytes() const {
    std::size_t bytes = 0;
    for (const auto& e : entries_)
        bytes += sizeof(double) * static_cast<std::size_t>(e.encoding.cls.size() + e.encoding.tokens.size()) +
                 2 * sizeof(std::int64_t) * e.tokens.size();
    return bytes;
}

DescriptionStore precompute_store(const ModelParams& params, const LabelSet& labels, const Vocabulary& vocab,
                                  const ClusterMap& map, std::size_t max_tokens) {
    struct Job {
        const LabelRecord* label;
        std::uint32_t index;
    };
    std::vector<Job> jobs;
    for (const auto& l : labels) {
        if (l.descriptions.empty()) throw ConsistencyError("label '" + l.id + "' has no descriptions");
        for (std::size_t i = 0; i < l.descriptions.size(); ++i) jobs.push_back({&l, static_cast<std::uint32_t>(i)});
    }
    std::vector<StoreEntry> out(jobs.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(jobs.size()); ++j) {
        const Job& job = jobs[static_cast<std::size_t>(j)];
        StoreEntry& e = out[static_cast<std::size_t>(j)];
        e.label_id = job.label->id;
        e.description_index = job.index;
        e.tokens = prepare_text(job.label->descriptions[job.index].text, vocab, map, max_tokens);
        e.encoding = project_description(params, encode(params.output, params.output.rows_for(e.tokens.ids)));
    }
    DescriptionStore store;
    store.params_hash = params.hash();
    store.vocab_hash = vocab.hash();
    store.cluster_hash = map.hash();
    store.max_tokens = max_tokens;
    for (auto& e : out) store.add(std::move(e));
    return store;
}

namespace {
constexpr const char* kStoreMagic = "SXCSTORE";
constexpr std::uint32_t kStoreVersion = 1;
// label index, description index, token count, byte offset
constexpr std::size_t kIndexRowBytes = 4 + 4 + 4 + 8;
}  // namespace

void DescriptionStore::save(const std::filesystem::path& path) const {
    const std::vector<std::string> labels = label_ids();
    std::map<std::string, std::uint32_t> label_pos;
    for (std::size_t i = 0; i < labels.size(); ++i) label_pos[labels[i]] = static_cast<std::uint32_t>(i);
    const std::size_t dim = entries_.empty() ? 0 : static_cast<std::size_t>(entries_.front().encoding.cls.size());

    io::ArtifactHeader h{kStoreMagic, kStoreVersion, nlohmann::json::object()};
    h.meta["params_hash"] = io::hex64(params_hash);
    h.meta["vocab_hash"] = io::hex64(vocab_hash);
    h.meta["cluster_hash"] = io::hex64(cluster_hash);
    h.meta["max_tokens"] = max_tokens;
    h.meta["dim"] = dim;
    h.meta["num_entries"] = entries_.size();
    h.meta["labels"] = labels;
    h.meta["index_row_bytes"] = kIndexRowBytes;
    h.meta["payload_bytes"] = payload_bytes();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    io::write_header(out, h);
    std::uint64_t offset = 0;
    for (const auto& e : entries_) {
        io::write_u32(out, label_pos.at(e.label_id));
        io::write_u32(out, e.description_index);
        io::write_u32(out, static_cast<std::uint32_t>(e.tokens.size()));
        io::write_u64(out, offset);
        offset += 8 * (dim + e.tokens.size() * dim + 2 * e.tokens.size());
    }
    for (const auto& e : entries_) {
        io::write_f64s(out, e.encoding.cls.data(), dim);
        io::write_f64s(out, e.encoding.tokens.data(), static_cast<std::size_t>(e.encoding.tokens.size()));
        for (std::int64_t k : e.tokens.cluster_keys) io::write_u64(out, static_cast<std::uint64_t>(k));
        for (std::int64_t k : e.tokens.exact_keys) io::write_u64(out, static_cast<std::uint64_t>(k));
    }
    // Surface words trail the numeric blocks; they are only needed for
    // inspection and exact-COIL checks.
    for (const auto& e : entries_)
        for (const auto& w : e.tokens.words) io::write_str(out, w);
    if (!out) throw InputError("short write to " + path.string());
}

DescriptionStore DescriptionStore::load(const std::filesystem::path& path, const ModelParams& params,
                                        const Vocabulary& vocab, const ClusterMap& map) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    const io::ArtifactHeader h = io::read_header(in, kStoreMagic, kStoreVersion);
    auto check = [&](const char* key, std::uint64_t want, const char* what) {
        if (h.meta.value(key, std::string()) != io::hex64(want))
            throw ConsistencyError(path.string() + ": store was built with different " + what);
    };
    check("params_hash", params.hash(), "parameters");
    check("vocab_hash", vocab.hash(), "vocabulary");
    check("cluster_hash", map.hash(), "cluster map");

    const auto labels = h.meta.at("labels").get<std::vector<std::string>>();
    const auto dim = h.meta.at("dim").get<std::size_t>();
    const auto n = h.meta.at("num_entries").get<std::size_t>();
    if (n > 0 && dim != params.score_dim()) throw ConsistencyError(path.string() + ": score dimension mismatch");

    struct Row {
        std::uint32_t label, desc, tokens;
    };
    std::vector<Row> rows(n);
    for (auto& r : rows) {
        r.label = io::read_u32(in);
        r.desc = io::read_u32(in);
        r.tokens = io::read_u32(in);
        (void)io::read_u64(in);
        if (r.label >= labels.size()) throw InputError(path.string() + ": index row references unknown label");
    }
    std::vector<StoreEntry> entries(n);
    for (std::size_t i = 0; i < n; ++i) {
        StoreEntry& e = entries[i];
        e.label_id = labels[rows[i].label];
        e.description_index = rows[i].desc;
        const auto t = static_cast<Eigen::Index>(rows[i].tokens);
        e.encoding.cls.resize(static_cast<Eigen::Index>(dim));
        e.encoding.tokens.resize(t, static_cast<Eigen::Index>(dim));
        io::read_f64s(in, e.encoding.cls.data(), dim);
        io::read_f64s(in, e.encoding.tokens.data(), static_cast<std::size_t>(e.encoding.tokens.size()));
        e.tokens.cluster_keys.resize(rows[i].tokens);
        e.tokens.exact_keys.resize(rows[i].tokens);
        for (auto& k : e.tokens.cluster_keys) k = static_cast<std::int64_t>(io::read_u64(in));
        for (auto& k : e.tokens.exact_keys) k = static_cast<std::int64_t>(io::read_u64(in));
    }
    DescriptionStore store;
    for (std::size_t i = 0; i < n; ++i) {
        auto& e = entries[i];
        e.tokens.words.resize(rows[i].tokens);
        for (auto& w : e.tokens.words) w = io::read_str(in);
        e.tokens.ids = vocab.lookup_all(e.tokens.words);
        store.add(std::move(e));
    }
    store.params_hash = params.hash();
    store.vocab_hash = vocab.hash();
    store.cluster_hash = map.hash();
    store.max_tokens = h.meta.value("max_tokens", std::size_t{0});
    return store;
}

std::uint32_t sample_description(std::uint64_t seed, const std::string& doc_id, const std::string& label_id,
                                 std::size_t pool_size) {
    if (pool_size == 0) throw ConsistencyError("label '" + label_id + "' has an empty description pool");
    Rng rng(derive_seed(derive_seed(derive_seed(seed, "predict"), doc_id), label_id));
    return static_cast<std::uint32_t>(rng.below(pool_size));
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

void sort_ranked(std::vector<ScoredLabel>& labels) {
    std::sort(labels.begin(), labels.end(), [](const ScoredLabel& a, const ScoredLabel& b) {
        return a.score != b.score ? a.score > b.score : a.label_id < b.label_id;
    });
}

Predictor::Predictor(const ModelParams& params, const Vocabulary& vocab, const ClusterMap& map,
                     const DescriptionStore& store, const Shortlister& shortlister, PredictConfig config)
    : params_(params), vocab_(vocab), map_(map), store_(store), shortlister_(shortlister), config_(config) {
    if (shortlister_.size() == 0) throw ConsistencyError("cannot predict over an empty label set");
    if (config_.k_shortlist == 0 || config_.k_out == 0) throw ConsistencyError("k_shortlist and k_out must be >= 1");
    if (config_.ensemble_alpha && (*config_.ensemble_alpha < 0.0 || *config_.ensemble_alpha > 1.0))
        throw ConsistencyError("ensemble alpha must lie in [0, 1]");
    if (store_.params_hash != params_.hash() || store_.vocab_hash != vocab_.hash() || store_.cluster_hash != map_.hash())
        throw ConsistencyError("description store is stale for the given parameters, vocabulary or cluster map");
    for (const auto& id : shortlister_.label_ids())
        if (!store_.has_label(id)) throw ConsistencyError("label '" + id + "' is missing from the description store");
}

std::vector<ScoredLabel> Predictor::score_labels(const Document& doc, const std::vector<std::string>& label_ids,
                                                 const std::vector<double>& tfidf_scores) const {
    const TokenizedText text = prepare_text(doc.text, vocab_, map_, config_.max_tokens);
    const Encoding enc = encode(params_.input, params_.input.rows_for(text.ids));
    std::vector<ScoredLabel> out;
    out.reserve(label_ids.size());
    for (std::size_t i = 0; i < label_ids.size(); ++i) {
        const auto& pool = store_.entries_of(label_ids[i]);
        const StoreEntry& e = store_.entries()[pool[sample_description(config_.seed, doc.id, label_ids[i], pool.size())]];
        double logit = 0.0;
        if (config_.mode == ScorerMode::kBiencoder)
            logit = score_biencoder(enc, e.encoding).logit;
        else
            logit = relaxed_coil_logit(enc, e.encoding, text.keys(config_.mode), e.tokens.keys(config_.mode));
        ScoredLabel s = from_logit(logit);
        s.label_id = label_ids[i];
        if (config_.ensemble_alpha)
            s.score = *config_.ensemble_alpha * tfidf_scores.at(i) + (1.0 - *config_.ensemble_alpha) * s.probability;
        out.push_back(std::move(s));
    }
    sort_ranked(out);
    return out;
}

std::vector<ScoredLabel> Predictor::predict(const Document& doc) const {
    const auto shortlist = shortlister_.shortlist(tfidf_vector(doc.text, vocab_), config_.k_shortlist);
    std::vector<std::string> ids;
    std::vector<double> scores;
    for (const auto& s : shortlist) {
        ids.push_back(s.id);
        scores.push_back(s.score);
    }
    auto ranked = score_labels(doc, ids, scores);
    if (ranked.size() > config_.k_out) ranked.resize(config_.k_out);
    return ranked;
}

std::vector<std::vector<ScoredLabel>> Predictor::predict_all(const std::vector<Document>& docs) const {
    std::vector<std::vector<ScoredLabel>> out(docs.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(docs.size()); ++i)
        out[static_cast<std::size_t>(i)] = predict(docs[static_cast<std::size_t>(i)]);
    return out;
}

std::vector<std::vector<ScoredLabel>> Predictor::predict_all_serial(const std::vector<Document>& docs) const {
    std::vector<std::vector<ScoredLabel>> out;
    out.reserve(docs.size());
    for (const auto& d : docs) out.push_back(predict(d));
    return out;
}

std::vector<ScoredLabel> tfidf_rank(const Document& doc, const Vocabulary& vocab, const Shortlister& shortlister,
                                    std::size_t k_out) {
    std::vector<ScoredLabel> out;
    for (const auto& s : shortlister.shortlist(tfidf_vector(doc.text, vocab), k_out)) {
        ScoredLabel l = from_logit(s.score);
        l.label_id = s.id;
        out.push_back(std::move(l));
    }
    return out;
}

}  // namespace semxc
