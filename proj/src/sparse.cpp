#include "semxc/sparse.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "semxc/corpus.hpp"
#include "semxc/error.hpp"
#include "semxc/io.hpp"
#include "semxc/rng.hpp"

namespace semxc {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (c < 0x80 && std::isspace(c)) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else if (c < 0x80 && std::ispunct(c)) {
            continue;
        } else if (c < 0x80) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::uint32_t> df, std::uint64_t num_docs)
    : tokens_(std::move(tokens)), df_(std::move(df)), num_docs_(num_docs) {
    if (tokens_.size() != df_.size()) throw std::logic_error("token/df size mismatch");
    Fnv1a h;
    h.str("semxc-vocab").u64(num_docs_).u64(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (df_[i] > num_docs_) throw ConsistencyError("document frequency exceeds document count");
        index_.emplace(tokens_[i], static_cast<std::int32_t>(i));
        h.str(tokens_[i]).u64(df_[i]);
    }
    hash_ = h.digest();
}

std::int32_t Vocabulary::lookup(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? -1 : it->second;
}

std::vector<std::int32_t> Vocabulary::lookup_all(const std::vector<std::string>& tokens) const {
    std::vector<std::int32_t> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(lookup(t));
    return out;
}

double Vocabulary::idf(std::size_t i) const {
    return std::log((1.0 + static_cast<double>(num_docs_)) / (1.0 + static_cast<double>(df_[i]))) + 1.0;
}

Vocabulary build_vocab(const std::vector<std::string>& texts, std::uint32_t min_df) {
    if (texts.empty()) throw InputError("cannot build a vocabulary from zero texts");
    std::map<std::string, std::uint32_t> df;
    for (const auto& text : texts) {
        std::vector<std::string> toks = tokenize(text);
        std::sort(toks.begin(), toks.end());
        toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
        for (auto& t : toks) ++df[t];
    }
    std::vector<std::string> tokens;
    std::vector<std::uint32_t> counts;
    for (const auto& [tok, n] : df) {
        if (n >= min_df) {
            tokens.push_back(tok);
            counts.push_back(n);
        }
    }
    if (tokens.empty()) throw InputError("every token was filtered out by min_df");
    return Vocabulary(std::move(tokens), std::move(counts), texts.size());
}

double SparseVector::norm() const {
    double s = 0.0;
    for (const auto& [i, w] : entries) s += w * w;
    return std::sqrt(s);
}

double SparseVector::dot(const SparseVector& other) const {
    double s = 0.0;
    auto a = entries.begin();
    auto b = other.entries.begin();
    while (a != entries.end() && b != other.entries.end()) {
        if (a->first < b->first) {
            ++a;
        } else if (b->first < a->first) {
            ++b;
        } else {
            s += a->second * b->second;
            ++a;
            ++b;
        }
    }
    return s;
}

SparseVector tfidf_vector(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
    std::map<std::int32_t, std::uint32_t> tf;
    for (const auto& t : tokens) {
        const std::int32_t i = vocab.lookup(t);
        if (i >= 0) ++tf[i];
    }
    SparseVector v;
    v.entries.reserve(tf.size());
    double sq = 0.0;
    for (const auto& [i, n] : tf) {
        const double w = static_cast<double>(n) * vocab.idf(static_cast<std::size_t>(i));
        v.entries.emplace_back(i, w);
        sq += w * w;
    }
    if (sq > 0.0) {
        const double inv = 1.0 / std::sqrt(sq);
        for (auto& e : v.entries) e.second *= inv;
    }
    return v;
}

SparseVector tfidf_vector(std::string_view text, const Vocabulary& vocab) {
    return tfidf_vector(tokenize(text), vocab);
}

std::string label_text(const LabelRecord& label) {
    std::string text = label.name;
    for (const auto& alt : label.alternate_names) text += "\n" + alt;
    for (const auto& d : label.descriptions) text += "\n" + d.text;
    return text;
}

// ---------------------------------------------------------------------------
// Shortlister
// ---------------------------------------------------------------------------

Shortlister::Shortlister(std::vector<std::string> label_ids, std::vector<SparseVector> label_vectors,
                         std::size_t vocab_size) {
    if (label_ids.size() != label_vectors.size()) throw std::logic_error("label id/vector size mismatch");
    std::vector<std::size_t> order(label_ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return label_ids[a] < label_ids[b]; });
    ids_.reserve(order.size());
    vectors_.reserve(order.size());
    for (std::size_t i : order) {
        ids_.push_back(std::move(label_ids[i]));
        vectors_.push_back(std::move(label_vectors[i]));
    }
    postings_.assign(vocab_size, {});
    for (std::size_t l = 0; l < ids_.size(); ++l) {
        if (!position_.emplace(ids_[l], l).second) throw InputError("duplicate label id '" + ids_[l] + "' in index");
        for (const auto& [t, w] : vectors_[l].entries) {
            if (t < 0 || static_cast<std::size_t>(t) >= vocab_size)
                throw ConsistencyError("label vector index outside vocabulary");
            postings_[static_cast<std::size_t>(t)].push_back({static_cast<std::uint32_t>(l), w});
        }
    }
}

std::optional<std::size_t> Shortlister::position(const std::string& id) const {
    auto it = position_.find(id);
    if (it == position_.end()) return std::nullopt;
    return it->second;
}

void Shortlister::rank_into(const SparseVector& query, std::size_t k, std::vector<double>& scores,
                            std::vector<std::uint32_t>& order, std::vector<ScoredId>& out) const {
    const std::size_t n = ids_.size();
    scores.assign(n, 0.0);
    // Query terms ascending, so every label's score is summed in the same
    // order as SparseVector::dot.
    for (const auto& [t, qw] : query.entries) {
        if (t < 0 || static_cast<std::size_t>(t) >= postings_.size()) continue;
        for (const Posting& p : postings_[static_cast<std::size_t>(t)]) scores[p.label] += qw * p.weight;
    }
    const std::size_t take = std::min(k, n);
    order.resize(n);
    std::iota(order.begin(), order.end(), 0U);
    auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;  // positions follow ascending id
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);
    out.clear();
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back({ids_[order[i]], scores[order[i]]});
}

std::vector<ScoredId> Shortlister::shortlist(const SparseVector& query, std::size_t k) const {
    if (k == 0) throw ConsistencyError("shortlist size must be at least 1");
    std::vector<double> scores;
    std::vector<std::uint32_t> order;
    std::vector<ScoredId> out;
    rank_into(query, k, scores, order, out);
    return out;
}

std::vector<std::vector<ScoredId>> Shortlister::shortlist_batch(std::span<const SparseVector> queries,
                                                                std::size_t k) const {
    if (k == 0) throw ConsistencyError("shortlist size must be at least 1");
    std::vector<std::vector<ScoredId>> out(queries.size());
    const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel
    {
        std::vector<double> scores;
        std::vector<std::uint32_t> order;
#pragma omp for schedule(dynamic, 8)
        for (std::ptrdiff_t q = 0; q < n; ++q) rank_into(queries[q], k, scores, order, out[q]);
    }
    return out;
}

std::vector<std::vector<ScoredId>> Shortlister::shortlist_batch_serial(std::span<const SparseVector> queries,
                                                                       std::size_t k) const {
    std::vector<std::vector<ScoredId>> out;
    out.reserve(queries.size());
    for (const auto& q : queries) out.push_back(shortlist(q, k));
    return out;
}

Shortlister Shortlister::subset(const std::set<std::string>& ids) const {
    std::vector<std::string> sub_ids;
    std::vector<SparseVector> sub_vecs;
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (ids.count(ids_[i])) {
            sub_ids.push_back(ids_[i]);
            sub_vecs.push_back(vectors_[i]);
        }
    }
    return Shortlister(std::move(sub_ids), std::move(sub_vecs), postings_.size());
}

// ---------------------------------------------------------------------------
// TfidfIndex
// ---------------------------------------------------------------------------

TfidfIndex TfidfIndex::build(const std::vector<std::string>& corpus_texts,
                             const std::vector<std::string>& label_ids,
                             const std::vector<std::string>& label_texts, std::uint32_t min_df) {
    if (label_ids.size() != label_texts.size()) throw std::logic_error("label id/text size mismatch");
    TfidfIndex idx;
    idx.vocab = build_vocab(corpus_texts, min_df);
    std::vector<SparseVector> vecs;
    vecs.reserve(label_texts.size());
    for (const auto& t : label_texts) vecs.push_back(tfidf_vector(t, idx.vocab));
    idx.shortlister = Shortlister(label_ids, std::move(vecs), idx.vocab.size());
    return idx;
}

void TfidfIndex::save(const std::filesystem::path& path, const nlohmann::json& extra_meta) const {
    io::ArtifactHeader h{"SXCINDEX", kIndexFormatVersion, extra_meta.is_object() ? extra_meta : nlohmann::json::object()};
    h.meta["formula"] = kTfidfFormula;
    h.meta["vocab_size"] = vocab.size();
    h.meta["num_docs"] = vocab.num_docs();
    h.meta["num_labels"] = shortlister.size();
    h.meta["vocab_hash"] = io::hex64(vocab.hash());
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    io::write_header(out, h);
    io::write_u64(out, vocab.num_docs());
    io::write_u32(out, static_cast<std::uint32_t>(vocab.size()));
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        io::write_str(out, vocab.token(i));
        io::write_u32(out, vocab.df(i));
    }
    io::write_u32(out, static_cast<std::uint32_t>(shortlister.size()));
    for (const auto& id : shortlister.label_ids()) io::write_str(out, id);
    // Postings, term-major.
    std::vector<std::vector<std::pair<std::uint32_t, double>>> postings(vocab.size());
    for (std::size_t l = 0; l < shortlister.size(); ++l)
        for (const auto& [t, w] : shortlister.label_vector(l).entries)
            postings[static_cast<std::size_t>(t)].emplace_back(static_cast<std::uint32_t>(l), w);
    for (const auto& plist : postings) {
        io::write_u32(out, static_cast<std::uint32_t>(plist.size()));
        for (const auto& [l, w] : plist) {
            io::write_u32(out, l);
            io::write_f64(out, w);
        }
    }
    if (!out) throw InputError("short write to " + path.string());
}

TfidfIndex TfidfIndex::load(const std::filesystem::path& path, nlohmann::json* meta_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    const io::ArtifactHeader h = io::read_header(in, "SXCINDEX", kIndexFormatVersion);
    if (h.meta.value("formula", std::string()) != kTfidfFormula)
        throw ConsistencyError(path.string() + ": index built with a different tf-idf formula");
    if (meta_out) *meta_out = h.meta;
    const std::uint64_t num_docs = io::read_u64(in);
    const std::uint32_t nv = io::read_u32(in);
    std::vector<std::string> tokens(nv);
    std::vector<std::uint32_t> df(nv);
    for (std::uint32_t i = 0; i < nv; ++i) {
        tokens[i] = io::read_str(in);
        df[i] = io::read_u32(in);
    }
    TfidfIndex idx;
    idx.vocab = Vocabulary(std::move(tokens), std::move(df), num_docs);
    if (h.meta.value("vocab_hash", std::string()) != io::hex64(idx.vocab.hash()))
        throw ConsistencyError(path.string() + ": vocabulary hash mismatch (corrupt index)");
    const std::uint32_t nl = io::read_u32(in);
    std::vector<std::string> ids(nl);
    for (auto& id : ids) id = io::read_str(in);
    std::vector<SparseVector> vecs(nl);
    for (std::uint32_t t = 0; t < nv; ++t) {
        const std::uint32_t cnt = io::read_u32(in);
        for (std::uint32_t j = 0; j < cnt; ++j) {
            const std::uint32_t l = io::read_u32(in);
            const double w = io::read_f64(in);
            if (l >= nl) throw InputError(path.string() + ": posting references unknown label");
            vecs[l].entries.emplace_back(static_cast<std::int32_t>(t), w);
        }
    }
    idx.shortlister = Shortlister(std::move(ids), std::move(vecs), nv);
    return idx;
}

}  // namespace semxc
