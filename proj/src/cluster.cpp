#include "semxc/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "semxc/error.hpp"
#include "semxc/io.hpp"
#include "semxc/rng.hpp"
#include "semxc/sparse.hpp"

namespace semxc {

ClusterMap::ClusterMap(const std::vector<std::int32_t>& labelling) : assignment_(labelling.size()) {
    std::unordered_map<std::int32_t, std::int32_t> relabel;
    for (std::size_t i = 0; i < labelling.size(); ++i) {
        auto [it, inserted] = relabel.emplace(labelling[i], static_cast<std::int32_t>(relabel.size()));
        assignment_[i] = it->second;
    }
    num_clusters_ = relabel.size();
}

ClusterMap ClusterMap::singletons(std::size_t n) {
    std::vector<std::int32_t> l(n);
    std::iota(l.begin(), l.end(), 0);
    return ClusterMap(l);
}

std::uint64_t ClusterMap::hash() const {
    Fnv1a h;
    h.str("semxc-clusters").u64(assignment_.size());
    h.bytes(assignment_.data(), assignment_.size() * sizeof(std::int32_t));
    return h.digest();
}

UnionFind::UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
}

std::size_t UnionFind::find(std::size_t x) {
    while (parent_[x] != x) {
        parent_[x] = parent_[parent_[x]];
        x = parent_[x];
    }
    return x;
}

void UnionFind::unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
}

std::vector<std::int32_t> UnionFind::labelling() {
    std::vector<std::int32_t> out(parent_.size());
    for (std::size_t i = 0; i < parent_.size(); ++i) out[i] = static_cast<std::int32_t>(find(i));
    return out;
}

namespace {

Matrix normalised_rows(const Matrix& embeddings) {
    Matrix unit = embeddings;
    for (Eigen::Index i = 0; i < unit.rows(); ++i) {
        const double n = unit.row(i).norm();
        if (!(n > 0.0) || !std::isfinite(n))
            throw InputError("embedding row " + std::to_string(i) + " has zero or non-finite norm");
        unit.row(i) /= n;
    }
    return unit;
}

}  // namespace

ClusterMap embed_similarity_clusters(const Matrix& embeddings, double threshold) {
    const Matrix unit = normalised_rows(embeddings);
    const auto n = static_cast<std::ptrdiff_t>(unit.rows());
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> edges(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        auto& mine = edges[static_cast<std::size_t>(i)];
        for (std::ptrdiff_t j = i + 1; j < n; ++j) {
            if (unit.row(i).dot(unit.row(j)) > threshold)
                mine.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
        }
    }
    UnionFind uf(static_cast<std::size_t>(n));
    for (const auto& row : edges)
        for (const auto& [a, b] : row) uf.unite(a, b);
    return ClusterMap(uf.labelling());
}

ClusterMap embed_similarity_clusters_serial(const Matrix& embeddings, double threshold) {
    const Matrix unit = normalised_rows(embeddings);
    const auto n = static_cast<std::size_t>(unit.rows());
    UnionFind uf(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (unit.row(static_cast<Eigen::Index>(i)).dot(unit.row(static_cast<Eigen::Index>(j))) > threshold)
                uf.unite(i, j);
    return ClusterMap(uf.labelling());
}

// ---------------------------------------------------------------------------
// Lemmatizer
// ---------------------------------------------------------------------------

namespace {

const std::unordered_map<std::string, std::string>& default_exceptions() {
    static const std::unordered_map<std::string, std::string> table = {
        {"children", "child"}, {"men", "man"},       {"women", "woman"},   {"mice", "mouse"},
        {"feet", "foot"},      {"teeth", "tooth"},   {"geese", "goose"},   {"people", "person"},
        {"went", "go"},        {"gone", "go"},       {"goes", "go"},       {"was", "be"},
        {"were", "be"},        {"is", "be"},         {"are", "be"},        {"been", "be"},
        {"being", "be"},       {"am", "be"},         {"has", "have"},      {"had", "have"},
        {"having", "have"},    {"did", "do"},        {"done", "do"},       {"does", "do"},
        {"ran", "run"},        {"running", "run"},   {"better", "good"},   {"best", "good"},
        {"made", "make"},      {"took", "take"},     {"taken", "take"},    {"bought", "buy"},
        {"sold", "sell"},      {"built", "build"},   {"thought", "think"}, {"brought", "bring"},
        {"caught", "catch"},   {"taught", "teach"},  {"wrote", "write"},   {"written", "write"},
        {"data", "datum"},     {"indices", "index"}, {"analyses", "analysis"},
    };
    return table;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

bool has_vowel(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](char c) { return is_vowel(c) || c == 'y'; });
}

bool ends_with(std::string_view s, std::string_view suf) {
    return s.size() >= suf.size() && s.substr(s.size() - suf.size()) == suf;
}

std::string undouble(std::string s) {
    const std::size_t n = s.size();
    if (n >= 2 && s[n - 1] == s[n - 2] && !is_vowel(s[n - 1]) && s[n - 1] != 'l' && s[n - 1] != 's' &&
        s[n - 1] != 'z')
        s.pop_back();
    return s;
}

}  // namespace

Lemmatizer::Lemmatizer() : exceptions_(default_exceptions()) {}

Lemmatizer::Lemmatizer(std::unordered_map<std::string, std::string> exceptions)
    : exceptions_(std::move(exceptions)) {}

std::string Lemmatizer::operator()(std::string_view token) const {
    std::string w(token);
    for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (auto it = exceptions_.find(w); it != exceptions_.end()) w = it->second;
    if (w.size() <= 3) return w;

    if (ends_with(w, "ies") && w.size() > 4) {
        w = w.substr(0, w.size() - 3) + "y";
    } else if (ends_with(w, "sses")) {
        w.resize(w.size() - 2);
    } else if (ends_with(w, "xes") || ends_with(w, "ches") || ends_with(w, "shes") || ends_with(w, "zes")) {
        w.resize(w.size() - 2);
    } else if (ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") && !ends_with(w, "is")) {
        w.pop_back();
    } else if (ends_with(w, "ing") && w.size() >= 6 && has_vowel(std::string_view(w).substr(0, w.size() - 3))) {
        w = undouble(w.substr(0, w.size() - 3));
    } else if (ends_with(w, "ied") && w.size() > 4) {
        w = w.substr(0, w.size() - 3) + "y";
    } else if (ends_with(w, "ed") && w.size() >= 5 && has_vowel(std::string_view(w).substr(0, w.size() - 2))) {
        w = undouble(w.substr(0, w.size() - 2));
    }
    if (w.size() > 3 && w.back() == 'e') w.pop_back();
    return w;
}

ClusterMap merge_by_lemma(const ClusterMap& map, const std::vector<std::string>& tokens, const LemmaFn& lemmatizer) {
    if (tokens.size() != map.size()) throw ConsistencyError("cluster map does not cover the token table");
    UnionFind uf(map.num_clusters());
    std::map<std::string, std::int32_t> first_cluster;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::int32_t c = map.cluster_of(i);
        auto [it, inserted] = first_cluster.emplace(lemmatizer(tokens[i]), c);
        if (!inserted) uf.unite(static_cast<std::size_t>(it->second), static_cast<std::size_t>(c));
    }
    std::vector<std::int32_t> out(map.size());
    for (std::size_t i = 0; i < map.size(); ++i)
        out[i] = static_cast<std::int32_t>(uf.find(static_cast<std::size_t>(map.cluster_of(i))));
    return ClusterMap(out);
}

ClusterMap merge_by_lemma(const ClusterMap& map, const Vocabulary& vocab, const LemmaFn& lemmatizer) {
    return merge_by_lemma(map, vocab.tokens(), lemmatizer);
}

// ---------------------------------------------------------------------------
// Masks
// ---------------------------------------------------------------------------

std::int64_t cluster_key(std::string_view word, std::int32_t vocab_id, const ClusterMap& map) {
    if (vocab_id >= 0 && static_cast<std::size_t>(vocab_id) < map.size()) return map.cluster_of(static_cast<std::size_t>(vocab_id));
    return -static_cast<std::int64_t>(fnv1a(word) >> 1) - 1;
}

std::vector<std::int64_t> cluster_keys(const std::vector<std::string>& words, const std::vector<std::int32_t>& ids,
                                       const ClusterMap& map) {
    if (words.size() != ids.size()) throw std::logic_error("words/ids size mismatch");
    std::vector<std::int64_t> out(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) out[i] = cluster_key(words[i], ids[i], map);
    return out;
}

OverlapMask OverlapMask::zeros(std::size_t rows, std::size_t cols) {
    return OverlapMask{rows, cols, std::vector<std::uint8_t>(rows * cols, 0)};
}

std::size_t OverlapMask::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

OverlapMask overlap_mask(const std::vector<std::int64_t>& description_keys, const std::vector<std::int64_t>& document_keys) {
    OverlapMask m = OverlapMask::zeros(description_keys.size(), document_keys.size());
    for (std::size_t l = 0; l < m.rows; ++l)
        for (std::size_t k = 0; k < m.cols; ++k)
            if (description_keys[l] == document_keys[k]) m.bits[l * m.cols + k] = 1;
    return m;
}

OverlapMask overlap_mask(const std::vector<std::string>& description_tokens, const std::vector<std::string>& document_tokens,
                         const ClusterMap& map, const Vocabulary& vocab) {
    return overlap_mask(cluster_keys(description_tokens, vocab.lookup_all(description_tokens), map),
                        cluster_keys(document_tokens, vocab.lookup_all(document_tokens), map));
}

void save_cluster_map(const ClusterMap& map, const Vocabulary& vocab, const std::filesystem::path& path,
                      const nlohmann::json& extra_meta) {
    if (map.size() != vocab.size()) throw ConsistencyError("cluster map size differs from vocabulary size");
    io::ArtifactHeader h{"SXCCLUST", 1, extra_meta.is_object() ? extra_meta : nlohmann::json::object()};
    h.meta["vocab_hash"] = io::hex64(vocab.hash());
    h.meta["cluster_hash"] = io::hex64(map.hash());
    h.meta["num_clusters"] = map.num_clusters();
    h.meta["lemmatizer_version"] = Lemmatizer::kVersion;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    io::write_header(out, h);
    io::write_u32(out, static_cast<std::uint32_t>(map.size()));
    for (std::int32_t c : map.assignment()) io::write_i32(out, c);
}

ClusterMap load_cluster_map(const std::filesystem::path& path, const Vocabulary& vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    const io::ArtifactHeader h = io::read_header(in, "SXCCLUST", 1);
    if (h.meta.value("vocab_hash", std::string()) != io::hex64(vocab.hash()))
        throw ConsistencyError(path.string() + ": built against a different vocabulary");
    const std::uint32_t n = io::read_u32(in);
    if (n != vocab.size()) throw ConsistencyError(path.string() + ": cluster map size differs from vocabulary");
    std::vector<std::int32_t> a(n);
    for (auto& c : a) c = io::read_i32(in);
    ClusterMap map(a);
    if (h.meta.value("cluster_hash", std::string()) != io::hex64(map.hash()))
        throw ConsistencyError(path.string() + ": cluster map hash mismatch");
    return map;
}

}  // namespace semxc
