#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "semxc/linalg.hpp"

namespace semxc {

class Vocabulary;

/// Total map token-index -> cluster id. Ids are dense and numbered in
/// order of each cluster's smallest member, so equal partitions compare
/// equal.
class ClusterMap {
public:
    ClusterMap() = default;
    /// Accepts any labelling; relabels canonically.
    explicit ClusterMap(const std::vector<std::int32_t>& labelling);

    static ClusterMap singletons(std::size_t n);

    std::size_t size() const noexcept { return assignment_.size(); }
    std::size_t num_clusters() const noexcept { return num_clusters_; }
    std::int32_t cluster_of(std::size_t token) const { return assignment_[token]; }
    const std::vector<std::int32_t>& assignment() const noexcept { return assignment_; }
    std::uint64_t hash() const;

    bool operator==(const ClusterMap& o) const { return assignment_ == o.assignment_; }

private:
    std::vector<std::int32_t> assignment_;
    std::size_t num_clusters_ = 0;
};

class UnionFind {
public:
    explicit UnionFind(std::size_t n);
    std::size_t find(std::size_t x);
    void unite(std::size_t a, std::size_t b);
    std::vector<std::int32_t> labelling();

private:
    std::vector<std::size_t> parent_;
    std::vector<std::uint32_t> rank_;
};

/// Single-linkage closure of "cosine(u, v) > threshold" over embedding rows.
/// Pairs are scanned in parallel (OpenMP over rows); unions are applied
/// afterwards. Throws InputError on a zero-norm row.
ClusterMap embed_similarity_clusters(const Matrix& embeddings, double threshold = 0.6);
/// Serial reference of the same computation.
ClusterMap embed_similarity_clusters_serial(const Matrix& embeddings, double threshold = 0.6);

/// Rule-based lemma key: exception table, then plural / -ing / -ed suffix
/// stripping with consonant un-doubling, then a trailing silent 'e' is
/// dropped so "make"/"making" and "picture"/"pictures" agree. The result is
/// a grouping key rather than a dictionary lemma.
class Lemmatizer {
public:
    Lemmatizer();
    explicit Lemmatizer(std::unordered_map<std::string, std::string> exceptions);

    std::string operator()(std::string_view token) const;

    static constexpr int kVersion = 1;

private:
    std::unordered_map<std::string, std::string> exceptions_;
};

using LemmaFn = std::function<std::string(const std::string&)>;

/// Unions the clusters of any two vocabulary tokens with equal lemma.
ClusterMap merge_by_lemma(const ClusterMap& map, const Vocabulary& vocab, const LemmaFn& lemmatizer);
ClusterMap merge_by_lemma(const ClusterMap& map, const std::vector<std::string>& tokens,
                          const LemmaFn& lemmatizer);

/// Cluster key per token: the cluster id for in-vocabulary tokens, a
/// negative hash of the surface form for OOV tokens (singleton clusters).
std::int64_t cluster_key(std::string_view word, std::int32_t vocab_id, const ClusterMap& map);
std::vector<std::int64_t> cluster_keys(const std::vector<std::string>& words,
                                       const std::vector<std::int32_t>& ids, const ClusterMap& map);

/// Row-major |description| x |document| boolean matrix.
struct OverlapMask {
    std::size_t rows = 0;  // description tokens
    std::size_t cols = 0;  // document tokens
    std::vector<std::uint8_t> bits;

    bool at(std::size_t l, std::size_t k) const { return bits[l * cols + k] != 0; }
    void set(std::size_t l, std::size_t k, bool v) { bits[l * cols + k] = v ? 1 : 0; }
    static OverlapMask zeros(std::size_t rows, std::size_t cols);
    std::size_t count() const;
};

OverlapMask overlap_mask(const std::vector<std::int64_t>& description_keys,
                         const std::vector<std::int64_t>& document_keys);
OverlapMask overlap_mask(const std::vector<std::string>& description_tokens,
                         const std::vector<std::string>& document_tokens, const ClusterMap& map,
                         const Vocabulary& vocab);

/// clusters.bin: header carries the vocabulary hash; loading against a
/// different vocabulary is refused.
void save_cluster_map(const ClusterMap& map, const Vocabulary& vocab, const std::filesystem::path& path,
                      const nlohmann::json& extra_meta = {});
ClusterMap load_cluster_map(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace semxc
