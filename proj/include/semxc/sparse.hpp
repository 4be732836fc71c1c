#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

namespace semxc {

struct LabelRecord;

/// Lowercases ASCII letters, deletes ASCII punctuation, splits on
/// whitespace. Bytes >= 0x80 pass through untouched.
std::vector<std::string> tokenize(std::string_view text);

/// Frozen token table with document frequencies. Tokens are indexed in
/// lexicographic order.
class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(std::vector<std::string> tokens, std::vector<std::uint32_t> df, std::uint64_t num_docs);

    std::size_t size() const noexcept { return tokens_.size(); }
    std::uint64_t num_docs() const noexcept { return num_docs_; }
    const std::string& token(std::size_t i) const { return tokens_[i]; }
    std::uint32_t df(std::size_t i) const { return df_[i]; }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    /// -1 when out of vocabulary.
    std::int32_t lookup(std::string_view token) const;
    std::vector<std::int32_t> lookup_all(const std::vector<std::string>& tokens) const;

    /// Smoothed inverse document frequency ln((1 + N) / (1 + df)) + 1.
    double idf(std::size_t i) const;

    std::uint64_t hash() const noexcept { return hash_; }

private:
    std::vector<std::string> tokens_;
    std::vector<std::uint32_t> df_;
    std::uint64_t num_docs_ = 0;
    std::unordered_map<std::string, std::int32_t> index_;
    std::uint64_t hash_ = 0;
};

/// Throws InputError when `texts` is empty or every token is filtered out.
Vocabulary build_vocab(const std::vector<std::string>& texts, std::uint32_t min_df = 1);

/// Sorted (index, weight) pairs; weights strictly positive.
struct SparseVector {
    std::vector<std::pair<std::int32_t, double>> entries;

    bool empty() const noexcept { return entries.empty(); }
    std::size_t nnz() const noexcept { return entries.size(); }
    double norm() const;
    /// Merge-join dot product, summed in ascending index order.
    double dot(const SparseVector& other) const;
};

/// weight(t) = tf(t) * idf(t), then L2-normalised. OOV tokens are dropped.
SparseVector tfidf_vector(std::string_view text, const Vocabulary& vocab);
SparseVector tfidf_vector(const std::vector<std::string>& tokens, const Vocabulary& vocab);

/// Text used to featurise a label for shortlisting: name, alternate names
/// and every description in its pool.
std::string label_text(const LabelRecord& label);

struct ScoredId {
    std::string id;
    double score = 0.0;
    bool operator==(const ScoredId&) const = default;
};

/// Exact top-k over label vectors via an inverted index. Ranking is by
/// descending dot product, ties by ascending label id; labels with zero
/// score still rank, so the result has min(k, |labels|) entries.
class Shortlister {
public:
    Shortlister() = default;
    Shortlister(std::vector<std::string> label_ids, std::vector<SparseVector> label_vectors,
                std::size_t vocab_size);

    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t vocab_size() const noexcept { return postings_.size(); }
    const std::vector<std::string>& label_ids() const noexcept { return ids_; }
    const SparseVector& label_vector(std::size_t i) const { return vectors_[i]; }
    std::optional<std::size_t> position(const std::string& id) const;

    std::vector<ScoredId> shortlist(const SparseVector& query, std::size_t k) const;

    /// OpenMP over queries; output identical to calling shortlist per query.
    std::vector<std::vector<ScoredId>> shortlist_batch(std::span<const SparseVector> queries,
                                                       std::size_t k) const;
    /// Single-threaded reference for shortlist_batch.
    std::vector<std::vector<ScoredId>> shortlist_batch_serial(std::span<const SparseVector> queries,
                                                              std::size_t k) const;

    /// Restriction to a subset of labels (unknown ids are ignored).
    Shortlister subset(const std::set<std::string>& ids) const;

private:
    struct Posting {
        std::uint32_t label;
        double weight;
    };

    void rank_into(const SparseVector& query, std::size_t k, std::vector<double>& scores,
                   std::vector<std::uint32_t>& order, std::vector<ScoredId>& out) const;

    std::vector<std::string> ids_;  // ascending
    std::vector<SparseVector> vectors_;
    std::vector<std::vector<Posting>> postings_;
    std::unordered_map<std::string, std::size_t> position_;
};

/// Vocabulary plus the label shortlister, persisted together.
struct TfidfIndex {
    Vocabulary vocab;
    Shortlister shortlister;

    static TfidfIndex build(const std::vector<std::string>& corpus_texts,
                            const std::vector<std::string>& label_ids,
                            const std::vector<std::string>& label_texts, std::uint32_t min_df = 1);

    /// Hybrid file: JSON header (formula version, |V|, N, hashes), then the
    /// token table (string, df) and per-term postings (label, weight).
    void save(const std::filesystem::path& path, const nlohmann::json& extra_meta = {}) const;
    static TfidfIndex load(const std::filesystem::path& path, nlohmann::json* meta_out = nullptr);
};

inline constexpr const char* kTfidfFormula = "tf*(ln((1+N)/(1+df))+1), l2-normalised";
inline constexpr std::uint32_t kIndexFormatVersion = 1;

}  // namespace semxc
