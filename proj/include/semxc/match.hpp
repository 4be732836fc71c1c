#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semxc/cluster.hpp"
#include "semxc/corpus.hpp"
#include "semxc/encoder.hpp"
#include "semxc/sparse.hpp"

namespace semxc {

enum class ScorerMode { kBiencoder, kCoil, kRelaxed };

std::string to_string(ScorerMode mode);
/// Accepts "biencoder", "coil", "relaxed".
ScorerMode scorer_mode_from_string(const std::string& s);

/// Numerically stable logistic function.
double sigmoid(double z);

struct ScoredLabel {
    std::string label_id;
    double logit = 0.0;
    double probability = 0.5;
    /// Ranking key: the logit, or the ensemble score when ensembling is on.
    double score = 0.0;
};

/// logit = v_cls^x . v_cls^d
ScoredLabel score_biencoder(const Encoding& doc, const Encoding& desc);

/// logit = v_cls^x . v_cls^d + sum_k max_{l : mask[l][k]} v_k^x . v_l^d.
/// Document tokens with no enabled description token contribute nothing.
ScoredLabel score_relaxed_coil(const Encoding& doc, const Encoding& desc, const OverlapMask& mask);

/// Same sum with the mask given implicitly by key equality.
double relaxed_coil_logit(const Encoding& doc, const Encoding& desc, std::span<const std::int64_t> doc_keys,
                          std::span<const std::int64_t> desc_keys);

/// COIL on surface-form equality, computed without masks or cluster maps.
ScoredLabel score_exact_coil(const Encoding& doc, const Encoding& desc, const std::vector<std::string>& doc_words,
                             const std::vector<std::string>& desc_words);

/// Gradient of the relaxed-COIL logit scaled by `g_logit`. The max picks the
/// lowest description index among equal dots.
struct EncodingPairGrad {
    Encoding doc;
    Encoding desc;
};
EncodingPairGrad relaxed_coil_backward(const Encoding& doc, const Encoding& desc,
                                       std::span<const std::int64_t> doc_keys,
                                       std::span<const std::int64_t> desc_keys, double g_logit);

/// A text prepared for the encoders: surface words, vocabulary ids (-1 for
/// OOV), cluster keys (relaxed matching) and exact keys (COIL matching).
struct TokenizedText {
    std::vector<std::string> words;
    std::vector<std::int32_t> ids;
    std::vector<std::int64_t> cluster_keys;
    std::vector<std::int64_t> exact_keys;

    std::size_t size() const noexcept { return words.size(); }
    const std::vector<std::int64_t>& keys(ScorerMode mode) const;
};

/// Truncates to max_tokens (0 keeps everything). A text with no tokens is
/// represented by one OOV placeholder so every text has an encoding.
TokenizedText prepare_text(std::string_view text, const Vocabulary& vocab, const ClusterMap& map,
                           std::size_t max_tokens);

inline constexpr const char* kEmptyTextToken = "<empty>";

/// Encoded label descriptions, already projected to the score space.
struct StoreEntry {
    std::string label_id;
    std::uint32_t description_index = 0;
    TokenizedText tokens;  // ids are not persisted; words and keys are
    Encoding encoding;
};

class DescriptionStore {
public:
    DescriptionStore() = default;

    std::size_t size() const noexcept { return entries_.size(); }
    const std::vector<StoreEntry>& entries() const noexcept { return entries_; }
    /// Entry positions of a label's descriptions, in description order.
    const std::vector<std::size_t>& entries_of(const std::string& label_id) const;
    bool has_label(const std::string& label_id) const;
    std::vector<std::string> label_ids() const;

    std::uint64_t params_hash = 0;
    std::uint64_t vocab_hash = 0;
    std::uint64_t cluster_hash = 0;
    std::size_t max_tokens = 0;

    std::size_t payload_bytes() const;

    /// store.bin: JSON header with the three version hashes, a fixed-width
    /// index table (label, description, token count, byte offset) and
    /// contiguous encoding blocks.
    void save(const std::filesystem::path& path) const;
    /// Refuses a store built from different parameters, vocabulary or
    /// cluster map.
    static DescriptionStore load(const std::filesystem::path& path, const ModelParams& params,
                                 const Vocabulary& vocab, const ClusterMap& map);

    void add(StoreEntry entry);

private:
    std::vector<StoreEntry> entries_;
    std::map<std::string, std::vector<std::size_t>> by_label_;
};

/// Encodes every description of every label (OpenMP over descriptions).
/// Throws ConsistencyError when a label has no descriptions.
DescriptionStore precompute_store(const ModelParams& params, const LabelSet& labels, const Vocabulary& vocab,
                                  const ClusterMap& map, std::size_t max_tokens);

/// Description index used for (doc, label) at prediction time.
std::uint32_t sample_description(std::uint64_t seed, const std::string& doc_id, const std::string& label_id,
                                 std::size_t pool_size);

struct PredictConfig {
    std::size_t k_shortlist = 1000;
    std::size_t k_out = 10;
    ScorerMode mode = ScorerMode::kRelaxed;
    /// When set, score = alpha * tfidf cosine + (1 - alpha) * probability.
    std::optional<double> ensemble_alpha;
    std::uint64_t seed = 0;
    std::size_t max_tokens = 0;
};

/// Shortlist by TF-IDF, rescore with the configured scorer, keep the top
/// k_out by score with ties broken by ascending label id.
class Predictor {
public:
    Predictor(const ModelParams& params, const Vocabulary& vocab, const ClusterMap& map, const DescriptionStore& store,
              const Shortlister& shortlister, PredictConfig config);

    std::vector<ScoredLabel> predict(const Document& doc) const;
    /// Scores every candidate label in `label_ids` (no shortlist).
    std::vector<ScoredLabel> score_labels(const Document& doc, const std::vector<std::string>& label_ids,
                                          const std::vector<double>& tfidf_scores) const;

    /// OpenMP over documents; identical to predicting one at a time.
    std::vector<std::vector<ScoredLabel>> predict_all(const std::vector<Document>& docs) const;
    std::vector<std::vector<ScoredLabel>> predict_all_serial(const std::vector<Document>& docs) const;

    const PredictConfig& config() const noexcept { return config_; }

private:
    const ModelParams& params_;
    const Vocabulary& vocab_;
    const ClusterMap& map_;
    const DescriptionStore& store_;
    const Shortlister& shortlister_;
    PredictConfig config_;
};

/// TF-IDF-only ranking (the shortlist itself), as ScoredLabel with the
/// cosine as logit and score.
std::vector<ScoredLabel> tfidf_rank(const Document& doc, const Vocabulary& vocab, const Shortlister& shortlister,
                                    std::size_t k_out);

/// Ranking order used everywhere: score descending, label id ascending.
void sort_ranked(std::vector<ScoredLabel>& labels);

}  // namespace semxc
