#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "semxc/corpus.hpp"

namespace semxc {

enum class Setting { kZS, kGZS, kFS };

std::string to_string(Setting s);
/// Accepts "ZS", "GZS", "FS" (case-insensitive).
Setting setting_from_string(const std::string& s);

/// |top-k ∩ gold| / k. The denominator stays k when fewer than k
/// predictions exist. nullopt when gold is empty (undefined).
std::optional<double> precision_at_k(std::span<const std::string> ranked, const std::set<std::string>& gold,
                                     std::size_t k);
/// |top-k ∩ gold| / |gold|; nullopt when gold is empty.
std::optional<double> recall_at_k(std::span<const std::string> ranked, const std::set<std::string>& gold,
                                  std::size_t k);

/// doc id -> ranked label ids.
using RankedPredictions = std::map<std::string, std::vector<std::string>>;

struct EvalReport {
    Setting setting = Setting::kZS;
    std::size_t candidate_labels = 0;
    std::size_t evaluated_docs = 0;
    /// Test documents with no gold label inside the candidate set.
    std::size_t excluded_docs = 0;
    /// Predicted labels outside the candidate set (a predictor bug signal).
    std::size_t out_of_candidate_predictions = 0;
    std::vector<std::size_t> ks;
    std::map<std::string, double> metrics;  // "P@k", "R@k", ...

    nlohmann::json to_json() const;
};

inline const std::vector<std::size_t> kDefaultKs{1, 3, 5, 10};

/// Candidate labels: unseen for ZS and FS, seen ∪ unseen for GZS.
std::set<std::string> candidate_labels(const SplitSpec& split, Setting setting);

/// Averages P@k and R@k over split.test_docs with gold restricted to the
/// candidate set. Documents are visited in id order. Throws
/// ConsistencyError when a test document has no prediction entry or the
/// setting does not fit the split.
EvalReport evaluate(const RankedPredictions& predictions, const Corpus& corpus, const SplitSpec& split,
                    Setting setting, const std::vector<std::size_t>& ks = kDefaultKs);

/// Ranked list of the hypothetical predictor that gets every seen label
/// right and never predicts an unseen one: seen gold first, then non-gold
/// seen labels, both in id order, up to `depth` entries.
std::vector<std::string> oracle_seen_ranking(const Document& doc, const SplitSpec& split, std::size_t depth);
/// GZS metrics of that predictor over split.test_docs.
EvalReport oracle_seen(const Corpus& corpus, const SplitSpec& split, const std::vector<std::size_t>& ks = kDefaultKs);

/// Precision@k after filtering the ranking to unseen labels, against the
/// full gold set; the denominator stays k. nullopt for empty gold.
std::optional<double> p_unseen(std::span<const std::string> ranked, const std::set<std::string>& gold,
                               const std::set<std::string>& unseen, std::size_t k);
/// Mean p_unseen over split.test_docs, keyed "P_unseen@k".
std::map<std::string, double> p_unseen_metrics(const RankedPredictions& predictions, const Corpus& corpus,
                                               const SplitSpec& split, const std::vector<std::size_t>& ks = kDefaultKs);

/// predictions.jsonl rows: {"doc": id, "labels": [{"id": ..., ...}, ...]}.
RankedPredictions load_predictions(const std::filesystem::path& path);

}  // namespace semxc
