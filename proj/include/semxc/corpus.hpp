#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace semxc {

enum class DescriptionSource { kScraped, kHierarchyFormatted, kAugmented };

std::string to_string(DescriptionSource source);
DescriptionSource description_source_from_string(const std::string& s);

/// One member of a label's description pool. `text` is what the output
/// encoder reads (already hierarchy-formatted).
struct Description {
    std::string text;
    DescriptionSource source = DescriptionSource::kScraped;
    std::vector<std::string> quality_flags;

    bool operator==(const Description&) const = default;
};

struct Document {
    std::string id;
    std::string text;
    std::vector<std::string> gold_labels;  // sorted, unique

    bool has_label(const std::string& label) const;
};

struct LabelRecord {
    std::string id;
    std::string name;
    std::vector<std::string> alternate_names;
    std::vector<std::string> parents;   // label ids
    std::vector<std::string> children;  // label ids
    std::vector<Description> descriptions;
};

/// Labels kept sorted by id; lookups by id are O(1).
class LabelSet {
public:
    LabelSet() = default;
    explicit LabelSet(std::vector<LabelRecord> labels);

    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    bool contains(const std::string& id) const { return index_.count(id) != 0; }

    const LabelRecord* find(const std::string& id) const;
    LabelRecord* find(const std::string& id);
    const LabelRecord& at(const std::string& id) const;
    std::size_t index_of(const std::string& id) const;

    const std::vector<LabelRecord>& records() const noexcept { return labels_; }
    std::vector<LabelRecord>& records() noexcept { return labels_; }
    std::vector<std::string> ids() const;

    auto begin() const { return labels_.begin(); }
    auto end() const { return labels_.end(); }

private:
    std::vector<LabelRecord> labels_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct Corpus {
    std::vector<Document> documents;
    LabelSet labels;
    /// Non-fatal findings (e.g. gold labels that did not resolve and were dropped).
    std::vector<std::string> warnings;

    const Document* find_document(const std::string& id) const;
    void reindex();

private:
    std::unordered_map<std::string, std::size_t> doc_index_;
};

/// Seen/unseen partition plus train/test documents. All sets are ordered so
/// serialization is canonical.
struct SplitSpec {
    std::set<std::string> seen_labels;
    std::set<std::string> unseen_labels;
    std::set<std::string> train_docs;
    std::set<std::string> test_docs;
    std::optional<int> fewshot_k;
    std::map<std::string, std::set<std::string>> neutral;

    bool is_fewshot() const noexcept { return fewshot_k.has_value(); }
    bool is_neutral(const std::string& doc, const std::string& label) const;

    /// Labels that may be scored during training (positives or negatives).
    std::set<std::string> trainable_labels() const;

    /// Gold labels of `doc` used as positives: trainable and not neutral.
    std::vector<std::string> supervised_labels(const Document& doc) const;

    bool operator==(const SplitSpec&) const = default;
};

nlohmann::json to_json(const SplitSpec& split);
SplitSpec split_from_json(const nlohmann::json& j);
/// Canonical serialization used for determinism checks.
std::string serialize_split(const SplitSpec& split);
void save_split(const SplitSpec& split, const std::filesystem::path& path);
SplitSpec load_split(const std::filesystem::path& path);

Corpus load_corpus(const std::filesystem::path& documents_path,
                   const std::filesystem::path& labels_path);
std::vector<Document> load_documents(const std::filesystem::path& path);
LabelSet load_labels(const std::filesystem::path& path);
/// Parses labels from JSONL text; `source_name` is used in error messages.
LabelSet parse_labels(const std::string& jsonl, const std::string& source_name);
std::vector<Document> parse_documents(const std::string& jsonl, const std::string& source_name);

void save_documents(const std::vector<Document>& docs, const std::filesystem::path& path);
void save_labels(const LabelSet& labels, const std::filesystem::path& path);

nlohmann::json to_json(const LabelRecord& label);
nlohmann::json to_json(const Document& doc);

/// Zero-shot split: floor(unseen_fraction * |labels|) labels (at least one)
/// drawn without replacement by Rng(seed) from the id-sorted label list.
SplitSpec make_zs_split(const Corpus& corpus, double unseen_fraction, std::uint64_t seed);

/// Few-shot split on top of a zero-shot base: each unseen label admits its
/// first min(k, available) documents in id order; every other document
/// carrying that label gets it as neutral.
SplitSpec make_fs_split(const Corpus& corpus, const SplitSpec& base, int k);

}  // namespace semxc
