#include "semxc/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "semxc/error.hpp"
#include "semxc/io.hpp"
#include "semxc/rng.hpp"

namespace semxc {

using nlohmann::json;

std::string to_string(DescriptionSource source) {
    switch (source) {
        case DescriptionSource::kScraped: return "scraped";
        case DescriptionSource::kHierarchyFormatted: return "hierarchy-formatted";
        case DescriptionSource::kAugmented: return "augmented";
    }
    return "scraped";
}

DescriptionSource description_source_from_string(const std::string& s) {
    if (s == "scraped") return DescriptionSource::kScraped;
    if (s == "hierarchy-formatted") return DescriptionSource::kHierarchyFormatted;
    if (s == "augmented") return DescriptionSource::kAugmented;
    throw InputError("unknown description source '" + s + "'");
}

bool Document::has_label(const std::string& label) const {
    return std::binary_search(gold_labels.begin(), gold_labels.end(), label);
}

LabelSet::LabelSet(std::vector<LabelRecord> labels) : labels_(std::move(labels)) {
    std::sort(labels_.begin(), labels_.end(),
              [](const LabelRecord& a, const LabelRecord& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (!index_.emplace(labels_[i].id, i).second)
            throw InputError("duplicate label id '" + labels_[i].id + "'");
    }
}

const LabelRecord* LabelSet::find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &labels_[it->second];
}

LabelRecord* LabelSet::find(const std::string& id) {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &labels_[it->second];
}

const LabelRecord& LabelSet::at(const std::string& id) const {
    const LabelRecord* rec = find(id);
    if (rec == nullptr) throw InputError("unknown label id '" + id + "'");
    return *rec;
}

std::size_t LabelSet::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw InputError("unknown label id '" + id + "'");
    return it->second;
}

std::vector<std::string> LabelSet::ids() const {
    std::vector<std::string> out;
    out.reserve(labels_.size());
    for (const auto& l : labels_) out.push_back(l.id);
    return out;
}

const Document* Corpus::find_document(const std::string& id) const {
    auto it = doc_index_.find(id);
    return it == doc_index_.end() ? nullptr : &documents[it->second];
}

void Corpus::reindex() {
    doc_index_.clear();
    for (std::size_t i = 0; i < documents.size(); ++i) {
        if (!doc_index_.emplace(documents[i].id, i).second)
            throw InputError("duplicate document id '" + documents[i].id + "'");
    }
}

bool SplitSpec::is_neutral(const std::string& doc, const std::string& label) const {
    auto it = neutral.find(doc);
    return it != neutral.end() && it->second.count(label) != 0;
}

std::set<std::string> SplitSpec::trainable_labels() const {
    std::set<std::string> out = seen_labels;
    if (is_fewshot()) out.insert(unseen_labels.begin(), unseen_labels.end());
    return out;
}

std::vector<std::string> SplitSpec::supervised_labels(const Document& doc) const {
    std::vector<std::string> out;
    for (const auto& l : doc.gold_labels) {
        const bool trainable = seen_labels.count(l) != 0 || (is_fewshot() && unseen_labels.count(l) != 0);
        if (trainable && !is_neutral(doc.id, l)) out.push_back(l);
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> string_array(const json& obj, const char* key, std::size_t line,
                                      const std::string& source, bool required) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        if (required)
            throw InputError(source + ":" + std::to_string(line) + ": missing field '" + key + "'");
        return {};
    }
    if (!it->is_array())
        throw InputError(source + ":" + std::to_string(line) + ": field '" + key + "' must be an array");
    std::vector<std::string> out;
    for (const auto& v : *it) {
        if (!v.is_string())
            throw InputError(source + ":" + std::to_string(line) + ": field '" + key +
                             "' must contain strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

std::string string_field(const json& obj, const char* key, std::size_t line, const std::string& source) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string())
        throw InputError(source + ":" + std::to_string(line) + ": missing string field '" + key + "'");
    return it->get<std::string>();
}

json parse_line(std::string_view line, std::size_t line_no, const std::string& source) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw InputError(source + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
    }
    if (!j.is_object())
        throw InputError(source + ":" + std::to_string(line_no) + ": record must be a JSON object");
    return j;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

void sort_unique(std::vector<std::string>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

json to_json(const LabelRecord& label) {
    json j;
    j["id"] = label.id;
    j["name"] = label.name;
    j["alt_names"] = label.alternate_names;
    j["parents"] = label.parents;
    j["children"] = label.children;
    if (!label.descriptions.empty()) {
        json descs = json::array();
        for (const auto& d : label.descriptions) {
            descs.push_back({{"text", d.text}, {"source", to_string(d.source)}, {"quality_flags", d.quality_flags}});
        }
        j["descriptions"] = std::move(descs);
    }
    return j;
}

json to_json(const Document& doc) {
    return json{{"id", doc.id}, {"text", doc.text}, {"labels", doc.gold_labels}};
}

std::vector<Document> parse_documents(const std::string& jsonl, const std::string& source) {
    std::vector<Document> docs;
    io::for_each_line(jsonl, [&](std::size_t line_no, std::string_view line) {
        const json j = parse_line(line, line_no, source);
        Document d;
        d.id = string_field(j, "id", line_no, source);
        d.text = string_field(j, "text", line_no, source);
        d.gold_labels = string_array(j, "labels", line_no, source, true);
        if (d.id.empty()) throw InputError(source + ":" + std::to_string(line_no) + ": empty document id");
        if (blank(d.text))
            throw InputError(source + ":" + std::to_string(line_no) + ": document '" + d.id + "' has empty text");
        sort_unique(d.gold_labels);
        docs.push_back(std::move(d));
    });
    return docs;
}

LabelSet parse_labels(const std::string& jsonl, const std::string& source) {
    std::vector<LabelRecord> labels;
    std::unordered_map<std::string, std::size_t> seen;
    io::for_each_line(jsonl, [&](std::size_t line_no, std::string_view line) {
        const json j = parse_line(line, line_no, source);
        LabelRecord l;
        l.id = string_field(j, "id", line_no, source);
        l.name = string_field(j, "name", line_no, source);
        l.alternate_names = string_array(j, "alt_names", line_no, source, false);
        l.parents = string_array(j, "parents", line_no, source, false);
        l.children = string_array(j, "children", line_no, source, false);
        if (l.id.empty()) throw InputError(source + ":" + std::to_string(line_no) + ": empty label id");
        if (auto it = j.find("descriptions"); it != j.end()) {
            if (!it->is_array())
                throw InputError(source + ":" + std::to_string(line_no) + ": 'descriptions' must be an array");
            for (const auto& dj : *it) {
                if (!dj.is_object())
                    throw InputError(source + ":" + std::to_string(line_no) + ": description must be an object");
                Description d;
                d.text = string_field(dj, "text", line_no, source);
                if (auto s = dj.find("source"); s != dj.end() && s->is_string())
                    d.source = description_source_from_string(s->get<std::string>());
                d.quality_flags = string_array(dj, "quality_flags", line_no, source, false);
                l.descriptions.push_back(std::move(d));
            }
        }
        if (!seen.emplace(l.id, line_no).second)
            throw InputError(source + ":" + std::to_string(line_no) + ": duplicate label id '" + l.id + "'");
        labels.push_back(std::move(l));
    });

    // Cross-link and validate the hierarchy.
    std::unordered_map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) idx[labels[i].id] = i;
    for (auto& l : labels) {
        for (const auto& p : l.parents)
            if (!idx.count(p)) throw InputError("dangling hierarchy edge: \"" + l.id + "\" -> \"" + p + "\" (parent not in " + source + ")");
        for (const auto& c : l.children)
            if (!idx.count(c)) throw InputError("dangling hierarchy edge: \"" + l.id + "\" -> \"" + c + "\" (child not in " + source + ")");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (const auto& p : std::vector<std::string>(labels[i].parents))
            labels[idx[p]].children.push_back(labels[i].id);
        for (const auto& c : std::vector<std::string>(labels[i].children))
            labels[idx[c]].parents.push_back(labels[i].id);
    }
    for (auto& l : labels) {
        sort_unique(l.parents);
        sort_unique(l.children);
    }

    // Cycle check over parent edges (iterative three-colour DFS).
    std::vector<int> colour(labels.size(), 0);
    for (std::size_t root = 0; root < labels.size(); ++root) {
        if (colour[root] != 0) continue;
        std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
        colour[root] = 1;
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < labels[node].parents.size()) {
                const std::size_t p = idx[labels[node].parents[next++]];
                if (colour[p] == 1)
                    throw InputError("label hierarchy has a cycle through \"" + labels[p].id + "\"");
                if (colour[p] == 0) {
                    colour[p] = 1;
                    stack.emplace_back(p, 0);
                }
            } else {
                colour[node] = 2;
                stack.pop_back();
            }
        }
    }
    return LabelSet(std::move(labels));
}

std::vector<Document> load_documents(const std::filesystem::path& path) {
    return parse_documents(io::read_file(path), path.string());
}

LabelSet load_labels(const std::filesystem::path& path) {
    return parse_labels(io::read_file(path), path.string());
}

Corpus load_corpus(const std::filesystem::path& documents_path, const std::filesystem::path& labels_path) {
    Corpus c;
    c.labels = load_labels(labels_path);
    c.documents = load_documents(documents_path);
    for (auto& d : c.documents) {
        std::vector<std::string> kept;
        for (auto& l : d.gold_labels) {
            if (c.labels.contains(l)) {
                kept.push_back(l);
            } else {
                c.warnings.push_back("document \"" + d.id + "\" references unknown label \"" + l + "\"");
            }
        }
        d.gold_labels = std::move(kept);
    }
    c.reindex();
    return c;
}

void save_documents(const std::vector<Document>& docs, const std::filesystem::path& path) {
    std::string out;
    for (const auto& d : docs) out += to_json(d).dump() + "\n";
    io::write_file(path, out);
}

void save_labels(const LabelSet& labels, const std::filesystem::path& path) {
    std::string out;
    for (const auto& l : labels) out += to_json(l).dump() + "\n";
    io::write_file(path, out);
}

json to_json(const SplitSpec& s) {
    json j;
    j["seen_labels"] = std::vector<std::string>(s.seen_labels.begin(), s.seen_labels.end());
    j["unseen_labels"] = std::vector<std::string>(s.unseen_labels.begin(), s.unseen_labels.end());
    j["train_docs"] = std::vector<std::string>(s.train_docs.begin(), s.train_docs.end());
    j["test_docs"] = std::vector<std::string>(s.test_docs.begin(), s.test_docs.end());
    j["fewshot_k"] = s.fewshot_k ? json(*s.fewshot_k) : json(nullptr);
    json neutral = json::object();
    for (const auto& [doc, labels] : s.neutral)
        neutral[doc] = std::vector<std::string>(labels.begin(), labels.end());
    j["neutral"] = std::move(neutral);
    return j;
}

SplitSpec split_from_json(const json& j) {
    SplitSpec s;
    try {
        for (const auto& v : j.at("seen_labels")) s.seen_labels.insert(v.get<std::string>());
        for (const auto& v : j.at("unseen_labels")) s.unseen_labels.insert(v.get<std::string>());
        for (const auto& v : j.at("train_docs")) s.train_docs.insert(v.get<std::string>());
        for (const auto& v : j.at("test_docs")) s.test_docs.insert(v.get<std::string>());
        if (j.contains("fewshot_k") && !j["fewshot_k"].is_null()) s.fewshot_k = j["fewshot_k"].get<int>();
        if (j.contains("neutral")) {
            for (const auto& [doc, labels] : j["neutral"].items())
                for (const auto& l : labels) s.neutral[doc].insert(l.get<std::string>());
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed split: ") + e.what());
    }
    for (const auto& l : s.seen_labels)
        if (s.unseen_labels.count(l)) throw ConsistencyError("label '" + l + "' is both seen and unseen");
    return s;
}

std::string serialize_split(const SplitSpec& split) { return io::dump_json(to_json(split)); }

void save_split(const SplitSpec& split, const std::filesystem::path& path) {
    io::write_file(path, serialize_split(split));
}

SplitSpec load_split(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    return split_from_json(j);
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

SplitSpec make_zs_split(const Corpus& corpus, double unseen_fraction, std::uint64_t seed) {
    if (!(unseen_fraction > 0.0 && unseen_fraction < 1.0))
        throw ConsistencyError("unseen_fraction must lie in (0, 1)");

    std::set<std::string> labels_with_docs;
    for (const auto& d : corpus.documents) labels_with_docs.insert(d.gold_labels.begin(), d.gold_labels.end());
    if (labels_with_docs.size() < 2)
        throw ConsistencyError("zero-shot split needs at least two labels with training documents");

    const std::vector<std::string> ids = corpus.labels.ids();
    const std::size_t total = ids.size();
    // The epsilon keeps products like 0.29 * 100 from flooring to 28.
    std::size_t n_unseen = static_cast<std::size_t>(std::floor(unseen_fraction * static_cast<double>(total) + 1e-9));
    n_unseen = std::clamp<std::size_t>(n_unseen, 1, total - 1);

    Rng rng(seed);
    SplitSpec split;
    for (std::size_t i : rng.sample_indices(total, n_unseen)) split.unseen_labels.insert(ids[i]);
    for (const auto& id : ids)
        if (!split.unseen_labels.count(id)) split.seen_labels.insert(id);

    for (const auto& d : corpus.documents) {
        bool any_seen = false;
        bool any_unseen = false;
        for (const auto& l : d.gold_labels) {
            any_seen |= split.seen_labels.count(l) != 0;
            any_unseen |= split.unseen_labels.count(l) != 0;
        }
        if (any_seen) split.train_docs.insert(d.id);
        if (any_unseen) split.test_docs.insert(d.id);
    }
    return split;
}

SplitSpec make_fs_split(const Corpus& corpus, const SplitSpec& base, int k) {
    if (k <= 0) throw ConsistencyError("few-shot k must be positive (use the zero-shot split for k = 0)");
    if (base.is_fewshot()) throw ConsistencyError("few-shot split must start from a zero-shot split");

    std::vector<const Document*> docs;
    docs.reserve(corpus.documents.size());
    for (const auto& d : corpus.documents) docs.push_back(&d);
    std::sort(docs.begin(), docs.end(), [](const Document* a, const Document* b) { return a->id < b->id; });

    SplitSpec split = base;
    split.fewshot_k = k;
    std::set<std::string> admitted_docs;
    for (const auto& label : base.unseen_labels) {
        int admitted = 0;
        for (const Document* d : docs) {
            if (!d->has_label(label)) continue;
            if (admitted < k) {
                ++admitted;
                admitted_docs.insert(d->id);
                split.train_docs.insert(d->id);
            } else {
                split.neutral[d->id].insert(label);
            }
        }
    }
    for (const auto& id : admitted_docs) split.test_docs.erase(id);
    return split;
}

}  // namespace semxc
