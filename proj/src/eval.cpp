#include "semxc/eval.hpp"

#include <algorithm>
#include <cctype>

#include "semxc/error.hpp"
#include "semxc/io.hpp"

namespace semxc {

std::string to_string(Setting s) {
    switch (s) {
        case Setting::kZS: return "ZS";
        case Setting::kGZS: return "GZS";
        case Setting::kFS: return "FS";
    }
    return "ZS";
}

Setting setting_from_string(const std::string& s) {
    std::string u = s;
    std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (u == "ZS") return Setting::kZS;
    if (u == "GZS") return Setting::kGZS;
    if (u == "FS") return Setting::kFS;
    throw ConsistencyError("unknown setting '" + s + "' (expected ZS, GZS or FS)");
}

namespace {

std::size_t hits_at_k(std::span<const std::string> ranked, const std::set<std::string>& gold, std::size_t k) {
    if (k == 0) throw ConsistencyError("k must be at least 1");
    std::size_t hits = 0;
    const std::size_t n = std::min(k, ranked.size());
    for (std::size_t i = 0; i < n; ++i) hits += gold.count(ranked[i]);
    return hits;
}

std::string metric_name(const char* prefix, std::size_t k) { return std::string(prefix) + "@" + std::to_string(k); }

}  // namespace

std::optional<double> precision_at_k(std::span<const std::string> ranked, const std::set<std::string>& gold,
                                     std::size_t k) {
    const std::size_t hits = hits_at_k(ranked, gold, k);
    if (gold.empty()) return std::nullopt;
    return static_cast<double>(hits) / static_cast<double>(k);
}

std::optional<double> recall_at_k(std::span<const std::string> ranked, const std::set<std::string>& gold,
                                  std::size_t k) {
    const std::size_t hits = hits_at_k(ranked, gold, k);
    if (gold.empty()) return std::nullopt;
    return static_cast<double>(hits) / static_cast<double>(gold.size());
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [k, v] : metrics) m[k] = v;
    return {{"setting", to_string(setting)},
            {"candidate_labels", candidate_labels},
            {"evaluated_docs", evaluated_docs},
            {"excluded_docs", excluded_docs},
            {"out_of_candidate_predictions", out_of_candidate_predictions},
            {"ks", ks},
            {"metrics", m}};
}

std::set<std::string> candidate_labels(const SplitSpec& split, Setting setting) {
    if (setting == Setting::kFS && !split.is_fewshot())
        throw ConsistencyError("FS evaluation needs a few-shot split");
    if (setting != Setting::kFS && split.is_fewshot())
        throw ConsistencyError(to_string(setting) + " evaluation needs a zero-shot split");
    std::set<std::string> c = split.unseen_labels;
    if (setting == Setting::kGZS) c.insert(split.seen_labels.begin(), split.seen_labels.end());
    return c;
}

namespace {

template <typename RankFn>
EvalReport evaluate_with(RankFn&& rank_of, const Corpus& corpus, const SplitSpec& split, Setting setting,
                         const std::set<std::string>& candidates, const std::vector<std::size_t>& ks) {
    if (ks.empty()) throw ConsistencyError("at least one k is required");
    EvalReport r;
    r.setting = setting;
    r.candidate_labels = candidates.size();
    r.ks = ks;
    std::map<std::string, double> sums;
    for (const auto& id : split.test_docs) {
        const Document* doc = corpus.find_document(id);
        if (doc == nullptr) throw ConsistencyError("split references unknown document '" + id + "'");
        const std::vector<std::string>& ranked = rank_of(*doc);
        for (const auto& l : ranked) r.out_of_candidate_predictions += candidates.count(l) == 0;
        std::set<std::string> gold;
        for (const auto& g : doc->gold_labels)
            if (candidates.count(g)) gold.insert(g);
        if (gold.empty()) {
            ++r.excluded_docs;
            continue;
        }
        ++r.evaluated_docs;
        for (std::size_t k : ks) {
            sums[metric_name("P", k)] += *precision_at_k(ranked, gold, k);
            sums[metric_name("R", k)] += *recall_at_k(ranked, gold, k);
        }
    }
    for (std::size_t k : ks)
        for (const char* p : {"P", "R"}) {
            const auto name = metric_name(p, k);
            r.metrics[name] = r.evaluated_docs == 0 ? 0.0 : sums[name] / static_cast<double>(r.evaluated_docs);
        }
    return r;
}

}  // namespace

EvalReport evaluate(const RankedPredictions& predictions, const Corpus& corpus, const SplitSpec& split,
                    Setting setting, const std::vector<std::size_t>& ks) {
    const auto candidates = candidate_labels(split, setting);
    auto rank_of = [&](const Document& d) -> const std::vector<std::string>& {
        const auto it = predictions.find(d.id);
        if (it == predictions.end())
            throw ConsistencyError("no prediction for test document '" + d.id + "' (predictions do not match the split)");
        return it->second;
    };
    return evaluate_with(rank_of, corpus, split, setting, candidates, ks);
}

std::vector<std::string> oracle_seen_ranking(const Document& doc, const SplitSpec& split, std::size_t depth) {
    std::vector<std::string> out;
    for (const auto& g : doc.gold_labels)
        if (split.seen_labels.count(g) && out.size() < depth) out.push_back(g);
    for (const auto& l : split.seen_labels) {
        if (out.size() >= depth) break;
        if (!doc.has_label(l)) out.push_back(l);
    }
    return out;
}

EvalReport oracle_seen(const Corpus& corpus, const SplitSpec& split, const std::vector<std::size_t>& ks) {
    const auto candidates = candidate_labels(split, Setting::kGZS);
    const std::size_t depth = ks.empty() ? 0 : *std::max_element(ks.begin(), ks.end());
    std::vector<std::string> scratch;
    auto rank_of = [&](const Document& d) -> const std::vector<std::string>& {
        scratch = oracle_seen_ranking(d, split, depth);
        return scratch;
    };
    return evaluate_with(rank_of, corpus, split, Setting::kGZS, candidates, ks);
}

std::optional<double> p_unseen(std::span<const std::string> ranked, const std::set<std::string>& gold,
                               const std::set<std::string>& unseen, std::size_t k) {
    std::vector<std::string> filtered;
    for (const auto& l : ranked)
        if (unseen.count(l)) filtered.push_back(l);
    return precision_at_k(filtered, gold, k);
}

std::map<std::string, double> p_unseen_metrics(const RankedPredictions& predictions, const Corpus& corpus,
                                               const SplitSpec& split, const std::vector<std::size_t>& ks) {
    std::map<std::string, double> sums;
    std::size_t n = 0;
    for (const auto& id : split.test_docs) {
        const Document* doc = corpus.find_document(id);
        if (doc == nullptr) throw ConsistencyError("split references unknown document '" + id + "'");
        const auto it = predictions.find(id);
        if (it == predictions.end()) throw ConsistencyError("no prediction for test document '" + id + "'");
        const std::set<std::string> gold(doc->gold_labels.begin(), doc->gold_labels.end());
        if (gold.empty()) continue;
        ++n;
        for (std::size_t k : ks) sums[metric_name("P_unseen", k)] += *p_unseen(it->second, gold, split.unseen_labels, k);
    }
    std::map<std::string, double> out;
    for (std::size_t k : ks) {
        const auto name = metric_name("P_unseen", k);
        out[name] = n == 0 ? 0.0 : sums[name] / static_cast<double>(n);
    }
    return out;
}

RankedPredictions load_predictions(const std::filesystem::path& path) {
    RankedPredictions out;
    const std::string text = io::read_file(path);
    io::for_each_line(text, [&](std::size_t line, std::string_view s) {
        try {
            const auto j = nlohmann::json::parse(s);
            std::vector<std::string> ranked;
            for (const auto& l : j.at("labels")) ranked.push_back(l.at("id").get<std::string>());
            const auto doc = j.at("doc").get<std::string>();
            if (!out.emplace(doc, std::move(ranked)).second)
                throw InputError(path.string() + ":" + std::to_string(line) + ": duplicate document '" + doc + "'");
        } catch (const nlohmann::json::exception& e) {
            throw InputError(path.string() + ":" + std::to_string(line) + ": malformed prediction: " + e.what());
        }
    });
    return out;
}

}  // namespace semxc
