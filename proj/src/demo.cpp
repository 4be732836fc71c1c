#include "semxc/demo.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "semxc/cluster.hpp"
#include "semxc/error.hpp"
#include "semxc/rng.hpp"

namespace semxc {

namespace {

const std::vector<std::string>& filler_words() {
    static const std::vector<std::string> words{
        "system",   "method",  "report",   "result",   "process",  "network", "design",  "level",   "market",
        "group",    "region",  "history",  "example",  "source",   "period",  "policy",  "program", "service",
        "project",  "quality", "record",   "support",  "value",    "growth",  "sample",  "energy",  "surface",
        "material", "people",  "building", "culture",  "evidence", "effect",  "detail",  "feature", "member",
        "office",   "window",  "weather",  "morning",  "evening",  "river",   "mountain", "village", "garden",
        "kitchen",  "student", "teacher",  "library",  "machine",  "engine",  "signal",  "picture", "journey",
        "question", "answer",  "season",   "animal",   "forest",   "ocean",   "island",  "bridge",  "street",
        "factory",  "council", "museum",   "harbor",   "valley",   "meadow",  "letter",  "number",  "paper",
        "travel",   "summer",  "winter",   "spring",   "corner",   "harvest",  "review",  "series",  "table",
        "canal",   "family",  "city",     "country",  "world",    "study",   "field",   "practice", "topic",
        "describe", "involve", "cover",    "observe",  "build",    "measure", "compare", "explain", "gather",
        "improve",  "follow",  "produce",  "contain",  "develop",  "change",  "connect", "discuss", "remain",
    };
    return words;
}

std::string make_stem(Rng& rng) {
    static const std::string onset = "bdfgklmnprtvz";
    static const std::string vowels = "aeiou";
    static const std::string coda = "bdgklmnprt";
    std::string s;
    s += onset[rng.below(onset.size())];
    s += vowels[rng.below(vowels.size())];
    s += onset[rng.below(onset.size())];
    s += vowels[rng.below(vowels.size())];
    s += coda[rng.below(coda.size())];
    return s;
}

std::string capitalise(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

std::string inflect(const std::string& stem, Rng& rng) {
    static const char* suffixes[] = {"s", "ing", "ed"};
    return stem + suffixes[rng.below(3)];
}

std::string clean_snippet(std::size_t tmpl, const std::vector<std::string>& sig) {
    switch (tmpl % 3) {
        case 0:
            return capitalise(sig[0]) + " is a topic that covers " + sig[1] + " and " + sig[2] +
                   " in daily practice.";
        case 1:
            return "Work on " + sig[1] + " often involves " + sig[0] + " together with " + sig[2] + " methods.";
        default:
            return "Experts describe " + sig[2] + " as closely linked to " + sig[0] + " and " + sig[1] + " today.";
    }
}

std::string junk_snippet(std::size_t tmpl, const std::vector<std::string>& sig) {
    switch (tmpl % 4) {
        case 0:
            return "Buy " + capitalise(sig[0]) + " Online Now! Free Shipping on orders over $50.";
        case 1:
            return "Shop and read reviews about " + capitalise(sig[1]) + " at our store near you today";
        case 2:
            return "What is the best " + sig[0] + " for";
        default:
            return "We tried " + sig[2] + " with our team and we loved our results, my friends agree.";
    }
}

}  // namespace

DemoData generate_demo(const DemoConfig& cfg) {
    if (cfg.num_labels == 0 || cfg.num_docs == 0) throw InputError("demo needs at least one label and one document");
    if (cfg.signatures < 3) throw InputError("demo needs at least three signatures per label");
    if (cfg.filler_min > cfg.filler_max) throw InputError("demo filler_min exceeds filler_max");

    const Lemmatizer lemma;
    std::set<std::string> taken;
    for (const auto& w : filler_words()) taken.insert(lemma(w));

    DemoData data;
    Rng stem_rng(derive_seed(cfg.seed, "stems"));
    std::vector<LabelRecord> records;
    for (std::size_t i = 0; i < cfg.num_labels; ++i) {
        std::vector<std::string> sig;
        while (sig.size() < cfg.signatures) {
            const std::string s = make_stem(stem_rng);
            const std::string key = lemma(s);
            const bool stable = key == s && lemma(s + "s") == key && lemma(s + "ing") == key && lemma(s + "ed") == key;
            if (!stable || !taken.insert(key).second) continue;
            sig.push_back(s);
        }
        char id[16];
        std::snprintf(id, sizeof id, "L%03zu", i);
        LabelRecord r;
        r.id = id;
        r.name = capitalise(sig[0]) + " " + sig[1];
        records.push_back(r);
        data.signatures.emplace_back(r.id, sig);
    }
    data.labels = LabelSet(records);

    Rng snip_rng(derive_seed(cfg.seed, "snippets"));
    for (std::size_t i = 0; i < cfg.num_labels; ++i) {
        const auto& [id, sig] = data.signatures[i];
        const bool junk_only = cfg.junk_only_every > 0 && i % cfg.junk_only_every == cfg.junk_only_every - 1;
        int rank = 1;
        if (!junk_only) {
            const std::size_t first = snip_rng.below(3);
            for (std::size_t t = 0; t < 2; ++t) data.snippets.push_back({id, clean_snippet(first + t, sig), rank++});
        }
        const std::size_t junk = junk_only ? 2 : snip_rng.below(2);
        for (std::size_t t = 0; t < junk; ++t)
            data.snippets.push_back({id, junk_snippet(snip_rng.below(4), sig), rank++});
    }

    Rng doc_rng(derive_seed(cfg.seed, "documents"));
    const auto& filler = filler_words();
    for (std::size_t d = 0; d < cfg.num_docs; ++d) {
        std::set<std::size_t> gold{d % cfg.num_labels};
        const double u = doc_rng.uniform();
        const std::size_t extra = u < 0.6 ? 0 : (u < 0.9 ? 1 : 2);
        while (gold.size() < std::min(cfg.num_labels, 1 + extra)) gold.insert(doc_rng.below(cfg.num_labels));

        std::vector<std::string> words;
        Document doc;
        for (std::size_t li : gold) {
            const auto& sig = data.signatures[li].second;
            const std::size_t count = 2 + doc_rng.below(sig.size() - 1);
            for (std::size_t s : doc_rng.sample_indices(sig.size(), count))
                words.push_back(doc_rng.bernoulli(cfg.bare_probability) ? sig[s] : inflect(sig[s], doc_rng));
            doc.gold_labels.push_back(data.signatures[li].first);
        }
        const std::size_t n_fill = cfg.filler_min + doc_rng.below(cfg.filler_max - cfg.filler_min + 1);
        for (std::size_t f = 0; f < n_fill; ++f) words.push_back(filler[doc_rng.below(filler.size())]);
        doc_rng.shuffle(words);
        std::string text;
        for (const auto& w : words) text += (text.empty() ? capitalise(w) : " " + w);
        char id[16];
        std::snprintf(id, sizeof id, "D%04zu", d);
        doc.id = id;
        doc.text = text + ".";
        std::sort(doc.gold_labels.begin(), doc.gold_labels.end());
        data.documents.push_back(std::move(doc));
    }
    return data;
}

}  // namespace semxc
