#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semxc/corpus.hpp"
#include "semxc/descpipe.hpp"

namespace semxc {

/// Planted-signal dataset. Every label owns `signatures` invented stems
/// that no other label uses. Clean snippets of a label carry all of its
/// stems in bare form; each document carries at least two stems of each of
/// its labels, mostly as inflections (-s, -ing, -ed) and otherwise bare,
/// plus filler words shared by all labels. Some labels get only junk
/// snippets and so end up with a name-only description.
struct DemoConfig {
    std::size_t num_labels = 50;
    std::size_t num_docs = 200;
    std::size_t signatures = 3;
    /// Probability that a signature appears in a document in bare form.
    double bare_probability = 0.25;
    std::size_t filler_min = 18;
    std::size_t filler_max = 28;
    /// Every n-th label receives junk snippets only.
    std::size_t junk_only_every = 10;
    std::uint64_t seed = 0;
};

struct DemoData {
    std::vector<Document> documents;
    LabelSet labels;  // no descriptions yet
    std::vector<RawSnippet> snippets;
    /// label id -> its signature stems.
    std::vector<std::pair<std::string, std::vector<std::string>>> signatures;
};

DemoData generate_demo(const DemoConfig& config);

}  // namespace semxc
