#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semxc/demo.hpp"
#include "semxc/encoder.hpp"
#include "semxc/eval.hpp"
#include "semxc/match.hpp"
#include "semxc/train.hpp"

namespace semxc::cli {

/// Every tunable of the pipeline. Missing keys keep their defaults; the
/// effective config is hashed into each manifest.
struct PipelineConfig {
    std::uint64_t seed = 0;

    DemoConfig demo;

    std::optional<std::string> rules_path;
    int augment_copies = 0;
    double augment_p = 0.5;
    bool use_constituents = true;

    double unseen_fraction = 0.5;
    std::optional<int> fewshot_k;
    std::uint32_t min_df = 1;

    ModelConfig model;
    double cluster_threshold = 0.6;
    bool lemma_merge = true;
    std::string cluster_table = "input";  // input | output token embeddings

    TrainConfig train;

    std::size_t k_shortlist = 1000;
    std::size_t k_out = 10;
    std::string scorer = "relaxed";  // relaxed | coil | biencoder | tfidf
    std::optional<double> ensemble_alpha;
    Setting setting = Setting::kZS;
    std::vector<std::size_t> ks = kDefaultKs;

    nlohmann::json to_json() const;
    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig load(const std::filesystem::path& path);
};

struct RunManifest {
    std::string command;
    std::string config_hash;
    std::map<std::string, std::string> inputs;  // path -> content hash
    std::map<std::string, std::uint64_t> seeds;
    std::vector<std::string> artifacts;
    std::map<std::string, double> timings;  // seconds

    nlohmann::json to_json() const;
};

/// Fingerprint of the label records a TF-IDF index was built from.
std::uint64_t labels_fingerprint(const LabelSet& labels);

/// Entry point of the `semxc` executable. Exit codes: 0 success, 1
/// unexpected failure, 2 usage error, 3 input error, 4 consistency error,
/// 5 numeric error.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace semxc::cli
