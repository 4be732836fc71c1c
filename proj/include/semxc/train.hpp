#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semxc/corpus.hpp"
#include "semxc/encoder.hpp"
#include "semxc/match.hpp"

namespace semxc {

/// One training instance: positives, sampled hard negatives and the
/// description drawn for each of them.
struct BatchPlan {
    std::string doc_id;
    std::vector<std::string> positives;
    std::vector<std::string> negatives;  // shortlist order
    std::map<std::string, std::uint32_t> description_index;
    std::vector<std::string> warnings;

    std::size_t size() const noexcept { return positives.size() + negatives.size(); }
};

/// Negatives come from the document's TF-IDF shortlist over `shortlister`
/// (which should hold only trainable labels). Gold and neutral labels are
/// never negatives. K - |P| negatives are drawn uniformly from the eligible
/// part of a K + |gold ∪ neutral| shortlist and kept in shortlist order;
/// when fewer are eligible all are used and a warning is recorded. When
/// |P| > K the positives are cut to K by seeded sampling.
/// Throws ConsistencyError when no label is eligible as a negative.
BatchPlan sample_negatives(const Document& doc, const SplitSpec& split, const LabelSet& labels,
                           const Vocabulary& vocab, const Shortlister& shortlister, std::size_t K,
                           std::uint64_t seed);

double softplus(double z);

/// Tokenised documents and descriptions, prepared once per run.
class TrainingText {
public:
    TrainingText(const Corpus& corpus, const Vocabulary& vocab, const ClusterMap& map, std::size_t max_tokens);

    const TokenizedText& document(const std::string& id) const;
    const TokenizedText& description(const std::string& label_id, std::uint32_t index) const;

private:
    std::map<std::string, TokenizedText> docs_;
    std::map<std::string, std::vector<TokenizedText>> descriptions_;
};

struct InstanceLoss {
    double loss = 0.0;           // (positive + negative) / K
    double positive_term = 0.0;  // sum over positives of softplus(-z), unnormalised
    double negative_term = 0.0;  // sum over negatives of softplus(z), unnormalised
};

/// Contrastive loss for one instance: (1/K)[sum_pos -log s(z) + sum_neg -log(1 - s(z))]
/// with K = plan.size(). Gradients are accumulated into `grads` (scaled by
/// `grad_scale`) when it is non-null. Throws NumericError naming the
/// document and label when a logit or the loss is not finite.
InstanceLoss loss_and_grads(const ModelParams& params, const BatchPlan& plan, const TrainingText& text,
                            ScorerMode mode, ModelGrads* grads, double grad_scale = 1.0);

struct BatchResult {
    double mean_loss = 0.0;
    std::vector<double> instance_losses;
    ModelGrads grads;  // gradient of the mean loss
};

/// Instances in parallel; per-instance gradients are summed in index order,
/// so the result does not depend on the thread count.
BatchResult batch_loss_and_grads(const ModelParams& params, const std::vector<BatchPlan>& plans,
                                 const TrainingText& text, ScorerMode mode);
BatchResult batch_loss_and_grads_serial(const ModelParams& params, const std::vector<BatchPlan>& plans,
                                        const TrainingText& text, ScorerMode mode);

struct TrainConfig {
    int epochs = 10;
    std::size_t batch_size = 8;
    std::size_t K = 10;
    std::uint64_t seed = 0;
    double lr_input = 0.05;
    double lr_output = 0.1;
    double weight_decay = 0.0;
    std::vector<std::string> freeze;
    ScorerMode scorer = ScorerMode::kRelaxed;
    std::size_t max_tokens = 64;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochLog {
    int epoch = 0;
    double mean_loss = 0.0;
    std::size_t instances = 0;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochLog> log;
    std::vector<std::string> warnings;
    /// Set when training stopped on a non-finite loss; `params` then holds
    /// the last parameters that produced a finite batch.
    std::optional<std::string> divergence;
};

/// Seeded-shuffled epochs over split.train_docs. `shortlister` must cover
/// the trainable labels of the split.
TrainResult train_loop(ModelParams params, const TrainConfig& config, const Corpus& corpus, const SplitSpec& split,
                       const Vocabulary& vocab, const ClusterMap& map, const Shortlister& shortlister);

/// Fraction of description encodings avoided per batch relative to
/// encoding every class: (C - K) / C.
double speedup_ratio(std::int64_t num_classes, std::int64_t K);

}  // namespace semxc
