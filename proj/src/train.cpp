#include "semxc/train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <set>

#include "semxc/error.hpp"
#include "semxc/rng.hpp"

namespace semxc {

BatchPlan sample_negatives(const Document& doc, const SplitSpec& split, const LabelSet& labels,
                           const Vocabulary& vocab, const Shortlister& shortlister, std::size_t K,
                           std::uint64_t seed) {
    if (K == 0) throw ConsistencyError("K must be at least 1");
    BatchPlan plan;
    plan.doc_id = doc.id;
    plan.positives = split.supervised_labels(doc);

    if (plan.positives.size() > K) {
        Rng rng(derive_seed(seed, "truncate"));
        auto keep = rng.sample_indices(plan.positives.size(), K);
        std::sort(keep.begin(), keep.end());
        std::vector<std::string> cut;
        for (std::size_t i : keep) cut.push_back(plan.positives[i]);
        plan.warnings.push_back("document \"" + doc.id + "\" has " + std::to_string(plan.positives.size()) +
                                " positives, more than K = " + std::to_string(K) + "; truncated");
        plan.positives = std::move(cut);
    }

    std::set<std::string> excluded(doc.gold_labels.begin(), doc.gold_labels.end());
    if (auto it = split.neutral.find(doc.id); it != split.neutral.end())
        excluded.insert(it->second.begin(), it->second.end());

    const std::size_t need = K - plan.positives.size();
    std::vector<std::string> eligible;
    if (need > 0) {
        for (const auto& s : shortlister.shortlist(tfidf_vector(doc.text, vocab), K + excluded.size()))
            if (!excluded.count(s.id)) eligible.push_back(s.id);
        if (eligible.empty())
            throw ConsistencyError("document \"" + doc.id + "\" has no eligible negative labels");
    }
    if (eligible.size() <= need) {
        plan.negatives = eligible;
        if (eligible.size() < need)
            plan.warnings.push_back("document \"" + doc.id + "\": negative pool exhausted, " +
                                    std::to_string(eligible.size()) + " of " + std::to_string(need) +
                                    " negatives available");
    } else {
        Rng rng(derive_seed(seed, "negatives"));
        auto picks = rng.sample_indices(eligible.size(), need);
        std::sort(picks.begin(), picks.end());
        for (std::size_t i : picks) plan.negatives.push_back(eligible[i]);
    }

    Rng rng(derive_seed(seed, "descriptions"));
    for (const auto* group : {&plan.positives, &plan.negatives})
        for (const auto& id : *group) {
            const std::size_t n = labels.at(id).descriptions.size();
            if (n == 0) throw ConsistencyError("label '" + id + "' has no descriptions");
            plan.description_index[id] = static_cast<std::uint32_t>(rng.below(n));
        }
    return plan;
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

TrainingText::TrainingText(const Corpus& corpus, const Vocabulary& vocab, const ClusterMap& map,
                           std::size_t max_tokens) {
    for (const auto& d : corpus.documents) docs_.emplace(d.id, prepare_text(d.text, vocab, map, max_tokens));
    for (const auto& l : corpus.labels) {
        auto& pool = descriptions_[l.id];
        for (const auto& desc : l.descriptions) pool.push_back(prepare_text(desc.text, vocab, map, max_tokens));
    }
}

const TokenizedText& TrainingText::document(const std::string& id) const {
    const auto it = docs_.find(id);
    if (it == docs_.end()) throw ConsistencyError("unknown document '" + id + "'");
    return it->second;
}

const TokenizedText& TrainingText::description(const std::string& label_id, std::uint32_t index) const {
    const auto it = descriptions_.find(label_id);
    if (it == descriptions_.end() || index >= it->second.size())
        throw ConsistencyError("no description " + std::to_string(index) + " for label '" + label_id + "'");
    return it->second[index];
}

InstanceLoss loss_and_grads(const ModelParams& params, const BatchPlan& plan, const TrainingText& text,
                            ScorerMode mode, ModelGrads* grads, double grad_scale) {
    const std::size_t k_eff = plan.size();
    if (k_eff == 0) throw ConsistencyError("empty batch plan for document '" + plan.doc_id + "'");
    const TokenizedText& doc = text.document(plan.doc_id);
    const auto doc_rows = params.input.rows_for(doc.ids);
    const Encoding x = encode(params.input, doc_rows);

    Vector g_x_cls = Vector::Zero(x.cls.size());
    Matrix g_x_tokens = Matrix::Zero(x.tokens.rows(), x.tokens.cols());
    InstanceLoss out;

    auto term = [&](const std::string& label, bool positive) {
        const TokenizedText& desc = text.description(label, plan.description_index.at(label));
        const auto desc_rows = params.output.rows_for(desc.ids);
        const Encoding raw = encode(params.output, desc_rows);
        const Encoding y = project_description(params, raw);
        const bool lexical = mode != ScorerMode::kBiencoder;
        const std::vector<std::int64_t> none;
        const auto& dk = lexical ? doc.keys(mode) : none;
        const auto& lk = lexical ? desc.keys(mode) : none;
        // With no keys on either side the lexical sum is empty.
        const double z = lexical ? relaxed_coil_logit(x, y, dk, lk) : x.cls.dot(y.cls);
        const double l = positive ? softplus(-z) : softplus(z);
        if (!std::isfinite(z) || !std::isfinite(l))
            throw NumericError("non-finite loss for document '" + plan.doc_id + "' and label '" + label + "'");
        (positive ? out.positive_term : out.negative_term) += l;
        if (grads == nullptr) return;

        const double g_z = grad_scale * (sigmoid(z) - (positive ? 1.0 : 0.0)) / static_cast<double>(k_eff);
        Vector gx_cls, gy_cls;
        Matrix gx_tok, gy_tok;
        if (lexical) {
            EncodingPairGrad g = relaxed_coil_backward(x, y, dk, lk, g_z);
            gx_cls = std::move(g.doc.cls);
            gx_tok = std::move(g.doc.tokens);
            gy_cls = std::move(g.desc.cls);
            gy_tok = std::move(g.desc.tokens);
        } else {
            gx_cls = g_z * y.cls;
            gy_cls = g_z * x.cls;
            gx_tok = Matrix::Zero(x.tokens.rows(), x.tokens.cols());
            gy_tok = Matrix::Zero(y.tokens.rows(), y.tokens.cols());
        }
        g_x_cls += gx_cls;
        g_x_tokens += gx_tok;
        const Encoding g_raw = project_description_backward(params, raw, gy_cls, gy_tok,
                                                            params.adapter ? &grads->adapter : nullptr);
        grads->output.add(encode_backward(params.output, desc_rows, g_raw.cls, g_raw.tokens));
    };
    for (const auto& p : plan.positives) term(p, true);
    for (const auto& n : plan.negatives) term(n, false);

    out.loss = (out.positive_term + out.negative_term) / static_cast<double>(k_eff);
    if (!std::isfinite(out.loss)) throw NumericError("non-finite loss for document '" + plan.doc_id + "'");
    if (grads != nullptr) grads->input.add(encode_backward(params.input, doc_rows, g_x_cls, g_x_tokens));
    return out;
}

namespace {

BatchResult reduce(const ModelParams& params, std::vector<InstanceLoss>& losses, std::vector<ModelGrads>& parts) {
    BatchResult r;
    r.grads = ModelGrads::zeros_like(params);
    const double n = static_cast<double>(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i) {
        r.instance_losses.push_back(losses[i].loss);
        r.mean_loss += losses[i].loss;
        r.grads.add(parts[i]);
    }
    if (!losses.empty()) r.mean_loss /= n;
    return r;
}

}  // namespace

BatchResult batch_loss_and_grads(const ModelParams& params, const std::vector<BatchPlan>& plans,
                                 const TrainingText& text, ScorerMode mode) {
    const double scale = plans.empty() ? 0.0 : 1.0 / static_cast<double>(plans.size());
    std::vector<InstanceLoss> losses(plans.size());
    std::vector<ModelGrads> parts(plans.size());
    std::vector<std::exception_ptr> errors(plans.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(plans.size()); ++i) {
        const auto u = static_cast<std::size_t>(i);
        parts[u] = ModelGrads::zeros_like(params);
        try {
            losses[u] = loss_and_grads(params, plans[u], text, mode, &parts[u], scale);
        } catch (...) {
            errors[u] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return reduce(params, losses, parts);
}

BatchResult batch_loss_and_grads_serial(const ModelParams& params, const std::vector<BatchPlan>& plans,
                                        const TrainingText& text, ScorerMode mode) {
    const double scale = plans.empty() ? 0.0 : 1.0 / static_cast<double>(plans.size());
    std::vector<InstanceLoss> losses;
    std::vector<ModelGrads> parts;
    for (const auto& p : plans) {
        parts.push_back(ModelGrads::zeros_like(params));
        losses.push_back(loss_and_grads(params, p, text, mode, &parts.back(), scale));
    }
    return reduce(params, losses, parts);
}

nlohmann::json TrainConfig::to_json() const {
    return {{"epochs", epochs},         {"batch_size", batch_size}, {"K", K},
            {"seed", seed},             {"lr_input", lr_input},     {"lr_output", lr_output},
            {"weight_decay", weight_decay}, {"freeze", freeze},     {"scorer", to_string(scorer)},
            {"max_tokens", max_tokens}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.K = j.value("K", c.K);
    c.seed = j.value("seed", c.seed);
    c.lr_input = j.value("lr_input", c.lr_input);
    c.lr_output = j.value("lr_output", c.lr_output);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.freeze = j.value("freeze", c.freeze);
    c.scorer = scorer_mode_from_string(j.value("scorer", to_string(c.scorer)));
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    if (c.epochs < 0) throw ConsistencyError("epochs must be non-negative");
    if (c.batch_size == 0) throw ConsistencyError("batch_size must be at least 1");
    if (c.K == 0) throw ConsistencyError("K must be at least 1");
    return c;
}

TrainResult train_loop(ModelParams params, const TrainConfig& config, const Corpus& corpus, const SplitSpec& split,
                       const Vocabulary& vocab, const ClusterMap& map, const Shortlister& shortlister) {
    const FreezeMask mask = freeze(params, config.freeze);
    const TrainingText text(corpus, vocab, map, config.max_tokens);
    TrainResult result;
    std::vector<const Document*> docs;
    for (const auto& id : split.train_docs) {
        const Document* d = corpus.find_document(id);
        if (d == nullptr) throw ConsistencyError("split references unknown document '" + id + "'");
        if (split.supervised_labels(*d).empty()) {
            result.warnings.push_back("document \"" + id + "\" has no supervised labels; skipped");
            continue;
        }
        docs.push_back(d);
    }

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const std::uint64_t epoch_seed = derive_seed(config.seed, static_cast<std::uint64_t>(epoch));
        std::vector<const Document*> order = docs;
        Rng(derive_seed(epoch_seed, "shuffle")).shuffle(order);

        EpochLog log{epoch, 0.0, 0};
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            std::vector<BatchPlan> plans;
            for (std::size_t i = start; i < end; ++i) {
                plans.push_back(sample_negatives(*order[i], split, corpus.labels, vocab, shortlister, config.K,
                                                 derive_seed(epoch_seed, order[i]->id)));
                if (epoch == 0)
                    for (const auto& w : plans.back().warnings) result.warnings.push_back(w);
            }
            BatchResult batch;
            try {
                batch = batch_loss_and_grads(params, plans, text, config.scorer);
            } catch (const NumericError& e) {
                result.divergence = "epoch " + std::to_string(epoch) + ": " + e.what();
                result.params = std::move(params);
                return result;
            }
            ModelParams next = params;
            apply_sgd(next, batch.grads, mask, config.lr_input, config.lr_output, config.weight_decay);
            if (!all_finite(next)) {
                result.divergence = "epoch " + std::to_string(epoch) + ": parameters became non-finite";
                result.params = std::move(params);
                return result;
            }
            params = std::move(next);
            for (double l : batch.instance_losses) log.mean_loss += l;
            log.instances += batch.instance_losses.size();
        }
        if (log.instances > 0) log.mean_loss /= static_cast<double>(log.instances);
        result.log.push_back(log);
    }
    result.params = std::move(params);
    return result;
}

double speedup_ratio(std::int64_t num_classes, std::int64_t K) {
    if (num_classes <= 0 || K < 0) throw ConsistencyError("speedup_ratio needs num_classes > 0 and K >= 0");
    if (K > num_classes) throw ConsistencyError("K exceeds the number of classes");
    return static_cast<double>(num_classes - K) / static_cast<double>(num_classes);
}

}  // namespace semxc
