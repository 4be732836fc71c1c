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

#include "semxc/linalg.hpp"

namespace semxc {

class Vocabulary;

/// One toy encoder. For token rows t_0..t_{n-1}:
///   x_k = E[t_k] + mean_{0 < |j-k| <= window} E[t_j]
///   v_k = tanh(M x_k)
///   cls = tanh(P * mean_k v_k)
/// The last embedding row is reserved for out-of-vocabulary tokens.
struct EncoderParams {
    Matrix token_embeddings;  // (|V| + 1) x d
    Matrix context_mixer;     // d x d
    Matrix cls_projector;     // d x d
    int window = 1;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(context_mixer.rows()); }
    std::size_t rows() const noexcept { return static_cast<std::size_t>(token_embeddings.rows()); }
    std::int32_t oov_row() const noexcept { return static_cast<std::int32_t>(rows()) - 1; }
    /// Maps vocabulary ids (-1 for OOV) to embedding rows.
    std::vector<std::int32_t> rows_for(std::span<const std::int32_t> vocab_ids) const;
};

struct Encoding {
    Vector cls;      // d
    Matrix tokens;   // n x d
};

/// Throws ConsistencyError on an empty token list or an out-of-range row.
Encoding encode(const EncoderParams& params, std::span<const std::int32_t> rows);

/// Embedding-row gradients kept sparse: only rows that were read.
struct SparseRows {
    std::map<std::int32_t, Vector> rows;

    void add(std::int32_t row, const Vector& g);
    void add(const SparseRows& other, double scale = 1.0);
    double squared_norm() const;
};

struct EncoderGrads {
    SparseRows token_embeddings;
    Matrix context_mixer;
    Matrix cls_projector;

    static EncoderGrads zeros_like(const EncoderParams& p);
    void add(const EncoderGrads& other, double scale = 1.0);
};

/// Exact gradients of <g_cls, cls> + <g_tokens, tokens> w.r.t. the
/// encoder parameters (the forward pass is recomputed).
EncoderGrads encode_backward(const EncoderParams& params, std::span<const std::int32_t> rows,
                             const Vector& g_cls, const Matrix& g_tokens);

/// Input encoder, output encoder and, when their widths differ, a linear
/// adapter (input_dim x output_dim) applied to description encodings.
struct ModelParams {
    EncoderParams input;
    EncoderParams output;
    std::optional<Matrix> adapter;

    std::size_t score_dim() const noexcept { return input.dim(); }
    std::uint64_t hash() const;
};

struct ModelGrads {
    EncoderGrads input;
    EncoderGrads output;
    Matrix adapter;  // 0x0 when the model has no adapter

    static ModelGrads zeros_like(const ModelParams& p);
    void add(const ModelGrads& other, double scale = 1.0);
};

/// Description encoding in score space (adapter applied when present).
Encoding project_description(const ModelParams& params, const Encoding& raw);
/// Backward through project_description: accumulates the adapter gradient
/// and returns the gradient w.r.t. the raw encoding.
Encoding project_description_backward(const ModelParams& params, const Encoding& raw,
                                      const Vector& g_cls, const Matrix& g_tokens, Matrix* g_adapter);

struct ModelConfig {
    int input_dim = 64;
    int output_dim = 64;
    int window = 1;
    double embed_scale = 0.2;
    /// Relative weight of the token-specific part of an initial embedding;
    /// the rest is shared by every token with the same lemma key.
    double token_noise = 0.3;
    double matrix_noise = 0.05;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

/// Deterministic initialisation. Embedding rows start from a Gaussian seeded
/// by the token's lemma key plus a token-specific Gaussian, so inflections
/// start close (the stand-in for pretrained token embeddings). Mixer and
/// projector start at identity plus seeded noise.
ModelParams init_model(const Vocabulary& vocab, const ModelConfig& config, std::uint64_t seed);

/// Freezable parameter blocks: "{input,output}.{token_embeddings,context_mixer,
/// cls_projector}", the unqualified names (both encoders), and "adapter".
struct FreezeMask {
    std::set<std::string> frozen;
    bool is_frozen(const std::string& component) const { return frozen.count(component) != 0; }
};

FreezeMask freeze(const ModelParams& params, const std::vector<std::string>& component_ids);
std::vector<std::string> component_ids(const ModelParams& params);

/// Plain SGD with per-group learning rates and decoupled weight decay.
/// Frozen blocks are left bit-identical.
void apply_sgd(ModelParams& params, const ModelGrads& grads, const FreezeMask& mask, double lr_input,
               double lr_output, double weight_decay = 0.0);

bool all_finite(const ModelParams& params);

/// params.bin: dims, window, vocabulary hash, parameter hash, row-major
/// matrices. Loading against a different vocabulary is refused.
void save_model(const ModelParams& params, const Vocabulary& vocab, const std::filesystem::path& path,
                const nlohmann::json& extra_meta = {});
ModelParams load_model(const std::filesystem::path& path, const Vocabulary& vocab,
                       nlohmann::json* meta_out = nullptr);

}  // namespace semxc
