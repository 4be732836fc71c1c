#include "semxc/encoder.hpp"

#include <cmath>
#include <fstream>

#include "semxc/cluster.hpp"
#include "semxc/error.hpp"
#include "semxc/io.hpp"
#include "semxc/rng.hpp"
#include "semxc/sparse.hpp"

namespace semxc {

std::vector<std::int32_t> EncoderParams::rows_for(std::span<const std::int32_t> vocab_ids) const {
    std::vector<std::int32_t> out;
    out.reserve(vocab_ids.size());
    const std::int32_t oov = oov_row();
    for (std::int32_t id : vocab_ids) out.push_back(id >= 0 && id < oov ? id : oov);
    return out;
}

namespace {

void check_rows(const EncoderParams& p, std::span<const std::int32_t> rows) {
    if (rows.empty()) throw ConsistencyError("encode: empty token list");
    for (std::int32_t r : rows)
        if (r < 0 || static_cast<std::size_t>(r) >= p.rows())
            throw ConsistencyError("encode: token row " + std::to_string(r) + " outside embedding table");
}

/// x_k = E[t_k] + mean of window neighbours.
Matrix mixed_inputs(const EncoderParams& p, std::span<const std::int32_t> rows) {
    const auto n = static_cast<std::ptrdiff_t>(rows.size());
    const auto w = static_cast<std::ptrdiff_t>(p.window);
    Matrix x(n, static_cast<Eigen::Index>(p.dim()));
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        x.row(k) = p.token_embeddings.row(rows[k]);
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, k - w);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, k + w);
        const std::ptrdiff_t count = hi - lo;  // neighbours exclude k itself
        if (count > 0) {
            Eigen::RowVectorXd ctx = Eigen::RowVectorXd::Zero(x.cols());
            for (std::ptrdiff_t j = lo; j <= hi; ++j)
                if (j != k) ctx += p.token_embeddings.row(rows[j]);
            x.row(k) += ctx / static_cast<double>(count);
        }
    }
    return x;
}

}  // namespace

Encoding encode(const EncoderParams& params, std::span<const std::int32_t> rows) {
    check_rows(params, rows);
    const Matrix x = mixed_inputs(params, rows);
    Encoding e;
    e.tokens = (x * params.context_mixer.transpose()).array().tanh().matrix();
    const Vector pooled = e.tokens.colwise().mean().transpose();
    e.cls = (params.cls_projector * pooled).array().tanh().matrix();
    return e;
}

void SparseRows::add(std::int32_t row, const Vector& g) {
    auto [it, inserted] = rows.try_emplace(row, g);
    if (!inserted) it->second += g;
}

void SparseRows::add(const SparseRows& other, double scale) {
    for (const auto& [r, g] : other.rows) {
        auto [it, inserted] = rows.try_emplace(r, g * scale);
        if (!inserted) it->second += g * scale;
    }
}

double SparseRows::squared_norm() const {
    double s = 0.0;
    for (const auto& [r, g] : rows) s += g.squaredNorm();
    return s;
}

EncoderGrads EncoderGrads::zeros_like(const EncoderParams& p) {
    EncoderGrads g;
    g.context_mixer = Matrix::Zero(p.context_mixer.rows(), p.context_mixer.cols());
    g.cls_projector = Matrix::Zero(p.cls_projector.rows(), p.cls_projector.cols());
    return g;
}

void EncoderGrads::add(const EncoderGrads& other, double scale) {
    token_embeddings.add(other.token_embeddings, scale);
    context_mixer += scale * other.context_mixer;
    cls_projector += scale * other.cls_projector;
}

EncoderGrads encode_backward(const EncoderParams& params, std::span<const std::int32_t> rows, const Vector& g_cls,
                             const Matrix& g_tokens) {
    check_rows(params, rows);
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto d = static_cast<Eigen::Index>(params.dim());
    if (g_cls.size() != d || g_tokens.rows() != n || g_tokens.cols() != d)
        throw ConsistencyError("encode_backward: upstream gradient shape mismatch");

    const Matrix x = mixed_inputs(params, rows);
    const Matrix v = (x * params.context_mixer.transpose()).array().tanh().matrix();
    const Vector pooled = v.colwise().mean().transpose();
    const Vector cls = (params.cls_projector * pooled).array().tanh().matrix();

    EncoderGrads g = EncoderGrads::zeros_like(params);
    const Vector g_z = g_cls.array() * (1.0 - cls.array().square());
    g.cls_projector = g_z * pooled.transpose();
    const Vector g_pooled = params.cls_projector.transpose() * g_z;

    Matrix g_v = g_tokens;
    g_v.rowwise() += (g_pooled / static_cast<double>(n)).transpose();
    const Matrix g_h = (g_v.array() * (1.0 - v.array().square())).matrix();
    g.context_mixer = g_h.transpose() * x;
    const Matrix g_x = g_h * params.context_mixer;

    const auto w = static_cast<Eigen::Index>(params.window);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Vector gk = g_x.row(k).transpose();
        g.token_embeddings.add(rows[static_cast<std::size_t>(k)], gk);
        const Eigen::Index lo = std::max<Eigen::Index>(0, k - w);
        const Eigen::Index hi = std::min<Eigen::Index>(n - 1, k + w);
        const Eigen::Index count = hi - lo;
        if (count > 0) {
            const Vector share = gk / static_cast<double>(count);
            for (Eigen::Index j = lo; j <= hi; ++j)
                if (j != k) g.token_embeddings.add(rows[static_cast<std::size_t>(j)], share);
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

namespace {

void hash_matrix(Fnv1a& h, const Matrix& m) {
    h.u64(static_cast<std::uint64_t>(m.rows())).u64(static_cast<std::uint64_t>(m.cols()));
    h.bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
}

void hash_encoder(Fnv1a& h, const EncoderParams& p) {
    h.u64(static_cast<std::uint64_t>(p.window));
    hash_matrix(h, p.token_embeddings);
    hash_matrix(h, p.context_mixer);
    hash_matrix(h, p.cls_projector);
}

}  // namespace

std::uint64_t ModelParams::hash() const {
    Fnv1a h;
    h.str("semxc-model");
    hash_encoder(h, input);
    hash_encoder(h, output);
    h.u64(adapter ? 1 : 0);
    if (adapter) hash_matrix(h, *adapter);
    return h.digest();
}

ModelGrads ModelGrads::zeros_like(const ModelParams& p) {
    ModelGrads g;
    g.input = EncoderGrads::zeros_like(p.input);
    g.output = EncoderGrads::zeros_like(p.output);
    if (p.adapter) g.adapter = Matrix::Zero(p.adapter->rows(), p.adapter->cols());
    return g;
}

void ModelGrads::add(const ModelGrads& other, double scale) {
    input.add(other.input, scale);
    output.add(other.output, scale);
    if (adapter.size() > 0) adapter += scale * other.adapter;
}

Encoding project_description(const ModelParams& params, const Encoding& raw) {
    if (!params.adapter) return raw;
    const Matrix& a = *params.adapter;
    return Encoding{a * raw.cls, raw.tokens * a.transpose()};
}

Encoding project_description_backward(const ModelParams& params, const Encoding& raw, const Vector& g_cls,
                                      const Matrix& g_tokens, Matrix* g_adapter) {
    if (!params.adapter) return Encoding{g_cls, g_tokens};
    const Matrix& a = *params.adapter;
    if (g_adapter != nullptr) {
        *g_adapter += g_cls * raw.cls.transpose();
        *g_adapter += g_tokens.transpose() * raw.tokens;
    }
    return Encoding{a.transpose() * g_cls, g_tokens * a};
}

nlohmann::json ModelConfig::to_json() const {
    return {{"input_dim", input_dim},     {"output_dim", output_dim},     {"window", window},
            {"embed_scale", embed_scale}, {"token_noise", token_noise}, {"matrix_noise", matrix_noise}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.input_dim = j.value("input_dim", c.input_dim);
    c.output_dim = j.value("output_dim", c.output_dim);
    c.window = j.value("window", c.window);
    c.embed_scale = j.value("embed_scale", c.embed_scale);
    c.token_noise = j.value("token_noise", c.token_noise);
    c.matrix_noise = j.value("matrix_noise", c.matrix_noise);
    return c;
}

namespace {

Vector gaussian(std::uint64_t seed, Eigen::Index d) {
    Rng rng(seed);
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = rng.normal();
    return v;
}

EncoderParams init_encoder(const Vocabulary& vocab, int dim, int window, const ModelConfig& c, std::uint64_t seed,
                           std::string_view side) {
    if (dim < 2) throw ConsistencyError("encoder dimension must be at least 2");
    if (window < 0) throw ConsistencyError("context window must be non-negative");
    const Lemmatizer lemma;
    EncoderParams p;
    p.window = window;
    const auto d = static_cast<Eigen::Index>(dim);
    p.token_embeddings.resize(static_cast<Eigen::Index>(vocab.size() + 1), d);
    const double mix = 1.0 / std::sqrt(1.0 + c.token_noise * c.token_noise);
    for (std::size_t i = 0; i <= vocab.size(); ++i) {
        const bool oov = i == vocab.size();
        const std::string key = oov ? std::string("<oov>") : lemma(vocab.token(i));
        const Vector shared = gaussian(derive_seed(derive_seed(seed, "lemma"), key + "#" + std::to_string(dim)), d);
        const Vector own = gaussian(derive_seed(derive_seed(seed, side), oov ? std::string("<oov>") : vocab.token(i)), d);
        p.token_embeddings.row(static_cast<Eigen::Index>(i)) =
            (c.embed_scale * mix * (shared + c.token_noise * own)).transpose();
    }
    Rng rng(derive_seed(seed, std::string(side) + ".matrices"));
    const double sd = c.matrix_noise / std::sqrt(static_cast<double>(dim));
    p.context_mixer = Matrix::Identity(d, d);
    p.cls_projector = Matrix::Identity(d, d);
    for (Eigen::Index i = 0; i < d * d; ++i) p.context_mixer.data()[i] += sd * rng.normal();
    for (Eigen::Index i = 0; i < d * d; ++i) p.cls_projector.data()[i] += sd * rng.normal();
    return p;
}

}  // namespace

ModelParams init_model(const Vocabulary& vocab, const ModelConfig& config, std::uint64_t seed) {
    ModelParams m;
    m.input = init_encoder(vocab, config.input_dim, config.window, config, seed, "input");
    m.output = init_encoder(vocab, config.output_dim, config.window, config, seed, "output");
    if (config.input_dim != config.output_dim) {
        Rng rng(derive_seed(seed, "adapter"));
        Matrix a(config.input_dim, config.output_dim);
        const double sd = 1.0 / std::sqrt(static_cast<double>(config.output_dim));
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = sd * rng.normal();
        // Shared leading coordinates start as an identity block.
        const auto common = std::min(config.input_dim, config.output_dim);
        for (int i = 0; i < common; ++i) a(i, i) += 1.0;
        m.adapter = std::move(a);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Freezing and updates
// ---------------------------------------------------------------------------

std::vector<std::string> component_ids(const ModelParams& params) {
    std::vector<std::string> ids;
    for (const char* side : {"input", "output"})
        for (const char* block : {"token_embeddings", "context_mixer", "cls_projector"})
            ids.push_back(std::string(side) + "." + block);
    if (params.adapter) ids.emplace_back("adapter");
    return ids;
}

FreezeMask freeze(const ModelParams& params, const std::vector<std::string>& ids) {
    const std::vector<std::string> known = component_ids(params);
    FreezeMask mask;
    for (const auto& id : ids) {
        if (std::find(known.begin(), known.end(), id) != known.end()) {
            mask.frozen.insert(id);
        } else if (id == "token_embeddings" || id == "context_mixer" || id == "cls_projector") {
            mask.frozen.insert("input." + id);
            mask.frozen.insert("output." + id);
        } else {
            throw ConsistencyError("unknown freezable component '" + id + "'");
        }
    }
    return mask;
}

namespace {

void sgd_encoder(EncoderParams& p, const EncoderGrads& g, const FreezeMask& mask, const std::string& side, double lr,
                 double wd) {
    if (!mask.is_frozen(side + ".token_embeddings")) {
        if (wd > 0.0) p.token_embeddings *= (1.0 - lr * wd);
        for (const auto& [r, gr] : g.token_embeddings.rows) p.token_embeddings.row(r) -= lr * gr.transpose();
    }
    if (!mask.is_frozen(side + ".context_mixer")) {
        if (wd > 0.0) p.context_mixer *= (1.0 - lr * wd);
        p.context_mixer -= lr * g.context_mixer;
    }
    if (!mask.is_frozen(side + ".cls_projector")) {
        if (wd > 0.0) p.cls_projector *= (1.0 - lr * wd);
        p.cls_projector -= lr * g.cls_projector;
    }
}

}  // namespace

void apply_sgd(ModelParams& params, const ModelGrads& grads, const FreezeMask& mask, double lr_input, double lr_output,
               double weight_decay) {
    sgd_encoder(params.input, grads.input, mask, "input", lr_input, weight_decay);
    sgd_encoder(params.output, grads.output, mask, "output", lr_output, weight_decay);
    if (params.adapter && !mask.is_frozen("adapter") && grads.adapter.size() > 0) {
        if (weight_decay > 0.0) *params.adapter *= (1.0 - lr_output * weight_decay);
        *params.adapter -= lr_output * grads.adapter;
    }
}

bool all_finite(const ModelParams& p) {
    auto ok = [](const Matrix& m) { return m.allFinite(); };
    return ok(p.input.token_embeddings) && ok(p.input.context_mixer) && ok(p.input.cls_projector) &&
           ok(p.output.token_embeddings) && ok(p.output.context_mixer) && ok(p.output.cls_projector) &&
           (!p.adapter || ok(*p.adapter));
}

// ---------------------------------------------------------------------------
// params.bin
// ---------------------------------------------------------------------------

namespace {

void write_matrix(std::ostream& out, const Matrix& m) {
    io::write_u32(out, static_cast<std::uint32_t>(m.rows()));
    io::write_u32(out, static_cast<std::uint32_t>(m.cols()));
    io::write_f64s(out, m.data(), static_cast<std::size_t>(m.size()));
}

Matrix read_matrix(std::istream& in) {
    const std::uint32_t r = io::read_u32(in);
    const std::uint32_t c = io::read_u32(in);
    if (static_cast<std::uint64_t>(r) * c > (1ULL << 32)) throw InputError("matrix too large in params file");
    Matrix m(r, c);
    io::read_f64s(in, m.data(), static_cast<std::size_t>(m.size()));
    return m;
}

void write_encoder(std::ostream& out, const EncoderParams& p) {
    io::write_u32(out, static_cast<std::uint32_t>(p.window));
    write_matrix(out, p.token_embeddings);
    write_matrix(out, p.context_mixer);
    write_matrix(out, p.cls_projector);
}

EncoderParams read_encoder(std::istream& in) {
    EncoderParams p;
    p.window = static_cast<int>(io::read_u32(in));
    p.token_embeddings = read_matrix(in);
    p.context_mixer = read_matrix(in);
    p.cls_projector = read_matrix(in);
    const auto d = p.context_mixer.rows();
    if (p.context_mixer.cols() != d || p.cls_projector.rows() != d || p.cls_projector.cols() != d ||
        p.token_embeddings.cols() != d)
        throw InputError("inconsistent encoder dimensions in params file");
    return p;
}

}  // namespace

void save_model(const ModelParams& params, const Vocabulary& vocab, const std::filesystem::path& path,
                const nlohmann::json& extra_meta) {
    if (params.input.rows() != vocab.size() + 1 || params.output.rows() != vocab.size() + 1)
        throw ConsistencyError("model embedding table does not match the vocabulary");
    io::ArtifactHeader h{"SXCPARAM", 1, extra_meta.is_object() ? extra_meta : nlohmann::json::object()};
    h.meta["vocab_hash"] = io::hex64(vocab.hash());
    h.meta["params_hash"] = io::hex64(params.hash());
    h.meta["input_dim"] = params.input.dim();
    h.meta["output_dim"] = params.output.dim();
    h.meta["window"] = params.input.window;
    h.meta["has_adapter"] = params.adapter.has_value();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    io::write_header(out, h);
    write_encoder(out, params.input);
    write_encoder(out, params.output);
    io::write_u32(out, params.adapter ? 1 : 0);
    if (params.adapter) write_matrix(out, *params.adapter);
    if (!out) throw InputError("short write to " + path.string());
}

ModelParams load_model(const std::filesystem::path& path, const Vocabulary& vocab, nlohmann::json* meta_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    const io::ArtifactHeader h = io::read_header(in, "SXCPARAM", 1);
    if (h.meta.value("vocab_hash", std::string()) != io::hex64(vocab.hash()))
        throw ConsistencyError(path.string() + ": parameters were trained against a different vocabulary");
    ModelParams m;
    m.input = read_encoder(in);
    m.output = read_encoder(in);
    if (io::read_u32(in) != 0) m.adapter = read_matrix(in);
    if (h.meta.value("params_hash", std::string()) != io::hex64(m.hash()))
        throw ConsistencyError(path.string() + ": parameter hash mismatch (corrupt file)");
    if (meta_out != nullptr) *meta_out = h.meta;
    return m;
}

}  // namespace semxc
