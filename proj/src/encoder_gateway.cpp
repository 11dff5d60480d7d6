#include "rsseg/encoder_gateway.hpp"

#include "rsseg/hashing.hpp"

#include <algorithm>
#include <cmath>

namespace rsseg {

std::uint64_t hash_image(const Image& image) {
    Fnv1a h;
    h.value(static_cast<std::int64_t>(image.height()));
    h.value(static_cast<std::int64_t>(image.width()));
    h.value(static_cast<std::int32_t>(image.n_channels()));
    for (const auto& ch : image.channels) h.bytes(ch.data(), sizeof(float) * static_cast<std::size_t>(ch.size()));
    return h.digest();
}

std::vector<EmbeddingVector> embed_images(std::span<const Image> patches, const EmbeddingEncoder& encoder,
                                          std::span<const PatchContext> contexts) {
    if (!contexts.empty() && contexts.size() != patches.size()) {
        throw InvalidArgument("embed_images: " + std::to_string(contexts.size()) + " contexts for " +
                              std::to_string(patches.size()) + " patches");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(patches.size());
    for (std::size_t i = 0; i < patches.size(); ++i) {
        PatchContext ctx = contexts.empty() ? PatchContext{{}, i, static_cast<MaskId>(i)} : contexts[i];
        try {
            auto lock = encoder.guard();
            out.push_back(encoder.embed_image(patches[i], ctx));
        } catch (const std::exception& e) {
            throw BackendError("encoder '" + encoder.name() + "' failed on patch " + std::to_string(i) + ": " +
                               e.what());
        }
        if (out.back().size() != encoder.dim()) {
            throw BackendError("encoder '" + encoder.name() + "' returned dimension " +
                               std::to_string(out.back().size()) + " for patch " + std::to_string(i) +
                               ", declared " + std::to_string(encoder.dim()));
        }
    }
    return out;
}

std::vector<EmbeddingVector> embed_texts(std::span<const std::string> prompts, const EmbeddingEncoder& encoder) {
    std::vector<EmbeddingVector> out;
    out.reserve(prompts.size());
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        try {
            auto lock = encoder.guard();
            out.push_back(encoder.embed_text(prompts[i], i));
        } catch (const std::exception& e) {
            throw BackendError("encoder '" + encoder.name() + "' failed on prompt " + std::to_string(i) + " ('" +
                               prompts[i] + "'): " + e.what());
        }
        if (out.back().size() != encoder.dim()) {
            throw BackendError("encoder '" + encoder.name() + "' returned dimension " +
                               std::to_string(out.back().size()) + " for prompt " + std::to_string(i));
        }
    }
    return out;
}

std::vector<EmbeddingVector> embed_texts(std::span<const PromptEntry> prompts, const EmbeddingEncoder& encoder) {
    std::vector<std::string> texts;
    texts.reserve(prompts.size());
    for (const auto& p : prompts) texts.push_back(p.text);
    return embed_texts(std::span<const std::string>(texts), encoder);
}

Eigen::MatrixXd normalized_rows(std::span<const EmbeddingVector> rows, const char* what) {
    if (rows.empty()) return {};
    const Index d = rows.front().size();
    Eigen::MatrixXd m(static_cast<Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != d) {
            throw ShapeMismatch(std::string(what) + " " + std::to_string(i) + " has dimension " +
                                std::to_string(rows[i].size()) + ", expected " + std::to_string(d));
        }
        if (!rows[i].allFinite()) {
            throw InvalidArgument(std::string(what) + " " + std::to_string(i) + " has non-finite entries");
        }
        const double n = rows[i].norm();
        if (!(n > 0.0)) {
            throw InvalidArgument(std::string(what) + " " + std::to_string(i) + " has zero norm");
        }
        m.row(static_cast<Index>(i)) = rows[i].transpose() / n;
    }
    return m;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p(logits.rows(), logits.cols());
    for (Index i = 0; i < logits.rows(); ++i) {
        const double mx = logits.row(i).maxCoeff();
        p.row(i) = (logits.row(i).array() - mx).exp().matrix();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

Classification classify(std::span<const EmbeddingVector> image_feats, std::span<const EmbeddingVector> text_feats,
                        double tau) {
    if (!(tau > 0.0)) throw InvalidArgument("classify: temperature must be positive");
    if (text_feats.empty()) throw InvalidArgument("classify: no text features");
    const Eigen::MatrixXd f = normalized_rows(image_feats, "image feature");
    const Eigen::MatrixXd g = normalized_rows(text_feats, "text feature");
    if (!image_feats.empty() && f.cols() != g.cols()) {
        throw ShapeMismatch("classify: image dimension " + std::to_string(f.cols()) + " vs text dimension " +
                            std::to_string(g.cols()));
    }

    Classification out;
    out.tau = tau;
    if (image_feats.empty()) {
        out.probabilities.resize(0, g.rows());
        return out;
    }
    out.probabilities = softmax_rows((f * g.transpose()) / tau);
    out.labels.reserve(static_cast<std::size_t>(f.rows()));
    for (Index i = 0; i < f.rows(); ++i) {
        Index best = 0;
        for (Index j = 1; j < g.rows(); ++j) {
            if (out.probabilities(i, j) > out.probabilities(i, best)) best = j;
        }
        out.labels.push_back(best);
    }
    return out;
}

TokenCams token_saliency(const Image& image, std::span<const std::string> tokens, const SaliencyEncoder& encoder,
                         const SaliencyContext& ctx) {
    if (tokens.empty()) throw InvalidArgument("token_saliency: empty token list");
    TokenSaliency sal;
    try {
        auto lock = encoder.guard();
        sal = encoder.compute(image, tokens, ctx);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw BackendError("saliency encoder '" + encoder.name() + "' failed: " + e.what());
    }
    if (sal.tokens.size() != tokens.size() || sal.attention.size() != tokens.size() ||
        sal.gradient.size() != tokens.size()) {
        throw BackendError("saliency encoder '" + encoder.name() + "' returned " +
                           std::to_string(sal.attention.size()) + " maps for " + std::to_string(tokens.size()) +
                           " tokens");
    }

    TokenCams out;
    const Index h = image.height(), w = image.width();
    for (std::size_t k = 0; k < tokens.size(); ++k) {
        require_same_shape(sal.attention[k], sal.gradient[k], "token_saliency");
        require_same_shape(sal.attention[k], sal.attention.front(), "token_saliency");
    }
    for (std::size_t k = 0; k < tokens.size(); ++k) {
        const MapGrid& a = sal.attention[k];
        const MapGrid& g = sal.gradient[k];
        if ((a < 0.0).any()) {
            throw BackendError("attention map for token '" + sal.tokens[k] + "' has negative entries");
        }
        MapGrid cam = clamped_cam(a, g);
        out.cams.push_back(resize_bilinear(cam, h, w));
        sal.attention[k] = resize_bilinear(a, h, w);
        sal.gradient[k] = resize_bilinear(g, h, w);
    }
    out.raw = std::move(sal);
    return out;
}

// ---------------------------------------------------------------------------
// Mocks

EmbeddingVector hashed_unit_vector(std::uint64_t key, Index dim) {
    SplitMix64 rng(key);
    EmbeddingVector v(dim);
    for (Index i = 0; i < dim; ++i) v(i) = rng.normal();
    const double n = v.norm();
    if (n > 0.0) v /= n;
    else v(0) = 1.0;
    return v;
}

MockEmbeddingEncoder::MockEmbeddingEncoder(Index dim) : dim_(dim) {
    if (dim <= 0) throw InvalidArgument("mock encoder dimension must be positive");
}

void MockEmbeddingEncoder::check_dim(const EmbeddingVector& v) const {
    if (v.size() != dim_) {
        throw InvalidArgument("mock encoder: vector of dimension " + std::to_string(v.size()) + ", expected " +
                              std::to_string(dim_));
    }
}

void MockEmbeddingEncoder::add_image(const Image& patch, EmbeddingVector v) {
    check_dim(v);
    images_.insert_or_assign(hash_image(patch), std::move(v));
}

void MockEmbeddingEncoder::add_text(const std::string& text, EmbeddingVector v) {
    check_dim(v);
    texts_.insert_or_assign(text, std::move(v));
}

EmbeddingVector MockEmbeddingEncoder::embed_image(const Image& patch, const PatchContext&) const {
    const std::uint64_t key = hash_image(patch);
    if (auto it = images_.find(key); it != images_.end()) return it->second;
    return hashed_unit_vector(key, dim_);
}

EmbeddingVector MockEmbeddingEncoder::embed_text(const std::string& text, std::size_t) const {
    if (auto it = texts_.find(text); it != texts_.end()) return it->second;
    return hashed_unit_vector(hash_text(text) ^ 0x7465787400000000ULL, dim_);
}

MockSaliencyEncoder::MockSaliencyEncoder(ImageSize fallback_size) : fallback_size_(fallback_size) {}

void MockSaliencyEncoder::set_token(const std::string& token, MapGrid attention, MapGrid gradient) {
    require_same_shape(attention, gradient, "MockSaliencyEncoder::set_token");
    table_.insert_or_assign(token, std::make_pair(std::move(attention), std::move(gradient)));
}

TokenSaliency MockSaliencyEncoder::compute(const Image&, std::span<const std::string> tokens,
                                           const SaliencyContext&) const {
    TokenSaliency out;
    out.itm_score = itm_score_;
    for (const auto& t : tokens) {
        out.tokens.push_back(t);
        if (auto it = table_.find(t); it != table_.end()) {
            out.attention.push_back(it->second.first);
            out.gradient.push_back(it->second.second);
            continue;
        }
        // Smooth bump at a hash-chosen centre, noisy signed gradient.
        SplitMix64 rng(hash_text(t));
        const Index h = fallback_size_.height, w = fallback_size_.width;
        const double cy = rng.uniform(0.0, static_cast<double>(h));
        const double cx = rng.uniform(0.0, static_cast<double>(w));
        const double sigma = 0.2 * static_cast<double>(std::max(h, w)) + 1.0;
        MapGrid a(h, w), g(h, w);
        for (Index r = 0; r < h; ++r) {
            for (Index c = 0; c < w; ++c) {
                const double dy = static_cast<double>(r) + 0.5 - cy, dx = static_cast<double>(c) + 0.5 - cx;
                a(r, c) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                g(r, c) = rng.uniform(-0.25, 1.0);
            }
        }
        out.attention.push_back(std::move(a));
        out.gradient.push_back(std::move(g));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tensor-file adapters

MapGrid to_grid(const TensorArray& a) {
    if (a.shape.size() != 2) throw FormatError("expected a 2-d array");
    MapGrid g(a.shape[0], a.shape[1]);
    for (Index i = 0; i < g.size(); ++i) g.data()[i] = a.data[static_cast<std::size_t>(i)];
    return g;
}

TensorArray from_grid(const MapGrid& g) {
    TensorArray a;
    a.shape = {g.rows(), g.cols()};
    a.data.resize(static_cast<std::size_t>(g.size()));
    for (Index i = 0; i < g.size(); ++i) a.data[static_cast<std::size_t>(i)] = static_cast<float>(g.data()[i]);
    return a;
}

TensorArray from_rows(std::span<const EmbeddingVector> rows) {
    TensorArray a;
    const Index d = rows.empty() ? 0 : rows.front().size();
    a.shape = {static_cast<std::int64_t>(rows.size()), d};
    for (const auto& r : rows) {
        if (r.size() != d) throw ShapeMismatch("from_rows: ragged rows");
        for (Index i = 0; i < d; ++i) a.data.push_back(static_cast<float>(r(i)));
    }
    return a;
}

namespace {

EmbeddingVector row_of(const TensorArray& a, std::size_t row, const std::string& what) {
    if (a.shape.size() != 2) throw FormatError(what + ": expected a 2-d array");
    if (static_cast<std::int64_t>(row) >= a.shape[0]) {
        throw BackendError(what + ": row " + std::to_string(row) + " out of range (" + std::to_string(a.shape[0]) +
                           " rows)");
    }
    const auto d = a.shape[1];
    EmbeddingVector v(d);
    for (std::int64_t i = 0; i < d; ++i) v(i) = a.data[static_cast<std::size_t>(static_cast<std::int64_t>(row) * d + i)];
    return v;
}

}  // namespace

TensorFileEncoder::TensorFileEncoder(std::filesystem::path root) : root_(std::move(root)) {
    text_ = TensorFile::read(root_ / "text_features.rstf");
    const auto& t = text_.get("text_features");
    if (t.shape.size() != 2) throw FormatError("text_features: expected a 2-d array");
    dim_ = t.shape[1];
    if (text_.meta.contains("prompts")) {
        const auto& prompts = text_.meta["prompts"];
        if (prompts.size() != static_cast<std::size_t>(t.shape[0])) {
            throw FormatError("text_features: " + std::to_string(prompts.size()) + " prompts for " +
                              std::to_string(t.shape[0]) + " rows");
        }
        for (std::size_t i = 0; i < prompts.size(); ++i) rows_.emplace(prompts[i].get<std::string>(), i);
    }
}

std::shared_ptr<const TensorFile> TensorFileEncoder::image_file(const std::string& image_id) const {
    std::lock_guard lock(cache_mutex_);
    if (auto it = cache_.find(image_id); it != cache_.end()) return it->second;
    auto tf = std::make_shared<const TensorFile>(TensorFile::read(root_ / (image_id + ".rstf")));
    cache_.emplace(image_id, tf);
    return tf;
}

EmbeddingVector TensorFileEncoder::embed_image(const Image&, const PatchContext& ctx) const {
    const auto tf = image_file(ctx.image_id);
    if (tf->meta.contains("mask_ids")) {
        const auto& ids = tf->meta["mask_ids"];
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i].get<MaskId>() == ctx.mask_id) return row_of(tf->get("patch_features"), i, ctx.image_id + "/patch_features");
        }
        throw BackendError(ctx.image_id + ": no patch feature for mask " + std::to_string(ctx.mask_id));
    }
    return row_of(tf->get("patch_features"), ctx.index, ctx.image_id + "/patch_features");
}

EmbeddingVector TensorFileEncoder::embed_text(const std::string& text, std::size_t index) const {
    if (!rows_.empty()) {
        const auto it = rows_.find(text);
        if (it == rows_.end()) throw BackendError("no text feature for prompt '" + text + "'");
        return row_of(text_.get("text_features"), it->second, "text_features");
    }
    return row_of(text_.get("text_features"), index, "text_features");
}

TensorFileSaliency::TensorFileSaliency(std::filesystem::path root) : root_(std::move(root)) {}

TokenSaliency TensorFileSaliency::compute(const Image&, std::span<const std::string> tokens,
                                          const SaliencyContext& ctx) const {
    std::filesystem::path path = root_ / (ctx.image_id + ".rstf");
    // Expression-specific maps take precedence over the per-image file.
    if (!ctx.expression_id.empty() && std::filesystem::exists(root_ / (ctx.expression_id + ".rstf"))) {
        path = root_ / (ctx.expression_id + ".rstf");
    }
    const TensorFile tf = TensorFile::read(path);
    TokenSaliency out;
    for (const auto& t : tokens) {
        if (!tf.contains("attn/" + t) || !tf.contains("grad/" + t)) {
            throw BackendError("no saliency maps for token '" + t + "' in " + path.string());
        }
        out.tokens.push_back(t);
        out.attention.push_back(to_grid(tf.get("attn/" + t)));
        out.gradient.push_back(to_grid(tf.get("grad/" + t)));
    }
    if (tf.contains("itm_score") && !tf.get("itm_score").data.empty()) out.itm_score = tf.get("itm_score").data[0];
    return out;
}

}  // namespace rsseg
