#pragma once

#include "rsseg/core.hpp"
#include "rsseg/prompt_bank.hpp"
#include "rsseg/tensor_file.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace rsseg {

using EmbeddingVector = Eigen::VectorXd;

/// Where a patch came from. Mock backends ignore it; file-backed adapters
/// use it to find the precomputed row.
struct PatchContext {
    std::string image_id;
    std::size_t index = 0;
    MaskId mask_id = 0;
};

/// Backend base: a capability flag plus the lock the gateway takes around
/// calls into adapters that are not safe for concurrent use.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string name() const = 0;
    virtual bool concurrent() const { return true; }

    std::unique_lock<std::mutex> guard() const {
        return concurrent() ? std::unique_lock<std::mutex>() : std::unique_lock<std::mutex>(mutex_);
    }

private:
    mutable std::mutex mutex_;
};

class EmbeddingEncoder : public Backend {
public:
    virtual Index dim() const = 0;
    virtual EmbeddingVector embed_image(const Image& patch, const PatchContext& ctx) const = 0;
    virtual EmbeddingVector embed_text(const std::string& text, std::size_t index) const = 0;
};

/// Raw per-token attention and (pre-clamp) gradient maps of an ITM head.
struct TokenSaliency {
    std::vector<std::string> tokens;
    std::vector<MapGrid> attention;
    std::vector<MapGrid> gradient;
    double itm_score = 0.0;
};

struct SaliencyContext {
    std::string image_id;
    std::string expression_id;
};

class SaliencyEncoder : public Backend {
public:
    virtual TokenSaliency compute(const Image& image, std::span<const std::string> tokens,
                                  const SaliencyContext& ctx) const = 0;
};

/// Token saliency resized to image resolution, plus the clamped per-token
/// Grad-CAM maps A * max(G, 0).
struct TokenCams {
    TokenSaliency raw;
    std::vector<MapGrid> cams;
};

std::vector<EmbeddingVector> embed_images(std::span<const Image> patches, const EmbeddingEncoder& encoder,
                                          std::span<const PatchContext> contexts = {});
std::vector<EmbeddingVector> embed_texts(std::span<const PromptEntry> prompts, const EmbeddingEncoder& encoder);
std::vector<EmbeddingVector> embed_texts(std::span<const std::string> prompts, const EmbeddingEncoder& encoder);

struct Classification {
    Eigen::MatrixXd probabilities;  ///< N x C, rows sum to one
    std::vector<Index> labels;
    double tau = 0.0;
};

/// Rows stacked as an N x d matrix of unit vectors. `what` names the rows in errors.
Eigen::MatrixXd normalized_rows(std::span<const EmbeddingVector> rows, const char* what);

/// Row-wise softmax of logits, max-subtracted.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

/// P = softmax(<L2(f_i), L2(g_j)> / tau); labels by argmax, ties to lowest j.
Classification classify(std::span<const EmbeddingVector> image_feats, std::span<const EmbeddingVector> text_feats,
                        double tau);

TokenCams token_saliency(const Image& image, std::span<const std::string> tokens, const SaliencyEncoder& encoder,
                         const SaliencyContext& ctx = {});

/// Elementwise A * max(G, 0).
template <typename DerivedA, typename DerivedG>
auto clamped_cam(const Eigen::ArrayBase<DerivedA>& attention, const Eigen::ArrayBase<DerivedG>& gradient) {
    require_same_shape(attention, gradient, "clamped_cam");
    return (attention * gradient.max(typename DerivedG::Scalar(0))).eval();
}

/// Half-pixel-centre bilinear resize with edge clamping. Identity when the
/// size already matches.
template <typename Scalar>
Grid<Scalar> resize_bilinear(const Grid<Scalar>& src, Index rows, Index cols) {
    if (src.rows() == rows && src.cols() == cols) return src;
    if (src.size() == 0) throw InvalidArgument("resize_bilinear: empty source");
    Grid<Scalar> out(rows, cols);
    const double sy = static_cast<double>(src.rows()) / static_cast<double>(rows);
    const double sx = static_cast<double>(src.cols()) / static_cast<double>(cols);
    for (Index r = 0; r < rows; ++r) {
        double fy = (static_cast<double>(r) + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(src.rows() - 1));
        const auto y0 = static_cast<Index>(std::floor(fy));
        const Index y1 = std::min(y0 + 1, src.rows() - 1);
        const double ay = fy - static_cast<double>(y0);
        for (Index c = 0; c < cols; ++c) {
            double fx = (static_cast<double>(c) + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(src.cols() - 1));
            const auto x0 = static_cast<Index>(std::floor(fx));
            const Index x1 = std::min(x0 + 1, src.cols() - 1);
            const double ax = fx - static_cast<double>(x0);
            const double top = (1.0 - ax) * src(y0, x0) + ax * src(y0, x1);
            const double bot = (1.0 - ax) * src(y1, x0) + ax * src(y1, x1);
            out(r, c) = static_cast<Scalar>((1.0 - ay) * top + ay * bot);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Deterministic mocks

/// Deterministic unit vector derived from a 64-bit key.
EmbeddingVector hashed_unit_vector(std::uint64_t key, Index dim);

/// Exact lookup tables with a hash-to-unit-vector fallback.
class MockEmbeddingEncoder : public EmbeddingEncoder {
public:
    explicit MockEmbeddingEncoder(Index dim = 64);

    std::string name() const override { return "mock"; }
    Index dim() const override { return dim_; }
    EmbeddingVector embed_image(const Image& patch, const PatchContext& ctx) const override;
    EmbeddingVector embed_text(const std::string& text, std::size_t index) const override;

    void add_image(const Image& patch, EmbeddingVector v);
    void add_text(const std::string& text, EmbeddingVector v);

private:
    void check_dim(const EmbeddingVector& v) const;

    Index dim_;
    std::unordered_map<std::uint64_t, EmbeddingVector> images_;
    std::unordered_map<std::string, EmbeddingVector> texts_;
};

/// Injected per-token (attention, gradient) tables. Tokens without an entry
/// get smooth hash-derived maps at `fallback_size`.
class MockSaliencyEncoder : public SaliencyEncoder {
public:
    explicit MockSaliencyEncoder(ImageSize fallback_size = {16, 16});

    std::string name() const override { return "mock"; }
    TokenSaliency compute(const Image& image, std::span<const std::string> tokens,
                          const SaliencyContext& ctx) const override;

    void set_token(const std::string& token, MapGrid attention, MapGrid gradient);
    void set_itm_score(double y) { itm_score_ = y; }

private:
    ImageSize fallback_size_;
    std::map<std::string, std::pair<MapGrid, MapGrid>> table_;
    double itm_score_ = 1.0;
};

// ---------------------------------------------------------------------------
// Tensor-file adapters: precomputed features and maps read from disk.
//
//   <root>/text_features.rstf   array "text_features" (C x d), optional meta.prompts;
//                               with meta.prompts rows are looked up by prompt text
//   <root>/<image_id>.rstf      arrays "patch_features" (M x d, rows by meta.mask_ids
//                               when present, else proposal order), "attn/<token>",
//                               "grad/<token>" (h x w), "itm_score" (1)

class TensorFileEncoder : public EmbeddingEncoder {
public:
    explicit TensorFileEncoder(std::filesystem::path root);

    std::string name() const override { return "tensor-file"; }
    Index dim() const override { return dim_; }
    EmbeddingVector embed_image(const Image& patch, const PatchContext& ctx) const override;
    EmbeddingVector embed_text(const std::string& text, std::size_t index) const override;

private:
    std::shared_ptr<const TensorFile> image_file(const std::string& image_id) const;

    std::filesystem::path root_;
    TensorFile text_;
    std::unordered_map<std::string, std::size_t> rows_;
    Index dim_ = 0;
    mutable std::mutex cache_mutex_;
    mutable std::map<std::string, std::shared_ptr<const TensorFile>> cache_;
};

class TensorFileSaliency : public SaliencyEncoder {
public:
    explicit TensorFileSaliency(std::filesystem::path root);

    std::string name() const override { return "tensor-file"; }
    TokenSaliency compute(const Image& image, std::span<const std::string> tokens,
                          const SaliencyContext& ctx) const override;

private:
    std::filesystem::path root_;
};

MapGrid to_grid(const TensorArray& a);
TensorArray from_grid(const MapGrid& g);
TensorArray from_rows(std::span<const EmbeddingVector> rows);

}  // namespace rsseg
