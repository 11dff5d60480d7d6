#pragma once

#include "rsseg/core.hpp"
#include "rsseg/encoder_gateway.hpp"
#include "rsseg/evaluator.hpp"
#include "rsseg/mask_core.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace rsseg {

enum class ProposalKind { File, Synthetic, Adapter };

std::string_view to_string(ProposalKind k);
ProposalKind parse_proposal_kind(std::string_view s);

struct ProposalSource {
    ProposalKind kind = ProposalKind::File;
    /// File: a container, or a directory holding `<image_id>.json` containers.
    std::filesystem::path path;
    std::uint64_t seed = 0;
    /// Synthetic: "gridRxC" (e.g. grid2x2) or "randomN".
    std::string layout = "grid2x2";
    /// Synthetic canvas used when no image is supplied.
    ImageSize size{};
    std::string adapter;
    nlohmann::json adapter_params = nlohmann::json::object();

    static ProposalSource file(std::filesystem::path p);
    static ProposalSource synthetic(std::uint64_t seed, std::string layout, ImageSize size = {});
    static ProposalSource live(std::string adapter, nlohmann::json params = nlohmann::json::object());

    /// Throws ConfigError when the path is missing, the layout does not parse
    /// or the adapter is not registered.
    void validate() const;
};

struct Rejection {
    std::string source;
    std::string image_id;
    std::string mask;
    std::string reason;
};

/// Append-only, safe to share between loader threads.
class RejectionLog {
public:
    void append(Rejection r);
    std::vector<Rejection> entries() const;
    std::size_t size() const;
    nlohmann::json to_json() const;

private:
    mutable std::mutex mutex_;
    std::vector<Rejection> entries_;
};

/// Live proposal backend. Same capability flags as the encoders.
class ProposalAdapter : public Backend {
public:
    virtual MaskSet propose(const Image& image, const std::string& image_id) const = 0;
};

using ProposalAdapterFactory = std::function<std::unique_ptr<ProposalAdapter>(const nlohmann::json& params)>;

void register_proposal_adapter(const std::string& name, ProposalAdapterFactory factory);
std::vector<std::string> proposal_adapters();
std::unique_ptr<ProposalAdapter> make_proposal_adapter(const std::string& name, const nlohmann::json& params);

/// Loads one image's proposals. Empty and out-of-bounds masks are dropped and
/// logged; a bad RLE length, duplicate ids or an unreadable file throw
/// FormatError. Synthetic sources take the canvas from `image` when given.
MaskSet load_proposals(const ProposalSource& source, const std::string& image_id, RejectionLog* log = nullptr,
                       const Image* image = nullptr);

// Container: {image_id, height, width, masks: [{id, rle}]}. A mask may give
// {id, pgm: "<path>"} instead of an RLE; relative paths resolve against the
// container's directory. A file may also hold {images: [container, ...]}.
nlohmann::json proposals_to_json(const MaskSet& set);
MaskSet proposals_from_json(const nlohmann::json& j, RejectionLog* log = nullptr, const std::string& source = {},
                            const std::filesystem::path& base_dir = {});
void write_proposals(const std::filesystem::path& path, const MaskSet& set);
MaskSet read_proposals(const std::filesystem::path& path, RejectionLog* log = nullptr);
/// One `<image_id>_<mask_id>.pgm` per mask; returns the written paths.
std::vector<std::filesystem::path> export_mask_pgms(const std::filesystem::path& dir, const MaskSet& set);

MaskSet synthetic_proposals(const std::string& image_id, ImageSize size, std::string_view layout, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic scenes

enum class ShapeKind { Rect, Ellipse, Diamond };

struct SceneShape {
    ShapeKind kind = ShapeKind::Rect;
    std::string category;
    Index row = 0;
    Index col = 0;
    Index height = 0;
    Index width = 0;
    std::array<float, 3> color{255.0f, 255.0f, 255.0f};
};

struct SceneExpression {
    std::string id;
    std::string text;
    std::size_t target = 0;  ///< index into shapes
};

struct SceneSpec {
    std::string image_id = "scene";
    ImageSize size{64, 64};
    std::uint64_t seed = 0;
    std::array<float, 3> background{40.0f, 40.0f, 40.0f};
    int noise = 0;  ///< per-sample uniform integer jitter in [-noise, noise]
    std::vector<SceneShape> shapes;
    std::vector<SceneShape> distractors;  ///< proposal-only regions, never painted
    std::vector<SceneExpression> expressions;
    bool allow_overlap = false;
};

struct SyntheticScene {
    Image image;
    MaskSet proposals;
    std::vector<GtInstance> gt;
    std::vector<MaskId> shape_ids;       ///< proposal id of each shape
    std::vector<MaskId> distractor_ids;  ///< proposal id of each distractor
};

BinaryGrid rasterize(const SceneShape& shape, ImageSize size);

/// Shapes are painted in order. Throws InvalidArgument when a shape leaves the
/// canvas or rasterises empty, and when GT shapes overlap without allow_overlap.
SyntheticScene synth_scene(const SceneSpec& spec);

SceneSpec scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const SceneSpec& spec);

}  // namespace rsseg
