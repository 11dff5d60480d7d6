#pragma once

#include "rsseg/core.hpp"

#include <Eigen/Core>

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rsseg {

/// A class-agnostic binary region over the full image frame.
class MaskProposal {
public:
    /// Throws InvalidArgument when the grid has no member pixel.
    MaskProposal(MaskId id, BinaryGrid grid);

    MaskId id() const { return id_; }
    const BinaryGrid& grid() const { return grid_; }
    Index area() const { return area_; }
    ImageSize size() const { return size_of(grid_); }

private:
    MaskId id_;
    BinaryGrid grid_;
    Index area_;
};

class MaskSet {
public:
    MaskSet() = default;
    MaskSet(std::string image_id, ImageSize size);

    /// Throws ShapeMismatch on a foreign image size, InvalidArgument on a duplicate id.
    void add(MaskProposal mask);

    const std::string& image_id() const { return image_id_; }
    ImageSize image_size() const { return size_; }
    const std::vector<MaskProposal>& masks() const { return masks_; }
    std::size_t size() const { return masks_.size(); }
    bool empty() const { return masks_.empty(); }
    const MaskProposal* find(MaskId id) const;

    auto begin() const { return masks_.begin(); }
    auto end() const { return masks_.end(); }

private:
    std::string image_id_;
    ImageSize size_;
    std::vector<MaskProposal> masks_;
};

/// Pixel (r, c) occupies the unit square [c, c+1] x [r, r+1]; x runs along
/// columns and y along rows. `angle_deg` is the direction of the width axis.
struct OrientedBox {
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    double width = 0.0;
    double height = 0.0;
    double angle_deg = 0.0;

    double area() const { return width * height; }
    Eigen::Vector2d width_axis() const;
    Eigen::Vector2d height_axis() const;
    /// Corners in counter-clockwise order starting at (-w/2, -h/2) local.
    std::array<Eigen::Vector2d, 4> corners() const;
    bool contains(const Eigen::Vector2d& p, double tol = 1e-9) const;
};

/// Half-open axis-aligned pixel rectangle [row0, row0+rows) x [col0, col0+cols).
struct PixelRect {
    Index row0 = 0;
    Index col0 = 0;
    Index rows = 0;
    Index cols = 0;

    bool empty() const { return rows <= 0 || cols <= 0; }
    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

enum class CropVariant { MaskOnly, BB, BBMask, BBBuffer, MBR, MBRBuffer };

std::string_view to_string(CropVariant v);
/// Accepts the names produced by to_string (e.g. "mbr_buffer").
CropVariant parse_crop_variant(std::string_view name);
std::span<const CropVariant> all_crop_variants();

struct CropConfig {
    CropVariant variant = CropVariant::MBRBuffer;
    double ratio = 0.1;
    Index min_side = 16;
};

PixelRect bounding_rect(const BinaryGrid& grid);

/// Minimum-area enclosing rectangle of the member pixel cells. Angle is
/// canonicalised to [0, 90); area ties resolve toward the smaller angle.
OrientedBox compute_mbr(const MaskProposal& mask);
OrientedBox compute_mbr(const BinaryGrid& grid);

/// Symmetric per-dimension growth by (1 + 2 * ratio); centre and angle kept.
OrientedBox expand_box(const OrientedBox& box, double ratio);

/// Same growth rule on an axis-aligned rectangle, clipped to `bounds`.
PixelRect expand_rect(const PixelRect& rect, double ratio, ImageSize bounds);

/// Axis-aligned pixel footprint of an oriented box, intersected with the image.
PixelRect raster_footprint(const OrientedBox& box, ImageSize bounds);

Image crop_patch(const Image& image, const MaskProposal& mask, const CropConfig& cfg);

/// Resamples the oriented box upright. Output is round(height) x round(width);
/// samples falling outside the image read as zero.
Image extract_oriented(const Image& image, const OrientedBox& box);

Image pad_to_min_side(const Image& patch, Index min_side);

double mask_iou(const BinaryGrid& a, const BinaryGrid& b);
double mask_iou(const MaskProposal& a, const MaskProposal& b);

/// Pixelwise union. An empty list yields an all-false grid of `size`.
BinaryGrid merge_masks(std::span<const MaskProposal> masks, ImageSize size);
BinaryGrid merge_masks(std::span<const BinaryGrid> masks, ImageSize size);

// Run-length encoding: row-major alternating run lengths, starting with the
// 0-run (which may be zero-length).
std::vector<std::uint64_t> rle_encode(const BinaryGrid& grid);
BinaryGrid rle_decode(std::span<const std::uint64_t> runs, ImageSize size);

}  // namespace rsseg
