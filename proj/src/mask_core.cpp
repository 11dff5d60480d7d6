#include "rsseg/mask_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace rsseg {

std::string to_string(ImageSize s) {
    std::ostringstream os;
    os << s.height << "x" << s.width;
    return os.str();
}

Image::Image(Index height, Index width, int n_channels) {
    channels.assign(static_cast<std::size_t>(n_channels), Plane::Zero(height, width));
}

bool operator==(const Image& a, const Image& b) {
    if (a.channels.size() != b.channels.size()) return false;
    for (std::size_t c = 0; c < a.channels.size(); ++c) {
        const auto& pa = a.channels[c];
        const auto& pb = b.channels[c];
        if (pa.rows() != pb.rows() || pa.cols() != pb.cols()) return false;
        if (!(pa == pb).all()) return false;
    }
    return true;
}

MaskProposal::MaskProposal(MaskId id, BinaryGrid grid)
    : id_(id), grid_(std::move(grid)), area_(grid_.count()) {
    if (area_ == 0) {
        throw InvalidArgument("mask " + std::to_string(id_) + " is empty");
    }
}

MaskSet::MaskSet(std::string image_id, ImageSize size) : image_id_(std::move(image_id)), size_(size) {}

void MaskSet::add(MaskProposal mask) {
    if (mask.size() != size_) {
        throw ShapeMismatch("mask " + std::to_string(mask.id()) + " has size " + to_string(mask.size()) +
                            ", image " + image_id_ + " is " + to_string(size_));
    }
    if (find(mask.id()) != nullptr) {
        throw InvalidArgument("duplicate mask id " + std::to_string(mask.id()) + " in image " + image_id_);
    }
    masks_.push_back(std::move(mask));
}

const MaskProposal* MaskSet::find(MaskId id) const {
    auto it = std::find_if(masks_.begin(), masks_.end(), [id](const MaskProposal& m) { return m.id() == id; });
    return it == masks_.end() ? nullptr : &*it;
}

// ---------------------------------------------------------------------------
// Oriented boxes

namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

}  // namespace

Eigen::Vector2d OrientedBox::width_axis() const {
    const double a = angle_deg / kDegPerRad;
    return {std::cos(a), std::sin(a)};
}

Eigen::Vector2d OrientedBox::height_axis() const {
    const double a = angle_deg / kDegPerRad;
    return {-std::sin(a), std::cos(a)};
}

std::array<Eigen::Vector2d, 4> OrientedBox::corners() const {
    const Eigen::Vector2d u = width_axis() * (width / 2.0);
    const Eigen::Vector2d v = height_axis() * (height / 2.0);
    return {center - u - v, center + u - v, center + u + v, center - u + v};
}

bool OrientedBox::contains(const Eigen::Vector2d& p, double tol) const {
    const Eigen::Vector2d d = p - center;
    return std::abs(d.dot(width_axis())) <= width / 2.0 + tol &&
           std::abs(d.dot(height_axis())) <= height / 2.0 + tol;
}

namespace {

constexpr std::array<CropVariant, 6> kVariants = {CropVariant::MaskOnly, CropVariant::BB,
                                                  CropVariant::BBMask,   CropVariant::BBBuffer,
                                                  CropVariant::MBR,      CropVariant::MBRBuffer};

}  // namespace

std::string_view to_string(CropVariant v) {
    switch (v) {
        case CropVariant::MaskOnly: return "mask_only";
        case CropVariant::BB: return "bb";
        case CropVariant::BBMask: return "bb_mask";
        case CropVariant::BBBuffer: return "bb_buffer";
        case CropVariant::MBR: return "mbr";
        case CropVariant::MBRBuffer: return "mbr_buffer";
    }
    return "?";
}

CropVariant parse_crop_variant(std::string_view name) {
    for (CropVariant v : kVariants) {
        if (to_string(v) == name) return v;
    }
    throw InvalidArgument("unknown crop variant '" + std::string(name) + "'");
}

std::span<const CropVariant> all_crop_variants() { return kVariants; }

PixelRect bounding_rect(const BinaryGrid& grid) {
    Index r0 = grid.rows(), r1 = -1, c0 = grid.cols(), c1 = -1;
    for (Index r = 0; r < grid.rows(); ++r) {
        for (Index c = 0; c < grid.cols(); ++c) {
            if (!grid(r, c)) continue;
            r0 = std::min(r0, r);
            r1 = std::max(r1, r);
            c0 = std::min(c0, c);
            c1 = std::max(c1, c);
        }
    }
    if (r1 < 0) return {};
    return {r0, c0, r1 - r0 + 1, c1 - c0 + 1};
}

namespace {

struct IPoint {
    std::int64_t x;
    std::int64_t y;
    auto operator<=>(const IPoint&) const = default;
};

std::int64_t cross(const IPoint& o, const IPoint& a, const IPoint& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Monotone chain over the outer corners of each row's extreme cells.
std::vector<IPoint> cell_hull(const BinaryGrid& grid) {
    std::vector<IPoint> pts;
    for (Index r = 0; r < grid.rows(); ++r) {
        Index lo = -1, hi = -1;
        for (Index c = 0; c < grid.cols(); ++c) {
            if (grid(r, c)) {
                if (lo < 0) lo = c;
                hi = c;
            }
        }
        if (lo < 0) continue;
        pts.push_back({lo, r});
        pts.push_back({lo, r + 1});
        pts.push_back({hi + 1, r});
        pts.push_back({hi + 1, r + 1});
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;

    std::vector<IPoint> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

}  // namespace

OrientedBox compute_mbr(const MaskProposal& mask) { return compute_mbr(mask.grid()); }

OrientedBox compute_mbr(const BinaryGrid& grid) {
    const std::vector<IPoint> hull = cell_hull(grid);
    if (hull.size() < 3) {
        throw InvalidArgument("compute_mbr: mask is empty");
    }

    // A minimum-area enclosing rectangle has one side collinear with a hull
    // edge, so each edge direction is a candidate.
    OrientedBox best;
    double best_area = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const IPoint& a = hull[i];
        const IPoint& b = hull[(i + 1) % hull.size()];
        Eigen::Vector2d u(static_cast<double>(b.x - a.x), static_cast<double>(b.y - a.y));
        u.normalize();
        const Eigen::Vector2d v(-u.y(), u.x());

        double umin = std::numeric_limits<double>::infinity(), umax = -umin;
        double vmin = umin, vmax = -umin;
        for (const auto& p : hull) {
            const Eigen::Vector2d q(static_cast<double>(p.x), static_cast<double>(p.y));
            const double pu = q.dot(u), pv = q.dot(v);
            umin = std::min(umin, pu);
            umax = std::max(umax, pu);
            vmin = std::min(vmin, pv);
            vmax = std::max(vmax, pv);
        }

        OrientedBox box;
        box.center = u * ((umin + umax) / 2.0) + v * ((vmin + vmax) / 2.0);
        box.width = umax - umin;
        box.height = vmax - vmin;
        double angle = std::atan2(u.y(), u.x()) * kDegPerRad;
        if (angle < 0.0) angle += 180.0;
        if (angle >= 180.0 - 1e-9) angle = 0.0;
        if (angle >= 90.0 - 1e-9) {
            angle = std::max(0.0, angle - 90.0);
            std::swap(box.width, box.height);
        }
        box.angle_deg = angle;

        const double area = box.area();
        const double tol = 1e-9 * std::max(1.0, area);
        if (area < best_area - tol || (area <= best_area + tol && box.angle_deg < best.angle_deg)) {
            best = box;
            best_area = std::min(area, best_area);
        }
    }
    return best;
}

OrientedBox expand_box(const OrientedBox& box, double ratio) {
    if (ratio < 0.0) throw InvalidArgument("expand_box: negative ratio");
    OrientedBox out = box;
    out.width = box.width * (1.0 + 2.0 * ratio);
    out.height = box.height * (1.0 + 2.0 * ratio);
    return out;
}

namespace {

PixelRect clip_rect(Index r0, Index c0, Index r1, Index c1, ImageSize bounds) {
    r0 = std::clamp<Index>(r0, 0, bounds.height);
    r1 = std::clamp<Index>(r1, 0, bounds.height);
    c0 = std::clamp<Index>(c0, 0, bounds.width);
    c1 = std::clamp<Index>(c1, 0, bounds.width);
    return {r0, c0, std::max<Index>(0, r1 - r0), std::max<Index>(0, c1 - c0)};
}

Index floor_i(double v) { return static_cast<Index>(std::floor(v + 1e-9)); }
Index ceil_i(double v) { return static_cast<Index>(std::ceil(v - 1e-9)); }

}  // namespace

PixelRect expand_rect(const PixelRect& rect, double ratio, ImageSize bounds) {
    if (ratio < 0.0) throw InvalidArgument("expand_rect: negative ratio");
    const double dr = ratio * static_cast<double>(rect.rows);
    const double dc = ratio * static_cast<double>(rect.cols);
    return clip_rect(floor_i(static_cast<double>(rect.row0) - dr), floor_i(static_cast<double>(rect.col0) - dc),
                     ceil_i(static_cast<double>(rect.row0 + rect.rows) + dr),
                     ceil_i(static_cast<double>(rect.col0 + rect.cols) + dc), bounds);
}

PixelRect raster_footprint(const OrientedBox& box, ImageSize bounds) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& p : box.corners()) {
        xmin = std::min(xmin, p.x());
        xmax = std::max(xmax, p.x());
        ymin = std::min(ymin, p.y());
        ymax = std::max(ymax, p.y());
    }
    return clip_rect(floor_i(ymin), floor_i(xmin), ceil_i(ymax), ceil_i(xmax), bounds);
}

// ---------------------------------------------------------------------------
// Patches

namespace {

Image crop_rect(const Image& image, const PixelRect& rect) {
    Image out;
    out.channels.reserve(image.channels.size());
    for (const auto& ch : image.channels) {
        out.channels.emplace_back(ch.block(rect.row0, rect.col0, rect.rows, rect.cols));
    }
    return out;
}

void zero_outside(Image& patch, const BinaryGrid& mask, const PixelRect& rect) {
    const auto window = mask.block(rect.row0, rect.col0, rect.rows, rect.cols);
    for (auto& ch : patch.channels) {
        ch = window.select(ch, 0.0f);
    }
}

// Bilinear read at continuous position (x, y); pixel centres sit at +0.5.
float sample_bilinear(const Plane& p, double x, double y) {
    const double fx = x - 0.5, fy = y - 0.5;
    const double x0f = std::floor(fx), y0f = std::floor(fy);
    const double ax = fx - x0f, ay = fy - y0f;
    const auto x0 = static_cast<Index>(x0f), y0 = static_cast<Index>(y0f);
    auto at = [&](Index r, Index c) -> double {
        if (r < 0 || c < 0 || r >= p.rows() || c >= p.cols()) return 0.0;
        return p(r, c);
    };
    const double top = (1.0 - ax) * at(y0, x0) + ax * at(y0, x0 + 1);
    const double bottom = (1.0 - ax) * at(y0 + 1, x0) + ax * at(y0 + 1, x0 + 1);
    return static_cast<float>((1.0 - ay) * top + ay * bottom);
}

}  // namespace

Image extract_oriented(const Image& image, const OrientedBox& box) {
    const Index out_w = std::max<Index>(1, std::llround(box.width));
    const Index out_h = std::max<Index>(1, std::llround(box.height));
    const Eigen::Vector2d u = box.width_axis();
    const Eigen::Vector2d v = box.height_axis();
    const double sx = box.width / static_cast<double>(out_w);
    const double sy = box.height / static_cast<double>(out_h);

    Image out(out_h, out_w, image.n_channels());
    for (Index r = 0; r < out_h; ++r) {
        const double ly = (static_cast<double>(r) + 0.5) * sy - box.height / 2.0;
        for (Index c = 0; c < out_w; ++c) {
            const double lx = (static_cast<double>(c) + 0.5) * sx - box.width / 2.0;
            const Eigen::Vector2d p = box.center + lx * u + ly * v;
            for (int k = 0; k < image.n_channels(); ++k) {
                out.channels[static_cast<std::size_t>(k)](r, c) =
                    sample_bilinear(image.channels[static_cast<std::size_t>(k)], p.x(), p.y());
            }
        }
    }
    return out;
}

Image pad_to_min_side(const Image& patch, Index min_side) {
    const Index h = patch.height(), w = patch.width();
    if (h >= min_side && w >= min_side) return patch;
    const Index nh = std::max(h, min_side), nw = std::max(w, min_side);
    const Index top = (nh - h) / 2, left = (nw - w) / 2;
    Image out(nh, nw, patch.n_channels());
    for (std::size_t k = 0; k < patch.channels.size(); ++k) {
        out.channels[k].block(top, left, h, w) = patch.channels[k];
    }
    return out;
}

Image crop_patch(const Image& image, const MaskProposal& mask, const CropConfig& cfg) {
    if (mask.size() != image.size()) {
        throw ShapeMismatch("crop_patch: mask " + std::to_string(mask.id()) + " is " + to_string(mask.size()) +
                            ", image is " + to_string(image.size()));
    }
    if (cfg.ratio < 0.0) throw InvalidArgument("crop_patch: negative buffer ratio");

    const BinaryGrid& grid = mask.grid();
    Image patch;
    switch (cfg.variant) {
        case CropVariant::MaskOnly: {
            const PixelRect full{0, 0, image.height(), image.width()};
            patch = image;
            zero_outside(patch, grid, full);
            break;
        }
        case CropVariant::BB:
            patch = crop_rect(image, bounding_rect(grid));
            break;
        case CropVariant::BBMask: {
            const PixelRect rect = bounding_rect(grid);
            patch = crop_rect(image, rect);
            zero_outside(patch, grid, rect);
            break;
        }
        case CropVariant::BBBuffer:
            patch = crop_rect(image, expand_rect(bounding_rect(grid), cfg.ratio, image.size()));
            break;
        case CropVariant::MBR:
            patch = extract_oriented(image, compute_mbr(grid));
            break;
        case CropVariant::MBRBuffer:
            patch = extract_oriented(image, expand_box(compute_mbr(grid), cfg.ratio));
            break;
    }
    return pad_to_min_side(patch, cfg.min_side);
}

// ---------------------------------------------------------------------------
// Set algebra

double mask_iou(const BinaryGrid& a, const BinaryGrid& b) {
    require_same_shape(a, b, "mask_iou");
    const Index uni = (a || b).count();
    if (uni == 0) return 0.0;
    return static_cast<double>((a && b).count()) / static_cast<double>(uni);
}

double mask_iou(const MaskProposal& a, const MaskProposal& b) { return mask_iou(a.grid(), b.grid()); }

BinaryGrid merge_masks(std::span<const BinaryGrid> masks, ImageSize size) {
    BinaryGrid out = BinaryGrid::Constant(size.height, size.width, false);
    for (const auto& m : masks) {
        require_same_shape(out, m, "merge_masks");
        out = out || m;
    }
    return out;
}

BinaryGrid merge_masks(std::span<const MaskProposal> masks, ImageSize size) {
    BinaryGrid out = BinaryGrid::Constant(size.height, size.width, false);
    for (const auto& m : masks) {
        require_same_shape(out, m.grid(), "merge_masks");
        out = out || m.grid();
    }
    return out;
}

std::vector<std::uint64_t> rle_encode(const BinaryGrid& grid) {
    std::vector<std::uint64_t> runs;
    bool current = false;
    std::uint64_t count = 0;
    const bool* data = grid.data();
    const Index n = grid.size();
    for (Index i = 0; i < n; ++i) {
        if (data[i] != current) {
            runs.push_back(count);
            count = 0;
            current = data[i];
        }
        ++count;
    }
    runs.push_back(count);
    return runs;
}

BinaryGrid rle_decode(std::span<const std::uint64_t> runs, ImageSize size) {
    const auto total = static_cast<std::uint64_t>(size.height * size.width);
    std::uint64_t sum = 0;
    for (auto r : runs) {
        sum += r;
        if (sum > total) break;
    }
    if (sum != total) {
        throw FormatError("RLE covers " + std::to_string(sum) + " pixels, expected " + std::to_string(total) +
                          " for " + to_string(size));
    }
    BinaryGrid grid(size.height, size.width);
    bool* data = grid.data();
    bool value = false;
    std::uint64_t pos = 0;
    for (auto r : runs) {
        std::fill(data + pos, data + pos + r, value);
        pos += r;
        value = !value;
    }
    return grid;
}

}  // namespace rsseg
