#pragma once

#include "rsseg/core.hpp"
#include "rsseg/encoder_gateway.hpp"
#include "rsseg/text_decoupler.hpp"

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <string_view>
#include <vector>

namespace rsseg {

enum class MapKind { Ref, Cls, Mod, Dif, Global, CrossScale };

std::string_view to_string(MapKind k);

template <typename Scalar = double>
struct SaliencyMap {
    Grid<Scalar> grid;
    MapKind kind = MapKind::CrossScale;
    bool normalized = false;
};

struct Peak {
    Index row = 0;
    Index col = 0;

    friend bool operator==(const Peak&, const Peak&) = default;
    friend auto operator<=>(const Peak&, const Peak&) = default;
};

struct PeakSet {
    std::vector<Peak> coords;  ///< row-major order
    double theta = 0.5;
    int smooth_radius = 1;
    bool plateau_fallback = false;
};

/// Per-group maps for one expression. Empty groups yield zero maps.
struct GroupedSaliency {
    MapGrid l_ref, l_cls, l_mod;
    MapGrid a_cls, a_mod;
    MapGrid g_mod;  ///< group mean of clamped modifier gradients
};

/// (A_mod - A_cls) / ||A_mod - A_cls||_2 over all entries; the zero map when
/// the difference norm is below 1e-12.
template <typename DerivedM, typename DerivedC>
Grid<typename DerivedM::Scalar> activation_difference(const Eigen::ArrayBase<DerivedM>& a_mod,
                                                      const Eigen::ArrayBase<DerivedC>& a_cls) {
    using Scalar = typename DerivedM::Scalar;
    require_same_shape(a_mod, a_cls, "activation_difference");
    Grid<Scalar> diff = a_mod - a_cls;
    const Scalar norm = std::sqrt(diff.square().sum());
    if (!(norm >= Scalar(1e-12))) return Grid<Scalar>::Zero(diff.rows(), diff.cols());
    return diff / norm;
}

/// Elementwise A_dif * G_mod * L_mod.
template <typename DerivedD, typename DerivedG, typename DerivedL>
Grid<typename DerivedD::Scalar> enhance_global(const Eigen::ArrayBase<DerivedD>& a_dif,
                                               const Eigen::ArrayBase<DerivedG>& g_mod,
                                               const Eigen::ArrayBase<DerivedL>& l_mod) {
    require_same_shape(a_dif, g_mod, "enhance_global");
    require_same_shape(a_dif, l_mod, "enhance_global");
    return a_dif * g_mod * l_mod;
}

/// Min-max to [0, 1]; a constant map becomes all zeros.
template <typename Derived>
Grid<typename Derived::Scalar> minmax_normalize(const Eigen::ArrayBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    if (m.size() == 0) return Grid<Scalar>(m.rows(), m.cols());
    const Scalar lo = m.minCoeff(), hi = m.maxCoeff();
    if (!(hi > lo)) return Grid<Scalar>::Zero(m.rows(), m.cols());
    return ((m - lo) / (hi - lo)).min(Scalar(1)).max(Scalar(0));
}

/// Mean of the two operands, each min-max normalised first unless `normalize` is false.
template <typename DerivedA, typename DerivedB>
Grid<typename DerivedA::Scalar> fuse(const Eigen::ArrayBase<DerivedA>& l_global, const Eigen::ArrayBase<DerivedB>& l_ref,
                                     bool normalize = true) {
    using Scalar = typename DerivedA::Scalar;
    require_same_shape(l_global, l_ref, "fuse");
    if (!normalize) return (l_global + l_ref) / Scalar(2);
    return (minmax_normalize(l_global) + minmax_normalize(l_ref)) / Scalar(2);
}

/// Mean over the (2r+1)^2 window clipped to the grid.
template <typename Scalar>
Grid<Scalar> box_smooth(const Grid<Scalar>& m, int radius) {
    if (radius <= 0) return m;
    // Summed-area table keeps this linear in the grid size.
    Grid<Scalar> sat = Grid<Scalar>::Zero(m.rows() + 1, m.cols() + 1);
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            sat(r + 1, c + 1) = m(r, c) + sat(r, c + 1) + sat(r + 1, c) - sat(r, c);
        }
    }
    Grid<Scalar> out(m.rows(), m.cols());
    for (Index r = 0; r < m.rows(); ++r) {
        const Index r0 = std::max<Index>(0, r - radius), r1 = std::min<Index>(m.rows(), r + radius + 1);
        for (Index c = 0; c < m.cols(); ++c) {
            const Index c0 = std::max<Index>(0, c - radius), c1 = std::min<Index>(m.cols(), c + radius + 1);
            const Scalar s = sat(r1, c1) - sat(r0, c1) - sat(r1, c0) + sat(r0, c0);
            out(r, c) = s / static_cast<Scalar>((r1 - r0) * (c1 - c0));
        }
    }
    return out;
}

/// Local maxima of the (optionally box-smoothed) map: cells >= all 8
/// neighbours, > at least one, and >= theta * global max. A map with no such
/// cell (constant, or 1x1) falls back to every global-argmax cell.
/// Comparisons carry a tolerance of 1e-9 of the value range so that positive
/// rescaling of the map does not change the result through rounding.
PeakSet find_local_maxima(const MapGrid& map, double theta = 0.5, int smooth_radius = 1);

/// Per-token clamped maps averaged within the ref/cls/mod groups, plus the
/// grouped attention and clamped-gradient maps. Tokens are matched by text;
/// a token absent from the saliency output is an error naming it.
GroupedSaliency group_gradcam(const TokenCams& sal, const DecoupledExpression& expr);

using RefineHook = std::function<MapGrid(const MapGrid&)>;

enum class GradCamMode { Single, Cross };

std::string_view to_string(GradCamMode m);
GradCamMode parse_gradcam_mode(std::string_view s);

struct FusionConfig {
    GradCamMode mode = GradCamMode::Cross;
    bool normalize = true;
    double theta = 0.5;
    int smooth_radius = 1;
    /// Post-fusion transform; identity when empty.
    RefineHook refine;
};

struct CrossScaleMaps {
    GroupedSaliency groups;
    MapGrid a_dif;
    MapGrid l_global;
    MapGrid l_cs;
};

/// Cross mode: L_cs = fuse(A_dif * G_mod * L_mod, L_ref). Single mode:
/// L_cs = normalize(L_ref). The refine hook runs last.
CrossScaleMaps cross_scale_gradcam(const TokenCams& sal, const DecoupledExpression& expr, const FusionConfig& cfg);

}  // namespace rsseg
