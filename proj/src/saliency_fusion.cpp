#include "rsseg/saliency_fusion.hpp"

#include <algorithm>
#include <cmath>

namespace rsseg {

std::string_view to_string(MapKind k) {
    switch (k) {
        case MapKind::Ref: return "L_ref";
        case MapKind::Cls: return "L_cls";
        case MapKind::Mod: return "L_mod";
        case MapKind::Dif: return "A_dif";
        case MapKind::Global: return "L_global";
        case MapKind::CrossScale: return "L_cs";
    }
    return "?";
}

std::string_view to_string(GradCamMode m) { return m == GradCamMode::Single ? "single" : "cross"; }

GradCamMode parse_gradcam_mode(std::string_view s) {
    if (s == "single") return GradCamMode::Single;
    if (s == "cross") return GradCamMode::Cross;
    throw InvalidArgument("unknown Grad-CAM mode '" + std::string(s) + "' (expected single|cross)");
}

PeakSet find_local_maxima(const MapGrid& map, double theta, int smooth_radius) {
    if (theta < 0.0 || theta > 1.0) throw InvalidArgument("find_local_maxima: theta outside [0, 1]");
    PeakSet out;
    out.theta = theta;
    out.smooth_radius = smooth_radius;
    if (map.size() == 0) return out;

    const MapGrid m = box_smooth(map, smooth_radius);
    const double hi = m.maxCoeff(), lo = m.minCoeff();
    // Relative tolerance, so smoothing round-off never splits a plateau.
    const double eps = 1e-9 * std::max({hi - lo, std::abs(hi), std::abs(lo)});
    const double floor_value = theta * hi - eps;

    if (hi - lo > eps) {
        for (Index r = 0; r < m.rows(); ++r) {
            for (Index c = 0; c < m.cols(); ++c) {
                const double v = m(r, c);
                if (v < floor_value) continue;
                bool ge_all = true, gt_any = false;
                for (Index dr = -1; dr <= 1 && ge_all; ++dr) {
                    for (Index dc = -1; dc <= 1; ++dc) {
                        if (dr == 0 && dc == 0) continue;
                        const Index rr = r + dr, cc = c + dc;
                        if (rr < 0 || cc < 0 || rr >= m.rows() || cc >= m.cols()) continue;
                        const double n = m(rr, cc);
                        if (v < n - eps) {
                            ge_all = false;
                            break;
                        }
                        if (v > n + eps) gt_any = true;
                    }
                }
                if (ge_all && gt_any) out.coords.push_back({r, c});
            }
        }
    }
    if (out.coords.empty()) {
        out.plateau_fallback = true;
        for (Index r = 0; r < m.rows(); ++r) {
            for (Index c = 0; c < m.cols(); ++c) {
                if (m(r, c) >= hi - eps) out.coords.push_back({r, c});
            }
        }
    }
    return out;
}

namespace {

std::size_t token_slot(const TokenSaliency& sal, const std::string& text) {
    auto it = std::find(sal.tokens.begin(), sal.tokens.end(), text);
    if (it == sal.tokens.end()) throw InvalidArgument("token '" + text + "' missing from saliency output");
    return static_cast<std::size_t>(it - sal.tokens.begin());
}

template <typename Pick>
MapGrid group_mean(const TokenCams& sal, const std::vector<TaggedToken>& group, Index h, Index w, Pick pick) {
    MapGrid acc = MapGrid::Zero(h, w);
    if (group.empty()) return acc;
    for (const auto& t : group) {
        const MapGrid& m = pick(token_slot(sal.raw, t.text));
        require_same_shape(acc, m, "group_gradcam");
        acc += m;
    }
    return acc / static_cast<double>(group.size());
}

}  // namespace

GroupedSaliency group_gradcam(const TokenCams& sal, const DecoupledExpression& expr) {
    if (sal.cams.empty()) throw InvalidArgument("group_gradcam: no token maps");
    const Index h = sal.cams.front().rows(), w = sal.cams.front().cols();
    auto cam = [&](std::size_t k) -> const MapGrid& { return sal.cams[k]; };
    auto attn = [&](std::size_t k) -> const MapGrid& { return sal.raw.attention[k]; };

    GroupedSaliency g;
    g.l_ref = group_mean(sal, expr.ref_tokens, h, w, cam);
    g.l_cls = group_mean(sal, expr.cls_tokens, h, w, cam);
    g.l_mod = group_mean(sal, expr.mod_tokens, h, w, cam);
    g.a_cls = group_mean(sal, expr.cls_tokens, h, w, attn);
    g.a_mod = group_mean(sal, expr.mod_tokens, h, w, attn);

    g.g_mod = MapGrid::Zero(h, w);
    for (const auto& t : expr.mod_tokens) g.g_mod += sal.raw.gradient[token_slot(sal.raw, t.text)].max(0.0);
    if (!expr.mod_tokens.empty()) g.g_mod /= static_cast<double>(expr.mod_tokens.size());
    return g;
}

CrossScaleMaps cross_scale_gradcam(const TokenCams& sal, const DecoupledExpression& expr, const FusionConfig& cfg) {
    CrossScaleMaps out;
    out.groups = group_gradcam(sal, expr);
    const auto& g = out.groups;
    if (cfg.mode == GradCamMode::Cross) {
        // A bare class name has no modifier contrast to draw on.
        out.a_dif = expr.mod_tokens.empty() ? MapGrid::Zero(g.a_cls.rows(), g.a_cls.cols())
                                            : activation_difference(g.a_mod, g.a_cls);
        out.l_global = enhance_global(out.a_dif, g.g_mod, g.l_mod);
        out.l_cs = fuse(out.l_global, g.l_ref, cfg.normalize);
    } else {
        out.a_dif = MapGrid::Zero(g.l_ref.rows(), g.l_ref.cols());
        out.l_global = out.a_dif;
        out.l_cs = cfg.normalize ? minmax_normalize(g.l_ref) : g.l_ref;
    }
    if (cfg.refine) out.l_cs = cfg.refine(out.l_cs);
    return out;
}

}  // namespace rsseg
