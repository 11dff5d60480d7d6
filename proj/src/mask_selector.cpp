#include "rsseg/mask_selector.hpp"

#include <algorithm>

namespace rsseg {

std::vector<const MaskProposal*> activated_masks(const MaskSet& masks, const PeakSet& peaks) {
    const ImageSize size = masks.image_size();
    for (const auto& p : peaks.coords) {
        if (p.row < 0 || p.col < 0 || p.row >= size.height || p.col >= size.width) {
            throw InvalidArgument("peak (" + std::to_string(p.row) + ", " + std::to_string(p.col) +
                                  ") outside image " + to_string(size));
        }
    }
    std::vector<const MaskProposal*> out;
    for (const auto& m : masks) {
        const bool hit = std::any_of(peaks.coords.begin(), peaks.coords.end(),
                                     [&](const Peak& p) { return m.grid()(p.row, p.col); });
        if (hit) out.push_back(&m);
    }
    return out;
}

std::vector<ScoredMask> score_masks(std::span<const MaskProposal* const> masks, const MapGrid& l_cs) {
    std::vector<ScoredMask> out;
    out.reserve(masks.size());
    for (const MaskProposal* m : masks) {
        require_same_shape(m->grid(), l_cs, "score_masks");
        const MapGrid member = m->grid().cast<double>();
        const double raw = (member + member * l_cs).sum();
        out.push_back({m->id(), raw, raw / static_cast<double>(m->area())});
    }
    return out;
}

std::vector<ScoredMask> score_masks(const MaskSet& masks, const MapGrid& l_cs) {
    std::vector<const MaskProposal*> ptrs;
    for (const auto& m : masks) ptrs.push_back(&m);
    return score_masks(ptrs, l_cs);
}

std::optional<MaskId> select_global(std::span<const ScoredMask> scored) {
    if (scored.empty()) return std::nullopt;
    const ScoredMask* best = &scored.front();
    for (const auto& s : scored.subspan(1)) {
        if (s.normalized_score > best->normalized_score ||
            (s.normalized_score == best->normalized_score && s.mask_id < best->mask_id)) {
            best = &s;
        }
    }
    return best->mask_id;
}

FallbackPolicy FallbackPolicy::parse(std::string_view s) {
    FallbackPolicy p;
    p.steps.clear();
    if (s == "none" || s.empty()) return p;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const std::string_view item = s.substr(start, comma == std::string_view::npos ? s.npos : comma - start);
        if (item == "a") p.steps.push_back(FallbackStep::ClassMatchActivated);
        else if (item == "b") p.steps.push_back(FallbackStep::GlobalAnyLabel);
        else throw InvalidArgument("unknown fallback step '" + std::string(item) + "' (expected a, b or none)");
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return p;
}

std::string FallbackPolicy::to_string() const {
    if (steps.empty()) return "none";
    std::string out;
    for (auto s : steps) {
        if (!out.empty()) out += ",";
        out += s == FallbackStep::ClassMatchActivated ? "a" : "b";
    }
    return out;
}

Selection intersect_candidates(std::optional<MaskId> global_id, const SegmentationResult& ovss,
                               std::span<const ClassId> target_classes, std::span<const ScoredMask> act_scored,
                               const FallbackPolicy& policy, const ClassTextBank& bank) {
    for (ClassId c : target_classes) {
        if (bank.find(c) == nullptr) throw InvalidArgument("unknown target class id " + std::to_string(c));
    }
    auto is_target = [&](ClassId c) {
        return std::find(target_classes.begin(), target_classes.end(), c) != target_classes.end();
    };
    auto score_of = [&](MaskId id) {
        for (const auto& s : act_scored) {
            if (s.mask_id == id) return s.normalized_score;
        }
        return 0.0;
    };

    Selection sel;
    if (!global_id) {
        sel.path = "empty";
        return sel;
    }
    const ClassId global_label = ovss.label_of(*global_id);
    if (is_target(global_label)) {
        return {global_id, score_of(*global_id), global_label, "consistent"};
    }
    for (FallbackStep step : policy.steps) {
        if (step == FallbackStep::ClassMatchActivated) {
            const ScoredMask* best = nullptr;
            for (const auto& s : act_scored) {
                if (!is_target(ovss.label_of(s.mask_id))) continue;
                if (!best || s.normalized_score > best->normalized_score ||
                    (s.normalized_score == best->normalized_score && s.mask_id < best->mask_id)) {
                    best = &s;
                }
            }
            if (best) return {best->mask_id, best->normalized_score, ovss.label_of(best->mask_id), "fallback_a"};
        } else {
            return {global_id, score_of(*global_id), global_label, "fallback_b"};
        }
    }
    sel.path = "empty";
    return sel;
}

ReferredSelection select_referred(const MaskSet& masks, const MapGrid& l_cs, const PeakSet& peaks,
                                  const SegmentationResult& ovss, std::span<const ClassId> target_classes,
                                  const FallbackPolicy& policy, const ClassTextBank& bank) {
    ReferredSelection out;
    const std::vector<const MaskProposal*> act = activated_masks(masks, peaks);
    for (const auto* m : act) out.activated.push_back(m->id());
    if (!act.empty()) {
        out.scored = score_masks(act, l_cs);
        out.selection = intersect_candidates(select_global(out.scored), ovss, target_classes, out.scored, policy, bank);
        return out;
    }
    // No peak landed in any proposal: the candidate is the highest-mean-saliency
    // mask overall, and step (a) has no activated masks to draw from.
    out.scored = score_masks(masks, l_cs);
    out.selection = intersect_candidates(select_global(out.scored), ovss, target_classes, {}, policy, bank);
    out.selection.path = "no_activation+" + out.selection.path;
    for (const auto& sc : out.scored) {
        if (out.selection.mask_id == sc.mask_id) out.selection.score = sc.normalized_score;
    }
    return out;
}

}  // namespace rsseg
