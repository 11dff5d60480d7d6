#pragma once

#include "rsseg/core.hpp"
#include "rsseg/local_aligner.hpp"
#include "rsseg/mask_core.hpp"
#include "rsseg/saliency_fusion.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rsseg {

struct ScoredMask {
    MaskId mask_id = 0;
    double raw_score = 0.0;         ///< sum over the mask of (1 + L)
    double normalized_score = 0.0;  ///< raw_score / area == 1 + mean(L over mask)
};

/// Proposals containing at least one peak coordinate, in set order.
std::vector<const MaskProposal*> activated_masks(const MaskSet& masks, const PeakSet& peaks);

std::vector<ScoredMask> score_masks(std::span<const MaskProposal* const> masks, const MapGrid& l_cs);
std::vector<ScoredMask> score_masks(const MaskSet& masks, const MapGrid& l_cs);

/// Argmax of the normalised score, ties to the lowest mask id; nullopt when empty.
std::optional<MaskId> select_global(std::span<const ScoredMask> scored);

/// Steps tried, in order, when the global candidate's label is not a target class.
enum class FallbackStep {
    ClassMatchActivated,  ///< "a": best-scoring activated mask with a target label
    GlobalAnyLabel,       ///< "b": the global candidate regardless of label
};

struct FallbackPolicy {
    std::vector<FallbackStep> steps{FallbackStep::ClassMatchActivated, FallbackStep::GlobalAnyLabel};

    /// "a,b", "a", "b", or "none" (empty result on mismatch).
    static FallbackPolicy parse(std::string_view s);
    std::string to_string() const;
};

struct Selection {
    std::optional<MaskId> mask_id;
    double score = 0.0;
    ClassId label = kBackground;
    /// consistent | fallback_a | fallback_b | empty, prefixed "no_activation+"
    /// when no proposal contained a peak.
    std::string path;
};

/// Label-consistency filter between the global candidate and the OVSS labels.
/// Throws InvalidArgument when a target class is not in the bank.
Selection intersect_candidates(std::optional<MaskId> global_id, const SegmentationResult& ovss,
                               std::span<const ClassId> target_classes, std::span<const ScoredMask> act_scored,
                               const FallbackPolicy& policy, const ClassTextBank& bank);

struct ReferredSelection {
    Selection selection;
    std::vector<MaskId> activated;
    std::vector<ScoredMask> scored;
};

/// activated -> score -> argmax -> intersect. With no activated proposal every
/// proposal is scored instead (highest mean saliency becomes the candidate).
ReferredSelection select_referred(const MaskSet& masks, const MapGrid& l_cs, const PeakSet& peaks,
                                  const SegmentationResult& ovss, std::span<const ClassId> target_classes,
                                  const FallbackPolicy& policy, const ClassTextBank& bank);

}  // namespace rsseg
