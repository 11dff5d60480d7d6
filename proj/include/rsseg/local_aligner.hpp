#pragma once

#include "rsseg/core.hpp"
#include "rsseg/encoder_gateway.hpp"
#include "rsseg/mask_core.hpp"
#include "rsseg/prompt_bank.hpp"

#include <optional>
#include <vector>

namespace rsseg {

struct LabeledMask {
    MaskId mask_id = 0;
    ClassId class_id = kBackground;
    double probability = 0.0;
    /// Per-class probabilities in bank class order, background last when present.
    Eigen::VectorXd per_class_scores;
};

/// Labels for one image. `masks` keeps only foreground entries (M_ov) in
/// proposal order; `label_map` resolves overlaps toward the more probable mask
/// and holds -1 where no foreground mask lies.
struct SegmentationResult {
    std::string image_id;
    ImageSize size;
    std::vector<LabeledMask> masks;
    Grid<std::int32_t> label_map;

    const LabeledMask* find(MaskId id) const;
    /// Label of a proposal; kBackground when it is not in M_ov.
    ClassId label_of(MaskId id) const;
};

/// Crop each proposal with `crop`, then embed. Output order matches the set.
std::vector<EmbeddingVector> extract_local_features(const Image& image, const MaskSet& masks, const CropConfig& crop,
                                                    const EmbeddingEncoder& encoder);

/// Cosine similarity to every prompt entry, per-class maximum over each
/// class's entries (BACKGROUND included as one class), softmax over the
/// per-class maxima at temperature tau, argmax with ties to the lowest
/// class position.
std::vector<LabeledMask> classify_masks(const MaskSet& masks, std::span<const EmbeddingVector> local_feats,
                                        const ClassTextBank& bank, std::span<const PromptEntry> prompts,
                                        std::span<const EmbeddingVector> text_feats, double tau);

/// Column order of LabeledMask::per_class_scores for `bank`.
std::vector<ClassId> score_columns(const ClassTextBank& bank);

SegmentationResult assemble_ovss(const MaskSet& masks, std::span<const LabeledMask> labels);

}  // namespace rsseg
