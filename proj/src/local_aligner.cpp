#include "rsseg/local_aligner.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

namespace rsseg {

const LabeledMask* SegmentationResult::find(MaskId id) const {
    auto it = std::find_if(masks.begin(), masks.end(), [id](const LabeledMask& m) { return m.mask_id == id; });
    return it == masks.end() ? nullptr : &*it;
}

ClassId SegmentationResult::label_of(MaskId id) const {
    const auto* m = find(id);
    return m ? m->class_id : kBackground;
}

std::vector<EmbeddingVector> extract_local_features(const Image& image, const MaskSet& masks, const CropConfig& crop,
                                                    const EmbeddingEncoder& encoder) {
    std::vector<Image> patches;
    std::vector<PatchContext> contexts;
    patches.reserve(masks.size());
    std::size_t i = 0;
    for (const auto& m : masks) {
        try {
            patches.push_back(crop_patch(image, m, crop));
        } catch (const Error& e) {
            throw Error("mask " + std::to_string(m.id()) + ": " + e.what());
        }
        contexts.push_back({masks.image_id(), i++, m.id()});
    }
    try {
        return embed_images(patches, encoder, contexts);
    } catch (const BackendError& e) {
        throw BackendError("image " + masks.image_id() + ": " + e.what());
    }
}

std::vector<ClassId> score_columns(const ClassTextBank& bank) {
    std::vector<ClassId> cols;
    for (const auto& c : bank.classes()) cols.push_back(c.id);
    if (!bank.backgrounds().empty()) cols.push_back(kBackground);
    return cols;
}

std::vector<LabeledMask> classify_masks(const MaskSet& masks, std::span<const EmbeddingVector> local_feats,
                                        const ClassTextBank& bank, std::span<const PromptEntry> prompts,
                                        std::span<const EmbeddingVector> text_feats, double tau) {
    if (!(tau > 0.0)) throw InvalidArgument("classify_masks: temperature must be positive");
    if (local_feats.size() != masks.size()) {
        throw InvalidArgument("classify_masks: " + std::to_string(local_feats.size()) + " features for " +
                              std::to_string(masks.size()) + " masks");
    }
    if (prompts.size() != text_feats.size()) {
        throw InvalidArgument("classify_masks: " + std::to_string(text_feats.size()) + " text features for " +
                              std::to_string(prompts.size()) + " prompts");
    }
    if (prompts.empty()) throw InvalidArgument("classify_masks: no prompt entries");

    const std::vector<ClassId> cols = score_columns(bank);
    std::map<ClassId, Index> col_of;
    for (std::size_t k = 0; k < cols.size(); ++k) col_of[cols[k]] = static_cast<Index>(k);
    for (const auto& p : prompts) {
        if (!col_of.contains(p.class_id)) {
            throw InvalidArgument("prompt '" + p.text + "' maps to class " + std::to_string(p.class_id) +
                                  " which is not in the bank");
        }
    }

    Eigen::MatrixXd f;
    try {
        f = normalized_rows(local_feats, "local feature");
    } catch (const InvalidArgument& e) {
        // Report the proposal rather than the row number.
        std::string msg = e.what();
        for (std::size_t i = 0; i < local_feats.size(); ++i) {
            if (!(local_feats[i].norm() > 0.0) || !local_feats[i].allFinite()) {
                msg = "mask " + std::to_string(masks.masks()[i].id()) + ": feature has zero norm or non-finite entries";
                break;
            }
        }
        throw InvalidArgument(msg);
    }
    const Eigen::MatrixXd g = normalized_rows(text_feats, "text feature");
    if (f.rows() > 0 && f.cols() != g.cols()) {
        throw ShapeMismatch("classify_masks: feature dimension " + std::to_string(f.cols()) + " vs text dimension " +
                            std::to_string(g.cols()));
    }

    const Index n_cols = static_cast<Index>(cols.size());
    std::vector<LabeledMask> out;
    out.reserve(masks.size());
    const Eigen::MatrixXd sim = f.rows() > 0 ? Eigen::MatrixXd(f * g.transpose()) : Eigen::MatrixXd();
    for (Index i = 0; i < f.rows(); ++i) {
        Eigen::VectorXd best = Eigen::VectorXd::Constant(n_cols, -std::numeric_limits<double>::infinity());
        for (std::size_t e = 0; e < prompts.size(); ++e) {
            const Index c = col_of.at(prompts[e].class_id);
            best(c) = std::max(best(c), sim(i, static_cast<Index>(e)));
        }
        // A class with no prompt entry can never win.
        Eigen::MatrixXd logits = (best / tau).transpose();
        const Eigen::VectorXd p = softmax_rows(logits).row(0).transpose();
        Index arg = 0;
        for (Index c = 1; c < n_cols; ++c) {
            if (p(c) > p(arg)) arg = c;
        }
        out.push_back({masks.masks()[static_cast<std::size_t>(i)].id(), cols[static_cast<std::size_t>(arg)], p(arg), p});
    }
    return out;
}

SegmentationResult assemble_ovss(const MaskSet& masks, std::span<const LabeledMask> labels) {
    std::map<MaskId, const LabeledMask*> by_id;
    for (const auto& l : labels) {
        if (masks.find(l.mask_id) == nullptr) {
            throw InvalidArgument("label for unknown mask " + std::to_string(l.mask_id));
        }
        if (!by_id.emplace(l.mask_id, &l).second) {
            throw InvalidArgument("duplicate label for mask " + std::to_string(l.mask_id));
        }
    }

    SegmentationResult out;
    out.image_id = masks.image_id();
    out.size = masks.image_size();
    out.label_map = Grid<std::int32_t>::Constant(out.size.height, out.size.width, kBackground);
    MapGrid winner = MapGrid::Constant(out.size.height, out.size.width, -1.0);

    for (const auto& m : masks) {
        auto it = by_id.find(m.id());
        if (it == by_id.end()) throw InvalidArgument("missing label for mask " + std::to_string(m.id()));
        const LabeledMask& l = *it->second;
        if (l.class_id == kBackground) continue;
        out.masks.push_back(l);
        // Strictly greater: on equal probability the earlier proposal keeps the pixel.
        const auto take = m.grid() && (winner < l.probability);
        out.label_map = take.select(l.class_id, out.label_map);
        winner = take.select(l.probability, winner);
    }
    return out;
}

}  // namespace rsseg
