#include "rsseg/image_io.hpp"
#include "rsseg/pipeline.hpp"
#include "rsseg/tensor_file.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace rsseg {

namespace fs = std::filesystem;

namespace {

std::vector<float> one_hot(Index dim, Index k) {
    std::vector<float> v(static_cast<std::size_t>(dim), 0.0f);
    v[static_cast<std::size_t>(k)] = 1.0f;
    return v;
}

MapGrid bump_at(ImageSize size, const BinaryGrid& shape, double weight) {
    double sr = 0, sc = 0, n = 0;
    Index r0 = size.height, r1 = 0, c0 = size.width, c1 = 0;
    for (Index r = 0; r < shape.rows(); ++r) {
        for (Index c = 0; c < shape.cols(); ++c) {
            if (!shape(r, c)) continue;
            sr += static_cast<double>(r) + 0.5;
            sc += static_cast<double>(c) + 0.5;
            n += 1;
            r0 = std::min(r0, r), r1 = std::max(r1, r + 1), c0 = std::min(c0, c), c1 = std::max(c1, c + 1);
        }
    }
    const double cy = sr / n, cx = sc / n;
    const double sigma = std::max(1.5, static_cast<double>(std::min(r1 - r0, c1 - c0)) / 4.0);
    MapGrid m(size.height, size.width);
    for (Index r = 0; r < size.height; ++r) {
        for (Index c = 0; c < size.width; ++c) {
            const double dy = static_cast<double>(r) + 0.5 - cy, dx = static_cast<double>(c) + 0.5 - cx;
            m(r, c) = weight * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        }
    }
    return m;
}

}  // namespace

SynthDataset write_synth_dataset(const std::vector<SceneSpec>& scenes, const ClassTextBank& bank, const fs::path& out) {
    for (const auto* sub : {"images", "proposals", "adapters/encoder", "adapters/saliency"}) {
        fs::create_directories(out / sub);
    }
    const auto& classes = bank.classes();
    const auto dim = static_cast<Index>(classes.size()) + 1;
    std::map<ClassId, Index> axis;
    for (std::size_t i = 0; i < classes.size(); ++i) axis[classes[i].id] = static_cast<Index>(i);
    axis[kBackground] = dim - 1;

    // Every prompt any template preset can render, so template and
    // augmentation ablations all find their rows.
    std::vector<std::string> texts;
    std::vector<EmbeddingVector> rows;
    std::set<std::string> seen;
    std::vector<std::string> templates{bank.template_text()};
    for (const auto& p : template_presets()) templates.emplace_back(p.text);
    for (const auto& t : templates) {
        for (const auto& e : render_prompts(bank.with_template(t))) {
            if (!seen.insert(e.text).second) continue;
            texts.push_back(e.text);
            rows.push_back(EmbeddingVector::Unit(dim, axis.at(e.class_id)));
        }
    }
    TensorFile text_file;
    text_file.put("text_features", from_rows(rows));
    text_file.meta["prompts"] = texts;
    text_file.write(out / "adapters/encoder/text_features.rstf");

    std::ofstream(out / "bank.json", std::ios::trunc) << bank_to_json(bank).dump(2) << "\n";

    RuleBasedTagger tagger;
    const ClassVocabulary vocab = bank.vocabulary();
    Annotations ann;
    SynthDataset ds;
    std::set<std::string> ids;
    for (const auto& spec : scenes) {
        if (!ids.insert(spec.image_id).second) throw InvalidArgument("duplicate scene id " + spec.image_id);
        const SyntheticScene scene = synth_scene(spec);
        write_image(out / "images" / (spec.image_id + ".ppm"), scene.image);
        write_proposals(out / "proposals" / (spec.image_id + ".json"), scene.proposals);

        TensorArray patch;
        patch.shape = {static_cast<std::int64_t>(scene.proposals.size()), dim};
        std::vector<MaskId> mask_ids;
        std::vector<Index> which(scene.proposals.size(), dim - 1);
        for (std::size_t i = 0; i < spec.shapes.size(); ++i) {
            const ClassEntry* c = bank.find(spec.shapes[i].category);
            if (!c) throw InvalidArgument("scene " + spec.image_id + ": category '" + spec.shapes[i].category +
                                          "' is not in the bank");
            which[static_cast<std::size_t>(scene.shape_ids[i])] = axis.at(c->id);
        }
        for (std::size_t i = 0; i < scene.proposals.size(); ++i) {
            mask_ids.push_back(scene.proposals.masks()[i].id());
            const auto v = one_hot(dim, which[static_cast<std::size_t>(mask_ids.back())]);
            patch.data.insert(patch.data.end(), v.begin(), v.end());
        }
        TensorFile image_file;
        image_file.put("patch_features", patch);
        image_file.meta["mask_ids"] = mask_ids;
        image_file.write(out / "adapters/encoder" / (spec.image_id + ".rstf"));

        GtImage g{spec.image_id, spec.size, scene.gt};
        ann.images.push_back(std::move(g));

        for (const auto& e : spec.expressions) {
            const SceneShape& target = spec.shapes[e.target];
            const BinaryGrid& target_mask = scene.gt[e.target].mask;
            ann.expressions.push_back({e.id, spec.image_id, e.text, target.category, target_mask});

            // Class tokens spread over every instance of the class; modifier
            // tokens attend to the target only.
            const DecoupledExpression d = decouple_text(e.text, tagger, vocab);
            MapGrid cls_map = bump_at(spec.size, target_mask, 0.5);
            for (std::size_t i = 0; i < spec.shapes.size(); ++i) {
                if (i != e.target && spec.shapes[i].category == target.category) {
                    cls_map += bump_at(spec.size, scene.gt[i].mask, 0.5);
                }
            }
            const MapGrid mod_map = bump_at(spec.size, target_mask, 1.0);
            const MapGrid grad = MapGrid::Ones(spec.size.height, spec.size.width);
            TensorFile sal;
            for (const auto& t : d.cls_tokens) {
                sal.put("attn/" + t.text, from_grid(cls_map));
                sal.put("grad/" + t.text, from_grid(grad));
            }
            for (const auto& t : d.mod_tokens) {
                sal.put("attn/" + t.text, from_grid(mod_map));
                sal.put("grad/" + t.text, from_grid(grad));
            }
            TensorArray itm;
            itm.shape = {1};
            itm.data = {1.0f};
            sal.put("itm_score", itm);
            sal.write(out / "adapters/saliency" / (e.id + ".rstf"));
            ++ds.expressions;
        }
        ds.image_ids.push_back(spec.image_id);
    }
    write_annotations(out / "annotations.json", ann);

    const nlohmann::json cfg{{"bank", "bank.json"},
                             {"encoder", {{"kind", "tensor-file"}, {"path", "adapters/encoder"}}},
                             {"saliency", {{"kind", "tensor-file"}, {"path", "adapters/saliency"}}},
                             {"proposals", {{"kind", "file"}, {"path", "proposals"}}},
                             {"images", "images"},
                             {"image_ids", ds.image_ids},
                             {"gt", "annotations.json"},
                             {"expressions", "annotations.json"},
                             {"out", "out"}};
    ds.config = out / "config.json";
    std::ofstream(ds.config, std::ios::trunc) << cfg.dump(2) << "\n";
    return ds;
}

}  // namespace rsseg
