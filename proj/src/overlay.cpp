#include "rsseg/hashing.hpp"
#include "rsseg/image_io.hpp"
#include "rsseg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace rsseg {

namespace fs = std::filesystem;

std::array<float, 3> palette_color(std::string_view name) {
    const std::uint64_t h = hash_text(name);
    const double hue = static_cast<double>(h % 360) / 60.0;
    const double sat = 0.6 + static_cast<double>((h >> 16) % 35) / 100.0;
    const double val = 0.8 + static_cast<double>((h >> 32) % 20) / 100.0;
    const double c = val * sat;
    const double x = c * (1.0 - std::abs(std::fmod(hue, 2.0) - 1.0));
    const double m = val - c;
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(hue)) {
        case 0: r = c, g = x; break;
        case 1: r = x, g = c; break;
        case 2: g = c, b = x; break;
        case 3: g = x, b = c; break;
        case 4: r = x, b = c; break;
        default: r = c, b = x; break;
    }
    auto q = [&](double v) { return static_cast<float>(std::round((v + m) * 255.0)); };
    return {q(r), q(g), q(b)};
}

namespace {

constexpr Index kSwatchRow = 10;

Image as_rgb(const Image& image) {
    if (image.n_channels() == 3) return image;
    if (image.n_channels() != 1) throw InvalidArgument("overlay: need a 1- or 3-channel image");
    Image out(image.height(), image.width(), 3);
    for (auto& ch : out.channels) ch = image.channels.front();
    return out;
}

void blend(Image& canvas, Index col0, const BinaryGrid& mask, const std::array<float, 3>& color) {
    for (Index r = 0; r < mask.rows(); ++r) {
        for (Index c = 0; c < mask.cols(); ++c) {
            if (!mask(r, c)) continue;
            for (std::size_t k = 0; k < 3; ++k) {
                float& v = canvas.channels[k](r, col0 + c);
                v = std::round(0.5f * v + 0.5f * color[k]);
            }
        }
    }
}

}  // namespace

Image render_overlay(const Image& image, const MaskSet& proposals,
                     const std::vector<std::pair<BinaryGrid, std::string>>& predictions,
                     std::vector<OverlayLegendEntry>* legend) {
    const Image rgb = as_rgb(image);
    const Index h = rgb.height(), w = rgb.width();

    std::vector<std::string> labels;
    for (const auto& [mask, label] : predictions) {
        require_same_shape(mask, rgb.channels.front(), "render_overlay");
        if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
    }
    std::sort(labels.begin(), labels.end());

    Image canvas(h + kSwatchRow * static_cast<Index>(labels.size()), 3 * w, 3);
    for (std::size_t k = 0; k < 3; ++k) {
        canvas.channels[k].setZero();
        for (int panel = 0; panel < 3; ++panel) canvas.channels[k].block(0, panel * w, h, w) = rgb.channels[k];
    }
    for (const auto& p : proposals) {
        if (p.size() != rgb.size()) throw ShapeMismatch("render_overlay: proposal size differs from image");
        blend(canvas, w, p.grid(), palette_color("mask:" + std::to_string(p.id())));
    }
    for (const auto& [mask, label] : predictions) blend(canvas, 2 * w, mask, palette_color(label));

    if (legend) legend->clear();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto color = palette_color(labels[i]);
        const Index row0 = h + static_cast<Index>(i) * kSwatchRow + 1;
        for (std::size_t k = 0; k < 3; ++k) {
            canvas.channels[k].block(row0, 2, kSwatchRow - 2, std::min<Index>(kSwatchRow - 2, 3 * w - 2))
                .setConstant(color[k]);
        }
        if (legend) legend->push_back({labels[i], color});
    }
    return canvas;
}

RunSummary cmd_overlay(const fs::path& results, const fs::path& images, const fs::path& out) {
    if (!fs::is_directory(results)) throw ConfigError("results: " + results.string() + " is not a directory");
    const fs::path dir = out / "overlay";
    fs::create_directories(dir);

    struct Item {
        fs::path record;
        bool res;
    };
    std::vector<Item> items;
    for (const auto* sub : {"ovss", "res"}) {
        if (!fs::is_directory(results / sub)) continue;
        std::set<fs::path> found;
        for (const auto& e : fs::directory_iterator(results / sub)) {
            if (e.path().extension() == ".json") found.insert(e.path());
        }
        for (const auto& p : found) items.push_back({p, std::string(sub) == "res"});
    }

    RunSummary s;
    s.command = "overlay";
    s.items = items.size();
    for (const auto& item : items) {
        try {
            std::ifstream is(item.record);
            const nlohmann::json rec = nlohmann::json::parse(is);
            const std::string image_id = rec.at("image_id").get<std::string>();
            const std::string name = item.res ? rec.at("id").get<std::string>() : image_id;
            const Image image = read_image(image_path(images, image_id));
            const ImageSize size{rec.at("height").get<Index>(), rec.at("width").get<Index>()};
            if (size != image.size()) {
                throw ShapeMismatch("record is " + to_string(size) + ", image is " + to_string(image.size()));
            }
            auto decode = [&](const nlohmann::json& rle) {
                return rle_decode(rle.get<std::vector<std::uint64_t>>(), size);
            };
            MaskSet proposals(image_id, size);
            std::vector<std::pair<BinaryGrid, std::string>> preds;
            if (item.res) {
                BinaryGrid m = decode(rec.at("rle"));
                if (m.any()) {
                    const auto& label = rec.at("label");
                    preds.emplace_back(std::move(m), label.is_null() ? std::string("referred") : label.get<std::string>());
                }
            } else {
                for (const auto& p : rec.at("proposals")) {
                    proposals.add(MaskProposal(p.at("id").get<MaskId>(), decode(p.at("rle"))));
                }
                for (const auto& m : rec.at("masks")) preds.emplace_back(decode(m.at("rle")), m.at("class"));
            }
            std::vector<OverlayLegendEntry> legend;
            write_image(dir / (name + ".ppm"), render_overlay(image, proposals, preds, &legend));
            nlohmann::json lj = nlohmann::json::array();
            for (std::size_t i = 0; i < legend.size(); ++i) {
                lj.push_back({{"row", i}, {"label", legend[i].label}, {"color", legend[i].color}});
            }
            std::ofstream os(dir / (name + "_legend.json"), std::ios::trunc);
            os << nlohmann::json{{"image_id", image_id}, {"panels", {"input", "proposals", "prediction"}},
                                 {"legend", lj}}
                      .dump(2)
               << "\n";
        } catch (const std::exception& e) {
            s.failures.push_back(item.record.filename().string() + ": " + e.what());
        }
    }
    return s;
}

}  // namespace rsseg
