#include "test_util.hpp"

#include "rsseg/image_io.hpp"
#include "rsseg/proposal_ingest.hpp"

#include <fstream>
#include <thread>

using namespace rsseg;
using rsseg::testing::random_blob;
using rsseg::testing::rect_grid;
using rsseg::testing::TempDir;

namespace {

nlohmann::json container(nlohmann::json masks, Index h = 4, Index w = 4) {
    return {{"image_id", "im"}, {"height", h}, {"width", w}, {"masks", std::move(masks)}};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

SceneShape shape(ShapeKind kind, std::string cat, Index r, Index c, Index h, Index w, std::array<float, 3> color) {
    return {kind, std::move(cat), r, c, h, w, color};
}

}  // namespace

TEST(Container, RleFixture) {
    const MaskSet s = proposals_from_json(container({{{"id", 0}, {"rle", {6, 4, 6}}}}));
    ASSERT_EQ(s.size(), 1u);
    const auto& g = s.masks()[0].grid();
    EXPECT_EQ(g.count(), 4);
    for (Index i = 0; i < 16; ++i) EXPECT_EQ(g.data()[i], i >= 6 && i <= 9);
}

TEST(Container, Errors) {
    EXPECT_THROW(proposals_from_json(container({{{"id", 0}, {"rle", {6, 4, 5}}}})), FormatError);
    EXPECT_THROW(proposals_from_json(container({{{"id", 0}, {"rle", {6, 4, 6}}}, {{"id", 0}, {"rle", {0, 1, 15}}}})),
                 FormatError);
    EXPECT_THROW(proposals_from_json({{"image_id", "im"}}), FormatError);
    EXPECT_THROW(read_proposals("/nonexistent/p.json"), FormatError);
}

TEST(Container, EmptyMaskRejectedAndLogged) {
    RejectionLog log;
    const MaskSet s = proposals_from_json(container({{{"id", 0}, {"rle", {16}}}, {{"id", 1}, {"rle", {0, 1, 15}}}}), &log);
    EXPECT_EQ(s.size(), 1u);
    ASSERT_EQ(log.size(), 1u);
    EXPECT_EQ(log.entries()[0].mask, "0");
    EXPECT_EQ(log.entries()[0].reason, "empty");
}

TEST(Container, PgmMasksAndOutOfBoundsRejection) {
    TempDir dir("pgm");
    write_mask_pgm(dir.path() / "ok.pgm", rect_grid({4, 4}, 1, 1, 2, 2));
    write_mask_pgm(dir.path() / "big.pgm", rect_grid({5, 4}, 1, 1, 2, 2));
    RejectionLog log;
    const MaskSet s = proposals_from_json(container({{{"id", 0}, {"pgm", "ok.pgm"}}, {{"id", 1}, {"pgm", "big.pgm"}}}),
                                          &log, "test", dir.path());
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s.masks()[0].area(), 4);
    ASSERT_EQ(log.size(), 1u);
    EXPECT_TRUE(log.entries()[0].reason.starts_with("out of bounds"));
}

TEST(Container, RoundTripIsBitIdentical) {
    SplitMix64 rng(71);
    TempDir dir("roundtrip");
    for (int t = 0; t < 20; ++t) {
        const ImageSize size{rng.integer(4, 30), rng.integer(4, 30)};
        MaskSet s("img" + std::to_string(t), size);
        for (int k = 0; k < 5; ++k) s.add(MaskProposal(k * 3 + 1, random_blob(rng, size)));
        const auto path = dir.path() / "p.json";
        write_proposals(path, s);
        const MaskSet back = read_proposals(path);
        ASSERT_EQ(back.size(), s.size());
        EXPECT_EQ(back.image_id(), s.image_id());
        for (std::size_t k = 0; k < s.size(); ++k) {
            EXPECT_EQ(back.masks()[k].id(), s.masks()[k].id());
            EXPECT_TRUE((back.masks()[k].grid() == s.masks()[k].grid()).all());
        }
        EXPECT_EQ(proposals_to_json(back).dump(), proposals_to_json(s).dump());
    }
}

TEST(Synthetic, Grid2x2Tiles) {
    const MaskSet s = load_proposals(ProposalSource::synthetic(1, "grid2x2", {32, 32}), "im");
    ASSERT_EQ(s.size(), 4u);
    BinaryGrid cover = BinaryGrid::Constant(32, 32, false);
    for (std::size_t k = 0; k < 4; ++k) {
        const auto& m = s.masks()[k];
        EXPECT_EQ(m.area(), 256);
        const auto bb = bounding_rect(m.grid());
        EXPECT_EQ(bb.rows, 16);
        EXPECT_EQ(bb.cols, 16);
        EXPECT_EQ(bb.row0, Index(k / 2) * 16);
        EXPECT_EQ(bb.col0, Index(k % 2) * 16);
        EXPECT_FALSE((cover && m.grid()).any());
        cover = cover || m.grid();
    }
    EXPECT_TRUE(cover.all());
}

TEST(Synthetic, RandomLayoutIsSeedDeterministic) {
    const MaskSet a = synthetic_proposals("im", {20, 20}, "random6", 5);
    const MaskSet b = synthetic_proposals("im", {20, 20}, "random6", 5);
    EXPECT_EQ(proposals_to_json(a).dump(), proposals_to_json(b).dump());
    EXPECT_EQ(a.size(), 6u);
    EXPECT_THROW(synthetic_proposals("im", {20, 20}, "hexagons", 5), Error);
}

TEST(Synthetic, CanvasFromImage) {
    const Image img(12, 18, 3);
    const MaskSet s = load_proposals(ProposalSource::synthetic(0, "grid1x3"), "im", nullptr, &img);
    EXPECT_EQ(s.image_size(), (ImageSize{12, 18}));
    EXPECT_EQ(s.size(), 3u);
}

TEST(FileSource, DirectoryAndMultiImageFile) {
    TempDir dir("filesrc");
    MaskSet a("a", {4, 4});
    a.add(MaskProposal(0, rect_grid({4, 4}, 0, 0, 2, 2)));
    MaskSet b("b", {4, 4});
    b.add(MaskProposal(3, rect_grid({4, 4}, 2, 2, 2, 2)));
    write_proposals(dir.path() / "a.json", a);
    EXPECT_EQ(load_proposals(ProposalSource::file(dir.path()), "a").masks()[0].id(), 0);
    std::ofstream(dir.path() / "all.json") << nlohmann::json{{"images", {proposals_to_json(a), proposals_to_json(b)}}}.dump();
    EXPECT_EQ(load_proposals(ProposalSource::file(dir.path() / "all.json"), "b").masks()[0].id(), 3);
    EXPECT_THROW(load_proposals(ProposalSource::file(dir.path() / "a.json"), "b"), FormatError);
    EXPECT_THROW(ProposalSource::file(dir.path() / "missing").validate(), ConfigError);
}

TEST(FileSource, EmptyContainerYieldsEmptySet) {
    TempDir dir("emptysrc");
    std::ofstream(dir.path() / "im.json") << container(nlohmann::json::array()).dump();
    EXPECT_TRUE(load_proposals(ProposalSource::file(dir.path()), "im").empty());
}

TEST(AdapterSource, BuiltinTiles) {
    const Image img(16, 16, 1);
    const auto src = ProposalSource::live("tiles", {{"layout", "grid2x1"}});
    src.validate();
    const MaskSet s = load_proposals(src, "im", nullptr, &img);
    EXPECT_EQ(s.size(), 2u);
    EXPECT_THROW(ProposalSource::live("nope").validate(), ConfigError);
    EXPECT_THROW(load_proposals(src, "im"), Error);
}

TEST(AdapterSource, RegisteredAdapter) {
    struct One : ProposalAdapter {
        std::string name() const override { return "one"; }
        MaskSet propose(const Image& image, const std::string& id) const override {
            MaskSet s(id, image.size());
            s.add(MaskProposal(0, BinaryGrid::Constant(image.height(), image.width(), true)));
            return s;
        }
    };
    register_proposal_adapter("one_mask", [](const nlohmann::json&) { return std::make_unique<One>(); });
    const Image img(5, 5, 1);
    EXPECT_EQ(load_proposals(ProposalSource::live("one_mask"), "im", nullptr, &img).size(), 1u);
    const auto names = proposal_adapters();
    EXPECT_NE(std::find(names.begin(), names.end(), "one_mask"), names.end());
}

TEST(RejectionLog, ConcurrentAppends) {
    RejectionLog log;
    std::vector<std::jthread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&log, t] {
            for (int k = 0; k < 250; ++k) log.append({"src", std::to_string(t), std::to_string(k), "empty"});
        });
    }
    threads.clear();
    EXPECT_EQ(log.size(), 1000u);
    EXPECT_EQ(log.to_json().size(), 1000u);
}

TEST(ExportMaskPgms, RoundTripThroughContainer) {
    TempDir dir("export");
    MaskSet s("im", {6, 7});
    s.add(MaskProposal(2, rect_grid({6, 7}, 1, 1, 3, 4)));
    s.add(MaskProposal(5, rect_grid({6, 7}, 0, 5, 6, 2)));
    const auto paths = export_mask_pgms(dir.path(), s);
    ASSERT_EQ(paths.size(), 2u);
    EXPECT_EQ(paths[0].filename(), "im_2.pgm");
    nlohmann::json masks = nlohmann::json::array();
    for (std::size_t k = 0; k < 2; ++k) masks.push_back({{"id", s.masks()[k].id()}, {"pgm", paths[k].filename().string()}});
    const MaskSet back = proposals_from_json(container(masks, 6, 7), nullptr, {}, dir.path());
    for (std::size_t k = 0; k < 2; ++k) EXPECT_TRUE((back.masks()[k].grid() == s.masks()[k].grid()).all());
}

TEST(SynthScene, RedSquareSelfEvaluates) {
    SceneSpec spec;
    spec.size = {32, 32};
    spec.shapes = {shape(ShapeKind::Rect, "ship", 4, 4, 8, 8, {220, 30, 30})};
    const auto scene = synth_scene(spec);
    EXPECT_EQ(scene.proposals.size(), 1u);
    ASSERT_EQ(scene.gt.size(), 1u);
    EXPECT_EQ(scene.gt[0].mask.count(), 64);
    EXPECT_EQ(scene.image.channels[0](5, 5), 220.0f);
    EXPECT_EQ(scene.image.channels[0](0, 0), 40.0f);
    EXPECT_DOUBLE_EQ(proposal_miou(scene.gt, {{spec.image_id, scene.proposals}}).overall_miou, 1.0);
}

TEST(SynthScene, DistractorBestMatchTable) {
    SceneSpec spec;
    spec.size = {20, 20};
    spec.shapes = {shape(ShapeKind::Rect, "a", 0, 0, 4, 4, {255, 0, 0}), shape(ShapeKind::Rect, "b", 10, 10, 5, 5, {0, 255, 0})};
    spec.distractors = {shape(ShapeKind::Rect, "", 0, 2, 4, 4, {0, 0, 0})};  // overlaps shape a by 8 of 24 cells
    const auto scene = synth_scene(spec);
    ASSERT_EQ(scene.proposals.size(), 3u);
    EXPECT_EQ(scene.shape_ids, (std::vector<MaskId>{0, 1}));
    EXPECT_EQ(scene.distractor_ids, (std::vector<MaskId>{2}));
    const auto* d = scene.proposals.find(2);
    EXPECT_DOUBLE_EQ(mask_iou(d->grid(), scene.gt[0].mask), 8.0 / 24.0);
    EXPECT_DOUBLE_EQ(mask_iou(d->grid(), scene.gt[1].mask), 0.0);
    const auto r = proposal_miou(scene.gt, {{spec.image_id, scene.proposals}});
    EXPECT_DOUBLE_EQ(r.per_category.at("a").mean_iou, 1.0);
    EXPECT_DOUBLE_EQ(r.per_category.at("b").mean_iou, 1.0);
    // Distractor paints nothing.
    EXPECT_EQ(scene.image.channels[1](0, 5), 40.0f);
}

TEST(SynthScene, DeterministicBytes) {
    TempDir dir("det");
    SceneSpec spec;
    spec.seed = 9;
    spec.noise = 6;
    spec.shapes = {shape(ShapeKind::Ellipse, "tank", 5, 5, 20, 20, {245, 245, 245}),
                   shape(ShapeKind::Diamond, "roundabout", 30, 30, 21, 21, {128, 128, 128})};
    for (int k = 0; k < 2; ++k) {
        const auto scene = synth_scene(spec);
        write_image(dir.path() / ("s" + std::to_string(k) + ".ppm"), scene.image);
        write_proposals(dir.path() / ("p" + std::to_string(k) + ".json"), scene.proposals);
    }
    EXPECT_EQ(slurp(dir.path() / "s0.ppm"), slurp(dir.path() / "s1.ppm"));
    EXPECT_EQ(slurp(dir.path() / "p0.json"), slurp(dir.path() / "p1.json"));
    const Image first = synth_scene(spec).image;
    spec.seed = 10;
    EXPECT_FALSE(synth_scene(spec).image == first);
}

TEST(SynthScene, Errors) {
    SceneSpec spec;
    spec.size = {10, 10};
    spec.shapes = {shape(ShapeKind::Rect, "a", 8, 8, 4, 4, {0, 0, 0})};
    EXPECT_THROW(synth_scene(spec), InvalidArgument);
    spec.shapes = {shape(ShapeKind::Rect, "a", 0, 0, 5, 5, {0, 0, 0}), shape(ShapeKind::Rect, "b", 2, 2, 5, 5, {0, 0, 0})};
    EXPECT_THROW(synth_scene(spec), InvalidArgument);
    spec.allow_overlap = true;
    EXPECT_NO_THROW(synth_scene(spec));
}

TEST(SynthScene, JsonRoundTrip) {
    const nlohmann::json j{{"image_id", "s"},
                           {"height", 24},
                           {"width", 24},
                           {"seed", 3},
                           {"shapes", {{{"kind", "ellipse"}, {"category", "tank"}, {"row", 2}, {"col", 2}, {"height", 8}, {"width", 8}, {"color", "white"}}}},
                           {"expressions", {{{"id", "e0"}, {"text", "the round tank"}, {"target", 0}}}}};
    const SceneSpec spec = scene_from_json(j);
    EXPECT_EQ(spec.shapes[0].color, (std::array<float, 3>{245, 245, 245}));
    const SceneSpec again = scene_from_json(scene_to_json(spec));
    EXPECT_TRUE(synth_scene(spec).image == synth_scene(again).image);
    EXPECT_EQ(again.expressions.at(0).text, "the round tank");
}

TEST(Rasterize, EllipseAndDiamondInsideBox) {
    for (ShapeKind k : {ShapeKind::Ellipse, ShapeKind::Diamond}) {
        const BinaryGrid g = rasterize(shape(k, "x", 3, 4, 11, 9, {0, 0, 0}), {20, 20});
        const auto bb = bounding_rect(g);
        EXPECT_EQ(bb.row0, 3);
        EXPECT_EQ(bb.col0, 4);
        EXPECT_EQ(bb.rows, 11);
        EXPECT_EQ(bb.cols, 9);
        EXPECT_LT(g.count(), 99);
    }
}

TEST(ImageIo, NetpbmRoundTrip) {
    TempDir dir("io");
    Image rgb(5, 7, 3);
    for (int k = 0; k < 3; ++k) rgb.channels[k].setConstant(float(k * 100));
    write_image(dir.path() / "x.ppm", rgb);
    EXPECT_TRUE(read_image(dir.path() / "x.ppm") == rgb);
    Grid<std::uint16_t> g(3, 4);
    for (Index i = 0; i < g.size(); ++i) g.data()[i] = std::uint16_t(i * 5000);
    write_pgm16(dir.path() / "y.pgm", g);
    EXPECT_TRUE((read_pgm16(dir.path() / "y.pgm") == g).all());
    SplitMix64 rng(72);
    const MapGrid m = rsseg::testing::random_map(rng, {6, 6}, -2, 3);
    export_saliency(dir.path() / "sal", m);
    const MapGrid back = import_saliency(dir.path() / "sal");
    EXPECT_LE((back - m).abs().maxCoeff(), 5.0 / 65535.0);
    EXPECT_THROW(read_image(dir.path() / "missing.ppm"), Error);
}
