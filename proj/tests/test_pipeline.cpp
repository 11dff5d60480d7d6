#include "test_util.hpp"

#include "rsseg/image_io.hpp"
#include "rsseg/pipeline.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace rsseg;
using rsseg::testing::rect_grid;
using rsseg::testing::TempDir;
namespace fs = std::filesystem;

namespace {

const fs::path kData = RSSEG_DATA_DIR;

nlohmann::json read_json_file(const fs::path& p) {
    std::ifstream is(p);
    return nlohmann::json::parse(is);
}

std::string read_bytes(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::vector<SceneSpec> fixture_scenes() {
    std::vector<SceneSpec> out;
    const auto j = read_json_file(kData / "fixtures/scenes.json");
    for (const auto& s : j.at("scenes")) out.push_back(scene_from_json(s));
    return out;
}

ClassTextBank isaid() { return build_bank(kData / "banks/isaid.json"); }

struct Dataset {
    SynthDataset ds;
    PipelineConfig cfg;
};

Dataset make_dataset(const fs::path& root) {
    Dataset d;
    d.ds = write_synth_dataset(fixture_scenes(), isaid(), root / "data");
    d.cfg = load_config(d.ds.config);
    d.cfg.out = root / "out";
    return d;
}

/// Every file under `dir` (relative path -> bytes), manifests excluded.
std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
        out[fs::relative(e.path(), dir).string()] = read_bytes(e.path());
    }
    return out;
}

double overall(const RunSummary& s, const char* key) {
    return s.eval->at(key).at("image_level").at("overall_miou").get<double>();
}

class ScopedEnv {
public:
    ScopedEnv(const char* name, const std::string& value) : name_(name) {
        if (const char* old = std::getenv(name)) old_ = old;
        ::setenv(name, value.c_str(), 1);
    }
    ~ScopedEnv() {
        if (old_) ::setenv(name_, old_->c_str(), 1);
        else ::unsetenv(name_);
    }

private:
    const char* name_;
    std::optional<std::string> old_;
};

}  // namespace

// --- config -----------------------------------------------------------------

TEST(Config, UnknownKeyIsRejected) {
    EXPECT_THROW(config_from_json({{"tua", 0.1}}), ConfigError);
    EXPECT_THROW(config_from_json({{"crop", {{"variant", "bb"}, {"ration", 0.1}}}}), ConfigError);
}

TEST(Config, RelativePathsResolveAgainstBase) {
    const auto cfg = config_from_json({{"bank", "b.json"}, {"images", "imgs"}}, "/base/dir");
    EXPECT_EQ(cfg.bank, fs::path("/base/dir/b.json"));
    EXPECT_EQ(cfg.images, fs::path("/base/dir/imgs"));
}

TEST(Config, ManifestIsAcceptedAsConfig) {
    TempDir tmp("cfg");
    auto d = make_dataset(tmp.path());
    d.cfg.tau = 0.05;
    d.cfg.crop.variant = CropVariant::BBMask;
    write_manifest(tmp.path() / "m", "ovss run", d.cfg);
    const auto back = load_config(tmp.path() / "m/manifest.json");
    EXPECT_EQ(config_to_json(back), config_to_json(d.cfg));
}

TEST(Config, ValidateRanges) {
    TempDir tmp("validate");
    auto d = make_dataset(tmp.path());
    EXPECT_NO_THROW(validate_config(d.cfg, Command::Ovss));
    EXPECT_NO_THROW(validate_config(d.cfg, Command::Res));
    auto bad = [&](auto mutate) {
        PipelineConfig c = d.cfg;
        mutate(c);
        EXPECT_THROW(validate_config(c, Command::Res), ConfigError);
    };
    bad([](PipelineConfig& c) { c.workers = 0; });
    bad([](PipelineConfig& c) { c.tau = 0.0; });
    bad([](PipelineConfig& c) { c.crop.ratio = -0.1; });
    bad([](PipelineConfig& c) { c.saliency.theta = 1.5; });
    bad([](PipelineConfig& c) { c.bank = "/nonexistent/bank.json"; });
    bad([](PipelineConfig& c) { c.expressions.clear(); });
    bad([](PipelineConfig& c) { c.encoder.kind = "clip"; });
}

TEST(Config, AdapterSearchPath) {
    TempDir tmp("adapter");
    fs::create_directories(tmp.path() / "lib/enc");
    fs::create_directories(tmp.path() / "base");
    const ScopedEnv env(kAdapterPathEnv, "/nonexistent:" + (tmp.path() / "lib").string());
    EXPECT_EQ(resolve_adapter_path("enc", tmp.path() / "base"), tmp.path() / "lib/enc");
    // A path that exists relative to the config wins.
    fs::create_directories(tmp.path() / "base/enc");
    EXPECT_EQ(resolve_adapter_path("enc", tmp.path() / "base"), tmp.path() / "base/enc");
    const auto cfg = config_from_json({{"encoder", {{"kind", "tensor-file"}, {"path", "enc"}}}}, tmp.path() / "x");
    EXPECT_EQ(cfg.encoder.path, tmp.path() / "lib/enc");
}

// --- worker pool ------------------------------------------------------------

TEST(RunIndexed, EveryIndexOnceErrorsByIndex) {
    for (int workers : {1, 3, 16}) {
        std::vector<std::atomic<int>> hits(40);
        const auto errs = run_indexed(40, workers, [&](std::size_t i) {
            hits[i]++;
            if (i % 7 == 3) throw InvalidArgument("bad " + std::to_string(i));
        });
        ASSERT_EQ(errs.size(), 40u);
        for (std::size_t i = 0; i < 40; ++i) {
            EXPECT_EQ(hits[i].load(), 1);
            if (i % 7 == 3) {
                ASSERT_TRUE(errs[i].has_value());
                EXPECT_NE(errs[i]->find("bad " + std::to_string(i)), std::string::npos);
            } else {
                EXPECT_FALSE(errs[i].has_value());
            }
        }
    }
    EXPECT_TRUE(run_indexed(0, 4, [](std::size_t) {}).empty());
}

// --- OVSS -------------------------------------------------------------------

TEST(OvssRun, SyntheticDatasetIsPerfect) {
    TempDir tmp("ovss");
    const auto d = make_dataset(tmp.path());
    const auto s = cmd_ovss(d.cfg);
    EXPECT_TRUE(s.failures.empty()) << s.failures.front();
    EXPECT_EQ(s.exit_code(), 0);
    EXPECT_EQ(s.items, 2u);
    EXPECT_DOUBLE_EQ(overall(s, "ovss"), 1.0);
    for (const auto& id : d.ds.image_ids) {
        EXPECT_TRUE(fs::exists(d.cfg.out / "ovss" / (id + ".json")));
        EXPECT_TRUE(fs::exists(d.cfg.out / "ovss" / (id + "_labels.pgm")));
    }
    EXPECT_TRUE(fs::exists(d.cfg.out / "manifest.json"));
    EXPECT_TRUE(fs::exists(d.cfg.out / "summary.json"));
    EXPECT_TRUE(fs::exists(d.cfg.out / "eval_report.json"));

    // The distractor proposal is background; the labelled masks are the GT shapes.
    const auto rec = read_json_file(d.cfg.out / "ovss/harbour_a.json");
    EXPECT_EQ(rec["proposals"].size(), 4u);
    EXPECT_EQ(rec["masks"].size(), 3u);
    std::multiset<std::string> classes;
    for (const auto& m : rec["masks"]) classes.insert(m["class"].get<std::string>());
    EXPECT_EQ(classes, (std::multiset<std::string>{"ship", "ship", "storage tank"}));

    const auto labels = read_pgm16(d.cfg.out / "ovss/harbour_a_labels.pgm");
    EXPECT_EQ(labels.rows(), 48);
    EXPECT_EQ(labels(0, 0), 0);  // background is written as label 0
}

TEST(OvssRun, EmptyProposalFileYieldsEmptyResultAndRunContinues) {
    TempDir tmp("ovss_empty");
    const auto d = make_dataset(tmp.path());
    write_proposals(tmp.path() / "data/proposals/sports_b.json", MaskSet("sports_b", {64, 64}));
    const auto s = cmd_ovss(d.cfg);
    EXPECT_EQ(s.exit_code(), 0);
    const auto rec = read_json_file(d.cfg.out / "ovss/sports_b.json");
    EXPECT_TRUE(rec["masks"].empty());
    EXPECT_TRUE(rec["proposals"].empty());
    EXPECT_EQ(read_json_file(d.cfg.out / "ovss/harbour_a.json")["masks"].size(), 3u);
    const auto labels = read_pgm16(d.cfg.out / "ovss/sports_b_labels.pgm");
    EXPECT_TRUE((labels.array() == 0).all());
}

TEST(OvssRun, CorruptProposalFileIsAPerItemFailure) {
    TempDir tmp("ovss_corrupt");
    const auto d = make_dataset(tmp.path());
    std::ofstream(tmp.path() / "data/proposals/sports_b.json", std::ios::trunc) << "{not json";
    const auto s = cmd_ovss(d.cfg);
    EXPECT_EQ(s.exit_code(), 1);
    ASSERT_FALSE(s.failures.empty());
    EXPECT_NE(s.failures.front().find("sports_b"), std::string::npos);
    EXPECT_TRUE(fs::exists(d.cfg.out / "ovss/harbour_a.json"));
}

TEST(OvssRun, CropVariantOnlyChangesProvenance) {
    TempDir tmp("ovss_crop");
    auto d = make_dataset(tmp.path());
    auto strip = [](nlohmann::json rec) {
        for (auto& m : rec["masks"]) m.erase("crop");
        return rec;
    };
    std::map<std::string, nlohmann::json> first;
    for (CropVariant v : {CropVariant::BBMask, CropVariant::MBRBuffer}) {
        PipelineConfig c = d.cfg;
        c.crop.variant = v;
        c.out = tmp.path() / std::string(to_string(v));
        ASSERT_EQ(cmd_ovss(c).exit_code(), 0);
        for (const auto& id : d.ds.image_ids) {
            const auto rec = read_json_file(c.out / "ovss" / (id + ".json"));
            EXPECT_EQ(rec["masks"][0]["crop"]["variant"], std::string(to_string(v)));
            if (first.contains(id)) EXPECT_EQ(strip(rec), strip(first[id]));
            else first[id] = rec;
        }
    }
}

TEST(OvssRun, WorkerCountDoesNotChangeOutput) {
    TempDir tmp("ovss_workers");
    auto d = make_dataset(tmp.path());
    PipelineConfig one = d.cfg, four = d.cfg;
    one.out = tmp.path() / "w1";
    four.out = tmp.path() / "w4";
    four.workers = 4;
    ASSERT_EQ(cmd_ovss(one).exit_code(), 0);
    ASSERT_EQ(cmd_ovss(four).exit_code(), 0);
    EXPECT_EQ(tree(one.out), tree(four.out));
}

TEST(OvssRun, ManifestReproducesRun) {
    TempDir tmp("ovss_manifest");
    auto d = make_dataset(tmp.path());
    d.cfg.crop.variant = CropVariant::MBR;
    ASSERT_EQ(cmd_ovss(d.cfg).exit_code(), 0);
    PipelineConfig again = load_config(d.cfg.out / "manifest.json");
    again.out = tmp.path() / "again";
    ASSERT_EQ(cmd_ovss(again).exit_code(), 0);
    EXPECT_EQ(tree(d.cfg.out), tree(again.out));
}

// --- RES --------------------------------------------------------------------

TEST(ResRun, SelectsTheGroundTruthShape) {
    TempDir tmp("res");
    const auto d = make_dataset(tmp.path());
    const auto s = cmd_res(d.cfg);
    EXPECT_TRUE(s.failures.empty()) << s.failures.front();
    EXPECT_EQ(s.items, 5u);
    EXPECT_DOUBLE_EQ(overall(s, "res"), 1.0);

    const auto rec = read_json_file(d.cfg.out / "res/harbour_a_0.json");
    EXPECT_EQ(rec["category"], "ship");
    EXPECT_EQ(rec["path"], "consistent");
    EXPECT_EQ(rec["label"], "ship");
    EXPECT_EQ(rec["decoupled"]["cls"], nlohmann::json::array({"ship"}));
    EXPECT_EQ(rec["gradcam"], "cross");
    // The red ship is shape 0; scenes assign proposal ids in shape order.
    const auto scene = synth_scene(fixture_scenes()[0]);
    EXPECT_EQ(rec["selected"], scene.shape_ids[0]);
}

TEST(ResRun, SingleScaleAlsoRuns) {
    TempDir tmp("res_single");
    auto d = make_dataset(tmp.path());
    d.cfg.saliency.mode = GradCamMode::Single;
    const auto s = cmd_res(d.cfg);
    EXPECT_EQ(s.exit_code(), 0);
    EXPECT_EQ(read_json_file(d.cfg.out / "res/sports_b_0.json")["gradcam"], "single");
}

TEST(ResRun, HeatmapModeWhenSelectionIsOff) {
    TempDir tmp("res_heatmap");
    auto d = make_dataset(tmp.path());
    d.cfg.saliency.selection = false;
    const auto s = cmd_res(d.cfg);
    EXPECT_EQ(s.exit_code(), 0);
    for (const auto& e : read_annotations(d.cfg.expressions).expressions) {
        const auto rec = read_json_file(d.cfg.out / "res" / (e.id + ".json"));
        EXPECT_EQ(rec["path"], "heatmap");
        EXPECT_TRUE(rec["selected"].is_null());
        EXPECT_FALSE(rec["rle"].empty());
    }
}

TEST(ResRun, UnmatchedExpressionIsAFailure) {
    TempDir tmp("res_unmatched");
    auto d = make_dataset(tmp.path());
    Annotations a = read_annotations(d.cfg.expressions);
    a.expressions.push_back({"odd", "harbour_a", "a purple giraffe", std::nullopt, std::nullopt});
    write_annotations(tmp.path() / "exprs.json", a);
    d.cfg.expressions = tmp.path() / "exprs.json";
    const auto s = cmd_res(d.cfg);
    EXPECT_EQ(s.exit_code(), 1);
    ASSERT_EQ(s.failures.size(), 1u);
    EXPECT_NE(s.failures[0].find("odd"), std::string::npos);
    EXPECT_TRUE(fs::exists(d.cfg.out / "res/harbour_a_0.json"));
}

TEST(ResRun, WorkerCountDoesNotChangeOutput) {
    TempDir tmp("res_workers");
    auto d = make_dataset(tmp.path());
    PipelineConfig one = d.cfg, four = d.cfg;
    one.out = tmp.path() / "w1";
    four.out = tmp.path() / "w4";
    four.workers = 4;
    one.saliency.debug = four.saliency.debug = true;
    ASSERT_EQ(cmd_res(one).exit_code(), 0);
    ASSERT_EQ(cmd_res(four).exit_code(), 0);
    EXPECT_EQ(tree(one.out), tree(four.out));
    EXPECT_TRUE(fs::exists(one.out / "saliency/harbour_a_0.pgm"));
}

TEST(Engine, MockEncodersForcedAlignment) {
    TempDir tmp("engine_mock");
    const auto d = make_dataset(tmp.path());
    PipelineConfig cfg = d.cfg;
    cfg.encoder = {"mock", {}, 8};
    cfg.saliency.kind = "mock";
    cfg.saliency.path.clear();

    const auto scenes = fixture_scenes();
    const SceneSpec& spec = scenes[0];
    const auto scene = synth_scene(spec);
    const ClassTextBank bank = isaid().with_augment({});
    const ClassId ship = bank.find("ship")->id, tank = bank.find("storage tank")->id;
    auto axis = [](Index k) { return EmbeddingVector::Unit(8, k); };
    auto slot = [&](ClassId c) -> Index { return c == kBackground ? 7 : c == ship ? 0 : c == tank ? 1 : 2 + c % 5; };

    auto enc = std::make_shared<MockEmbeddingEncoder>(8);
    for (const auto& p : render_prompts(bank)) enc->add_text(p.text, axis(slot(p.class_id)));
    const std::vector<ClassId> truth{ship, ship, tank};
    for (std::size_t i = 0; i < spec.shapes.size(); ++i) {
        const auto* p = scene.proposals.find(scene.shape_ids[i]);
        enc->add_image(crop_patch(scene.image, *p, cfg.crop), axis(slot(truth[i])));
    }
    for (MaskId id : scene.distractor_ids) {
        enc->add_image(crop_patch(scene.image, *scene.proposals.find(id), cfg.crop), axis(7));
    }

    auto sal = std::make_shared<MockSaliencyEncoder>();
    const ImageSize sz = spec.size;
    MapGrid cls = MapGrid::Zero(sz.height, sz.width), mod = MapGrid::Zero(sz.height, sz.width);
    cls.block(6, 4, 8, 20).setConstant(0.5);
    cls.block(30, 38, 8, 20).setConstant(0.5);
    mod.block(8, 10, 4, 8).setConstant(1.0);
    const MapGrid ones = MapGrid::Ones(sz.height, sz.width);
    sal->set_token("ship", cls, ones);
    for (const char* t : {"red", "left"}) sal->set_token(t, mod, ones);

    const Engine engine(cfg, enc, sal);
    const auto o = engine.run_ovss(spec.image_id, scene.image);
    for (std::size_t i = 0; i < truth.size(); ++i) EXPECT_EQ(o.result.label_of(scene.shape_ids[i]), truth[i]);
    EXPECT_EQ(o.result.label_of(scene.distractor_ids[0]), kBackground);

    const ExpressionRecord rec{"e", spec.image_id, "the red ship on the left", "ship", std::nullopt};
    const auto r = engine.run_res(rec, o);
    ASSERT_TRUE(r.selection.selection.mask_id.has_value());
    EXPECT_EQ(*r.selection.selection.mask_id, scene.shape_ids[0]);
    EXPECT_EQ(r.selection.selection.path, "consistent");
    EXPECT_TRUE((r.mask == scene.gt[0].mask).all());
}

// --- eval and overlay ---------------------------------------------------------

TEST(Eval, SelfEvaluationAndSplits) {
    TempDir tmp("eval");
    const auto d = make_dataset(tmp.path());
    ASSERT_EQ(cmd_ovss(d.cfg).exit_code(), 0);
    const auto s = cmd_eval(d.cfg.out, d.cfg.gt, {}, tmp.path() / "ev");
    EXPECT_EQ(s.exit_code(), 0);
    const auto j = read_json_file(tmp.path() / "ev/eval_report.json");
    EXPECT_DOUBLE_EQ(j["ovss"]["image_level"]["overall_miou"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(j["ovss"]["proposal"]["overall_miou"].get<double>(), 1.0);
    const auto& splits = j["ovss"]["image_level"]["splits"];
    EXPECT_EQ(splits["seen_categories"].size(), 11u);
    EXPECT_EQ(splits["unseen_categories"].size(), 4u);
    // roundabout is held out and present in the scenes.
    EXPECT_DOUBLE_EQ(splits["unseen"].get<double>(), 1.0);
    EXPECT_TRUE(fs::exists(tmp.path() / "ev/eval_report.txt"));
}

TEST(Eval, MissingResultIsAFailure) {
    TempDir tmp("eval_missing");
    const auto d = make_dataset(tmp.path());
    ASSERT_EQ(cmd_ovss(d.cfg).exit_code(), 0);
    fs::remove(d.cfg.out / "ovss/sports_b.json");
    const auto s = cmd_eval(d.cfg.out, d.cfg.gt, {}, tmp.path() / "ev");
    EXPECT_EQ(s.exit_code(), 1);
    ASSERT_EQ(s.failures.size(), 1u);
    EXPECT_NE(s.failures[0].find("sports_b"), std::string::npos);
    EXPECT_THROW(cmd_eval(tmp.path() / "nope", d.cfg.gt, {}, tmp.path() / "ev"), ConfigError);
}

TEST(Overlay, PanelsAndLegend) {
    Image img(4, 5, 1);
    img.channels[0].setConstant(100.0f);
    MaskSet props("im", {4, 5});
    props.add(MaskProposal(0, rect_grid({4, 5}, 0, 0, 2, 2)));

    std::vector<OverlayLegendEntry> legend;
    const Image empty = render_overlay(img, MaskSet("im", {4, 5}), {}, &legend);
    EXPECT_EQ(empty.height(), 4);
    EXPECT_EQ(empty.width(), 15);
    EXPECT_TRUE(legend.empty());
    for (const auto& ch : empty.channels) EXPECT_TRUE((ch.array() == 100.0f).all());

    const BinaryGrid m = rect_grid({4, 5}, 1, 1, 2, 3);
    const Image one = render_overlay(img, props, {{m, "ship"}}, &legend);
    ASSERT_EQ(legend.size(), 1u);
    EXPECT_EQ(legend[0].label, "ship");
    EXPECT_EQ(legend[0].color, palette_color("ship"));
    EXPECT_GT(one.height(), 4);
    const auto c = palette_color("ship");
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_FLOAT_EQ(one.channels[k](1, 10 + 1), std::round(0.5f * 100.0f + 0.5f * c[k]));
        EXPECT_FLOAT_EQ(one.channels[k](0, 10 + 0), 100.0f);  // outside the prediction
        EXPECT_FLOAT_EQ(one.channels[k](1, 1), 100.0f);       // input panel untouched
    }
    EXPECT_EQ(palette_color("ship"), palette_color("ship"));
    EXPECT_NE(palette_color("ship"), palette_color("harbor"));
}

TEST(Overlay, RunWritesOnePanelPerRecord) {
    TempDir tmp("overlay");
    const auto d = make_dataset(tmp.path());
    ASSERT_EQ(cmd_ovss(d.cfg).exit_code(), 0);
    const auto s = cmd_overlay(d.cfg.out, d.cfg.images, tmp.path() / "ov");
    EXPECT_EQ(s.exit_code(), 0);
    EXPECT_EQ(s.items, 2u);
    const Image im = read_image(tmp.path() / "ov/overlay/harbour_a.ppm");
    EXPECT_EQ(im.width(), 3 * 64);
    const auto legend = read_json_file(tmp.path() / "ov/overlay/harbour_a_legend.json");
    EXPECT_EQ(legend["legend"].size(), 2u);
}

// --- ablations --------------------------------------------------------------

TEST(Ablate, PresetExpansion) {
    PipelineConfig base;
    base.out = "/o";
    EXPECT_EQ(expand_preset("table2", base).size(), all_crop_variants().size());
    const auto t3 = expand_preset("table3", base);
    ASSERT_EQ(t3.size(), 4u);
    EXPECT_EQ(t3[0].second.out, fs::path("/o/table3") / t3[0].first);
    const auto t4 = expand_preset("table4", base);
    ASSERT_EQ(t4.size(), 5u);
    EXPECT_EQ(t4.front().first, "none");
    EXPECT_FALSE(t4.front().second.augment.synonyms);
    EXPECT_TRUE(t4.back().second.augment.descriptions);
    const auto t5 = expand_preset("table5", base);
    ASSERT_EQ(t5.size(), 4u);
    EXPECT_EQ(t5[0].first, "single_heatmap");
    EXPECT_EQ(t5[3].first, "cross_selection");
    EXPECT_THROW(expand_preset("table9", base), ConfigError);
}

TEST(Ablate, Table5RunsAllCells) {
    TempDir tmp("ablate");
    auto d = make_dataset(tmp.path());
    const auto s = cmd_ablate("table5", d.cfg);
    EXPECT_EQ(s.exit_code(), 0);
    const auto summary = read_json_file(d.cfg.out / "table5/summary.json");
    ASSERT_EQ(summary["runs"].size(), 4u);
    EXPECT_DOUBLE_EQ(summary["runs"][3]["miou"].get<double>(), 1.0);
    EXPECT_TRUE(fs::exists(d.cfg.out / "table5/summary.txt"));
}

// --- command line -------------------------------------------------------------

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + RSSEG_CLI + "\" " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
    TempDir tmp("cli");
    const auto d = make_dataset(tmp.path());
    const std::string cfg = "--config \"" + d.ds.config.string() + "\"";
    const std::string out = " --out \"" + (tmp.path() / "cli_out").string() + "\"";
    EXPECT_EQ(run_cli(cfg + out + " --workers 2 ovss run"), 0);
    EXPECT_TRUE(fs::exists(tmp.path() / "cli_out/ovss/harbour_a.json"));
    EXPECT_EQ(run_cli(cfg + out + " res run --gradcam single"), 0);
    EXPECT_EQ(run_cli(out + " eval --results \"" + (tmp.path() / "cli_out").string() + "\" --gt \"" +
                      d.cfg.gt.string() + "\""),
              0);
    EXPECT_EQ(run_cli("bank validate \"" + (kData / "banks/isaid.json").string() + "\""), 0);
    EXPECT_NE(run_cli(cfg + out + " ablate table9"), 0);
    EXPECT_NE(run_cli("--config /nonexistent.json ovss run"), 0);
    EXPECT_NE(run_cli(cfg + out + " --workers 0 ovss run"), 0);

    // A corrupt proposal file: the run completes but exits nonzero.
    std::ofstream(tmp.path() / "data/proposals/sports_b.json", std::ios::trunc) << "[]";
    EXPECT_EQ(run_cli(cfg + out + " ovss run"), 1);
}
