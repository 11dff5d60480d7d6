#include "rsseg/image_io.hpp"
#include "rsseg/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <set>

namespace fs = std::filesystem;
using namespace rsseg;

namespace {

struct Globals {
    std::string config;
    std::optional<int> workers;
    std::string out;
    std::optional<std::uint64_t> seed;
};

struct RunOverrides {
    std::string bank, images, gt, expressions, proposals, crop, template_text, gradcam, fallback, encoder, saliency;
    std::optional<double> ratio, tau, theta;
    std::vector<std::string> unseen;
    bool no_selection = false;
    bool debug_saliency = false;
};

PipelineConfig resolve_config(const Globals& g, const RunOverrides& o) {
    PipelineConfig cfg = g.config.empty() ? config_from_json(nlohmann::json::object(), fs::current_path())
                                          : load_config(g.config);
    if (!o.bank.empty()) cfg.bank = fs::absolute(o.bank);
    if (!o.images.empty()) cfg.images = fs::absolute(o.images);
    if (!o.gt.empty()) cfg.gt = fs::absolute(o.gt);
    if (!o.expressions.empty()) cfg.expressions = fs::absolute(o.expressions);
    if (!o.proposals.empty()) cfg.proposals = ProposalSource::file(fs::absolute(o.proposals));
    if (!o.crop.empty()) cfg.crop.variant = parse_crop_variant(o.crop);
    if (o.ratio) cfg.crop.ratio = *o.ratio;
    if (o.tau) cfg.tau = *o.tau;
    if (o.theta) cfg.saliency.theta = *o.theta;
    if (!o.template_text.empty()) cfg.template_text = o.template_text;
    if (!o.gradcam.empty()) cfg.saliency.mode = parse_gradcam_mode(o.gradcam);
    if (!o.fallback.empty()) cfg.fallback = FallbackPolicy::parse(o.fallback);
    if (!o.encoder.empty()) {
        cfg.encoder.kind = "tensor-file";
        cfg.encoder.path = resolve_adapter_path(o.encoder, fs::current_path());
    }
    if (!o.saliency.empty()) {
        cfg.saliency.kind = "tensor-file";
        cfg.saliency.path = resolve_adapter_path(o.saliency, fs::current_path());
    }
    if (!o.unseen.empty()) cfg.unseen = o.unseen;
    if (o.no_selection) cfg.saliency.selection = false;
    if (o.debug_saliency) cfg.saliency.debug = true;
    if (!g.out.empty()) cfg.out = fs::absolute(g.out);
    if (g.workers) cfg.workers = *g.workers;
    if (g.seed) {
        cfg.seed = *g.seed;
        cfg.proposals.seed = *g.seed;
    }
    return cfg;
}

void add_run_options(CLI::App* cmd, RunOverrides& o, bool res) {
    cmd->add_option("--bank", o.bank, "Class text bank (JSON)");
    cmd->add_option("--images", o.images, "Directory of <image_id>.ppm/.pgm");
    cmd->add_option("--proposals", o.proposals, "Proposal container or directory");
    cmd->add_option("--gt", o.gt, "Annotations for evaluation");
    cmd->add_option("--encoder", o.encoder, "Tensor-file encoder directory");
    cmd->add_option("--crop", o.crop, "mask_only|bb|bb_mask|bb_buffer|mbr|mbr_buffer");
    cmd->add_option("--ratio", o.ratio, "Crop buffer ratio");
    cmd->add_option("--tau", o.tau, "Softmax temperature");
    cmd->add_option("--template", o.template_text, "Template preset name or text with {CLASS}");
    cmd->add_option("--unseen", o.unseen, "Extra held-out category names")->delimiter(',');
    if (res) {
        cmd->add_option("--expressions", o.expressions, "Expression records");
        cmd->add_option("--saliency", o.saliency, "Tensor-file saliency directory");
        cmd->add_option("--gradcam", o.gradcam, "single|cross");
        cmd->add_option("--theta", o.theta, "Peak threshold relative to the map maximum");
        cmd->add_option("--fallback", o.fallback, "a,b | a | b | none");
        cmd->add_flag("--no-selection", o.no_selection, "Export the thresholded saliency map instead");
        cmd->add_flag("--debug-saliency", o.debug_saliency, "Write L_cs maps under <out>/saliency");
    }
}

int report(const RunSummary& s) {
    std::cout << s.command << ": " << s.items << " items, " << s.failures.size() << " failed\n";
    for (const auto& f : s.failures) std::cerr << "  " << f << "\n";
    return s.exit_code();
}

void write_json(const fs::path& p, const nlohmann::json& j) {
    std::ofstream os(p, std::ios::trunc);
    if (!os) throw FormatError("cannot write " + p.string());
    os << j.dump(2) << "\n";
}

std::vector<fs::path> container_files(const fs::path& src) {
    if (!fs::is_directory(src)) return {src};
    std::set<fs::path> found;
    for (const auto& e : fs::directory_iterator(src)) {
        if (e.path().extension() == ".json") found.insert(e.path());
    }
    return {found.begin(), found.end()};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Training-free open-vocabulary and referring segmentation for remote-sensing imagery"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(library_version()));

    Globals g;
    app.add_option("--config", g.config, "Pipeline config or a run manifest");
    app.add_option("--workers", g.workers, "Worker threads")->check(CLI::Range(1, 256));
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--seed", g.seed, "Seed for synthetic sources");

    int code = 0;

    // bank
    auto* bank = app.add_subcommand("bank", "Build or validate a class text bank");
    bank->require_subcommand(1);
    std::string bank_file, bank_template;
    BankAugment aug;
    bool no_syn = false, no_desc = false, no_bg = false;
    auto* bank_build = bank->add_subcommand("build", "Render prompts and write bank.json + prompts.json");
    bank_build->add_option("bank", bank_file, "Bank JSON")->required();
    bank_build->add_option("--template", bank_template, "Template preset name or text");
    bank_build->add_flag("--no-synonyms", no_syn);
    bank_build->add_flag("--no-descriptions", no_desc);
    bank_build->add_flag("--no-backgrounds", no_bg);
    std::vector<std::string> validate_files;
    auto* bank_validate = bank->add_subcommand("validate", "Check one or more bank files");
    bank_validate->add_option("files", validate_files, "Bank JSON files")->required();

    // proposals
    auto* props = app.add_subcommand("proposals", "Import or synthesise mask proposals");
    props->require_subcommand(1);
    std::string import_src;
    bool import_pgm = false;
    auto* p_import = props->add_subcommand("import", "Validate containers and re-export them");
    p_import->add_option("source", import_src, "Container file or directory")->required();
    p_import->add_flag("--pgm", import_pgm, "Also write one PGM per mask");
    std::string scene_file, synth_bank, layout, synth_id = "synthetic";
    Index synth_h = 0, synth_w = 0;
    auto* p_synth = props->add_subcommand("synth", "Synthetic scenes (dataset) or a tiled proposal layout");
    p_synth->add_option("--scene", scene_file, "Scene spec JSON ({scenes: [...]} or one scene)");
    p_synth->add_option("--bank", synth_bank, "Bank the scene categories come from");
    p_synth->add_option("--layout", layout, "gridRxC or randomN");
    p_synth->add_option("--height", synth_h);
    p_synth->add_option("--width", synth_w);
    p_synth->add_option("--image-id", synth_id);

    // runs
    RunOverrides ovss_o, res_o, ablate_o;
    auto* ovss = app.add_subcommand("ovss", "Open-vocabulary semantic segmentation");
    ovss->require_subcommand(1);
    auto* ovss_run = ovss->add_subcommand("run", "Label every proposal of every image");
    add_run_options(ovss_run, ovss_o, false);
    auto* res = app.add_subcommand("res", "Referring expression segmentation");
    res->require_subcommand(1);
    auto* res_run = res->add_subcommand("run", "Select one proposal per expression");
    add_run_options(res_run, res_o, true);

    std::string results_dir, gt_file, images_dir;
    std::vector<std::string> unseen;
    auto* eval = app.add_subcommand("eval", "Score a results directory");
    eval->add_option("--results", results_dir, "Run output directory")->required();
    eval->add_option("--gt", gt_file, "Annotations")->required();
    eval->add_option("--unseen", unseen, "Extra held-out category names")->delimiter(',');

    auto* overlay = app.add_subcommand("overlay", "Render input / proposals / prediction panels");
    overlay->add_option("--results", results_dir, "Run output directory")->required();
    overlay->add_option("--images", images_dir, "Image directory")->required();

    std::string preset;
    auto* ablate = app.add_subcommand("ablate", "Run an ablation grid");
    ablate->add_option("preset", preset, "table2 | table3 | table4 | table5")->required();
    add_run_options(ablate, ablate_o, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (bank_build->parsed()) {
            ClassTextBank b = build_bank(bank_file);
            if (!bank_template.empty()) {
                std::string t = bank_template;
                for (const auto& p : template_presets()) {
                    if (p.name == t) t = std::string(p.text);
                }
                b = b.with_template(t);
            }
            b = b.with_augment({!no_syn, !no_desc, !no_bg});
            const fs::path out = g.out.empty() ? fs::path(".") : fs::path(g.out);
            fs::create_directories(out);
            write_json(out / "bank.json", bank_to_json(b));
            nlohmann::json pj = nlohmann::json::array();
            for (const auto& e : render_prompts(b)) {
                pj.push_back({{"text", e.text}, {"class", b.name_of(e.class_id)}, {"kind", to_string(e.kind)}});
            }
            write_json(out / "prompts.json", pj);
            std::cout << "bank: " << b.classes().size() << " classes, " << pj.size() << " prompts\n";
        } else if (bank_validate->parsed()) {
            for (const auto& f : validate_files) {
                try {
                    const ClassTextBank b = build_bank(f);
                    std::cout << f << ": ok, " << b.classes().size() << " classes (" << b.unseen_names().size()
                              << " unseen), " << b.backgrounds().size() << " backgrounds, "
                              << render_prompts(b).size() << " prompts\n";
                } catch (const Error& e) {
                    std::cerr << f << ": " << e.what() << "\n";
                    code = 1;
                }
            }
        } else if (p_import->parsed()) {
            const fs::path out = g.out.empty() ? fs::path("proposals_out") : fs::path(g.out);
            fs::create_directories(out / "proposals");
            RejectionLog log;
            RunSummary s;
            s.command = "proposals import";
            for (const auto& f : container_files(import_src)) {
                ++s.items;
                try {
                    const MaskSet set = read_proposals(f, &log);
                    write_proposals(out / "proposals" / (set.image_id() + ".json"), set);
                    if (import_pgm) export_mask_pgms(out / "masks", set);
                } catch (const Error& e) {
                    s.failures.push_back(e.what());
                }
            }
            write_json(out / "rejections.json", log.to_json());
            std::cout << log.size() << " masks rejected\n";
            code = report(s);
        } else if (p_synth->parsed()) {
            const fs::path out = g.out.empty() ? fs::path("synthetic") : fs::path(g.out);
            if (!scene_file.empty()) {
                std::ifstream is(scene_file);
                if (!is) throw ConfigError("cannot read scene spec " + scene_file);
                const nlohmann::json j = nlohmann::json::parse(is);
                std::vector<SceneSpec> scenes;
                if (j.contains("scenes")) {
                    for (const auto& s : j["scenes"]) scenes.push_back(scene_from_json(s));
                } else {
                    scenes.push_back(scene_from_json(j));
                }
                if (g.seed) {
                    for (auto& s : scenes) s.seed = *g.seed;
                }
                fs::path bank_path = synth_bank;
                if (bank_path.empty() && j.contains("bank")) {
                    bank_path = fs::absolute(scene_file).parent_path() / j["bank"].get<std::string>();
                }
                if (bank_path.empty()) throw ConfigError("proposals synth --scene needs --bank or a bank key");
                const SynthDataset ds = write_synth_dataset(scenes, build_bank(bank_path), out);
                std::cout << "synthesised " << ds.image_ids.size() << " images, " << ds.expressions
                          << " expressions; config at " << ds.config.string() << "\n";
            } else if (!layout.empty()) {
                const MaskSet set = synthetic_proposals(synth_id, {synth_h, synth_w}, layout, g.seed.value_or(0));
                fs::create_directories(out);
                write_proposals(out / (synth_id + ".json"), set);
                std::cout << set.size() << " proposals written\n";
            } else {
                throw ConfigError("proposals synth needs --scene or --layout");
            }
        } else if (ovss_run->parsed()) {
            code = report(cmd_ovss(resolve_config(g, ovss_o)));
        } else if (res_run->parsed()) {
            code = report(cmd_res(resolve_config(g, res_o)));
        } else if (eval->parsed()) {
            const fs::path out = g.out.empty() ? fs::path(results_dir) : fs::path(g.out);
            const RunSummary s = cmd_eval(results_dir, gt_file, unseen, out);
            std::ifstream txt(out / "eval_report.txt");
            std::cout << txt.rdbuf();
            code = report(s);
        } else if (overlay->parsed()) {
            const fs::path out = g.out.empty() ? fs::path(results_dir) : fs::path(g.out);
            code = report(cmd_overlay(results_dir, images_dir, out));
        } else if (ablate->parsed()) {
            const RunSummary s = cmd_ablate(preset, resolve_config(g, ablate_o));
            std::ifstream txt(resolve_config(g, ablate_o).out / preset / "summary.txt");
            std::cout << txt.rdbuf();
            code = report(s);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return code;
}
