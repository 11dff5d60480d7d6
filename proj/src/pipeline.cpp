#include "rsseg/pipeline.hpp"

#include "rsseg/image_io.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace rsseg {

namespace fs = std::filesystem;

std::vector<std::optional<std::string>> run_indexed(std::size_t n, int workers,
                                                    const std::function<void(std::size_t)>& fn) {
    std::vector<std::optional<std::string>> errors(n);
    std::atomic<std::size_t> next{0};
    auto loop = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const auto n_threads = static_cast<std::size_t>(std::clamp(workers, 1, 256));
    if (n_threads == 1 || n <= 1) {
        loop();
        return errors;
    }
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(n_threads, n); ++t) pool.emplace_back(loop);
    pool.clear();
    return errors;
}

std::shared_ptr<const EmbeddingEncoder> make_encoder(const EncoderSpec& spec) {
    if (spec.kind == "mock") return std::make_shared<MockEmbeddingEncoder>(spec.dim);
    if (spec.kind == "tensor-file") return std::make_shared<TensorFileEncoder>(spec.path);
    throw ConfigError("unknown encoder kind '" + spec.kind + "'");
}

std::shared_ptr<const SaliencyEncoder> make_saliency(const SaliencySpec& spec) {
    if (spec.kind == "mock") return std::make_shared<MockSaliencyEncoder>();
    if (spec.kind == "tensor-file") return std::make_shared<TensorFileSaliency>(spec.path);
    throw ConfigError("unknown saliency kind '" + spec.kind + "'");
}

namespace {

ClassTextBank load_bank(const PipelineConfig& cfg) {
    ClassTextBank bank = build_bank(cfg.bank);
    if (cfg.template_text) {
        std::string text = *cfg.template_text;
        for (const auto& p : template_presets()) {
            if (p.name == text) text = std::string(p.text);
        }
        bank = bank.with_template(text);
    }
    return bank;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot write " + path.string());
    os << text;
    if (!os) throw FormatError("short write to " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot read " + path.string());
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

nlohmann::json crop_provenance(const MaskProposal& m, const CropConfig& crop) {
    nlohmann::json j{{"variant", to_string(crop.variant)}};
    auto rect_json = [](const PixelRect& r) { return nlohmann::json{r.row0, r.col0, r.rows, r.cols}; };
    auto box_json = [](const OrientedBox& b) {
        return nlohmann::json{{"cx", b.center.x()}, {"cy", b.center.y()}, {"width", b.width}, {"height", b.height},
                              {"angle", b.angle_deg}};
    };
    switch (crop.variant) {
        case CropVariant::MaskOnly:
            j["rect"] = rect_json({0, 0, m.grid().rows(), m.grid().cols()});
            break;
        case CropVariant::BB:
        case CropVariant::BBMask:
            j["rect"] = rect_json(bounding_rect(m.grid()));
            break;
        case CropVariant::BBBuffer:
            j["rect"] = rect_json(expand_rect(bounding_rect(m.grid()), crop.ratio, m.size()));
            break;
        case CropVariant::MBR:
            j["box"] = box_json(compute_mbr(m));
            break;
        case CropVariant::MBRBuffer:
            j["box"] = box_json(expand_box(compute_mbr(m), crop.ratio));
            break;
    }
    return j;
}

std::vector<std::string> token_texts(const std::vector<TaggedToken>& toks) {
    std::vector<std::string> out;
    for (const auto& t : toks) out.push_back(t.text);
    return out;
}

std::vector<fs::path> json_files(const fs::path& dir) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".json") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

BinaryGrid decode_record_mask(const nlohmann::json& rec, const nlohmann::json& rle) {
    return rle_decode(rle.get<std::vector<std::uint64_t>>(),
                      {rec.at("height").get<Index>(), rec.at("width").get<Index>()});
}

struct Taxonomy {
    std::vector<std::string> names;
    std::vector<std::string> unseen;
};

EvalReport with_splits(EvalReport r, const Taxonomy& tax) {
    std::set<std::string> all(r.taxonomy.begin(), r.taxonomy.end());
    all.insert(tax.names.begin(), tax.names.end());
    r.taxonomy.assign(all.begin(), all.end());
    return split_report(std::move(r), tax.unseen);
}

struct EvalOutcome {
    nlohmann::json json = nlohmann::json::object();
    std::string text;
    std::vector<std::string> failures;
};

struct EvalScope {
    bool ovss = true;
    bool res = true;
};

EvalOutcome evaluate_results(const fs::path& results, const Annotations& gt, const Taxonomy& tax, EvalScope scope = {}) {
    EvalOutcome out;
    const auto ovss_files = scope.ovss ? json_files(results / "ovss") : std::vector<fs::path>{};
    if (!ovss_files.empty()) {
        CategoryMasks preds, truth;
        std::map<std::string, MaskSet> proposals;
        std::set<std::string> seen_ids;
        for (const auto& f : ovss_files) {
            const auto rec = read_json(f);
            const auto id = rec.at("image_id").get<std::string>();
            seen_ids.insert(id);
            if (!gt.find_image(id)) {
                out.failures.push_back("result for image " + id + " has no ground truth");
                continue;
            }
            const ImageSize size{rec.at("height").get<Index>(), rec.at("width").get<Index>()};
            MaskSet set(id, size);
            for (const auto& p : rec.at("proposals")) {
                set.add(MaskProposal(p.at("id").get<MaskId>(), decode_record_mask(rec, p.at("rle"))));
            }
            proposals.emplace(id, std::move(set));
            for (const auto& m : rec.at("masks")) {
                preds[{id, m.at("class").get<std::string>()}].push_back(decode_record_mask(rec, m.at("rle")));
            }
        }
        std::vector<GtInstance> instances;
        for (const auto& g : gt.images) {
            if (!seen_ids.contains(g.image_id)) out.failures.push_back("no result for image " + g.image_id);
            for (const auto& inst : g.instances) {
                truth[{g.image_id, inst.category}].push_back(inst.mask);
                instances.push_back(inst);
            }
        }
        const EvalReport il = with_splits(image_level_miou(preds, truth), tax);
        const EvalReport pr = with_splits(proposal_miou(instances, proposals), tax);
        out.json["ovss"] = {{"image_level", report_to_json(il)}, {"proposal", report_to_json(pr)}};
        out.text += "== OVSS, image-level ==\n" + report_table(il) + "\n== OVSS, proposal ==\n" + report_table(pr);
    }

    const auto res_files = scope.res ? json_files(results / "res") : std::vector<fs::path>{};
    if (!res_files.empty()) {
        std::map<std::string, const ExpressionRecord*> by_id;
        for (const auto& e : gt.expressions) {
            if (e.mask) by_id[e.id] = &e;
        }
        CategoryMasks preds, truth;
        std::set<std::string> seen_ids;
        for (const auto& f : res_files) {
            const auto rec = read_json(f);
            const auto id = rec.at("id").get<std::string>();
            seen_ids.insert(id);
            const auto it = by_id.find(id);
            if (it == by_id.end()) {
                out.failures.push_back("result for expression " + id + " has no ground truth");
                continue;
            }
            // Filed under the GT category so a mislabelled selection still
            // scores against its own expression.
            const ExpressionRecord& e = *it->second;
            const std::string cat = e.category ? *e.category : rec.value("category", std::string("unknown"));
            BinaryGrid m = decode_record_mask(rec, rec.at("rle"));
            if (m.any()) preds[{id, cat}].push_back(std::move(m));
        }
        for (const auto& [id, e] : by_id) {
            if (!seen_ids.contains(id)) out.failures.push_back("no result for expression " + id);
            const std::string cat = e->category ? *e->category : std::string("unknown");
            truth[{id, cat}].push_back(*e->mask);
        }
        const EvalReport il = with_splits(image_level_miou(preds, truth), tax);
        out.json["res"] = {{"image_level", report_to_json(il)}};
        out.text += "== RES, image-level ==\n" + report_table(il);
    }
    return out;
}

Taxonomy taxonomy_of(const ClassTextBank& bank, const std::vector<std::string>& extra_unseen) {
    Taxonomy t;
    t.names = bank.class_names();
    t.unseen = bank.unseen_names();
    for (const auto& u : extra_unseen) {
        if (std::find(t.unseen.begin(), t.unseen.end(), u) == t.unseen.end()) t.unseen.push_back(u);
    }
    return t;
}

void write_eval(const fs::path& out, const EvalOutcome& e) {
    write_text(out / "eval_report.json", e.json.dump(2) + "\n");
    write_text(out / "eval_report.txt", e.text);
}

void append_failures(RunSummary& s, const std::vector<std::string>& more) {
    for (const auto& f : more) {
        if (std::find(s.failures.begin(), s.failures.end(), f) == s.failures.end()) s.failures.push_back(f);
    }
}

void finish_summary(const fs::path& out, const RunSummary& s) {
    write_text(out / "summary.json", s.to_json().dump(2) + "\n");
}

}  // namespace

// ---------------------------------------------------------------------------

Engine::Engine(const PipelineConfig& cfg) : Engine(cfg, make_encoder(cfg.encoder), make_saliency(cfg.saliency)) {}

Engine::Engine(const PipelineConfig& cfg, std::shared_ptr<const EmbeddingEncoder> encoder,
               std::shared_ptr<const SaliencyEncoder> saliency)
    : cfg_(cfg), bank_(load_bank(cfg)), encoder_(std::move(encoder)), saliency_(std::move(saliency)) {
    init();
}

void Engine::init() {
    // The decoupling vocabulary always carries synonyms; augmentation only
    // changes which prompts are classified against.
    vocab_ = bank_.vocabulary();
    bank_ = bank_.with_augment(cfg_.augment);
    prompts_ = render_prompts(bank_);
    text_feats_ = embed_texts(prompts_, *encoder_);
}

Engine::OvssOutput Engine::run_ovss(const std::string& image_id) const {
    return run_ovss(image_id, read_image(image_path(cfg_.images, image_id)));
}

Engine::OvssOutput Engine::run_ovss(const std::string& image_id, const Image& image) const {
    OvssOutput o;
    o.image = image;
    RejectionLog log;
    o.proposals = load_proposals(cfg_.proposals, image_id, &log, &o.image);
    o.rejected = log.entries();
    if (o.proposals.image_size() != image.size()) {
        throw ShapeMismatch("image " + image_id + ": proposals are " + to_string(o.proposals.image_size()) +
                            ", image is " + to_string(image.size()));
    }
    const auto feats = extract_local_features(o.image, o.proposals, cfg_.crop, *encoder_);
    const auto labels = classify_masks(o.proposals, feats, bank_, prompts_, text_feats_, cfg_.tau);
    o.result = assemble_ovss(o.proposals, labels);
    return o;
}

Engine::ResOutput Engine::run_res(const ExpressionRecord& rec, const OvssOutput& ovss) const {
    ResOutput r;
    r.expr = decouple_text(rec.text, tagger_, vocab_);
    if (!r.expr.vocab_class) {
        throw InvalidArgument("expression " + rec.id + ": no bank class matches \"" + rec.text + "\"");
    }
    r.targets = {*r.expr.vocab_class};
    const auto tokens = token_texts(r.expr.ref_tokens);
    const TokenCams cams = token_saliency(ovss.image, tokens, *saliency_, {rec.image_id, rec.id});
    FusionConfig fc;
    fc.mode = cfg_.saliency.mode;
    fc.normalize = cfg_.saliency.normalize;
    fc.theta = cfg_.saliency.theta;
    fc.smooth_radius = cfg_.saliency.smooth;
    r.maps = cross_scale_gradcam(cams, r.expr, fc);
    r.peaks = find_local_maxima(r.maps.l_cs, cfg_.saliency.theta, cfg_.saliency.smooth);
    if (cfg_.saliency.selection) {
        r.selection = select_referred(ovss.proposals, r.maps.l_cs, r.peaks, ovss.result, r.targets, cfg_.fallback,
                                      bank_);
        const auto& sel = r.selection.selection;
        r.mask = sel.mask_id ? ovss.proposals.find(*sel.mask_id)->grid()
                             : BinaryGrid::Constant(ovss.image.height(), ovss.image.width(), false);
    } else {
        const MapGrid& l = r.maps.l_cs;
        const double hi = l.size() ? l.maxCoeff() : 0.0;
        r.mask = hi > 0.0 ? BinaryGrid(l >= cfg_.saliency.theta * hi)
                          : BinaryGrid::Constant(l.rows(), l.cols(), false);
        r.selection.selection.path = "heatmap";
    }
    return r;
}

nlohmann::json Engine::ovss_record(const OvssOutput& o) const {
    nlohmann::json proposals = nlohmann::json::array(), masks = nlohmann::json::array(),
                   rejected = nlohmann::json::array();
    for (const auto& p : o.proposals) proposals.push_back({{"id", p.id()}, {"rle", rle_encode(p.grid())}});
    for (const auto& r : o.rejected) rejected.push_back({{"mask", r.mask}, {"reason", r.reason}});
    for (const auto& m : o.result.masks) {
        const MaskProposal* p = o.proposals.find(m.mask_id);
        masks.push_back({{"mask_id", m.mask_id},
                         {"class_id", m.class_id},
                         {"class", bank_.name_of(m.class_id)},
                         {"probability", m.probability},
                         {"area", p->area()},
                         {"crop", crop_provenance(*p, cfg_.crop)},
                         {"rle", rle_encode(p->grid())}});
    }
    return {{"image_id", o.proposals.image_id()},
            {"height", o.image.height()},
            {"width", o.image.width()},
            {"tau", cfg_.tau},
            {"prompts", prompts_.size()},
            {"proposals", proposals},
            {"rejected", rejected},
            {"masks", masks}};
}

nlohmann::json Engine::res_record(const ExpressionRecord& rec, const ResOutput& r) const {
    nlohmann::json peaks = nlohmann::json::array(), scores = nlohmann::json::array(), targets = nlohmann::json::array();
    for (const auto& p : r.peaks.coords) peaks.push_back({p.row, p.col});
    for (const auto& s : r.selection.scored) {
        scores.push_back({{"mask_id", s.mask_id}, {"raw", s.raw_score}, {"normalized", s.normalized_score}});
    }
    for (ClassId c : r.targets) targets.push_back(bank_.name_of(c));
    const auto& sel = r.selection.selection;
    return {{"id", rec.id},
            {"image_id", rec.image_id},
            {"text", rec.text},
            {"decoupled",
             {{"ref", token_texts(r.expr.ref_tokens)},
              {"cls", token_texts(r.expr.cls_tokens)},
              {"mod", token_texts(r.expr.mod_tokens)}}},
            {"targets", targets},
            {"category", targets.empty() ? nlohmann::json(nullptr) : targets.front()},
            {"gradcam", to_string(cfg_.saliency.mode)},
            {"selection", cfg_.saliency.selection},
            {"peaks", peaks},
            {"activated", r.selection.activated},
            {"scores", scores},
            {"selected", sel.mask_id ? nlohmann::json(*sel.mask_id) : nlohmann::json(nullptr)},
            {"score", sel.score},
            {"label", sel.mask_id ? nlohmann::json(bank_.name_of(sel.label)) : nlohmann::json(nullptr)},
            {"path", sel.path},
            {"height", r.mask.rows()},
            {"width", r.mask.cols()},
            {"rle", rle_encode(r.mask)}};
}

// ---------------------------------------------------------------------------

RunSummary cmd_ovss(const PipelineConfig& cfg) {
    validate_config(cfg, Command::Ovss);
    fs::create_directories(cfg.out / "ovss");
    write_manifest(cfg.out, "ovss run", cfg);
    const Engine engine(cfg);
    const auto ids = resolve_image_ids(cfg);

    RunSummary s;
    s.command = "ovss run";
    s.items = ids.size();
    const auto errors = run_indexed(ids.size(), cfg.workers, [&](std::size_t i) {
        const auto o = engine.run_ovss(ids[i]);
        write_text(cfg.out / "ovss" / (ids[i] + ".json"), engine.ovss_record(o).dump() + "\n");
        Grid<std::uint16_t> labels = (o.result.label_map + 1).cast<std::uint16_t>();
        write_pgm16(cfg.out / "ovss" / (ids[i] + "_labels.pgm"), labels);
    });
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (errors[i]) s.failures.push_back("image " + ids[i] + ": " + *errors[i]);
    }
    if (!cfg.gt.empty()) {
        const auto e = evaluate_results(cfg.out, read_annotations(cfg.gt), taxonomy_of(engine.bank(), cfg.unseen),
                                        {.ovss = true, .res = false});
        write_eval(cfg.out, e);
        append_failures(s, e.failures);
        s.eval = e.json;
    }
    finish_summary(cfg.out, s);
    return s;
}

RunSummary cmd_res(const PipelineConfig& cfg) {
    validate_config(cfg, Command::Res);
    fs::create_directories(cfg.out / "res");
    if (cfg.saliency.debug) fs::create_directories(cfg.out / "saliency");
    write_manifest(cfg.out, "res run", cfg);
    const Engine engine(cfg);
    const Annotations exprs = read_annotations(cfg.expressions);

    RunSummary s;
    s.command = "res run";
    s.items = exprs.expressions.size();

    // OVSS labelling once per distinct image, then expressions in parallel.
    std::vector<std::string> image_ids;
    for (const auto& e : exprs.expressions) {
        if (std::find(image_ids.begin(), image_ids.end(), e.image_id) == image_ids.end()) {
            image_ids.push_back(e.image_id);
        }
    }
    std::vector<std::optional<Engine::OvssOutput>> ovss(image_ids.size());
    const auto image_errors = run_indexed(image_ids.size(), cfg.workers,
                                          [&](std::size_t i) { ovss[i] = engine.run_ovss(image_ids[i]); });
    std::map<std::string, std::size_t> slot;
    for (std::size_t i = 0; i < image_ids.size(); ++i) slot[image_ids[i]] = i;

    const auto errors = run_indexed(exprs.expressions.size(), cfg.workers, [&](std::size_t i) {
        const auto& rec = exprs.expressions[i];
        const std::size_t k = slot.at(rec.image_id);
        if (!ovss[k]) throw Error("image " + rec.image_id + " failed: " + image_errors[k].value_or("unknown"));
        const auto r = engine.run_res(rec, *ovss[k]);
        write_text(cfg.out / "res" / (rec.id + ".json"), engine.res_record(rec, r).dump() + "\n");
        if (cfg.saliency.debug) export_saliency(cfg.out / "saliency" / rec.id, r.maps.l_cs);
    });
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (errors[i]) s.failures.push_back("expression " + exprs.expressions[i].id + ": " + *errors[i]);
    }

    Annotations gt = cfg.gt.empty() ? exprs : read_annotations(cfg.gt);
    const bool has_gt = std::any_of(gt.expressions.begin(), gt.expressions.end(),
                                    [](const ExpressionRecord& e) { return e.mask.has_value(); });
    if (has_gt) {
        const auto e = evaluate_results(cfg.out, gt, taxonomy_of(engine.bank(), cfg.unseen), {.ovss = false, .res = true});
        write_eval(cfg.out, e);
        append_failures(s, e.failures);
        s.eval = e.json;
    }
    finish_summary(cfg.out, s);
    return s;
}

RunSummary cmd_eval(const fs::path& results, const fs::path& gt_path, const std::vector<std::string>& unseen,
                    const fs::path& out) {
    if (!fs::is_directory(results)) throw ConfigError("results: " + results.string() + " is not a directory");
    if (!fs::exists(gt_path)) throw ConfigError("gt: " + gt_path.string() + " does not exist");
    Taxonomy tax;
    if (fs::exists(results / "manifest.json")) {
        try {
            const PipelineConfig run = config_from_json(read_json(results / "manifest.json"));
            tax = taxonomy_of(load_bank(run), unseen);
        } catch (const Error&) {
            tax.unseen = unseen;
        }
    } else {
        tax.unseen = unseen;
    }
    const Annotations gt = read_annotations(gt_path);
    // Unseen names outside the run's taxonomy still count when the GT uses them.
    for (const auto& g : gt.images) {
        for (const auto& i : g.instances) tax.names.push_back(i.category);
    }
    for (const auto& e : gt.expressions) {
        if (e.category) tax.names.push_back(*e.category);
    }
    std::sort(tax.names.begin(), tax.names.end());
    tax.names.erase(std::unique(tax.names.begin(), tax.names.end()), tax.names.end());

    RunSummary s;
    s.command = "eval";
    fs::create_directories(out);
    const auto e = evaluate_results(results, gt, tax);
    s.items = json_files(results / "ovss").size() + json_files(results / "res").size();
    if (s.items == 0) s.failures.push_back("no result records under " + results.string());
    write_eval(out, e);
    append_failures(s, e.failures);
    s.eval = e.json;
    return s;
}

// ---------------------------------------------------------------------------

std::vector<std::string> ablation_presets() { return {"table2", "table3", "table4", "table5"}; }

std::vector<std::pair<std::string, PipelineConfig>> expand_preset(const std::string& preset,
                                                                  const PipelineConfig& base) {
    std::vector<std::pair<std::string, PipelineConfig>> runs;
    auto add = [&](const std::string& name, PipelineConfig c) {
        c.out = base.out / preset / name;
        runs.emplace_back(name, std::move(c));
    };
    if (preset == "table2") {
        for (CropVariant v : all_crop_variants()) {
            PipelineConfig c = base;
            c.crop.variant = v;
            add(std::string(to_string(v)), c);
        }
    } else if (preset == "table3") {
        for (const auto& t : template_presets()) {
            PipelineConfig c = base;
            c.template_text = std::string(t.name);
            add(std::string(t.name), c);
        }
    } else if (preset == "table4") {
        const std::array<std::pair<const char*, BankAugment>, 5> grid{{
            {"none", {false, false, false}},
            {"syn", {true, false, false}},
            {"bg", {false, false, true}},
            {"desc", {false, true, false}},
            {"all", {true, true, true}},
        }};
        for (const auto& [name, aug] : grid) {
            PipelineConfig c = base;
            c.augment = aug;
            add(name, c);
        }
    } else if (preset == "table5") {
        for (GradCamMode m : {GradCamMode::Single, GradCamMode::Cross}) {
            for (bool sel : {false, true}) {
                PipelineConfig c = base;
                c.saliency.mode = m;
                c.saliency.selection = sel;
                add(std::string(to_string(m)) + (sel ? "_selection" : "_heatmap"), c);
            }
        }
    } else {
        throw ConfigError("unknown ablation preset '" + preset + "' (expected table2, table3, table4 or table5)");
    }
    return runs;
}

RunSummary cmd_ablate(const std::string& preset, const PipelineConfig& base) {
    const auto runs = expand_preset(preset, base);
    const bool res = preset == "table5";
    RunSummary s;
    s.command = "ablate " + preset;
    nlohmann::json rows = nlohmann::json::array();
    std::ostringstream table;
    table << std::left << std::setw(16) << "run" << std::right << std::setw(8) << "items" << std::setw(8) << "failed"
          << std::setw(10) << "mIoU(%)" << "\n";
    for (const auto& [name, cfg] : runs) {
        const RunSummary r = res ? cmd_res(cfg) : cmd_ovss(cfg);
        s.items += r.items;
        for (const auto& f : r.failures) s.failures.push_back(name + ": " + f);
        std::optional<double> miou;
        if (r.eval) {
            const auto& e = *r.eval;
            const char* key = res ? "res" : "ovss";
            if (e.contains(key)) miou = e[key]["image_level"]["overall_miou"].get<double>();
        }
        rows.push_back({{"run", name},
                        {"items", r.items},
                        {"failed", r.failures.size()},
                        {"miou", miou ? nlohmann::json(*miou) : nlohmann::json(nullptr)}});
        table << std::left << std::setw(16) << name << std::right << std::setw(8) << r.items << std::setw(8)
              << r.failures.size() << std::setw(10);
        if (miou) table << std::fixed << std::setprecision(2) << *miou * 100.0;
        else table << "-";
        table << "\n";
    }
    const fs::path dir = base.out / preset;
    fs::create_directories(dir);
    s.eval = nlohmann::json{{"preset", preset}, {"runs", rows}};
    write_text(dir / "summary.json", s.eval->dump(2) + "\n");
    write_text(dir / "summary.txt", table.str());
    return s;
}

}  // namespace rsseg
