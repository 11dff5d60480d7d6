#include "rsseg/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#ifndef RSSEG_VERSION
#define RSSEG_VERSION "0.0.0"
#endif

namespace rsseg {

std::string_view library_version() { return RSSEG_VERSION; }

namespace {

namespace fs = std::filesystem;

fs::path resolve(const fs::path& p, const fs::path& base) {
    if (p.empty() || p.is_absolute() || base.empty()) return p.lexically_normal();
    return (base / p).lexically_normal();
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + key + ": wrong type");
    }
}

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
    std::set<std::string> ok(known.begin(), known.end());
    for (const auto& [k, v] : j.items()) {
        if (!ok.contains(k)) throw ConfigError("unknown config key '" + where + k + "'");
    }
}

}  // namespace

fs::path resolve_adapter_path(const fs::path& p, const fs::path& base_dir) {
    if (p.empty() || p.is_absolute()) return p;
    const fs::path local = resolve(p, base_dir);
    if (fs::exists(local)) return local;
    if (const char* env = std::getenv(kAdapterPathEnv)) {
        std::stringstream ss(env);
        std::string dir;
        while (std::getline(ss, dir, ':')) {
            if (dir.empty()) continue;
            const fs::path candidate = (fs::path(dir) / p).lexically_normal();
            if (fs::exists(candidate)) return candidate;
        }
    }
    return local;
}

PipelineConfig config_from_json(const nlohmann::json& in, const fs::path& base_dir) {
    if (!in.is_object()) throw ConfigError("config: expected an object");
    const nlohmann::json& j = in.contains("config") && in["config"].is_object() ? in["config"] : in;
    check_keys(j,
               {"bank", "template", "augment", "crop", "tau", "saliency", "fallback", "encoder", "proposals", "images",
                "image_ids", "expressions", "gt", "unseen", "out", "workers", "seed"},
               "");
    PipelineConfig c;
    c.bank = resolve(get_or<std::string>(j, "bank", "", ""), base_dir);
    if (j.contains("template") && !j["template"].is_null()) c.template_text = get_or<std::string>(j, "template", "", "");

    if (j.contains("augment")) {
        const auto& a = j["augment"];
        check_keys(a, {"synonyms", "descriptions", "backgrounds"}, "augment.");
        c.augment.synonyms = get_or(a, "synonyms", true, "augment.");
        c.augment.descriptions = get_or(a, "descriptions", true, "augment.");
        c.augment.backgrounds = get_or(a, "backgrounds", true, "augment.");
    }
    if (j.contains("crop")) {
        const auto& cr = j["crop"];
        check_keys(cr, {"variant", "ratio", "min_side"}, "crop.");
        try {
            c.crop.variant = parse_crop_variant(get_or<std::string>(cr, "variant", "mbr_buffer", "crop."));
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("crop.variant: ") + e.what());
        }
        c.crop.ratio = get_or(cr, "ratio", 0.1, "crop.");
        c.crop.min_side = get_or<Index>(cr, "min_side", 16, "crop.");
    }
    c.tau = get_or(j, "tau", 0.01, "");
    if (j.contains("saliency")) {
        const auto& s = j["saliency"];
        check_keys(s, {"kind", "path", "theta", "smooth", "normalize", "gradcam", "selection", "debug"}, "saliency.");
        c.saliency.kind = get_or<std::string>(s, "kind", "mock", "saliency.");
        c.saliency.path = resolve_adapter_path(get_or<std::string>(s, "path", "", "saliency."), base_dir);
        c.saliency.theta = get_or(s, "theta", 0.5, "saliency.");
        c.saliency.smooth = get_or(s, "smooth", 1, "saliency.");
        c.saliency.normalize = get_or(s, "normalize", true, "saliency.");
        try {
            c.saliency.mode = parse_gradcam_mode(get_or<std::string>(s, "gradcam", "cross", "saliency."));
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("saliency.gradcam: ") + e.what());
        }
        c.saliency.selection = get_or(s, "selection", true, "saliency.");
        c.saliency.debug = get_or(s, "debug", false, "saliency.");
    }
    try {
        c.fallback = FallbackPolicy::parse(get_or<std::string>(j, "fallback", "a,b", ""));
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("fallback: ") + e.what());
    }
    if (j.contains("encoder")) {
        const auto& e = j["encoder"];
        check_keys(e, {"kind", "path", "dim"}, "encoder.");
        c.encoder.kind = get_or<std::string>(e, "kind", "mock", "encoder.");
        c.encoder.path = resolve_adapter_path(get_or<std::string>(e, "path", "", "encoder."), base_dir);
        c.encoder.dim = get_or<Index>(e, "dim", 64, "encoder.");
    }
    c.seed = get_or<std::uint64_t>(j, "seed", 0, "");
    if (j.contains("proposals")) {
        const auto& p = j["proposals"];
        check_keys(p, {"kind", "path", "seed", "layout", "height", "width", "adapter", "params"}, "proposals.");
        c.proposals.kind = parse_proposal_kind(get_or<std::string>(p, "kind", "file", "proposals."));
        c.proposals.path = resolve(get_or<std::string>(p, "path", "", "proposals."), base_dir);
        c.proposals.seed = get_or<std::uint64_t>(p, "seed", c.seed, "proposals.");
        c.proposals.layout = get_or<std::string>(p, "layout", "grid2x2", "proposals.");
        c.proposals.size = {get_or<Index>(p, "height", 0, "proposals."), get_or<Index>(p, "width", 0, "proposals.")};
        c.proposals.adapter = get_or<std::string>(p, "adapter", "", "proposals.");
        if (p.contains("params")) c.proposals.adapter_params = p["params"];
    }
    c.images = resolve(get_or<std::string>(j, "images", "", ""), base_dir);
    c.image_ids = get_or(j, "image_ids", std::vector<std::string>{}, "");
    c.expressions = resolve(get_or<std::string>(j, "expressions", "", ""), base_dir);
    c.gt = resolve(get_or<std::string>(j, "gt", "", ""), base_dir);
    c.unseen = get_or(j, "unseen", std::vector<std::string>{}, "");
    c.out = resolve(get_or<std::string>(j, "out", "out", ""), base_dir);
    c.workers = get_or(j, "workers", 1, "");
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j, fs::absolute(path).parent_path());
}

nlohmann::json config_to_json(const PipelineConfig& c) {
    nlohmann::json j;
    j["bank"] = c.bank.string();
    j["template"] = c.template_text ? nlohmann::json(*c.template_text) : nlohmann::json(nullptr);
    j["augment"] = {{"synonyms", c.augment.synonyms},
                    {"descriptions", c.augment.descriptions},
                    {"backgrounds", c.augment.backgrounds}};
    j["crop"] = {{"variant", to_string(c.crop.variant)}, {"ratio", c.crop.ratio}, {"min_side", c.crop.min_side}};
    j["tau"] = c.tau;
    j["saliency"] = {{"kind", c.saliency.kind},
                     {"path", c.saliency.path.string()},
                     {"theta", c.saliency.theta},
                     {"smooth", c.saliency.smooth},
                     {"normalize", c.saliency.normalize},
                     {"gradcam", to_string(c.saliency.mode)},
                     {"selection", c.saliency.selection},
                     {"debug", c.saliency.debug}};
    j["fallback"] = c.fallback.to_string();
    j["encoder"] = {{"kind", c.encoder.kind}, {"path", c.encoder.path.string()}, {"dim", c.encoder.dim}};
    j["proposals"] = {{"kind", to_string(c.proposals.kind)},
                      {"path", c.proposals.path.string()},
                      {"seed", c.proposals.seed},
                      {"layout", c.proposals.layout},
                      {"height", c.proposals.size.height},
                      {"width", c.proposals.size.width},
                      {"adapter", c.proposals.adapter},
                      {"params", c.proposals.adapter_params}};
    j["images"] = c.images.string();
    j["image_ids"] = c.image_ids;
    j["expressions"] = c.expressions.string();
    j["gt"] = c.gt.string();
    j["unseen"] = c.unseen;
    j["out"] = c.out.string();
    j["workers"] = c.workers;
    j["seed"] = c.seed;
    return j;
}

void validate_config(const PipelineConfig& c, Command cmd) {
    auto need_file = [](const fs::path& p, const char* what) {
        if (p.empty()) throw ConfigError(std::string(what) + ": not set");
        if (!fs::exists(p)) throw ConfigError(std::string(what) + ": " + p.string() + " does not exist");
    };
    auto maybe_file = [](const fs::path& p, const char* what) {
        if (!p.empty() && !fs::exists(p)) throw ConfigError(std::string(what) + ": " + p.string() + " does not exist");
    };
    if (c.workers < 1 || c.workers > 256) throw ConfigError("workers: must be in [1, 256]");
    if (cmd == Command::Eval || cmd == Command::Overlay) return;

    need_file(c.bank, "bank");
    if (!(c.tau > 0.0) || c.tau > 10.0) throw ConfigError("tau: must be in (0, 10]");
    if (!(c.crop.ratio >= 0.0) || c.crop.ratio > 2.0) throw ConfigError("crop.ratio: must be in [0, 2]");
    if (c.crop.min_side < 1 || c.crop.min_side > 4096) throw ConfigError("crop.min_side: must be in [1, 4096]");
    if (!(c.saliency.theta >= 0.0 && c.saliency.theta <= 1.0)) throw ConfigError("saliency.theta: must be in [0, 1]");
    if (c.saliency.smooth < 0 || c.saliency.smooth > 16) throw ConfigError("saliency.smooth: must be in [0, 16]");
    for (const auto* spec : {&c.encoder.kind, &c.saliency.kind}) {
        if (*spec != "mock" && *spec != "tensor-file") {
            throw ConfigError("adapter kind '" + *spec + "' (expected mock or tensor-file)");
        }
    }
    if (c.encoder.kind == "tensor-file") need_file(c.encoder.path, "encoder.path");
    if (c.encoder.kind == "mock" && (c.encoder.dim < 2 || c.encoder.dim > 4096)) {
        throw ConfigError("encoder.dim: must be in [2, 4096]");
    }
    need_file(c.images, "images");
    c.proposals.validate();
    maybe_file(c.gt, "gt");
    if (cmd == Command::Res) {
        need_file(c.expressions, "expressions");
        if (c.saliency.kind == "tensor-file") need_file(c.saliency.path, "saliency.path");
    }
}

void write_manifest(const fs::path& out, const std::string& command, const PipelineConfig& cfg) {
    fs::create_directories(out);
    const nlohmann::json m{{"tool", "rsseg"},
                           {"version", library_version()},
                           {"command", command},
                           {"config", config_to_json(cfg)}};
    std::ofstream os(out / "manifest.json", std::ios::trunc);
    if (!os) throw ConfigError("cannot write manifest in " + out.string());
    os << m.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

const GtImage* Annotations::find_image(const std::string& id) const {
    for (const auto& g : images) {
        if (g.image_id == id) return &g;
    }
    return nullptr;
}

Annotations annotations_from_json(const nlohmann::json& j) {
    Annotations a;
    try {
        for (const auto& im : j.value("images", nlohmann::json::array())) {
            GtImage g;
            g.image_id = im.at("image_id").get<std::string>();
            g.size = {im.at("height").get<Index>(), im.at("width").get<Index>()};
            for (const auto& inst : im.value("instances", nlohmann::json::array())) {
                const auto runs = inst.at("rle").get<std::vector<std::uint64_t>>();
                g.instances.push_back({g.image_id, inst.at("category").get<std::string>(), rle_decode(runs, g.size)});
            }
            a.images.push_back(std::move(g));
        }
        for (const auto& e : j.value("expressions", nlohmann::json::array())) {
            ExpressionRecord r;
            r.id = e.at("id").get<std::string>();
            r.image_id = e.at("image_id").get<std::string>();
            r.text = e.at("text").get<std::string>();
            if (e.contains("category") && !e["category"].is_null()) r.category = e["category"].get<std::string>();
            if (e.contains("rle") && !e["rle"].is_null()) {
                ImageSize size;
                if (e.contains("height")) {
                    size = {e.at("height").get<Index>(), e.at("width").get<Index>()};
                } else if (const GtImage* g = a.find_image(r.image_id)) {
                    size = g->size;
                } else {
                    throw FormatError("expression " + r.id + ": mask size unknown (no height/width, no image record)");
                }
                r.mask = rle_decode(e["rle"].get<std::vector<std::uint64_t>>(), size);
            }
            a.expressions.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("annotations: ") + e.what());
    }
    return a;
}

nlohmann::json annotations_to_json(const Annotations& a) {
    nlohmann::json images = nlohmann::json::array(), exprs = nlohmann::json::array();
    for (const auto& g : a.images) {
        nlohmann::json inst = nlohmann::json::array();
        for (const auto& i : g.instances) inst.push_back({{"category", i.category}, {"rle", rle_encode(i.mask)}});
        images.push_back(
            {{"image_id", g.image_id}, {"height", g.size.height}, {"width", g.size.width}, {"instances", inst}});
    }
    for (const auto& e : a.expressions) {
        nlohmann::json r{{"id", e.id}, {"image_id", e.image_id}, {"text", e.text}};
        if (e.category) r["category"] = *e.category;
        if (e.mask) {
            r["height"] = e.mask->rows();
            r["width"] = e.mask->cols();
            r["rle"] = rle_encode(*e.mask);
        }
        exprs.push_back(std::move(r));
    }
    return {{"images", images}, {"expressions", exprs}};
}

Annotations read_annotations(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot read annotations " + path.string());
    try {
        return annotations_from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_annotations(const fs::path& path, const Annotations& a) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("cannot write " + path.string());
    os << annotations_to_json(a).dump() << "\n";
}

fs::path image_path(const fs::path& dir, const std::string& image_id) {
    const fs::path ppm = dir / (image_id + ".ppm");
    if (fs::exists(ppm)) return ppm;
    const fs::path pgm = dir / (image_id + ".pgm");
    if (fs::exists(pgm)) return pgm;
    throw FormatError("no image file for " + image_id + " in " + dir.string());
}

std::vector<std::string> resolve_image_ids(const PipelineConfig& cfg) {
    if (!cfg.image_ids.empty()) return cfg.image_ids;
    std::vector<std::string> ids;
    if (!cfg.gt.empty()) {
        for (const auto& g : read_annotations(cfg.gt).images) ids.push_back(g.image_id);
        if (!ids.empty()) return ids;
    }
    std::set<std::string> found;
    for (const auto& e : fs::directory_iterator(cfg.images)) {
        const auto ext = e.path().extension();
        if (ext == ".ppm" || ext == ".pgm") found.insert(e.path().stem().string());
    }
    return {found.begin(), found.end()};
}

nlohmann::json RunSummary::to_json() const {
    nlohmann::json j{{"command", command}, {"items", items}, {"failed", failures.size()}, {"failures", failures}};
    if (eval) j["eval"] = *eval;
    return j;
}

}  // namespace rsseg
