#include "rsseg/proposal_ingest.hpp"

#include "rsseg/hashing.hpp"
#include "rsseg/image_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>

namespace rsseg {

std::string_view to_string(ProposalKind k) {
    switch (k) {
        case ProposalKind::File: return "file";
        case ProposalKind::Synthetic: return "synthetic";
        case ProposalKind::Adapter: return "adapter";
    }
    return "?";
}

ProposalKind parse_proposal_kind(std::string_view s) {
    if (s == "file") return ProposalKind::File;
    if (s == "synthetic") return ProposalKind::Synthetic;
    if (s == "adapter") return ProposalKind::Adapter;
    throw ConfigError("unknown proposal source kind '" + std::string(s) + "'");
}

ProposalSource ProposalSource::file(std::filesystem::path p) {
    ProposalSource s;
    s.kind = ProposalKind::File;
    s.path = std::move(p);
    return s;
}

ProposalSource ProposalSource::synthetic(std::uint64_t seed, std::string layout, ImageSize size) {
    ProposalSource s;
    s.kind = ProposalKind::Synthetic;
    s.seed = seed;
    s.layout = std::move(layout);
    s.size = size;
    return s;
}

ProposalSource ProposalSource::live(std::string adapter, nlohmann::json params) {
    ProposalSource s;
    s.kind = ProposalKind::Adapter;
    s.adapter = std::move(adapter);
    s.adapter_params = std::move(params);
    return s;
}

namespace {

struct Layout {
    enum { Grid, Random } kind = Grid;
    int a = 1;
    int b = 1;
};

int parse_positive(std::string_view s, std::string_view layout) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v <= 0) {
        throw ConfigError("bad synthetic layout '" + std::string(layout) + "'");
    }
    return v;
}

Layout parse_layout(std::string_view s) {
    Layout l;
    if (s.starts_with("grid")) {
        const auto rest = s.substr(4);
        const auto x = rest.find('x');
        if (x == std::string_view::npos) throw ConfigError("bad synthetic layout '" + std::string(s) + "'");
        l.a = parse_positive(rest.substr(0, x), s);
        l.b = parse_positive(rest.substr(x + 1), s);
    } else if (s.starts_with("random")) {
        l.kind = Layout::Random;
        l.a = parse_positive(s.substr(6), s);
    } else {
        throw ConfigError("unknown synthetic layout '" + std::string(s) + "' (expected gridRxC or randomN)");
    }
    return l;
}

std::map<std::string, ProposalAdapterFactory>& adapter_registry() {
    static std::map<std::string, ProposalAdapterFactory> reg;
    return reg;
}

std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}

// Tiles the incoming image with a synthetic layout; the reference live backend.
class TileAdapter : public ProposalAdapter {
public:
    explicit TileAdapter(const nlohmann::json& params)
        : layout_(params.value("layout", std::string("grid2x2"))), seed_(params.value("seed", std::uint64_t{0})) {
        parse_layout(layout_);
    }
    std::string name() const override { return "tiles"; }
    MaskSet propose(const Image& image, const std::string& image_id) const override {
        return synthetic_proposals(image_id, image.size(), layout_, seed_);
    }

private:
    std::string layout_;
    std::uint64_t seed_;
};

void ensure_builtin_adapters() {
    static std::once_flag once;
    std::call_once(once, [] {
        adapter_registry()["tiles"] = [](const nlohmann::json& p) { return std::make_unique<TileAdapter>(p); };
    });
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot read " + path.string());
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace

void ProposalSource::validate() const {
    switch (kind) {
        case ProposalKind::File:
            if (path.empty()) throw ConfigError("proposals: file source needs a path");
            if (!std::filesystem::exists(path)) throw ConfigError("proposals: " + path.string() + " does not exist");
            break;
        case ProposalKind::Synthetic:
            parse_layout(layout);
            break;
        case ProposalKind::Adapter: {
            const auto names = proposal_adapters();
            if (std::find(names.begin(), names.end(), adapter) == names.end()) {
                throw ConfigError("proposals: adapter '" + adapter + "' is not registered");
            }
            break;
        }
    }
}

void RejectionLog::append(Rejection r) {
    std::lock_guard lock(mutex_);
    entries_.push_back(std::move(r));
}

std::vector<Rejection> RejectionLog::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

std::size_t RejectionLog::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

nlohmann::json RejectionLog::to_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : entries()) {
        out.push_back({{"source", r.source}, {"image_id", r.image_id}, {"mask", r.mask}, {"reason", r.reason}});
    }
    return out;
}

void register_proposal_adapter(const std::string& name, ProposalAdapterFactory factory) {
    ensure_builtin_adapters();
    std::lock_guard lock(registry_mutex());
    adapter_registry()[name] = std::move(factory);
}

std::vector<std::string> proposal_adapters() {
    ensure_builtin_adapters();
    std::lock_guard lock(registry_mutex());
    std::vector<std::string> out;
    for (const auto& [k, v] : adapter_registry()) out.push_back(k);
    return out;
}

std::unique_ptr<ProposalAdapter> make_proposal_adapter(const std::string& name, const nlohmann::json& params) {
    ensure_builtin_adapters();
    ProposalAdapterFactory f;
    {
        std::lock_guard lock(registry_mutex());
        auto it = adapter_registry().find(name);
        if (it == adapter_registry().end()) throw ConfigError("proposal adapter '" + name + "' is not registered");
        f = it->second;
    }
    return f(params);
}

nlohmann::json proposals_to_json(const MaskSet& set) {
    nlohmann::json masks = nlohmann::json::array();
    for (const auto& m : set) masks.push_back({{"id", m.id()}, {"rle", rle_encode(m.grid())}});
    return {{"image_id", set.image_id()},
            {"height", set.image_size().height},
            {"width", set.image_size().width},
            {"masks", std::move(masks)}};
}

MaskSet proposals_from_json(const nlohmann::json& j, RejectionLog* log, const std::string& source,
                            const std::filesystem::path& base_dir) {
    const std::string where = source.empty() ? std::string("proposal container") : source;
    try {
        const auto image_id = j.at("image_id").get<std::string>();
        const ImageSize size{j.at("height").get<Index>(), j.at("width").get<Index>()};
        if (size.height <= 0 || size.width <= 0) throw FormatError(where + ": non-positive image size");
        MaskSet set(image_id, size);
        std::set<MaskId> seen;
        for (const auto& rec : j.at("masks")) {
            const auto id = rec.at("id").get<MaskId>();
            if (!seen.insert(id).second) {
                throw FormatError(where + ": duplicate mask id " + std::to_string(id) + " in image " + image_id);
            }
            BinaryGrid grid;
            if (rec.contains("rle")) {
                const auto runs = rec.at("rle").get<std::vector<std::uint64_t>>();
                try {
                    grid = rle_decode(runs, size);
                } catch (const FormatError& e) {
                    throw FormatError(where + ": mask " + std::to_string(id) + ": " + e.what());
                }
            } else if (rec.contains("pgm")) {
                std::filesystem::path p = rec.at("pgm").get<std::string>();
                if (p.is_relative()) p = base_dir / p;
                grid = read_mask_pgm(p);
                if (size_of(grid) != size) {
                    if (log) {
                        log->append({where, image_id, std::to_string(id),
                                     "out of bounds: " + to_string(size_of(grid)) + " mask on " + to_string(size)});
                    }
                    continue;
                }
            } else {
                throw FormatError(where + ": mask " + std::to_string(id) + " has neither rle nor pgm");
            }
            if (!grid.any()) {
                if (log) log->append({where, image_id, std::to_string(id), "empty"});
                continue;
            }
            set.add(MaskProposal(id, std::move(grid)));
        }
        return set;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(where + ": " + e.what());
    }
}

void write_proposals(const std::filesystem::path& path, const MaskSet& set) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("cannot write " + path.string());
    os << proposals_to_json(set).dump() << "\n";
}

MaskSet read_proposals(const std::filesystem::path& path, RejectionLog* log) {
    return proposals_from_json(read_json_file(path), log, path.string(), path.parent_path());
}

std::vector<std::filesystem::path> export_mask_pgms(const std::filesystem::path& dir, const MaskSet& set) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> out;
    for (const auto& m : set) {
        auto p = dir / (set.image_id() + "_" + std::to_string(m.id()) + ".pgm");
        write_mask_pgm(p, m.grid());
        out.push_back(std::move(p));
    }
    return out;
}

MaskSet synthetic_proposals(const std::string& image_id, ImageSize size, std::string_view layout,
                            std::uint64_t seed) {
    if (size.height <= 0 || size.width <= 0) {
        throw InvalidArgument("synthetic proposals need a positive canvas, got " + to_string(size));
    }
    const Layout l = parse_layout(layout);
    MaskSet set(image_id, size);
    if (l.kind == Layout::Grid) {
        if (l.a > size.height || l.b > size.width) {
            throw InvalidArgument("layout " + std::string(layout) + " does not fit " + to_string(size));
        }
        MaskId id = 0;
        for (int i = 0; i < l.a; ++i) {
            const Index r0 = size.height * i / l.a, r1 = size.height * (i + 1) / l.a;
            for (int k = 0; k < l.b; ++k) {
                const Index c0 = size.width * k / l.b, c1 = size.width * (k + 1) / l.b;
                BinaryGrid g = BinaryGrid::Constant(size.height, size.width, false);
                g.block(r0, c0, r1 - r0, c1 - c0).setConstant(true);
                set.add(MaskProposal(id++, std::move(g)));
            }
        }
        return set;
    }
    SplitMix64 rng(seed);
    for (int i = 0; i < l.a; ++i) {
        const Index h = rng.integer(1, size.height), w = rng.integer(1, size.width);
        const Index r0 = rng.integer(0, size.height - h), c0 = rng.integer(0, size.width - w);
        BinaryGrid g = BinaryGrid::Constant(size.height, size.width, false);
        g.block(r0, c0, h, w).setConstant(true);
        set.add(MaskProposal(i, std::move(g)));
    }
    return set;
}

MaskSet load_proposals(const ProposalSource& source, const std::string& image_id, RejectionLog* log,
                       const Image* image) {
    switch (source.kind) {
        case ProposalKind::File: {
            std::filesystem::path p = source.path;
            if (std::filesystem::is_directory(p)) p /= image_id + ".json";
            const nlohmann::json j = read_json_file(p);
            if (j.contains("images")) {
                for (const auto& rec : j.at("images")) {
                    if (rec.value("image_id", std::string()) == image_id) {
                        return proposals_from_json(rec, log, p.string(), p.parent_path());
                    }
                }
                throw FormatError(p.string() + ": no proposals for image " + image_id);
            }
            MaskSet set = proposals_from_json(j, log, p.string(), p.parent_path());
            if (set.image_id() != image_id) {
                throw FormatError(p.string() + ": holds image '" + set.image_id() + "', expected '" + image_id + "'");
            }
            return set;
        }
        case ProposalKind::Synthetic: {
            const ImageSize size = image ? image->size() : source.size;
            return synthetic_proposals(image_id, size, source.layout, source.seed);
        }
        case ProposalKind::Adapter: {
            if (!image) throw InvalidArgument("adapter proposals need the image for " + image_id);
            const auto adapter = make_proposal_adapter(source.adapter, source.adapter_params);
            MaskSet raw;
            {
                auto lock = adapter->guard();
                raw = adapter->propose(*image, image_id);
            }
            if (raw.image_size() != image->size()) {
                throw BackendError("adapter " + source.adapter + " returned " + to_string(raw.image_size()) +
                                   " masks for a " + to_string(image->size()) + " image");
            }
            return raw;
        }
    }
    throw InvalidArgument("bad proposal source");
}

// ---------------------------------------------------------------------------

BinaryGrid rasterize(const SceneShape& s, ImageSize size) {
    BinaryGrid g = BinaryGrid::Constant(size.height, size.width, false);
    const double cy = static_cast<double>(s.row) + static_cast<double>(s.height) / 2.0;
    const double cx = static_cast<double>(s.col) + static_cast<double>(s.width) / 2.0;
    const double ry = static_cast<double>(s.height) / 2.0, rx = static_cast<double>(s.width) / 2.0;
    for (Index r = s.row; r < s.row + s.height; ++r) {
        for (Index c = s.col; c < s.col + s.width; ++c) {
            const double dy = (static_cast<double>(r) + 0.5 - cy) / ry;
            const double dx = (static_cast<double>(c) + 0.5 - cx) / rx;
            bool in = true;
            if (s.kind == ShapeKind::Ellipse) in = dx * dx + dy * dy <= 1.0;
            if (s.kind == ShapeKind::Diamond) in = std::abs(dx) + std::abs(dy) <= 1.0;
            g(r, c) = in;
        }
    }
    return g;
}

SyntheticScene synth_scene(const SceneSpec& spec) {
    const ImageSize size = spec.size;
    if (size.height <= 0 || size.width <= 0) throw InvalidArgument("scene canvas must be positive");
    auto check_fit = [&](const SceneShape& s, const std::string& what) {
        if (s.height <= 0 || s.width <= 0 || s.row < 0 || s.col < 0 || s.row + s.height > size.height ||
            s.col + s.width > size.width) {
            throw InvalidArgument(what + " does not fit the " + to_string(size) + " canvas");
        }
    };

    SyntheticScene out;
    out.image = Image(size.height, size.width, 3);
    SplitMix64 rng(spec.seed);
    for (Index r = 0; r < size.height; ++r) {
        for (Index c = 0; c < size.width; ++c) {
            for (std::size_t k = 0; k < 3; ++k) {
                const float jitter = spec.noise > 0 ? static_cast<float>(rng.integer(-spec.noise, spec.noise)) : 0.0f;
                out.image.channels[k](r, c) = std::clamp(spec.background[k] + jitter, 0.0f, 255.0f);
            }
        }
    }

    out.proposals = MaskSet(spec.image_id, size);
    BinaryGrid occupied = BinaryGrid::Constant(size.height, size.width, false);
    MaskId next_id = 0;
    for (std::size_t i = 0; i < spec.shapes.size(); ++i) {
        const auto& s = spec.shapes[i];
        const std::string what = "shape " + std::to_string(i) + " (" + s.category + ")";
        check_fit(s, what);
        if (s.category.empty()) throw InvalidArgument(what + " has no category");
        BinaryGrid g = rasterize(s, size);
        if (!g.any()) throw InvalidArgument(what + " rasterises to no pixels");
        if (!spec.allow_overlap && (g && occupied).any()) throw InvalidArgument(what + " overlaps an earlier shape");
        occupied = occupied || g;
        for (Index r = 0; r < size.height; ++r) {
            for (Index c = 0; c < size.width; ++c) {
                if (!g(r, c)) continue;
                for (std::size_t k = 0; k < 3; ++k) out.image.channels[k](r, c) = s.color[k];
            }
        }
        out.gt.push_back({spec.image_id, s.category, g});
        out.proposals.add(MaskProposal(next_id, std::move(g)));
        out.shape_ids.push_back(next_id++);
    }
    for (std::size_t i = 0; i < spec.distractors.size(); ++i) {
        const auto& s = spec.distractors[i];
        const std::string what = "distractor " + std::to_string(i);
        check_fit(s, what);
        BinaryGrid g = rasterize(s, size);
        if (!g.any()) throw InvalidArgument(what + " rasterises to no pixels");
        out.proposals.add(MaskProposal(next_id, std::move(g)));
        out.distractor_ids.push_back(next_id++);
    }
    for (const auto& e : spec.expressions) {
        if (e.target >= spec.shapes.size()) {
            throw InvalidArgument("expression " + e.id + " targets shape " + std::to_string(e.target) +
                                  " of " + std::to_string(spec.shapes.size()));
        }
    }
    return out;
}

namespace {

const std::map<std::string, std::array<float, 3>>& named_colors() {
    static const std::map<std::string, std::array<float, 3>> m{
        {"red", {220, 30, 30}},     {"green", {30, 180, 60}},  {"blue", {40, 70, 220}},
        {"white", {245, 245, 245}}, {"black", {0, 0, 0}},      {"gray", {128, 128, 128}},
        {"yellow", {230, 210, 40}}, {"orange", {240, 140, 20}}, {"cyan", {40, 200, 210}},
    };
    return m;
}

std::array<float, 3> parse_color(const nlohmann::json& j) {
    if (j.is_string()) {
        const auto it = named_colors().find(j.get<std::string>());
        if (it == named_colors().end()) throw ConfigError("unknown colour '" + j.get<std::string>() + "'");
        return it->second;
    }
    const auto v = j.get<std::vector<float>>();
    if (v.size() != 3) throw ConfigError("colour needs 3 components");
    return {v[0], v[1], v[2]};
}

ShapeKind parse_shape_kind(const std::string& s) {
    if (s == "rect") return ShapeKind::Rect;
    if (s == "ellipse") return ShapeKind::Ellipse;
    if (s == "diamond") return ShapeKind::Diamond;
    throw ConfigError("unknown shape kind '" + s + "'");
}

std::string_view shape_kind_name(ShapeKind k) {
    switch (k) {
        case ShapeKind::Rect: return "rect";
        case ShapeKind::Ellipse: return "ellipse";
        case ShapeKind::Diamond: return "diamond";
    }
    return "?";
}

SceneShape shape_from_json(const nlohmann::json& j) {
    SceneShape s;
    s.kind = parse_shape_kind(j.value("kind", std::string("rect")));
    s.category = j.value("category", std::string());
    s.row = j.at("row").get<Index>();
    s.col = j.at("col").get<Index>();
    s.height = j.at("height").get<Index>();
    s.width = j.at("width").get<Index>();
    if (j.contains("color")) s.color = parse_color(j.at("color"));
    return s;
}

nlohmann::json shape_to_json(const SceneShape& s) {
    nlohmann::json j{{"kind", shape_kind_name(s.kind)}, {"row", s.row},     {"col", s.col},
                     {"height", s.height},               {"width", s.width}, {"color", s.color}};
    if (!s.category.empty()) j["category"] = s.category;
    return j;
}

}  // namespace

SceneSpec scene_from_json(const nlohmann::json& j) {
    try {
        SceneSpec s;
        s.image_id = j.value("image_id", std::string("scene"));
        s.size = {j.value("height", Index{64}), j.value("width", Index{64})};
        s.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("background")) s.background = parse_color(j.at("background"));
        s.noise = j.value("noise", 0);
        s.allow_overlap = j.value("allow_overlap", false);
        for (const auto& sh : j.value("shapes", nlohmann::json::array())) s.shapes.push_back(shape_from_json(sh));
        for (const auto& sh : j.value("distractors", nlohmann::json::array())) {
            s.distractors.push_back(shape_from_json(sh));
        }
        for (const auto& e : j.value("expressions", nlohmann::json::array())) {
            s.expressions.push_back({e.at("id").get<std::string>(), e.at("text").get<std::string>(),
                                     e.at("target").get<std::size_t>()});
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scene spec: ") + e.what());
    }
}

nlohmann::json scene_to_json(const SceneSpec& s) {
    nlohmann::json shapes = nlohmann::json::array(), distractors = nlohmann::json::array(),
                   exprs = nlohmann::json::array();
    for (const auto& sh : s.shapes) shapes.push_back(shape_to_json(sh));
    for (const auto& sh : s.distractors) distractors.push_back(shape_to_json(sh));
    for (const auto& e : s.expressions) exprs.push_back({{"id", e.id}, {"text", e.text}, {"target", e.target}});
    return {{"image_id", s.image_id}, {"height", s.size.height}, {"width", s.size.width},
            {"seed", s.seed},         {"background", s.background}, {"noise", s.noise},
            {"allow_overlap", s.allow_overlap}, {"shapes", shapes}, {"distractors", distractors},
            {"expressions", exprs}};
}

}  // namespace rsseg
