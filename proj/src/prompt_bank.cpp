#include "rsseg/prompt_bank.hpp"

#include <algorithm>
#include <cctype>
#include <array>
#include <fstream>
#include <set>

namespace rsseg {

namespace {

constexpr std::array<TemplatePreset, 4> kPresets = {{
    {"plain", "{CLASS}"},
    {"photo", "A photo of a {CLASS}"},
    {"satellite", "A satellite image of {CLASS}"},
    {"top_view", "Top view of a {CLASS}"},
}};

std::size_t count_placeholders(std::string_view t) {
    std::size_t n = 0;
    for (auto pos = t.find(kClassPlaceholder); pos != std::string_view::npos;
         pos = t.find(kClassPlaceholder, pos + kClassPlaceholder.size())) {
        ++n;
    }
    return n;
}

void validate_template(std::string_view t) {
    if (count_placeholders(t) != 1) {
        throw ConfigError("template: must contain exactly one {CLASS} placeholder, got '" + std::string(t) + "'");
    }
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

}  // namespace

std::span<const TemplatePreset> template_presets() { return kPresets; }
std::string_view default_template() { return kPresets[3].text; }

std::string_view to_string(PromptKind k) {
    switch (k) {
        case PromptKind::Original: return "original";
        case PromptKind::Synonym: return "synonym";
        case PromptKind::Description: return "description";
        case PromptKind::Background: return "background";
    }
    return "?";
}

ClassTextBank::ClassTextBank(std::string template_text, std::vector<ClassEntry> classes,
                             std::vector<std::string> backgrounds)
    : template_(std::move(template_text)), classes_(std::move(classes)), backgrounds_(std::move(backgrounds)) {
    validate_template(template_);
    std::set<ClassId> ids;
    std::set<std::string> names;
    for (const auto& c : classes_) {
        if (c.id < 0) throw ConfigError("classes: negative id " + std::to_string(c.id) + " is reserved");
        if (!ids.insert(c.id).second) throw ConfigError("classes: duplicate id " + std::to_string(c.id));
        if (c.name.empty()) throw ConfigError("classes[id=" + std::to_string(c.id) + "].name: missing");
        names.insert(lower(c.name));
    }
    for (const auto& b : backgrounds_) {
        if (b.empty()) throw ConfigError("backgrounds: empty entry");
        if (names.contains(lower(b))) throw ConfigError("backgrounds: '" + b + "' is also a foreground class");
    }
    std::sort(classes_.begin(), classes_.end(), [](const ClassEntry& a, const ClassEntry& b) { return a.id < b.id; });
}

const ClassEntry* ClassTextBank::find(ClassId id) const {
    auto it = std::find_if(classes_.begin(), classes_.end(), [id](const ClassEntry& c) { return c.id == id; });
    return it == classes_.end() ? nullptr : &*it;
}

const ClassEntry* ClassTextBank::find(std::string_view name) const {
    const std::string key = lower(name);
    auto it = std::find_if(classes_.begin(), classes_.end(), [&](const ClassEntry& c) { return lower(c.name) == key; });
    return it == classes_.end() ? nullptr : &*it;
}

std::string ClassTextBank::name_of(ClassId id) const {
    if (id == kBackground) return "background";
    if (const auto* c = find(id)) return c->name;
    throw InvalidArgument("unknown class id " + std::to_string(id));
}

ClassTextBank ClassTextBank::with_template(std::string template_text) const {
    return ClassTextBank(std::move(template_text), classes_, backgrounds_);
}

ClassTextBank ClassTextBank::with_augment(const BankAugment& aug) const {
    std::vector<ClassEntry> classes = classes_;
    for (auto& c : classes) {
        if (!aug.synonyms) c.synonyms.clear();
        if (!aug.descriptions) c.description.reset();
    }
    return ClassTextBank(template_, std::move(classes), aug.backgrounds ? backgrounds_ : std::vector<std::string>{});
}

ClassVocabulary ClassTextBank::vocabulary() const {
    ClassVocabulary vocab;
    for (const auto& c : classes_) {
        vocab.add(c.id, c.name);
        for (const auto& s : c.synonyms) vocab.add(c.id, s);
    }
    return vocab;
}

std::vector<std::string> ClassTextBank::unseen_names() const {
    std::vector<std::string> out;
    for (const auto& c : classes_) {
        if (c.unseen) out.push_back(c.name);
    }
    return out;
}

std::vector<std::string> ClassTextBank::class_names() const {
    std::vector<std::string> out;
    for (const auto& c : classes_) out.push_back(c.name);
    return out;
}

ClassTextBank bank_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("bank: expected an object");
    std::string tmpl(default_template());
    if (j.contains("template")) {
        if (!j["template"].is_string()) throw ConfigError("template: expected a string");
        tmpl = j["template"].get<std::string>();
        // Preset names are accepted in place of literal templates.
        for (const auto& p : template_presets()) {
            if (p.name == tmpl) tmpl = std::string(p.text);
        }
    }
    if (!j.contains("classes") || !j["classes"].is_array()) throw ConfigError("classes: missing or not an array");

    std::vector<ClassEntry> classes;
    std::size_t pos = 0;
    for (const auto& c : j["classes"]) {
        const std::string key = "classes[" + std::to_string(pos++) + "]";
        if (!c.is_object()) throw ConfigError(key + ": expected an object");
        ClassEntry e;
        if (!c.contains("id") || !c["id"].is_number_integer()) throw ConfigError(key + ".id: missing integer");
        e.id = c["id"].get<ClassId>();
        if (!c.contains("name") || !c["name"].is_string() || c["name"].get<std::string>().empty()) {
            throw ConfigError(key + ".name: missing original name");
        }
        e.name = c["name"].get<std::string>();
        if (c.contains("synonyms")) {
            if (!c["synonyms"].is_array()) throw ConfigError(key + ".synonyms: expected an array");
            for (const auto& s : c["synonyms"]) {
                if (!s.is_string()) throw ConfigError(key + ".synonyms: expected strings");
                e.synonyms.push_back(s.get<std::string>());
            }
        }
        if (c.contains("description") && !c["description"].is_null()) {
            if (!c["description"].is_string()) throw ConfigError(key + ".description: expected a string");
            e.description = c["description"].get<std::string>();
        }
        e.verbatim = c.value("verbatim", false);
        e.unseen = c.value("unseen", false);
        classes.push_back(std::move(e));
    }
    std::vector<std::string> backgrounds;
    if (j.contains("backgrounds")) {
        if (!j["backgrounds"].is_array()) throw ConfigError("backgrounds: expected an array");
        for (const auto& b : j["backgrounds"]) {
            if (!b.is_string()) throw ConfigError("backgrounds: expected strings");
            backgrounds.push_back(b.get<std::string>());
        }
    }
    return ClassTextBank(std::move(tmpl), std::move(classes), std::move(backgrounds));
}

ClassTextBank build_bank(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open bank file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("bank file " + path.string() + ": " + e.what());
    }
    return bank_from_json(j);
}

nlohmann::json bank_to_json(const ClassTextBank& bank) {
    nlohmann::json j;
    j["template"] = bank.template_text();
    j["classes"] = nlohmann::json::array();
    for (const auto& c : bank.classes()) {
        nlohmann::json e{{"id", c.id}, {"name", c.name}, {"synonyms", c.synonyms}};
        if (c.description) e["description"] = *c.description;
        if (c.verbatim) e["verbatim"] = true;
        if (c.unseen) e["unseen"] = true;
        j["classes"].push_back(std::move(e));
    }
    j["backgrounds"] = bank.backgrounds();
    return j;
}

std::string render_template(std::string_view template_text, std::string_view text) {
    const auto pos = template_text.find(kClassPlaceholder);
    if (pos == std::string_view::npos) throw ConfigError("template has no {CLASS} placeholder");
    std::string out(template_text.substr(0, pos));
    out += text;
    out += template_text.substr(pos + kClassPlaceholder.size());
    return out;
}

std::vector<PromptEntry> render_prompts(const ClassTextBank& bank) {
    std::vector<PromptEntry> out;
    const auto& t = bank.template_text();
    for (const auto& c : bank.classes()) {
        out.push_back({render_template(t, c.name), c.id, PromptKind::Original, c.name});
        for (const auto& s : c.synonyms) {
            out.push_back({render_template(t, s), c.id, PromptKind::Synonym, s});
        }
        if (c.description) {
            out.push_back({c.verbatim ? *c.description : render_template(t, *c.description), c.id,
                           PromptKind::Description, *c.description});
        }
    }
    for (const auto& b : bank.backgrounds()) {
        out.push_back({render_template(t, b), kBackground, PromptKind::Background, b});
    }
    return out;
}

}  // namespace rsseg
