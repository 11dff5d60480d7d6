#pragma once

#include "rsseg/core.hpp"
#include "rsseg/text_decoupler.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rsseg {

inline constexpr std::string_view kClassPlaceholder = "{CLASS}";

struct ClassEntry {
    ClassId id = 0;
    std::string name;
    std::vector<std::string> synonyms;
    std::optional<std::string> description;
    /// Render the description as-is instead of through the template.
    bool verbatim = false;
    /// Annotated held-out class for seen/unseen reporting. Never used for inference.
    bool unseen = false;
};

/// Which parts of the text bank are rendered. Used by the augmentation ablation.
struct BankAugment {
    bool synonyms = true;
    bool descriptions = true;
    bool backgrounds = true;
};

class ClassTextBank {
public:
    ClassTextBank(std::string template_text, std::vector<ClassEntry> classes, std::vector<std::string> backgrounds);

    const std::string& template_text() const { return template_; }
    const std::vector<ClassEntry>& classes() const { return classes_; }
    const std::vector<std::string>& backgrounds() const { return backgrounds_; }

    const ClassEntry* find(ClassId id) const;
    const ClassEntry* find(std::string_view name) const;
    /// Name for a class id; "background" for kBackground.
    std::string name_of(ClassId id) const;

    /// Same classes with a different template (validated).
    ClassTextBank with_template(std::string template_text) const;
    ClassTextBank with_augment(const BankAugment& aug) const;

    /// Originals and synonyms, lemma-normalised, for expression decoupling.
    ClassVocabulary vocabulary() const;
    std::vector<std::string> unseen_names() const;
    std::vector<std::string> class_names() const;

private:
    std::string template_;
    std::vector<ClassEntry> classes_;
    std::vector<std::string> backgrounds_;
};

enum class PromptKind { Original, Synonym, Description, Background };

std::string_view to_string(PromptKind k);

struct PromptEntry {
    std::string text;
    ClassId class_id = kBackground;
    PromptKind kind = PromptKind::Original;
    std::string source;  ///< bank text before templating
};

/// Named template presets for the template ablation.
struct TemplatePreset {
    std::string_view name;
    std::string_view text;
};
std::span<const TemplatePreset> template_presets();
std::string_view default_template();

ClassTextBank bank_from_json(const nlohmann::json& j);
ClassTextBank build_bank(const std::filesystem::path& path);
nlohmann::json bank_to_json(const ClassTextBank& bank);

std::string render_template(std::string_view template_text, std::string_view text);

/// Foreground entries ordered by class id then kind (original, synonyms,
/// description), backgrounds last.
std::vector<PromptEntry> render_prompts(const ClassTextBank& bank);

}  // namespace rsseg
