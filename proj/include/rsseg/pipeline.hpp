#pragma once

#include "rsseg/core.hpp"
#include "rsseg/encoder_gateway.hpp"
#include "rsseg/evaluator.hpp"
#include "rsseg/local_aligner.hpp"
#include "rsseg/mask_core.hpp"
#include "rsseg/mask_selector.hpp"
#include "rsseg/prompt_bank.hpp"
#include "rsseg/proposal_ingest.hpp"
#include "rsseg/saliency_fusion.hpp"
#include "rsseg/text_decoupler.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rsseg {

/// Colon-separated list of directories searched for relative adapter paths.
inline constexpr const char* kAdapterPathEnv = "RSSEG_ADAPTER_PATH";

std::string_view library_version();

struct EncoderSpec {
    std::string kind = "mock";  ///< mock | tensor-file
    std::filesystem::path path;
    Index dim = 64;
};

struct SaliencySpec {
    std::string kind = "mock";  ///< mock | tensor-file
    std::filesystem::path path;
    double theta = 0.5;
    int smooth = 1;
    bool normalize = true;
    GradCamMode mode = GradCamMode::Cross;
    bool selection = true;
    bool debug = false;  ///< export L_cs per expression
};

struct PipelineConfig {
    std::filesystem::path bank;
    /// Preset name or literal template; the bank's own template when unset.
    std::optional<std::string> template_text;
    BankAugment augment;
    CropConfig crop;
    double tau = 0.01;
    SaliencySpec saliency;
    FallbackPolicy fallback;
    EncoderSpec encoder;
    ProposalSource proposals;
    std::filesystem::path images;
    std::vector<std::string> image_ids;
    std::filesystem::path expressions;
    std::filesystem::path gt;
    std::vector<std::string> unseen;  ///< extra held-out names on top of the bank's flags
    std::filesystem::path out = "out";
    int workers = 1;
    std::uint64_t seed = 0;
};

/// Relative paths resolve against `base_dir`; adapter paths additionally
/// against each entry of RSSEG_ADAPTER_PATH. A manifest ({config: ...}) is
/// accepted in place of a bare config.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const PipelineConfig& cfg);

std::filesystem::path resolve_adapter_path(const std::filesystem::path& p, const std::filesystem::path& base_dir);

enum class Command { Ovss, Res, Eval, Overlay };
/// Throws ConfigError on a missing file or an out-of-range parameter.
void validate_config(const PipelineConfig& cfg, Command cmd);

void write_manifest(const std::filesystem::path& out, const std::string& command, const PipelineConfig& cfg);

// ---------------------------------------------------------------------------
// Annotations: {images: [{image_id, height, width, instances: [{category, rle}]}],
//               expressions: [{id, image_id, text, category?, height?, width?, rle?}]}

struct GtImage {
    std::string image_id;
    ImageSize size;
    std::vector<GtInstance> instances;
};

struct ExpressionRecord {
    std::string id;
    std::string image_id;
    std::string text;
    std::optional<std::string> category;
    std::optional<BinaryGrid> mask;
};

struct Annotations {
    std::vector<GtImage> images;
    std::vector<ExpressionRecord> expressions;

    const GtImage* find_image(const std::string& id) const;
};

Annotations annotations_from_json(const nlohmann::json& j);
nlohmann::json annotations_to_json(const Annotations& a);
Annotations read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path, const Annotations& a);

/// `<dir>/<id>.ppm`, falling back to `.pgm`.
std::filesystem::path image_path(const std::filesystem::path& dir, const std::string& image_id);
/// Image ids from the config list, else the GT file, else every netpbm file in the images directory.
std::vector<std::string> resolve_image_ids(const PipelineConfig& cfg);

// ---------------------------------------------------------------------------

struct RunSummary {
    std::string command;
    std::size_t items = 0;
    std::vector<std::string> failures;
    std::optional<nlohmann::json> eval;

    int exit_code() const { return failures.empty() ? 0 : 1; }
    nlohmann::json to_json() const;
};

/// Calls fn(i) for i in [0, n) on up to `workers` threads. Exceptions from fn
/// are captured per index; the returned messages are ordered by index.
std::vector<std::optional<std::string>> run_indexed(std::size_t n, int workers,
                                                    const std::function<void(std::size_t)>& fn);

/// Immutable per-run state shared by all workers.
class Engine {
public:
    explicit Engine(const PipelineConfig& cfg);
    Engine(const PipelineConfig& cfg, std::shared_ptr<const EmbeddingEncoder> encoder,
           std::shared_ptr<const SaliencyEncoder> saliency);

    const PipelineConfig& config() const { return cfg_; }
    const ClassTextBank& bank() const { return bank_; }
    const std::vector<PromptEntry>& prompts() const { return prompts_; }

    struct OvssOutput {
        Image image;
        MaskSet proposals;
        SegmentationResult result;
        std::vector<Rejection> rejected;
    };
    OvssOutput run_ovss(const std::string& image_id) const;
    OvssOutput run_ovss(const std::string& image_id, const Image& image) const;

    struct ResOutput {
        DecoupledExpression expr;
        std::vector<ClassId> targets;
        CrossScaleMaps maps;
        PeakSet peaks;
        ReferredSelection selection;
        BinaryGrid mask;  ///< exported mask (selected proposal or heatmap)
    };
    /// `ovss` must belong to the expression's image.
    ResOutput run_res(const ExpressionRecord& rec, const OvssOutput& ovss) const;

    nlohmann::json ovss_record(const OvssOutput& o) const;
    nlohmann::json res_record(const ExpressionRecord& rec, const ResOutput& r) const;

private:
    void init();

    PipelineConfig cfg_;
    ClassTextBank bank_;
    std::vector<PromptEntry> prompts_;
    std::vector<EmbeddingVector> text_feats_;
    std::shared_ptr<const EmbeddingEncoder> encoder_;
    std::shared_ptr<const SaliencyEncoder> saliency_;
    RuleBasedTagger tagger_;
    ClassVocabulary vocab_;
};

std::shared_ptr<const EmbeddingEncoder> make_encoder(const EncoderSpec& spec);
std::shared_ptr<const SaliencyEncoder> make_saliency(const SaliencySpec& spec);

RunSummary cmd_ovss(const PipelineConfig& cfg);
RunSummary cmd_res(const PipelineConfig& cfg);
/// Scores `<results>/ovss` and `<results>/res` against `gt`; writes
/// eval_report.json and eval_report.txt into `out`.
RunSummary cmd_eval(const std::filesystem::path& results, const std::filesystem::path& gt,
                    const std::vector<std::string>& unseen, const std::filesystem::path& out);
RunSummary cmd_overlay(const std::filesystem::path& results, const std::filesystem::path& images,
                       const std::filesystem::path& out);

/// table2 (crop variants), table3 (templates), table4 (bank augmentation),
/// table5 (Grad-CAM mode x mask selection).
std::vector<std::string> ablation_presets();
std::vector<std::pair<std::string, PipelineConfig>> expand_preset(const std::string& preset,
                                                                  const PipelineConfig& base);
RunSummary cmd_ablate(const std::string& preset, const PipelineConfig& base);

// ---------------------------------------------------------------------------
// Overlays

/// Stable per-class colour derived from the class name.
std::array<float, 3> palette_color(std::string_view name);

struct OverlayLegendEntry {
    std::string label;
    std::array<float, 3> color;
};

/// Three panels side by side (input, proposals, predictions) with one swatch
/// row per legend entry underneath.
Image render_overlay(const Image& image, const MaskSet& proposals,
                     const std::vector<std::pair<BinaryGrid, std::string>>& predictions,
                     std::vector<OverlayLegendEntry>* legend = nullptr);

// ---------------------------------------------------------------------------
// Synthetic datasets

struct SynthDataset {
    std::vector<std::string> image_ids;
    std::size_t expressions = 0;
    std::filesystem::path config;
};

/// Writes images/, proposals/, annotations.json, lookup tensor files under
/// adapters/ (one orthogonal vector per class, so each patch matches exactly
/// one class), saliency maps peaked on each expression's target, and a
/// ready-to-run config.json next to a copy of the bank.
SynthDataset write_synth_dataset(const std::vector<SceneSpec>& scenes, const ClassTextBank& bank,
                                 const std::filesystem::path& out);

}  // namespace rsseg
