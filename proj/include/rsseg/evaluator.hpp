#pragma once

#include "rsseg/core.hpp"
#include "rsseg/mask_core.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rsseg {

struct GtInstance {
    std::string image_id;
    std::string category;
    BinaryGrid mask;
};

struct CategoryStat {
    double mean_iou = 0.0;
    std::size_t count = 0;  ///< matched instances (proposal protocol) or scored images (image-level)
};

struct SplitAggregates {
    std::optional<double> seen;
    std::optional<double> unseen;
    double all = 0.0;
    std::vector<std::string> seen_categories;
    std::vector<std::string> unseen_categories;
};

struct EvalReport {
    std::string protocol;
    std::map<std::string, CategoryStat> per_category;
    double overall_miou = 0.0;
    /// Every category the report may mention; defaults to the scored ones.
    std::vector<std::string> taxonomy;
    std::optional<SplitAggregates> splits;
};

/// Each GT instance takes the IoU of its best proposal (0 with none); category
/// means, then an unweighted mean over categories. Unmatched proposals are not
/// penalised. Missing images count as having no proposals.
EvalReport proposal_miou(std::span<const GtInstance> gt, const std::map<std::string, MaskSet>& proposals);

/// Key: (image or expression id, category).
using CategoryMasks = std::map<std::pair<std::string, std::string>, std::vector<BinaryGrid>>;

/// Per (image, category): IoU of the merged predictions against the merged
/// ground truth. GT-empty/pred-empty pairs are skipped; GT-empty with
/// predictions scores 0.
EvalReport image_level_miou(const CategoryMasks& preds, const CategoryMasks& gt);

/// Adds seen/unseen aggregates. Throws InvalidArgument for a category outside
/// the report's taxonomy.
EvalReport split_report(EvalReport report, std::span<const std::string> unseen);

/// Unweighted mean of the per-category means; 0 for an empty report.
double category_mean(const std::map<std::string, CategoryStat>& per_category);

nlohmann::json report_to_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace rsseg
