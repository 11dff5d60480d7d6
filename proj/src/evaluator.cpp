#include "rsseg/evaluator.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

namespace rsseg {

double category_mean(const std::map<std::string, CategoryStat>& per_category) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [name, stat] : per_category) {
        if (stat.count == 0) continue;
        sum += stat.mean_iou;
        ++n;
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

namespace {

std::vector<std::string> keys_of(const std::map<std::string, CategoryStat>& m) {
    std::vector<std::string> out;
    for (const auto& [k, v] : m) out.push_back(k);
    return out;
}

void finish(EvalReport& r, std::map<std::string, std::pair<double, std::size_t>>& sums) {
    for (const auto& [cat, acc] : sums) {
        if (acc.second == 0) continue;
        r.per_category[cat] = {acc.first / static_cast<double>(acc.second), acc.second};
    }
    r.overall_miou = category_mean(r.per_category);
    r.taxonomy = keys_of(r.per_category);
}

}  // namespace

EvalReport proposal_miou(std::span<const GtInstance> gt, const std::map<std::string, MaskSet>& proposals) {
    EvalReport r;
    r.protocol = "proposal";
    std::map<std::string, std::pair<double, std::size_t>> sums;
    for (const auto& inst : gt) {
        if (!inst.mask.any()) {
            throw InvalidArgument("ground-truth instance of '" + inst.category + "' in image " + inst.image_id +
                                  " is empty");
        }
        double best = 0.0;
        if (auto it = proposals.find(inst.image_id); it != proposals.end()) {
            const MaskSet& set = it->second;
            if (!set.empty() && set.image_size() != size_of(inst.mask)) {
                throw ShapeMismatch("image " + inst.image_id + ": proposals are " + to_string(set.image_size()) +
                                    ", ground truth is " + to_string(size_of(inst.mask)));
            }
            for (const auto& p : set) best = std::max(best, mask_iou(p.grid(), inst.mask));
        }
        auto& acc = sums[inst.category];
        acc.first += best;
        acc.second += 1;
    }
    finish(r, sums);
    return r;
}

EvalReport image_level_miou(const CategoryMasks& preds, const CategoryMasks& gt) {
    EvalReport r;
    r.protocol = "image_level";
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& [k, v] : preds) keys.insert(k);
    for (const auto& [k, v] : gt) keys.insert(k);

    std::map<std::string, std::pair<double, std::size_t>> sums;
    static const std::vector<BinaryGrid> kNone;
    for (const auto& key : keys) {
        const auto pit = preds.find(key);
        const auto git = gt.find(key);
        const auto& p = pit == preds.end() ? kNone : pit->second;
        const auto& g = git == gt.end() ? kNone : git->second;
        if (p.empty() && g.empty()) continue;
        const BinaryGrid& ref = !g.empty() ? g.front() : p.front();
        const ImageSize size = size_of(ref);
        BinaryGrid pm, gm;
        try {
            pm = merge_masks(std::span<const BinaryGrid>(p), size);
            gm = merge_masks(std::span<const BinaryGrid>(g), size);
        } catch (const ShapeMismatch& e) {
            throw ShapeMismatch("image " + key.first + ", category '" + key.second + "': " + e.what());
        }
        const bool g_any = gm.any(), p_any = pm.any();
        if (!g_any && !p_any) continue;
        auto& acc = sums[key.second];
        acc.first += g_any ? mask_iou(pm, gm) : 0.0;
        acc.second += 1;
    }
    finish(r, sums);
    return r;
}

EvalReport split_report(EvalReport report, std::span<const std::string> unseen) {
    std::set<std::string> taxonomy(report.taxonomy.begin(), report.taxonomy.end());
    for (const auto& [k, v] : report.per_category) taxonomy.insert(k);
    std::set<std::string> held_out;
    for (const auto& u : unseen) {
        if (!taxonomy.contains(u)) throw InvalidArgument("unknown category '" + u + "' in unseen list");
        held_out.insert(u);
    }

    SplitAggregates s;
    s.all = report.overall_miou;
    std::map<std::string, CategoryStat> seen_stats, unseen_stats;
    for (const auto& cat : taxonomy) {
        const bool is_unseen = held_out.contains(cat);
        (is_unseen ? s.unseen_categories : s.seen_categories).push_back(cat);
        if (auto it = report.per_category.find(cat); it != report.per_category.end()) {
            (is_unseen ? unseen_stats : seen_stats)[cat] = it->second;
        }
    }
    if (!seen_stats.empty()) s.seen = category_mean(seen_stats);
    if (!unseen_stats.empty()) s.unseen = category_mean(unseen_stats);
    report.splits = std::move(s);
    return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["protocol"] = report.protocol;
    j["overall_miou"] = report.overall_miou;
    j["per_category"] = nlohmann::json::object();
    for (const auto& [cat, st] : report.per_category) {
        j["per_category"][cat] = {{"mean_iou", st.mean_iou}, {"count", st.count}};
    }
    j["taxonomy"] = report.taxonomy;
    if (report.splits) {
        const auto& s = *report.splits;
        nlohmann::json sj;
        sj["all"] = s.all;
        sj["seen"] = s.seen ? nlohmann::json(*s.seen) : nlohmann::json(nullptr);
        sj["unseen"] = s.unseen ? nlohmann::json(*s.unseen) : nlohmann::json(nullptr);
        sj["seen_categories"] = s.seen_categories;
        sj["unseen_categories"] = s.unseen_categories;
        j["splits"] = std::move(sj);
    }
    return j;
}

std::string report_table(const EvalReport& report) {
    std::ostringstream os;
    std::size_t width = 8;
    for (const auto& [cat, st] : report.per_category) width = std::max(width, cat.size());
    os << "protocol: " << report.protocol << "\n";
    os << std::left << std::setw(static_cast<int>(width)) << "category" << "  " << std::right << std::setw(6) << "n"
       << "  " << std::setw(8) << "IoU(%)" << "\n";
    os << std::fixed << std::setprecision(2);
    for (const auto& [cat, st] : report.per_category) {
        os << std::left << std::setw(static_cast<int>(width)) << cat << "  " << std::right << std::setw(6) << st.count
           << "  " << std::setw(8) << st.mean_iou * 100.0 << "\n";
    }
    os << std::left << std::setw(static_cast<int>(width)) << "mIoU" << "  " << std::right << std::setw(6) << ""
       << "  " << std::setw(8) << report.overall_miou * 100.0 << "\n";
    if (report.splits) {
        const auto& s = *report.splits;
        auto fmt = [](const std::optional<double>& v) {
            std::ostringstream o;
            if (v) o << std::fixed << std::setprecision(2) << *v * 100.0;
            else o << "-";
            return o.str();
        };
        os << "split: seen " << fmt(s.seen) << " (" << s.seen_categories.size() << " classes), unseen "
           << fmt(s.unseen) << " (" << s.unseen_categories.size() << " classes), all " << s.all * 100.0 << "\n";
    }
    return os.str();
}

}  // namespace rsseg
