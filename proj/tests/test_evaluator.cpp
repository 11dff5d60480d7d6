#include "test_util.hpp"

#include "rsseg/evaluator.hpp"
#include "rsseg/prompt_bank.hpp"

using namespace rsseg;
using rsseg::testing::random_blob;
using rsseg::testing::rect_grid;

namespace {

BinaryGrid strip(Index from, Index to) { return rect_grid({1, 40}, 0, from, 1, to - from); }

EvalReport hand_report() {
    EvalReport r;
    r.per_category = {{"a", {0.2, 1}}, {"b", {0.4, 1}}, {"c", {0.6, 1}}};
    r.overall_miou = category_mean(r.per_category);
    r.taxonomy = {"a", "b", "c"};
    return r;
}

}  // namespace

TEST(ProposalMiou, PerfectMatch) {
    std::vector<GtInstance> gt{{"im", "ship", rect_grid({8, 8}, 0, 0, 3, 3)}, {"im", "tank", rect_grid({8, 8}, 4, 4, 2, 3)}};
    MaskSet set("im", {8, 8});
    set.add(MaskProposal(0, gt[0].mask));
    set.add(MaskProposal(1, gt[1].mask));
    const auto r = proposal_miou(gt, {{"im", set}});
    EXPECT_DOUBLE_EQ(r.overall_miou, 1.0);
}

TEST(ProposalMiou, NoProposals) {
    std::vector<GtInstance> gt{{"im", "ship", rect_grid({8, 8}, 0, 0, 3, 3)}};
    EXPECT_DOUBLE_EQ(proposal_miou(gt, {}).overall_miou, 0.0);
    EXPECT_DOUBLE_EQ(proposal_miou(gt, {{"im", MaskSet("im", {8, 8})}}).overall_miou, 0.0);
}

TEST(ProposalMiou, BestMatchTable) {
    // GT1 = [0,10), GT2 = [20,30). IoU table:
    //   P0 [0,8)   : 0.8 / 0
    //   P1 [7,10)  : 0.3 / 0
    //   P2 [20,26) : 0   / 0.6
    //   P3 [28,30) : 0   / 0.2
    std::vector<GtInstance> gt{{"im", "a", strip(0, 10)}, {"im", "b", strip(20, 30)}};
    MaskSet set("im", {1, 40});
    set.add(MaskProposal(0, strip(0, 8)));
    set.add(MaskProposal(1, strip(7, 10)));
    set.add(MaskProposal(2, strip(20, 26)));
    set.add(MaskProposal(3, strip(28, 30)));
    EXPECT_DOUBLE_EQ(mask_iou(set.masks()[1].grid(), gt[0].mask), 0.3);
    EXPECT_DOUBLE_EQ(mask_iou(set.masks()[3].grid(), gt[1].mask), 0.2);
    const auto r = proposal_miou(gt, {{"im", set}});
    EXPECT_DOUBLE_EQ(r.per_category.at("a").mean_iou, 0.8);
    EXPECT_DOUBLE_EQ(r.per_category.at("b").mean_iou, 0.6);
    EXPECT_DOUBLE_EQ(r.overall_miou, 0.7);
}

TEST(ProposalMiou, OrderAndWorseProposalInvariance) {
    SplitMix64 rng(61);
    for (int t = 0; t < 50; ++t) {
        std::vector<GtInstance> gt;
        for (int k = 0; k < 3; ++k) gt.push_back({"im", k % 2 ? "x" : "y", random_blob(rng, {10, 10})});
        std::vector<BinaryGrid> props;
        for (int k = 0; k < 4; ++k) props.push_back(random_blob(rng, {10, 10}));
        MaskSet fwd("im", {10, 10}), rev("im", {10, 10});
        for (std::size_t k = 0; k < props.size(); ++k) fwd.add(MaskProposal(MaskId(k), props[k]));
        for (std::size_t k = props.size(); k-- > 0;) rev.add(MaskProposal(MaskId(k), props[k]));
        const double a = proposal_miou(gt, {{"im", fwd}}).overall_miou;
        EXPECT_DOUBLE_EQ(a, proposal_miou(gt, {{"im", rev}}).overall_miou);
        // A proposal disjoint from every GT instance is strictly worse for all of them.
        BinaryGrid any = BinaryGrid::Constant(10, 10, false);
        for (const auto& g : gt) any = any || g.mask;
        const BinaryGrid outside = !any;
        if (outside.any()) {
            fwd.add(MaskProposal(99, outside));
            EXPECT_DOUBLE_EQ(a, proposal_miou(gt, {{"im", fwd}}).overall_miou);
        }
    }
}

TEST(ProposalMiou, SizeMismatchNamesImage) {
    std::vector<GtInstance> gt{{"im7", "ship", rect_grid({8, 8}, 0, 0, 3, 3)}};
    MaskSet set("im7", {9, 8});
    set.add(MaskProposal(0, rect_grid({9, 8}, 0, 0, 1, 1)));
    try {
        proposal_miou(gt, {{"im7", set}});
        FAIL();
    } catch (const ShapeMismatch& e) {
        EXPECT_NE(std::string(e.what()).find("im7"), std::string::npos);
    }
}

TEST(ImageLevelMiou, Identity) {
    CategoryMasks gt{{{"i1", "ship"}, {rect_grid({4, 4}, 0, 0, 2, 2), rect_grid({4, 4}, 2, 2, 2, 2)}},
                     {{"i2", "tank"}, {rect_grid({4, 4}, 1, 1, 2, 2)}}};
    EXPECT_DOUBLE_EQ(image_level_miou(gt, gt).overall_miou, 1.0);
}

TEST(ImageLevelMiou, Disjoint) {
    CategoryMasks gt{{{"i1", "ship"}, {rect_grid({4, 4}, 0, 0, 2, 2)}}};
    CategoryMasks pr{{{"i1", "ship"}, {rect_grid({4, 4}, 2, 2, 2, 2)}}};
    EXPECT_DOUBLE_EQ(image_level_miou(pr, gt).overall_miou, 0.0);
}

TEST(ImageLevelMiou, HalfOverlapIsOneThird) {
    CategoryMasks gt{{{"i1", "ship"}, {rect_grid({4, 4}, 0, 0, 4, 2)}}};
    CategoryMasks pr{{{"i1", "ship"}, {rect_grid({4, 4}, 0, 0, 2, 4)}}};
    const auto r = image_level_miou(pr, gt);
    EXPECT_EQ(r.per_category.at("ship").mean_iou, 1.0 / 3.0);
    EXPECT_EQ(r.overall_miou, 1.0 / 3.0);
}

TEST(ImageLevelMiou, EmptyConventions) {
    CategoryMasks gt{{{"i1", "ship"}, {rect_grid({4, 4}, 0, 0, 2, 2)}}, {{"i2", "ship"}, {}}};
    CategoryMasks pr{{{"i1", "ship"}, {rect_grid({4, 4}, 0, 0, 2, 2)}},
                     {{"i2", "ship"}, {}},
                     {{"i3", "tank"}, {rect_grid({4, 4}, 0, 0, 1, 1)}}};
    const auto r = image_level_miou(pr, gt);
    EXPECT_DOUBLE_EQ(r.per_category.at("ship").mean_iou, 1.0);
    EXPECT_EQ(r.per_category.at("ship").count, 1u);
    EXPECT_DOUBLE_EQ(r.per_category.at("tank").mean_iou, 0.0);
    EXPECT_DOUBLE_EQ(r.overall_miou, 0.5);
}

TEST(ImageLevelMiou, OnlyTheUnionMatters) {
    SplitMix64 rng(62);
    for (int t = 0; t < 50; ++t) {
        const BinaryGrid g = random_blob(rng, {10, 10});
        const BinaryGrid a = random_blob(rng, {10, 10}), b = random_blob(rng, {10, 10});
        CategoryMasks gt{{{"i", "c"}, {g}}};
        const double split = image_level_miou({{{"i", "c"}, {a, b}}}, gt).overall_miou;
        const double merged = image_level_miou({{{"i", "c"}, {BinaryGrid(a || b)}}}, gt).overall_miou;
        EXPECT_DOUBLE_EQ(split, merged);
    }
}

TEST(ImageLevelMiou, UnweightedCategoryMean) {
    // Category "big" has three images, "small" one; overall is the mean of two means.
    CategoryMasks gt, pr;
    for (int i = 0; i < 3; ++i) {
        gt[{"i" + std::to_string(i), "big"}] = {rect_grid({4, 4}, 0, 0, 4, 4)};
        pr[{"i" + std::to_string(i), "big"}] = {rect_grid({4, 4}, 0, 0, 4, 4)};
    }
    gt[{"j", "small"}] = {rect_grid({4, 4}, 0, 0, 4, 2)};
    pr[{"j", "small"}] = {rect_grid({4, 4}, 0, 0, 2, 4)};
    EXPECT_DOUBLE_EQ(image_level_miou(pr, gt).overall_miou, (1.0 + 1.0 / 3.0) / 2.0);
}

TEST(ImageLevelMiou, SizeMismatchThrows) {
    CategoryMasks gt{{{"i1", "ship"}, {rect_grid({4, 4}, 0, 0, 2, 2)}}};
    CategoryMasks pr{{{"i1", "ship"}, {rect_grid({5, 4}, 0, 0, 2, 2)}}};
    EXPECT_THROW(image_level_miou(pr, gt), ShapeMismatch);
}

TEST(SplitReport, EmptyUnseenList) {
    const auto r = split_report(hand_report(), {});
    ASSERT_TRUE(r.splits.has_value());
    EXPECT_DOUBLE_EQ(*r.splits->seen, r.overall_miou);
    EXPECT_FALSE(r.splits->unseen.has_value());
}

TEST(SplitReport, HandFixture) {
    const std::vector<std::string> unseen{"c"};
    const auto r = split_report(hand_report(), unseen);
    EXPECT_DOUBLE_EQ(*r.splits->seen, 0.3);
    EXPECT_DOUBLE_EQ(*r.splits->unseen, 0.6);
    EXPECT_DOUBLE_EQ(r.splits->all, 0.4);
}

TEST(SplitReport, UnknownCategoryThrows) {
    const std::vector<std::string> unseen{"zebra"};
    EXPECT_THROW(split_report(hand_report(), unseen), InvalidArgument);
}

TEST(SplitReport, IsaidTaxonomyPartitionsElevenFour) {
    const auto bank = build_bank(std::filesystem::path(RSSEG_DATA_DIR) / "banks/isaid.json");
    EvalReport r;
    r.taxonomy = bank.class_names();
    for (const auto& name : r.taxonomy) r.per_category[name] = {0.5, 1};
    r.overall_miou = category_mean(r.per_category);
    const auto s = split_report(r, bank.unseen_names());
    EXPECT_EQ(s.splits->seen_categories.size(), 11u);
    EXPECT_EQ(s.splits->unseen_categories.size(), 4u);
}

TEST(SplitReport, CategoriesWithoutSamplesAreOmitted) {
    EvalReport r = hand_report();
    r.taxonomy.push_back("d");
    const std::vector<std::string> unseen{"c", "d"};
    const auto s = split_report(r, unseen);
    EXPECT_DOUBLE_EQ(*s.splits->unseen, 0.6);
    EXPECT_EQ(s.splits->unseen_categories.size(), 2u);
}

TEST(ReportExport, JsonAndTable) {
    const std::vector<std::string> unseen{"c"};
    const auto r = split_report(hand_report(), unseen);
    const auto j = report_to_json(r);
    EXPECT_DOUBLE_EQ(j["splits"]["unseen"].get<double>(), 0.6);
    EXPECT_EQ(j["per_category"].size(), 3u);
    const std::string table = report_table(r);
    EXPECT_NE(table.find("mIoU"), std::string::npos);
    EXPECT_NE(table.find("unseen 60.00"), std::string::npos);
}
