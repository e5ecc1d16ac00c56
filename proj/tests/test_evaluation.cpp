#include <doctest.h>

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "tscn/evaluation.hpp"
#include "tscn/random.hpp"

using namespace tscn;

namespace {

using Props = std::vector<ActionProposal>;
using Gts = std::vector<GroundTruthSegment>;

// Two classes, three videos, five proposals. At IoU 0.5 class 0 ranks
// TP, FP, TP over two GT and class 1 ranks TP, FP over two GT.
Gts fixture_gt() {
    return {{"v1", 0, 10, 0}, {"v1", 20, 30, 1}, {"v2", 5, 15, 0}, {"v3", 0, 8, 1}};
}

Props fixture_props() {
    return {{"v1", 1, 10, 0, 0.9}, {"v2", 30, 40, 0, 0.8}, {"v2", 6, 15, 0, 0.7}, {"v3", 0, 8, 1, 0.6},
            {"v1", 0, 5, 1, 0.5}};
}

Props of_class(const Props& p, std::size_t c) {
    Props out;
    for (const auto& x : p)
        if (x.category == c) out.push_back(x);
    return out;
}

Gts of_class(const Gts& g, std::size_t c) {
    Gts out;
    for (const auto& x : g)
        if (x.category == c) out.push_back(x);
    return out;
}

// Random fixture with integer boundaries and coarse scores so that ties and
// overlapping candidates are common.
void random_fixture(Rng& rng, Props& props, Gts& gt) {
    const std::size_t videos = 1 + rng.below(3);
    const std::size_t classes = 1 + rng.below(2);
    auto vid = [&] { return "v" + std::to_string(rng.below(videos)); };
    auto interval = [&](double& s, double& e) {
        s = static_cast<double>(rng.below(10));
        e = s + 1.0 + static_cast<double>(rng.below(6));
    };
    gt.clear();
    const std::size_t n_gt = 1 + rng.below(4);
    for (std::size_t i = 0; i < n_gt; ++i) {
        GroundTruthSegment g{vid(), 0, 0, rng.below(classes)};
        interval(g.start, g.end);
        gt.push_back(g);
    }
    props.clear();
    const std::size_t n_p = rng.below(7);
    for (std::size_t i = 0; i < n_p; ++i) {
        ActionProposal p{vid(), 0, 0, rng.below(classes), 0.1 * static_cast<double>(1 + rng.below(5))};
        if (rng.bernoulli(0.5) && !gt.empty()) {
            // Jitter a GT segment to get plausible hits.
            const auto& g = gt[rng.below(gt.size())];
            p.video_id = g.video_id;
            p.category = g.category;
            p.start = g.start + static_cast<double>(rng.below(3)) - 1.0;
            p.end = g.end + static_cast<double>(rng.below(3)) - 1.0;
            if (p.end <= p.start) p.end = p.start + 1.0;
        } else {
            interval(p.start, p.end);
        }
        props.push_back(p);
    }
}

}  // namespace

TEST_CASE("iou examples") {
    CHECK(iou({2, 6}, {2, 6}) == 1.0);
    CHECK(iou({2, 6}, {4, 8}) == doctest::Approx(1.0 / 3.0));
    CHECK(iou({0, 1}, {3, 4}) == 0.0);
    CHECK(iou({0, 1}, {1, 2}) == 0.0);
    CHECK_THROWS(iou({3, 1}, {0, 4}));
}

TEST_CASE("average precision examples") {
    const Gts one{{"v", 0, 4, 0}};
    CHECK(average_precision(Props{{"v", 0, 4, 0, 0.9}}, one, 0.5) == 1.0);
    CHECK(average_precision(Props{{"v", 0, 4, 0, 0.9}, {"v", 10, 14, 0, 0.3}}, one, 0.5) == 1.0);
    CHECK(average_precision(Props{{"v", 0, 4, 0, 0.3}, {"v", 10, 14, 0, 0.9}}, one, 0.5) == 0.5);
    CHECK(average_precision(Props{}, one, 0.5) == 0.0);
    CHECK_THROWS_AS(average_precision(Props{{"v", 0, 4, 0, 0.9}}, Gts{}, 0.5), std::domain_error);

    const double ap = average_precision(of_class(fixture_props(), 0), of_class(fixture_gt(), 0), 0.5);
    CHECK(std::abs(ap - 0.833333333333333) <= 1e-9);
}

TEST_CASE("each ground truth segment is matched at most once") {
    const Gts one{{"v", 0, 4, 0}};
    const Props dup{{"v", 0, 4, 0, 0.9}, {"v", 0, 4, 0, 0.8}};
    const auto ranked = rank_proposals(dup);
    CHECK(match_proposals(ranked, one, 0.5) == std::vector<bool>{true, false});
    CHECK(average_precision(dup, one, 0.5) == 1.0);
}

TEST_CASE("matching is per video and per class") {
    const Gts gt{{"a", 0, 4, 0}};
    CHECK(match_proposals(Props{{"b", 0, 4, 0, 1.0}}, gt, 0.5) == std::vector<bool>{false});
    CHECK(match_proposals(Props{{"a", 0, 4, 1, 1.0}}, gt, 0.5) == std::vector<bool>{false});
    CHECK(match_proposals(Props{{"a", 0, 4, 0, 1.0}}, gt, 0.5) == std::vector<bool>{true});
}

TEST_CASE("a proposal takes the unmatched segment it overlaps most") {
    const Gts gt{{"v", 0, 10, 0}, {"v", 4, 12, 0}};
    const Props props{{"v", 4, 11, 0, 0.9}, {"v", 0, 9, 0, 0.8}};
    const auto ranked = rank_proposals(props);
    CHECK(match_proposals(ranked, gt, 0.5) == std::vector<bool>{true, true});
}

TEST_CASE("ranking breaks score ties by start then video id") {
    const Props props{{"b", 3, 5, 0, 0.5}, {"a", 3, 5, 0, 0.5}, {"c", 1, 5, 0, 0.5}, {"z", 9, 10, 0, 0.7}};
    const auto r = rank_proposals(props);
    CHECK(r[0].video_id == "z");
    CHECK(r[1].video_id == "c");
    CHECK(r[2].video_id == "a");
    CHECK(r[3].video_id == "b");
}

TEST_CASE("fixture evaluation matches hand-computed values") {
    const auto rep = evaluate(fixture_props(), fixture_gt(), 2, std::vector<double>{0.5, 0.95});
    REQUIRE(rep.rows.size() == 2);
    CHECK(rep.rows[0].class_ap[0] == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    CHECK(rep.rows[0].class_ap[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.map_at(0.5) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(rep.map_at(0.95) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(rep.average_map == doctest::Approx((2.0 / 3.0 + 0.25) / 2.0).epsilon(1e-12));
    CHECK(rep.precision == doctest::Approx(0.6));
    CHECK(rep.recall == doctest::Approx(0.75));
    CHECK(rep.f_measure == doctest::Approx(2.0 / 3.0));
    CHECK(rep.true_positives == 3);
    CHECK(rep.false_positives == 2);
    CHECK(rep.num_ground_truth == 4);
    CHECK(rep.num_proposals == 5);
    CHECK_THROWS(rep.map_at(0.3));
}

TEST_CASE("precision, recall and F examples") {
    const Gts gt{{"v", 0, 4, 0}, {"v", 10, 14, 0}};
    const auto half = precision_recall_f(Props{{"v", 0, 4, 0, 0.9}, {"v", 20, 24, 0, 0.8}}, gt);
    CHECK(half.precision == 0.5);
    CHECK(half.recall == 0.5);
    CHECK(half.f_measure == 0.5);
    const auto full = precision_recall_f(Props{{"v", 0, 4, 0, 0.9}, {"v", 10, 14, 0, 0.8}}, gt);
    CHECK(full.precision == 1.0);
    CHECK(full.recall == 1.0);
    CHECK(full.f_measure == 1.0);
    const auto none = precision_recall_f(Props{}, gt);
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f_measure == 0.0);
}

TEST_CASE("perfect and empty proposal sets") {
    const auto gt = fixture_gt();
    Props perfect;
    for (const auto& g : gt) perfect.push_back({g.video_id, g.start, g.end, g.category, 1.0});
    const auto th = thumos_thresholds();
    const auto best = evaluate(perfect, gt, 2, th);
    for (const auto& row : best.rows) CHECK(row.map == 1.0);
    CHECK(best.f_measure == 1.0);
    const auto empty = evaluate(Props{}, gt, 2, th);
    for (const auto& row : empty.rows) CHECK(row.map == 0.0);
    CHECK(empty.f_measure == 0.0);
}

TEST_CASE("classes without ground truth are excluded and noted") {
    const Gts gt{{"v", 0, 4, 0}};
    const auto rep = evaluate(Props{{"v", 0, 4, 0, 0.9}, {"v", 5, 9, 2, 0.9}}, gt, 3, std::vector<double>{0.5});
    CHECK(rep.map_at(0.5) == 1.0);
    CHECK(std::isnan(rep.rows[0].class_ap[1]));
    CHECK(std::isnan(rep.rows[0].class_ap[2]));
    CHECK_FALSE(rep.notes.empty());
    CHECK_THROWS(evaluate(Props{}, Gts{}, 3, std::vector<double>{0.5}));
}

TEST_CASE("implementation agrees with the brute-force oracle on random fixtures") {
    Rng rng(51);
    for (int trial = 0; trial < 3000; ++trial) {
        Props props;
        Gts gt;
        random_fixture(rng, props, gt);
        for (double th : {0.1, 0.3, 0.5, 0.7}) {
            const auto rep = evaluate(props, gt, 2, std::vector<double>{th});
            const double expect = oracle::mean_average_precision(props, gt, 2, th);
            CHECK(std::abs(rep.rows[0].map - expect) <= 1e-9);
        }
    }
}

TEST_CASE("average precision depends only on score order") {
    Rng rng(52);
    for (int trial = 0; trial < 500; ++trial) {
        Props props;
        Gts gt;
        random_fixture(rng, props, gt);
        auto gt0 = of_class(gt, 0);
        if (gt0.empty()) continue;
        auto p0 = of_class(props, 0);
        const double ap = average_precision(p0, gt0, 0.5);
        auto transformed = p0;
        for (auto& p : transformed) p.score = std::exp(3.0 * p.score) + 7.0;
        CHECK(average_precision(transformed, gt0, 0.5) == doctest::Approx(ap).epsilon(1e-12));
    }
}

TEST_CASE("a lowest-scored false positive never raises AP and a true positive never lowers recall") {
    Rng rng(53);
    for (int trial = 0; trial < 500; ++trial) {
        Props props;
        Gts gt;
        random_fixture(rng, props, gt);
        auto gt0 = of_class(gt, 0);
        if (gt0.empty()) continue;
        auto p0 = of_class(props, 0);
        const double ap = average_precision(p0, gt0, 0.5);
        auto with_fp = p0;
        with_fp.push_back({"elsewhere", 0, 5, 0, 0.0});
        CHECK(average_precision(with_fp, gt0, 0.5) <= ap + 1e-15);

        const double recall = precision_recall_f(p0, gt0).recall;
        auto with_tp = p0;
        const auto& g = gt0[rng.below(gt0.size())];
        with_tp.push_back({g.video_id, g.start, g.end, 0, rng.uniform()});
        CHECK(precision_recall_f(with_tp, gt0).recall >= recall);
    }
}

TEST_CASE("report json and table") {
    const auto rep = evaluate(fixture_props(), fixture_gt(), 2, std::vector<double>{0.5, 0.95});
    const auto j = nlohmann::json::parse(rep.to_json({"jump", "run"}));
    CHECK(j.is_object());
    const auto table = rep.to_table({"jump", "run"});
    CHECK(table.find("jump") != std::string::npos);
    CHECK(table.find("0.50") != std::string::npos);
}

TEST_CASE("ground truth conversion uses the continuous snippet axis") {
    Dataset ds;
    ds.num_classes = 2;
    VideoSample v;
    v.id = "x";
    v.gt_segments = std::vector<Segment>{{3, 5, 1}};
    ds.videos.push_back(v);
    const auto gt = ground_truth_of(ds);
    REQUIRE(gt.size() == 1);
    CHECK(gt[0].start == 2.0);
    CHECK(gt[0].end == 5.0);
    CHECK(gt[0].category == 1);
}

TEST_CASE("threshold lists") {
    const auto t = thumos_thresholds();
    CHECK(t.size() == 9);
    CHECK(t.front() == doctest::Approx(0.1));
    const auto a = activitynet_thresholds();
    CHECK(a.size() == 10);
    CHECK(a.back() == doctest::Approx(0.95));
}
