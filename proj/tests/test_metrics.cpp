#include "doctest.h"

#include "spinebench/error.hpp"
#include "spinebench/metrics.hpp"

#include "support.hpp"

using namespace spinebench;
using testing::Grid;

namespace {

CentroidSet centroids(std::initializer_list<std::pair<int, Point3>> items) {
    CentroidSet s;
    for (const auto& [code, p] : items) s.insert(VertebraLabel(code), p);
    return s;
}

std::vector<Point3> sorted(std::vector<Point3> v) {
    std::sort(v.begin(), v.end(), [](const Point3& a, const Point3& b) {
        return std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z);
    });
    return v;
}

}  // namespace

TEST_CASE("surface of small solids") {
    SUBCASE("isolated voxel") {
        Grid g({5, 5, 5});
        g.at(2, 3, 1) = 4;
        const auto s = extract_surface(g.volume({1, 2, 3}), VertebraLabel(4));
        REQUIRE(s.points.size() == 1);
        CHECK(s.points[0] == Point3{2, 6, 3});
    }
    SUBCASE("3x3x3 block keeps all but its center") {
        Grid g({5, 5, 5});
        g.box(1, {1, 1, 1}, {3, 3, 3});
        CHECK(extract_surface(g.volume(), VertebraLabel(1)).points.size() == 26);
    }
    SUBCASE("10^3 block has 488 surface voxels") {
        Grid g({12, 12, 12});
        g.box(1, {1, 1, 1}, {10, 10, 10});
        CHECK(extract_surface(g.volume(), VertebraLabel(1)).points.size() == 10 * 10 * 10 - 8 * 8 * 8);
    }
    SUBCASE("grid border counts as different") {
        Grid g({3, 3, 3});
        g.box(1, {0, 0, 0}, {3, 3, 3});
        CHECK(extract_surface(g.volume(), VertebraLabel(1)).points.size() == 26);
    }
    SUBCASE("absent label") {
        Grid g({3, 3, 3});
        CHECK_THROWS_AS((void)extract_surface(g.volume(), VertebraLabel(1)), Error);
    }
}

TEST_CASE("surface extraction matches neighbour inspection on random multi-label blobs") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        Grid g({9, 7, 8});
        for (std::uint8_t code : {std::uint8_t{3}, std::uint8_t{4}, std::uint8_t{28}}) testing::grow_blob(g, code, rng, 60);
        const auto vol = g.volume({0.7, 1.1, 2.3});
        const auto all = extract_surfaces(vol);
        for (auto label : vol.labels()) {
            const auto oracle = sorted(testing::brute_surface(vol, label.code()));
            CHECK(sorted(extract_surface(vol, label).points) == oracle);
            CHECK(sorted(all.at(label).points) == oracle);
        }
    }
}

TEST_CASE("Dice of a shifted cube") {
    Grid gt({20, 12, 12}), pred({20, 12, 12});
    gt.box(20, {1, 1, 1}, {10, 10, 10});
    pred.box(20, {6, 1, 1}, {10, 10, 10});
    const auto d = dice_per_label(gt.volume(), pred.volume());
    CHECK(d.at(VertebraLabel(20)) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d.at(VertebraLabel(20)) == testing::brute_dice(gt.v, pred.v, 20));
}

TEST_CASE("Dice basics") {
    Grid gt({6, 6, 6});
    gt.box(1, {0, 0, 0}, {3, 3, 3});
    gt.box(2, {3, 3, 3}, {3, 3, 3});
    Grid empty({6, 6, 6});
    const auto same = dice_per_label(gt.volume(), gt.volume());
    CHECK(same.at(VertebraLabel(1)) == 1.0);
    CHECK(same.at(VertebraLabel(2)) == 1.0);
    const auto none = dice_per_label(gt.volume(), empty.volume());
    CHECK(none.at(VertebraLabel(1)) == 0.0);
    CHECK(none.at(VertebraLabel(2)) == 0.0);
    Grid other({6, 6, 7});
    CHECK_THROWS_AS((void)dice_per_label(gt.volume(), other.volume()), Error);
}

TEST_CASE("Hausdorff of shifted cubes") {
    Grid gt({20, 14, 20}), px({20, 14, 20}), pz({20, 14, 20});
    gt.box(9, {1, 1, 1}, {10, 10, 10});
    px.box(9, {4, 1, 1}, {10, 10, 10});
    pz.box(9, {1, 1, 4}, {10, 10, 10});
    CHECK(hausdorff_per_label(gt.volume(), px.volume()).at(VertebraLabel(9)) == 3.0);
    CHECK(hausdorff_per_label(gt.volume({1, 1, 2}), pz.volume({1, 1, 2})).at(VertebraLabel(9)) == 6.0);
    CHECK(hausdorff_per_label(gt.volume(), gt.volume()).at(VertebraLabel(9)) == 0.0);

    Grid shifted5({20, 14, 20});
    shifted5.box(9, {6, 1, 1}, {10, 10, 10});
    CHECK(hausdorff_per_label(gt.volume(), shifted5.volume()).at(VertebraLabel(9)) == 5.0);
}

TEST_CASE("Hausdorff equals the all-pairs oracle on random blobs") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::int64_t> side(2, 20);
    std::uniform_real_distribution<double> spacing(0.3, 3.0);
    for (int trial = 0; trial < 60; ++trial) {
        Grid a({side(rng), side(rng), side(rng)});
        Grid b(a.dims);
        std::uniform_int_distribution<int> steps(1, 400);
        testing::grow_blob(a, 7, rng, steps(rng));
        testing::grow_blob(b, 7, rng, steps(rng));
        const Spacing sp{spacing(rng), spacing(rng), spacing(rng)};
        const auto va = a.volume(sp, {1.5, -2.0, 30.0});
        const auto vb = b.volume(sp, {1.5, -2.0, 30.0});
        const auto sa = testing::brute_surface(va, 7);
        const auto sb = testing::brute_surface(vb, 7);
        CHECK(hausdorff_distance(sa, sb) == testing::brute_hausdorff(sa, sb));
        CHECK(hausdorff_per_label(va, vb).at(VertebraLabel(7)) == testing::brute_hausdorff(sa, sb));
    }
}

TEST_CASE("Hausdorff is symmetric and scales with spacing") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        Grid a({12, 12, 12}), b({12, 12, 12});
        testing::grow_blob(a, 2, rng, 150);
        testing::grow_blob(b, 2, rng, 150);
        const double ab = hausdorff_per_label(a.volume(), b.volume()).at(VertebraLabel(2)).value();
        const double ba = hausdorff_per_label(b.volume(), a.volume()).at(VertebraLabel(2)).value();
        CHECK(ab == ba);
        const double scaled = hausdorff_per_label(a.volume({2, 2, 2}), b.volume({2, 2, 2})).at(VertebraLabel(2)).value();
        CHECK(scaled == doctest::Approx(2.0 * ab).epsilon(1e-12));
    }
}

TEST_CASE("translation of both volumes leaves Dice and HD unchanged") {
    std::mt19937_64 rng(29);
    Grid a({10, 10, 10}), b({10, 10, 10});
    testing::grow_blob(a, 12, rng, 200);
    testing::grow_blob(b, 12, rng, 200);
    Grid big_a({16, 15, 14}), big_b({16, 15, 14});
    for (std::int64_t k = 0; k < 10; ++k)
        for (std::int64_t j = 0; j < 10; ++j)
            for (std::int64_t i = 0; i < 10; ++i) {
                big_a.at(i + 3, j + 4, k + 2) = a.get(i, j, k);
                big_b.at(i + 3, j + 4, k + 2) = b.get(i, j, k);
            }
    const VertebraLabel l(12);
    CHECK(dice_per_label(a.volume(), b.volume()).at(l) == dice_per_label(big_a.volume(), big_b.volume()).at(l));
    CHECK(hausdorff_per_label(a.volume(), b.volume()).at(l) == hausdorff_per_label(big_a.volume(), big_b.volume()).at(l));
}

TEST_CASE("hausdorff_distance on empty input") {
    std::vector<Point3> a{{0, 0, 0}}, none;
    CHECK_THROWS_AS((void)hausdorff_distance(a, none), Error);
}

TEST_CASE("identification rule") {
    SUBCASE("exact prediction") {
        const auto gt = centroids({{1, {0, 0, 0}}, {2, {0, 0, 30}}});
        const auto r = identify(gt, gt);
        for (const auto& [l, id] : r) {
            CHECK(id.identified);
            CHECK(id.distance_mm == 0.0);
        }
    }
    SUBCASE("18 mm but nearer to another vertebra") {
        const auto gt = centroids({{1, {0, 0, 0}}, {2, {0, 0, 30}}});
        const auto pred = centroids({{1, {0, 0, 18}}, {2, {0, 0, 30}}});
        const auto r = identify(gt, pred);
        CHECK_FALSE(r.at(VertebraLabel(1)).identified);
        CHECK(r.at(VertebraLabel(1)).distance_mm == 18.0);
        CHECK(r.at(VertebraLabel(2)).identified);
    }
    SUBCASE("equidistant from two GT centroids fails") {
        const auto gt = centroids({{1, {0, 0, 0}}, {2, {0, 0, 30}}});
        const auto pred = centroids({{1, {0, 0, 15}}});
        CHECK_FALSE(identify(gt, pred).at(VertebraLabel(1)).identified);
    }
    SUBCASE("exactly 20 mm fails, just below passes") {
        const auto gt = centroids({{5, {0, 0, 0}}});
        CHECK_FALSE(identify(gt, centroids({{5, {20, 0, 0}}})).at(VertebraLabel(5)).identified);
        CHECK(identify(gt, centroids({{5, {19.999, 0, 0}}})).at(VertebraLabel(5)).identified);
    }
    SUBCASE("missing prediction") {
        const auto gt = centroids({{5, {0, 0, 0}}, {6, {0, 0, -25}}});
        const auto r = identify(gt, centroids({{6, {0, 0, -25}}}));
        CHECK_FALSE(r.at(VertebraLabel(5)).identified);
        CHECK_FALSE(r.at(VertebraLabel(5)).distance_mm.has_value());
    }
    SUBCASE("one of five displaced by 25 mm") {
        CentroidSet gt, pred;
        for (int c = 1; c <= 5; ++c) {
            gt.insert(VertebraLabel(c), {0, 0, -30.0 * c});
            pred.insert(VertebraLabel(c), {c == 3 ? 25.0 : 0.0, 0, -30.0 * c});
        }
        Grid g({2, 2, 2});
        const auto ev = evaluate_scan("s", g.volume(), g.volume(), gt, pred, EvalMode::analysis);
        CHECK(ev.id_rate == 0.8);
        CHECK(ev.n_identified == 4);
    }
}

TEST_CASE("well separated ground truth with small errors is always identified") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> radius(0.0, 19.99);
    for (int trial = 0; trial < 500; ++trial) {
        CentroidSet gt, pred;
        const int n = 2 + static_cast<int>(rng() % 10);
        for (int c = 1; c <= n; ++c) {
            const Point3 x{unit(rng) * 2, unit(rng) * 2, -50.0 * c - std::abs(unit(rng)) * 5};
            Point3 dir{unit(rng), unit(rng), unit(rng)};
            if (norm(dir) < 1e-3) dir = {1, 0, 0};
            gt.insert(VertebraLabel(c), x);
            pred.insert(VertebraLabel(c), x + (radius(rng) / norm(dir)) * dir);
        }
        // guarantee the premise before using it
        bool separated = true;
        for (const auto& [a, pa] : gt.entries())
            for (const auto& [b, pb] : gt.entries())
                if (a != b && distance(pa, pb) <= 40.0) separated = false;
        REQUIRE(separated);
        Grid g({1, 1, 1});
        CHECK(evaluate_scan("s", g.volume(), g.volume(), gt, pred, EvalMode::analysis).id_rate == 1.0);
    }
}

TEST_CASE("outlier rule versus ranking substitution") {
    Grid gt({40, 12, 12}), pred({40, 12, 12});
    CentroidSet gt_ctd, pred_ctd;
    for (int n = 0; n < 4; ++n) {
        const std::uint8_t code = static_cast<std::uint8_t>(20 + n);
        gt.box(code, {1 + 9 * n, 1, 1}, {8, 8, 8});
        gt_ctd.insert(VertebraLabel(code), {4.5 + 9 * n, 4.5, 4.5});
        if (n == 3) continue;
        pred.box(code, {1 + 9 * n, 1, 1}, {8, 8, 8});
        pred_ctd.insert(VertebraLabel(code), {4.5 + 9 * n, 4.5, 4.5});
    }
    const auto a = evaluate_scan("s", gt.volume(), pred.volume(), gt_ctd, pred_ctd, EvalMode::analysis);
    CHECK(a.d_mean_mm == 0.0);
    CHECK(a.dice_mean == 0.75);
    CHECK(a.hd_mean_mm == 0.0);
    CHECK(a.id_rate == 0.75);
    CHECK_FALSE(a.per_vertebra.at(VertebraLabel(23)).hd_mm.has_value());
    CHECK_FALSE(a.per_vertebra.at(VertebraLabel(23)).dist_mm.has_value());
    CHECK(a.per_vertebra.at(VertebraLabel(23)).dice == 0.0);

    const auto r = evaluate_scan("s", gt.volume(), pred.volume(), gt_ctd, pred_ctd, EvalMode::ranking19);
    CHECK(r.d_mean_mm == 250.0);
    CHECK(r.hd_mean_mm == 25.0);
    CHECK(r.dice_mean == 0.75);
    CHECK(r.per_vertebra.at(VertebraLabel(23)).hd_mm == 100.0);
    CHECK(r.per_vertebra.at(VertebraLabel(23)).dist_mm == 1000.0);

    const auto r20 = evaluate_scan("s", gt.volume(), pred.volume(), gt_ctd, pred_ctd, EvalMode::ranking20);
    CHECK(r20.d_mean_mm == a.d_mean_mm);
    CHECK(r20.hd_mean_mm == a.hd_mean_mm);
    CHECK(r20.dice_mean == a.dice_mean);
    CHECK(r20.id_rate == a.id_rate);
}

TEST_CASE("substitution constants") {
    CHECK(identification_radius_mm == 20.0);
    CHECK(missing_centroid_distance_mm == 1000.0);
    CHECK(missing_hausdorff_mm == 100.0);
}

TEST_CASE("ranking19 distance never falls below the analysis value when a vertebra is missing") {
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> err(0.0, 60.0);
    Grid g({1, 1, 1});
    for (int trial = 0; trial < 200; ++trial) {
        CentroidSet gt, pred;
        for (int c = 8; c <= 14; ++c) {
            gt.insert(VertebraLabel(c), {0, 0, -25.0 * c});
            if (c == 10 || rng() % 4 != 0) pred.insert(VertebraLabel(c), {err(rng), 0, -25.0 * c});
        }
        if (pred.size() == gt.size()) continue;
        const auto a = evaluate_scan("s", g.volume(), g.volume(), gt, pred, EvalMode::analysis);
        const auto r = evaluate_scan("s", g.volume(), g.volume(), gt, pred, EvalMode::ranking19);
        CHECK(*r.d_mean_mm >= *a.d_mean_mm);
    }
}

TEST_CASE("extra predicted labels are reported, not scored") {
    Grid gt({10, 4, 4}), pred({10, 4, 4});
    gt.box(1, {0, 0, 0}, {3, 3, 3});
    pred.box(1, {0, 0, 0}, {3, 3, 3});
    pred.box(2, {5, 0, 0}, {3, 3, 3});
    const auto gt_ctd = centroids({{1, {1, 1, 1}}});
    const auto pred_ctd = centroids({{1, {1, 1, 1}}, {3, {9, 9, 9}}});
    const auto ev = evaluate_scan("s", gt.volume(), pred.volume(), gt_ctd, pred_ctd, EvalMode::analysis);
    CHECK(ev.dice_mean == 1.0);
    CHECK(ev.id_rate == 1.0);
    CHECK(ev.extra_pred_labels == std::vector<VertebraLabel>{VertebraLabel(2), VertebraLabel(3)});
    CHECK(ev.per_vertebra.size() == 1);
}

TEST_CASE("no centroids leaves labelling metrics unset") {
    Grid g({4, 4, 4});
    g.box(3, {0, 0, 0}, {2, 2, 2});
    const auto ev = evaluate_scan("s", g.volume(), g.volume(), {}, {}, EvalMode::ranking19);
    CHECK_FALSE(ev.id_rate.has_value());
    CHECK_FALSE(ev.d_mean_mm.has_value());
    CHECK(ev.n_gt == 0);
    CHECK(ev.dice_mean == 1.0);
}

TEST_CASE("perfect prediction") {
    Grid g({30, 10, 10});
    g.box(20, {0, 0, 0}, {8, 8, 8});
    g.box(21, {10, 0, 0}, {8, 8, 8});
    const auto ctd = centroids({{20, {3.5, 3.5, 3.5}}, {21, {13.5, 3.5, 3.5}}});
    for (auto mode : {EvalMode::analysis, EvalMode::ranking19, EvalMode::ranking20}) {
        const auto ev = evaluate_scan("s", g.volume(), g.volume(), ctd, ctd, mode);
        CHECK(ev.id_rate == 1.0);
        CHECK(ev.d_mean_mm == 0.0);
        CHECK(ev.dice_mean == 1.0);
        CHECK(ev.hd_mean_mm == 0.0);
        CHECK(ev.extra_pred_labels.empty());
    }
}

TEST_CASE("scan and dataset aggregation") {
    ScanEvaluation a, b;
    a.scan_id = "a";
    a.n_gt = 2;
    a.n_identified = 2;
    a.id_rate = 1.0;
    b.scan_id = "b";
    b.n_gt = 8;
    b.n_identified = 0;
    b.id_rate = 0.0;
    const std::vector<ScanEvaluation> evals{a, b};
    CHECK(aggregate_scan_level(evals).id_rate.mean == 0.5);
    CHECK(aggregate_dataset_level(evals).id_rate == 0.2);

    const auto single = aggregate_cohort(std::span(evals).first(1), AggregationLevel::dataset);
    CHECK(single.dataset->id_rate == 1.0);

    std::vector<ScanEvaluation> d(3);
    const double dm[] = {1, 2, 9};
    for (int n = 0; n < 3; ++n) d[n].d_mean_mm = dm[n];
    const auto agg = aggregate_scan_level(d);
    CHECK(agg.d_mean_mm.mean == 4.0);
    CHECK(agg.d_mean_mm.median == 2.0);
    CHECK(agg.d_mean_mm.count == 3);
    CHECK_FALSE(agg.dice_mean.mean.has_value());

    CHECK_THROWS_AS((void)aggregate_scan_level({}), Error);
    CHECK_THROWS_AS((void)aggregate_dataset_level({}), Error);
}

TEST_CASE("dataset level pools distances over vertebrae") {
    ScanEvaluation a, b;
    a.per_vertebra[VertebraLabel(1)].dist_mm = 1.0;
    b.per_vertebra[VertebraLabel(1)].dist_mm = 2.0;
    b.per_vertebra[VertebraLabel(2)].dist_mm = 6.0;
    a.d_mean_mm = 1.0;
    b.d_mean_mm = 4.0;
    const std::vector<ScanEvaluation> evals{a, b};
    CHECK(aggregate_dataset_level(evals).d_mean_mm == 3.0);
    CHECK(aggregate_scan_level(evals).d_mean_mm.mean == 2.5);
}

TEST_CASE("median of an even count") {
    const auto s = summarize({4, 1, 3, 2});
    CHECK(s.median == 2.5);
    CHECK(s.mean == 2.5);
    CHECK_FALSE(summarize({}).mean.has_value());
}

TEST_CASE("mode names") {
    CHECK(parse_eval_mode("ranking19") == EvalMode::ranking19);
    CHECK(to_string(EvalMode::ranking20) == "ranking20");
    CHECK_THROWS_AS((void)parse_eval_mode("ranking21"), Error);
}
