#include <doctest.h>

#include "stdn/common.hpp"
#include "stdn/evalmetrics.hpp"

#include <cmath>
#include <map>

using namespace stdn;

namespace {

LabelMap random_labels(int h, int w, int n, std::uint64_t seed) {
    LabelMap m(h, w);
    Rng rng(seed);
    for (auto& v : m.data()) v = static_cast<std::uint8_t>(rng.index(n));
    return m;
}

LabelMap vertical_halves(int h, int w) {
    LabelMap m(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = w / 2; x < w; ++x) m.set(y, x, 1);
    return m;
}

double rand_oracle(const LabelMap& a, const LabelMap& b) {
    long n = static_cast<long>(a.data().size());
    long agree = 0, pairs = 0;
    for (long i = 0; i < n; ++i)
        for (long j = i + 1; j < n; ++j) {
            bool sa = a.data()[static_cast<std::size_t>(i)] == a.data()[static_cast<std::size_t>(j)];
            bool sb = b.data()[static_cast<std::size_t>(i)] == b.data()[static_cast<std::size_t>(j)];
            agree += sa == sb ? 1 : 0;
            ++pairs;
        }
    return static_cast<double>(agree) / static_cast<double>(pairs);
}

double covering_oracle(const LabelMap& seg, const LabelMap& gt) {
    double total = static_cast<double>(gt.data().size());
    double score = 0.0;
    for (int g = 0; g < gt.num_labels(); ++g) {
        RegionMask rg = gt.mask_of(static_cast<std::uint8_t>(g));
        double best = 0.0;
        for (int s = 0; s < seg.num_labels(); ++s) {
            RegionMask rs = seg.mask_of(static_cast<std::uint8_t>(s));
            long inter = 0, uni = 0;
            for (int y = 0; y < gt.height(); ++y)
                for (int x = 0; x < gt.width(); ++x) {
                    bool ing = rg.inside(y, x), ins = rs.inside(y, x);
                    inter += ing && ins ? 1 : 0;
                    uni += ing || ins ? 1 : 0;
                }
            if (uni > 0) best = std::max(best, static_cast<double>(inter) / static_cast<double>(uni));
        }
        score += best * static_cast<double>(rg.count()) / total;
    }
    return score;
}

} // namespace

TEST_CASE("a perfect segmentation scores perfectly") {
    LabelMap gt = random_labels(9, 7, 3, 1);
    ScoreReport r = evaluate(gt, gt);
    CHECK(r.gt_covering == doctest::Approx(1.0));
    CHECK(r.rand_index == doctest::Approx(1.0));
    CHECK(r.voi == doctest::Approx(0.0));
    CHECK(r.boundary_f == doctest::Approx(1.0));
}

TEST_CASE("metrics ignore label naming") {
    LabelMap gt = vertical_halves(8, 8);
    LabelMap seg = random_labels(8, 8, 2, 2);
    LabelMap flipped = seg;
    for (auto& v : flipped.data()) v = static_cast<std::uint8_t>(1 - v);
    CHECK(gt_covering(seg, gt) == doctest::Approx(gt_covering(flipped, gt)).epsilon(1e-12));
    CHECK(rand_index(seg, gt) == doctest::Approx(rand_index(flipped, gt)).epsilon(1e-12));
    CHECK(variation_of_information(seg, gt) ==
          doctest::Approx(variation_of_information(flipped, gt)).epsilon(1e-12));
    CHECK(boundary_fmeasure(seg, gt) == doctest::Approx(boundary_fmeasure(flipped, gt)).epsilon(1e-12));
}

TEST_CASE("covering of halves by the whole is one half") {
    LabelMap gt = vertical_halves(8, 8);
    LabelMap whole(8, 8);
    CHECK(gt_covering(whole, gt) == doctest::Approx(0.5).epsilon(1e-12));
    // asymmetric by construction: one seg region covers either gt half at IoU 1/2
    CHECK(gt_covering(gt, whole) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("covering matches a brute-force IoU table") {
    for (std::uint64_t seed = 10; seed < 14; ++seed) {
        LabelMap seg = random_labels(6, 6, 3, seed);
        LabelMap gt = random_labels(6, 6, 2, seed + 100);
        CHECK(gt_covering(seg, gt) == doctest::Approx(covering_oracle(seg, gt)).epsilon(1e-12));
    }
}

TEST_CASE("rand index counts pixel pairs") {
    LabelMap a(1, 2), b(1, 2);
    a.set(0, 1, 1); // split vs joined: the one pair disagrees
    CHECK(rand_index(a, b) == doctest::Approx(0.0));
    CHECK(rand_index(a, a) == doctest::Approx(1.0));

    LabelMap single(1, 1);
    CHECK(rand_index(single, single) == doctest::Approx(1.0)); // no pairs to count

    for (std::uint64_t seed = 20; seed < 24; ++seed) {
        LabelMap s = random_labels(6, 6, 3, seed);
        LabelMap g = random_labels(6, 6, 4, seed + 50);
        CHECK(rand_index(s, g) == doctest::Approx(rand_oracle(s, g)).epsilon(1e-12));
    }
}

TEST_CASE("variation of information is symmetric with hand-checkable entropy") {
    LabelMap s = random_labels(7, 7, 3, 30);
    LabelMap g = random_labels(7, 7, 2, 31);
    CHECK(variation_of_information(s, g) ==
          doctest::Approx(variation_of_information(g, s)).epsilon(1e-12));
    CHECK(variation_of_information(s, s) == doctest::Approx(0.0));

    // independent axis-aligned halves: joint is uniform on 4 cells, so each
    // conditional entropy is ln 2 and voi = 2 ln 2
    LabelMap vert = vertical_halves(8, 8);
    LabelMap horiz(8, 8);
    for (int y = 4; y < 8; ++y)
        for (int x = 0; x < 8; ++x) horiz.set(y, x, 1);
    CHECK(variation_of_information(vert, horiz) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("boundary F respects the matching tolerance exactly") {
    int h = 12, w = 12;
    LabelMap gt(h, w), close(h, w), far(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (x >= 6) gt.set(y, x, 1);
            if (x >= 8) close.set(y, x, 1);  // boundary offset exactly 2
            if (x >= 9) far.set(y, x, 1);    // offset 3
        }
    CHECK(boundary_fmeasure(close, gt, 2.0) == doctest::Approx(1.0));
    CHECK(boundary_fmeasure(far, gt, 2.0) == doctest::Approx(0.0));
    CHECK(boundary_fmeasure(far, gt, 3.0) == doctest::Approx(1.0));

    LabelMap blank(h, w);
    CHECK(boundary_fmeasure(blank, gt, 2.0) == doctest::Approx(0.0)); // one side has no boundary
    CHECK(boundary_fmeasure(blank, blank, 2.0) == doctest::Approx(1.0));
}

TEST_CASE("evaluate mirrors the individual metrics") {
    LabelMap s = random_labels(8, 8, 3, 40);
    LabelMap g = random_labels(8, 8, 2, 41);
    ScoreReport r = evaluate(s, g, 2.0);
    CHECK(r.gt_covering == doctest::Approx(gt_covering(s, g)));
    CHECK(r.rand_index == doctest::Approx(rand_index(s, g)));
    CHECK(r.voi == doctest::Approx(variation_of_information(s, g)));
    CHECK(r.boundary_f == doctest::Approx(boundary_fmeasure(s, g, 2.0)));
    CHECK_THROWS_AS(evaluate(s, random_labels(4, 4, 2, 42)), numeric_error);
}
