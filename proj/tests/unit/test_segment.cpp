#include <doctest.h>

#include "stdn/common.hpp"
#include "stdn/evalmetrics.hpp"
#include "stdn/segment.hpp"

#include <cmath>

using namespace stdn;

namespace {

PreprocessSpec tiny_spec() {
    PreprocessSpec s;
    s.angles = {0.0, M_PI / 2.0};
    s.scales = {5.0};
    return s;
}

/// One-layer net keyed on the smoothed luma channel: logits +-(8*gray - 4),
/// so it splits dark (<0.5) from bright (>0.5) with high confidence. Uses
/// alpha=1 throughout: wide smoothing bleeds each region's appearance across
/// a crisp edge and the interface then settles a pixel short of it.
DescriptorNet luma_net() {
    DescriptorNet net;
    PreprocessSpec s = tiny_spec();
    s.scales = {1.0};
    net.preprocess = s;
    net.layer_alpha = 1.0;
    LayerWeights l(6, 2);
    l.weight[3] = 8.0; // gray channel of the single scale
    l.bias[0] = -4.0;
    l.weight[static_cast<std::size_t>(1) * 6 + 3] = -8.0;
    l.bias[1] = 4.0;
    net.layers.push_back(l);
    net.validate();
    return net;
}

DescriptorNet zero_net(int out_channels) {
    DescriptorNet net = make_net(tiny_spec(), {out_channels}, 5.0, 1);
    for (LayerWeights& l : net.layers)
        for (double& v : l.weight) v = 0.0;
    return net;
}

/// Flat two-tone image split at column `cut` (bright on the right).
ChannelField two_tone(int h, int w, int cut) {
    ChannelField img(h, w, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = x >= cut ? 0.75 : 0.25;
    return img;
}

LabelMap cut_labels(int h, int w, int cut) {
    LabelMap m(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = cut; x < w; ++x) m.set(y, x, 1);
    return m;
}

RegionMask brute_dilate(const RegionMask& m, int r) {
    RegionMask out(m.height(), m.width());
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            bool hit = false;
            for (int dy = -r; dy <= r && !hit; ++dy)
                for (int dx = -r; dx <= r && !hit; ++dx) {
                    int yy = y + dy, xx = x + dx;
                    if (yy >= 0 && yy < m.height() && xx >= 0 && xx < m.width() &&
                        m.inside(yy, xx))
                        hit = true;
                }
            out.set(y, x, hit);
        }
    return out;
}

} // namespace

TEST_CASE("box tessellation reproduces its tiles under argmax") {
    SegmentationState two = init_tessellation(32, 32, 2);
    LabelMap l2 = hard_labels(two);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) CHECK(l2.at(y, x) == (x < 16 ? 0 : 1));

    SegmentationState four = init_tessellation(32, 32, 4);
    LabelMap l4 = hard_labels(four);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            CHECK(l4.at(y, x) == (y < 16 ? 0 : 2) + (x < 16 ? 0 : 1));

    SegmentationState six = init_tessellation(30, 30, 6); // 2 x 3 tiles
    LabelMap l6 = hard_labels(six);
    CHECK(l6.at(0, 0) == 0);
    CHECK(l6.at(0, 29) == 2);
    CHECK(l6.at(29, 0) == 3);
    CHECK(l6.at(29, 29) == 5);
    CHECK(l6.labels_contiguous());

    for (const ChannelField& phi : two.phi)
        for (double v : phi.data()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }

    CHECK_THROWS_AS(init_tessellation(32, 32, 1), numeric_error);
    CHECK_THROWS_AS(init_tessellation(2, 2, 5), numeric_error);
}

TEST_CASE("dilation matches a brute-force window sweep") {
    RegionMask dot(7, 7);
    dot.set(3, 3, true);
    RegionMask d1 = dilate(dot, 1);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 7; ++x)
            CHECK(d1.inside(y, x) == (std::abs(y - 3) <= 1 && std::abs(x - 3) <= 1));

    Rng rng(5);
    for (int trial = 0; trial < 6; ++trial) {
        RegionMask m(16, 16);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) m.set(y, x, rng.uniform() < 0.2);
        int r = 1 + trial % 3;
        CHECK(dilate(m, r) == brute_dilate(m, r));
        CHECK(dilate(m, 0) == m);
    }
}

TEST_CASE("the band is the two-sided dilation overlap") {
    RegionMask left(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 4; ++x) left.set(y, x, true);
    RegionMask b = band(left, 1);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) CHECK(b.inside(y, x) == (x == 3 || x == 4));

    RegionMask whole = RegionMask::full(8, 8);
    CHECK(band(whole, 2).count() == 0);

    Rng rng(6);
    RegionMask m(12, 12);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) m.set(y, x, rng.uniform() < 0.5);
    RegionMask inner = dilate(m, 2), outer = dilate(m.complement(), 2);
    RegionMask want(12, 12);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) want.set(y, x, inner.inside(y, x) && outer.inside(y, x));
    CHECK(band(m, 2) == want);
}

TEST_CASE("curvature: zero on ramps, odd, and 1/r on a disc") {
    ChannelField ramp(9, 9, 1);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x) ramp.at(0, y, x) = 0.3 * x + 0.1 * y;
    ChannelField kr = curvature(ramp);
    for (int y = 2; y < 7; ++y)
        for (int x = 2; x < 7; ++x) CHECK(std::abs(kr.at(0, y, x)) < 1e-9);

    ChannelField f(9, 9, 1);
    Rng rng(7);
    for (double& v : f.data()) v = rng.uniform(-1.0, 1.0);
    ChannelField neg = f;
    for (double& v : neg.data()) v = -v;
    ChannelField kf = curvature(f), kn = curvature(neg);
    for (std::size_t i = 0; i < kf.data().size(); ++i)
        CHECK(kf.data()[i] == doctest::Approx(-kn.data()[i]).epsilon(1e-9));

    // smoothed disc of radius 10: |kappa| ~ 1/10 on the ring. Average over a
    // +-1.5 px annulus: pixels exactly on the steep indicator transition carry
    // large discretisation error, the wider ring averages it out (measured
    // mean * r is within 3% of -1 for radii 6..16)
    int h = 48, w = 48;
    double cy = 23.5, cx = 23.5, r = 10.0;
    ChannelField disc(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (std::hypot(y - cy, x - cx) <= r) disc.at(0, y, x) = 1.0;
    ChannelField phi = solve(PoissonSystem(RegionMask::full(h, w), 1.0, inference_solver()), disc);
    ChannelField k = curvature(phi);
    double sum = 0.0;
    long count = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (std::abs(std::hypot(y - cy, x - cx) - r) <= 1.5) {
                sum += k.at(0, y, x);
                ++count;
            }
    double mean = sum / static_cast<double>(count);
    CHECK(mean < -0.09); // high phi inside, so the normal points inward
    CHECK(mean > -0.115);
}

TEST_CASE("argmax ties go to the lowest region") {
    SegmentationState state;
    state.height = 2;
    state.width = 2;
    state.phi = {ChannelField(2, 2, 1, 0.5), ChannelField(2, 2, 1, 0.5)};
    state.frozen = {false, false};
    LabelMap l = hard_labels(state);
    for (auto v : l.data()) CHECK(v == 0);
}

TEST_CASE("evolution is the identity when every velocity term vanishes") {
    ChannelField img = two_tone(8, 12, 6);
    SegmentParams p;
    p.dilation_radius = 2;

    SegmentationState state = init_tessellation(8, 12, 2);
    std::vector<double> before = state.phi[0].data();

    SegmentParams nop = p;
    nop.beta = 0.0; // uniform descriptors: G_0 == G_1, so the data term is 0 too
    DescriptorNet uniform = zero_net(3);
    StepDiagnostics d = evolve_step(state, img, uniform, nop);
    CHECK(state.phi[0].data() == before);
    CHECK(d.label_changes == 0);
    CHECK(d.region_areas[0] == 48);
    CHECK(d.region_areas[1] == 48);

    SegmentParams still = p;
    still.dt = 0.0;
    SegmentationState s2 = init_tessellation(8, 12, 2);
    std::vector<double> b2 = s2.phi[0].data(), b3 = s2.phi[1].data();
    evolve_step(s2, img, luma_net(), still);
    CHECK(s2.phi[0].data() == b2);
    CHECK(s2.phi[1].data() == b3);
}

TEST_CASE("a vanished region is frozen and no longer updated") {
    SegmentationState state;
    state.height = 8;
    state.width = 8;
    state.phi = {ChannelField(8, 8, 1, 0.9), ChannelField(8, 8, 1, 0.1)};
    state.frozen = {false, false};
    ChannelField img = two_tone(8, 8, 4);
    SegmentParams p;
    p.dilation_radius = 2;
    StepDiagnostics d = evolve_step(state, img, luma_net(), p);
    CHECK(d.frozen_regions == 1);
    CHECK(state.frozen[1]);
    CHECK(!state.frozen[0]);
    for (double v : state.phi[1].data()) CHECK(v == 0.1);
    CHECK(d.region_areas[1] == 0);
}

TEST_CASE("partition energy reduces to the arclength term for uniform descriptors") {
    ChannelField img = two_tone(8, 8, 4);
    LabelMap labels = cut_labels(8, 8, 4);
    SegmentParams p;
    p.beta = 1.5;
    p.dilation_radius = 2;
    DescriptorNet uniform = zero_net(2);
    // 8 unlike vertical-neighbour pairs, counted once from each side
    CHECK(partition_energy(img, uniform, labels, p) == doctest::Approx(24.0).epsilon(1e-12));

    SegmentParams free = p;
    free.beta = 0.0;
    CHECK(partition_energy(img, uniform, labels, free) == doctest::Approx(0.0));
}

TEST_CASE("the interface migrates to the intensity boundary and stays there") {
    int h = 8, w = 16, cut = 10;
    ChannelField img = two_tone(h, w, cut);
    LabelMap gt = cut_labels(h, w, cut);
    SegmentParams p;
    p.dilation_radius = 2;
    p.beta = 0.2;

    DescriptorNet net = luma_net();
    SegmentationState state = init_tessellation(h, w, 2);
    double cov_init = gt_covering(hard_labels(state), gt);

    std::vector<double> covs;
    for (int it = 0; it < 14; ++it) {
        evolve_step(state, img, net, p);
        covs.push_back(gt_covering(hard_labels(state), gt));
    }
    for (std::size_t i = 1; i < covs.size(); ++i) CHECK(covs[i] >= covs[i - 1] - 1e-12);
    CHECK(covs.back() > cov_init);
    CHECK(covs.back() == doctest::Approx(1.0));

    // phi keeps drifting for several iterations between label flips, so the
    // convergence patience has to span the longest quiet stretch
    p.stable_iterations = 10;
    SegmentResult r = segment(img, net, p);
    CHECK(r.converged);
    CHECK(r.labels == gt);
    SegmentResult again = segment(img, net, p);
    CHECK(again.labels == r.labels);
    CHECK(again.iterations == r.iterations);
}

TEST_CASE("an initialization that already matches the data is a fixed point") {
    int h = 8, w = 16, cut = 8;
    ChannelField img = two_tone(h, w, cut);
    SegmentParams p;
    p.dilation_radius = 2;
    p.beta = 0.2;
    SegmentResult r = segment(img, luma_net(), p);
    CHECK(r.converged);
    CHECK(r.iterations <= p.stable_iterations);
    CHECK(r.labels == cut_labels(h, w, cut));
}

TEST_CASE("phi stays within [0,1] throughout an evolution") {
    ChannelField img = two_tone(10, 14, 9);
    SegmentParams p;
    p.dilation_radius = 2;
    SegmentationState state = init_tessellation(10, 14, 2);
    for (int it = 0; it < 8; ++it) {
        evolve_step(state, img, luma_net(), p);
        for (const ChannelField& phi : state.phi)
            for (double v : phi.data()) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
    }
}
