#include "stdn/segment.hpp"

#include "stdn/common.hpp"

#include <algorithm>
#include <cmath>

namespace stdn {

SegmentationState init_tessellation(int height, int width, int n) {
    if (n < 2) throw numeric_error("tessellation needs at least 2 regions");
    if (static_cast<long>(n) > static_cast<long>(height) * width)
        throw numeric_error("more regions than pixels");

    // Factor n = rows * cols as square as possible, never more rows than fit.
    int rows = static_cast<int>(std::sqrt(static_cast<double>(n)));
    while (rows > 1 && n % rows != 0) --rows;
    int cols = n / rows;
    if (rows > height || cols > width) throw numeric_error("tessellation tiles do not fit");

    LabelMap tiles(height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            int ty = std::min(rows - 1, y * rows / height);
            int tx = std::min(cols - 1, x * cols / width);
            tiles.set(y, x, static_cast<std::uint8_t>(ty * cols + tx));
        }

    SegmentationState state;
    state.height = height;
    state.width = width;
    state.frozen.assign(static_cast<std::size_t>(n), false);
    PoissonSystem smoother(RegionMask::full(height, width), 1.0, inference_solver());
    for (int i = 0; i < n; ++i) {
        ChannelField ind(height, width, 1);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                if (tiles.at(y, x) == i) ind.at(0, y, x) = 1.0;
        state.phi.push_back(solve(smoother, ind));
    }
    return state;
}

RegionMask dilate(const RegionMask& mask, int radius) {
    if (radius < 0) throw numeric_error("dilation radius must be non-negative");
    if (radius == 0) return mask;
    int h = mask.height(), w = mask.width();
    // Exact chessboard (L-inf) distance in two sweeps, then threshold.
    const int kFar = 1 << 28;
    std::vector<int> dist(static_cast<std::size_t>(h) * w, kFar);
    auto d = [&](int y, int x) -> int& { return dist[static_cast<std::size_t>(y) * w + x]; };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (mask.inside(y, x)) {
                d(y, x) = 0;
                continue;
            }
            int best = d(y, x);
            if (y > 0) {
                best = std::min(best, d(y - 1, x) + 1);
                if (x > 0) best = std::min(best, d(y - 1, x - 1) + 1);
                if (x < w - 1) best = std::min(best, d(y - 1, x + 1) + 1);
            }
            if (x > 0) best = std::min(best, d(y, x - 1) + 1);
            d(y, x) = best;
        }
    RegionMask out(h, w);
    for (int y = h - 1; y >= 0; --y)
        for (int x = w - 1; x >= 0; --x) {
            int best = d(y, x);
            if (y < h - 1) {
                best = std::min(best, d(y + 1, x) + 1);
                if (x > 0) best = std::min(best, d(y + 1, x - 1) + 1);
                if (x < w - 1) best = std::min(best, d(y + 1, x + 1) + 1);
            }
            if (x < w - 1) best = std::min(best, d(y, x + 1) + 1);
            d(y, x) = best;
            if (best <= radius) out.set(y, x, true);
        }
    return out;
}

RegionMask band(const RegionMask& mask, int radius) {
    RegionMask a = dilate(mask, radius);
    RegionMask b = dilate(mask.complement(), radius);
    RegionMask out(mask.height(), mask.width());
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            out.set(y, x, a.inside(y, x) && b.inside(y, x));
    return out;
}

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

double sample(const ChannelField& f, int y, int x) {
    return f.at(0, clampi(y, 0, f.height() - 1), clampi(x, 0, f.width() - 1));
}

} // namespace

ChannelField curvature(const ChannelField& phi, double epsilon) {
    int h = phi.height(), w = phi.width();
    ChannelField out(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double px = 0.5 * (sample(phi, y, x + 1) - sample(phi, y, x - 1));
            double py = 0.5 * (sample(phi, y + 1, x) - sample(phi, y - 1, x));
            double pxx = sample(phi, y, x + 1) - 2.0 * sample(phi, y, x) + sample(phi, y, x - 1);
            double pyy = sample(phi, y + 1, x) - 2.0 * sample(phi, y, x) + sample(phi, y - 1, x);
            double pxy = 0.25 * (sample(phi, y + 1, x + 1) - sample(phi, y + 1, x - 1) -
                                 sample(phi, y - 1, x + 1) + sample(phi, y - 1, x - 1));
            double g2 = px * px + py * py;
            out.at(0, y, x) =
                (pxx * py * py - 2.0 * px * py * pxy + pyy * px * px) /
                std::pow(g2 + epsilon, 1.5);
        }
    return out;
}

LabelMap hard_labels(const SegmentationState& state) {
    LabelMap out(state.height, state.width);
    for (int y = 0; y < state.height; ++y)
        for (int x = 0; x < state.width; ++x) {
            int best = 0;
            double bv = state.phi[0].at(0, y, x);
            for (int i = 1; i < state.num_regions(); ++i) {
                double v = state.phi[static_cast<std::size_t>(i)].at(0, y, x);
                if (v > bv) {
                    bv = v;
                    best = i;
                }
            }
            out.set(y, x, static_cast<std::uint8_t>(best));
        }
    return out;
}

namespace {

struct RegionData {
    std::vector<RegionMask> region;    // R_i from argmax
    std::vector<RegionMask> band_i;    // B_i
    std::vector<ChannelField> G;       // ||F_i - a_i||^2, valid on B_i
    std::vector<long> areas;
    std::vector<bool> active;
    double fit_energy = 0.0;           // sum_i sum_{R_i} ||F_i - a_i||^2
};

long perimeter_pairs(const LabelMap& labels) {
    long n = 0;
    for (int y = 0; y < labels.height(); ++y)
        for (int x = 0; x < labels.width(); ++x) {
            if (x + 1 < labels.width() && labels.at(y, x) != labels.at(y, x + 1)) n += 2;
            if (y + 1 < labels.height() && labels.at(y, x) != labels.at(y + 1, x)) n += 2;
        }
    return n; // each unlike pair counted once per adjacent region
}

RegionData compute_region_data(const ChannelField& image, const DescriptorNet& net,
                               const LabelMap& labels, int n, const SegmentParams& params) {
    RegionData rd;
    rd.areas.assign(static_cast<std::size_t>(n), 0);
    for (std::uint8_t v : labels.data()) ++rd.areas[v];
    int h = labels.height(), w = labels.width();
    int ch = net.layers.back().out_channels;
    for (int i = 0; i < n; ++i) {
        rd.active.push_back(rd.areas[static_cast<std::size_t>(i)] > 0);
        rd.region.push_back(labels.mask_of(static_cast<std::uint8_t>(i)));
        if (!rd.active.back()) {
            rd.band_i.emplace_back(h, w);
            rd.G.emplace_back(h, w, 1);
            continue;
        }
        RegionMask dil = dilate(rd.region.back(), params.dilation_radius);
        RegionMask dil_c = dilate(rd.region.back().complement(), params.dilation_radius);
        RegionMask bnd(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) bnd.set(y, x, dil.inside(y, x) && dil_c.inside(y, x));
        ChannelField F = forward(net, image, dil, params.solver);

        std::vector<double> a(static_cast<std::size_t>(ch), 0.0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (rd.region.back().inside(y, x))
                    for (int c = 0; c < ch; ++c) a[static_cast<std::size_t>(c)] += F.at(c, y, x);
        for (int c = 0; c < ch; ++c)
            a[static_cast<std::size_t>(c)] /=
                static_cast<double>(rd.areas[static_cast<std::size_t>(i)]);

        ChannelField g(h, w, 1);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                bool in_r = rd.region.back().inside(y, x);
                if (!in_r && !bnd.inside(y, x)) continue;
                double d2 = 0.0;
                for (int c = 0; c < ch; ++c) {
                    double d = F.at(c, y, x) - a[static_cast<std::size_t>(c)];
                    d2 += d * d;
                }
                if (bnd.inside(y, x)) g.at(0, y, x) = d2;
                if (in_r) rd.fit_energy += d2;
            }
        rd.band_i.push_back(std::move(bnd));
        rd.G.push_back(std::move(g));
    }
    return rd;
}

} // namespace

StepDiagnostics evolve_step(SegmentationState& state, const ChannelField& image,
                            const DescriptorNet& net, const SegmentParams& params) {
    int n = state.num_regions();
    int h = state.height, w = state.width;
    if (image.height() != h || image.width() != w)
        throw numeric_error("image and segmentation state shapes differ");

    LabelMap before = hard_labels(state);
    RegionData rd = compute_region_data(image, net, before, n, params);

    StepDiagnostics diag;
    diag.region_areas = rd.areas;
    diag.energy = rd.fit_energy + params.beta * static_cast<double>(perimeter_pairs(before));
    for (int i = 0; i < n; ++i)
        if (!rd.active[static_cast<std::size_t>(i)]) state.frozen[static_cast<std::size_t>(i)] = true;
    diag.frozen_regions =
        static_cast<int>(std::count(state.frozen.begin(), state.frozen.end(), true));

    // Several gradient substeps on the fixed per-region energies, geometry
    // (gradient magnitude, curvature) refreshed from the current fields.
    int substeps = std::max(1, params.inner_steps);
    for (int s = 0; s < substeps; ++s) {
        std::vector<ChannelField> grad_mag, curv;
        for (int i = 0; i < n; ++i) {
            const ChannelField& phi = state.phi[static_cast<std::size_t>(i)];
            ChannelField gm(h, w, 1);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double px = 0.5 * (sample(phi, y, x + 1) - sample(phi, y, x - 1));
                    double py = 0.5 * (sample(phi, y + 1, x) - sample(phi, y - 1, x));
                    gm.at(0, y, x) = std::sqrt(px * px + py * py);
                }
            grad_mag.push_back(std::move(gm));
            curv.push_back(curvature(phi, params.curvature_epsilon));
        }

        for (int i = 0; i < n; ++i) {
            if (state.frozen[static_cast<std::size_t>(i)]) continue;
            ChannelField& phi = state.phi[static_cast<std::size_t>(i)];
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double gm = grad_mag[static_cast<std::size_t>(i)].at(0, y, x);
                    double v = params.dt * params.beta *
                               curv[static_cast<std::size_t>(i)].at(0, y, x) * gm;
                    if (rd.band_i[static_cast<std::size_t>(i)].inside(y, x)) {
                        // Competitor: strongest phi among the other bands here.
                        int j = -1;
                        double bj = 0.0;
                        for (int k = 0; k < n; ++k) {
                            if (k == i || !rd.active[static_cast<std::size_t>(k)]) continue;
                            if (!rd.band_i[static_cast<std::size_t>(k)].inside(y, x)) continue;
                            double pv = state.phi[static_cast<std::size_t>(k)].at(0, y, x);
                            if (j < 0 || pv > bj) {
                                j = k;
                                bj = pv;
                            }
                        }
                        if (j >= 0)
                            v -= params.dt *
                                 (rd.G[static_cast<std::size_t>(i)].at(0, y, x) -
                                  rd.G[static_cast<std::size_t>(j)].at(0, y, x)) *
                                 gm;
                    }
                    phi.at(0, y, x) = std::clamp(phi.at(0, y, x) + v, 0.0, 1.0);
                }
        }
    }

    LabelMap after = hard_labels(state);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (before.at(y, x) != after.at(y, x)) ++diag.label_changes;
    return diag;
}

SegmentResult segment(const ChannelField& image, const DescriptorNet& net,
                      const SegmentParams& params) {
    net.validate();
    SegmentationState state = init_tessellation(image.height(), image.width(), params.num_regions);
    SegmentResult result;
    int stable = 0;
    for (int it = 0; it < params.max_iterations; ++it) {
        StepDiagnostics diag = evolve_step(state, image, net, params);
        result.history.push_back(diag);
        ++result.iterations;
        stable = diag.label_changes == 0 ? stable + 1 : 0;
        if (stable >= params.stable_iterations) {
            result.converged = true;
            break;
        }
    }
    result.labels = hard_labels(state);
    return result;
}

double partition_energy(const ChannelField& image, const DescriptorNet& net,
                        const LabelMap& labels, const SegmentParams& params) {
    int n = std::max(labels.num_labels(), params.num_regions);
    RegionData rd = compute_region_data(image, net, labels, n, params);
    return rd.fit_energy + params.beta * static_cast<double>(perimeter_pairs(labels));
}

} // namespace stdn
