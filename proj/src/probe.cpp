#include "stdn/probe.hpp"

#include "stdn/common.hpp"
#include "stdn/evalmetrics.hpp"

#include <cmath>

namespace stdn {

namespace {

template <typename Get, typename Set>
void rot90_once(int h, int w, const Get& get, const Set& set) {
    // out is w x h; out(y, x) = in(h - 1 - x, y)
    for (int y = 0; y < w; ++y)
        for (int x = 0; x < h; ++x) set(y, x, get(h - 1 - x, y));
}

int norm_quarters(int q) { return ((q % 4) + 4) % 4; }

} // namespace

ChannelField rot90(const ChannelField& f, int quarter_turns) {
    ChannelField cur = f;
    for (int t = 0; t < norm_quarters(quarter_turns); ++t) {
        ChannelField next(cur.width(), cur.height(), cur.channels());
        for (int c = 0; c < cur.channels(); ++c)
            rot90_once(
                cur.height(), cur.width(), [&](int y, int x) { return cur.at(c, y, x); },
                [&](int y, int x, double v) { next.at(c, y, x) = v; });
        cur = std::move(next);
    }
    return cur;
}

RegionMask rot90(const RegionMask& m, int quarter_turns) {
    RegionMask cur = m;
    for (int t = 0; t < norm_quarters(quarter_turns); ++t) {
        RegionMask next(cur.width(), cur.height());
        rot90_once(
            cur.height(), cur.width(), [&](int y, int x) { return cur.inside(y, x); },
            [&](int y, int x, bool v) { next.set(y, x, v); });
        cur = std::move(next);
    }
    return cur;
}

LabelMap rot90(const LabelMap& m, int quarter_turns) {
    LabelMap cur = m;
    for (int t = 0; t < norm_quarters(quarter_turns); ++t) {
        LabelMap next(cur.width(), cur.height());
        rot90_once(
            cur.height(), cur.width(), [&](int y, int x) { return cur.at(y, x); },
            [&](int y, int x, std::uint8_t v) { next.set(y, x, v); });
        cur = std::move(next);
    }
    return cur;
}

ChannelField shift(const ChannelField& f, int dy, int dx, double fill) {
    ChannelField out(f.height(), f.width(), f.channels(), fill);
    for (int c = 0; c < f.channels(); ++c)
        for (int y = 0; y < f.height(); ++y)
            for (int x = 0; x < f.width(); ++x) {
                int sy = y - dy, sx = x - dx;
                if (sy >= 0 && sy < f.height() && sx >= 0 && sx < f.width())
                    out.at(c, y, x) = f.at(c, sy, sx);
            }
    return out;
}

RegionMask shift(const RegionMask& m, int dy, int dx) {
    RegionMask out(m.height(), m.width());
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            int sy = y - dy, sx = x - dx;
            if (sy >= 0 && sy < m.height() && sx >= 0 && sx < m.width())
                out.set(y, x, m.inside(sy, sx));
        }
    return out;
}

LabelMap shift(const LabelMap& m, int dy, int dx, std::uint8_t fill) {
    LabelMap out(m.height(), m.width(), fill);
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            int sy = y - dy, sx = x - dx;
            if (sy >= 0 && sy < m.height() && sx >= 0 && sx < m.width())
                out.set(y, x, m.at(sy, sx));
        }
    return out;
}

namespace {

bool is_quarter_turn(double theta, int& q) {
    double r = std::remainder(theta, M_PI / 2.0);
    if (std::abs(r) > 1e-12) return false;
    q = norm_quarters(static_cast<int>(std::llround(theta / (M_PI / 2.0))));
    return true;
}

/// Backward rotation map about the centre; theta multiples of pi/2 reproduce
/// rot90 exactly on square grids.
void rotation_source(double theta, int h, int w, double yq, double xq, double& sy, double& sx) {
    double cy = 0.5 * (h - 1), cx = 0.5 * (w - 1);
    double c = std::cos(theta), s = std::sin(theta);
    sx = cx + c * (xq - cx) + s * (yq - cy);
    sy = cy - s * (xq - cx) + c * (yq - cy);
}

} // namespace

Transformed rotate_translate(const ChannelField& image, const RegionMask& mask, double theta,
                             int shift_y, int shift_x) {
    if (image.height() != mask.height() || image.width() != mask.width())
        throw numeric_error("image and mask shapes differ");
    Transformed out;
    int q = 0;
    if (is_quarter_turn(theta, q)) {
        out.image = shift(rot90(image, q), shift_y, shift_x);
        out.mask = shift(rot90(mask, q), shift_y, shift_x);
        out.valid = shift(rot90(RegionMask::full(image.height(), image.width()), q), shift_y,
                          shift_x);
        return out;
    }
    int h = image.height(), w = image.width();
    out.image = ChannelField(h, w, image.channels());
    out.mask = RegionMask(h, w);
    out.valid = RegionMask(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double sy, sx;
            rotation_source(theta, h, w, static_cast<double>(y - shift_y),
                            static_cast<double>(x - shift_x), sy, sx);
            if (sy < 0.0 || sy > h - 1 || sx < 0.0 || sx > w - 1) continue;
            out.valid.set(y, x, true);
            int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
            int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
            double fy = sy - y0, fx = sx - x0;
            for (int c = 0; c < image.channels(); ++c) {
                double v = (1 - fy) * ((1 - fx) * image.at(c, y0, x0) + fx * image.at(c, y0, x1)) +
                           fy * ((1 - fx) * image.at(c, y1, x0) + fx * image.at(c, y1, x1));
                out.image.at(c, y, x) = v;
            }
            int yn = static_cast<int>(std::lround(sy)), xn = static_cast<int>(std::lround(sx));
            out.mask.set(y, x, mask.inside(yn, xn));
        }
    return out;
}

LabelMap rotate_translate_labels(const LabelMap& labels, double theta, int shift_y, int shift_x) {
    int q = 0;
    if (is_quarter_turn(theta, q)) return shift(rot90(labels, q), shift_y, shift_x);
    int h = labels.height(), w = labels.width();
    LabelMap out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double sy, sx;
            rotation_source(theta, h, w, static_cast<double>(y - shift_y),
                            static_cast<double>(x - shift_x), sy, sx);
            int yn = static_cast<int>(std::lround(sy)), xn = static_cast<int>(std::lround(sx));
            if (yn < 0 || yn >= h || xn < 0 || xn >= w) continue;
            out.set(y, x, labels.at(yn, xn));
        }
    return out;
}

double sobolev_norm_sq(const DeformationField& d) {
    double s = 0.0;
    for (int comp = 0; comp < 2; ++comp)
        for (int k1 = -d.n_max; k1 <= d.n_max; ++k1)
            for (int k2 = -d.n_max; k2 <= d.n_max; ++k2) {
                double w = (k1 == 0 && k2 == 0)
                               ? 1.0
                               : static_cast<double>(k1) * k1 + static_cast<double>(k2) * k2;
                s += w * std::norm(d.a(comp, k1, k2));
            }
    return s;
}

namespace {

void realize(DeformationField& d) {
    int h = d.height, w = d.width, n = d.n_max;
    d.vx.assign(static_cast<std::size_t>(h) * w, 0.0);
    d.vy.assign(static_cast<std::size_t>(h) * w, 0.0);
    std::vector<std::complex<double>> ex(static_cast<std::size_t>(2 * n + 1) * w),
        ey(static_cast<std::size_t>(2 * n + 1) * h);
    for (int k = -n; k <= n; ++k) {
        for (int x = 0; x < w; ++x)
            ex[static_cast<std::size_t>(k + n) * w + x] =
                std::polar(1.0, 2.0 * M_PI * k * (static_cast<double>(x) / w));
        for (int y = 0; y < h; ++y)
            ey[static_cast<std::size_t>(k + n) * h + y] =
                std::polar(1.0, 2.0 * M_PI * k * (static_cast<double>(y) / h));
    }
    std::vector<std::complex<double>> row(static_cast<std::size_t>(2 * n + 1));
    for (int comp = 0; comp < 2; ++comp) {
        double* out = comp == 0 ? d.vx.data() : d.vy.data();
        for (int y = 0; y < h; ++y) {
            for (int k1 = -n; k1 <= n; ++k1) {
                std::complex<double> acc = 0.0;
                for (int k2 = -n; k2 <= n; ++k2)
                    acc += d.a(comp, k1, k2) * ey[static_cast<std::size_t>(k2 + n) * h + y];
                row[static_cast<std::size_t>(k1 + n)] = acc;
            }
            for (int x = 0; x < w; ++x) {
                std::complex<double> acc = 0.0;
                for (int k1 = -n; k1 <= n; ++k1)
                    acc += row[static_cast<std::size_t>(k1 + n)] *
                           ex[static_cast<std::size_t>(k1 + n) * w + x];
                out[static_cast<std::size_t>(y) * w + x] = acc.real();
            }
        }
    }
}

} // namespace

DeformationField random_deformation(double target_norm_sq, int n_max, int height, int width,
                                    std::uint64_t seed) {
    if (target_norm_sq < 0.0) throw numeric_error("deformation norm must be non-negative");
    if (n_max < 0 || height < 1 || width < 1) throw numeric_error("bad deformation shape");
    DeformationField d;
    d.n_max = n_max;
    d.height = height;
    d.width = width;
    int m = d.modes_per_axis();
    d.coeff.assign(static_cast<std::size_t>(2) * m * m, 0.0);

    Rng rng(seed);
    for (int comp = 0; comp < 2; ++comp) {
        d.a(comp, 0, 0) = rng.normal();
        for (int k1 = -n_max; k1 <= n_max; ++k1)
            for (int k2 = -n_max; k2 <= n_max; ++k2) {
                if (k1 < 0 || (k1 == 0 && k2 <= 0)) continue; // canonical half-space
                std::complex<double> a(rng.normal(), rng.normal());
                d.a(comp, k1, k2) = a;
                d.a(comp, -k1, -k2) = std::conj(a);
            }
    }

    if (target_norm_sq == 0.0) {
        for (auto& c : d.coeff) c = 0.0;
    } else {
        double s = sobolev_norm_sq(d);
        if (s <= 0.0) throw numeric_error("degenerate deformation draw");
        double scale = std::sqrt(target_norm_sq / s);
        for (auto& c : d.coeff) c *= scale;
    }
    realize(d);

    if (2 * n_max < std::min(height, width)) {
        // Discrete Parseval: grid mean of |v|^2 equals the coefficient power.
        double grid = 0.0;
        for (std::size_t i = 0; i < d.vx.size(); ++i)
            grid += d.vx[i] * d.vx[i] + d.vy[i] * d.vy[i];
        grid /= static_cast<double>(d.vx.size());
        double power = 0.0;
        for (const auto& c : d.coeff) power += std::norm(c);
        if (std::abs(grid - power) > 1e-6 * std::max(1.0, power))
            throw numeric_error("deformation failed its Parseval self-check");
    }
    return d;
}

ChannelField warp(const ChannelField& image, const DeformationField& d) {
    if (image.height() != d.height || image.width() != d.width)
        throw numeric_error("image and deformation shapes differ");
    int h = image.height(), w = image.width();
    ChannelField out(h, w, image.channels());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::size_t p = static_cast<std::size_t>(y) * w + x;
            double sx = std::clamp(x + d.vx[p], 0.0, static_cast<double>(w - 1));
            double sy = std::clamp(y + d.vy[p], 0.0, static_cast<double>(h - 1));
            int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
            int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
            double fy = sy - y0, fx = sx - x0;
            for (int c = 0; c < image.channels(); ++c)
                out.at(c, y, x) =
                    (1 - fy) * ((1 - fx) * image.at(c, y0, x0) + fx * image.at(c, y0, x1)) +
                    fy * ((1 - fx) * image.at(c, y1, x0) + fx * image.at(c, y1, x1));
        }
    return out;
}

LabelMap warp_labels(const LabelMap& labels, const DeformationField& d) {
    if (labels.height() != d.height || labels.width() != d.width)
        throw numeric_error("labels and deformation shapes differ");
    int h = labels.height(), w = labels.width();
    LabelMap out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::size_t p = static_cast<std::size_t>(y) * w + x;
            int sx = static_cast<int>(std::lround(std::clamp(
                x + d.vx[p], 0.0, static_cast<double>(w - 1))));
            int sy = static_cast<int>(std::lround(std::clamp(
                y + d.vy[p], 0.0, static_cast<double>(h - 1))));
            out.set(y, x, labels.at(sy, sx));
        }
    return out;
}

double agreement_score(const LabelMap& test, const LabelMap& reference, const RegionMask& valid) {
    if (test.height() != reference.height() || test.width() != reference.width() ||
        test.height() != valid.height() || test.width() != valid.width())
        throw numeric_error("label maps / valid mask shapes differ");
    long total = valid.count();
    if (total == 0) throw numeric_error("no valid pixels to score");
    int nt = test.num_labels(), nr = reference.num_labels();
    std::vector<std::vector<long>> joint(static_cast<std::size_t>(nt),
                                         std::vector<long>(static_cast<std::size_t>(nr), 0));
    for (int y = 0; y < test.height(); ++y)
        for (int x = 0; x < test.width(); ++x)
            if (valid.inside(y, x)) ++joint[test.at(y, x)][reference.at(y, x)];
    std::vector<long> ta(static_cast<std::size_t>(nt), 0), ra(static_cast<std::size_t>(nr), 0);
    for (int i = 0; i < nt; ++i)
        for (int j = 0; j < nr; ++j) {
            ta[static_cast<std::size_t>(i)] += joint[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            ra[static_cast<std::size_t>(j)] += joint[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    double cover = 0.0;
    for (int j = 0; j < nr; ++j) {
        if (ra[static_cast<std::size_t>(j)] == 0) continue;
        double best = 0.0;
        for (int i = 0; i < nt; ++i) {
            long inter = joint[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (inter == 0) continue;
            long uni = ta[static_cast<std::size_t>(i)] + ra[static_cast<std::size_t>(j)] - inter;
            best = std::max(best, static_cast<double>(inter) / static_cast<double>(uni));
        }
        cover += static_cast<double>(ra[static_cast<std::size_t>(j)]) /
                 static_cast<double>(total) * best;
    }
    return cover;
}

double covariance_score(const Pipeline& pipeline, const ChannelField& image, double theta,
                        int shift_y, int shift_x) {
    RegionMask full = RegionMask::full(image.height(), image.width());
    Transformed t = rotate_translate(image, full, theta, shift_y, shift_x);
    LabelMap seg_orig = pipeline(image);
    LabelMap seg_trans = pipeline(t.image);
    LabelMap reference = rotate_translate_labels(seg_orig, theta, shift_y, shift_x);
    return agreement_score(seg_trans, reference, t.valid);
}

std::vector<SweepRow> robustness_sweep(const Pipeline& pipeline, const ChannelField& image,
                                       const std::vector<double>& norms_sq,
                                       const std::vector<std::uint64_t>& seeds, int n_max) {
    LabelMap seg_orig = pipeline(image);
    std::vector<SweepRow> rows;
    for (double norm : norms_sq)
        for (std::uint64_t seed : seeds) {
            DeformationField d =
                random_deformation(norm, n_max, image.height(), image.width(), seed);
            LabelMap seg_warped = pipeline(warp(image, d));
            LabelMap reference = warp_labels(seg_orig, d);
            SweepRow row;
            row.norm_sq = norm;
            row.seed = seed;
            row.gt_cov = gt_covering(seg_warped, reference);
            row.rand = rand_index(seg_warped, reference);
            rows.push_back(row);
        }
    return rows;
}

std::optional<DescriptorNet> conjugate_quarter_turn(const DescriptorNet& net, int quarter_turns) {
    net.validate();
    int q = norm_quarters(quarter_turns);
    const std::vector<double>& angles = net.preprocess.angles;
    int na = static_cast<int>(angles.size());

    // A gradient channel at angle t on the rotated image equals +-1 times the
    // channel at t - q*pi/2 on the original; resolve that source index and
    // sign for every angle, failing when the set is not closed mod pi.
    std::vector<int> src(static_cast<std::size_t>(na), -1);
    std::vector<double> sgn(static_cast<std::size_t>(na), 1.0);
    for (int i = 0; i < na; ++i) {
        double raw = angles[static_cast<std::size_t>(i)] - q * (M_PI / 2.0);
        for (int j = 0; j < na; ++j) {
            double delta = raw - angles[static_cast<std::size_t>(j)];
            if (std::abs(std::remainder(delta, M_PI)) < 1e-9) {
                src[static_cast<std::size_t>(i)] = j;
                sgn[static_cast<std::size_t>(i)] = std::cos(delta) > 0.0 ? 1.0 : -1.0;
                break;
            }
        }
        if (src[static_cast<std::size_t>(i)] < 0) return std::nullopt;
    }

    DescriptorNet out = net;
    LayerWeights& first = out.layers.front();
    int per = net.preprocess.channels_per_scale();
    for (int o = 0; o < first.out_channels; ++o)
        for (std::size_t s = 0; s < net.preprocess.scales.size(); ++s) {
            int base = static_cast<int>(s) * per;
            for (int a = 0; a < na; ++a)
                first.w(o, base + 4 + a) =
                    sgn[static_cast<std::size_t>(a)] *
                    net.layers.front().w(o, base + 4 + src[static_cast<std::size_t>(a)]);
        }
    return out;
}

} // namespace stdn
