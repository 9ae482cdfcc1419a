#include "stdn/evalmetrics.hpp"

#include "stdn/common.hpp"

#include <cmath>
#include <vector>

namespace stdn {

namespace {

void check_shapes(const LabelMap& a, const LabelMap& b) {
    if (a.height() != b.height() || a.width() != b.width())
        throw numeric_error("label maps have different shapes");
}

/// joint[i][j] = pixels with seg label i and gt label j.
std::vector<std::vector<long>> cooccurrence(const LabelMap& seg, const LabelMap& gt) {
    int ns = seg.num_labels(), ng = gt.num_labels();
    std::vector<std::vector<long>> joint(static_cast<std::size_t>(ns),
                                         std::vector<long>(static_cast<std::size_t>(ng), 0));
    for (int y = 0; y < seg.height(); ++y)
        for (int x = 0; x < seg.width(); ++x) ++joint[seg.at(y, x)][gt.at(y, x)];
    return joint;
}

} // namespace

double gt_covering(const LabelMap& seg, const LabelMap& gt) {
    check_shapes(seg, gt);
    auto joint = cooccurrence(seg, gt);
    std::size_t ns = joint.size(), ng = ns ? joint[0].size() : 0;
    std::vector<long> seg_area(ns, 0), gt_area(ng, 0);
    for (std::size_t i = 0; i < ns; ++i)
        for (std::size_t j = 0; j < ng; ++j) {
            seg_area[i] += joint[i][j];
            gt_area[j] += joint[i][j];
        }
    double total = static_cast<double>(seg.height()) * seg.width();
    double cover = 0.0;
    for (std::size_t j = 0; j < ng; ++j) {
        if (gt_area[j] == 0) continue;
        double best = 0.0;
        for (std::size_t i = 0; i < ns; ++i) {
            long inter = joint[i][j];
            if (inter == 0) continue;
            long uni = seg_area[i] + gt_area[j] - inter;
            best = std::max(best, static_cast<double>(inter) / static_cast<double>(uni));
        }
        cover += static_cast<double>(gt_area[j]) / total * best;
    }
    return cover;
}

double rand_index(const LabelMap& seg, const LabelMap& gt) {
    check_shapes(seg, gt);
    double n = static_cast<double>(seg.height()) * seg.width();
    double pairs = n * (n - 1.0) / 2.0;
    if (pairs <= 0.0) return 1.0;
    auto joint = cooccurrence(seg, gt);
    std::size_t ns = joint.size(), ng = ns ? joint[0].size() : 0;
    std::vector<long> seg_area(ns, 0), gt_area(ng, 0);
    double joint_pairs = 0.0;
    for (std::size_t i = 0; i < ns; ++i)
        for (std::size_t j = 0; j < ng; ++j) {
            long c = joint[i][j];
            seg_area[i] += c;
            gt_area[j] += c;
            joint_pairs += 0.5 * static_cast<double>(c) * (c - 1);
        }
    double seg_pairs = 0.0, gt_pairs = 0.0;
    for (long a : seg_area) seg_pairs += 0.5 * static_cast<double>(a) * (a - 1);
    for (long a : gt_area) gt_pairs += 0.5 * static_cast<double>(a) * (a - 1);
    // agreements: pairs together in both, plus pairs apart in both.
    double agree = pairs - seg_pairs - gt_pairs + 2.0 * joint_pairs;
    return agree / pairs;
}

double variation_of_information(const LabelMap& seg, const LabelMap& gt) {
    check_shapes(seg, gt);
    auto joint = cooccurrence(seg, gt);
    std::size_t ns = joint.size(), ng = ns ? joint[0].size() : 0;
    double n = static_cast<double>(seg.height()) * seg.width();
    std::vector<long> seg_area(ns, 0), gt_area(ng, 0);
    for (std::size_t i = 0; i < ns; ++i)
        for (std::size_t j = 0; j < ng; ++j) {
            seg_area[i] += joint[i][j];
            gt_area[j] += joint[i][j];
        }
    double h_seg_given_gt = 0.0, h_gt_given_seg = 0.0;
    for (std::size_t i = 0; i < ns; ++i)
        for (std::size_t j = 0; j < ng; ++j) {
            long c = joint[i][j];
            if (c == 0) continue;
            double p = static_cast<double>(c) / n;
            h_seg_given_gt -= p * std::log(static_cast<double>(c) / static_cast<double>(gt_area[j]));
            h_gt_given_seg -= p * std::log(static_cast<double>(c) / static_cast<double>(seg_area[i]));
        }
    return h_seg_given_gt + h_gt_given_seg;
}

namespace {

std::vector<std::pair<int, int>> boundary_pixels(const LabelMap& m) {
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            bool b = (x + 1 < m.width() && m.at(y, x) != m.at(y, x + 1)) ||
                     (y + 1 < m.height() && m.at(y, x) != m.at(y + 1, x));
            if (b) out.emplace_back(y, x);
        }
    return out;
}

double matched_fraction(const std::vector<std::pair<int, int>>& from,
                        const std::vector<std::pair<int, int>>& to, double tol) {
    long hit = 0;
    double t2 = tol * tol;
    for (auto [y, x] : from) {
        for (auto [v, u] : to) {
            double dy = y - v, dx = x - u;
            if (dy * dy + dx * dx <= t2) {
                ++hit;
                break;
            }
        }
    }
    return static_cast<double>(hit) / static_cast<double>(from.size());
}

} // namespace

double boundary_fmeasure(const LabelMap& seg, const LabelMap& gt, double tol) {
    check_shapes(seg, gt);
    if (tol < 0.0) throw numeric_error("boundary tolerance must be non-negative");
    auto bs = boundary_pixels(seg);
    auto bg = boundary_pixels(gt);
    if (bs.empty() && bg.empty()) return 1.0;
    if (bs.empty() || bg.empty()) return 0.0;
    double precision = matched_fraction(bs, bg, tol);
    double recall = matched_fraction(bg, bs, tol);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

ScoreReport evaluate(const LabelMap& seg, const LabelMap& gt, double boundary_tol) {
    ScoreReport r;
    r.gt_covering = gt_covering(seg, gt);
    r.rand_index = rand_index(seg, gt);
    r.voi = variation_of_information(seg, gt);
    r.boundary_f = boundary_fmeasure(seg, gt, boundary_tol);
    return r;
}

} // namespace stdn
