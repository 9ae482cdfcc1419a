#ifndef STDN_EVALMETRICS_HPP
#define STDN_EVALMETRICS_HPP

#include "stdn/raster.hpp"

namespace stdn {

struct ScoreReport {
    double gt_covering = 0.0; // [0,1]
    double rand_index = 0.0;  // [0,1]
    double voi = 0.0;         // >= 0, nats
    double boundary_f = 0.0;  // [0,1]
};

/// sum over ground-truth regions of (|R|/|Omega|) * best IoU against seg.
double gt_covering(const LabelMap& seg, const LabelMap& gt);

/// Fraction of pixel pairs classified the same way (together/apart) by both
/// partitions, via label co-occurrence counts. 1.0 when fewer than two pixels.
double rand_index(const LabelMap& seg, const LabelMap& gt);

/// H(seg|gt) + H(gt|seg) in nats from the joint label histogram.
double variation_of_information(const LabelMap& seg, const LabelMap& gt);

/// Boundary pixels are the left/top sides of 4-neighbour label changes.
/// Precision/recall by nearest-boundary Euclidean matching within tol;
/// both boundaries empty -> 1, exactly one empty -> 0.
double boundary_fmeasure(const LabelMap& seg, const LabelMap& gt, double tol = 2.0);

ScoreReport evaluate(const LabelMap& seg, const LabelMap& gt, double boundary_tol = 2.0);

} // namespace stdn

#endif
