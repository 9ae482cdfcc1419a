#ifndef STDN_SEGMENT_HPP
#define STDN_SEGMENT_HPP

#include "stdn/descriptor.hpp"

#include <vector>

namespace stdn {

struct SegmentParams {
    int num_regions = 2;
    double beta = 1.0;        // arclength weight
    int dilation_radius = 3;  // pixels, L-inf ball
    double dt = 0.1;          // evolution time step per gradient substep
    int inner_steps = 5;      // gradient substeps per descriptor recomputation
    double curvature_epsilon = 1e-8;
    int max_iterations = 100;
    int stable_iterations = 2; // labels unchanged this many times -> converged
    SolverOptions solver = inference_solver();
};

/// N smooth indicator fields over the image domain, clipped to [0,1].
struct SegmentationState {
    std::vector<ChannelField> phi; // one single-channel field per region
    std::vector<bool> frozen;      // regions that vanished; no longer updated
    int height = 0;
    int width = 0;
    int num_regions() const { return static_cast<int>(phi.size()); }
};

/// Near-equal rectangular tiles (factored as close to square as possible);
/// phi_i is the tile indicator smoothed a little so argmax still reproduces
/// the tile map exactly.
SegmentationState init_tessellation(int height, int width, int n);

/// Morphological dilation with the (2r+1)x(2r+1) square structuring element.
RegionMask dilate(const RegionMask& mask, int radius);

/// Interface band: dilate(r) intersected with dilate(complement of r).
RegionMask band(const RegionMask& mask, int radius);

/// div(grad phi / |grad phi|) by central differences, |grad phi| regularized
/// by epsilon. Border pixels use replicated edge values.
ChannelField curvature(const ChannelField& phi, double epsilon = 1e-8);

/// Hard regions by argmax over phi, ties to the lowest region index.
LabelMap hard_labels(const SegmentationState& state);

struct StepDiagnostics {
    double energy = 0.0;            // descriptor fit + beta * perimeter, pre-update
    std::vector<long> region_areas; // pre-update
    long label_changes = 0;         // pixels whose argmax changed in this step
    int frozen_regions = 0;
};

/// One evolution pass: regions from argmax, per-region descriptors on the
/// dilations, data term on band overlaps, curvature flow everywhere, clip.
StepDiagnostics evolve_step(SegmentationState& state, const ChannelField& image,
                            const DescriptorNet& net, const SegmentParams& params);

struct SegmentResult {
    LabelMap labels;
    std::vector<StepDiagnostics> history;
    int iterations = 0;
    bool converged = false;
};

/// Iterates evolve_step from the box tessellation until the hard labels stop
/// changing for params.stable_iterations consecutive steps (or the cap).
SegmentResult segment(const ChannelField& image, const DescriptorNet& net,
                      const SegmentParams& params);

/// Descriptor-fit + arclength energy of a fixed partition; per-region
/// descriptors computed on the dilations, perimeter counted once per adjacent
/// region (interface pairs contribute to both sides).
double partition_energy(const ChannelField& image, const DescriptorNet& net,
                        const LabelMap& labels, const SegmentParams& params);

} // namespace stdn

#endif
