#ifndef STDN_PROBE_HPP
#define STDN_PROBE_HPP

#include "stdn/descriptor.hpp"
#include "stdn/raster.hpp"

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace stdn {

// ---- exact quarter-turn and shift transforms ----

/// One clockwise quarter turn: out(y, x) = in(H-1-x, y); output is W x H.
ChannelField rot90(const ChannelField& f, int quarter_turns = 1);
RegionMask rot90(const RegionMask& m, int quarter_turns = 1);
LabelMap rot90(const LabelMap& m, int quarter_turns = 1);

/// Rigid integer shift; pixels shifted in from outside take `fill` / false.
ChannelField shift(const ChannelField& f, int dy, int dx, double fill = 0.0);
RegionMask shift(const RegionMask& m, int dy, int dx);
LabelMap shift(const LabelMap& m, int dy, int dx, std::uint8_t fill = 0);

struct Transformed {
    ChannelField image;
    RegionMask mask;  // transformed input mask, restricted to valid pixels
    RegionMask valid; // pixels whose value came from real source data
};

/// Rotation about the image centre by theta (counter-clockwise in image
/// coordinates) followed by an integer shift. Multiples of pi/2 are exact
/// permutations; other angles sample bilinearly and shrink the valid set.
Transformed rotate_translate(const ChannelField& image, const RegionMask& mask, double theta,
                             int shift_y, int shift_x);

/// Nearest-neighbour transform of a label map along the same path.
LabelMap rotate_translate_labels(const LabelMap& labels, double theta, int shift_y, int shift_x);

// ---- truncated-Fourier deformations ----

/// Smooth displacement field from a truncated Fourier series on [0,1]^2:
/// v_c(x) = Re sum_{|k_i| <= n_max} a_{k,c} exp(i 2 pi k.x). Coefficients are
/// conjugate-symmetric so v is real; displacement values are in pixels.
struct DeformationField {
    int n_max = 0;
    int height = 0;
    int width = 0;
    std::vector<std::complex<double>> coeff; // 2 components x (2n+1)^2 modes
    std::vector<double> vx, vy;              // realized per-pixel displacement

    int modes_per_axis() const { return 2 * n_max + 1; }
    std::complex<double>& a(int comp, int k1, int k2) {
        int m = modes_per_axis();
        return coeff[static_cast<std::size_t>(comp) * m * m +
                     static_cast<std::size_t>(k1 + n_max) * m + (k2 + n_max)];
    }
    std::complex<double> a(int comp, int k1, int k2) const {
        int m = modes_per_axis();
        return coeff[static_cast<std::size_t>(comp) * m * m +
                     static_cast<std::size_t>(k1 + n_max) * m + (k2 + n_max)];
    }
};

/// Squared first-order Sobolev norm |a_0|^2 + sum_{k != 0} |k|^2 |a_k|^2,
/// both components included.
double sobolev_norm_sq(const DeformationField& d);

/// Random conjugate-symmetric coefficients rescaled so sobolev_norm_sq hits
/// target_norm_sq exactly (0 gives the identity). Deterministic per seed.
/// When the grid resolves every mode, a Parseval identity between the
/// realized field and the coefficients is verified at generation time.
DeformationField random_deformation(double target_norm_sq, int n_max, int height, int width,
                                    std::uint64_t seed);

/// Backward warp out(p) = image(p + v(p)), bilinear, border clamped.
ChannelField warp(const ChannelField& image, const DeformationField& d);
/// Same path with nearest-neighbour lookup.
LabelMap warp_labels(const LabelMap& labels, const DeformationField& d);

// ---- covariance / robustness harnesses ----

using Pipeline = std::function<LabelMap(const ChannelField&)>;

/// GT-covering between two label maps counting only pixels in `valid`.
double agreement_score(const LabelMap& test, const LabelMap& reference, const RegionMask& valid);

/// Agreement between transform(pipeline(image)) and pipeline(transform(image))
/// for the rotation+shift transform, scored on the valid pixels.
double covariance_score(const Pipeline& pipeline, const ChannelField& image, double theta,
                        int shift_y, int shift_x);

struct SweepRow {
    double norm_sq = 0.0;
    std::uint64_t seed = 0;
    double gt_cov = 0.0;
    double rand = 0.0;
};

/// For each (norm, seed): deform the image, run the pipeline on both versions,
/// and score warped-original-labels against deformed-image labels.
std::vector<SweepRow> robustness_sweep(const Pipeline& pipeline, const ChannelField& image,
                                       const std::vector<double>& norms_sq,
                                       const std::vector<std::uint64_t>& seeds, int n_max);

/// Net whose first-layer weights are re-expressed in the rotated angle frame:
/// oriented-gradient channels of a quarter-turned image are a signed
/// permutation of the originals, so conjugating the first layer by that
/// permutation makes the whole descriptor commute with the quarter turn.
/// Empty when the angle set is not closed under rotation mod pi.
std::optional<DescriptorNet> conjugate_quarter_turn(const DescriptorNet& net, int quarter_turns);

} // namespace stdn

#endif
