#ifndef STDN_DESCRIPTOR_HPP
#define STDN_DESCRIPTOR_HPP

#include "stdn/poisson.hpp"
#include "stdn/raster.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace stdn {

/// Fixed input feature recipe. For every scale alpha the region-smoothed R, G,
/// B and luma channels are emitted, followed by oriented gradients of the
/// smoothed luma at each angle. Channel order is scale-major.
struct PreprocessSpec {
    std::vector<double> angles;
    std::vector<double> scales;

    static PreprocessSpec standard();
    int channels_per_scale() const { return 4 + static_cast<int>(angles.size()); }
    int output_channels() const {
        return channels_per_scale() * static_cast<int>(scales.size());
    }
};

/// One 1x1 linear layer: out = W y + b applied pixelwise.
struct LayerWeights {
    int in_channels = 0;
    int out_channels = 0;
    std::vector<double> weight; // row-major, out_channels x in_channels
    std::vector<double> bias;   // out_channels

    LayerWeights() = default;
    LayerWeights(int in, int out)
        : in_channels(in), out_channels(out),
          weight(static_cast<std::size_t>(in) * out, 0.0),
          bias(static_cast<std::size_t>(out), 0.0) {}
    double& w(int o, int i) { return weight[static_cast<std::size_t>(o) * in_channels + i]; }
    double w(int o, int i) const {
        return weight[static_cast<std::size_t>(o) * in_channels + i];
    }
};

/// The descriptor network: preprocess stack, then per layer a region-smoothing
/// pass at layer_alpha, a 1x1 linear map and ReLU; softmax over the last
/// layer's channels produces the descriptor.
struct DescriptorNet {
    std::uint32_t version = 1; // weights file format tag
    PreprocessSpec preprocess;
    std::vector<LayerWeights> layers;
    double layer_alpha = 5.0;
    int trained_downsample = 1;      // factor the training images were reduced by
    double alpha_scale_exponent = 2; // alpha multiplier is k^exponent at inference

    void validate() const; // layer chain + shape invariants
    long parameter_count() const;
};

struct NetSummary {
    int layer_count = 0;
    int input_channels = 0;
    std::vector<int> widths;
    long parameters = 0;
    std::string text; // one human-readable line per layer
};

NetSummary describe(const DescriptorNet& net);

/// Net with the standard preprocess and layer widths, weights uniform in
/// +-sqrt(6/(in+out)), biases zero. Deterministic in the seed.
DescriptorNet make_default_net(std::uint64_t seed);
DescriptorNet make_net(const PreprocessSpec& spec, const std::vector<int>& widths,
                       double layer_alpha, std::uint64_t seed);

/// Builds the preprocess feature stack for one region.
ChannelField preprocess(const ChannelField& image, const RegionMask& mask,
                        const PreprocessSpec& spec, const SolverOptions& solver);

/// One layer: smooth every input channel over the region at `alpha`, then the
/// 1x1 linear map, then ReLU.
ChannelField layer_forward(const ChannelField& x, const RegionMask& mask,
                           const LayerWeights& layer, double alpha,
                           const SolverOptions& solver);

/// Full descriptor field: preprocess, the layer stack, softmax across the
/// final channels (computed with max subtraction). Pixels outside the region
/// are zero in every channel.
ChannelField forward(const DescriptorNet& net, const ChannelField& image,
                     const RegionMask& mask, const SolverOptions& solver);

/// Intermediates needed to run the backward pass without re-solving forward.
struct ForwardCache {
    ChannelField input;                  // preprocess output x0
    std::vector<ChannelField> smoothed;  // per layer: y = T[x]
    std::vector<ChannelField> preact;    // per layer: W y + b
    ChannelField output;                 // descriptor field F
};

ForwardCache forward_cached(const DescriptorNet& net, const ChannelField& image,
                            const RegionMask& mask, const SolverOptions& solver);

/// Softmax over channels with max subtraction, restricted to the mask.
ChannelField softmax_channels(const ChannelField& z, const RegionMask& mask);

// Binary weights format: magic "STDN", then little-endian u32 version,
// u32 layer count, per layer u32 in/out followed by row-major f64 weights and
// f64 biases. A text sidecar at path + ".txt" records the preprocess recipe
// and scalar hyperparameters; load_weights requires both files.
void save_weights(const std::string& path, const DescriptorNet& net);
DescriptorNet load_weights(const std::string& path);

/// Copy of the net with every smoothing scale (preprocess and layers)
/// multiplied by factor^alpha_scale_exponent; used when the inference image is
/// factor times the trained resolution.
DescriptorNet with_scaled_alpha(const DescriptorNet& net, double factor);

} // namespace stdn

#endif
