#ifndef STDN_TRAINING_HPP
#define STDN_TRAINING_HPP

#include "stdn/descriptor.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace stdn {

struct TrainConfig {
    double learning_rate = 1.0;
    double momentum = 0.0;
    double grad_clip = 0.5; // cap on the batch gradient's L2 norm; 0 disables
    int epochs = 40;
    int batch = 4;
    int downsample_factor = 0; // 0 -> auto, per image: ceil(max(H,W)/32)
    std::uint64_t seed = 1;
    SolverOptions solver = training_solver();
};

struct LossBreakdown {
    double consistency = 0.0;    // sum_i mean_{R_i} ||F - a_i||^2
    double discrimination = 0.0; // sum over ordered pairs ||a_i - a_j||^2
    double total = 0.0;          // consistency - discrimination
    std::vector<std::vector<double>> means; // a_i (empty in epoch aggregates)
};

/// Mean descriptor per label over the labelled pixels.
std::vector<std::vector<double>> region_means(const ChannelField& F, const LabelMap& labels);

LossBreakdown loss(const ChannelField& F, const LabelMap& labels);

/// dL/dF as a field (each pixel uses its own region's term).
ChannelField loss_cotangent(const ChannelField& F, const LabelMap& labels);

/// Per-layer parameter gradients; reuses LayerWeights as the container.
using NetGradients = std::vector<LayerWeights>;

NetGradients zero_gradients(const DescriptorNet& net);

/// Reverse pass from an output cotangent down to parameter gradients,
/// accumulating into `grads`.
void backward(const DescriptorNet& net, const ForwardCache& cache, const RegionMask& mask,
              const ChannelField& output_cotangent, NetGradients& grads);

/// Forward-mode directional derivative of the descriptor field in a weight
/// direction (biases included); pairs with backward for dot-product checks.
ChannelField jvp_params(const DescriptorNet& net, const ForwardCache& cache,
                        const RegionMask& mask, const NetGradients& direction);

struct GradResult {
    NetGradients grads;
    LossBreakdown scores;
    ChannelField descriptor; // composite field, each pixel from its own region's pass
};

/// Full loss gradient for one image: one descriptor pass per ground-truth
/// region, loss over the composite field, reverse passes summed.
GradResult gradients(const DescriptorNet& net, const ChannelField& image, const LabelMap& labels,
                     const SolverOptions& solver);

struct TrainResult {
    DescriptorNet net;
    std::vector<LossBreakdown> history; // one entry per epoch (mean over images)
};

/// Minibatch SGD with optional momentum. Images and labels are downsampled by
/// the configured factor before any passes. Deterministic in config.seed.
/// Throws numeric_error naming the epoch if the loss goes non-finite.
TrainResult train(const DescriptorNet& net,
                  const std::vector<std::pair<ChannelField, LabelMap>>& dataset,
                  const TrainConfig& config);

} // namespace stdn

#endif
