#include "stdn/training.hpp"

#include "stdn/common.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace stdn {

namespace {

void check_labelled(const ChannelField& F, const LabelMap& labels) {
    if (F.height() != labels.height() || F.width() != labels.width())
        throw numeric_error("descriptor field and label map shapes differ");
    if (labels.num_labels() < 1 || !labels.labels_contiguous())
        throw numeric_error("labels must be contiguous 0..n-1 with no empty region");
}

} // namespace

std::vector<std::vector<double>> region_means(const ChannelField& F, const LabelMap& labels) {
    check_labelled(F, labels);
    int n = labels.num_labels(), ch = F.channels();
    std::vector<std::vector<double>> means(static_cast<std::size_t>(n),
                                           std::vector<double>(static_cast<std::size_t>(ch), 0.0));
    std::vector<long> area(static_cast<std::size_t>(n), 0);
    for (int y = 0; y < F.height(); ++y)
        for (int x = 0; x < F.width(); ++x) {
            int l = labels.at(y, x);
            ++area[static_cast<std::size_t>(l)];
            for (int c = 0; c < ch; ++c)
                means[static_cast<std::size_t>(l)][static_cast<std::size_t>(c)] += F.at(c, y, x);
        }
    for (int l = 0; l < n; ++l)
        for (int c = 0; c < ch; ++c)
            means[static_cast<std::size_t>(l)][static_cast<std::size_t>(c)] /=
                static_cast<double>(area[static_cast<std::size_t>(l)]);
    return means;
}

LossBreakdown loss(const ChannelField& F, const LabelMap& labels) {
    auto means = region_means(F, labels);
    int n = labels.num_labels(), ch = F.channels();
    LossBreakdown out;
    out.means = means;
    std::vector<long> area(static_cast<std::size_t>(n), 0);
    for (std::uint8_t v : labels.data()) ++area[v];

    for (int y = 0; y < F.height(); ++y)
        for (int x = 0; x < F.width(); ++x) {
            int l = labels.at(y, x);
            double d2 = 0.0;
            for (int c = 0; c < ch; ++c) {
                double d = F.at(c, y, x) - means[static_cast<std::size_t>(l)][static_cast<std::size_t>(c)];
                d2 += d * d;
            }
            out.consistency += d2 / static_cast<double>(area[static_cast<std::size_t>(l)]);
        }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            double d2 = 0.0;
            for (int c = 0; c < ch; ++c) {
                double d = means[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] -
                           means[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
                d2 += d * d;
            }
            out.discrimination += d2;
        }
    out.total = out.consistency - out.discrimination;
    return out;
}

ChannelField loss_cotangent(const ChannelField& F, const LabelMap& labels) {
    auto means = region_means(F, labels);
    int n = labels.num_labels(), ch = F.channels();
    std::vector<long> area(static_cast<std::size_t>(n), 0);
    for (std::uint8_t v : labels.data()) ++area[v];

    // Per region: (4/|R|) * sum_{j != k} (a_k - a_j), the pull from the
    // discrimination term (its two ordered appearances fold into the 4).
    std::vector<std::vector<double>> repel(static_cast<std::size_t>(n),
                                           std::vector<double>(static_cast<std::size_t>(ch), 0.0));
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) {
            if (j == k) continue;
            for (int c = 0; c < ch; ++c)
                repel[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] +=
                    means[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] -
                    means[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
        }

    ChannelField out(F.height(), F.width(), ch);
    for (int y = 0; y < F.height(); ++y)
        for (int x = 0; x < F.width(); ++x) {
            int k = labels.at(y, x);
            double inv = 1.0 / static_cast<double>(area[static_cast<std::size_t>(k)]);
            for (int c = 0; c < ch; ++c)
                out.at(c, y, x) =
                    2.0 * inv *
                        (F.at(c, y, x) -
                         means[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)]) -
                    4.0 * inv * repel[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
        }
    return out;
}

NetGradients zero_gradients(const DescriptorNet& net) {
    NetGradients g;
    for (const LayerWeights& l : net.layers) g.emplace_back(l.in_channels, l.out_channels);
    return g;
}

namespace {

/// s (x) (v - <v, s>) per pixel; both softmax VJP (v = output cotangent) and
/// JVP (v = input perturbation) reduce to this by s's symmetry.
ChannelField softmax_tangent(const ChannelField& s, const ChannelField& v,
                             const RegionMask& mask) {
    int h = s.height(), w = s.width(), n = s.channels();
    ChannelField out(h, w, n);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!mask.inside(y, x)) continue;
            std::size_t p = static_cast<std::size_t>(y) * w + x;
            double dotp = 0.0;
            for (int c = 0; c < n; ++c) dotp += s.plane(c)[p] * v.plane(c)[p];
            for (int c = 0; c < n; ++c) out.plane(c)[p] = s.plane(c)[p] * (v.plane(c)[p] - dotp);
        }
    return out;
}

} // namespace

void backward(const DescriptorNet& net, const ForwardCache& cache, const RegionMask& mask,
              const ChannelField& output_cotangent, NetGradients& grads) {
    int m = static_cast<int>(net.layers.size());
    PoissonSystem sys(mask, net.layer_alpha, training_solver());

    ChannelField upstream = softmax_tangent(cache.output, output_cotangent, mask);
    for (int l = m - 1; l >= 0; --l) {
        const LayerWeights& layer = net.layers[static_cast<std::size_t>(l)];
        const ChannelField& pre = cache.preact[static_cast<std::size_t>(l)];
        const ChannelField& y = cache.smoothed[static_cast<std::size_t>(l)];
        LayerWeights& g = grads[static_cast<std::size_t>(l)];

        ChannelField pre_bar(pre.height(), pre.width(), pre.channels());
        for (std::size_t i = 0; i < pre.data().size(); ++i)
            pre_bar.data()[i] = pre.data()[i] > 0.0 ? upstream.data()[i] : 0.0;

        for (int yy = 0; yy < pre.height(); ++yy)
            for (int xx = 0; xx < pre.width(); ++xx) {
                if (!mask.inside(yy, xx)) continue;
                std::size_t p = static_cast<std::size_t>(yy) * pre.width() + xx;
                for (int o = 0; o < layer.out_channels; ++o) {
                    double pb = pre_bar.plane(o)[p];
                    if (pb == 0.0) continue;
                    g.bias[static_cast<std::size_t>(o)] += pb;
                    double* grow =
                        g.weight.data() + static_cast<std::size_t>(o) * layer.in_channels;
                    for (int i = 0; i < layer.in_channels; ++i) grow[i] += pb * y.plane(i)[p];
                }
            }

        if (l == 0) break;
        ChannelField y_bar(pre.height(), pre.width(), layer.in_channels);
        for (int yy = 0; yy < pre.height(); ++yy)
            for (int xx = 0; xx < pre.width(); ++xx) {
                if (!mask.inside(yy, xx)) continue;
                std::size_t p = static_cast<std::size_t>(yy) * pre.width() + xx;
                for (int i = 0; i < layer.in_channels; ++i) {
                    double acc = 0.0;
                    for (int o = 0; o < layer.out_channels; ++o)
                        acc += layer.weight[static_cast<std::size_t>(o) * layer.in_channels + i] *
                               pre_bar.plane(o)[p];
                    y_bar.plane(i)[p] = acc;
                }
            }
        upstream = solve_adjoint(sys, y_bar);
    }
}

ChannelField jvp_params(const DescriptorNet& net, const ForwardCache& cache,
                        const RegionMask& mask, const NetGradients& direction) {
    int m = static_cast<int>(net.layers.size());
    PoissonSystem sys(mask, net.layer_alpha, training_solver());
    int h = cache.input.height(), w = cache.input.width();

    ChannelField dx; // tangent of the layer input; empty means identically zero
    for (int l = 0; l < m; ++l) {
        const LayerWeights& layer = net.layers[static_cast<std::size_t>(l)];
        const LayerWeights& dW = direction[static_cast<std::size_t>(l)];
        const ChannelField& y = cache.smoothed[static_cast<std::size_t>(l)];
        const ChannelField& pre = cache.preact[static_cast<std::size_t>(l)];

        ChannelField dy;
        if (dx.channels() > 0) dy = solve_jvp(sys, dx);

        ChannelField dpre(h, w, layer.out_channels);
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) {
                if (!mask.inside(yy, xx)) continue;
                std::size_t p = static_cast<std::size_t>(yy) * w + xx;
                for (int o = 0; o < layer.out_channels; ++o) {
                    double acc = dW.bias[static_cast<std::size_t>(o)];
                    const double* wrow =
                        layer.weight.data() + static_cast<std::size_t>(o) * layer.in_channels;
                    const double* dwrow =
                        dW.weight.data() + static_cast<std::size_t>(o) * layer.in_channels;
                    for (int i = 0; i < layer.in_channels; ++i) {
                        acc += dwrow[i] * y.plane(i)[p];
                        if (dy.channels() > 0) acc += wrow[i] * dy.plane(i)[p];
                    }
                    dpre.plane(o)[p] = acc;
                }
            }
        for (std::size_t i = 0; i < dpre.data().size(); ++i)
            if (pre.data()[i] <= 0.0) dpre.data()[i] = 0.0;
        dx = std::move(dpre);
    }
    return softmax_tangent(cache.output, dx, mask);
}

GradResult gradients(const DescriptorNet& net, const ChannelField& image, const LabelMap& labels,
                     const SolverOptions& solver) {
    if (image.height() != labels.height() || image.width() != labels.width())
        throw numeric_error("image and label map shapes differ");
    if (!labels.labels_contiguous())
        throw numeric_error("labels must be contiguous 0..n-1 with no empty region");
    int n = labels.num_labels();

    std::vector<RegionMask> masks;
    std::vector<ForwardCache> caches;
    for (int i = 0; i < n; ++i) {
        masks.push_back(labels.mask_of(static_cast<std::uint8_t>(i)));
        caches.push_back(forward_cached(net, image, masks.back(), solver));
    }

    int ch = net.layers.back().out_channels;
    ChannelField composite(image.height(), image.width(), ch);
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x) {
            int l = labels.at(y, x);
            for (int c = 0; c < ch; ++c)
                composite.at(c, y, x) = caches[static_cast<std::size_t>(l)].output.at(c, y, x);
        }

    GradResult out{zero_gradients(net), loss(composite, labels), composite};
    ChannelField cot = loss_cotangent(composite, labels);
    for (int i = 0; i < n; ++i) {
        // Only this region's pixels feed this region's pass.
        ChannelField cot_i(image.height(), image.width(), ch);
        for (int y = 0; y < image.height(); ++y)
            for (int x = 0; x < image.width(); ++x)
                if (labels.at(y, x) == i)
                    for (int c = 0; c < ch; ++c) cot_i.at(c, y, x) = cot.at(c, y, x);
        backward(net, caches[static_cast<std::size_t>(i)], masks[static_cast<std::size_t>(i)],
                 cot_i, out.grads);
    }
    return out;
}

namespace {

int auto_factor(int h, int w) {
    int m = std::max(h, w);
    return m <= 32 ? 1 : (m + 31) / 32;
}

} // namespace

TrainResult train(const DescriptorNet& net,
                  const std::vector<std::pair<ChannelField, LabelMap>>& dataset,
                  const TrainConfig& config) {
    net.validate();
    if (dataset.empty()) throw numeric_error("training dataset is empty");
    if (config.batch < 1 || config.epochs < 0 || config.learning_rate <= 0.0)
        throw numeric_error("invalid training configuration");

    std::vector<std::pair<ChannelField, LabelMap>> items;
    int first_factor = 1;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& [img, lab] = dataset[i];
        int f = config.downsample_factor > 0 ? config.downsample_factor
                                             : auto_factor(img.height(), img.width());
        if (i == 0) first_factor = f;
        LabelMap small = downsample_labels(lab, f);
        if (!small.labels_contiguous())
            throw numeric_error("downsampling removed a region from item " + std::to_string(i));
        items.emplace_back(downsample(img, f), std::move(small));
    }

    TrainResult result;
    result.net = net;
    result.net.trained_downsample = first_factor;
    Rng rng(config.seed);
    NetGradients velocity = zero_gradients(net);

    std::vector<int> order(items.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        LossBreakdown epoch_mean;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch)) {
            std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch));
            NetGradients acc = zero_gradients(result.net);
            for (std::size_t k = start; k < stop; ++k) {
                const auto& [img, lab] = items[static_cast<std::size_t>(order[k])];
                GradResult g = gradients(result.net, img, lab, config.solver);
                if (!std::isfinite(g.scores.total)) {
                    std::ostringstream msg;
                    msg << "training loss became non-finite at epoch " << epoch + 1 << ", item "
                        << order[k] << "; weights not updated";
                    throw numeric_error(msg.str());
                }
                epoch_mean.consistency += g.scores.consistency;
                epoch_mean.discrimination += g.scores.discrimination;
                epoch_mean.total += g.scores.total;
                for (std::size_t l = 0; l < acc.size(); ++l) {
                    for (std::size_t j = 0; j < acc[l].weight.size(); ++j)
                        acc[l].weight[j] += g.grads[l].weight[j];
                    for (std::size_t j = 0; j < acc[l].bias.size(); ++j)
                        acc[l].bias[j] += g.grads[l].bias[j];
                }
            }
            double inv = 1.0 / static_cast<double>(stop - start);
            if (config.grad_clip > 0.0) {
                double norm_sq = 0.0;
                for (const LayerWeights& g : acc) {
                    for (double v : g.weight) norm_sq += v * v;
                    for (double v : g.bias) norm_sq += v * v;
                }
                double norm = std::sqrt(norm_sq) * inv;
                if (norm > config.grad_clip) inv *= config.grad_clip / norm;
            }
            for (std::size_t l = 0; l < acc.size(); ++l) {
                LayerWeights& w = result.net.layers[l];
                for (std::size_t j = 0; j < w.weight.size(); ++j) {
                    velocity[l].weight[j] =
                        config.momentum * velocity[l].weight[j] + acc[l].weight[j] * inv;
                    w.weight[j] -= config.learning_rate * velocity[l].weight[j];
                }
                for (std::size_t j = 0; j < w.bias.size(); ++j) {
                    velocity[l].bias[j] =
                        config.momentum * velocity[l].bias[j] + acc[l].bias[j] * inv;
                    w.bias[j] -= config.learning_rate * velocity[l].bias[j];
                }
            }
        }
        double inv_n = 1.0 / static_cast<double>(items.size());
        epoch_mean.consistency *= inv_n;
        epoch_mean.discrimination *= inv_n;
        epoch_mean.total *= inv_n;
        result.history.push_back(epoch_mean);
    }
    return result;
}

} // namespace stdn
