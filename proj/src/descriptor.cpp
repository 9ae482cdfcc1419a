#include "stdn/descriptor.hpp"

#include "stdn/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace stdn {

PreprocessSpec PreprocessSpec::standard() {
    PreprocessSpec s;
    s.angles = {0.0, M_PI / 4.0, M_PI / 2.0, 3.0 * M_PI / 4.0};
    s.scales = {5.0, 10.0, 15.0, 20.0, 25.0};
    return s;
}

void DescriptorNet::validate() const {
    if (layers.empty()) throw numeric_error("descriptor net has no layers");
    if (layers.front().in_channels != preprocess.output_channels())
        throw numeric_error("first layer width does not match the preprocess stack");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerWeights& l = layers[i];
        if (l.in_channels <= 0 || l.out_channels <= 0)
            throw numeric_error("layer with empty shape");
        if (l.weight.size() != static_cast<std::size_t>(l.in_channels) * l.out_channels ||
            l.bias.size() != static_cast<std::size_t>(l.out_channels))
            throw numeric_error("layer buffer sizes do not match declared shape");
        if (i > 0 && layers[i - 1].out_channels != l.in_channels)
            throw numeric_error("layer widths do not chain");
    }
    if (layer_alpha < 0.0) throw numeric_error("layer alpha must be non-negative");
}

long DescriptorNet::parameter_count() const {
    long n = 0;
    for (const LayerWeights& l : layers)
        n += static_cast<long>(l.weight.size()) + static_cast<long>(l.bias.size());
    return n;
}

NetSummary describe(const DescriptorNet& net) {
    net.validate();
    NetSummary s;
    s.layer_count = static_cast<int>(net.layers.size());
    s.input_channels = net.preprocess.output_channels();
    s.parameters = net.parameter_count();
    std::ostringstream out;
    out << "input: " << s.input_channels << " channels ("
        << net.preprocess.scales.size() << " scales x "
        << net.preprocess.channels_per_scale() << ")\n";
    for (int i = 0; i < s.layer_count; ++i) {
        const LayerWeights& l = net.layers[static_cast<std::size_t>(i)];
        s.widths.push_back(l.out_channels);
        out << "layer " << (i + 1) << ": smooth(alpha=" << net.layer_alpha << ") -> linear "
            << l.in_channels << " -> " << l.out_channels << " -> relu\n";
    }
    out << "softmax over " << net.layers.back().out_channels << " channels, "
        << s.parameters << " parameters\n";
    s.text = out.str();
    return s;
}

DescriptorNet make_net(const PreprocessSpec& spec, const std::vector<int>& widths,
                       double layer_alpha, std::uint64_t seed) {
    DescriptorNet net;
    net.preprocess = spec;
    net.layer_alpha = layer_alpha;
    Rng rng(seed);
    int in = spec.output_channels();
    for (int w : widths) {
        LayerWeights l(in, w);
        double bound = std::sqrt(6.0 / static_cast<double>(in + w));
        for (double& v : l.weight) v = rng.uniform(-bound, bound);
        net.layers.push_back(std::move(l));
        in = w;
    }
    net.validate();
    return net;
}

DescriptorNet make_default_net(std::uint64_t seed) {
    return make_net(PreprocessSpec::standard(), {100, 40, 20, 5}, 5.0, seed);
}

ChannelField preprocess(const ChannelField& image, const RegionMask& mask,
                        const PreprocessSpec& spec, const SolverOptions& solver) {
    if (image.channels() != 1 && image.channels() != 3)
        throw numeric_error("preprocess expects a 1- or 3-channel image");
    int h = image.height(), w = image.width();
    ChannelField rgb(h, w, 3);
    for (int c = 0; c < 3; ++c) {
        const double* src = image.plane(image.channels() == 3 ? c : 0);
        std::memcpy(rgb.plane(c), src, image.plane_size() * sizeof(double));
    }
    ChannelField gray = to_grayscale(image.channels() == 3 ? image : rgb);

    ChannelField colour_and_gray(h, w, 4);
    for (int c = 0; c < 3; ++c)
        std::memcpy(colour_and_gray.plane(c), rgb.plane(c), rgb.plane_size() * sizeof(double));
    std::memcpy(colour_and_gray.plane(3), gray.plane(0), gray.plane_size() * sizeof(double));

    ChannelField out(h, w, spec.output_channels());
    int per_scale = spec.channels_per_scale();
    for (std::size_t s = 0; s < spec.scales.size(); ++s) {
        PoissonSystem sys(mask, spec.scales[s], solver);
        ChannelField smooth = solve(sys, colour_and_gray);
        int base = static_cast<int>(s) * per_scale;
        for (int c = 0; c < 4; ++c)
            std::memcpy(out.plane(base + c), smooth.plane(c),
                        smooth.plane_size() * sizeof(double));
        ChannelField smooth_gray(h, w, 1);
        std::memcpy(smooth_gray.plane(0), smooth.plane(3), smooth.plane_size() * sizeof(double));
        for (std::size_t a = 0; a < spec.angles.size(); ++a) {
            ChannelField g = oriented_gradient(smooth_gray, mask, spec.angles[a]);
            std::memcpy(out.plane(base + 4 + static_cast<int>(a)), g.plane(0),
                        g.plane_size() * sizeof(double));
        }
    }
    return out;
}

namespace {

/// z = W y + b on the mask, zero elsewhere.
ChannelField linear_map(const ChannelField& y, const RegionMask& mask, const LayerWeights& l) {
    int h = y.height(), w = y.width();
    ChannelField z(h, w, l.out_channels);
    for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) {
            if (!mask.inside(yy, xx)) continue;
            std::size_t p = static_cast<std::size_t>(yy) * w + xx;
            for (int o = 0; o < l.out_channels; ++o) {
                double acc = l.bias[static_cast<std::size_t>(o)];
                const double* row = l.weight.data() + static_cast<std::size_t>(o) * l.in_channels;
                for (int i = 0; i < l.in_channels; ++i) acc += row[i] * y.plane(i)[p];
                z.plane(o)[p] = acc;
            }
        }
    return z;
}

ChannelField relu(const ChannelField& z) {
    ChannelField out = z;
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
}

} // namespace

ChannelField layer_forward(const ChannelField& x, const RegionMask& mask,
                           const LayerWeights& layer, double alpha,
                           const SolverOptions& solver) {
    if (x.channels() != layer.in_channels)
        throw numeric_error("layer input channel count mismatch");
    PoissonSystem sys(mask, alpha, solver);
    ChannelField y = solve(sys, x);
    return relu(linear_map(y, mask, layer));
}

ChannelField softmax_channels(const ChannelField& z, const RegionMask& mask) {
    int h = z.height(), w = z.width(), n = z.channels();
    ChannelField out(h, w, n);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!mask.inside(y, x)) continue;
            std::size_t p = static_cast<std::size_t>(y) * w + x;
            double m = z.plane(0)[p];
            for (int c = 1; c < n; ++c) m = std::max(m, z.plane(c)[p]);
            double sum = 0.0;
            for (int c = 0; c < n; ++c) {
                double e = std::exp(z.plane(c)[p] - m);
                out.plane(c)[p] = e;
                sum += e;
            }
            for (int c = 0; c < n; ++c) out.plane(c)[p] /= sum;
        }
    return out;
}

ForwardCache forward_cached(const DescriptorNet& net, const ChannelField& image,
                            const RegionMask& mask, const SolverOptions& solver) {
    net.validate();
    ForwardCache cache;
    cache.input = preprocess(image, mask, net.preprocess, solver);
    PoissonSystem sys(mask, net.layer_alpha, solver);
    ChannelField x = cache.input;
    for (const LayerWeights& l : net.layers) {
        ChannelField y = solve(sys, x);
        ChannelField pre = linear_map(y, mask, l);
        cache.smoothed.push_back(std::move(y));
        x = relu(pre);
        cache.preact.push_back(std::move(pre));
    }
    cache.output = softmax_channels(x, mask);
    return cache;
}

ChannelField forward(const DescriptorNet& net, const ChannelField& image,
                     const RegionMask& mask, const SolverOptions& solver) {
    net.validate();
    ChannelField x = preprocess(image, mask, net.preprocess, solver);
    PoissonSystem sys(mask, net.layer_alpha, solver);
    for (const LayerWeights& l : net.layers) {
        ChannelField y = solve(sys, x);
        x = relu(linear_map(y, mask, l));
    }
    return softmax_channels(x, mask);
}

namespace {

constexpr char kMagic[4] = {'S', 'T', 'D', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::string format_full(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

} // namespace

void save_weights(const std::string& path, const DescriptorNet& net) {
    net.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write weights: " + path);
    out.write(kMagic, 4);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(net.layers.size()));
    for (const LayerWeights& l : net.layers) {
        put_u32(out, static_cast<std::uint32_t>(l.in_channels));
        put_u32(out, static_cast<std::uint32_t>(l.out_channels));
        for (double v : l.weight) put_f64(out, v);
        for (double v : l.bias) put_f64(out, v);
    }
    if (!out) throw io_error("short write: " + path);
    out.close();

    std::ofstream side(path + ".txt");
    if (!side) throw io_error("cannot write weights sidecar: " + path + ".txt");
    side << "format_version " << kFormatVersion << "\n";
    side << "angles";
    for (double a : net.preprocess.angles) side << " " << format_full(a);
    side << "\nscales";
    for (double s : net.preprocess.scales) side << " " << format_full(s);
    side << "\nlayer_alpha " << format_full(net.layer_alpha) << "\n";
    side << "trained_downsample " << net.trained_downsample << "\n";
    side << "alpha_scale_exponent " << format_full(net.alpha_scale_exponent) << "\n";
    if (!side) throw io_error("short write: " + path + ".txt");
}

DescriptorNet load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open weights: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw io_error("not a descriptor weights file: " + path);
    std::uint32_t version = get_u32(in);
    if (version != kFormatVersion)
        throw io_error("weights format version " + std::to_string(version) +
                       " not supported (expected " + std::to_string(kFormatVersion) + ")");
    DescriptorNet net;
    net.version = version;
    std::uint32_t layer_count = get_u32(in);
    if (!in || layer_count == 0 || layer_count > 64)
        throw io_error("implausible layer count in " + path);
    for (std::uint32_t i = 0; i < layer_count; ++i) {
        std::uint32_t cin = get_u32(in);
        std::uint32_t cout = get_u32(in);
        if (!in || cin == 0 || cout == 0 || cin > 100000 || cout > 100000)
            throw io_error("implausible layer shape in " + path);
        LayerWeights l(static_cast<int>(cin), static_cast<int>(cout));
        for (double& v : l.weight) v = get_f64(in);
        for (double& v : l.bias) v = get_f64(in);
        if (!in) throw io_error("truncated weights file: " + path);
        net.layers.push_back(std::move(l));
    }

    std::ifstream side(path + ".txt");
    if (!side) throw io_error("missing weights sidecar: " + path + ".txt");
    net.preprocess.angles.clear();
    net.preprocess.scales.clear();
    std::string line;
    while (std::getline(side, line)) {
        std::istringstream row(line);
        std::string key;
        row >> key;
        if (key == "angles") {
            double v;
            while (row >> v) net.preprocess.angles.push_back(v);
        } else if (key == "scales") {
            double v;
            while (row >> v) net.preprocess.scales.push_back(v);
        } else if (key == "layer_alpha") {
            row >> net.layer_alpha;
        } else if (key == "trained_downsample") {
            row >> net.trained_downsample;
        } else if (key == "alpha_scale_exponent") {
            row >> net.alpha_scale_exponent;
        } else if (key == "format_version") {
            std::uint32_t v = 0;
            row >> v;
            if (v != version) throw io_error("sidecar/weights version mismatch: " + path);
        }
    }
    if (net.preprocess.angles.empty() || net.preprocess.scales.empty())
        throw io_error("weights sidecar missing preprocess recipe: " + path + ".txt");
    net.validate();
    return net;
}

DescriptorNet with_scaled_alpha(const DescriptorNet& net, double factor) {
    if (factor <= 0.0) throw numeric_error("alpha scale factor must be positive");
    DescriptorNet out = net;
    double mul = std::pow(factor, net.alpha_scale_exponent);
    for (double& s : out.preprocess.scales) s *= mul;
    out.layer_alpha *= mul;
    return out;
}

} // namespace stdn
