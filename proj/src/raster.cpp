#include "stdn/raster.hpp"

#include "stdn/common.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include <png.h>

namespace stdn {

long RegionMask::count() const {
    long n = 0;
    for (std::uint8_t v : in_) n += v;
    return n;
}

RegionMask RegionMask::complement() const {
    RegionMask out(h_, w_);
    for (std::size_t i = 0; i < in_.size(); ++i) out.in_[i] = in_[i] ? 0 : 1;
    return out;
}

int LabelMap::num_labels() const {
    if (label_.empty()) return 0;
    return static_cast<int>(*std::max_element(label_.begin(), label_.end())) + 1;
}

RegionMask LabelMap::mask_of(std::uint8_t label) const {
    RegionMask out(h_, w_);
    for (int y = 0; y < h_; ++y)
        for (int x = 0; x < w_; ++x)
            if (at(y, x) == label) out.set(y, x, true);
    return out;
}

bool LabelMap::labels_contiguous() const {
    int n = num_labels();
    std::vector<long> hist(static_cast<std::size_t>(n), 0);
    for (std::uint8_t v : label_) ++hist[v];
    for (long c : hist)
        if (c == 0) return false;
    return true;
}

namespace {

bool has_suffix(const std::string& s, const char* suf) {
    std::string l = s;
    std::transform(l.begin(), l.end(), l.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::size_t n = std::strlen(suf);
    return l.size() >= n && l.compare(l.size() - n, n, suf) == 0;
}

// ---- PNG ----

struct PngReadCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* fp = nullptr;
    ~PngReadCloser() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

ChannelField load_png(const std::string& path) {
    PngReadCloser ctx;
    ctx.fp = std::fopen(path.c_str(), "rb");
    if (!ctx.fp) throw io_error("cannot open image: " + path);
    ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!ctx.png) throw io_error("libpng init failed");
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.info) throw io_error("libpng init failed");
    if (setjmp(png_jmpbuf(ctx.png))) throw io_error("malformed PNG: " + path);

    png_init_io(ctx.png, ctx.fp);
    png_read_info(ctx.png, ctx.info);

    png_uint_32 w = png_get_image_width(ctx.png, ctx.info);
    png_uint_32 h = png_get_image_height(ctx.png, ctx.info);
    int color = png_get_color_type(ctx.png, ctx.info);
    int depth = png_get_bit_depth(ctx.png, ctx.info);

    if (depth == 16) png_set_strip_16(ctx.png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
    if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
    png_set_strip_alpha(ctx.png);
    png_read_update_info(ctx.png, ctx.info);

    int chans = static_cast<int>(png_get_channels(ctx.png, ctx.info));
    if (chans != 1 && chans != 3) throw io_error("unsupported PNG channel count in " + path);

    std::vector<png_byte> row(static_cast<std::size_t>(w) * chans);
    ChannelField out(static_cast<int>(h), static_cast<int>(w), chans);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(ctx.png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x)
            for (int c = 0; c < chans; ++c)
                out.at(c, static_cast<int>(y), static_cast<int>(x)) =
                    row[static_cast<std::size_t>(x) * chans + c] / 255.0;
    }
    png_read_end(ctx.png, nullptr);
    return out;
}

struct PngWriteCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* fp = nullptr;
    ~PngWriteCloser() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

void save_png(const std::string& path, const ChannelField& img) {
    PngWriteCloser ctx;
    ctx.fp = std::fopen(path.c_str(), "wb");
    if (!ctx.fp) throw io_error("cannot write image: " + path);
    ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!ctx.png) throw io_error("libpng init failed");
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.info) throw io_error("libpng init failed");
    if (setjmp(png_jmpbuf(ctx.png))) throw io_error("PNG write failed: " + path);

    int chans = img.channels();
    int color = chans == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_init_io(ctx.png, ctx.fp);
    png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(img.width()),
                 static_cast<png_uint_32>(img.height()), 8, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(ctx.png, ctx.info);

    std::vector<png_byte> row(static_cast<std::size_t>(img.width()) * chans);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < chans; ++c) {
                double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
                row[static_cast<std::size_t>(x) * chans + c] =
                    static_cast<png_byte>(std::lround(v * 255.0));
            }
        png_write_row(ctx.png, row.data());
    }
    png_write_end(ctx.png, nullptr);
}

// ---- PNM (P5 / P6, 8-bit binary) ----

int pnm_token(std::istream& in) {
    // Skips whitespace and '#' comments, then reads one unsigned int.
    for (;;) {
        int ch = in.peek();
        if (ch == '#') {
            std::string dummy;
            std::getline(in, dummy);
        } else if (std::isspace(ch)) {
            in.get();
        } else {
            break;
        }
    }
    int value = -1;
    in >> value;
    return in ? value : -1;
}

ChannelField load_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open image: " + path);
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '6')) throw io_error("not a binary PGM/PPM: " + path);
    int chans = m1 == '5' ? 1 : 3;
    int w = pnm_token(in);
    int h = pnm_token(in);
    int maxval = pnm_token(in);
    if (w <= 0 || h <= 0 || maxval != 255) throw io_error("unsupported PNM header in " + path);
    in.get(); // single whitespace byte before raster
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * chans);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw io_error("truncated PNM raster in " + path);
    ChannelField out(h, w, chans);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < chans; ++c)
                out.at(c, y, x) = raw[(static_cast<std::size_t>(y) * w + x) * chans + c] / 255.0;
    return out;
}

void save_pnm(const std::string& path, const ChannelField& img) {
    int chans = img.channels();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write image: " + path);
    out << (chans == 1 ? "P5" : "P6") << "\n"
        << img.width() << " " << img.height() << "\n255\n";
    std::vector<unsigned char> raw(static_cast<std::size_t>(img.width()) * img.height() * chans);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < chans; ++c) {
                double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
                raw[(static_cast<std::size_t>(y) * img.width() + x) * chans + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0));
            }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw io_error("short write: " + path);
}

} // namespace

ChannelField load_image(const std::string& path) {
    if (has_suffix(path, ".png")) return load_png(path);
    if (has_suffix(path, ".pgm") || has_suffix(path, ".ppm")) return load_pnm(path);
    throw io_error("unrecognised image extension: " + path);
}

void save_image(const std::string& path, const ChannelField& img) {
    if (img.channels() != 1 && img.channels() != 3)
        throw io_error("save_image expects 1 or 3 channels");
    if (has_suffix(path, ".png")) {
        save_png(path, img);
    } else if (has_suffix(path, ".pgm")) {
        if (img.channels() != 1) throw io_error("PGM holds a single channel: " + path);
        save_pnm(path, img);
    } else if (has_suffix(path, ".ppm")) {
        if (img.channels() != 3) throw io_error("PPM holds three channels: " + path);
        save_pnm(path, img);
    } else {
        throw io_error("unrecognised image extension: " + path);
    }
}

LabelMap load_labels(const std::string& path) {
    ChannelField img = load_image(path);
    if (img.channels() != 1) throw io_error("label map must be grayscale: " + path);
    LabelMap out(img.height(), img.width());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            out.set(y, x, static_cast<std::uint8_t>(std::lround(img.at(0, y, x) * 255.0)));
    return out;
}

void save_labels(const std::string& path, const LabelMap& labels) {
    ChannelField img(labels.height(), labels.width(), 1);
    for (int y = 0; y < labels.height(); ++y)
        for (int x = 0; x < labels.width(); ++x)
            img.at(0, y, x) = labels.at(y, x) / 255.0;
    save_image(path, img);
}

ChannelField downsample(const ChannelField& img, int factor) {
    if (factor < 1) throw io_error("downsample factor must be >= 1");
    if (factor == 1) return img;
    int oh = img.height() / factor;
    int ow = img.width() / factor;
    if (oh == 0 || ow == 0) throw io_error("downsample factor exceeds image size");
    ChannelField out(oh, ow, img.channels());
    double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int c = 0; c < img.channels(); ++c)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double s = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        s += img.at(c, y * factor + dy, x * factor + dx);
                out.at(c, y, x) = s * inv;
            }
    return out;
}

LabelMap downsample_labels(const LabelMap& labels, int factor) {
    if (factor < 1) throw io_error("downsample factor must be >= 1");
    if (factor == 1) return labels;
    int oh = labels.height() / factor;
    int ow = labels.width() / factor;
    if (oh == 0 || ow == 0) throw io_error("downsample factor exceeds label map size");
    LabelMap out(oh, ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            int hist[256] = {0};
            for (int dy = 0; dy < factor; ++dy)
                for (int dx = 0; dx < factor; ++dx)
                    ++hist[labels.at(y * factor + dy, x * factor + dx)];
            int best = 0;
            for (int l = 1; l < 256; ++l)
                if (hist[l] > hist[best]) best = l; // ties keep the smaller label
            out.set(y, x, static_cast<std::uint8_t>(best));
        }
    return out;
}

ChannelField to_grayscale(const ChannelField& img) {
    if (img.channels() == 1) return img;
    if (img.channels() != 3) throw io_error("to_grayscale expects 1 or 3 channels");
    ChannelField out(img.height(), img.width(), 1);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            out.at(0, y, x) =
                0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
    return out;
}

ChannelField normalize_channels(const ChannelField& img) {
    ChannelField out = img;
    std::size_t n = img.plane_size();
    if (n == 0) return out;
    for (int c = 0; c < img.channels(); ++c) {
        const double* src = img.plane(c);
        double* dst = out.plane(c);
        auto [lo, hi] = std::minmax_element(src, src + n);
        if (*lo == *hi) { // exactly constant; the mean of n copies rounds, so test first
            std::fill(dst, dst + n, 0.0);
            continue;
        }
        double mean = std::accumulate(src, src + n, 0.0) / static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = src[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        double inv_sd = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
        for (std::size_t i = 0; i < n; ++i) dst[i] = (src[i] - mean) * inv_sd;
    }
    return out;
}

} // namespace stdn
