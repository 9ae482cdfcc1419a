#ifndef STDN_RASTER_HPP
#define STDN_RASTER_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace stdn {

/// Dense multi-channel raster, double precision, planar channel-major layout:
/// data[(c*H + y)*W + x]. Values for 8-bit images are scaled to [0,1].
class ChannelField {
public:
    ChannelField() = default;
    ChannelField(int height, int width, int channels, double fill = 0.0)
        : h_(height), w_(width), c_(channels),
          data_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
                    static_cast<std::size_t>(channels),
                fill) {}

    int height() const { return h_; }
    int width() const { return w_; }
    int channels() const { return c_; }
    std::size_t plane_size() const {
        return static_cast<std::size_t>(h_) * static_cast<std::size_t>(w_);
    }

    double& at(int c, int y, int x) {
        return data_[(static_cast<std::size_t>(c) * h_ + y) * w_ + x];
    }
    double at(int c, int y, int x) const {
        return data_[(static_cast<std::size_t>(c) * h_ + y) * w_ + x];
    }
    double* plane(int c) { return data_.data() + static_cast<std::size_t>(c) * plane_size(); }
    const double* plane(int c) const {
        return data_.data() + static_cast<std::size_t>(c) * plane_size();
    }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const ChannelField& o) const {
        return h_ == o.h_ && w_ == o.w_ && c_ == o.c_;
    }

private:
    int h_ = 0, w_ = 0, c_ = 0;
    std::vector<double> data_;
};

/// Boolean pixel membership for one region.
class RegionMask {
public:
    RegionMask() = default;
    RegionMask(int height, int width, bool fill = false)
        : h_(height), w_(width),
          in_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width),
              fill ? std::uint8_t(1) : std::uint8_t(0)) {}

    static RegionMask full(int height, int width) { return RegionMask(height, width, true); }

    int height() const { return h_; }
    int width() const { return w_; }
    bool inside(int y, int x) const { return in_[static_cast<std::size_t>(y) * w_ + x] != 0; }
    void set(int y, int x, bool v) {
        in_[static_cast<std::size_t>(y) * w_ + x] = v ? 1 : 0;
    }
    long count() const;
    RegionMask complement() const;

    bool operator==(const RegionMask& o) const {
        return h_ == o.h_ && w_ == o.w_ && in_ == o.in_;
    }

private:
    int h_ = 0, w_ = 0;
    std::vector<std::uint8_t> in_;
};

/// Per-pixel region label. Labels are expected to be contiguous 0..n-1.
class LabelMap {
public:
    LabelMap() = default;
    LabelMap(int height, int width, std::uint8_t fill = 0)
        : h_(height), w_(width),
          label_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {}

    int height() const { return h_; }
    int width() const { return w_; }
    std::uint8_t at(int y, int x) const { return label_[static_cast<std::size_t>(y) * w_ + x]; }
    void set(int y, int x, std::uint8_t v) { label_[static_cast<std::size_t>(y) * w_ + x] = v; }
    const std::vector<std::uint8_t>& data() const { return label_; }
    std::vector<std::uint8_t>& data() { return label_; }

    int num_labels() const; // max label + 1 (0 for an empty map)
    RegionMask mask_of(std::uint8_t label) const;
    /// True when every label in 0..num_labels()-1 has at least one pixel.
    bool labels_contiguous() const;

    bool operator==(const LabelMap& o) const {
        return h_ == o.h_ && w_ == o.w_ && label_ == o.label_;
    }

private:
    int h_ = 0, w_ = 0;
    std::vector<std::uint8_t> label_;
};

// 8-bit image I/O. Format chosen by extension: .png, .pgm (P5), .ppm (P6).
// Loading yields 1 or 3 channels in [0,1]; alpha is dropped, palette expanded,
// 16-bit depth reduced. Saving clamps to [0,1] and rounds to 8 bits.
ChannelField load_image(const std::string& path);
void save_image(const std::string& path, const ChannelField& img);

// Label maps ride in 8-bit PGM/PNG grayscale, one gray level per label.
LabelMap load_labels(const std::string& path);
void save_labels(const std::string& path, const LabelMap& labels);

/// Block-mean reduction by an integer factor; trailing rows/cols that do not
/// fill a block are dropped.
ChannelField downsample(const ChannelField& img, int factor);

/// Majority vote per block, ties to the smaller label.
LabelMap downsample_labels(const LabelMap& labels, int factor);

/// ITU-R 601 luma: 0.299 R + 0.587 G + 0.114 B. 1-channel input passes through.
ChannelField to_grayscale(const ChannelField& img);

/// Per-channel affine map to zero mean, unit variance (constant channels map
/// to zero).
ChannelField normalize_channels(const ChannelField& img);

} // namespace stdn

#endif
