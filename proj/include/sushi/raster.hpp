#pragma once

#include "error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace sushi {

/// Row-major pixel grid with 1 or 3 channels; intensities live in [0,1].
class Raster {
public:
    Raster() = default;

    Raster(int width, int height, int channels, double fill = 0.0)
        : width_(width), height_(height), channels_(channels) {
        if (width < 0 || height < 0)
            throw InvalidArgument("raster dimensions must be non-negative");
        if (channels != 1 && channels != 3)
            throw InvalidArgument("raster must have 1 or 3 channels");
        data_.assign(std::size_t(width) * std::size_t(height) * std::size_t(channels),
                     std::clamp(fill, 0.0, 1.0));
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    bool empty() const { return data_.empty(); }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    double& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
    double at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

    /// Clamp-to-edge read.
    double at_clamped(int x, int y, int c = 0) const {
        return at(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1), c);
    }

    /// Bilinear sample at real coordinates where pixel (i, j) sits at (i, j).
    /// Samples whose 2x2 support leaves the image read `outside` for the
    /// missing taps, so a fully external sample returns `outside`.
    double sample(double x, double y, int c, double outside) const {
        const double fx = std::floor(x);
        const double fy = std::floor(y);
        const int x0 = int(fx);
        const int y0 = int(fy);
        const double tx = x - fx;
        const double ty = y - fy;
        auto tap = [&](int xi, int yi) { return contains(xi, yi) ? at(xi, yi, c) : outside; };
        const double top = (1.0 - tx) * tap(x0, y0) + tx * tap(x0 + 1, y0);
        const double bottom = (1.0 - tx) * tap(x0, y0 + 1) + tx * tap(x0 + 1, y0 + 1);
        return (1.0 - ty) * top + ty * bottom;
    }

    /// Bilinear sample with clamp-to-edge borders.
    double sample_clamped(double x, double y, int c) const {
        x = std::clamp(x, 0.0, double(width_ - 1));
        y = std::clamp(y, 0.0, double(height_ - 1));
        const int x0 = std::min(int(x), width_ - 1);
        const int y0 = std::min(int(y), height_ - 1);
        const int x1 = std::min(x0 + 1, width_ - 1);
        const int y1 = std::min(y0 + 1, height_ - 1);
        const double tx = x - x0;
        const double ty = y - y0;
        const double top = (1.0 - tx) * at(x0, y0, c) + tx * at(x1, y0, c);
        const double bottom = (1.0 - tx) * at(x0, y1, c) + tx * at(x1, y1, c);
        return (1.0 - ty) * top + ty * bottom;
    }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    /// True when every stored value lies in [0,1] and the buffer length matches.
    bool valid() const {
        if (data_.size() != std::size_t(width_) * std::size_t(height_) * std::size_t(channels_))
            return false;
        return std::all_of(data_.begin(), data_.end(),
                           [](double v) { return v >= 0.0 && v <= 1.0; });
    }

    void clamp_unit() {
        for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
    }

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    std::size_t index(int x, int y, int c) const {
        return (std::size_t(y) * std::size_t(width_) + std::size_t(x)) * std::size_t(channels_) +
               std::size_t(c);
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 1;
    std::vector<double> data_;
};

/// Rec.601 luma: 0.299 R + 0.587 G + 0.114 B.
inline Raster to_grayscale(const Raster& img) {
    if (img.channels() == 1) throw AlreadyGrayscale();
    if (img.channels() != 3) throw InvalidArgument("to_grayscale expects 3 channels");
    Raster out(img.width(), img.height(), 1);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            out.at(x, y) = std::clamp(
                0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2), 0.0,
                1.0);
    return out;
}

/// Scale factor that resize_max_side applies (1 when no resizing happens).
inline double resize_factor(int width, int height, int limit) {
    const int side = std::max(width, height);
    return side <= limit ? 1.0 : double(limit) / double(side);
}

/// Bilinear downscale so that the longer side is at most `limit` pixels.
inline Raster resize_max_side(const Raster& img, int limit = 800) {
    if (limit < 1) throw InvalidArgument("resize limit must be >= 1");
    const int side = std::max(img.width(), img.height());
    if (side <= limit) return img;
    const double f = double(limit) / double(side);
    const int w = std::max(1, int(std::lround(img.width() * f)));
    const int h = std::max(1, int(std::lround(img.height() * f)));
    const double sx = double(img.width()) / w;
    const double sy = double(img.height()) / h;
    Raster out(w, h, img.channels());
    for (int y = 0; y < h; ++y) {
        const double src_y = (y + 0.5) * sy - 0.5;
        for (int x = 0; x < w; ++x) {
            const double src_x = (x + 0.5) * sx - 0.5;
            for (int c = 0; c < img.channels(); ++c)
                out.at(x, y, c) = img.sample_clamped(src_x, src_y, c);
        }
    }
    return out;
}

/// 256-bin histogram equalization; each value maps to the normalized CDF of its bin.
inline Raster equalize_histogram(const Raster& img) {
    if (img.channels() != 1) throw InvalidArgument("equalize_histogram expects 1 channel");
    Raster out(img.width(), img.height(), 1);
    if (img.empty()) return out;
    auto bin_of = [](double v) {
        return std::clamp(int(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)), 0, 255);
    };
    std::array<std::size_t, 256> hist{};
    for (double v : img.data()) ++hist[std::size_t(bin_of(v))];
    std::array<double, 256> cdf{};
    std::size_t running = 0;
    const double total = double(img.data().size());
    for (std::size_t b = 0; b < 256; ++b) {
        running += hist[b];
        cdf[b] = double(running) / total;
    }
    auto src = img.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = cdf[std::size_t(bin_of(src[i]))];
    return out;
}

/// Normalized, truncated Gaussian kernel with radius ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");
    const int radius = int(std::ceil(3.0 * sigma));
    std::vector<double> k(std::size_t(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[std::size_t(i + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

/// Separable Gaussian smoothing with clamp-to-edge borders.
inline Raster gaussian_blur(const Raster& img, double sigma) {
    if (img.channels() != 1) throw InvalidArgument("gaussian_blur expects 1 channel");
    const auto k = gaussian_kernel(sigma);
    const int r = int(k.size() / 2);
    const int w = img.width();
    const int h = img.height();
    Raster tmp(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i) s += k[std::size_t(i + r)] * img.at_clamped(x + i, y);
            tmp.at(x, y) = s;
        }
    Raster out(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i) s += k[std::size_t(i + r)] * tmp.at_clamped(x, y + i);
            out.at(x, y) = std::clamp(s, 0.0, 1.0);
        }
    return out;
}

} // namespace sushi
