#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "evkit/core.hpp"

namespace evkit {

// Temporal voxel grid: B bins of polarity-accumulated event mass, bin-major.
struct VoxelGrid {
    std::uint32_t bins;
    std::uint32_t height;
    std::uint32_t width;
    std::vector<double> v;

    VoxelGrid(std::uint32_t bins_, std::uint32_t height_, std::uint32_t width_,
              std::vector<double> values)
        : bins(bins_), height(height_), width(width_), v(std::move(values)) {
        if (bins < 1) throw config_error("voxel grid needs at least one bin");
        if (v.size() != static_cast<std::size_t>(bins) * height * width)
            throw shape_error("voxel grid buffer does not match its dimensions");
        for (double x : v)
            if (!std::isfinite(x)) throw validation_error("voxel grid holds a non-finite value");
    }

    static VoxelGrid zeros(std::uint32_t bins, std::uint32_t height, std::uint32_t width) {
        return VoxelGrid(bins, height, width,
                         std::vector<double>(static_cast<std::size_t>(bins) * height * width, 0.0));
    }

    double at(std::uint32_t b, std::uint32_t y, std::uint32_t x) const {
        return v[(static_cast<std::size_t>(b) * height + y) * width + x];
    }
    double& at(std::uint32_t b, std::uint32_t y, std::uint32_t x) {
        return v[(static_cast<std::size_t>(b) * height + y) * width + x];
    }

    double sum() const {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
};

// Each event splits its polarity bilinearly between the two nearest bin
// centers of u = (t-t0)/(t1-t0)*(B-1), so the grid total equals the signed
// event count of the window. Events outside [t0, t1) are ignored.
inline VoxelGrid voxelize(const EventStream& stream, Timestamp t0, Timestamp t1,
                          std::uint32_t bins) {
    if (bins < 1) throw config_error("voxelize: bins must be >= 1");
    if (t0 >= t1) throw config_error("voxelize: empty or inverted window [t0, t1)");

    VoxelGrid grid = VoxelGrid::zeros(bins, stream.height(), stream.width());
    const double span = static_cast<double>(t1 - t0);
    const double scale = static_cast<double>(bins - 1);
    double* g = grid.v.data();
    const std::size_t plane = static_cast<std::size_t>(stream.height()) * stream.width();

    for (const Event& e : stream) {
        if (e.t < t0 || e.t >= t1) continue;
        const double u = static_cast<double>(e.t - t0) / span * scale;
        const std::uint32_t k = static_cast<std::uint32_t>(u);
        const double frac = u - static_cast<double>(k);
        const double p = static_cast<double>(e.p);
        const std::size_t cell = static_cast<std::size_t>(e.y) * stream.width() + e.x;
        g[k * plane + cell] += p * (1.0 - frac);
        if (frac > 0.0) g[(k + 1) * plane + cell] += p * frac;
    }
    return grid;
}

// |v| / max|v| over the whole grid; an all-zero grid stays all-zero.
inline VoxelGrid normalize_abs(const VoxelGrid& grid) {
    double m = 0.0;
    for (double x : grid.v) m = std::max(m, std::abs(x));
    VoxelGrid out = grid;
    if (m == 0.0) return out;
    for (double& x : out.v) x = std::abs(x) / m;
    return out;
}

// Discretized, sum-normalized 1-D Gaussian.
inline std::vector<double> gaussian_kernel(double sigma, int radius) {
    if (!(sigma > 0.0)) throw config_error("gaussian kernel: sigma must be positive");
    if (radius < 0) throw config_error("gaussian kernel: radius must be >= 0");
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (static_cast<double>(i) * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& w : k) w /= sum;
    return k;
}

// Separable Gaussian convolution with replicate borders.
inline std::vector<double> gaussian_blur(const std::vector<double>& plane, std::uint32_t height,
                                         std::uint32_t width, double sigma, int radius) {
    if (plane.size() != static_cast<std::size_t>(height) * width)
        throw shape_error("gaussian_blur: plane buffer does not match its dimensions");
    const std::vector<double> k = gaussian_kernel(sigma, radius);
    const int h = static_cast<int>(height), w = static_cast<int>(width);

    std::vector<double> rows(plane.size());
    for (int y = 0; y < h; ++y) {
        const double* src = plane.data() + static_cast<std::size_t>(y) * w;
        double* dst = rows.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[i + radius] * src[std::clamp(x + i, 0, w - 1)];
            dst[x] = acc;
        }
    }
    std::vector<double> out(plane.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[i + radius] * rows[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
            out[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
    return out;
}

// Mask pipeline parameters. The 0.01 threshold follows the motion-region
// definition this library implements; kernel sizes are small by default to
// keep masks tight.
struct RoiMaskConfig {
    double gaussian_sigma = 1.0;
    int gaussian_radius = 2;  // 5x5 kernel
    double threshold = 0.01;
    int dilate_radius = 2;    // 5x5 square structuring element
    int median_radius = 1;    // 3x3 majority filter

    void validate() const {
        if (!(threshold > 0.0)) throw config_error("roi: threshold must be positive");
        if (!(gaussian_sigma > 0.0)) throw config_error("roi: gaussian sigma must be positive");
        if (gaussian_radius < 0 || dilate_radius < 0 || median_radius < 0)
            throw config_error("roi: radii must be >= 0");
    }
};

struct RoiMask {
    std::uint32_t height;
    std::uint32_t width;
    std::vector<std::uint8_t> v;  // 0 or 1

    std::uint8_t at(std::uint32_t y, std::uint32_t x) const {
        return v[static_cast<std::size_t>(y) * width + x];
    }
    std::size_t count() const {
        std::size_t n = 0;
        for (std::uint8_t b : v) n += b;
        return n;
    }

    friend bool operator==(const RoiMask&, const RoiMask&) = default;
};

namespace detail {

// Square dilation is separable: a horizontal max run followed by a vertical
// one. Replicate borders reduce to index clamping under max.
inline void dilate_square(std::vector<std::uint8_t>& m, int h, int w, int radius) {
    if (radius == 0) return;
    std::vector<std::uint8_t> tmp(m.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::uint8_t acc = 0;
            for (int i = -radius; i <= radius && !acc; ++i)
                acc = m[static_cast<std::size_t>(y) * w + std::clamp(x + i, 0, w - 1)];
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::uint8_t acc = 0;
            for (int i = -radius; i <= radius && !acc; ++i)
                acc = tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
            m[static_cast<std::size_t>(y) * w + x] = acc;
        }
}

// Binary majority over the (2r+1)^2 window with replicated samples, via two
// separable counting passes.
inline void median_binary(std::vector<std::uint8_t>& m, int h, int w, int radius) {
    if (radius == 0) return;
    std::vector<std::uint32_t> rowcount(m.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::uint32_t acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += m[static_cast<std::size_t>(y) * w + std::clamp(x + i, 0, w - 1)];
            rowcount[static_cast<std::size_t>(y) * w + x] = acc;
        }
    const std::uint32_t window = static_cast<std::uint32_t>(2 * radius + 1) *
                                 static_cast<std::uint32_t>(2 * radius + 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::uint32_t acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += rowcount[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
            m[static_cast<std::size_t>(y) * w + x] = (2 * acc > window) ? 1 : 0;
        }
}

}  // namespace detail

// Per temporal channel: normalize by the channel's max magnitude, smooth,
// threshold, dilate, majority-filter; the final mask ORs all channels so no
// channel's motion is dropped.
inline RoiMask roi_mask(const VoxelGrid& grid, const RoiMaskConfig& cfg) {
    cfg.validate();
    const int h = static_cast<int>(grid.height), w = static_cast<int>(grid.width);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    RoiMask mask{grid.height, grid.width, std::vector<std::uint8_t>(plane, 0)};

    std::vector<double> channel(plane);
    for (std::uint32_t b = 0; b < grid.bins; ++b) {
        const double* src = grid.v.data() + b * plane;
        double m = 0.0;
        for (std::size_t i = 0; i < plane; ++i) m = std::max(m, std::abs(src[i]));
        if (m == 0.0) continue;
        for (std::size_t i = 0; i < plane; ++i) channel[i] = std::abs(src[i]) / m;

        const std::vector<double> smooth =
            gaussian_blur(channel, grid.height, grid.width, cfg.gaussian_sigma, cfg.gaussian_radius);
        std::vector<std::uint8_t> bin(plane);
        for (std::size_t i = 0; i < plane; ++i) bin[i] = smooth[i] > cfg.threshold ? 1 : 0;

        detail::dilate_square(bin, h, w, cfg.dilate_radius);
        detail::median_binary(bin, h, w, cfg.median_radius);
        for (std::size_t i = 0; i < plane; ++i) mask.v[i] |= bin[i];
    }
    return mask;
}

}  // namespace evkit
