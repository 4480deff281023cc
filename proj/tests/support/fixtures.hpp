#pragma once

// Shared scene builders and generators for the test suites.

#include <cmath>
#include <cstdint>
#include <vector>

#include "evkit/core.hpp"
#include "evkit/rng.hpp"

namespace fixtures {

// Bright square on a dark background, translating right by `step_px` per
// frame interval. Large-motion stress scene.
inline evkit::FrameSequence translating_square(std::uint32_t size, std::size_t frames,
                                               std::uint32_t square, std::uint32_t step_px,
                                               double bg = 0.1, double fg = 0.9,
                                               evkit::Timestamp frame_dt = 10000) {
    std::vector<evkit::Frame> out;
    std::vector<evkit::Timestamp> times;
    for (std::size_t f = 0; f < frames; ++f) {
        std::vector<double> px(static_cast<std::size_t>(size) * size, bg);
        const std::uint32_t x0 = static_cast<std::uint32_t>(f) * step_px;
        const std::uint32_t y0 = size / 2 - square / 2;
        for (std::uint32_t y = y0; y < y0 + square && y < size; ++y)
            for (std::uint32_t x = x0; x < x0 + square && x < size; ++x)
                px[static_cast<std::size_t>(y) * size + x] = fg;
        out.emplace_back(size, size, 1, std::move(px));
        times.push_back(static_cast<evkit::Timestamp>(f) * frame_dt);
    }
    return evkit::FrameSequence(std::move(out), std::move(times));
}

// Wrapping diagonal intensity ramp drifting over time; every pixel changes
// every interval, exercising the full intensity range.
inline evkit::FrameSequence translating_gradient(std::uint32_t size, std::size_t frames,
                                                 double speed_px = 2.0,
                                                 evkit::Timestamp frame_dt = 10000) {
    std::vector<evkit::Frame> out;
    std::vector<evkit::Timestamp> times;
    for (std::size_t f = 0; f < frames; ++f) {
        std::vector<double> px(static_cast<std::size_t>(size) * size);
        for (std::uint32_t y = 0; y < size; ++y)
            for (std::uint32_t x = 0; x < size; ++x) {
                const double phase =
                    std::fmod(static_cast<double>(x) + static_cast<double>(y) +
                                  speed_px * static_cast<double>(f),
                              static_cast<double>(size)) /
                    static_cast<double>(size);
                px[static_cast<std::size_t>(y) * size + x] = 0.05 + 0.9 * phase;
            }
        out.emplace_back(size, size, 1, std::move(px));
        times.push_back(static_cast<evkit::Timestamp>(f) * frame_dt);
    }
    return evkit::FrameSequence(std::move(out), std::move(times));
}

inline evkit::EventStream random_stream(evkit::Rng& rng, std::uint16_t width,
                                        std::uint16_t height, std::size_t count,
                                        evkit::Timestamp t_max = 1000000) {
    std::vector<evkit::Event> events(count);
    for (evkit::Event& e : events) {
        e.t = rng.next_u64() % t_max;
        e.x = static_cast<std::uint16_t>(rng.next_u64() % width);
        e.y = static_cast<std::uint16_t>(rng.next_u64() % height);
        e.p = (rng.next_u64() & 1) ? 1 : -1;
    }
    return evkit::EventStream::collect(width, height, std::move(events));
}

// Frames whose intensities sit exactly on the 8-bit grid, so PNM round trips
// are bit-for-bit.
inline evkit::Frame random_frame(evkit::Rng& rng, std::uint32_t width, std::uint32_t height,
                                 std::uint32_t channels) {
    std::vector<double> px(static_cast<std::size_t>(width) * height * channels);
    for (double& v : px) v = static_cast<double>(rng.next_u64() % 256) / 255.0;
    return evkit::Frame(width, height, channels, std::move(px));
}

inline evkit::FeatureMap random_feature_map(evkit::Rng& rng, std::uint32_t channels,
                                            std::uint32_t height, std::uint32_t width,
                                            double scale = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(channels) * height * width);
    for (double& x : v) x = scale * (2.0 * rng.uniform() - 1.0);
    return evkit::FeatureMap(channels, height, width, std::move(v));
}

}  // namespace fixtures
