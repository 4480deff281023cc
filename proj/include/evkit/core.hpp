#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace evkit {

// ---------------------------------------------------------------------------
// Error taxonomy. Three families, matching the CLI exit codes:
//   config_error     -> 2   bad parameters, invalid ranges, unknown keys
//   io_error family  -> 3   filesystem trouble, bad magic, truncation, syntax
//   validation_error -> 4   domain invariants violated by otherwise-readable data
// ---------------------------------------------------------------------------

class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class config_error : public error {
public:
    using error::error;
};

class io_error : public error {
public:
    using error::error;
};

// Magic/layout mismatch: the file is not what it claims to be.
class format_error : public io_error {
public:
    using io_error::io_error;
};

// File is the right format but the payload is short or inconsistent.
class corruption_error : public io_error {
public:
    using io_error::io_error;
};

// Text syntax problem; carries the 1-based line number.
class parse_error : public io_error {
public:
    parse_error(const std::string& msg, std::size_t line)
        : io_error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class validation_error : public error {
public:
    using error::error;
};

class shape_error : public validation_error {
public:
    using validation_error::validation_error;
};

// ---------------------------------------------------------------------------
// Domain value types
// ---------------------------------------------------------------------------

// Integer microseconds. Event-camera recordings run long enough that float
// time drifts; integers do not.
using Timestamp = std::uint64_t;

// One polarity spike. p is a signed value, not a bool, so accumulation
// kernels can sum it directly.
struct Event {
    Timestamp t = 0;
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::int8_t p = 1;  // +1 or -1

    friend bool operator==(const Event&, const Event&) = default;
};

// Canonical ordering: time, then (y, x, polarity) to make ties deterministic.
inline bool event_order(const Event& a, const Event& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.p < b.p;
}

struct ValidationReport {
    std::size_t out_of_order = 0;
    std::size_t out_of_bounds = 0;
    std::size_t bad_polarity = 0;

    std::size_t total() const { return out_of_order + out_of_bounds + bad_polarity; }
    bool ok() const { return total() == 0; }
};

// Reporting pass over raw event data; never throws.
inline ValidationReport validate_events(std::uint16_t width, std::uint16_t height,
                                        std::span<const Event> events) {
    ValidationReport r;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const Event& e = events[i];
        if (i > 0 && e.t < events[i - 1].t) ++r.out_of_order;
        if (e.x >= width || e.y >= height) ++r.out_of_bounds;
        if (e.p != 1 && e.p != -1) ++r.bad_polarity;
    }
    return r;
}

// Sensor-resolution-bound stream of events, sorted non-decreasing by t.
// Immutable after construction; the constructor enforces the invariants.
class EventStream {
public:
    EventStream(std::uint16_t width, std::uint16_t height, std::vector<Event> events)
        : width_(width), height_(height), events_(std::move(events)) {
        if (width_ == 0 || height_ == 0)
            throw validation_error("event stream resolution must be nonzero");
        ValidationReport r = validate_events(width_, height_, events_);
        if (!r.ok())
            throw validation_error("invalid event stream: " + std::to_string(r.out_of_order) +
                                   " out-of-order, " + std::to_string(r.out_of_bounds) +
                                   " out-of-bounds, " + std::to_string(r.bad_polarity) +
                                   " bad-polarity events");
    }

    // Sorts into canonical order first; for producers that emit unsorted events.
    static EventStream collect(std::uint16_t width, std::uint16_t height,
                               std::vector<Event> events) {
        std::stable_sort(events.begin(), events.end(), event_order);
        return EventStream(width, height, std::move(events));
    }

    std::uint16_t width() const { return width_; }
    std::uint16_t height() const { return height_; }
    const std::vector<Event>& events() const { return events_; }
    std::size_t size() const { return events_.size(); }
    bool empty() const { return events_.empty(); }

    auto begin() const { return events_.begin(); }
    auto end() const { return events_.end(); }

    friend bool operator==(const EventStream& a, const EventStream& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.events_ == b.events_;
    }

private:
    std::uint16_t width_;
    std::uint16_t height_;
    std::vector<Event> events_;
};

inline ValidationReport validate_stream(const EventStream& s) {
    return validate_events(s.width(), s.height(), s.events());
}

// Events with t0 <= t < t1, order preserved. Half-open so adjacent windows
// partition a stream without double counting.
inline EventStream slice_window(const EventStream& s, Timestamp t0, Timestamp t1) {
    if (t0 >= t1) throw config_error("slice_window: empty or inverted window [t0, t1)");
    auto lo = std::lower_bound(s.begin(), s.end(), t0,
                               [](const Event& e, Timestamp t) { return e.t < t; });
    auto hi = std::lower_bound(lo, s.end(), t1,
                               [](const Event& e, Timestamp t) { return e.t < t; });
    return EventStream(s.width(), s.height(), std::vector<Event>(lo, hi));
}

// Intensity image, values in [0,1], channel-interleaved rows.
class Frame {
public:
    Frame(std::uint32_t width, std::uint32_t height, std::uint32_t channels,
          std::vector<double> pixels)
        : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
        if (channels_ != 1 && channels_ != 3)
            throw validation_error("frame must have 1 or 3 channels");
        if (width_ == 0 || height_ == 0) throw validation_error("frame resolution must be nonzero");
        if (pixels_.size() != static_cast<std::size_t>(width_) * height_ * channels_)
            throw shape_error("frame pixel buffer does not match its dimensions");
        for (double v : pixels_)
            if (!(v >= 0.0 && v <= 1.0) || !std::isfinite(v))
                throw validation_error("frame pixel outside [0,1]");
    }

    static Frame filled(std::uint32_t width, std::uint32_t height, std::uint32_t channels,
                        double value) {
        return Frame(width, height, channels,
                     std::vector<double>(static_cast<std::size_t>(width) * height * channels,
                                         value));
    }

    std::uint32_t width() const { return width_; }
    std::uint32_t height() const { return height_; }
    std::uint32_t channels() const { return channels_; }
    const std::vector<double>& pixels() const { return pixels_; }

    double at(std::uint32_t x, std::uint32_t y, std::uint32_t c = 0) const {
        return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    bool same_shape(const Frame& o) const {
        return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
    }

    // Rec.601 luminance; identity for grayscale input.
    Frame to_gray() const {
        if (channels_ == 1) return *this;
        std::vector<double> g(static_cast<std::size_t>(width_) * height_);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double* px = &pixels_[i * 3];
            g[i] = std::clamp(0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2], 0.0, 1.0);
        }
        return Frame(width_, height_, 1, std::move(g));
    }

    friend bool operator==(const Frame& a, const Frame& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.channels_ == b.channels_ &&
               a.pixels_ == b.pixels_;
    }

private:
    std::uint32_t width_;
    std::uint32_t height_;
    std::uint32_t channels_;
    std::vector<double> pixels_;
};

// Uniform-resolution frames with strictly increasing microsecond timestamps.
class FrameSequence {
public:
    FrameSequence(std::vector<Frame> frames, std::vector<Timestamp> timestamps)
        : frames_(std::move(frames)), timestamps_(std::move(timestamps)) {
        if (frames_.size() != timestamps_.size())
            throw validation_error("frame/timestamp counts differ");
        if (frames_.size() < 2) throw validation_error("a frame sequence needs at least 2 frames");
        for (std::size_t i = 1; i < timestamps_.size(); ++i)
            if (timestamps_[i] <= timestamps_[i - 1])
                throw validation_error("timestamps must be strictly increasing");
        for (std::size_t i = 1; i < frames_.size(); ++i)
            if (!frames_[i].same_shape(frames_[0]))
                throw shape_error("all frames in a sequence must share one shape");
    }

    const std::vector<Frame>& frames() const { return frames_; }
    const std::vector<Timestamp>& timestamps() const { return timestamps_; }
    std::size_t size() const { return frames_.size(); }
    const Frame& frame(std::size_t i) const { return frames_[i]; }
    Timestamp timestamp(std::size_t i) const { return timestamps_[i]; }
    std::uint32_t width() const { return frames_[0].width(); }
    std::uint32_t height() const { return frames_[0].height(); }
    std::uint32_t channels() const { return frames_[0].channels(); }

private:
    std::vector<Frame> frames_;
    std::vector<Timestamp> timestamps_;
};

// Planar (channel-major) feature tensor with finite values.
class FeatureMap {
public:
    FeatureMap(std::uint32_t channels, std::uint32_t height, std::uint32_t width,
               std::vector<double> values)
        : channels_(channels), height_(height), width_(width), v_(std::move(values)) {
        if (channels_ == 0 || height_ == 0 || width_ == 0)
            throw validation_error("feature map dimensions must be nonzero");
        if (v_.size() != static_cast<std::size_t>(channels_) * height_ * width_)
            throw shape_error("feature map buffer does not match its dimensions");
        for (double x : v_)
            if (!std::isfinite(x)) throw validation_error("feature map holds a non-finite value");
    }

    static FeatureMap zeros(std::uint32_t channels, std::uint32_t height, std::uint32_t width) {
        return FeatureMap(channels, height, width,
                          std::vector<double>(static_cast<std::size_t>(channels) * height * width,
                                              0.0));
    }

    static FeatureMap from_frame(const Frame& f) {
        std::vector<double> planar(static_cast<std::size_t>(f.channels()) * f.height() * f.width());
        for (std::uint32_t c = 0; c < f.channels(); ++c)
            for (std::uint32_t y = 0; y < f.height(); ++y)
                for (std::uint32_t x = 0; x < f.width(); ++x)
                    planar[(static_cast<std::size_t>(c) * f.height() + y) * f.width() + x] =
                        f.at(x, y, c);
        return FeatureMap(f.channels(), f.height(), f.width(), std::move(planar));
    }

    std::uint32_t channels() const { return channels_; }
    std::uint32_t height() const { return height_; }
    std::uint32_t width() const { return width_; }
    std::size_t size() const { return v_.size(); }
    const std::vector<double>& values() const { return v_; }
    std::vector<double>& values() { return v_; }

    double at(std::uint32_t c, std::uint32_t y, std::uint32_t x) const {
        return v_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
    }

    bool same_shape(const FeatureMap& o) const {
        return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
    }

    friend bool operator==(const FeatureMap& a, const FeatureMap& b) {
        return a.same_shape(b) && a.v_ == b.v_;
    }

private:
    std::uint32_t channels_;
    std::uint32_t height_;
    std::uint32_t width_;
    std::vector<double> v_;
};

inline void require_same_shape(const FeatureMap& a, const FeatureMap& b, const char* what) {
    if (!a.same_shape(b)) throw shape_error(std::string(what) + ": feature map shapes differ");
}

}  // namespace evkit
