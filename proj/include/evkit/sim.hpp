#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "evkit/core.hpp"

namespace evkit {

// Threshold-crossing event synthesis from a frame sequence. Per pixel, the
// log intensity is tracked against a reference level; every crossing of the
// contrast threshold emits one event, with the timestamp linearly
// interpolated between the two frames. The reference level carries across
// frame pairs, so the quantization residual never exceeds the threshold:
// integrating all events recovers every key-frame log intensity within c.
//
// No noise, leak, or bandwidth modeling; `seed` is reserved for such
// extensions and does not affect the current output.
struct SimConfig {
    double contrast = 0.15;       // log-intensity step per event
    double eps = 1e-3;            // added before log so black pixels stay finite
    std::uint64_t refractory_us = 0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(contrast > 0.0) || !std::isfinite(contrast))
            throw config_error("sim: contrast must be positive");
        if (!(eps > 0.0) || !std::isfinite(eps)) throw config_error("sim: eps must be positive");
    }
};

inline EventStream simulate_events(const FrameSequence& seq, const SimConfig& cfg) {
    cfg.validate();
    if (seq.width() > 0xffff || seq.height() > 0xffff)
        throw shape_error("sim: resolution exceeds the 16-bit event coordinate range");

    const std::uint32_t w = seq.width();
    const std::uint32_t h = seq.height();
    const std::size_t npx = static_cast<std::size_t>(w) * h;
    const double c = cfg.contrast;

    auto log_plane = [&](const Frame& f) {
        const Frame g = f.to_gray();
        std::vector<double> lp(npx);
        for (std::size_t i = 0; i < npx; ++i) lp[i] = std::log(g.pixels()[i] + cfg.eps);
        return lp;
    };

    std::vector<double> prev = log_plane(seq.frame(0));
    std::vector<double> ref = prev;  // per-pixel reference log level
    std::vector<Timestamp> last_emit(cfg.refractory_us > 0 ? npx : 0, 0);

    std::vector<Event> events;
    for (std::size_t fi = 0; fi + 1 < seq.size(); ++fi) {
        const std::vector<double> next = log_plane(seq.frame(fi + 1));
        const Timestamp t0 = seq.timestamp(fi);
        const Timestamp t1 = seq.timestamp(fi + 1);
        const Timestamp dt = t1 - t0;
        // Crossings land strictly inside (t0, t1) so that half-open instance
        // windows and inclusive integration up to a key frame agree exactly.
        const Timestamp off_lo = std::min<Timestamp>(1, dt - 1);
        const Timestamp off_hi = dt - 1;

        for (std::uint32_t y = 0; y < h; ++y) {
            for (std::uint32_t x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                const double delta = next[i] - ref[i];
                const std::uint64_t n = static_cast<std::uint64_t>(std::floor(std::abs(delta) / c));
                if (n == 0) continue;
                const double sign = delta > 0 ? 1.0 : -1.0;
                const std::int8_t pol = delta > 0 ? 1 : -1;
                const double span = next[i] - prev[i];
                for (std::uint64_t j = 1; j <= n; ++j) {
                    const double level = ref[i] + sign * (static_cast<double>(j) * c);
                    double u = (level - prev[i]) / span;
                    u = std::clamp(u, 0.0, 1.0);
                    const Timestamp off = std::clamp(
                        static_cast<Timestamp>(std::floor(u * static_cast<double>(dt))),
                        off_lo, off_hi);
                    const Timestamp t = t0 + off;
                    if (cfg.refractory_us > 0) {
                        // Suppressed events are lost; the reference still advances.
                        if (last_emit[i] != 0 && t < last_emit[i] + cfg.refractory_us) continue;
                        last_emit[i] = t;
                    }
                    events.push_back(Event{t, static_cast<std::uint16_t>(x),
                                           static_cast<std::uint16_t>(y), pol});
                }
                ref[i] += sign * (static_cast<double>(n) * c);
            }
        }
        prev = next;
    }
    return EventStream::collect(static_cast<std::uint16_t>(w), static_cast<std::uint16_t>(h),
                                std::move(events));
}

// One interpolation task: two key frames, the withheld ground-truth frames
// between them, and the event slice covering the half-open key interval.
struct InterpInstance {
    Frame frame_a;
    Frame frame_b;
    std::vector<Frame> intermediates;
    std::vector<Timestamp> times;  // timestamps of the intermediates
    EventStream events;            // all within [t_a, t_b)
    std::uint32_t skip;
    Timestamp t_a;
    Timestamp t_b;

    InterpInstance(Frame a, Frame b, std::vector<Frame> mids, std::vector<Timestamp> mid_times,
                   EventStream evs, std::uint32_t skip_count, Timestamp ta, Timestamp tb)
        : frame_a(std::move(a)),
          frame_b(std::move(b)),
          intermediates(std::move(mids)),
          times(std::move(mid_times)),
          events(std::move(evs)),
          skip(skip_count),
          t_a(ta),
          t_b(tb) {
        if (skip < 1) throw config_error("instance: skip must be >= 1");
        if (intermediates.size() != skip || times.size() != skip)
            throw validation_error("instance: expected exactly `skip` intermediates");
        if (!(t_a < t_b)) throw validation_error("instance: key timestamps must increase");
        Timestamp last = t_a;
        for (Timestamp t : times) {
            if (t <= last || t >= t_b)
                throw validation_error("instance: intermediate timestamps must lie inside (t_a, t_b)");
            last = t;
        }
        if (!events.empty() &&
            (events.events().front().t < t_a || events.events().back().t >= t_b))
            throw validation_error("instance: events outside [t_a, t_b)");
        if (!frame_a.same_shape(frame_b)) throw shape_error("instance: key frame shapes differ");
        for (const Frame& f : intermediates)
            if (!f.same_shape(frame_a)) throw shape_error("instance: intermediate shape differs");
    }
};

// Key frames at indices i and i+skip+1; consecutive instances advance by
// skip+1 so ground-truth intermediates are never reused.
inline std::vector<InterpInstance> build_instances(const FrameSequence& seq,
                                                   const EventStream& events,
                                                   std::uint32_t skip) {
    if (skip < 1) throw config_error("build_instances: skip must be >= 1");
    if (seq.size() < static_cast<std::size_t>(skip) + 2)
        throw validation_error("build_instances: need at least skip+2 frames, have " +
                               std::to_string(seq.size()));

    std::vector<InterpInstance> out;
    for (std::size_t i = 0; i + skip + 1 < seq.size(); i += skip + 1) {
        const std::size_t j = i + skip + 1;
        std::vector<Frame> mids;
        std::vector<Timestamp> mid_times;
        for (std::size_t k = i + 1; k < j; ++k) {
            mids.push_back(seq.frame(k));
            mid_times.push_back(seq.timestamp(k));
        }
        out.emplace_back(seq.frame(i), seq.frame(j), std::move(mids), std::move(mid_times),
                         slice_window(events, seq.timestamp(i), seq.timestamp(j)), skip,
                         seq.timestamp(i), seq.timestamp(j));
    }
    return out;
}

}  // namespace evkit
