#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "evkit/cond.hpp"
#include "evkit/core.hpp"
#include "evkit/sim.hpp"

namespace evkit {

enum class BlendMode { forward, backward, bidirectional };
enum class Direction { forward, backward };

// Exponential-domain integration matching simulate_events exactly, so the
// quantization bound (log error <= contrast) is provable rather than
// approximate.
struct InterpConfig {
    double contrast = 0.15;
    double eps = 1e-3;
    BlendMode blend = BlendMode::bidirectional;

    void validate() const {
        if (!(contrast > 0.0) || !std::isfinite(contrast))
            throw config_error("interp: contrast must be positive");
        if (!(eps > 0.0) || !std::isfinite(eps)) throw config_error("interp: eps must be positive");
    }
};

// Forward: apply every event with t <= t_target to `frame`'s log intensity.
// Backward: remove every event with t > t_target from the (later) frame.
// Multi-channel frames get the same per-pixel log step on every channel.
inline Frame integrate_events(const Frame& frame, const EventStream& stream, Timestamp t_target,
                              const InterpConfig& cfg, Direction direction) {
    cfg.validate();
    if (frame.width() != stream.width() || frame.height() != stream.height())
        throw shape_error("integrate_events: frame/stream resolutions differ");

    const std::size_t npx = static_cast<std::size_t>(frame.width()) * frame.height();
    std::vector<double> steps(npx, 0.0);
    for (const Event& e : stream) {
        const bool counted = direction == Direction::forward ? e.t <= t_target : e.t > t_target;
        if (!counted) continue;
        const double step = cfg.contrast * static_cast<double>(e.p);
        steps[static_cast<std::size_t>(e.y) * frame.width() + e.x] +=
            direction == Direction::forward ? step : -step;
    }

    std::vector<double> out(frame.pixels().size());
    const std::uint32_t ch = frame.channels();
    for (std::size_t i = 0; i < npx; ++i) {
        for (std::uint32_t c = 0; c < ch; ++c) {
            const double v = frame.pixels()[i * ch + c];
            out[i * ch + c] =
                std::clamp(std::exp(std::log(v + cfg.eps) + steps[i]) - cfg.eps, 0.0, 1.0);
        }
    }
    return Frame(frame.width(), frame.height(), ch, std::move(out));
}

// Estimate at sequence step k in [0, skip+1]; the boundary steps return the
// key frames verbatim. Bidirectional mode blends the forward and backward
// integrations with the corrected weight schedule.
inline Frame interpolate_at(const InterpInstance& inst, std::uint32_t k, const InterpConfig& cfg) {
    cfg.validate();
    const std::uint32_t T = inst.skip + 1;
    if (k > T) throw config_error("interpolate_at: step index out of range");
    if (k == 0) return inst.frame_a;
    if (k == T) return inst.frame_b;

    const Timestamp target = inst.times[k - 1];
    switch (cfg.blend) {
        case BlendMode::forward:
            return integrate_events(inst.frame_a, inst.events, target, cfg, Direction::forward);
        case BlendMode::backward:
            return integrate_events(inst.frame_b, inst.events, target, cfg, Direction::backward);
        case BlendMode::bidirectional: {
            const Frame fwd =
                integrate_events(inst.frame_a, inst.events, target, cfg, Direction::forward);
            const Frame bwd =
                integrate_events(inst.frame_b, inst.events, target, cfg, Direction::backward);
            const WeightSchedule sched(T, WeightOrientation::corrected);
            const double wp = sched.w_prev(k);
            const double wn = sched.w_next(k);
            std::vector<double> out(fwd.pixels().size());
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] = std::clamp(wp * fwd.pixels()[i] + wn * bwd.pixels()[i], 0.0, 1.0);
            return Frame(fwd.width(), fwd.height(), fwd.channels(), std::move(out));
        }
    }
    throw config_error("interpolate_at: unknown blend mode");
}

// The `skip` withheld frames of an instance.
inline std::vector<Frame> interpolate(const InterpInstance& inst, const InterpConfig& cfg) {
    std::vector<Frame> out;
    out.reserve(inst.skip);
    for (std::uint32_t k = 1; k <= inst.skip; ++k) out.push_back(interpolate_at(inst, k, cfg));
    return out;
}

// Coarse condition generator: identity features of the key frames at the
// boundary steps, event-integrated estimates in between. Usable directly as
// conditions or as targets for the condition objective.
inline std::vector<FeatureMap> coarse_conditions(const InterpInstance& inst,
                                                 const InterpConfig& cfg) {
    std::vector<FeatureMap> out;
    const std::uint32_t T = inst.skip + 1;
    out.reserve(T + 1);
    for (std::uint32_t k = 0; k <= T; ++k)
        out.push_back(FeatureMap::from_frame(interpolate_at(inst, k, cfg)));
    return out;
}

// ---------------------------------------------------------------------------
// Reference metrics
// ---------------------------------------------------------------------------

// 10*log10(1/MSE) for intensities in [0,1]; +infinity for identical frames.
inline double psnr(const Frame& a, const Frame& b) {
    if (!a.same_shape(b)) throw shape_error("psnr: frame shapes differ");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.pixels().size(); ++i) {
        const double d = a.pixels()[i] - b.pixels()[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.pixels().size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(mse);
}

// Mean local SSIM, 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1. Statistics come from separable filtering; the mean runs
// over positions where the full window fits, as in the reference
// implementation. RGB input is reduced to luminance first.
inline double ssim(const Frame& a_in, const Frame& b_in) {
    if (!a_in.same_shape(b_in)) throw shape_error("ssim: frame shapes differ");
    constexpr int kRadius = 5;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    const Frame a = a_in.to_gray();
    const Frame b = b_in.to_gray();
    const std::uint32_t h = a.height(), w = a.width();
    if (h < 2 * kRadius + 1 || w < 2 * kRadius + 1)
        throw config_error("ssim: frames smaller than the 11x11 window");

    const std::size_t n = static_cast<std::size_t>(h) * w;
    std::vector<double> aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        aa[i] = a.pixels()[i] * a.pixels()[i];
        bb[i] = b.pixels()[i] * b.pixels()[i];
        ab[i] = a.pixels()[i] * b.pixels()[i];
    }
    const std::vector<double> mu_a = gaussian_blur(a.pixels(), h, w, kSigma, kRadius);
    const std::vector<double> mu_b = gaussian_blur(b.pixels(), h, w, kSigma, kRadius);
    const std::vector<double> m_aa = gaussian_blur(aa, h, w, kSigma, kRadius);
    const std::vector<double> m_bb = gaussian_blur(bb, h, w, kSigma, kRadius);
    const std::vector<double> m_ab = gaussian_blur(ab, h, w, kSigma, kRadius);

    double total = 0.0;
    std::size_t count = 0;
    for (std::uint32_t y = kRadius; y + kRadius < h; ++y) {
        for (std::uint32_t x = kRadius; x + kRadius < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double ma = mu_a[i], mb = mu_b[i];
            const double va = m_aa[i] - ma * ma;
            const double vb = m_bb[i] - mb * mb;
            const double cov = m_ab[i] - ma * mb;
            total += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
                     ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Evaluation harness
// ---------------------------------------------------------------------------

using Interpolator = std::function<std::vector<Frame>(const InterpInstance&)>;

inline Interpolator event_interpolator(const InterpConfig& cfg) {
    cfg.validate();
    return [cfg](const InterpInstance& inst) { return interpolate(inst, cfg); };
}

// Weighted average of the key frames; the no-events baseline.
inline Interpolator crossfade_interpolator() {
    return [](const InterpInstance& inst) {
        const WeightSchedule sched(inst.skip + 1, WeightOrientation::corrected);
        std::vector<Frame> out;
        out.reserve(inst.skip);
        for (std::uint32_t k = 1; k <= inst.skip; ++k) {
            const double wp = sched.w_prev(k);
            const double wn = sched.w_next(k);
            std::vector<double> px(inst.frame_a.pixels().size());
            for (std::size_t i = 0; i < px.size(); ++i)
                px[i] = std::clamp(
                    wp * inst.frame_a.pixels()[i] + wn * inst.frame_b.pixels()[i], 0.0, 1.0);
            out.emplace_back(inst.frame_a.width(), inst.frame_a.height(),
                             inst.frame_a.channels(), std::move(px));
        }
        return out;
    };
}

struct EvalEntry {
    std::size_t index = 0;
    double psnr = std::numeric_limits<double>::quiet_NaN();  // mean over finite frames
    double ssim = std::numeric_limits<double>::quiet_NaN();
    std::size_t inf_count = 0;  // frames whose PSNR was infinite
    std::string error;          // nonempty if the instance failed

    bool failed() const { return !error.empty(); }
};

struct EvalReport {
    std::string config;
    std::vector<EvalEntry> per_instance;
    double psnr_mean = std::numeric_limits<double>::quiet_NaN();
    double ssim_mean = std::numeric_limits<double>::quiet_NaN();
    std::size_t inf_count = 0;
    std::size_t failed_count = 0;
};

// Runs the interpolator over every instance, aggregating deterministically by
// instance index regardless of thread count. Instance failures are recorded,
// not fatal: only infinite-PSNR frames are excluded from the means.
inline EvalReport evaluate(const std::vector<InterpInstance>& instances,
                           const Interpolator& method, unsigned threads = 1,
                           std::string config_echo = {}) {
    if (instances.empty()) throw config_error("evaluate: no instances");

    struct FrameScores {
        std::vector<double> psnr;
        std::vector<double> ssim;
    };
    std::vector<EvalEntry> entries(instances.size());
    std::vector<FrameScores> scores(instances.size());

    auto run_one = [&](std::size_t i) {
        entries[i].index = i;
        try {
            const std::vector<Frame> est = method(instances[i]);
            if (est.size() != instances[i].intermediates.size())
                throw validation_error("interpolator returned a wrong frame count");
            double psnr_sum = 0.0, ssim_sum = 0.0;
            std::size_t finite = 0;
            for (std::size_t k = 0; k < est.size(); ++k) {
                const double p = psnr(est[k], instances[i].intermediates[k]);
                const double s = ssim(est[k], instances[i].intermediates[k]);
                scores[i].ssim.push_back(s);
                ssim_sum += s;
                if (std::isinf(p)) {
                    ++entries[i].inf_count;
                } else {
                    scores[i].psnr.push_back(p);
                    psnr_sum += p;
                    ++finite;
                }
            }
            if (finite > 0) entries[i].psnr = psnr_sum / static_cast<double>(finite);
            entries[i].ssim = ssim_sum / static_cast<double>(est.size());
        } catch (const std::exception& e) {
            entries[i].error = e.what();
        }
    };

    if (threads <= 1 || instances.size() == 1) {
        for (std::size_t i = 0; i < instances.size(); ++i) run_one(i);
    } else {
        const unsigned nthreads = std::min<unsigned>(threads, instances.size());
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nthreads; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < instances.size(); i += nthreads) run_one(i);
            });
        for (std::thread& t : pool) t.join();
    }

    EvalReport report;
    report.config = std::move(config_echo);
    report.per_instance = std::move(entries);
    double psnr_sum = 0.0, ssim_sum = 0.0;
    std::size_t psnr_n = 0, ssim_n = 0;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (report.per_instance[i].failed()) {
            ++report.failed_count;
            continue;
        }
        for (double p : scores[i].psnr) {
            psnr_sum += p;
            ++psnr_n;
        }
        for (double s : scores[i].ssim) {
            ssim_sum += s;
            ++ssim_n;
        }
        report.inf_count += report.per_instance[i].inf_count;
    }
    if (psnr_n > 0) report.psnr_mean = psnr_sum / static_cast<double>(psnr_n);
    if (ssim_n > 0) report.ssim_mean = ssim_sum / static_cast<double>(ssim_n);
    return report;
}

}  // namespace evkit
