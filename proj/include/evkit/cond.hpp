#pragma once

#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

#include "evkit/core.hpp"
#include "evkit/voxel.hpp"

namespace evkit {

// Temporal weighting over a sequence of T+1 steps (k = 0..T). The `paper`
// variant ramps the first frame's weight up from zero, so step 0 is weighted
// entirely toward the *far* key frame; `corrected` swaps the pair so the key
// frames pass through unchanged at the boundary steps. Event features
// contribute only to the interior steps.
enum class WeightOrientation { paper, corrected };

class WeightSchedule {
public:
    WeightSchedule(std::uint32_t steps, WeightOrientation orientation)
        : T_(steps), orientation_(orientation) {
        if (T_ < 1) throw config_error("weight schedule: T must be >= 1");
    }

    std::uint32_t T() const { return T_; }
    WeightOrientation orientation() const { return orientation_; }

    double w_prev(std::uint32_t k) const {
        check(k);
        const double ratio = static_cast<double>(k) / static_cast<double>(T_);
        return orientation_ == WeightOrientation::paper ? ratio : 1.0 - ratio;
    }

    // Complement of w_prev, formed by subtraction so the pair sums to 1.0
    // exactly in floating point.
    double w_next(std::uint32_t k) const { return 1.0 - w_prev(k); }

    double w_evs(std::uint32_t k) const {
        check(k);
        return (k == 0 || k == T_) ? 0.0 : 1.0;
    }

private:
    void check(std::uint32_t k) const {
        if (k > T_) throw config_error("weight schedule: step index out of range");
    }

    std::uint32_t T_;
    WeightOrientation orientation_;
};

inline WeightSchedule weight_schedule(std::uint32_t T, WeightOrientation orientation) {
    return WeightSchedule(T, orientation);
}

// Fusion weights may be scalars or full per-element maps.
using FusionWeight = std::variant<double, FeatureMap>;

struct FusionWeights {
    FusionWeight w1;
    FusionWeight w2;
    FusionWeight w3;
};

namespace detail {

inline void accumulate_weighted(std::vector<double>& acc, const FeatureMap& x,
                                const FusionWeight& w, const FeatureMap& ref) {
    if (const double* s = std::get_if<double>(&w)) {
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += *s * x.values()[i];
    } else {
        const FeatureMap& m = std::get<FeatureMap>(w);
        require_same_shape(m, ref, "fuse_features weight");
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += m.values()[i] * x.values()[i];
    }
}

}  // namespace detail

// Weighted sum of the two frame features and the event feature, plus the
// additive fusion term: w1*prev + w2*next + w3*events + base.
inline FeatureMap fuse_features(const FeatureMap& feat_prev, const FeatureMap& feat_next,
                                const FeatureMap& feat_events, const FusionWeights& w,
                                const FeatureMap& base) {
    require_same_shape(feat_prev, feat_next, "fuse_features");
    require_same_shape(feat_prev, feat_events, "fuse_features");
    require_same_shape(feat_prev, base, "fuse_features");
    std::vector<double> acc(base.values());
    detail::accumulate_weighted(acc, feat_prev, w.w1, feat_prev);
    detail::accumulate_weighted(acc, feat_next, w.w2, feat_prev);
    detail::accumulate_weighted(acc, feat_events, w.w3, feat_prev);
    return FeatureMap(feat_prev.channels(), feat_prev.height(), feat_prev.width(),
                      std::move(acc));
}

// Per step k: c_k = w_evs(k)*event_feats[k] + w_prev(k)*prev + w_next(k)*next.
// Boundary steps of the corrected schedule return the key-frame features as
// verbatim copies, so the inputs pass through bit-identically.
inline std::vector<FeatureMap> assemble_conditions(const FeatureMap& feat_prev,
                                                   const FeatureMap& feat_next,
                                                   const std::vector<FeatureMap>& event_feats,
                                                   const WeightSchedule& sched) {
    require_same_shape(feat_prev, feat_next, "assemble_conditions");
    if (event_feats.size() != static_cast<std::size_t>(sched.T()) + 1)
        throw shape_error("assemble_conditions: need T+1 event feature maps, got " +
                          std::to_string(event_feats.size()));
    for (const FeatureMap& f : event_feats) require_same_shape(f, feat_prev, "assemble_conditions");

    std::vector<FeatureMap> out;
    out.reserve(sched.T() + 1);
    for (std::uint32_t k = 0; k <= sched.T(); ++k) {
        const double we = sched.w_evs(k);
        const double wp = sched.w_prev(k);
        const double wn = sched.w_next(k);
        if (we == 0.0 && wp == 1.0 && wn == 0.0) {
            out.push_back(feat_prev);
            continue;
        }
        if (we == 0.0 && wp == 0.0 && wn == 1.0) {
            out.push_back(feat_next);
            continue;
        }
        std::vector<double> acc(feat_prev.size());
        const std::vector<double>& fe = event_feats[k].values();
        const std::vector<double>& a = feat_prev.values();
        const std::vector<double>& b = feat_next.values();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = we * fe[i] + wp * a[i] + wn * b[i];
        out.emplace_back(feat_prev.channels(), feat_prev.height(), feat_prev.width(),
                         std::move(acc));
    }
    return out;
}

// Condition-generator training objective: squared latent error summed per
// frame, averaged over the whole sequence including the key frames.
inline double condition_objective(const std::vector<FeatureMap>& pred,
                                  const std::vector<FeatureMap>& targets) {
    if (pred.size() != targets.size() || pred.empty())
        throw shape_error("condition_objective: prediction/target counts differ or are empty");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        require_same_shape(pred[i], targets[i], "condition_objective");
        double frame = 0.0;
        const std::vector<double>& p = pred[i].values();
        const std::vector<double>& t = targets[i].values();
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double d = t[j] - p[j];
            frame += d * d;
        }
        total += frame;
    }
    return total / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------
// Feature providers. The learned encoders live behind these interfaces; the
// shipped implementations are analytic stand-ins.
// ---------------------------------------------------------------------------

class FeatureProvider {
public:
    virtual ~FeatureProvider() = default;
    virtual FeatureMap features(const Frame& frame) const = 0;
};

class IdentityFeatures final : public FeatureProvider {
public:
    FeatureMap features(const Frame& frame) const override {
        return FeatureMap::from_frame(frame);
    }
};

// Average pooling by an integer factor; a cheap proxy for encoders that work
// at a reduced spatial scale.
class DownsampleFeatures final : public FeatureProvider {
public:
    explicit DownsampleFeatures(std::uint32_t factor) : factor_(factor) {
        if (factor_ < 1) throw config_error("downsample features: factor must be >= 1");
    }

    FeatureMap features(const Frame& frame) const override {
        const std::uint32_t oh = std::max<std::uint32_t>(1, frame.height() / factor_);
        const std::uint32_t ow = std::max<std::uint32_t>(1, frame.width() / factor_);
        FeatureMap out = FeatureMap::zeros(frame.channels(), oh, ow);
        for (std::uint32_t c = 0; c < frame.channels(); ++c)
            for (std::uint32_t y = 0; y < oh; ++y)
                for (std::uint32_t x = 0; x < ow; ++x) {
                    double acc = 0.0;
                    std::uint32_t n = 0;
                    for (std::uint32_t dy = 0; dy < factor_; ++dy)
                        for (std::uint32_t dx = 0; dx < factor_; ++dx) {
                            const std::uint32_t sy = y * factor_ + dy;
                            const std::uint32_t sx = x * factor_ + dx;
                            if (sy < frame.height() && sx < frame.width()) {
                                acc += frame.at(sx, sy, c);
                                ++n;
                            }
                        }
                    out.values()[(static_cast<std::size_t>(c) * oh + y) * ow + x] = acc / n;
                }
        return out;
    }

private:
    std::uint32_t factor_;
};

class EventFeatureProvider {
public:
    virtual ~EventFeatureProvider() = default;
    virtual FeatureMap features(const VoxelGrid& grid, const RoiMask& mask) const = 0;
};

// Voxel channels gated by the ROI mask; the event-feature analogue of the
// identity provider.
class MaskedVoxelFeatures final : public EventFeatureProvider {
public:
    FeatureMap features(const VoxelGrid& grid, const RoiMask& mask) const override {
        if (grid.height != mask.height || grid.width != mask.width)
            throw shape_error("masked voxel features: grid/mask shapes differ");
        FeatureMap out = FeatureMap::zeros(grid.bins, grid.height, grid.width);
        const std::size_t plane = static_cast<std::size_t>(grid.height) * grid.width;
        for (std::uint32_t b = 0; b < grid.bins; ++b)
            for (std::size_t i = 0; i < plane; ++i)
                out.values()[b * plane + i] = grid.v[b * plane + i] * mask.v[i];
        return out;
    }
};

}  // namespace evkit
