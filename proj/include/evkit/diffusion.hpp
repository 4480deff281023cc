#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "evkit/core.hpp"
#include "evkit/rng.hpp"

namespace evkit {

// Log-normal noise-level law: sigma = exp(eps), eps ~ N(mean, std^2).
struct NoiseDistParams {
    double mean = 0.7;
    double stddev = 1.6;

    void validate() const {
        if (!(stddev > 0.0)) throw config_error("noise distribution: stddev must be positive");
    }
};

inline double sample_sigma(const NoiseDistParams& params, Rng& rng) {
    params.validate();
    return std::exp(rng.gaussian(params.mean, params.stddev));
}

// EDM-style preconditioning for unit data variance:
//   c_in  = 1/sqrt(sigma^2+1)   input normalization
//   c_skip = 1/(sigma^2+1)      passthrough of the noisy latent
//   c_out = -sigma/sqrt(sigma^2+1)  prediction scale
//   loss_weight = (1+sigma^2)/sigma^2, so loss_weight * c_out^2 == 1
struct PreconditionCoeffs {
    double c_in;
    double c_skip;
    double c_out;
    double loss_weight;
};

inline PreconditionCoeffs precondition(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw config_error("precondition: sigma must be positive and finite");
    const double s2 = sigma * sigma;
    return PreconditionCoeffs{
        1.0 / std::sqrt(s2 + 1.0),
        1.0 / (s2 + 1.0),
        -sigma / std::sqrt(s2 + 1.0),
        (1.0 + s2) / s2,
    };
}

// z~ = z + sigma * n, n standard normal per element.
inline FeatureMap add_noise(const FeatureMap& z, double sigma, Rng& rng) {
    std::vector<double> out(z.values());
    for (double& x : out) x += sigma * rng.gaussian();
    return FeatureMap(z.channels(), z.height(), z.width(), std::move(out));
}

// z_denoised = c_out * z_pred + c_skip * z_noisy.
inline FeatureMap reconstruct(const FeatureMap& z_pred, const FeatureMap& z_noisy, double sigma) {
    require_same_shape(z_pred, z_noisy, "reconstruct");
    const PreconditionCoeffs c = precondition(sigma);
    std::vector<double> out(z_pred.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = c.c_out * z_pred.values()[i] + c.c_skip * z_noisy.values()[i];
    return FeatureMap(z_pred.channels(), z_pred.height(), z_pred.width(), std::move(out));
}

// A denoiser sees the c_in-normalized noisy latent, the condition, and the
// noise level, and returns a same-shape prediction. Must be deterministic in
// its inputs.
using Denoiser =
    std::function<FeatureMap(const FeatureMap& noisy_norm, const FeatureMap& condition,
                             double sigma)>;

// Noise-level-weighted training loss: loss_weight(sigma) * mean((z_den - z)^2).
inline double denoise_loss(const FeatureMap& z, const Denoiser& denoiser,
                           const FeatureMap& condition, double sigma, Rng& rng) {
    const PreconditionCoeffs c = precondition(sigma);
    const FeatureMap z_noisy = add_noise(z, sigma, rng);
    std::vector<double> norm(z_noisy.values());
    for (double& x : norm) x *= c.c_in;
    const FeatureMap z_pred =
        denoiser(FeatureMap(z.channels(), z.height(), z.width(), std::move(norm)), condition,
                 sigma);
    const FeatureMap z_den = reconstruct(z_pred, z_noisy, sigma);
    double mse = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double d = z_den.values()[i] - z.values()[i];
        mse += d * d;
    }
    mse /= static_cast<double>(z.size());
    return c.loss_weight * mse;
}

// Closed-form optimal denoiser for z ~ N(mu, s^2 I): the posterior mean is
// E[z|z~] = mu + s^2/(s^2+sigma^2) * (z~ - mu). Returns the prediction that
// makes reconstruct() reproduce exactly that, which is what makes this an
// oracle for the sampler and the loss.
inline Denoiser gaussian_oracle_denoiser(double data_mean, double data_std) {
    if (!(data_std > 0.0)) throw config_error("gaussian oracle: data std must be positive");
    const double s2 = data_std * data_std;
    return [data_mean, s2](const FeatureMap& noisy_norm, const FeatureMap&, double sigma) {
        const PreconditionCoeffs c = precondition(sigma);
        const double shrink = s2 / (s2 + sigma * sigma);
        std::vector<double> out(noisy_norm.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double z_noisy = noisy_norm.values()[i] / c.c_in;
            const double posterior = data_mean + shrink * (z_noisy - data_mean);
            out[i] = (posterior - c.c_skip * z_noisy) / c.c_out;
        }
        return FeatureMap(noisy_norm.channels(), noisy_norm.height(), noisy_norm.width(),
                          std::move(out));
    };
}

struct SamplerConfig {
    int steps = 50;
    double sigma_min = 0.02;
    // Default: noise level two std above the mean of the training law.
    double sigma_max = 49.40244910553017;  // exp(0.7 + 2*1.6)
    double rho = 7.0;
    double cfg_scale = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (steps < 1) throw config_error("sampler: steps must be >= 1");
        if (!(sigma_min > 0.0) || !(sigma_min < sigma_max))
            throw config_error("sampler: need 0 < sigma_min < sigma_max");
        if (!(rho > 0.0)) throw config_error("sampler: rho must be positive");
        if (!std::isfinite(cfg_scale)) throw config_error("sampler: cfg_scale must be finite");
    }
};

// rho-spaced decreasing noise levels, plus the terminal 0.
inline std::vector<double> sigma_schedule(const SamplerConfig& cfg) {
    cfg.validate();
    std::vector<double> sigmas;
    sigmas.reserve(cfg.steps + 1);
    if (cfg.steps == 1) {
        sigmas.push_back(cfg.sigma_max);
    } else {
        const double max_inv = std::pow(cfg.sigma_max, 1.0 / cfg.rho);
        const double min_inv = std::pow(cfg.sigma_min, 1.0 / cfg.rho);
        for (int i = 0; i < cfg.steps; ++i) {
            const double t = static_cast<double>(i) / static_cast<double>(cfg.steps - 1);
            sigmas.push_back(std::pow(max_inv + t * (min_inv - max_inv), cfg.rho));
        }
    }
    sigmas.push_back(0.0);
    return sigmas;
}

struct TensorShape {
    std::uint32_t channels = 1;
    std::uint32_t height = 1;
    std::uint32_t width = 1;
};

// Deterministic first-order sampler over the schedule:
//   x_{i+1} = x_hat + (sigma_{i+1}/sigma_i) * (x_i - x_hat),
// where x_hat is the (guided) reconstruction at sigma_i. Guidance combines
// x_hat = x_uncond + cfg_scale * (x_cond - x_uncond); at cfg_scale == 1 the
// unconditional branch is never evaluated.
inline FeatureMap sample(const Denoiser& denoiser_cond, const Denoiser& denoiser_uncond,
                         const FeatureMap& condition, TensorShape shape,
                         const SamplerConfig& cfg) {
    const std::vector<double> sigmas = sigma_schedule(cfg);
    Rng rng(cfg.seed);

    std::vector<double> x(static_cast<std::size_t>(shape.channels) * shape.height * shape.width);
    for (double& v : x) v = cfg.sigma_max * rng.gaussian();
    FeatureMap state(shape.channels, shape.height, shape.width, std::move(x));

    auto reconstruct_with = [&](const Denoiser& d, double sigma) {
        const PreconditionCoeffs c = precondition(sigma);
        std::vector<double> norm(state.values());
        for (double& v : norm) v *= c.c_in;
        const FeatureMap pred =
            d(FeatureMap(shape.channels, shape.height, shape.width, std::move(norm)), condition,
              sigma);
        return reconstruct(pred, state, sigma);
    };

    for (std::size_t i = 0; i + 1 < sigmas.size(); ++i) {
        const double sigma = sigmas[i];
        const double sigma_next = sigmas[i + 1];
        FeatureMap x_hat = reconstruct_with(denoiser_cond, sigma);
        if (cfg.cfg_scale != 1.0) {
            const FeatureMap x_uncond = reconstruct_with(denoiser_uncond, sigma);
            for (std::size_t j = 0; j < x_hat.size(); ++j)
                x_hat.values()[j] = x_uncond.values()[j] +
                                    cfg.cfg_scale * (x_hat.values()[j] - x_uncond.values()[j]);
        }
        const double ratio = sigma_next / sigma;
        for (std::size_t j = 0; j < state.size(); ++j)
            state.values()[j] = x_hat.values()[j] + ratio * (state.values()[j] - x_hat.values()[j]);
    }
    return state;
}

}  // namespace evkit
