#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "evkit/diffusion.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace evkit;

TEST_CASE("sample_sigma is exp of the drawn normal") {
    Rng rng(51);
    // collapse the distribution to its mean to pin the draw
    CHECK_THAT(sample_sigma({0.0, 1e-12}, rng), Catch::Matchers::WithinAbs(1.0, 1e-9));
    CHECK_THAT(sample_sigma({0.7, 1e-12}, rng),
               Catch::Matchers::WithinAbs(std::exp(0.7), 1e-9));
}

TEST_CASE("log sigma matches the configured normal over many draws") {
    Rng rng(52);
    const NoiseDistParams params;
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double l = std::log(sample_sigma(params, rng));
        sum += l;
        sumsq += l * l;
    }
    const double mean = sum / n;
    const double stddev = std::sqrt(sumsq / n - mean * mean);
    CHECK_THAT(mean, Catch::Matchers::WithinAbs(0.7, 0.02));
    CHECK_THAT(stddev, Catch::Matchers::WithinAbs(1.6, 0.02));
}

TEST_CASE("preconditioning at sigma 1 has the closed-form coefficients") {
    const PreconditionCoeffs c = precondition(1.0);
    CHECK_THAT(c.c_in, Catch::Matchers::WithinAbs(1.0 / std::sqrt(2.0), 1e-15));
    CHECK_THAT(c.c_skip, Catch::Matchers::WithinAbs(0.5, 1e-15));
    CHECK_THAT(c.c_out, Catch::Matchers::WithinAbs(-1.0 / std::sqrt(2.0), 1e-15));
    CHECK_THAT(c.loss_weight, Catch::Matchers::WithinAbs(2.0, 1e-15));
}

TEST_CASE("preconditioning approaches the noiseless limit as sigma -> 0") {
    const PreconditionCoeffs c = precondition(1e-8);
    CHECK_THAT(c.c_skip, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(c.c_out, Catch::Matchers::WithinAbs(0.0, 1e-7));
    CHECK_THAT(c.c_in, Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("loss weight times squared output scale is one") {
    for (double s : {0.1, 1.0, 10.0}) {
        const PreconditionCoeffs c = precondition(s);
        CHECK_THAT(c.loss_weight * c.c_out * c.c_out, Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
    CHECK_THROWS_AS(precondition(0.0), config_error);
    CHECK_THROWS_AS(precondition(-1.0), config_error);
}

TEST_CASE("add_noise with zero sigma is the identity") {
    Rng rng(53);
    const FeatureMap z = fixtures::random_feature_map(rng, 1, 4, 4);
    CHECK(add_noise(z, 0.0, rng) == z);
}

TEST_CASE("add_noise variance tracks sigma squared") {
    Rng rng(54);
    const double sigma = 0.8;
    const FeatureMap z = FeatureMap::zeros(1, 1000, 1000);
    const FeatureMap noisy = add_noise(z, sigma, rng);
    double var = 0.0;
    for (double v : noisy.values()) var += v * v;
    var /= static_cast<double>(noisy.size());
    CHECK_THAT(var, Catch::Matchers::WithinRel(sigma * sigma, 0.02));
}

TEST_CASE("add_noise is deterministic under a fixed seed") {
    const FeatureMap z = FeatureMap::zeros(1, 8, 8);
    Rng a(55), b(55);
    CHECK(add_noise(z, 2.0, a) == add_noise(z, 2.0, b));
}

TEST_CASE("reconstruct halves the noisy latent at sigma 1 with a zero prediction") {
    Rng rng(56);
    const FeatureMap noisy = fixtures::random_feature_map(rng, 1, 3, 3);
    const FeatureMap out = reconstruct(FeatureMap::zeros(1, 3, 3), noisy, 1.0);
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK_THAT(out.values()[i], Catch::Matchers::WithinAbs(noisy.values()[i] / 2.0, 1e-15));
}

TEST_CASE("reconstruct approaches the noisy latent as sigma -> 0") {
    Rng rng(57);
    const FeatureMap noisy = fixtures::random_feature_map(rng, 1, 3, 3);
    const FeatureMap pred = fixtures::random_feature_map(rng, 1, 3, 3);
    const FeatureMap out = reconstruct(pred, noisy, 1e-10);
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK_THAT(out.values()[i], Catch::Matchers::WithinAbs(noisy.values()[i], 1e-9));
}

TEST_CASE("oracle reconstruction equals the analytic posterior mean") {
    Rng rng(58);
    for (double mu : {0.0, 3.0}) {
        for (double s : {0.5, 1.0, 2.0}) {
            for (double sigma : {1e-6, 0.1, 1.0, 10.0}) {
                const Denoiser oracle = gaussian_oracle_denoiser(mu, s);
                const FeatureMap z_noisy = fixtures::random_feature_map(rng, 1, 4, 4, 5.0);
                const PreconditionCoeffs c = precondition(sigma);
                std::vector<double> norm(z_noisy.values());
                for (double& v : norm) v *= c.c_in;
                const FeatureMap pred =
                    oracle(FeatureMap(1, 4, 4, std::move(norm)), FeatureMap::zeros(1, 1, 1), sigma);
                const FeatureMap recon = reconstruct(pred, z_noisy, sigma);
                const double shrink = s * s / (s * s + sigma * sigma);
                for (std::size_t i = 0; i < recon.size(); ++i) {
                    const double want = mu + shrink * (z_noisy.values()[i] - mu);
                    CHECK_THAT(recon.values()[i],
                               Catch::Matchers::WithinAbs(want, 1e-9 * std::max(1.0, std::abs(want))));
                }
            }
        }
    }
}

TEST_CASE("oracle posterior collapses to the data mean at huge sigma") {
    const Denoiser oracle = gaussian_oracle_denoiser(2.5, 1.0);
    const double sigma = 1e6;
    const PreconditionCoeffs c = precondition(sigma);
    FeatureMap norm = FeatureMap::zeros(1, 1, 1);
    norm.values()[0] = 7.0 * c.c_in;
    const FeatureMap recon =
        reconstruct(oracle(norm, FeatureMap::zeros(1, 1, 1), sigma),
                    FeatureMap(1, 1, 1, {7.0}), sigma);
    CHECK_THAT(recon.values()[0], Catch::Matchers::WithinAbs(2.5, 1e-6));
}

TEST_CASE("unit prior and unit noise shrink the latent by half") {
    const Denoiser oracle = gaussian_oracle_denoiser(0.0, 1.0);
    const double sigma = 1.0;
    const PreconditionCoeffs c = precondition(sigma);
    FeatureMap norm = FeatureMap::zeros(1, 1, 1);
    norm.values()[0] = 3.0 * c.c_in;
    const FeatureMap recon = reconstruct(oracle(norm, FeatureMap::zeros(1, 1, 1), sigma),
                                         FeatureMap(1, 1, 1, {3.0}), sigma);
    CHECK_THAT(recon.values()[0], Catch::Matchers::WithinAbs(1.5, 1e-12));
}

TEST_CASE("a cheating denoiser drives the loss to zero") {
    Rng rng(59);
    const FeatureMap z = fixtures::random_feature_map(rng, 1, 4, 4);
    const double sigma = 0.7;
    // invert the reconstruction for the observed noisy input
    const Denoiser cheat = [&z](const FeatureMap& norm, const FeatureMap&, double s) {
        const PreconditionCoeffs c = precondition(s);
        std::vector<double> out(norm.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double noisy = norm.values()[i] / c.c_in;
            out[i] = (z.values()[i] - c.c_skip * noisy) / c.c_out;
        }
        return FeatureMap(norm.channels(), norm.height(), norm.width(), std::move(out));
    };
    CHECK_THAT(denoise_loss(z, cheat, FeatureMap::zeros(1, 1, 1), sigma, rng),
               Catch::Matchers::WithinAbs(0.0, 1e-18));
}

TEST_CASE("zero predictor on zero data matches the hand-derived loss") {
    const FeatureMap z = FeatureMap::zeros(1, 16, 16);
    const double sigma = 1.3;
    FeatureMap seen = FeatureMap::zeros(1, 16, 16);
    const Denoiser zero_pred = [&seen](const FeatureMap& norm, const FeatureMap&, double) {
        seen = norm;
        return FeatureMap::zeros(norm.channels(), norm.height(), norm.width());
    };
    Rng rng(60);
    const double loss = denoise_loss(z, zero_pred, FeatureMap::zeros(1, 1, 1), sigma, rng);

    const PreconditionCoeffs c = precondition(sigma);
    double mean_noisy_sq = 0.0;
    for (double v : seen.values()) {
        const double noisy = v / c.c_in;
        mean_noisy_sq += noisy * noisy;
    }
    mean_noisy_sq /= static_cast<double>(seen.size());
    CHECK_THAT(loss, Catch::Matchers::WithinRel(c.loss_weight * c.c_skip * c.c_skip * mean_noisy_sq,
                                                1e-9));
}

TEST_CASE("loss ignores the condition when the denoiser does") {
    Rng rng1(61), rng2(61);
    const FeatureMap z = FeatureMap(1, 2, 2, {0.5, -0.25, 1.0, 0.0});
    const Denoiser blind = [](const FeatureMap& norm, const FeatureMap&, double) { return norm; };
    const double a = denoise_loss(z, blind, FeatureMap::zeros(1, 1, 1), 0.9, rng1);
    const double b = denoise_loss(z, blind, FeatureMap(1, 1, 1, {42.0}), 0.9, rng2);
    CHECK(a == b);
}

TEST_CASE("the oracle minimizes the expected loss among the candidate predictors") {
    const double mu = 1.2, s = 0.8;
    const Denoiser oracle = gaussian_oracle_denoiser(mu, s);
    const Denoiser zero_pred = [](const FeatureMap& n, const FeatureMap&, double) {
        return FeatureMap::zeros(n.channels(), n.height(), n.width());
    };
    const Denoiser mean_pred = [mu](const FeatureMap& n, const FeatureMap&, double sg) {
        const PreconditionCoeffs c = precondition(sg);
        std::vector<double> out(n.size());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = (mu - c.c_skip * (n.values()[i] / c.c_in)) / c.c_out;
        return FeatureMap(n.channels(), n.height(), n.width(), std::move(out));
    };

    Rng data_rng(62);
    const FeatureMap cond = FeatureMap::zeros(1, 1, 1);
    double total_oracle = 0.0, total_zero = 0.0, total_mean = 0.0;
    const int draws = 100000;
    Rng noise_rng(63);
    for (int i = 0; i < draws; ++i) {
        const FeatureMap z(1, 1, 1, {data_rng.gaussian(mu, s)});
        const double sigma = 0.9;
        Rng r1(noise_rng.next_u64());
        Rng r2 = r1, r3 = r1;  // same noise for all three predictors
        total_oracle += denoise_loss(z, oracle, cond, sigma, r1);
        total_zero += denoise_loss(z, zero_pred, cond, sigma, r2);
        total_mean += denoise_loss(z, mean_pred, cond, sigma, r3);
    }
    CHECK(total_oracle < total_zero);
    CHECK(total_oracle < total_mean);
}

TEST_CASE("sigma schedule endpoints and shape") {
    SamplerConfig cfg;
    cfg.steps = 1;
    CHECK(sigma_schedule(cfg) == std::vector<double>({cfg.sigma_max, 0.0}));

    cfg.steps = 50;
    const std::vector<double> s = sigma_schedule(cfg);
    REQUIRE(s.size() == 51);
    CHECK_THAT(s.front(), Catch::Matchers::WithinRel(cfg.sigma_max, 1e-12));
    CHECK_THAT(s[49], Catch::Matchers::WithinRel(cfg.sigma_min, 1e-9));
    CHECK(s.back() == 0.0);
    CHECK(std::is_sorted(s.rbegin(), s.rend()));

    cfg.steps = 0;
    CHECK_THROWS_AS(sigma_schedule(cfg), config_error);
    cfg.steps = 10;
    cfg.sigma_min = cfg.sigma_max;
    CHECK_THROWS_AS(sigma_schedule(cfg), config_error);
}

TEST_CASE("a single sampler step lands on the posterior mean at sigma_max") {
    const double mu = 3.0, s = 0.5;
    SamplerConfig cfg;
    cfg.steps = 1;
    cfg.seed = 77;
    const FeatureMap out = sample(gaussian_oracle_denoiser(mu, s), gaussian_oracle_denoiser(mu, s),
                                  FeatureMap::zeros(1, 1, 1), {1, 1, 1}, cfg);

    Rng rng(cfg.seed);
    const double x0 = cfg.sigma_max * rng.gaussian();
    const double shrink = s * s / (s * s + cfg.sigma_max * cfg.sigma_max);
    CHECK_THAT(out.values()[0],
               Catch::Matchers::WithinAbs(mu + shrink * (x0 - mu), 1e-9));
}

TEST_CASE("unit guidance never touches the unconditional denoiser") {
    const Denoiser oracle = gaussian_oracle_denoiser(0.0, 1.0);
    const Denoiser poisoned = [](const FeatureMap&, const FeatureMap&, double) -> FeatureMap {
        throw std::logic_error("unconditional branch must not run at cfg_scale 1");
    };
    SamplerConfig cfg;
    cfg.steps = 10;
    cfg.seed = 5;
    const FeatureMap a =
        sample(oracle, oracle, FeatureMap::zeros(1, 1, 1), {1, 2, 2}, cfg);
    const FeatureMap b =
        sample(oracle, poisoned, FeatureMap::zeros(1, 1, 1), {1, 2, 2}, cfg);
    CHECK(a == b);
}

TEST_CASE("guidance with identical branches is scale-invariant") {
    const Denoiser oracle = gaussian_oracle_denoiser(1.0, 0.7);
    SamplerConfig cfg;
    cfg.steps = 12;
    cfg.seed = 6;
    const FeatureMap base = sample(oracle, oracle, FeatureMap::zeros(1, 1, 1), {1, 1, 1}, cfg);
    cfg.cfg_scale = 2.5;
    const FeatureMap scaled = sample(oracle, oracle, FeatureMap::zeros(1, 1, 1), {1, 1, 1}, cfg);
    for (std::size_t i = 0; i < base.size(); ++i)
        CHECK_THAT(scaled.values()[i], Catch::Matchers::WithinAbs(base.values()[i], 1e-9));
}

TEST_CASE("sampling is deterministic for a fixed seed") {
    const Denoiser oracle = gaussian_oracle_denoiser(0.5, 1.5);
    SamplerConfig cfg;
    cfg.steps = 20;
    cfg.seed = 1234;
    const FeatureMap a = sample(oracle, oracle, FeatureMap::zeros(1, 1, 1), {2, 3, 3}, cfg);
    const FeatureMap b = sample(oracle, oracle, FeatureMap::zeros(1, 1, 1), {2, 3, 3}, cfg);
    CHECK(a == b);
}

TEST_CASE("more steps move the sampled law closer to the data law") {
    const double mu = 3.0, s = 0.5;
    const Denoiser oracle = gaussian_oracle_denoiser(mu, s);
    const int runs = 10000;

    auto w1_to_truth = [&](int steps) {
        std::vector<double> xs(runs);
        for (int i = 0; i < runs; ++i) {
            SamplerConfig cfg;
            cfg.steps = steps;
            cfg.seed = derive_seed(99, static_cast<std::uint64_t>(i));
            xs[i] =
                sample(oracle, oracle, FeatureMap::zeros(1, 1, 1), {1, 1, 1}, cfg).values()[0];
        }
        std::sort(xs.begin(), xs.end());
        double acc = 0.0;
        for (int i = 0; i < runs; ++i) {
            const double q = mu + s * oracle::normal_quantile((i + 0.5) / runs);
            acc += std::abs(xs[i] - q);
        }
        return acc / runs;
    };

    const double w1_coarse = w1_to_truth(10);
    const double w1_fine = w1_to_truth(50);
    CHECK(w1_fine <= w1_coarse + 0.01);  // monotone down, give or take sampling noise
}
