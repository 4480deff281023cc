// evcli: batch front end for the event-interpolation pipeline.
// Exit codes: 0 ok, 2 config error, 3 I/O error, 4 validation error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "evkit/evkit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// The full pipeline key schema; every subcommand accepts the same file and
// reads the keys it needs. Values are range-checked up front.
const std::set<std::string> kConfigKeys = {
    "contrast", "eps", "refractory_us", "seed", "skip", "bins",
    "gaussian_sigma", "gaussian_radius", "threshold", "dilate_radius", "median_radius",
    "blend", "steps", "sigma_min", "sigma_max", "rho", "cfg_scale",
    "mu", "std", "samples", "threads",
};

evkit::KeyValueConfig load_pipeline_config(const std::string& path) {
    auto cfg = evkit::KeyValueConfig::load(path, kConfigKeys);
    // Touch every present key once so a bad value fails at load, not at use.
    if (cfg.has("contrast")) cfg.get_double("contrast", 1e-9, 1e9);
    if (cfg.has("eps")) cfg.get_double("eps", 1e-12, 1.0);
    if (cfg.has("refractory_us")) cfg.get_u64("refractory_us", 0, UINT64_MAX);
    if (cfg.has("seed")) cfg.get_u64("seed", 0, UINT64_MAX);
    if (cfg.has("skip")) cfg.get_u64("skip", 1, 1000000);
    if (cfg.has("bins")) cfg.get_u64("bins", 1, 65536);
    if (cfg.has("gaussian_sigma")) cfg.get_double("gaussian_sigma", 1e-9, 1e6);
    if (cfg.has("gaussian_radius")) cfg.get_u64("gaussian_radius", 0, 4096);
    if (cfg.has("threshold")) cfg.get_double("threshold", 1e-12, 1e9);
    if (cfg.has("dilate_radius")) cfg.get_u64("dilate_radius", 0, 4096);
    if (cfg.has("median_radius")) cfg.get_u64("median_radius", 0, 4096);
    if (cfg.has("blend")) cfg.get_choice("blend", {"forward", "backward", "bidirectional"});
    if (cfg.has("steps")) cfg.get_u64("steps", 1, 1000000);
    if (cfg.has("sigma_min")) cfg.get_double("sigma_min", 1e-12, 1e12);
    if (cfg.has("sigma_max")) cfg.get_double("sigma_max", 1e-12, 1e12);
    if (cfg.has("rho")) cfg.get_double("rho", 1e-6, 1e6);
    if (cfg.has("cfg_scale")) cfg.get_double("cfg_scale", -1e6, 1e6);
    if (cfg.has("mu")) cfg.get_double("mu", -1e12, 1e12);
    if (cfg.has("std")) cfg.get_double("std", 1e-12, 1e12);
    if (cfg.has("samples")) cfg.get_u64("samples", 1, UINT64_MAX);
    if (cfg.has("threads")) cfg.get_u64("threads", 0, 4096);
    return cfg;
}

evkit::EventStream read_events_any(const fs::path& path) {
    return path.extension() == ".txt" ? evkit::read_events_text(path)
                                      : evkit::read_events_binary(path);
}

void write_events_any(const evkit::EventStream& s, const fs::path& path) {
    if (path.extension() == ".txt")
        evkit::write_events_text(s, path);
    else
        evkit::write_events_binary(s, path);
}

evkit::BlendMode parse_blend(const std::string& name) {
    if (name == "forward") return evkit::BlendMode::forward;
    if (name == "backward") return evkit::BlendMode::backward;
    if (name == "bidirectional") return evkit::BlendMode::bidirectional;
    throw evkit::config_error("unknown blend mode: " + name);
}

unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

struct CommonOpts {
    std::string config_path;
    unsigned threads = 1;
};

// Config-file values fill in flags the user did not pass explicitly.
template <typename T, typename Getter>
void merge_key(const CLI::App* cmd, const std::string& flag, const evkit::KeyValueConfig& cfg,
               const std::string& key, T& value, Getter getter) {
    if (cmd->count(flag) == 0 && cfg.has(key)) value = getter();
}

int cmd_simulate(const CLI::App* cmd, const CommonOpts& common, const std::string& frames_dir,
                 const std::string& out_path, evkit::SimConfig sim) {
    if (!common.config_path.empty()) {
        const auto cfg = load_pipeline_config(common.config_path);
        merge_key(cmd, "--contrast", cfg, "contrast", sim.contrast,
                  [&] { return cfg.get_double("contrast", 1e-9, 1e9); });
        merge_key(cmd, "--eps", cfg, "eps", sim.eps,
                  [&] { return cfg.get_double("eps", 1e-12, 1.0); });
        merge_key(cmd, "--refractory", cfg, "refractory_us", sim.refractory_us,
                  [&] { return cfg.get_u64("refractory_us", 0, UINT64_MAX); });
        merge_key(cmd, "--seed", cfg, "seed", sim.seed,
                  [&] { return cfg.get_u64("seed", 0, UINT64_MAX); });
    }
    sim.validate();
    const evkit::FrameSequence seq = evkit::read_frames(frames_dir);
    const evkit::EventStream events = evkit::simulate_events(seq, sim);
    write_events_any(events, out_path);
    std::cout << "simulate: " << events.size() << " events from " << seq.size() << " frames -> "
              << out_path << '\n';
    return 0;
}

int cmd_voxelize(const CLI::App* cmd, const CommonOpts& common, const std::string& events_path,
                 std::uint64_t t0, std::uint64_t t1, std::uint64_t bins,
                 const std::string& grid_out, const std::string& mask_out,
                 evkit::RoiMaskConfig roi) {
    if (!common.config_path.empty()) {
        const auto cfg = load_pipeline_config(common.config_path);
        merge_key(cmd, "--bins", cfg, "bins", bins, [&] { return cfg.get_u64("bins", 1, 65536); });
        merge_key(cmd, "--roi-sigma", cfg, "gaussian_sigma", roi.gaussian_sigma,
                  [&] { return cfg.get_double("gaussian_sigma", 1e-9, 1e6); });
        merge_key(cmd, "--roi-radius", cfg, "gaussian_radius", roi.gaussian_radius,
                  [&] { return static_cast<int>(cfg.get_u64("gaussian_radius", 0, 4096)); });
        merge_key(cmd, "--roi-threshold", cfg, "threshold", roi.threshold,
                  [&] { return cfg.get_double("threshold", 1e-12, 1e9); });
        merge_key(cmd, "--roi-dilate", cfg, "dilate_radius", roi.dilate_radius,
                  [&] { return static_cast<int>(cfg.get_u64("dilate_radius", 0, 4096)); });
        merge_key(cmd, "--roi-median", cfg, "median_radius", roi.median_radius,
                  [&] { return static_cast<int>(cfg.get_u64("median_radius", 0, 4096)); });
    }
    roi.validate();
    if (grid_out.empty() && mask_out.empty())
        throw evkit::config_error("voxelize: need --grid-out and/or --mask-out");

    const evkit::EventStream events = read_events_any(events_path);
    if (cmd->count("--t0") == 0 || cmd->count("--t1") == 0) {
        if (events.empty())
            throw evkit::config_error("voxelize: --t0/--t1 required for an empty stream");
        if (cmd->count("--t0") == 0) t0 = events.events().front().t;
        if (cmd->count("--t1") == 0) t1 = events.events().back().t + 1;
    }

    const evkit::VoxelGrid grid =
        evkit::voxelize(events, t0, t1, static_cast<std::uint32_t>(bins));
    if (!grid_out.empty()) {
        evkit::write_tensor(evkit::Tensor{{grid.bins, grid.height, grid.width}, grid.v}, grid_out);
        std::cout << "voxelize: grid " << grid.bins << "x" << grid.height << "x" << grid.width
                  << " -> " << grid_out << '\n';
    }
    if (!mask_out.empty()) {
        const evkit::RoiMask mask = evkit::roi_mask(grid, roi);
        std::vector<double> mv(mask.v.begin(), mask.v.end());
        evkit::write_tensor(evkit::Tensor{{mask.height, mask.width}, std::move(mv)}, mask_out);
        std::cout << "voxelize: mask " << mask.count() << "/" << mask.v.size() << " active -> "
                  << mask_out << '\n';
    }
    return 0;
}

struct InterpArgs {
    std::string frames_dir;
    std::string events_path;
    std::uint64_t skip = 3;
    std::string mode = "bidirectional";
    evkit::InterpConfig interp;
};

void merge_interp_keys(const CLI::App* cmd, const CommonOpts& common, InterpArgs& a) {
    if (common.config_path.empty()) return;
    const auto cfg = load_pipeline_config(common.config_path);
    merge_key(cmd, "--skip", cfg, "skip", a.skip, [&] { return cfg.get_u64("skip", 1, 1000000); });
    merge_key(cmd, "--mode", cfg, "blend", a.mode, [&] {
        return cfg.get_choice("blend", {"forward", "backward", "bidirectional"});
    });
    merge_key(cmd, "--contrast", cfg, "contrast", a.interp.contrast,
              [&] { return cfg.get_double("contrast", 1e-9, 1e9); });
    merge_key(cmd, "--eps", cfg, "eps", a.interp.eps,
              [&] { return cfg.get_double("eps", 1e-12, 1.0); });
}

int cmd_interpolate(const CLI::App* cmd, const CommonOpts& common, InterpArgs a,
                    const std::string& out_dir) {
    merge_interp_keys(cmd, common, a);
    a.interp.blend = parse_blend(a.mode);
    a.interp.validate();

    const evkit::FrameSequence seq = evkit::read_frames(a.frames_dir);
    const evkit::EventStream events = read_events_any(a.events_path);
    const auto instances =
        evkit::build_instances(seq, events, static_cast<std::uint32_t>(a.skip));

    // Reconstructed sequence: key frames pass through, estimates in between.
    std::vector<evkit::Frame> frames;
    std::vector<evkit::Timestamp> times;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const evkit::InterpInstance& inst = instances[i];
        frames.push_back(inst.frame_a);
        times.push_back(inst.t_a);
        const std::vector<evkit::Frame> est = evkit::interpolate(inst, a.interp);
        for (std::size_t k = 0; k < est.size(); ++k) {
            frames.push_back(est[k]);
            times.push_back(inst.times[k]);
        }
        if (i + 1 == instances.size()) {
            frames.push_back(inst.frame_b);
            times.push_back(inst.t_b);
        }
    }
    evkit::write_frames(evkit::FrameSequence(std::move(frames), std::move(times)), out_dir);
    std::cout << "interpolate: " << instances.size() << " instances, mode " << a.mode << " -> "
              << out_dir << '\n';
    return 0;
}

int cmd_evaluate(const CLI::App* cmd, const CommonOpts& common, InterpArgs a,
                 const std::string& method, const std::string& report_path) {
    merge_interp_keys(cmd, common, a);
    a.interp.blend = parse_blend(a.mode);
    a.interp.validate();

    const evkit::FrameSequence seq = evkit::read_frames(a.frames_dir);
    const evkit::EventStream events = read_events_any(a.events_path);
    const auto instances =
        evkit::build_instances(seq, events, static_cast<std::uint32_t>(a.skip));

    evkit::Interpolator interp;
    if (method == "event")
        interp = evkit::event_interpolator(a.interp);
    else if (method == "crossfade")
        interp = evkit::crossfade_interpolator();
    else
        throw evkit::config_error("evaluate: method must be `event` or `crossfade`");

    const std::string echo = "method=" + method + " skip=" + std::to_string(a.skip) +
                             " blend=" + a.mode + " contrast=" + std::to_string(a.interp.contrast);
    const evkit::EvalReport report =
        evkit::evaluate(instances, interp, resolve_threads(common.threads), echo);
    evkit::write_report(report, report_path);
    std::cout << "evaluate: psnr_mean=" << report.psnr_mean << " ssim_mean=" << report.ssim_mean
              << " inf_count=" << report.inf_count << " instances=" << report.per_instance.size()
              << " -> " << report_path << '\n';
    return 0;
}

struct DemoArgs {
    double mu = 0.0;
    double stddev = 1.0;
    std::uint64_t samples = 10000;
    evkit::SamplerConfig sampler;
};

int cmd_diffuse_demo(const CLI::App* cmd, const CommonOpts& common, DemoArgs a,
                     const std::string& report_path) {
    if (!common.config_path.empty()) {
        const auto cfg = load_pipeline_config(common.config_path);
        merge_key(cmd, "--mu", cfg, "mu", a.mu, [&] { return cfg.get_double("mu", -1e12, 1e12); });
        merge_key(cmd, "--std", cfg, "std", a.stddev,
                  [&] { return cfg.get_double("std", 1e-12, 1e12); });
        merge_key(cmd, "--samples", cfg, "samples", a.samples,
                  [&] { return cfg.get_u64("samples", 1, UINT64_MAX); });
        merge_key(cmd, "--steps", cfg, "steps", a.sampler.steps,
                  [&] { return static_cast<int>(cfg.get_u64("steps", 1, 1000000)); });
        merge_key(cmd, "--sigma-min", cfg, "sigma_min", a.sampler.sigma_min,
                  [&] { return cfg.get_double("sigma_min", 1e-12, 1e12); });
        merge_key(cmd, "--sigma-max", cfg, "sigma_max", a.sampler.sigma_max,
                  [&] { return cfg.get_double("sigma_max", 1e-12, 1e12); });
        merge_key(cmd, "--rho", cfg, "rho", a.sampler.rho,
                  [&] { return cfg.get_double("rho", 1e-6, 1e6); });
        merge_key(cmd, "--cfg-scale", cfg, "cfg_scale", a.sampler.cfg_scale,
                  [&] { return cfg.get_double("cfg_scale", -1e6, 1e6); });
        merge_key(cmd, "--seed", cfg, "seed", a.sampler.seed,
                  [&] { return cfg.get_u64("seed", 0, UINT64_MAX); });
    }
    a.sampler.validate();
    if (!(a.stddev > 0.0)) throw evkit::config_error("diffuse-demo: --std must be positive");

    const evkit::Denoiser oracle = evkit::gaussian_oracle_denoiser(a.mu, a.stddev);
    const evkit::FeatureMap no_condition = evkit::FeatureMap::zeros(1, 1, 1);

    std::vector<double> outputs(a.samples);
    const unsigned nthreads =
        std::min<unsigned>(resolve_threads(common.threads), static_cast<unsigned>(a.samples));
    auto worker = [&](unsigned t) {
        for (std::uint64_t i = t; i < a.samples; i += nthreads) {
            evkit::SamplerConfig run = a.sampler;
            run.seed = evkit::derive_seed(a.sampler.seed, i);
            outputs[i] = evkit::sample(oracle, oracle, no_condition, {1, 1, 1}, run).values()[0];
        }
    };
    if (nthreads <= 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker, t);
        for (std::thread& t : pool) t.join();
    }

    double mean = 0.0;
    for (double v : outputs) mean += v;
    mean /= static_cast<double>(a.samples);
    double var = 0.0;
    for (double v : outputs) var += (v - mean) * (v - mean);
    var /= static_cast<double>(a.samples);

    json j;
    j["config"] = {{"mu", a.mu},           {"std", a.stddev},
                   {"steps", a.sampler.steps}, {"sigma_min", a.sampler.sigma_min},
                   {"sigma_max", a.sampler.sigma_max}, {"rho", a.sampler.rho},
                   {"cfg_scale", a.sampler.cfg_scale}, {"seed", a.sampler.seed},
                   {"samples", a.samples}};
    j["schedule"] = evkit::sigma_schedule(a.sampler);
    j["empirical"] = {{"mean", mean}, {"std", std::sqrt(var)}};
    evkit::atomic_write_file(report_path,
                             [&](std::ofstream& out) { out << j.dump(2) << '\n'; }, std::ios::out);
    std::cout << "diffuse-demo: mean=" << mean << " std=" << std::sqrt(var) << " samples="
              << a.samples << " -> " << report_path << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"event-camera video frame interpolation pipeline"};
    app.require_subcommand(1);

    CommonOpts common;
    app.add_option("--config", common.config_path, "key=value pipeline config file")
        ->configurable(false);
    app.add_option("--threads", common.threads, "worker threads (0 = auto)")->capture_default_str();

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "synthesize events from a frame directory");
    std::string sim_frames, sim_out;
    evkit::SimConfig sim_cfg;
    sim_cmd->add_option("--frames", sim_frames, "input frame directory")->required();
    sim_cmd->add_option("--out", sim_out, "output event file (.evt binary, .txt text)")->required();
    sim_cmd->add_option("--contrast", sim_cfg.contrast, "log-intensity threshold per event")
        ->capture_default_str();
    sim_cmd->add_option("--eps", sim_cfg.eps, "intensity offset before log")->capture_default_str();
    sim_cmd->add_option("--refractory", sim_cfg.refractory_us, "per-pixel dead time, microseconds")
        ->capture_default_str();
    sim_cmd->add_option("--seed", sim_cfg.seed, "rng seed (reserved for noise models)")
        ->capture_default_str();

    // voxelize
    auto* vox_cmd = app.add_subcommand("voxelize", "encode an event window as a voxel grid + mask");
    std::string vox_events, vox_grid_out, vox_mask_out;
    std::uint64_t vox_t0 = 0, vox_t1 = 0, vox_bins = 8;
    evkit::RoiMaskConfig roi_cfg;
    vox_cmd->add_option("--events", vox_events, "input event file")->required();
    vox_cmd->add_option("--t0", vox_t0, "window start, microseconds (default: first event)");
    vox_cmd->add_option("--t1", vox_t1, "window end, exclusive (default: last event + 1)");
    vox_cmd->add_option("--bins", vox_bins, "temporal bins")->capture_default_str();
    vox_cmd->add_option("--grid-out", vox_grid_out, "voxel grid tensor output (.egt)");
    vox_cmd->add_option("--mask-out", vox_mask_out, "ROI mask tensor output (.egt)");
    vox_cmd->add_option("--roi-sigma", roi_cfg.gaussian_sigma, "mask blur sigma")
        ->capture_default_str();
    vox_cmd->add_option("--roi-radius", roi_cfg.gaussian_radius, "mask blur radius")
        ->capture_default_str();
    vox_cmd->add_option("--roi-threshold", roi_cfg.threshold, "mask activation threshold")
        ->capture_default_str();
    vox_cmd->add_option("--roi-dilate", roi_cfg.dilate_radius, "mask dilation radius")
        ->capture_default_str();
    vox_cmd->add_option("--roi-median", roi_cfg.median_radius, "mask median radius")
        ->capture_default_str();

    // interpolate
    auto* int_cmd = app.add_subcommand("interpolate", "reconstruct withheld frames from events");
    InterpArgs int_args;
    std::string int_out;
    int_cmd->add_option("--frames", int_args.frames_dir, "input frame directory")->required();
    int_cmd->add_option("--events", int_args.events_path, "input event file")->required();
    int_cmd->add_option("--skip", int_args.skip, "withheld frames per instance")
        ->capture_default_str();
    int_cmd->add_option("--mode", int_args.mode, "forward|backward|bidirectional")
        ->capture_default_str();
    int_cmd->add_option("--contrast", int_args.interp.contrast, "log step per event")
        ->capture_default_str();
    int_cmd->add_option("--eps", int_args.interp.eps, "intensity offset before log")
        ->capture_default_str();
    int_cmd->add_option("--out", int_out, "output frame directory")->required();

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "score a method against withheld frames");
    InterpArgs eval_args;
    std::string eval_method = "event", eval_report;
    eval_cmd->add_option("--frames", eval_args.frames_dir, "input frame directory")->required();
    eval_cmd->add_option("--events", eval_args.events_path, "input event file")->required();
    eval_cmd->add_option("--skip", eval_args.skip, "withheld frames per instance")
        ->capture_default_str();
    eval_cmd->add_option("--mode", eval_args.mode, "forward|backward|bidirectional")
        ->capture_default_str();
    eval_cmd->add_option("--contrast", eval_args.interp.contrast, "log step per event")
        ->capture_default_str();
    eval_cmd->add_option("--eps", eval_args.interp.eps, "intensity offset before log")
        ->capture_default_str();
    eval_cmd->add_option("--method", eval_method, "event|crossfade")->capture_default_str();
    eval_cmd->add_option("--report", eval_report, "JSON report output")->required();

    // diffuse-demo
    auto* demo_cmd =
        app.add_subcommand("diffuse-demo", "run the seeded sampler against the Gaussian oracle");
    DemoArgs demo_args;
    std::string demo_report;
    demo_cmd->add_option("--mu", demo_args.mu, "data mean")->capture_default_str();
    demo_cmd->add_option("--std", demo_args.stddev, "data std")->capture_default_str();
    demo_cmd->add_option("--samples", demo_args.samples, "number of runs")->capture_default_str();
    demo_cmd->add_option("--steps", demo_args.sampler.steps, "sampler steps")
        ->capture_default_str();
    demo_cmd->add_option("--sigma-min", demo_args.sampler.sigma_min, "schedule floor")
        ->capture_default_str();
    demo_cmd->add_option("--sigma-max", demo_args.sampler.sigma_max, "schedule ceiling")
        ->capture_default_str();
    demo_cmd->add_option("--rho", demo_args.sampler.rho, "schedule spacing exponent")
        ->capture_default_str();
    demo_cmd->add_option("--cfg-scale", demo_args.sampler.cfg_scale, "guidance scale")
        ->capture_default_str();
    demo_cmd->add_option("--seed", demo_args.sampler.seed, "base rng seed")->capture_default_str();
    demo_cmd->add_option("--report", demo_report, "JSON report output")->required();

    try {
        app.parse(argc, argv);
        if (sim_cmd->parsed())
            return cmd_simulate(sim_cmd, common, sim_frames, sim_out, sim_cfg);
        if (vox_cmd->parsed())
            return cmd_voxelize(vox_cmd, common, vox_events, vox_t0, vox_t1, vox_bins,
                                vox_grid_out, vox_mask_out, roi_cfg);
        if (int_cmd->parsed()) return cmd_interpolate(int_cmd, common, int_args, int_out);
        if (eval_cmd->parsed())
            return cmd_evaluate(eval_cmd, common, eval_args, eval_method, eval_report);
        if (demo_cmd->parsed()) return cmd_diffuse_demo(demo_cmd, common, demo_args, demo_report);
        return 2;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: config: " << e.what() << '\n';
        std::cerr << "run with --help for usage\n";
        return 2;
    } catch (const evkit::config_error& e) {
        std::cerr << "error: config: " << e.what() << '\n';
        return 2;
    } catch (const evkit::io_error& e) {
        std::cerr << "error: io: " << e.what() << '\n';
        return 3;
    } catch (const evkit::validation_error& e) {
        std::cerr << "error: validation: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << '\n';
        return 1;
    }
}
