// specklegi - speckle-based ghost-imaging simulator and analysis toolkit.
//
// Subcommands:
//   simulate     generate a frame ensemble, cache it, report g2 statistics
//   reconstruct  autocorrelation / pixel-correlation / GI / DGI maps
//   sweep        C and SNR versus object-area/speckle-area ratio, power-law fits
//   selftest     run the statistical verification suite

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "specklegi/pipeline.hpp"
#include "specklegi/selftest.hpp"

namespace {

using specklegi::RunConfig;

/// Shared flags; every flag mirrors a config-file key and overrides it.
struct CommonArgs {
    std::string config_file;
    std::vector<std::pair<std::string, std::string>> overrides;
};

void add_common_options(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_file, "flat key = value configuration file");
    auto keyed = [&args](const std::string& key) {
        return [&args, key](const std::string& v) { args.overrides.emplace_back(key, v); };
    };
    cmd->add_option_function<std::string>(
           "--source", keyed("source"), "thermal | speckled-speckle | second-harmonic")
        ->type_name("KIND");
    cmd->add_option_function<std::string>("--mean-intensity", keyed("mean_intensity"),
                                          "mean output intensity (thermal, cascade)");
    cmd->add_option_function<std::string>("--mu-f", keyed("mu_f"), "first-diffuser mode count");
    cmd->add_option_function<std::string>("--mu-s", keyed("mu_s"), "second-selection mode count");
    cmd->add_option_function<std::string>("--mu", keyed("mu"), "fundamental mode count");
    cmd->add_option_function<std::string>("--conversion-k", keyed("conversion_k"),
                                          "second-harmonic conversion efficiency");
    cmd->add_option_function<std::string>("--mean-fund", keyed("mean_fund"),
                                          "fundamental mean intensity");
    cmd->add_option_function<std::string>("--width", keyed("width"), "grid width (px)");
    cmd->add_option_function<std::string>("--height", keyed("height"), "grid height (px)");
    cmd->add_option_function<std::string>("--pixel-pitch", keyed("pixel_pitch"),
                                          "physical pixel pitch (informational)");
    cmd->add_option_function<std::string>("--speckle-radius", keyed("speckle_radius"),
                                          "Gaussian speckle scale sigma (px)");
    cmd->add_option_function<std::string>("--frames", keyed("n_frames"), "number of frames");
    cmd->add_option_function<std::string>("--seed", keyed("master_seed"), "master seed");
    cmd->add_option_function<std::string>("--mask", keyed("mask"),
                                          "mask PGM path or builtin:llama");
    cmd->add_option_function<std::string>("--reference", keyed("reference"),
                                          "differential reference region: auto or x,y,w,h");
    cmd->add_option_function<std::string>("--output-dir", keyed("output_dir"), "output directory");
    cmd->add_option_function<std::string>("--threads", keyed("threads"),
                                          "worker threads (default: SPECKLEGI_THREADS or 1)");
    cmd->add_option_function<std::string>("--cache", keyed("cache"), "read frames from a cache file");
}

RunConfig build_config(const CommonArgs& args) {
    RunConfig cfg;
    cfg.threads = specklegi::env_thread_count();
    if (!args.config_file.empty()) cfg = specklegi::parse_config_file(args.config_file, cfg);
    for (const auto& [k, v] : args.overrides) specklegi::apply_config_entry(cfg, k, v);
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"speckle-based ghost imaging simulator"};
    app.require_subcommand(1);

    CommonArgs sim_args, rec_args, sweep_args;
    std::string rec_method = "dgi", rec_pixel, rec_scale;
    std::string sweep_ratios;
    bool sweep_fit_snr = false, sweep_plot = false, sweep_single_source = false;
    std::string selftest_criteria = "1,2,3,4,5,6,7,8,9";
    int selftest_threads = specklegi::env_thread_count();

    auto* sim = app.add_subcommand("simulate", "generate and cache a frame ensemble");
    add_common_options(sim, sim_args);

    auto* rec = app.add_subcommand("reconstruct", "compute a correlation map");
    add_common_options(rec, rec_args);
    rec->add_option("-m,--method", rec_method, "autocorr | pixel | gi | dgi");
    rec->add_option("--pixel", rec_pixel, "reference pixel x,y for --method pixel");
    rec->add_option("--scale", rec_scale, "image scaling: norm or fixed:<lo>:<hi>");

    auto* sweep = app.add_subcommand("sweep", "figures of merit vs speckle count");
    add_common_options(sweep, sweep_args);
    sweep->add_option("--ratios", sweep_ratios, "comma-separated A_b/A_sp ratios (default 1,2,4,8)");
    sweep->add_flag("--fit-snr", sweep_fit_snr, "append SNR power-law fits as well");
    sweep->add_flag("--plot", sweep_plot, "emit a chart image of the sweep");
    sweep->add_flag("--single-source", sweep_single_source,
                    "sweep only the configured source instead of all three");

    auto* self = app.add_subcommand("selftest", "run the statistical verification suite");
    self->add_option("--criteria", selftest_criteria, "comma-separated criterion ids (default all)");
    self->add_option("--threads", selftest_threads, "worker threads");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            const RunConfig cfg = build_config(sim_args);
            const auto out = specklegi::run_simulate(cfg);
            std::printf("cache: %s (fnv64 %s)\n", out.cache_file.c_str(),
                        specklegi::hex64(out.cache_digest).c_str());
            std::printf("measured single-pixel g2 = %s +/- %s (analytic %s)\n",
                        specklegi::format_g9(out.measured_g2).c_str(),
                        specklegi::format_g9(out.g2_se).c_str(),
                        specklegi::format_g9(out.analytic_g2).c_str());
            return 0;
        }
        if (rec->parsed()) {
            rec_args.overrides.emplace_back("method", rec_method);
            if (!rec_pixel.empty()) rec_args.overrides.emplace_back("pixel", rec_pixel);
            if (!rec_scale.empty()) rec_args.overrides.emplace_back("scale", rec_scale);
            const RunConfig cfg = build_config(rec_args);
            const auto out = specklegi::run_reconstruct(cfg);
            std::printf("map: %s\nimage: %s\n", out.csv_file.c_str(), out.image_file.c_str());
            if (out.have_metrics)
                std::printf("contrast = %s, snr = %s\n",
                            specklegi::format_g9(out.contrast).c_str(),
                            specklegi::format_g9(out.snr_value).c_str());
            return 0;
        }
        if (sweep->parsed()) {
            if (!sweep_ratios.empty()) sweep_args.overrides.emplace_back("ratios", sweep_ratios);
            if (sweep_fit_snr) sweep_args.overrides.emplace_back("fit_snr", "1");
            if (sweep_plot) sweep_args.overrides.emplace_back("plot", "1");
            const RunConfig cfg = build_config(sweep_args);
            const auto out = specklegi::run_sweep(cfg, !sweep_single_source);
            std::printf("sweep: %s (%zu records)\n", out.csv_file.c_str(), out.records.size());
            if (!out.plot_file.empty()) std::printf("chart: %s\n", out.plot_file.c_str());
            return 0;
        }
        if (self->parsed()) {
            std::vector<int> ids;
            std::istringstream is(selftest_criteria);
            std::string tok;
            while (std::getline(is, tok, ',')) ids.push_back(std::stoi(tok));
            specklegi::selftest::Options opt;
            opt.threads = selftest_threads;
            bool all_pass = true;
            for (int id : ids) {
                const auto r = specklegi::selftest::run_criterion(id, opt);
                std::printf("%s\n", specklegi::selftest::format_result(r).c_str());
                std::fflush(stdout);
                all_pass = all_pass && r.pass;
            }
            return all_pass ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
