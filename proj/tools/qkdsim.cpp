// Scenario runner: executes the canonical experiments and writes one CSV per
// scenario kind. Exit codes: 0 success, 1 configuration error, 2 runtime
// error.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include <qkdsim/qkdsim.hpp>

namespace {

struct GlobalArgs {
    std::string config_path;
    qkdsim::ScenarioOptions opt;
};

qkdsim::Config load_config(const GlobalArgs& args) {
    if (args.config_path.empty()) return {};
    return qkdsim::Config::from_file(args.config_path);
}

void add_common_flags(CLI::App* cmd, GlobalArgs& args) {
    cmd->add_option("--config", args.config_path, "flat key=value configuration file");
    cmd->add_option("--seed", args.opt.seed, "RNG seed; fixes every stochastic output");
    cmd->add_option("--samples", args.opt.samples, "samples per measurement point");
    cmd->add_option("--workers", args.opt.workers, "worker threads")->check(CLI::Range(1, 256));
    cmd->add_option("--out", args.opt.out_dir, "output directory (default '.')");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Go-&-return CV-QKD link simulator: scenario runner"};
    app.require_subcommand(1);

    GlobalArgs args;
    CLI::App* calibrate = app.add_subcommand(
        "calibrate", "receiver noise variance vs LO intensity, with linear fit");
    CLI::App* sweep =
        app.add_subcommand("sweep", "interference fringes vs applied phase per intensity");
    CLI::App* stability =
        app.add_subcommand("stability", "repeated sweeps of one state over several hours");
    CLI::App* table1 = app.add_subcommand(
        "table1", "standard vs homodyne photon-number comparison table");
    CLI::App* keyrate =
        app.add_subcommand("keyrate", "secret information rates and bit throughput");
    CLI::App* rate_limit = app.add_subcommand(
        "rate-limit", "repetition-rate ceilings and backscatter penalty vs fiber length");
    for (CLI::App* cmd : {calibrate, sweep, stability, table1, keyrate, rate_limit})
        add_common_flags(cmd, args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Help/version requests exit 0 through CLI11; bad usage is a
        // configuration problem.
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const qkdsim::Config cfg = load_config(args);
        if (calibrate->parsed()) {
            const auto sum = qkdsim::run_calibrate_scenario(cfg, args.opt);
            std::printf("wrote %s\n", sum.path.c_str());
            std::printf("fit: v_electr=%.6g slope=%.6g crossover=%.6g photons (r^2=%.6f)\n",
                        sum.fit.v_electr, sum.fit.a, sum.fit.crossover_photons,
                        sum.fit.r_squared);
        } else if (sweep->parsed()) {
            const auto sum = qkdsim::run_sweep_scenario(cfg, args.opt);
            std::printf("wrote %s\n", sum.path.c_str());
            for (const auto& f : sum.fits)
                std::printf("n=%-8.4g A=%.4f (expected %.4f, se %.4f) -> photons %.4f\n",
                            f.target_photons, f.amplitude, f.expected_amplitude,
                            f.amplitude_std_err, f.photons);
        } else if (stability->parsed()) {
            const auto sum = qkdsim::run_stability_scenario(cfg, args.opt);
            std::printf("wrote %s\n", sum.path.c_str());
            std::printf("reproducibility=%.4f mean_amplitude=%.4f precision=%.4f\n",
                        sum.report.reproducibility, sum.report.mean_amplitude,
                        sum.report.amplitude_precision);
        } else if (table1->parsed()) {
            const auto sum = qkdsim::run_table1_scenario(cfg, args.opt);
            std::printf("wrote %s (gate jitter %.3g s)\n", sum.path.c_str(), sum.jitter_s);
            for (const auto& r : sum.rows)
                std::printf("loss=%.2f dB target=%-6.3g n_std=%.3f n_hom=%.3f err=%.1f%%\n",
                            r.loss_db, r.target_photons, r.n_standard, r.n_homodyne,
                            r.error_percent);
        } else if (keyrate->parsed()) {
            const auto sum = qkdsim::run_keyrate_scenario(cfg, args.opt);
            std::printf("wrote %s\n", sum.path.c_str());
            std::printf("headline (realistic, V_A=2N/9): dI=%.4f -> %.1f bit/s; dI=%.4f -> "
                        "%.1f bit/s\n",
                        sum.headline_delta_i_short, sum.headline_bits_short,
                        sum.headline_delta_i_long, sum.headline_bits_long);
        } else if (rate_limit->parsed()) {
            const auto sum = qkdsim::run_rate_limit_scenario(cfg, args.opt);
            std::printf("wrote %s\n", sum.path.c_str());
        }
    } catch (const qkdsim::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const qkdsim::ConfigurationError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const qkdsim::UnreachableSetpoint& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return 2;
    }
    return 0;
}
