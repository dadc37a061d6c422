// Full-system checklist for the go-&-return simulator. Each numbered check
// exercises one headline behaviour end to end and prints a single PASS/FAIL
// line; the process exits non-zero if any check fails. Tolerances are stated
// inline next to the checks they guard.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "qkdsim/qkdsim.hpp"

using namespace qkdsim;

namespace {

int g_failures = 0;

void report(int index, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %d. %-28s %s\n", pass ? "PASS" : "FAIL", index, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
    va_list args;
    va_start(args, f);
    char buf[512];
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ScenarioOptions opts(const std::string& dir, std::uint64_t seed, long samples, int workers = 1) {
    ScenarioOptions o;
    o.out_dir = "acceptance_out/" + dir;
    o.seed = seed;
    o.samples = samples;
    o.workers = workers;
    return o;
}

// --------------------------------------------------------------------------
// 1. Receiver noise is linear in LO intensity: V(n) = v_electr + a n over
//    {1e5 .. 1e8} photons; fitted intercept and slope within 2% of the
//    configured detector, crossover at 1e6 photons within 5%, and the run
//    finishes in under 10 s at 1e5 samples per point.

void check_noise_linearity() {
    const auto t0 = std::chrono::steady_clock::now();
    const Config cfg = Config::from_string("");
    const CalibrateSummary sum = run_calibrate_scenario(cfg, opts("calibrate", 1, 100000));
    const double dt = seconds_since(t0);

    const double v_off = std::abs(sum.fit.v_electr / 4.0e6 - 1.0);
    const double a_off = std::abs(sum.fit.a / 4.0 - 1.0);
    const double x_off = std::abs(sum.fit.crossover_photons / 1.0e6 - 1.0);
    const bool pass = v_off < 0.02 && a_off < 0.02 && x_off < 0.05 && dt < 10.0;
    report(1, "noise-vs-LO linearity", pass,
           fmt("intercept %.3e (%.2f%% off), slope %.4f (%.2f%% off), crossover %.3e "
               "(%.2f%% off), %.1f s",
               sum.fit.v_electr, 100 * v_off, sum.fit.a, 100 * a_off,
               sum.fit.crossover_photons, 100 * x_off, dt));
}

// --------------------------------------------------------------------------
// 2. Balance tolerance: the acceptable coupler asymmetry at 1e8 LO photons is
//    eps = 3.54e-5, i.e. a 3.1e-4 dB deviation from a perfect 50/50 split.

void check_balance_math() {
    const double eps = balance_epsilon_bound(1e8);
    const double db = epsilon_to_db(eps);
    const bool pass = std::abs(eps / 3.54e-5 - 1.0) < 0.005 &&
                      std::abs(db / 3.1e-4 - 1.0) < 0.02;
    report(2, "balance tolerance math", pass,
           fmt("epsilon %.4e (want 3.54e-5), split deviation %.3e dB (want 3.1e-4)", eps, db));
}

// --------------------------------------------------------------------------
// 3. Faraday auto-compensation: J^T M_FM J = det(J) M_FM to 1e-10 over 1000
//    random unitaries, and the full link gives the same fringe amplitude with
//    an identity fiber as with a frozen random Jones matrix (within 3
//    combined standard errors, independent seeds).

void check_auto_compensation() {
    Rng rng(0xFA7ADA);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const JonesMatrix j = JonesMatrix::random_unitary(rng);
        const JonesMatrix lhs = faraday_round_trip(j);
        const JonesMatrix rhs = JonesMatrix::faraday_mirror() * j.det();
        worst = std::max(worst, lhs.frobenius_distance(rhs));
    }

    LinkConfig identity_link = bench_default_link();
    identity_link.fiber.birefringence_scale = 0.0;
    LinkConfig frozen_link = bench_default_link();
    frozen_link.fiber.birefringence_scale = 2.0;  // strong but frozen in time
    frozen_link.jones_seed = 1234;

    const std::vector<double> intensities{9.0};
    auto fitted = [&](const LinkConfig& link, std::uint64_t seed) {
        const auto records = run_phase_sweep(link, intensities, 4000, seed);
        return fit_sweep_records(records, intensities, 17).front();
    };
    const SweepFitRow a = fitted(identity_link, 301);
    const SweepFitRow b = fitted(frozen_link, 302);
    const double se = std::hypot(a.amplitude_std_err, b.amplitude_std_err);
    const double pull = std::abs(a.amplitude - b.amplitude) / se;

    const bool pass = worst < 1e-10 && pull < 3.0;
    report(3, "Faraday auto-compensation", pass,
           fmt("max |J^T M J - det(J) M| = %.2e (1000 draws), identity-vs-frozen fringe "
               "amplitude pull %.2f sigma",
               worst, pull));
}

// --------------------------------------------------------------------------
// 4. Fringe ladder: 17-step phase sweeps at {9, 3, 1, 0.3, 0.1, 0.03, 0.01}
//    photons, 4000 samples per point; every fitted amplitude within 3
//    standard errors of sqrt(2n); total runtime under 60 s.

void check_fringe_ladder() {
    const auto t0 = std::chrono::steady_clock::now();
    const Config cfg = Config::from_string("");
    const SweepSummary sum = run_sweep_scenario(cfg, opts("sweep", 1, 4000));
    const double dt = seconds_since(t0);

    double worst_pull = 0.0;
    for (const SweepFitRow& fit : sum.fits) {
        const double pull =
            std::abs(fit.amplitude - fit.expected_amplitude) / fit.amplitude_std_err;
        worst_pull = std::max(worst_pull, pull);
    }
    const bool pass = sum.fits.size() == 7 && worst_pull < 3.0 && dt < 60.0;
    report(4, "fringe amplitude ladder", pass,
           fmt("7 intensities, worst amplitude pull %.2f sigma (limit 3), %.1f s", worst_pull,
               dt));
}

// --------------------------------------------------------------------------
// 5. Photon-number comparison table.
//    (a) The symmetric error metric reproduces all 16 printed percentages
//        from the printed photon-number pairs to +/-0.1 point.
//    (b) With the gate jitter calibrated so the 9.3-photon row sits near 2%,
//        the simulated discrepancy grows monotonically as the photon number
//        drops to 0.28, ending at >= 20%.

void check_comparison_table() {
    struct Printed {
        double n_std, n_hom, err;
    };
    const Printed printed[16] = {
        {9.3, 9.1, 2.2},   {8.77, 8.75, 0.2}, {7.62, 7.65, 0.4}, {6.0, 6.19, 3.1},
        {4.27, 4.44, 3.9}, {2.52, 2.72, 7.6}, {1.11, 1.3, 15.8}, {0.28, 0.38, 30.3},
        {2.2, 2.3, 4.4},   {2.08, 2.21, 6.1}, {1.8, 1.9, 5.4},   {1.42, 1.6, 11.9},
        {1.01, 1.06, 4.8}, {0.6, 0.69, 14.0}, {0.26, 0.33, 23.7}, {0.07, 0.11, 44.4}};
    int metric_hits = 0;
    double worst_gap = 0.0;
    for (const Printed& row : printed) {
        const double err = comparison_error(row.n_std, row.n_hom);
        const double gap = std::abs(err - row.err);
        worst_gap = std::max(worst_gap, gap);
        if (gap <= 0.1) ++metric_hits;
    }
    const bool metric_ok = metric_hits == 16;

    const Config cfg = Config::from_string("");
    const Table1Summary sum = run_table1_scenario(cfg, opts("table1", 1, 30000));
    std::vector<double> errs;
    for (const Table1Row& row : sum.rows)
        if (row.fiber_km < 1.0) errs.push_back(row.error_percent);

    bool trend = errs.size() == 8;
    for (std::size_t i = 0; trend && i + 1 < errs.size(); ++i)
        if (errs[i + 1] < errs[i] - 0.5) trend = false;  // monotone up to noise slack
    const bool top_ok = trend && errs.front() >= 1.0 && errs.front() <= 4.0;
    const bool bottom_ok = trend && errs.back() >= 20.0;

    report(5, "photon-number comparison", metric_ok && trend && top_ok && bottom_ok,
           fmt("%d/16 printed errors matched to +/-0.1 (worst gap %.3f); jittered trend "
               "%.1f%% -> %.1f%% over 9.3 -> 0.28 photons (jitter %.3f ns)",
               metric_hits, worst_gap, errs.empty() ? 0.0 : errs.front(),
               errs.empty() ? 0.0 : errs.back(), sum.jitter_s * 1e9));
}

// --------------------------------------------------------------------------
// 6. Stability: with a quiet instrument the run-to-run reproducibility sits
//    at the statistical floor 1.1/sqrt(4000) = 0.017 (within 20%); with the
//    7% laser ramp it lands in [0.15, 0.35] and the implied amplitude
//    precision is ~4% (accepted band 2-6%).

void check_stability() {
    const Config quiet_cfg = Config::from_string("laser_drift = 0\nslow_noise_std = 0\n");
    const StabilitySummary quiet =
        run_stability_scenario(quiet_cfg, opts("stability_quiet", 1, 4000));
    const double floor = 1.1 / std::sqrt(4000.0);
    const bool quiet_ok = std::abs(quiet.report.reproducibility / floor - 1.0) < 0.20;

    const Config drift_cfg = Config::from_string("");
    const StabilitySummary drift =
        run_stability_scenario(drift_cfg, opts("stability_drift", 1, 4000));
    const bool drift_ok =
        drift.report.reproducibility >= 0.15 && drift.report.reproducibility <= 0.35;
    const bool precision_ok = drift.report.amplitude_precision >= 0.02 &&
                              drift.report.amplitude_precision <= 0.06;

    report(6, "stability reproducibility", quiet_ok && drift_ok && precision_ok,
           fmt("quiet %.4f (floor %.4f), drifting %.3f (band [0.15,0.35]), precision %.2f%% "
               "(band [2,6]%%)",
               quiet.report.reproducibility, floor, drift.report.reproducibility,
               100 * drift.report.amplitude_precision));
}

// --------------------------------------------------------------------------
// 7. Repetition-rate ceilings: 200 kHz with no fiber (5 us electrical pulse),
//    7.14 kHz for single-train go-&-return at 14 km (comfortably above the
//    6.7 kHz operating point), and at 50 kHz on 14 km the multi-train
//    backscatter lifts the measured variance strictly above the 6.7 kHz
//    baseline.

void check_rate_limits() {
    const double r0 = max_repetition_rate(0.0);
    const double r14 = max_repetition_rate(14.0);
    const bool caps_ok = std::abs(r0 - 200e3) < 1e-6 &&
                         std::abs(r14 - 1.0 / 140e-6) < 1e-6 && r14 >= 6.7e3;

    LinkConfig link = bench_default_link();
    link.fiber.length_km = 14.0;
    link.fiber.excess_loss_db = 0.3;  // 3.1 dB one-way

    auto pooled_variance = [&](double rate_hz, std::uint64_t seed) {
        LinkConfig l = link;
        l.repetition_rate_hz = rate_hz;
        const std::vector<double> one{9.0};
        const auto records = run_phase_sweep(l, one, 4000, seed);
        double acc = 0.0;
        for (const SweepRecord& r : records) acc += r.std_dev * r.std_dev;
        return acc / static_cast<double>(records.size());
    };
    const double var_fast = pooled_variance(50e3, 701);
    const double var_slow = pooled_variance(6.7e3, 702);
    const bool noise_ok = var_fast > var_slow;

    report(7, "repetition-rate limits", caps_ok && noise_ok,
           fmt("0 km %.0f kHz, 14 km single-train %.2f kHz, variance 50 kHz %.2f vs 6.7 kHz "
               "%.2f",
               r0 / 1e3, r14 / 1e3, var_fast, var_slow));
}

// --------------------------------------------------------------------------
// 8. Secret-key arithmetic: the quoted information rates times the operating
//    repetition rates give 31.5 kbit/s and ~1.2 kbit/s exactly; the
//    realistic-mode calculator lands inside the documented bands for both
//    losses; ideal-mode reverse reconciliation stays positive to 30 dB.

void check_key_rates() {
    const bool products_ok =
        std::abs(bits_per_second(0.63, 50e3) - 31500.0) < 1e-9 &&
        std::abs(bits_per_second(0.18, 6.7e3) - 1206.0) < 1e-9;

    const Config cfg = Config::from_string("");
    const KeyrateSummary sum = run_keyrate_scenario(cfg, opts("keyrate", 1, 0));
    const bool short_ok =
        sum.headline_delta_i_short >= 0.44 && sum.headline_delta_i_short <= 0.82;
    const bool long_ok =
        sum.headline_delta_i_long >= 0.126 && sum.headline_delta_i_long <= 0.234;

    DetectionParams det;
    KeyRateParams ideal;
    ideal.mode = KeyRateMode::Ideal;
    ideal.modulation_variance = 2.0 * 30.0 / 9.0;
    bool positive = true;
    double min_di = 1e9;
    for (double loss = 0.0; loss <= 30.0 + 1e-9; loss += 0.1) {
        const double di = key_rate_rr_individual(channel_from_loss(loss), det, ideal).delta_i;
        min_di = std::min(min_di, di);
        if (!(di > 0.0)) positive = false;
    }

    report(8, "secret-key rates", products_ok && short_ok && long_ok && positive,
           fmt("0.63*50kHz=31.5k, 0.18*6.7kHz=1206; realistic dI %.4f/[0.44,0.82] and "
               "%.4f/[0.126,0.234]; ideal min dI to 30 dB %.2e",
               sum.headline_delta_i_short, sum.headline_delta_i_long, min_di));
}

// --------------------------------------------------------------------------
// 9. Determinism: reruns with the same seed and worker count give
//    byte-identical files, and aggregate numbers agree across worker counts
//    within 1e-12.

void check_determinism() {
    const Config cfg = Config::from_string("");
    bool bytes_ok = true;
    for (int workers : {1, 4}) {
        const std::string tag = "w" + std::to_string(workers);
        const SweepSummary a = run_sweep_scenario(cfg, opts("det_" + tag + "_a", 9, 400, workers));
        const SweepSummary b = run_sweep_scenario(cfg, opts("det_" + tag + "_b", 9, 400, workers));
        if (slurp(a.path) != slurp(b.path) || slurp(a.path).empty()) bytes_ok = false;
    }

    const SweepSummary w1 = run_sweep_scenario(cfg, opts("det_cross_w1", 9, 400, 1));
    const SweepSummary w4 = run_sweep_scenario(cfg, opts("det_cross_w4", 9, 400, 4));
    double worst = 0.0;
    for (std::size_t i = 0; i < w1.records.size(); ++i) {
        worst = std::max(worst, std::abs(w1.records[i].mean - w4.records[i].mean));
        worst = std::max(worst, std::abs(w1.records[i].std_dev - w4.records[i].std_dev));
    }
    for (std::size_t i = 0; i < w1.fits.size(); ++i)
        worst = std::max(worst, std::abs(w1.fits[i].amplitude - w4.fits[i].amplitude));

    const bool cross_ok = worst <= 1e-12;
    report(9, "determinism", bytes_ok && cross_ok,
           fmt("reruns byte-identical at workers {1,4}; cross-worker max difference %.1e",
               worst));
}

}  // namespace

int main() {
    std::filesystem::create_directories("acceptance_out");
    std::printf("full-system checks (fixed seeds; tolerances quoted per line)\n");

    check_noise_linearity();
    check_balance_math();
    check_auto_compensation();
    check_fringe_ladder();
    check_comparison_table();
    check_stability();
    check_rate_limits();
    check_key_rates();
    check_determinism();

    if (g_failures == 0) {
        std::printf("all checks passed\n");
        return 0;
    }
    std::printf("%d check(s) FAILED\n", g_failures);
    return 1;
}
