#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "analysis.hpp"
#include "homodyne.hpp"
#include "modulation.hpp"
#include "optics.hpp"
#include "rng.hpp"

namespace qkdsim {

struct ConfigurationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fiber delay per km, one way.
inline constexpr double kFiberDelayPerKm = 5e-6;

// Highest usable pulse rate: the electrical dead time of the pulsed detector
// caps it at 1/electrical_pulse; if only one pulse train may occupy the fiber
// at a time, the go-&-return flight time caps it at 1/(10 us/km * length).
inline double max_repetition_rate(double fiber_km, double electrical_pulse_s = 5e-6,
                                  bool single_train = true) {
    if (!(fiber_km >= 0.0) || !(electrical_pulse_s > 0.0))
        throw std::invalid_argument("max_repetition_rate: bad arguments");
    const double dead_time_limit = 1.0 / electrical_pulse_s;
    const double round_trip = 2.0 * kFiberDelayPerKm * fiber_km;
    if (!single_train || round_trip <= 0.0) return dead_time_limit;
    return std::min(dead_time_limit, 1.0 / round_trip);
}

// Full go-&-return link configuration. Photon numbers are referenced where
// they matter operationally: lo_photons at the 50/50 coupler (detection),
// alice_input_photons at the input of Alice's modulator.
struct LinkConfig {
    FiberChannel fiber{};
    double bob_signal_loss_db = 2.4;       // 98/2 coupler + isolator + PBS + connectors
    double lo_photons = 1e8;
    double alice_input_photons = 1e6;
    double pulse_separation_s = 50e-9;
    double pulse_duration_s = 50e-9;
    double electrical_pulse_s = 5e-6;      // detector dead time per pulse
    double repetition_rate_hz = 50e3;
    bool single_train_enforced = false;
    bool force_reflection_overlap = false; // fault injection: un-gate the LO reflection
    double reflection_suppression_db = 55.0;
    ModulatorSpec modulator{};
    BalanceState balance{};
    NoiseCalibration calibration{};
    // Lumped non-shot, non-electronic noise (normalized variance units);
    // 0.705 brings the total per-sample std to 1.1 at LO 1e8.
    double excess_noise_var = 0.705;
    std::uint64_t jones_seed = 0;

    double one_way_delay_s() const { return kFiberDelayPerKm * fiber.length_km; }
    double round_trip_time_s() const { return 2.0 * one_way_delay_s(); }
    double total_signal_loss_db() const { return fiber.total_loss_db() + bob_signal_loss_db; }
    double signal_transmission() const { return db_to_transmission(total_signal_loss_db()); }

    int trains_in_flight() const {
        const double occupancy = round_trip_time_s() * repetition_rate_hz;
        return std::max(1, static_cast<int>(std::ceil(occupancy - 1e-9)));
    }

    void validate() const {
        fiber.validate();
        modulator.validate();
        calibration.validate();
        if (!(bob_signal_loss_db >= 0.0) || !(reflection_suppression_db >= 0.0))
            throw std::invalid_argument("LinkConfig: losses must be >= 0");
        if (!(lo_photons > 0.0) || !(alice_input_photons > 0.0))
            throw std::invalid_argument("LinkConfig: photon numbers must be > 0");
        if (!(pulse_separation_s > 0.0) || !(pulse_duration_s > 0.0) ||
            !(electrical_pulse_s > 0.0) || !(repetition_rate_hz > 0.0))
            throw std::invalid_argument("LinkConfig: timing parameters must be > 0");
        if (single_train_enforced &&
            repetition_rate_hz >
                max_repetition_rate(fiber.length_km, electrical_pulse_s, true) * (1.0 + 1e-12))
            throw ConfigurationError(
                "LinkConfig: repetition rate exceeds the single-train round-trip bound");
    }
};

// The two pulses Bob launches: the signal (modulated by Alice) and the local
// oscillator reference, one pulse separation apart on the same fiber.
struct PulsePair {
    CoherentPulse signal;
    CoherentPulse lo;
};

inline PulsePair make_pulse_pair(const LinkConfig& link, double t, double power_factor = 1.0) {
    PulsePair pair;
    pair.signal = CoherentPulse::make(link.alice_input_photons * power_factor, 0.0,
                                      {complexd{1, 0}, complexd{0, 0}}, t, link.pulse_duration_s);
    pair.lo = CoherentPulse::make(link.lo_photons * power_factor, 0.0,
                                  {complexd{1, 0}, complexd{0, 0}}, t + link.pulse_separation_s,
                                  link.pulse_duration_s);
    return pair;
}

// One full go-&-return cycle for a pulse pair: Alice's modulation, the
// Faraday-mirror polarization round trip, the return loss budget, PBS routing
// at Bob, and the pulsed homodyne measurement of signal against LO.
inline HomodyneSample round_trip(const PulsePair& pair, const LinkConfig& link,
                                 const DriveCommand& cmd, Rng& rng) {
    // Alice: gated dual-drive modulation (plus her Faraday mirror, which is
    // folded into the round-trip polarization operator below).
    CoherentPulse sig = modulate(link.modulator, cmd, pair.signal, rng);

    // Polarization: forward and return passes of the drifting fiber around
    // the Faraday mirror. For slow drift the operator is det(J) * M_FM and
    // the launch polarization H returns as V regardless of J.
    const double t1 = link.one_way_delay_s();
    const auto round_trip_operator = [&](double emit_time) {
        const JonesMatrix fwd =
            fiber_jones(link.fiber, emit_time + 0.5 * t1, link.jones_seed);
        const JonesMatrix ret =
            fiber_jones(link.fiber, emit_time + 1.5 * t1, link.jones_seed);
        return ret.transpose() * JonesMatrix::faraday_mirror() * fwd;
    };
    const JonesVector v_sig = round_trip_operator(pair.signal.emit_time).apply(sig.polarization);
    const JonesVector v_lo = round_trip_operator(pair.lo.emit_time).apply(pair.lo.polarization);

    // Return-path loss: one-way fiber on the prepared state, then Bob's
    // receiver budget on the signal path. The PBS V-port projection keeps the
    // complex det(J) phase, which is common to both pulses and cancels in the
    // relative phase.
    sig.amplitude *= std::pow(10.0, -link.fiber.total_loss_db() / 20.0);
    sig.amplitude *= v_sig[1];
    sig.polarization = {complexd{0, 0}, complexd{1, 0}};
    sig.amplitude *= std::pow(10.0, -link.bob_signal_loss_db / 20.0);

    // Residual interferometric phase accumulated across the 50 ns slot
    // separation (Wiener drift; auto-compensated apart from this).
    const double dphi =
        link.fiber.phase_drift_rate * std::sqrt(link.pulse_separation_s) * rng.gaussian();
    sig.amplitude *= std::polar(1.0, dphi);

    // LO at the coupler: intensity tracks the launched pulse (the bright LO's
    // fiber loss is absorbed into the configured photon number), phase and
    // polarization from the round trip.
    CoherentPulse lo = pair.lo;
    const double lo_norm = std::sqrt(norm2(v_lo));
    lo.amplitude = std::polar(std::sqrt(pair.lo.photons()),
                              std::arg(pair.lo.amplitude * v_lo[1]));
    lo.polarization = (lo_norm > 0.0) ? JonesVector{v_lo[0] / lo_norm, v_lo[1] / lo_norm}
                                      : JonesVector{complexd{0, 0}, complexd{1, 0}};

    // Unless the measurement gate drops them, back-reflections of the bright
    // LO (PBS/detector returns) land on the signal slot.
    if (link.force_reflection_overlap) {
        const double n_refl =
            link.lo_photons * std::pow(10.0, -link.reflection_suppression_db / 10.0);
        sig.amplitude += std::polar(std::sqrt(n_refl),
                                    rng.uniform(0.0, 2.0 * std::numbers::pi));
    }

    double extra_var = link.excess_noise_var;
    extra_var += backscatter_noise_variance(link.fiber, link.lo_photons, link.trains_in_flight());

    // Imperfect polarization return (drift within the flight time) feeds the
    // balance through the coupler PDL.
    BalanceState bal = link.balance;
    bal.epsilon = link.balance.effective_epsilon(
        polarization_distance(lo.polarization, {complexd{0, 0}, complexd{1, 0}}));

    return measure(sig, lo, bal, link.calibration, extra_var, rng);
}

namespace detail {

template <typename Fn>
void parallel_cells(int n_cells, int workers, Fn&& fn) {
    if (workers <= 1 || n_cells <= 1) {
        for (int i = 0; i < n_cells; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next.fetch_add(1); i < n_cells; i = next.fetch_add(1)) fn(i);
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min(workers, n_cells);
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int w = 0; w < n_threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

inline constexpr std::uint64_t kSweepStream = 0x53574545;     // "SWEE"
inline constexpr std::uint64_t kStabilityStream = 0x53544142; // "STAB"
inline constexpr std::uint64_t kBaselineStream = 0x42415345;  // "BASE"

}  // namespace detail

// One (intensity, phase) cell of a phase sweep.
struct SweepRecord {
    int intensity_index = 0;
    int phase_index = 0;
    double applied_phase = 0.0;
    double target_photons = 0.0;  // requested mean photon number at the coupler
    std::vector<double> samples;  // normalized homodyne outcomes
    double mean = 0.0;
    double std_dev = 0.0;
};

// Sweep Alice's phase over a uniform grid for each requested intensity
// (photon number at Bob's 50/50 coupler). Every (intensity, phase) cell runs
// on its own seed substream, so results do not depend on the worker count.
// Prepared-photon setpoint for a requested mean photon number at the
// receiver coupler. With gate jitter active, Alice calibrates her modulation
// depth against the pulse-averaged output energy (what her monitoring power
// meter reports), so the prepared ensemble mean matches the request even
// though jitter scatters part of that energy out of the coherent mean.
inline double trimmed_prepared_photons(const LinkConfig& link, double coupler_photons) {
    const double want = coupler_photons / link.signal_transmission();
    if (!(link.modulator.timing_offset_sigma > 0.0)) return want;

    const double input = link.alice_input_photons;
    const auto metered = [&](double setpoint) {
        const DriveCommand cmd = solve_drive(link.modulator, input, setpoint, 0.0);
        const TransferMoments m =
            jitter_averaged_transfer(link.modulator, cmd.v1, cmd.v2, link.pulse_duration_s);
        return input * m.mean_energy;
    };

    // The wobbling gate leaks light even at full extinction; requests below
    // that floor are unreachable, so the drive rests at the extinction point.
    if (metered(0.0) >= want) return 0.0;

    // metered() is monotone in the setpoint and never falls below it (the
    // gate envelope can only weaken the differential drive, i.e. raise the
    // transmission), so [0, min(want, input)] brackets the solution.
    double lo = 0.0;
    double hi = std::min(want, input);
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (metered(mid) < want ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline std::vector<SweepRecord> run_phase_sweep(const LinkConfig& link,
                                                std::span<const double> intensities,
                                                int samples_per_point, std::uint64_t seed,
                                                int workers = 1, int phase_steps = 17) {
    link.validate();
    if (intensities.empty()) throw std::invalid_argument("run_phase_sweep: no intensities");
    if (samples_per_point < 2 || phase_steps < 4)
        throw std::invalid_argument("run_phase_sweep: need >= 2 samples and >= 4 phases");
    for (const double n : intensities)
        if (!(n > 0.0)) throw std::invalid_argument("run_phase_sweep: intensities must be > 0");

    const int n_cells = static_cast<int>(intensities.size()) * phase_steps;
    std::vector<SweepRecord> records(static_cast<std::size_t>(n_cells));

    std::vector<double> prepared(intensities.size());
    for (std::size_t i = 0; i < intensities.size(); ++i)
        prepared[i] = trimmed_prepared_photons(link, intensities[i]);

    detail::parallel_cells(n_cells, workers, [&](int cell) {
        const int i_idx = cell / phase_steps;
        const int p_idx = cell % phase_steps;
        const double phase =
            2.0 * std::numbers::pi * static_cast<double>(p_idx) / static_cast<double>(phase_steps);
        const double n_prepared = prepared[static_cast<std::size_t>(i_idx)];
        const DriveCommand cmd =
            solve_drive(link.modulator, link.alice_input_photons, n_prepared, phase);

        Rng rng(stream_seed(seed, detail::kSweepStream, static_cast<std::uint64_t>(cell)));
        SweepRecord& rec = records[static_cast<std::size_t>(cell)];
        rec.intensity_index = i_idx;
        rec.phase_index = p_idx;
        rec.applied_phase = phase;
        rec.target_photons = intensities[static_cast<std::size_t>(i_idx)];
        rec.samples.resize(static_cast<std::size_t>(samples_per_point));

        double acc = 0.0;
        for (int s = 0; s < samples_per_point; ++s) {
            const double t = (static_cast<double>(cell) * samples_per_point + s) /
                             link.repetition_rate_hz;
            const PulsePair pair = make_pulse_pair(link, t);
            const HomodyneSample out = round_trip(pair, link, cmd, rng);
            rec.samples[static_cast<std::size_t>(s)] = out.normalized;
            acc += out.normalized;
        }
        rec.mean = acc / samples_per_point;
        double var = 0.0;
        for (const double q : rec.samples) var += (q - rec.mean) * (q - rec.mean);
        rec.std_dev = std::sqrt(var / (samples_per_point - 1));
    });
    return records;
}

struct StabilityOptions {
    int n_runs = 5;
    double interval_hours = 1.0;
    int samples_per_point = 4000;
    int phase_steps = 17;
    double laser_drift = 0.0;     // total relative power ramp across the window
    double slow_noise_std = 0.0;  // per-run baseline offset std (normalized units)
};

struct StabilityReport {
    std::vector<double> run_time_hours;
    std::vector<std::vector<double>> per_run_means;  // [run][phase step]
    std::vector<std::vector<double>> per_run_stds;
    std::vector<double> per_run_amplitude;  // fitted A per run
    double reproducibility = 0.0;
    double mean_amplitude = 0.0;
    double amplitude_precision = 0.0;  // reproducibility / mean amplitude
    double laser_drift = 0.0;
};

// Repeatedly re-measure the same prepared state (full phase sweep) at fixed
// wall-clock intervals. The laser power ramps linearly by `laser_drift` over
// the window and scales both pulses; Bob keeps normalizing with the nominal
// LO calibration, so his measured amplitude scales with the full power
// factor. slow_noise_std adds the slow (run-scale) component of the excess
// noise as a per-run baseline offset.
inline StabilityReport run_stability(const LinkConfig& link, double state_photons,
                                     const StabilityOptions& opt, std::uint64_t seed,
                                     int workers = 1) {
    link.validate();
    if (!(state_photons > 0.0))
        throw std::invalid_argument("run_stability: state_photons must be > 0");
    if (opt.n_runs < 2 || opt.samples_per_point < 2 || opt.phase_steps < 4)
        throw std::invalid_argument("run_stability: need >= 2 runs, >= 2 samples, >= 4 phases");
    if (!(opt.interval_hours > 0.0) || !(opt.laser_drift >= 0.0) || !(opt.slow_noise_std >= 0.0))
        throw std::invalid_argument("run_stability: bad drift options");

    StabilityReport rep;
    rep.laser_drift = opt.laser_drift;
    rep.run_time_hours.resize(static_cast<std::size_t>(opt.n_runs));
    rep.per_run_means.assign(static_cast<std::size_t>(opt.n_runs),
                             std::vector<double>(static_cast<std::size_t>(opt.phase_steps), 0.0));
    rep.per_run_stds = rep.per_run_means;
    rep.per_run_amplitude.resize(static_cast<std::size_t>(opt.n_runs));

    // Per-run slow offsets, drawn on their own stream so they are identical
    // for every worker count.
    std::vector<double> baseline(static_cast<std::size_t>(opt.n_runs), 0.0);
    for (int k = 0; k < opt.n_runs; ++k) {
        if (opt.slow_noise_std > 0.0) {
            Rng r(stream_seed(seed, detail::kBaselineStream, static_cast<std::uint64_t>(k)));
            baseline[static_cast<std::size_t>(k)] = opt.slow_noise_std * r.gaussian();
        }
        rep.run_time_hours[static_cast<std::size_t>(k)] = opt.interval_hours * k;
    }

    const double g_total = link.signal_transmission();
    const double window = opt.interval_hours * (opt.n_runs - 1);
    const double lo_nominal_scale = 2.0 * std::sqrt(2.0 * link.lo_photons);
    const int n_cells = opt.n_runs * opt.phase_steps;

    detail::parallel_cells(n_cells, workers, [&](int cell) {
        const int run = cell / opt.phase_steps;
        const int p_idx = cell % opt.phase_steps;
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(p_idx) /
                             static_cast<double>(opt.phase_steps);
        const double power = (window > 0.0)
                                 ? 1.0 + opt.laser_drift *
                                             (rep.run_time_hours[static_cast<std::size_t>(run)] /
                                              window)
                                 : 1.0;
        const DriveCommand cmd =
            solve_drive(link.modulator, link.alice_input_photons, state_photons / g_total, phase);

        Rng rng(stream_seed(seed, detail::kStabilityStream, static_cast<std::uint64_t>(cell)));
        double acc = 0.0, acc2 = 0.0;
        for (int s = 0; s < opt.samples_per_point; ++s) {
            const double t = rep.run_time_hours[static_cast<std::size_t>(run)] * 3600.0 +
                             (static_cast<double>(p_idx) * opt.samples_per_point + s) /
                                 link.repetition_rate_hz;
            const PulsePair pair = make_pulse_pair(link, t, power);
            const HomodyneSample out = round_trip(pair, link, cmd, rng);
            // Bob's fixed raw->normalized conversion uses the nominal LO.
            const double q = out.raw / lo_nominal_scale +
                             baseline[static_cast<std::size_t>(run)];
            acc += q;
            acc2 += q * q;
        }
        const double mean = acc / opt.samples_per_point;
        rep.per_run_means[static_cast<std::size_t>(run)][static_cast<std::size_t>(p_idx)] = mean;
        rep.per_run_stds[static_cast<std::size_t>(run)][static_cast<std::size_t>(p_idx)] =
            std::sqrt(std::max(0.0, (acc2 - acc * mean) / (opt.samples_per_point - 1)));
    });

    std::vector<double> phases(static_cast<std::size_t>(opt.phase_steps));
    for (int j = 0; j < opt.phase_steps; ++j)
        phases[static_cast<std::size_t>(j)] =
            2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(opt.phase_steps);
    double amp_sum = 0.0;
    for (int k = 0; k < opt.n_runs; ++k) {
        const CosineFit fit =
            fit_cosine(phases, rep.per_run_means[static_cast<std::size_t>(k)]);
        rep.per_run_amplitude[static_cast<std::size_t>(k)] = fit.amplitude;
        amp_sum += fit.amplitude;
    }
    rep.mean_amplitude = amp_sum / opt.n_runs;
    rep.reproducibility = reproducibility(rep.per_run_means);
    rep.amplitude_precision =
        (rep.mean_amplitude > 0.0) ? rep.reproducibility / rep.mean_amplitude : 0.0;
    return rep;
}

}  // namespace qkdsim
