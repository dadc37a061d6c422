#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "optics.hpp"
#include "rng.hpp"

namespace qkdsim {

struct UnreachableSetpoint : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dual-electrode intensity/phase modulator driven by a gated voltage pulse.
struct ModulatorSpec {
    double v_pi = 5.0;                 // volts
    double gate_duration = 70e-9;      // full support of the electrical gate
    double edge_time = 10e-9;          // raised-cosine edge on each side
    double timing_offset_sigma = 0.0;  // per-pulse gate/pulse jitter, seconds

    void validate() const {
        if (!(v_pi > 0.0)) throw std::invalid_argument("ModulatorSpec: v_pi must be > 0");
        if (!(gate_duration > 0.0))
            throw std::invalid_argument("ModulatorSpec: gate_duration must be > 0");
        if (!(edge_time >= 0.0) || edge_time > gate_duration / 2.0)
            throw std::invalid_argument("ModulatorSpec: edge_time must be in [0, gate/2]");
        if (!(timing_offset_sigma >= 0.0))
            throw std::invalid_argument("ModulatorSpec: timing_offset_sigma must be >= 0");
    }
};

struct DriveCommand {
    double v1 = 0.0;
    double v2 = 0.0;
    double target_phase = 0.0;
    double target_photons = 0.0;
};

// Field transmission t = (e^{i pi v1/v_pi} + e^{i pi v2/v_pi}) / 2.
// |t| <= 1 always; the common-mode voltage sets the phase, the differential
// voltage the attenuation.
inline complexd dual_drive_transfer(const ModulatorSpec& spec, double v1, double v2) {
    spec.validate();
    const double k = std::numbers::pi / spec.v_pi;
    return 0.5 * (std::polar(1.0, k * v1) + std::polar(1.0, k * v2));
}

// Solve the drive voltages for a target output. Branch choice: v1+v2 carries
// the phase, v1-v2 in [0, v_pi] carries the amplitude (cos >= 0 branch).
inline DriveCommand solve_drive(const ModulatorSpec& spec, double input_photons,
                                double target_photons, double target_phase) {
    spec.validate();
    if (!(input_photons > 0.0))
        throw std::invalid_argument("solve_drive: input_photons must be > 0");
    if (!(target_photons >= 0.0))
        throw std::invalid_argument("solve_drive: target_photons must be >= 0");
    const double t_abs = std::sqrt(target_photons / input_photons);
    if (t_abs > 1.0 + 1e-12)
        throw UnreachableSetpoint("solve_drive: attenuation-only device, target exceeds input");
    const double two_vpi_over_pi = 2.0 * spec.v_pi / std::numbers::pi;
    const double dv = two_vpi_over_pi * std::acos(std::min(1.0, t_abs));
    const double sv = two_vpi_over_pi * target_phase;
    DriveCommand cmd;
    cmd.v1 = 0.5 * (sv + dv);
    cmd.v2 = 0.5 * (sv - dv);
    cmd.target_phase = target_phase;
    cmd.target_photons = target_photons;
    return cmd;
}

namespace detail {

// Gate envelope g(x), x measured from the gate center: flat top of width
// gate_duration - 2*edge_time, raised-cosine edges reaching zero at
// +/- gate_duration/2.
inline double gate_shape(const ModulatorSpec& spec, double x) {
    const double h = spec.gate_duration / 2.0;
    const double ax = std::abs(x);
    if (ax >= h) return 0.0;
    const double flat = h - spec.edge_time;
    if (ax <= flat) return 1.0;
    return 0.5 * (1.0 + std::cos(std::numbers::pi * (ax - flat) / spec.edge_time));
}

// Cumulative integral of gate_shape from -gate/2 to x (closed form).
inline double gate_shape_integral(const ModulatorSpec& spec, double x) {
    const double h = spec.gate_duration / 2.0;
    const double e = spec.edge_time;
    const double flat = h - e;
    const auto edge_piece = [&](double a) {
        // integral of 0.5(1 + cos(pi (u - flat)/e)) du from flat to a, a in [flat, h]
        return 0.5 * ((a - flat) + (e / std::numbers::pi) *
                                       std::sin(std::numbers::pi * (a - flat) / e));
    };
    const auto cum = [&](double a) {  // integral from 0 to a >= 0
        if (a <= 0.0) return 0.0;
        if (a <= flat) return a;
        if (a >= h) return flat + (e > 0.0 ? edge_piece(h) : 0.0);
        return flat + (e > 0.0 ? edge_piece(a) : 0.0);
    };
    if (x >= 0.0) return cum(h) + cum(x);
    return cum(h) - cum(-x);
}

}  // namespace detail

// Overlap of a rectangular pulse with the gate, normalized to 1 at perfect
// centering: non-increasing and symmetric in the center offset, 0 once the
// pulse and gate supports no longer intersect.
inline double gate_overlap_factor(const ModulatorSpec& spec, double pulse_center,
                                  double gate_center, double pulse_duration) {
    spec.validate();
    if (!(pulse_duration > 0.0))
        throw std::invalid_argument("gate_overlap_factor: pulse_duration must be > 0");
    const auto integral = [&](double offset) {
        const double lo = offset - pulse_duration / 2.0;
        const double hi = offset + pulse_duration / 2.0;
        return detail::gate_shape_integral(spec, hi) - detail::gate_shape_integral(spec, lo);
    };
    const double at_center = integral(0.0);
    if (at_center <= 0.0) return 0.0;
    return integral(pulse_center - gate_center) / at_center;
}

namespace detail {

// 16-point Gauss-Legendre rule on [-1, 1] (positive half; the rule is
// symmetric). Exact to machine precision for the smooth edge integrands
// below, verified against dense Riemann sums in the test suite.
inline constexpr double kGl16Nodes[8] = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
    0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
    0.9445750230732326, 0.9894009349916499};
inline constexpr double kGl16Weights[8] = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
    0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
    0.0622535239386479, 0.0271524594117541};

// Integral of the instantaneous transfer t(g(x)) over [a, b] where the gate
// envelope varies (edge regions); k1 = pi v1 / v_pi, k2 = pi v2 / v_pi.
inline complexd integrate_edge_transfer(const ModulatorSpec& spec, double k1, double k2,
                                        double a, double b) {
    if (b <= a) return {0.0, 0.0};
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    complexd acc{0.0, 0.0};
    for (int i = 0; i < 8; ++i) {
        for (double sgn : {-1.0, 1.0}) {
            const double x = mid + sgn * half * kGl16Nodes[i];
            const double g = gate_shape(spec, x);
            acc += kGl16Weights[i] *
                   (0.5 * (std::polar(1.0, k1 * g) + std::polar(1.0, k2 * g)));
        }
    }
    return acc * half;
}

}  // namespace detail

// Effective field transmission of the gated modulator for a pulse whose
// center is offset from the gate center: the time average of the transfer
// with the gate envelope applied to the drive voltages. For a pulse fully
// inside the flat top this is exactly dual_drive_transfer(v1, v2). Outside
// the gate the drive is zero and the device is transparent (t = 1), so the
// reference pulse arriving between gates passes unmodulated.
inline complexd gated_transfer(const ModulatorSpec& spec, double v1, double v2,
                               double center_offset, double pulse_duration) {
    const double lo = center_offset - pulse_duration / 2.0;
    const double hi = center_offset + pulse_duration / 2.0;
    const double h = spec.gate_duration / 2.0;
    const double flat = h - spec.edge_time;
    const complexd t_flat = dual_drive_transfer(spec, v1, v2);
    if (lo >= -flat && hi <= flat) return t_flat;

    const double k1 = std::numbers::pi * v1 / spec.v_pi;
    const double k2 = std::numbers::pi * v2 / spec.v_pi;
    const auto clip = [&](double a, double b) {
        return std::make_pair(std::max(lo, a), std::min(hi, b));
    };
    complexd acc{0.0, 0.0};
    // Ungated tails: g = 0, transparent.
    if (lo < -h) acc += complexd{std::min(hi, -h) - lo, 0.0};
    if (hi > h) acc += complexd{hi - std::max(lo, h), 0.0};
    // Flat top: exact.
    if (auto [a, b] = clip(-flat, flat); b > a) acc += t_flat * (b - a);
    // Raised-cosine edges.
    if (auto [a, b] = clip(-h, -flat); b > a)
        acc += detail::integrate_edge_transfer(spec, k1, k2, a, b);
    if (auto [a, b] = clip(flat, h); b > a)
        acc += detail::integrate_edge_transfer(spec, k1, k2, a, b);
    return acc / pulse_duration;
}

// First and second moments of the gated transfer under the Gaussian timing
// jitter, evaluated by deterministic quadrature. mean_energy is what a slow
// power meter reports (it averages |t|^2 over many pulses); mean_amplitude
// is what phase-sensitive averaging retains. The gap between the two is the
// jitter-scattered power that coherent estimates miss.
struct TransferMoments {
    complexd mean_amplitude{1.0, 0.0};
    double mean_energy = 1.0;
};

inline TransferMoments jitter_averaged_transfer(const ModulatorSpec& spec, double v1,
                                                double v2, double pulse_duration) {
    spec.validate();
    const double sigma = spec.timing_offset_sigma;
    if (sigma <= 0.0) {
        const complexd t = gated_transfer(spec, v1, v2, 0.0, pulse_duration);
        return {t, std::norm(t)};
    }
    // Composite Simpson over +/-5 sigma, renormalized by the quadrature
    // weight mass so the truncated tails do not bias the moments.
    constexpr int kIntervals = 160;  // even
    const double lo = -5.0 * sigma;
    const double step = (2.0 * 5.0 * sigma) / kIntervals;
    complexd first{0.0, 0.0};
    double second = 0.0;
    double mass = 0.0;
    for (int i = 0; i <= kIntervals; ++i) {
        const double delta = lo + step * static_cast<double>(i);
        const double u = delta / sigma;
        const double pdf = std::exp(-0.5 * u * u);
        const double simpson = (i == 0 || i == kIntervals) ? 1.0 : ((i % 2 == 1) ? 4.0 : 2.0);
        const double w = simpson * pdf;
        const complexd t = gated_transfer(spec, v1, v2, delta, pulse_duration);
        first += w * t;
        second += w * std::norm(t);
        mass += w;
    }
    return {first / mass, second / mass};
}

// Apply the modulator to a pulse. The per-pulse Gaussian timing offset models
// the residual jitter between the optical pulse and the electrical gate; it
// turns into a photon-number (and phase) error that grows with modulation
// depth, because near extinction the transmission is steep in the drive.
inline CoherentPulse modulate(const ModulatorSpec& spec, const DriveCommand& cmd,
                              const CoherentPulse& in, Rng& rng) {
    spec.validate();
    if (cmd.target_photons > in.photons() * (1.0 + 1e-9))
        throw UnreachableSetpoint("modulate: target exceeds available input photons");
    const double offset =
        spec.timing_offset_sigma > 0.0 ? rng.gaussian(0.0, spec.timing_offset_sigma) : 0.0;
    const complexd t_eff = gated_transfer(spec, cmd.v1, cmd.v2, offset, in.duration);
    CoherentPulse out = in;
    out.amplitude = in.amplitude * t_eff;
    return out;
}

}  // namespace qkdsim
