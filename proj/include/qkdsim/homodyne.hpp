#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "optics.hpp"
#include "rng.hpp"

namespace qkdsim {

struct NoReferenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientData : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Residual imbalance of the pulsed balanced detector. epsilon is the
// deviation of the effective splitting from 1/2; pol_sensitivity converts a
// polarization excursion at the 50/50 coupler (PDL) into additional epsilon.
struct BalanceState {
    double epsilon = 0.0;
    double trim_loss_db = 0.0;        // attenuation used on one arm to trim the balance
    double pol_sensitivity = 0.0;     // d(epsilon)/d(polarization distance)

    double effective_epsilon(double pol_distance = 0.0) const {
        return epsilon + pol_sensitivity * pol_distance;
    }
};

// Detector noise model: raw-unit variance V(n_lo) = v_electr + a * n_lo.
// Raw units follow the difference-current convention (raw = q * 2 sqrt(2 n_lo)
// for normalized quadrature q), which fixes the vacuum slope at a = 4 per LO
// photon; only the ratio v_electr/a (the crossover photon number where
// electronic and shot noise are equal) is physical.
struct NoiseCalibration {
    double v_electr = 4.0e6;
    double a = 4.0;

    double crossover_photons() const { return v_electr / a; }

    static NoiseCalibration from_crossover(double crossover, double slope = 4.0) {
        if (!(crossover >= 0.0) || !(slope > 0.0))
            throw std::invalid_argument("NoiseCalibration: crossover >= 0, slope > 0");
        return {crossover * slope, slope};
    }

    void validate() const {
        if (!(a > 0.0) || !(v_electr >= 0.0))
            throw std::invalid_argument("NoiseCalibration: a > 0 and v_electr >= 0 required");
    }
};

// One homodyne outcome. Convention: vacuum quadrature variance N0 = 1/2
// (std 0.707), normalized = raw / (2 sqrt(2 lo_photons)).
struct HomodyneSample {
    double raw = 0.0;
    double normalized = 0.0;
    double lo_photons = 0.0;

    static HomodyneSample from_normalized(double q, double lo_photons) {
        HomodyneSample s;
        s.normalized = q;
        s.lo_photons = lo_photons;
        s.raw = q * 2.0 * std::sqrt(2.0 * lo_photons);
        return s;
    }
};

// Largest tolerable balance asymmetry before the systematic offset
// 2 eps sqrt(2 n_lo) reaches the vacuum scale: |eps| < 1 / (2 sqrt(2 n_lo)).
inline double balance_epsilon_bound(double n_lo) {
    if (!(n_lo > 0.0)) throw std::invalid_argument("balance_epsilon_bound: n_lo must be > 0");
    return 1.0 / (2.0 * std::sqrt(2.0 * n_lo));
}

// Splitting asymmetry expressed as the coupler ratio deviation in dB:
// 10 log10((1/2 + eps) / (1/2)).
inline double epsilon_to_db(double epsilon) {
    if (!(epsilon > -0.5)) throw std::invalid_argument("epsilon_to_db: epsilon must be > -1/2");
    return 10.0 * std::log10((0.5 + epsilon) / 0.5);
}

// Pulsed homodyne measurement of `signal` against `lo`. The relative phase is
// taken from the two pulse amplitudes (same optical train). Mean in
// normalized units:
//     vis * sqrt(2 n_sig) cos(theta) + 2 eps sqrt(2 n_lo)
// with vis the polarization overlap; variance: shot (1/2) + electronic
// (crossover/n_lo * 1/2) + extra_noise_var.
inline HomodyneSample measure(const CoherentPulse& signal, const CoherentPulse& lo,
                              const BalanceState& bal, const NoiseCalibration& cal,
                              double extra_noise_var, Rng& rng) {
    cal.validate();
    if (!(lo.photons() > 0.0))
        throw NoReferenceError("measure: local oscillator pulse carries no photons");
    if (!(extra_noise_var >= 0.0))
        throw std::invalid_argument("measure: extra_noise_var must be >= 0");
    const double n_lo = lo.photons();
    const double theta = signal.phase() - lo.phase();
    const double vis = std::abs(inner(lo.polarization, signal.polarization));
    const double mean = vis * std::sqrt(2.0 * signal.photons()) * std::cos(theta) +
                        2.0 * bal.epsilon * std::sqrt(2.0 * n_lo);
    const double var =
        0.5 + 0.5 * (cal.crossover_photons() / n_lo) + extra_noise_var;
    return HomodyneSample::from_normalized(mean + std::sqrt(var) * rng.gaussian(), n_lo);
}

struct NoiseFit {
    double v_electr = 0.0;
    double a = 0.0;
    double crossover_photons = 0.0;
    double r_squared = 0.0;
    double rms_relative_residual = 0.0;
};

// Fit V = v_electr + a * n_lo to (lo_photons, variance) points. Weighted
// least squares with weights 1/V^2: sample-variance errors scale with the
// variance itself, and the points span decades, so equal-relative weighting
// is what keeps the small intercept identifiable.
inline NoiseFit fit_noise_curve(std::span<const std::pair<double, double>> points) {
    if (points.size() < 3)
        throw InsufficientData("fit_noise_curve: need at least 3 points");
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : points) {
        if (!(x > 0.0) || !(y > 0.0))
            throw std::invalid_argument("fit_noise_curve: lo photons and variances must be > 0");
        const double w = 1.0 / (y * y);
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    const double det = sw * sxx - sx * sx;
    if (det <= 0.0) throw InsufficientData("fit_noise_curve: degenerate LO grid");
    NoiseFit fit;
    fit.a = (sw * sxy - sx * sy) / det;
    fit.v_electr = (sy * sxx - sx * sxy) / det;
    fit.crossover_photons = fit.v_electr / fit.a;

    double ss_res = 0, ss_tot = 0, rel2 = 0, ybar = 0;
    for (const auto& [x, y] : points) ybar += y;
    ybar /= static_cast<double>(points.size());
    for (const auto& [x, y] : points) {
        const double model = fit.v_electr + fit.a * x;
        ss_res += (y - model) * (y - model);
        ss_tot += (y - ybar) * (y - ybar);
        rel2 += (y - model) * (y - model) / (model * model);
    }
    fit.r_squared = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
    fit.rms_relative_residual = std::sqrt(rel2 / static_cast<double>(points.size()));
    return fit;
}

// Lumped excess noise that brings the total measured std to `total_std`
// on top of shot and electronic noise at the given LO intensity.
inline double excess_noise_for_total_std(double total_std, const NoiseCalibration& cal,
                                         double lo_photons) {
    const double v = total_std * total_std - 0.5 - 0.5 * cal.crossover_photons() / lo_photons;
    return std::max(0.0, v);
}

}  // namespace qkdsim
