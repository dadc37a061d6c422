#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qkdsim {

// Quantum channel seen by the reverse-reconciliation analysis. Variances are
// in shot-noise units (N0 = 1); noise is referred to the channel input.
struct ChannelParams {
    double transmission = 1.0;   // G in (0, 1]
    double epsilon_excess = 0.0; // excess noise at channel input, shot units

    double chi_line() const {
        return (1.0 - transmission) / transmission + epsilon_excess;
    }

    void validate() const {
        if (!(transmission > 0.0) || transmission > 1.0)
            throw std::invalid_argument("ChannelParams: transmission must be in (0, 1]");
        if (!(epsilon_excess >= 0.0))
            throw std::invalid_argument("ChannelParams: epsilon_excess must be >= 0");
    }
};

inline ChannelParams channel_from_loss(double loss_db, double epsilon_excess = 0.0) {
    if (!(loss_db >= 0.0)) throw std::invalid_argument("channel_from_loss: loss must be >= 0 dB");
    ChannelParams c{std::pow(10.0, -loss_db / 10.0), epsilon_excess};
    c.validate();
    return c;
}

// Bob's detection chain: overall efficiency eta (losses between the channel
// output and the detector) and electronic noise v_el in shot units.
struct DetectionParams {
    double eta = 0.5754399373;  // 2.4 dB receiver loss
    double v_el = 0.01;         // crossover 1e6 photons at LO 1e8

    double chi_hom() const { return (1.0 - eta) / eta + v_el / eta; }

    void validate() const {
        if (!(eta > 0.0) || eta > 1.0)
            throw std::invalid_argument("DetectionParams: eta must be in (0, 1]");
        if (!(v_el >= 0.0)) throw std::invalid_argument("DetectionParams: v_el must be >= 0");
    }
};

enum class KeyRateMode {
    Ideal,      // perfect detection; all loss/noise attributed to Eve
    Realistic,  // trusted receiver: Eve cannot exploit eta / v_el
};

struct KeyRateParams {
    double modulation_variance = 6.0;  // V_A, shot units
    double reconciliation_efficiency = 1.0;
    KeyRateMode mode = KeyRateMode::Realistic;

    void validate() const {
        if (!(modulation_variance > 0.0))
            throw std::invalid_argument("KeyRateParams: modulation variance must be > 0");
        if (!(reconciliation_efficiency > 0.0) || reconciliation_efficiency > 1.0)
            throw std::invalid_argument("KeyRateParams: efficiency must be in (0, 1]");
    }
};

struct KeyRateResult {
    double i_ab = 0.0;     // Alice-Bob mutual information, bits/pulse
    double i_be = 0.0;     // Bob-Eve mutual information, bits/pulse
    double delta_i = 0.0;  // beta * I_AB - I_BE (not clamped)
    double chi_line = 0.0;
    double chi_hom = 0.0;
};

// Secret information rate against individual attacks, reverse reconciliation,
// Gaussian modulation of coherent states with variance V_A (V = V_A + 1).
//
// Ideal mode:      dI = 1/2 log2[(V+chi)/(1+chi)] - 1/2 log2[G^2 (V+chi)(1/V+chi)]
// Realistic mode:  dI = 1/2 log2(V_B|E / V_B|A) with
//                  V_B|A = eta (G (1+chi_line) + chi_hom)
//                  V_B|E = eta (1/(G (1/V+chi_line)) + chi_hom)
// The two coincide for eta = 1, v_el = 0.
inline KeyRateResult key_rate_rr_individual(const ChannelParams& channel,
                                            const DetectionParams& detection,
                                            const KeyRateParams& params) {
    channel.validate();
    detection.validate();
    params.validate();

    const double g = channel.transmission;
    const double v = params.modulation_variance + 1.0;
    const double chi = channel.chi_line();
    const double beta = params.reconciliation_efficiency;
    const auto log2half = [](double x) { return 0.5 * std::log2(x); };

    KeyRateResult res;
    res.chi_line = chi;

    if (params.mode == KeyRateMode::Ideal) {
        res.chi_hom = 0.0;
        res.i_ab = log2half((v + chi) / (1.0 + chi));
        res.i_be = log2half(g * g * (v + chi) * (1.0 / v + chi));
        res.delta_i = beta * res.i_ab - res.i_be;
        return res;
    }

    const double eta = detection.eta;
    const double chi_hom = detection.chi_hom();
    res.chi_hom = chi_hom;
    const double v_b = eta * (g * (v + chi) + chi_hom);
    const double v_b_given_a = eta * (g * (1.0 + chi) + chi_hom);
    const double v_b_given_e = eta * (1.0 / (g * (1.0 / v + chi)) + chi_hom);
    res.i_ab = log2half(v_b / v_b_given_a);
    res.i_be = log2half(v_b / v_b_given_e);
    res.delta_i = beta * res.i_ab - res.i_be;
    return res;
}

// Secret bits per second at a given pulse repetition rate; a negative
// information rate yields no key.
inline double bits_per_second(double delta_i, double repetition_rate_hz) {
    if (!(repetition_rate_hz >= 0.0))
        throw std::invalid_argument("bits_per_second: repetition rate must be >= 0");
    return std::max(0.0, delta_i) * repetition_rate_hz;
}

}  // namespace qkdsim
