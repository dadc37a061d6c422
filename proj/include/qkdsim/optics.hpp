#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

#include "rng.hpp"

namespace qkdsim {

using complexd = std::complex<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Intensity transmission of a lossy element, G = 10^(-dB/10).
inline double db_to_transmission(double loss_db) { return std::pow(10.0, -loss_db / 10.0); }

inline double transmission_to_db(double g) { return -10.0 * std::log10(g); }

// ---------------------------------------------------------------------------
// Polarization
// ---------------------------------------------------------------------------

using JonesVector = std::array<complexd, 2>;

inline complexd inner(const JonesVector& a, const JonesVector& b) {
    return std::conj(a[0]) * b[0] + std::conj(a[1]) * b[1];
}

inline double norm2(const JonesVector& v) { return std::norm(v[0]) + std::norm(v[1]); }

inline JonesVector normalized(const JonesVector& v) {
    const double n = std::sqrt(norm2(v));
    if (n == 0.0) throw std::invalid_argument("JonesVector: cannot normalize null vector");
    return {v[0] / n, v[1] / n};
}

// sin of the angle between two unit polarization states (0 = identical,
// 1 = orthogonal). Used as the "polarization distance" that drives the
// residual balance drift.
inline double polarization_distance(const JonesVector& a, const JonesVector& b) {
    const double c2 = std::min(1.0, std::norm(inner(a, b)) / (norm2(a) * norm2(b)));
    return std::sqrt(1.0 - c2);
}

struct JonesMatrix {
    // Row-major 2x2 complex matrix.
    std::array<complexd, 4> m{complexd{1, 0}, complexd{0, 0}, complexd{0, 0}, complexd{1, 0}};

    static JonesMatrix identity() { return {}; }

    // Ideal Faraday-mirror round-trip matrix [[0,1],[-1,0]].
    static JonesMatrix faraday_mirror() {
        JonesMatrix fm;
        fm.m = {complexd{0, 0}, complexd{1, 0}, complexd{-1, 0}, complexd{0, 0}};
        return fm;
    }

    static JonesMatrix rotation(double theta) {
        JonesMatrix r;
        const double c = std::cos(theta), s = std::sin(theta);
        r.m = {complexd{c, 0}, complexd{-s, 0}, complexd{s, 0}, complexd{c, 0}};
        return r;
    }

    // exp(i (a1*sx + a2*sy + a3*sz)) via the SU(2) closed form.
    static JonesMatrix su2(double a1, double a2, double a3) {
        JonesMatrix j;
        const double r = std::sqrt(a1 * a1 + a2 * a2 + a3 * a3);
        const double c = std::cos(r);
        const double sinc = (r < 1e-12) ? 1.0 : std::sin(r) / r;
        const complexd i{0, 1};
        j.m[0] = c + i * sinc * a3;
        j.m[1] = complexd{sinc * a2, sinc * a1};
        j.m[2] = complexd{-sinc * a2, sinc * a1};
        j.m[3] = c - i * sinc * a3;
        return j;
    }

    // Haar-ish random U(2): a unit quaternion (q0 + i q.sigma) gives uniform
    // SU(2); a random global phase extends it to U(2).
    static JonesMatrix random_unitary(Rng& rng) {
        double q[4];
        double n2 = 0.0;
        for (double& q_k : q) {
            q_k = rng.gaussian();
            n2 += q_k * q_k;
        }
        const double n = std::sqrt(n2);
        for (double& q_k : q) q_k /= n;
        JonesMatrix u;
        u.m[0] = complexd{q[0], q[3]};
        u.m[1] = complexd{q[2], q[1]};
        u.m[2] = complexd{-q[2], q[1]};
        u.m[3] = complexd{q[0], -q[3]};
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        return u * complexd{std::cos(phi), std::sin(phi)};
    }

    JonesMatrix operator*(const JonesMatrix& o) const {
        JonesMatrix r;
        r.m[0] = m[0] * o.m[0] + m[1] * o.m[2];
        r.m[1] = m[0] * o.m[1] + m[1] * o.m[3];
        r.m[2] = m[2] * o.m[0] + m[3] * o.m[2];
        r.m[3] = m[2] * o.m[1] + m[3] * o.m[3];
        return r;
    }

    JonesMatrix operator*(complexd s) const {
        JonesMatrix r = *this;
        for (auto& e : r.m) e *= s;
        return r;
    }

    JonesVector apply(const JonesVector& v) const {
        return {m[0] * v[0] + m[1] * v[1], m[2] * v[0] + m[3] * v[1]};
    }

    JonesMatrix transpose() const {
        JonesMatrix r = *this;
        std::swap(r.m[1], r.m[2]);
        return r;
    }

    JonesMatrix adjoint() const {
        JonesMatrix r = transpose();
        for (auto& e : r.m) e = std::conj(e);
        return r;
    }

    complexd det() const { return m[0] * m[3] - m[1] * m[2]; }

    double frobenius_distance(const JonesMatrix& o) const {
        double d = 0.0;
        for (int i = 0; i < 4; ++i) d += std::norm(m[i] - o.m[i]);
        return std::sqrt(d);
    }

    bool is_unitary(double tol = 1e-10) const {
        const JonesMatrix p = adjoint() * (*this);
        return p.frobenius_distance(identity()) < tol;
    }
};

// ---------------------------------------------------------------------------
// Pulses
// ---------------------------------------------------------------------------

// A coherent pulse: |amplitude|^2 is the mean photon number, arg(amplitude)
// the optical phase relative to the train's frame.
struct CoherentPulse {
    complexd amplitude{0.0, 0.0};
    JonesVector polarization{complexd{1, 0}, complexd{0, 0}};
    double emit_time = 0.0;      // seconds
    double duration = 50e-9;     // seconds

    double photons() const { return std::norm(amplitude); }
    double phase() const { return std::arg(amplitude); }

    static CoherentPulse make(double photons, double phase, JonesVector pol = {complexd{1, 0}, complexd{0, 0}},
                              double emit_time = 0.0, double duration = 50e-9) {
        if (!(photons >= 0.0)) throw std::invalid_argument("CoherentPulse: photons must be >= 0");
        if (!(duration > 0.0)) throw std::invalid_argument("CoherentPulse: duration must be > 0");
        if (std::abs(norm2(pol) - 1.0) > 1e-9)
            throw std::invalid_argument("CoherentPulse: polarization must be unit norm");
        CoherentPulse p;
        p.amplitude = std::polar(std::sqrt(photons), phase);
        p.polarization = pol;
        p.emit_time = emit_time;
        p.duration = duration;
        return p;
    }
};

// Attenuate a pulse's mean photon number by loss_db (photons scale by
// 10^(-dB/10), i.e. amplitude by 10^(-dB/20)).
inline CoherentPulse apply_loss(CoherentPulse pulse, double loss_db) {
    if (!(loss_db >= 0.0)) throw std::invalid_argument("apply_loss: loss must be >= 0 dB");
    pulse.amplitude *= std::pow(10.0, -loss_db / 20.0);
    return pulse;
}

// ---------------------------------------------------------------------------
// Fiber
// ---------------------------------------------------------------------------

struct FiberChannel {
    double length_km = 1.0;
    double loss_db_per_km = 0.2;          // 1550 nm telecom fiber
    double excess_loss_db = 0.0;          // splices, connectors
    double birefringence_drift_time_s = kInf;  // correlation time; inf = frozen
    double birefringence_scale = 1.0;     // rad scale of the su(2) coordinates; 0 = identity
    double phase_drift_rate = 1.0;        // rad/sqrt(s), Wiener phase between pulses
    double backscatter_coeff = 1e-8;      // shot-units of variance per LO photon per extra train

    double total_loss_db() const { return length_km * loss_db_per_km + excess_loss_db; }
    double transmission() const { return db_to_transmission(total_loss_db()); }

    void validate() const {
        if (!(length_km >= 0.0)) throw std::invalid_argument("FiberChannel: length must be >= 0");
        if (!(loss_db_per_km >= 0.0) || !(excess_loss_db >= 0.0))
            throw std::invalid_argument("FiberChannel: losses must be >= 0");
        if (!(birefringence_drift_time_s > 0.0))
            throw std::invalid_argument("FiberChannel: drift time must be > 0");
        if (!(birefringence_scale >= 0.0) || !(backscatter_coeff >= 0.0) ||
            !(phase_drift_rate >= 0.0))
            throw std::invalid_argument("FiberChannel: scales must be >= 0");
    }
};

namespace detail {

// Gaussian knot value for (seed, axis, index), hashed — no sequential state,
// so J(t) is a pure function of (channel, t, seed).
inline double knot_gaussian(std::uint64_t seed, std::uint64_t axis, std::int64_t index) {
    std::uint64_t h = stream_seed(seed, axis, static_cast<std::uint64_t>(index));
    const double u1 = (static_cast<double>(splitmix64(h) >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Catmull-Rom interpolation through hashed Gaussian knots spaced one
// correlation time apart: C1-smooth, decorrelates beyond the knot spacing.
inline double knot_track(std::uint64_t seed, std::uint64_t axis, double u) {
    const double fl = std::floor(u);
    const auto i = static_cast<std::int64_t>(fl);
    const double f = u - fl;
    const double p0 = knot_gaussian(seed, axis, i - 1);
    const double p1 = knot_gaussian(seed, axis, i);
    const double p2 = knot_gaussian(seed, axis, i + 1);
    const double p3 = knot_gaussian(seed, axis, i + 2);
    return 0.5 * ((2.0 * p1) + (-p0 + p2) * f + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * f * f +
                  (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * f * f * f);
}

}  // namespace detail

// Unitary Jones matrix of the fiber at time t. Drift is a stationary smooth
// process on the su(2) coordinates with correlation time
// birefringence_drift_time_s; with an infinite drift time the matrix is
// frozen at its t=0 value.
inline JonesMatrix fiber_jones(const FiberChannel& channel, double t, std::uint64_t seed) {
    if (channel.birefringence_scale == 0.0) return JonesMatrix::identity();
    const double tau = channel.birefringence_drift_time_s;
    const double u = std::isinf(tau) ? 0.0 : t / tau;
    const double a1 = channel.birefringence_scale * detail::knot_track(seed, 1, u);
    const double a2 = channel.birefringence_scale * detail::knot_track(seed, 2, u);
    const double a3 = channel.birefringence_scale * detail::knot_track(seed, 3, u);
    return JonesMatrix::su2(a1, a2, a3);
}

// Go-&-return operator through a fiber with one-way Jones matrix J and an
// ideal Faraday mirror: J^T * M_FM * J. Equal to det(J) * M_FM for any J
// (Faraday auto-compensation), which the tests verify numerically.
inline JonesMatrix faraday_round_trip(const JonesMatrix& j) {
    return j.transpose() * JonesMatrix::faraday_mirror() * j;
}

// Rayleigh-backscatter noise picked up by the homodyne measurement when more
// than one pulse train occupies the fiber. Linear in LO intensity and in the
// number of extra in-flight trains; zero in single-train operation.
inline double backscatter_noise_variance(const FiberChannel& channel, double lo_photons,
                                         int trains_in_flight) {
    if (trains_in_flight < 1) throw std::invalid_argument("backscatter: trains_in_flight >= 1");
    if (!(lo_photons >= 0.0)) throw std::invalid_argument("backscatter: lo_photons >= 0");
    return channel.backscatter_coeff * lo_photons * static_cast<double>(trains_in_flight - 1);
}

// ---------------------------------------------------------------------------
// Discrete components
// ---------------------------------------------------------------------------

struct ComponentSpec {
    enum class Kind { Coupler, Isolator, PolarizingSplitter, FaradayMirror, Attenuator };

    Kind kind = Kind::Attenuator;
    double split_ratio = 0.5;       // through-port fraction (couplers)
    double pdl_db = 0.0;            // polarization dependent loss
    double insertion_loss_db = 0.0; // direction-independent loss
    double forward_loss_db = 0.0;   // isolators
    double backward_loss_db = 0.0;

    static ComponentSpec coupler(double ratio, double pdl_db = 0.0, double insertion_db = 0.0) {
        if (!(ratio > 0.0 && ratio < 1.0))
            throw std::invalid_argument("coupler: split ratio must be in (0,1)");
        ComponentSpec c;
        c.kind = Kind::Coupler;
        c.split_ratio = ratio;
        c.pdl_db = pdl_db;
        c.insertion_loss_db = insertion_db;
        return c;
    }

    static ComponentSpec isolator(double forward_db = 1.0, double backward_db = 60.0) {
        ComponentSpec c;
        c.kind = Kind::Isolator;
        c.forward_loss_db = forward_db;
        c.backward_loss_db = backward_db;
        return c;
    }

    static ComponentSpec attenuator(double db) {
        ComponentSpec c;
        c.kind = Kind::Attenuator;
        c.insertion_loss_db = db;
        return c;
    }
};

struct CouplerOutput {
    CoherentPulse through;
    CoherentPulse cross;
};

// Split a pulse on a 2x2 coupler. PDL is a diagonal attenuation in the fixed
// H/V axis basis: the V component of the through port (and the H component of
// the cross port) sees the full pdl_db, so the effective split ratio varies
// with input polarization by at most a factor 10^(pdl_db/10) in intensity.
inline CouplerOutput coupler_split(const ComponentSpec& spec, const CoherentPulse& in) {
    if (spec.kind != ComponentSpec::Kind::Coupler)
        throw std::invalid_argument("coupler_split: component is not a coupler");
    const double g_ins = std::pow(10.0, -spec.insertion_loss_db / 20.0);
    const double g_pdl = std::pow(10.0, -spec.pdl_db / 20.0);
    const double rt = std::sqrt(spec.split_ratio);
    const double rc = std::sqrt(1.0 - spec.split_ratio);

    // Unnormalized output Jones vectors (amplitude absorbed afterwards).
    const complexd h = in.polarization[0];
    const complexd v = in.polarization[1];

    CouplerOutput out;
    out.through = in;
    out.cross = in;

    const JonesVector through_vec{in.amplitude * rt * g_ins * h,
                                  in.amplitude * rt * g_ins * g_pdl * v};
    const JonesVector cross_vec{in.amplitude * rc * g_ins * g_pdl * h,
                                in.amplitude * rc * g_ins * v};

    const double nt = std::sqrt(norm2(through_vec));
    const double nc = std::sqrt(norm2(cross_vec));
    out.through.amplitude = nt * std::exp(complexd{0, std::arg(in.amplitude)});
    out.cross.amplitude = nc * std::exp(complexd{0, std::arg(in.amplitude)});
    if (nt > 0.0) out.through.polarization = {through_vec[0] / nt, through_vec[1] / nt};
    if (nc > 0.0) out.cross.polarization = {cross_vec[0] / nc, cross_vec[1] / nc};
    return out;
}

// Pass a pulse through an isolator. Forward transmission is the working
// direction; the reverse direction is suppressed by backward_loss_db.
inline CoherentPulse isolator_pass(const ComponentSpec& spec, const CoherentPulse& in,
                                   bool forward) {
    if (spec.kind != ComponentSpec::Kind::Isolator)
        throw std::invalid_argument("isolator_pass: component is not an isolator");
    return apply_loss(in, forward ? spec.forward_loss_db : spec.backward_loss_db);
}

// Project onto the PBS output ports (H = through, V = reflect).
struct PbsOutput {
    CoherentPulse h_port;
    CoherentPulse v_port;
};

inline PbsOutput pbs_split(const CoherentPulse& in) {
    PbsOutput out;
    out.h_port = in;
    out.v_port = in;
    out.h_port.amplitude = in.amplitude * std::abs(in.polarization[0]);
    out.h_port.polarization = {complexd{1, 0}, complexd{0, 0}};
    out.v_port.amplitude = in.amplitude * std::abs(in.polarization[1]);
    out.v_port.polarization = {complexd{0, 0}, complexd{1, 0}};
    return out;
}

}  // namespace qkdsim
