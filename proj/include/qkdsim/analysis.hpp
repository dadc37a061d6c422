#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "homodyne.hpp"

namespace qkdsim {

struct InsufficientPhaseCoverage : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct CosineFit {
    double amplitude = 0.0;      // A >= 0
    double phase_offset = 0.0;   // phi0 in (-pi, pi]
    double offset = 0.0;         // constant term c
    double rms_residual = 0.0;
    double amplitude_std_err = 0.0;  // from residual scatter
};

// Least-squares fit of mean(phi) = A cos(phi - phi0) + c, linear in the
// basis {cos phi, sin phi, 1}.
inline CosineFit fit_cosine(std::span<const double> phases, std::span<const double> means) {
    if (phases.size() != means.size())
        throw std::invalid_argument("fit_cosine: phases/means size mismatch");
    const std::size_t n = phases.size();
    if (n < 4) throw InsufficientPhaseCoverage("fit_cosine: need at least 4 points");
    const auto [mn, mx] = std::minmax_element(phases.begin(), phases.end());
    if (!(*mx - *mn > std::numbers::pi))
        throw InsufficientPhaseCoverage("fit_cosine: phases must span more than pi");

    // Normal equations for [a, b, c] with model a cos + b sin + c.
    double scc = 0, scs = 0, sc = 0, sss = 0, ss = 0, sn = static_cast<double>(n);
    double syc = 0, sys = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double co = std::cos(phases[i]);
        const double si = std::sin(phases[i]);
        scc += co * co;
        scs += co * si;
        sc += co;
        sss += si * si;
        ss += si;
        syc += means[i] * co;
        sys += means[i] * si;
        sy += means[i];
    }
    // 3x3 solve by Cramer's rule.
    const double m[3][3] = {{scc, scs, sc}, {scs, sss, ss}, {sc, ss, sn}};
    const double rhs[3] = {syc, sys, sy};
    const auto det3 = [](const double a[3][3]) {
        return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
               a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
               a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    };
    const double d = det3(m);
    if (std::abs(d) < 1e-12) throw InsufficientPhaseCoverage("fit_cosine: degenerate phase grid");
    double sol[3];
    for (int k = 0; k < 3; ++k) {
        double mk[3][3];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) mk[r][c] = (c == k) ? rhs[r] : m[r][c];
        sol[k] = det3(mk) / d;
    }

    CosineFit fit;
    fit.amplitude = std::hypot(sol[0], sol[1]);
    fit.phase_offset = std::atan2(sol[1], sol[0]);
    fit.offset = sol[2];

    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double model = sol[0] * std::cos(phases[i]) + sol[1] * std::sin(phases[i]) + sol[2];
        ss_res += (means[i] - model) * (means[i] - model);
    }
    fit.rms_residual = std::sqrt(ss_res / static_cast<double>(n));
    if (n > 3) {
        const double sigma2 = ss_res / static_cast<double>(n - 3);
        // var(A) ~ 2 sigma^2 / n for a uniform phase grid
        fit.amplitude_std_err = std::sqrt(2.0 * sigma2 / static_cast<double>(n));
    }
    return fit;
}

// Mean photon number of a coherent state with fitted quadrature amplitude A
// (N0 = 1/2 convention): n = A^2 / 2.
inline double photons_from_amplitude(double amplitude) {
    if (!(amplitude >= 0.0))
        throw std::invalid_argument("photons_from_amplitude: amplitude must be >= 0");
    return amplitude * amplitude / 2.0;
}

// Symmetric percentage difference between two photon-number estimates:
// 200 |n1 - n2| / (n1 + n2).
inline double comparison_error(double n1, double n2) {
    if (!(n1 >= 0.0) || !(n2 >= 0.0) || !(n1 + n2 > 0.0))
        throw std::invalid_argument("comparison_error: photon numbers must be >= 0, sum > 0");
    return 200.0 * std::abs(n1 - n2) / (n1 + n2);
}

struct ComparisonRow {
    double n_standard = 0.0;
    double n_homodyne = 0.0;
    double error_percent = 0.0;
};

// Run-to-run reproducibility: per phase step, the sample std of that step's
// mean across runs; then the average over steps.
inline double reproducibility(const std::vector<std::vector<double>>& per_run_means) {
    if (per_run_means.size() < 2)
        throw InsufficientData("reproducibility: need at least 2 runs");
    const std::size_t steps = per_run_means.front().size();
    if (steps == 0) throw InsufficientData("reproducibility: runs are empty");
    for (const auto& run : per_run_means)
        if (run.size() != steps)
            throw std::invalid_argument("reproducibility: runs must have equal length");
    const double n_runs = static_cast<double>(per_run_means.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < steps; ++j) {
        double mean = 0.0;
        for (const auto& run : per_run_means) mean += run[j];
        mean /= n_runs;
        double var = 0.0;
        for (const auto& run : per_run_means) var += (run[j] - mean) * (run[j] - mean);
        var /= (n_runs - 1.0);
        acc += std::sqrt(var);
    }
    return acc / static_cast<double>(steps);
}

}  // namespace qkdsim
