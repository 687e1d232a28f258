// analysis.hpp — entanglement witnesses, phase and contrast fits, and
// bootstrap error bars.

#pragma once

#include "ipe/core.hpp"
#include "ipe/measure.hpp"

#include <array>
#include <functional>
#include <span>
#include <vector>

namespace ipe {

// <psi| rho |psi>.
double fidelity(const Operator& rho, const Ket& psi);

// Two-qubit concurrence (spin-flip construction); 0 for separable
// states, 1 for maximally entangled ones.
double concurrence(const Operator& rho);

struct ChshResult {
    double value = 0.0;
    // Bloch measurement axes {a, a', b, b'} achieving `value`
    // (ion first, photon second).
    std::array<std::array<double, 3>, 4> axes{};
    // Analytic maximum from the correlation matrix, used as a
    // certificate for the optimizer.
    double horodecki_bound = 0.0;
};

// Maximizes |E(a,b) - E(a,b') + E(a',b) + E(a',b')| over measurement
// axes: coarse grid over the photon axes (the ion axes are then optimal
// in closed form) followed by Nelder-Mead refinement.
ChshResult chsh_optimal(const Operator& rho);

// Phase of the stored coherence, arg <D'V| rho |DH>, in (-pi, pi]. For a
// state cos(a)|DH> + e^{i phi} sin(a)|D'V> this returns phi. Throws when
// the coherence magnitude is below `floor`.
double coherence_phase(const Operator& rho, double floor = 1e-9);

// The complex coherence itself (same ordering convention).
cx stored_coherence(const Operator& rho);

struct SinusoidFit {
    double contrast = 0.0;     // 2A, so a perfect maximally entangled family gives 1
    double phase_offset = 0.0; // phi0 in A cos(phi + phi0)
    double residual_rms = 0.0;
    std::vector<double> fit_re;
    std::vector<double> fit_im;
};

// Simultaneous least squares of re_k ~ A cos(phi_k + phi0) and
// im_k ~ A cos(phi_k + phi0 - pi/2). Requires >= 4 distinct phases.
SinusoidFit sinusoid_fit(std::span<const double> phases,
                         std::span<const double> re_values,
                         std::span<const double> im_values);

struct PhaseBinPoint {
    double time = 0.0;  // mean detection time of the bin
    double phase = 0.0;
    double stddev = 0.0;
    std::int64_t events = 0;
};

// Splits events into equal-population detection-time bins, reconstructs
// the state of each bin and extracts the coherence phase with a
// bootstrap error. Throws when a bin falls below min_events.
std::vector<PhaseBinPoint> phase_vs_timebin(const std::vector<DetectionEvent>& events,
                                            int bins = 5,
                                            int min_events = 500,
                                            int resamples = 100,
                                            std::uint64_t seed = 1);

struct SlopeFit {
    double slope = 0.0;
    double slope_std = 0.0;
    double intercept = 0.0;
};

// Weighted linear fit of (unwrapped) phase against time.
SlopeFit phase_slope(const std::vector<PhaseBinPoint>& points);

// Standard deviation of `estimator` over multinomial resamples of each
// setting's detected counts (per-setting totals preserved). Resamples
// where the estimator throws are dropped; if `failures` is given it
// receives their number, and more than 1% of them emits a warning on
// stderr.
double bootstrap_std(const CountTable& counts,
                     const std::function<double(const CountTable&)>& estimator,
                     int resamples,
                     std::uint64_t seed,
                     int* failures = nullptr);

// Multinomial resample of a table (helper shared by the bootstrap
// routines).
CountTable resample_counts(const CountTable& counts, Rng& rng);

struct WitnessReport {
    double fidelity = 0.0, fidelity_std = 0.0;
    double concurrence = 0.0, concurrence_std = 0.0;
    double chsh = 0.0, chsh_std = 0.0;
    double coherence_phase = 0.0, coherence_phase_std = 0.0;
};

// Reconstructs the state and evaluates all witnesses against the target,
// with one shared bootstrap pass for the standard deviations.
WitnessReport witness_report(const CountTable& counts, const Ket& target,
                             int resamples, std::uint64_t seed);

void write_witness_report(std::ostream& os, const WitnessReport& report);

} // namespace ipe
