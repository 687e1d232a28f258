// dynamics.hpp — bichromatic cavity-mediated Raman photon generation.
//
// Two models of the same process:
//
//  * hamiltonian_full: four atomic levels {S, P, D, D'} with the photon
//    sector {0, 1H, 1V} truncated to a single excitation. Both drive
//    tones and both cavity couplings appear explicitly; written in a
//    frame rotating with tone 1 so the only residual time dependence is
//    the tone beat. Basis: {S0, P0, D1H, D'1V, D0, D'0}.
//
//  * hamiltonian_rotating: the intermediate level adiabatically
//    eliminated, leaving a three-level system {S0, D1H, D'1V} with
//    time-independent effective couplings g_i = rabi_i * proj_i * g /
//    detuning_i. This is the model the Monte Carlo trajectory uses.
//
// Photon leakage (cavity field decay kappa) and Raman scattering losses
// enter as collapse channels of the master equation; scattered
// population is booked in a sink level and counts as a failed sequence,
// never as a photon.

#pragma once

#include "ipe/core.hpp"
#include "ipe/rng.hpp"

#include <array>
#include <functional>
#include <vector>

namespace ipe {

inline constexpr double pi = 3.14159265358979323846;

// Angular frequency from a linear frequency in MHz / Hz.
inline constexpr double mhz(double f) { return 2.0 * pi * 1e6 * f; }
inline constexpr double hz(double f) { return 2.0 * pi * f; }
inline constexpr double usec(double t) { return 1e-6 * t; }

// Frame-reduced level frequencies (the optical offsets common to both
// Raman paths are already removed).
struct LevelFrequencies {
    double omega_s = 0.0;
    double omega_d = 0.0;
    double omega_dp = 0.0;
    double omega_c = 0.0;
};

struct SystemParams {
    // CQED rates, angular (rad/s)
    double g = mhz(1.4);          // atom-cavity coupling
    double kappa = mhz(0.05);     // cavity field decay
    double gamma = mhz(11.2);     // atomic polarization decay of P

    // Raman drive. Amplitudes are calibrated for ~90% photon generation
    // within the pulse; rabi2 carries the detuning ratio so both
    // effective couplings match (mixing angle pi/4).
    double rabi1 = mhz(4.8);      // tone 1 amplitude (drives S -> D, H photon)
    double rabi2 = mhz(4.86);     // tone 2 amplitude (drives S -> D', V photon)
    double detuning1 = mhz(-400); // tone 1 detuning from the S-P transition
    double detuning2 = mhz(-405); // tone 2 detuning from the S-P transition
    double cavity_detuning = mhz(-400); // cavity detuning from P-D
    double zeeman_split = mhz(-5.0);    // omega_D' - omega_D
    double proj1 = 1.0 / 1.4142135623730951; // Clebsch-Gordan / polarization projections
    double proj2 = 1.0 / 1.4142135623730951;
    double raman_phase = 0.0;     // relative phase of the two tones

    // Pulse envelope
    double pulse_duration = usec(40.0);
    double ramp_time = usec(1.0);     // common sin^2 turn-on
    double drive2_delay = 0.0;        // extra turn-on delay of tone 2 (pulse-overlap imperfection)

    // Fraction of Raman scattering events that terminate a sequence.
    // Most scattering returns the atom to S where the transfer restarts;
    // only the branch that falls into the D manifold without a cavity
    // photon is a hard failure.
    double scatter_fail_fraction = 0.065;

    // Deviation of the tone beat from the D-D' splitting. Zero on
    // resonance; a nonzero value makes the measured coherence phase
    // drift as beat_mismatch * detection time.
    double beat_mismatch = 0.0;

    // When set, the full model places the drive tones on the
    // light-shifted two-photon resonance (as an experiment tuned to the
    // observed resonance would), so that its transfer matches the
    // eliminated model. When cleared the tones sit at the bare resonance.
    bool stark_compensated = true;

    // Two-photon detunings of the two paths (zero = Raman resonance).
    double delta1() const { return detuning1 - cavity_detuning; }
    double delta2() const { return detuning2 - (cavity_detuning + zeeman_split) - beat_mismatch; }

    // Tone beat omega1 - omega2 implied by the detunings.
    double beat() const { return (delta1() - delta2()) - zeeman_split; }

    LevelFrequencies levels() const { return {0.0, 0.0, zeeman_split, 0.0}; }

    // Drive envelopes at time t (0..1).
    double envelope1(double t) const;
    double envelope2(double t) const;

    // Effective rate at which Raman scattering removes population from
    // the transfer, already discounted by scatter_fail_fraction.
    double scatter_loss_rate() const;

    // Hard validation; returns soft warnings (adiabaticity etc.).
    std::vector<std::string> validate() const;

    SystemParams with_target(double alpha, double phi) const;
};

struct EffectiveCouplings {
    double g1 = 0.0;
    double g2 = 0.0;
};

// g_i = rabi_i * proj_i * g / detuning_i, evaluated exactly. Throws on a
// zero detuning.
EffectiveCouplings effective_couplings(const SystemParams& p);

// alpha = atan(|g2|/|g1|) in [0, pi/2].
double mixing_angle(const SystemParams& p);

// Joint ion-photon basis used everywhere downstream:
//   index 0 = |D H>, 1 = |D V>, 2 = |D' H>, 3 = |D' V>
// (ion slow, photon fast; ion 0 = D, photon 0 = H).
inline constexpr int kJointDim = 4;

// cos(alpha)|DH> + e^{i phi} sin(alpha)|D'V>.
Ket target_state(double alpha, double phi);

// Eliminated three-level Hamiltonian, basis {S0, D1H, D'1V}.
Operator hamiltonian_rotating(const SystemParams& p);

// Full single-excitation Hamiltonian at time t,
// basis {S0, P0, D1H, D'1V, D0, D'0}. Hermitian for every t.
Operator hamiltonian_full(const SystemParams& p, double t);

// Second-order light shifts (S, D1H, D'1V) produced by the drives and
// the vacuum cavity couplings; used for the dressed resonance.
std::array<double, 3> stark_shifts(const SystemParams& p);

// Lindblad propagation on a fixed time grid with RK4 substeps. Substeps
// are halved until the trace drifts by less than trace_tol over the full
// grid and the solution change between refinements is below it as well.
// Throws on step-size failure.
std::vector<Operator> evolve_master(const std::function<Operator(double)>& hamiltonian,
                                    const Operator& rho0,
                                    const std::vector<Operator>& collapse,
                                    const std::vector<double>& grid,
                                    double trace_tol = 1e-8,
                                    int max_refinements = 14);

// Schrödinger propagation of a pure state (H may be non-Hermitian when a
// loss term is folded in); same refinement policy, keyed on the change
// of the final state between refinements.
std::vector<Ket> evolve_schrodinger(const std::function<Operator(double)>& hamiltonian,
                                    const Ket& psi0,
                                    const std::vector<double>& grid,
                                    double tol = 1e-9,
                                    int max_refinements = 16);

// Precomputed Raman pulse: master-equation evolution of the eliminated
// model plus everything the event Monte Carlo samples from.
// Level order: {S0, D1H, D'1V, D0, D'0, sink}.
struct RamanTrajectory {
    SystemParams params;
    std::vector<double> t;
    std::vector<Operator> rho;          // 6x6 states on the grid
    std::vector<double> intensity_h;    // 2 kappa * population(D1H)
    std::vector<double> intensity_v;    // 2 kappa * population(D'1V)
    std::vector<double> emission_cdf;   // cumulative emitted probability
    double generation_probability = 0.0;

    // Normalized ion-photon state conditioned on a photon leaking out at
    // time `time`. Rank <= 2, supported on {DH, D'V}, expressed in the
    // qubit readout frame (rotating at the true D-D' splitting), so a
    // tone beat away from that splitting shows up as a coherence phase
    // drifting linearly with the detection time. Throws when the
    // one-photon population vanishes there.
    Operator conditional_joint(double time) const;

    // One-photon populations (H, V) at `time` (linear interpolation).
    std::array<double, 2> one_photon_populations(double time) const;

    // Emission time drawn from the normalized pulse shape.
    double sample_emission_time(Rng& rng) const;
};

RamanTrajectory compute_trajectory(const SystemParams& p, int grid_points = 2001);

struct PulseShapes {
    std::vector<double> t;
    std::vector<double> h;
    std::vector<double> v;
};

// Cavity output intensities I_X(t) = 2 kappa * population of the
// one-photon-X level.
PulseShapes emission_pulse(const RamanTrajectory& traj);

// L1 distance between the normalized H and V pulse shapes (0 = perfect
// overlap, 2 = disjoint).
double pulse_overlap_distance(const PulseShapes& shapes);

// Free-function form of RamanTrajectory::conditional_joint.
Operator conditional_joint_state(const RamanTrajectory& traj, double time);

} // namespace ipe
