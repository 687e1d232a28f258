#include "ipe/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ipe {

namespace {

double envelope(double t, double start, double ramp) {
    const double x = t - start;
    if (x <= 0.0) return 0.0;
    if (ramp <= 0.0 || x >= ramp) return 1.0;
    const double s = std::sin(0.5 * pi * x / ramp);
    return s * s;
}

} // namespace

double SystemParams::envelope1(double t) const { return envelope(t, 0.0, ramp_time); }
double SystemParams::envelope2(double t) const { return envelope(t, drive2_delay, ramp_time); }

double SystemParams::scatter_loss_rate() const {
    const double r1 = rabi1 / detuning1;
    const double r2 = rabi2 / detuning2;
    return scatter_fail_fraction * 2.0 * gamma * (r1 * r1 + r2 * r2);
}

std::vector<std::string> SystemParams::validate() const {
    if (g <= 0.0 || kappa <= 0.0 || gamma <= 0.0)
        throw std::invalid_argument("SystemParams: rates g, kappa, gamma must be positive");
    if (pulse_duration <= 0.0) throw std::invalid_argument("SystemParams: pulse_duration must be positive");
    if (detuning1 == 0.0 || detuning2 == 0.0)
        throw std::invalid_argument("SystemParams: Raman detunings must be nonzero");
    if (rabi1 < 0.0 || rabi2 < 0.0) throw std::invalid_argument("SystemParams: drive amplitudes must be >= 0");
    if (scatter_fail_fraction < 0.0 || scatter_fail_fraction > 1.0)
        throw std::invalid_argument("SystemParams: scatter_fail_fraction must lie in [0,1]");

    std::vector<std::string> warnings;
    const double scale = std::max({rabi1, rabi2, g});
    if (std::abs(detuning1) < 10.0 * scale)
        warnings.push_back("detuning1 is not large against the drive/coupling; adiabatic elimination is strained");
    if (std::abs(detuning2) < 10.0 * scale)
        warnings.push_back("detuning2 is not large against the drive/coupling; adiabatic elimination is strained");
    return warnings;
}

SystemParams SystemParams::with_target(double alpha, double phi) const {
    SystemParams p = *this;
    p.raman_phase = phi;
    // alpha depends only on the drive ratio; hold tone 1 and move tone 2.
    const double ratio = std::tan(alpha) * (proj1 / proj2) * (detuning2 / detuning1);
    p.rabi2 = rabi1 * std::abs(ratio);
    return p;
}

EffectiveCouplings effective_couplings(const SystemParams& p) {
    if (p.detuning1 == 0.0 || p.detuning2 == 0.0)
        throw std::invalid_argument("effective_couplings: zero Raman detuning");
    return {p.rabi1 * p.proj1 * p.g / p.detuning1, p.rabi2 * p.proj2 * p.g / p.detuning2};
}

double mixing_angle(const SystemParams& p) {
    const auto [g1, g2] = effective_couplings(p);
    return std::atan2(std::abs(g2), std::abs(g1));
}

Ket target_state(double alpha, double phi) {
    Ket psi(kJointDim);
    psi[0] = std::cos(alpha);
    psi[3] = std::polar(std::sin(alpha), phi);
    return psi;
}

Operator hamiltonian_rotating(const SystemParams& p) {
    const auto [g1, g2] = effective_couplings(p);
    Operator h(3);
    h(1, 1) = -p.delta1();
    h(2, 2) = -p.delta2();
    h(1, 0) = g1;
    h(0, 1) = g1;
    h(2, 0) = g2 * std::polar(1.0, p.raman_phase); // couplings carry the detuning sign
    h(0, 2) = std::conj(h(2, 0));
    return h;
}

std::array<double, 3> stark_shifts(const SystemParams& p) {
    const double s_s = p.rabi1 * p.rabi1 / p.detuning1 + p.rabi2 * p.rabi2 / p.detuning2;
    const double s_d1 = (p.proj1 * p.g) * (p.proj1 * p.g) / p.detuning1;
    const double s_d2 = (p.proj2 * p.g) * (p.proj2 * p.g) / p.detuning2;
    return {s_s, s_d1, s_d2};
}

Operator hamiltonian_full(const SystemParams& p, double t) {
    // Frame: S at its own frequency, P carried with tone 1, the D levels
    // carried with (tone, cavity) of their own path. Residual time
    // dependence is the tone beat only.
    double d1 = p.delta1();
    double d2 = p.delta2();
    if (p.stark_compensated) {
        const auto [s_s, s_d1, s_d2] = stark_shifts(p);
        d1 += s_d1 - s_s;
        d2 += s_d2 - s_s;
    }
    const double beat = (d1 - d2) - p.zeeman_split;

    Operator h(6);
    h(1, 1) = -p.detuning1;
    h(2, 2) = -d1;
    h(3, 3) = -d2;
    h(4, 4) = -d1;
    h(5, 5) = -d2;

    const cx drive = p.rabi1 * p.envelope1(t) +
                     std::polar(p.rabi2 * p.envelope2(t), p.raman_phase + beat * t);
    h(1, 0) = drive;
    h(0, 1) = std::conj(drive);

    h(1, 2) = p.proj1 * p.g;
    h(2, 1) = p.proj1 * p.g;
    const cx cav_v = std::polar(p.proj2 * p.g, beat * t);
    h(1, 3) = cav_v;
    h(3, 1) = std::conj(cav_v);
    return h;
}

namespace {

Operator lindblad_rhs(const Operator& h, const Operator& rho,
                      const std::vector<Operator>& collapse,
                      const std::vector<Operator>& collapse_sq) {
    const cx mi(0.0, -1.0);
    Operator drho = mi * (h * rho - rho * h);
    for (size_t k = 0; k < collapse.size(); ++k) {
        drho += collapse[k] * rho * collapse[k].adjoint();
        Operator anti = collapse_sq[k] * rho + rho * collapse_sq[k];
        anti *= cx(-0.5);
        drho += anti;
    }
    return drho;
}

} // namespace

std::vector<Operator> evolve_master(const std::function<Operator(double)>& hamiltonian,
                                    const Operator& rho0,
                                    const std::vector<Operator>& collapse,
                                    const std::vector<double>& grid,
                                    double trace_tol,
                                    int max_refinements) {
    if (grid.size() < 2) throw std::invalid_argument("evolve_master: grid needs at least two points");
    for (size_t i = 1; i < grid.size(); ++i)
        if (grid[i] <= grid[i - 1]) throw std::invalid_argument("evolve_master: grid must be strictly increasing");
    for (const auto& c : collapse)
        if (c.dim() != rho0.dim()) throw std::invalid_argument("evolve_master: collapse operator dimension mismatch");

    std::vector<Operator> collapse_sq;
    collapse_sq.reserve(collapse.size());
    for (const auto& c : collapse) collapse_sq.push_back(c.adjoint() * c);

    const double trace0 = rho0.trace().real();

    auto propagate = [&](int substeps) {
        std::vector<Operator> out;
        out.reserve(grid.size());
        out.push_back(rho0);
        Operator rho = rho0;
        for (size_t i = 1; i < grid.size(); ++i) {
            const double t0 = grid[i - 1];
            const double dt = (grid[i] - t0) / substeps;
            for (int s = 0; s < substeps; ++s) {
                const double t = t0 + s * dt;
                const Operator k1 = lindblad_rhs(hamiltonian(t), rho, collapse, collapse_sq);
                Operator tmp = rho; tmp += cx(0.5 * dt) * k1;
                const Operator k2 = lindblad_rhs(hamiltonian(t + 0.5 * dt), tmp, collapse, collapse_sq);
                tmp = rho; tmp += cx(0.5 * dt) * k2;
                const Operator k3 = lindblad_rhs(hamiltonian(t + 0.5 * dt), tmp, collapse, collapse_sq);
                tmp = rho; tmp += cx(dt) * k3;
                const Operator k4 = lindblad_rhs(hamiltonian(t + dt), tmp, collapse, collapse_sq);
                Operator inc = k1;
                inc += cx(2.0) * k2;
                inc += cx(2.0) * k3;
                inc += k4;
                inc *= cx(dt / 6.0);
                rho += inc;
            }
            out.push_back(rho);
        }
        return out;
    };

    std::vector<Operator> prev;
    int substeps = 1;
    for (int r = 0; r <= max_refinements; ++r, substeps *= 2) {
        std::vector<Operator> cur = propagate(substeps);
        double trace_dev = 0.0;
        for (const auto& rho : cur) trace_dev = std::max(trace_dev, std::abs(rho.trace().real() - trace0));
        double diff = 0.0;
        if (!prev.empty()) {
            for (size_t i = 0; i < cur.size(); ++i) {
                Operator d = cur[i];
                d -= prev[i];
                diff = std::max(diff, d.max_abs());
            }
        }
        if (trace_dev <= trace_tol && !prev.empty() && diff <= trace_tol) return cur;
        prev = std::move(cur);
    }
    throw std::runtime_error("evolve_master: step-size refinement failed to meet tolerance");
}

std::vector<Ket> evolve_schrodinger(const std::function<Operator(double)>& hamiltonian,
                                    const Ket& psi0,
                                    const std::vector<double>& grid,
                                    double tol,
                                    int max_refinements) {
    if (grid.size() < 2) throw std::invalid_argument("evolve_schrodinger: grid needs at least two points");
    const cx mi(0.0, -1.0);
    const int n = psi0.dim();

    auto rhs = [&](double t, const Ket& psi) {
        Ket d = hamiltonian(t) * psi;
        for (auto& z : d.amp) z *= mi;
        return d;
    };
    auto axpy = [n](Ket y, cx a, const Ket& x) {
        for (int i = 0; i < n; ++i) y[i] += a * x[i];
        return y;
    };

    // Pick the initial substep count from the Hamiltonian scale so the
    // refinement loop starts near the stable region.
    double hscale = hamiltonian(grid.front()).max_abs();
    hscale = std::max(hscale, hamiltonian(0.5 * (grid.front() + grid.back())).max_abs());
    hscale = std::max(hscale, 1.0);

    auto propagate = [&](int substeps) {
        std::vector<Ket> out;
        out.reserve(grid.size());
        out.push_back(psi0);
        Ket psi = psi0;
        for (size_t i = 1; i < grid.size(); ++i) {
            const double t0 = grid[i - 1];
            const double dt = (grid[i] - t0) / substeps;
            for (int s = 0; s < substeps; ++s) {
                const double t = t0 + s * dt;
                const Ket k1 = rhs(t, psi);
                const Ket k2 = rhs(t + 0.5 * dt, axpy(psi, cx(0.5 * dt), k1));
                const Ket k3 = rhs(t + 0.5 * dt, axpy(psi, cx(0.5 * dt), k2));
                const Ket k4 = rhs(t + dt, axpy(psi, cx(dt), k3));
                for (int j = 0; j < n; ++j)
                    psi[j] += (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            out.push_back(psi);
        }
        return out;
    };

    const double max_dt = (grid.back() - grid.front()) / (static_cast<double>(grid.size() - 1));
    int substeps = 1;
    while (hscale * max_dt / substeps > 0.5) substeps *= 2;

    std::vector<Ket> prev;
    for (int r = 0; r <= max_refinements; ++r, substeps *= 2) {
        std::vector<Ket> cur = propagate(substeps);
        double diff = 0.0;
        if (!prev.empty()) {
            for (size_t i = 0; i < cur.size(); ++i)
                for (int j = 0; j < n; ++j) diff = std::max(diff, std::abs(cur[i][j] - prev[i][j]));
        }
        if (!prev.empty() && diff <= tol) return cur;
        prev = std::move(cur);
    }
    throw std::runtime_error("evolve_schrodinger: step-size refinement failed to meet tolerance");
}

RamanTrajectory compute_trajectory(const SystemParams& p, int grid_points) {
    if (grid_points < 2) throw std::invalid_argument("compute_trajectory: need at least two grid points");
    p.validate();

    // Levels {S0, D1H, D'1V, D0, D'0, sink}; the eliminated Hamiltonian
    // acts on the first three, photon leaks feed D0/D'0, scattering
    // losses feed the sink.
    const auto [g1, g2] = effective_couplings(p);
    const double d1 = p.delta1();
    const double d2 = p.delta2();

    auto h_of_t = [&](double t) {
        Operator h(6);
        h(1, 1) = -d1;
        h(2, 2) = -d2;
        const double e1 = g1 * p.envelope1(t);
        h(1, 0) = e1;
        h(0, 1) = e1;
        const cx e2 = g2 * p.envelope2(t) * std::polar(1.0, p.raman_phase);
        h(2, 0) = e2;
        h(0, 2) = std::conj(e2);
        return h;
    };

    std::vector<Operator> collapse;
    Operator leak_h(6), leak_v(6), scatter(6);
    leak_h(3, 1) = std::sqrt(2.0 * p.kappa);
    leak_v(4, 2) = std::sqrt(2.0 * p.kappa);
    collapse.push_back(leak_h);
    collapse.push_back(leak_v);
    const double loss = p.scatter_loss_rate();
    if (loss > 0.0) {
        scatter(5, 0) = std::sqrt(loss);
        collapse.push_back(scatter);
    }

    RamanTrajectory traj;
    traj.params = p;
    traj.t.resize(static_cast<size_t>(grid_points));
    const double dt = p.pulse_duration / (grid_points - 1);
    for (int i = 0; i < grid_points; ++i) traj.t[static_cast<size_t>(i)] = i * dt;

    Operator rho0(6);
    rho0(0, 0) = 1.0;
    traj.rho = evolve_master(h_of_t, rho0, collapse, traj.t);

    traj.intensity_h.resize(traj.t.size());
    traj.intensity_v.resize(traj.t.size());
    traj.emission_cdf.resize(traj.t.size());
    double cum = 0.0;
    for (size_t i = 0; i < traj.t.size(); ++i) {
        traj.intensity_h[i] = 2.0 * p.kappa * traj.rho[i](1, 1).real();
        traj.intensity_v[i] = 2.0 * p.kappa * traj.rho[i](2, 2).real();
        if (i > 0)
            cum += 0.5 * dt * (traj.intensity_h[i] + traj.intensity_v[i] +
                               traj.intensity_h[i - 1] + traj.intensity_v[i - 1]);
        traj.emission_cdf[i] = cum;
    }
    traj.generation_probability = cum;
    return traj;
}

std::array<double, 2> RamanTrajectory::one_photon_populations(double time) const {
    if (t.empty()) throw std::runtime_error("RamanTrajectory: empty");
    const double dt = t[1] - t[0];
    const double x = std::clamp(time, t.front(), t.back());
    const size_t i = std::min(t.size() - 2, static_cast<size_t>(x / dt));
    const double w = (x - t[i]) / dt;
    auto lerp = [&](int r, int c) {
        return (1.0 - w) * rho[i](r, c).real() + w * rho[i + 1](r, c).real();
    };
    return {lerp(1, 1), lerp(2, 2)};
}

Operator RamanTrajectory::conditional_joint(double time) const {
    if (t.empty()) throw std::runtime_error("RamanTrajectory: empty");
    const double dt = t[1] - t[0];
    const double x = std::clamp(time, t.front(), t.back());
    const size_t i = std::min(t.size() - 2, static_cast<size_t>(x / dt));
    const double w = (x - t[i]) / dt;
    auto lerp = [&](int r, int c) { return (1.0 - w) * rho[i](r, c) + w * rho[i + 1](r, c); };

    // One-photon block on {D1H, D'1V}, embedded as {DH, D'V} of the
    // joint ion-photon space.
    const cx b00 = lerp(1, 1), b01 = lerp(1, 2), b10 = lerp(2, 1), b11 = lerp(2, 2);
    const double tr = b00.real() + b11.real();
    if (tr <= 1e-15)
        throw std::runtime_error("conditional_joint: no one-photon amplitude at requested time");

    // The propagation frame co-rotates D' with the tone beat; readout is
    // referenced to the actual level splitting. The frame difference
    // delta1 - delta2 re-enters here as a phase linear in the leak time.
    const cx frame = std::polar(1.0, (params.delta1() - params.delta2()) * x);

    Operator joint(kJointDim);
    joint(0, 0) = b00 / tr;
    joint(0, 3) = b01 * std::conj(frame) / tr;
    joint(3, 0) = b10 * frame / tr;
    joint(3, 3) = b11 / tr;
    return joint;
}

double RamanTrajectory::sample_emission_time(Rng& rng) const {
    const double u = rng.u01() * emission_cdf.back();
    size_t lo = 0, hi = emission_cdf.size() - 1;
    while (lo < hi) {
        const size_t mid = (lo + hi) / 2;
        if (emission_cdf[mid] <= u) lo = mid + 1; else hi = mid;
    }
    if (lo == 0) return t.front();
    const double c0 = emission_cdf[lo - 1], c1 = emission_cdf[lo];
    const double w = (c1 > c0) ? (u - c0) / (c1 - c0) : 0.5;
    return t[lo - 1] + w * (t[lo] - t[lo - 1]);
}

PulseShapes emission_pulse(const RamanTrajectory& traj) {
    return {traj.t, traj.intensity_h, traj.intensity_v};
}

double pulse_overlap_distance(const PulseShapes& shapes) {
    double ah = 0.0, av = 0.0;
    for (size_t i = 1; i < shapes.t.size(); ++i) {
        const double dt = shapes.t[i] - shapes.t[i - 1];
        ah += 0.5 * dt * (shapes.h[i] + shapes.h[i - 1]);
        av += 0.5 * dt * (shapes.v[i] + shapes.v[i - 1]);
    }
    if (ah <= 0.0 || av <= 0.0)
        throw std::runtime_error("pulse_overlap_distance: a pulse shape vanishes");
    double l1 = 0.0;
    for (size_t i = 1; i < shapes.t.size(); ++i) {
        const double dt = shapes.t[i] - shapes.t[i - 1];
        const double d1 = std::abs(shapes.h[i] / ah - shapes.v[i] / av);
        const double d0 = std::abs(shapes.h[i - 1] / ah - shapes.v[i - 1] / av);
        l1 += 0.5 * dt * (d1 + d0);
    }
    return l1;
}

Operator conditional_joint_state(const RamanTrajectory& traj, double time) {
    return traj.conditional_joint(time);
}

} // namespace ipe
