// ipesim — batch front end for the ion-photon entanglement simulator.
//
// Subcommands: simulate, reconstruct, analyze, sweep-phase,
// sweep-amplitude, pulse-shape, budget. Every stochastic command needs a
// seed (flag or config) and writes its outputs atomically together with
// a manifest recording the config hash and seed.
//
// Exit codes: 0 success, 1 usage, 2 data/config error, 3 non-convergence.

#include "ipe/analysis.hpp"
#include "ipe/budget.hpp"
#include "ipe/config.hpp"
#include "ipe/core.hpp"
#include "ipe/dynamics.hpp"
#include "ipe/measure.hpp"
#include "ipe/tomography.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void atomic_write(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot write " + tmp.string());
        f << content;
    }
    fs::rename(tmp, path);
}

std::string slurp(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct LoadedConfig {
    ipe::RunConfig cfg;
    std::string text;
    std::string path;
};

LoadedConfig load(const std::string& path) {
    LoadedConfig lc;
    lc.path = path;
    lc.text = slurp(path);
    std::istringstream ss(lc.text);
    lc.cfg = ipe::parse_config(ss, path);
    for (const auto& w : lc.cfg.system.validate()) std::cerr << "warning: " << w << "\n";
    return lc;
}

std::uint64_t require_seed(const std::optional<std::uint64_t>& flag_seed, const ipe::RunConfig& cfg) {
    if (flag_seed) return *flag_seed;
    if (cfg.seed) return *cfg.seed;
    throw DataError("a seed is required (pass --seed or set run.seed in the config)");
}

void write_manifest(const fs::path& out_dir, const std::string& command, const LoadedConfig& lc,
                    std::uint64_t seed, const std::vector<std::string>& files) {
    json m;
    m["command"] = command;
    m["config"] = lc.path;
    m["config_fnv1a"] = ipe::fnv1a(lc.text);
    m["seed"] = seed;
    m["outputs"] = files;
    atomic_write(out_dir / "manifest.json", m.dump(2) + "\n");
}

std::string format_counts(const ipe::CountTable& t) {
    std::ostringstream os;
    t.write(os);
    return os.str();
}

std::string format_events(const std::vector<ipe::DetectionEvent>& events) {
    std::ostringstream os;
    ipe::write_events(os, events);
    return os.str();
}

std::string format_rho(const ipe::Operator& rho) {
    std::ostringstream os;
    os << "# density matrix, row-major, re+imi entries; basis {DH, DV, D'H, D'V}\n";
    ipe::write_operator(os, rho);
    return os.str();
}

int cmd_simulate(const std::string& config_path, const std::string& out,
                 std::optional<std::uint64_t> seed_flag) {
    const LoadedConfig lc = load(config_path);
    const std::uint64_t seed = require_seed(seed_flag, lc.cfg);
    const fs::path out_dir(out);

    const auto result = ipe::run_experiment(lc.cfg.system, lc.cfg.noise,
                                            ipe::BasisSetting::tomography_set(),
                                            lc.cfg.sequences_per_setting, seed);
    atomic_write(out_dir / "events.log", format_events(result.events));
    atomic_write(out_dir / "counts.txt", format_counts(result.counts));
    write_manifest(out_dir, "simulate", lc, seed, {"events.log", "counts.txt"});

    const double sequences = static_cast<double>(result.counts.total_sequences());
    if (sequences > 0) {
        std::cout << "sequences " << static_cast<std::int64_t>(sequences)
                  << "  detected " << result.counts.total_detected() << "  fraction "
                  << static_cast<double>(result.counts.total_detected()) / sequences << "\n";
    } else {
        std::cout << "sequences 0  detected 0\n";
    }
    return 0;
}

int cmd_reconstruct(const std::string& counts_path, const std::string& out) {
    std::ifstream cf(counts_path);
    if (!cf) throw DataError("cannot open " + counts_path);
    const ipe::CountTable counts = ipe::CountTable::read(cf);

    const ipe::TomographyResult rec = ipe::mle_reconstruct(counts);
    const fs::path out_dir(out);
    atomic_write(out_dir / "rho.txt", format_rho(rec.rho));
    json s;
    s["iterations"] = rec.iterations;
    s["log_likelihood"] = rec.log_likelihood;
    s["converged"] = rec.converged;
    atomic_write(out_dir / "summary.json", s.dump(2) + "\n");
    std::cout << s.dump() << "\n";
    if (!rec.converged) throw ConvergenceError("reconstruction did not converge");
    return 0;
}

int cmd_analyze(const std::string& counts_path, const std::string& events_path,
                const std::string& config_path, const std::string& out,
                std::optional<std::uint64_t> seed_flag, std::optional<int> resamples_flag,
                std::optional<int> bins_flag, std::optional<double> alpha_pi,
                std::optional<double> phi_pi) {
    ipe::RunConfig cfg;
    LoadedConfig lc;
    if (!config_path.empty()) {
        lc = load(config_path);
        cfg = lc.cfg;
    }
    const std::uint64_t seed = require_seed(seed_flag, cfg);
    const int resamples = resamples_flag.value_or(cfg.resamples);

    double alpha = ipe::pi / 4.0, phi = cfg.system.raman_phase;
    if (!config_path.empty()) alpha = ipe::mixing_angle(cfg.system);
    if (alpha_pi) alpha = *alpha_pi * ipe::pi;
    if (phi_pi) phi = *phi_pi * ipe::pi;

    std::ifstream cf(counts_path);
    if (!cf) throw DataError("cannot open " + counts_path);
    const ipe::CountTable counts = ipe::CountTable::read(cf);

    const ipe::TomographyResult rec = ipe::mle_reconstruct(counts);
    const ipe::Ket target = ipe::target_state(alpha, phi);
    const ipe::WitnessReport rep = ipe::witness_report(counts, target, resamples, seed);

    std::ostringstream os;
    ipe::write_witness_report(os, rep);
    os << "target_alpha_pi " << alpha / ipe::pi << "\n";
    os << "target_phase_pi " << phi / ipe::pi << "\n";
    os << "events " << counts.total_detected() << "\n";
    os << "converged " << (rec.converged ? 1 : 0) << "\n";

    const fs::path out_dir(out);
    atomic_write(out_dir / "report.txt", os.str());
    atomic_write(out_dir / "rho.txt", format_rho(rec.rho));
    json m;
    m["command"] = "analyze";
    m["counts"] = counts_path;
    m["seed"] = seed;
    m["resamples"] = resamples;
    if (!config_path.empty()) {
        m["config"] = config_path;
        m["config_fnv1a"] = ipe::fnv1a(lc.text);
    }
    atomic_write(out_dir / "manifest.json", m.dump(2) + "\n");
    std::cout << os.str();

    if (!events_path.empty()) {
        const int bins = bins_flag.value_or(cfg.bins);
        std::ifstream ef(events_path);
        if (!ef) throw DataError("cannot open " + events_path);
        const auto events = ipe::read_events(ef);
        const auto points = ipe::phase_vs_timebin(events, bins, 100, resamples, seed);
        std::ostringstream put;
        put << "# columns: time_us phase_rad phase_std events\n";
        for (const auto& p : points)
            put << p.time * 1e6 << ' ' << p.phase << ' ' << p.stddev << ' ' << p.events << "\n";
        if (points.size() >= 2) {
            const auto slope = ipe::phase_slope(points);
            put << "# slope_rad_per_s " << slope.slope << " slope_std " << slope.slope_std << "\n";
        }
        atomic_write(out_dir / "phase_bins.txt", put.str());
    }
    if (!rec.converged) throw ConvergenceError("reconstruction did not converge");
    return 0;
}

int cmd_sweep_phase(const std::string& config_path, const std::string& out,
                    std::optional<std::uint64_t> seed_flag, std::optional<int> resamples_flag) {
    const LoadedConfig lc = load(config_path);
    const std::uint64_t seed = require_seed(seed_flag, lc.cfg);
    const int resamples = resamples_flag.value_or(lc.cfg.resamples);
    if (lc.cfg.sweep_phases.size() < 2)
        throw DataError("sweep-phase needs at least two sweep.phases_pi entries");

    std::vector<double> phases, re, im;
    std::ostringstream rows;
    rows << "# columns: phase_rad re_coherence im_coherence fidelity fidelity_std\n";
    bool all_converged = true;
    for (size_t k = 0; k < lc.cfg.sweep_phases.size(); ++k) {
        const double phi = lc.cfg.sweep_phases[k];
        ipe::SystemParams p = lc.cfg.system;
        p.raman_phase = phi;
        const auto result = ipe::run_experiment(p, lc.cfg.noise, ipe::BasisSetting::tomography_set(),
                                                lc.cfg.sequences_per_setting, seed + k);
        const ipe::TomographyResult rec = ipe::mle_reconstruct(result.counts);
        all_converged = all_converged && rec.converged;
        const ipe::cx c = ipe::stored_coherence(rec.rho);
        const ipe::Ket target = ipe::target_state(ipe::mixing_angle(p), phi);
        const double f = ipe::fidelity(rec.rho, target);
        const double f_std = ipe::bootstrap_std(
            result.counts,
            [&](const ipe::CountTable& t) { return ipe::fidelity(ipe::mle_reconstruct(t).rho, target); },
            resamples, seed + 1000 + k);
        phases.push_back(phi);
        re.push_back(c.real());
        im.push_back(c.imag());
        rows << phi << ' ' << c.real() << ' ' << c.imag() << ' ' << f << ' ' << f_std << "\n";
        std::cout << "phase " << phi / ipe::pi << "pi: fidelity " << f << " (" << f_std << ")\n";
    }

    const ipe::SinusoidFit fit = ipe::sinusoid_fit(phases, re, im);
    std::ostringstream fs_;
    fs_ << "contrast " << fit.contrast << "\n";
    fs_ << "phase_offset " << fit.phase_offset << "\n";
    fs_ << "residual_rms " << fit.residual_rms << "\n";
    std::cout << fs_.str();

    std::ostringstream table;
    table << "# columns: phase_rad re im fit_re fit_im\n";
    for (size_t k = 0; k < phases.size(); ++k)
        table << phases[k] << ' ' << re[k] << ' ' << im[k] << ' ' << fit.fit_re[k] << ' '
              << fit.fit_im[k] << "\n";

    const fs::path out_dir(out);
    atomic_write(out_dir / "sweep_phase.txt", rows.str());
    atomic_write(out_dir / "sweep_phase_fit.txt", fs_.str() + table.str());
    write_manifest(out_dir, "sweep-phase", lc, seed, {"sweep_phase.txt", "sweep_phase_fit.txt"});
    if (!all_converged) throw ConvergenceError("at least one reconstruction did not converge");
    return 0;
}

int cmd_sweep_amplitude(const std::string& config_path, const std::string& out,
                        std::optional<std::uint64_t> seed_flag, std::optional<int> resamples_flag) {
    const LoadedConfig lc = load(config_path);
    const std::uint64_t seed = require_seed(seed_flag, lc.cfg);
    const int resamples = resamples_flag.value_or(lc.cfg.resamples);
    if (lc.cfg.sweep_amplitudes.empty())
        throw DataError("sweep-amplitude needs sweep.amplitudes entries");

    std::ostringstream rows;
    rows << "# columns: target_cos_alpha target_rho11 rho11 rho11_std rho44 rho44_std fidelity fidelity_std\n";
    bool all_converged = true;
    for (size_t k = 0; k < lc.cfg.sweep_amplitudes.size(); ++k) {
        const double cos_alpha = lc.cfg.sweep_amplitudes[k];
        const double alpha = std::acos(cos_alpha);
        const ipe::SystemParams p = lc.cfg.system.with_target(alpha, lc.cfg.system.raman_phase);
        const auto result = ipe::run_experiment(p, lc.cfg.noise, ipe::BasisSetting::tomography_set(),
                                                lc.cfg.sequences_per_setting, seed + k);
        const ipe::TomographyResult rec = ipe::mle_reconstruct(result.counts);
        all_converged = all_converged && rec.converged;
        const ipe::Ket target = ipe::target_state(alpha, p.raman_phase);

        auto rho11_of = [](const ipe::Operator& r) { return r(0, 0).real(); };
        auto rho44_of = [](const ipe::Operator& r) { return r(3, 3).real(); };
        const double f = ipe::fidelity(rec.rho, target);
        const double r11 = rho11_of(rec.rho), r44 = rho44_of(rec.rho);
        const double r11_std = ipe::bootstrap_std(
            result.counts,
            [&](const ipe::CountTable& t) { return rho11_of(ipe::mle_reconstruct(t).rho); }, resamples,
            seed + 2000 + k);
        const double r44_std = ipe::bootstrap_std(
            result.counts,
            [&](const ipe::CountTable& t) { return rho44_of(ipe::mle_reconstruct(t).rho); }, resamples,
            seed + 3000 + k);
        const double f_std = ipe::bootstrap_std(
            result.counts,
            [&](const ipe::CountTable& t) { return ipe::fidelity(ipe::mle_reconstruct(t).rho, target); },
            resamples, seed + 4000 + k);

        rows << cos_alpha << ' ' << cos_alpha * cos_alpha << ' ' << r11 << ' ' << r11_std << ' '
             << r44 << ' ' << r44_std << ' ' << f << ' ' << f_std << "\n";
        std::cout << "cos(alpha) " << cos_alpha << ": rho11 " << r11 << " (" << r11_std
                  << ")  fidelity " << f << " (" << f_std << ")\n";
    }
    const fs::path out_dir(out);
    atomic_write(out_dir / "sweep_amplitude.txt", rows.str());
    write_manifest(out_dir, "sweep-amplitude", lc, seed, {"sweep_amplitude.txt"});
    if (!all_converged) throw ConvergenceError("at least one reconstruction did not converge");
    return 0;
}

int cmd_pulse_shape(const std::string& config_path, const std::string& out) {
    const LoadedConfig lc = load(config_path);
    const auto traj = ipe::compute_trajectory(lc.cfg.system);
    const auto shapes = ipe::emission_pulse(traj);

    std::ostringstream h, v;
    h << "# columns: time_us intensity_per_s\n";
    v << "# columns: time_us intensity_per_s\n";
    for (size_t i = 0; i < shapes.t.size(); ++i) {
        h << shapes.t[i] * 1e6 << ' ' << shapes.h[i] << "\n";
        v << shapes.t[i] * 1e6 << ' ' << shapes.v[i] << "\n";
    }
    const fs::path out_dir(out);
    atomic_write(out_dir / "pulse_h.txt", h.str());
    atomic_write(out_dir / "pulse_v.txt", v.str());
    std::cout << "generation_probability " << traj.generation_probability << "\n";
    std::cout << "pulse_overlap_l1 " << ipe::pulse_overlap_distance(shapes) << "\n";
    return 0;
}

int cmd_budget(double t1, double t2, double loss, double na, double generation, double sequence_ms,
               const std::string& config_path) {
    ipe::NoiseModel noise;
    if (!config_path.empty()) noise = load(config_path).cfg.noise;

    const ipe::MirrorBudget mirrors{t1, t2, loss};
    const double oc = ipe::output_coupling(mirrors);
    const auto det = ipe::detection_budget(generation, noise, sequence_ms * 1e-3);

    std::cout << "mirror transmission T1        " << t1 << " ppm\n";
    std::cout << "mirror transmission T2        " << t2 << " ppm\n";
    std::cout << "combined mirror losses        " << loss << " ppm\n";
    std::cout << "output coupling efficiency    " << oc << "\n";
    std::cout << "free-space collection (NA " << na << ") " << ipe::free_space_collection(na) << "\n";
    std::cout << "generation probability        " << generation << "\n";
    std::cout << "exit efficiency               " << noise.exit_efficiency << "\n";
    std::cout << "mean APD efficiency           " << 0.5 * (noise.apd_efficiency0 + noise.apd_efficiency1)
              << "\n";
    std::cout << "detection probability         " << det.probability << "\n";
    std::cout << "detected events per second    " << det.rate_hz << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ion-photon entanglement simulator"};
    app.require_subcommand(1);

    std::string config_path, counts_path, events_path, out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> resamples, bins;
    std::optional<double> alpha_pi, phi_pi;

    auto add_seed = [&](CLI::App* c) { c->add_option("--seed", seed, "RNG seed (overrides config)"); };
    auto add_out = [&](CLI::App* c) { c->add_option("--out", out_dir, "output directory"); };

    CLI::App* sim = app.add_subcommand("simulate", "run sequences and write events + counts");
    sim->add_option("--config", config_path, "run configuration")->required();
    add_seed(sim);
    add_out(sim);

    CLI::App* rec = app.add_subcommand("reconstruct", "maximum-likelihood state from a count table");
    rec->add_option("--counts", counts_path, "count table file")->required();
    add_out(rec);

    CLI::App* ana = app.add_subcommand("analyze", "witnesses with bootstrap errors from a count table");
    ana->add_option("--counts", counts_path, "count table file")->required();
    ana->add_option("--events", events_path, "event log (enables time-bin phase analysis)");
    ana->add_option("--config", config_path, "run configuration (target state, defaults)");
    ana->add_option("--resamples", resamples, "bootstrap resamples");
    ana->add_option("--bins", bins, "detection-time bins");
    ana->add_option("--alpha-pi", alpha_pi, "target alpha in units of pi");
    ana->add_option("--phi-pi", phi_pi, "target phase in units of pi");
    add_seed(ana);
    add_out(ana);

    CLI::App* swp = app.add_subcommand("sweep-phase", "tomography across the configured Raman phases");
    swp->add_option("--config", config_path, "run configuration")->required();
    swp->add_option("--resamples", resamples, "bootstrap resamples");
    add_seed(swp);
    add_out(swp);

    CLI::App* swa = app.add_subcommand("sweep-amplitude", "tomography across the configured target amplitudes");
    swa->add_option("--config", config_path, "run configuration")->required();
    swa->add_option("--resamples", resamples, "bootstrap resamples");
    add_seed(swa);
    add_out(swa);

    CLI::App* pul = app.add_subcommand("pulse-shape", "emission pulse shapes of both polarizations");
    pul->add_option("--config", config_path, "run configuration")->required();
    add_out(pul);

    double t1 = 13.0, t2 = 1.3, loss = 68.0, na = 0.5, generation = 0.9, sequence_ms = 1.5;
    CLI::App* bud = app.add_subcommand("budget", "cavity output and detection budget table");
    bud->add_option("--t1", t1, "output mirror transmission, ppm");
    bud->add_option("--t2", t2, "back mirror transmission, ppm");
    bud->add_option("--loss", loss, "combined mirror losses, ppm");
    bud->add_option("--na", na, "lens numerical aperture for the free-space comparison");
    bud->add_option("--generation", generation, "photon generation probability");
    bud->add_option("--sequence-ms", sequence_ms, "sequence duration in ms");
    bud->add_option("--config", config_path, "run configuration (noise block)");

    CLI::App* def = app.add_subcommand("default-config", "print a complete default configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) return cmd_simulate(config_path, out_dir, seed);
        if (rec->parsed()) return cmd_reconstruct(counts_path, out_dir);
        if (ana->parsed())
            return cmd_analyze(counts_path, events_path, config_path, out_dir, seed, resamples, bins,
                               alpha_pi, phi_pi);
        if (swp->parsed()) return cmd_sweep_phase(config_path, out_dir, seed, resamples);
        if (swa->parsed()) return cmd_sweep_amplitude(config_path, out_dir, seed, resamples);
        if (pul->parsed()) return cmd_pulse_shape(config_path, out_dir);
        if (bud->parsed()) return cmd_budget(t1, t2, loss, na, generation, sequence_ms, config_path);
        if (def->parsed()) {
            std::cout << ipe::default_config_text();
            return 0;
        }
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
