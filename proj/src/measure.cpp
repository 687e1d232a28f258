#include "ipe/measure.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

namespace ipe {

const char* to_string(PhotonBasis b) {
    switch (b) {
        case PhotonBasis::HV: return "HV";
        case PhotonBasis::DA: return "DA";
        case PhotonBasis::RL: return "RL";
    }
    return "?";
}

const char* to_string(IonAxis a) {
    switch (a) {
        case IonAxis::X: return "x";
        case IonAxis::Y: return "y";
        case IonAxis::Z: return "z";
    }
    return "?";
}

std::string BasisSetting::id() const {
    return std::string(to_string(ion)) + ":" + to_string(photon);
}

BasisSetting BasisSetting::from_index(int index) {
    if (index < 0 || index >= 18) throw std::out_of_range("BasisSetting::from_index: index out of range");
    BasisSetting s;
    s.swapped = index >= 9;
    const int base = index % 9;
    s.ion = static_cast<IonAxis>(base / 3);
    s.photon = static_cast<PhotonBasis>(base % 3);
    return s;
}

BasisSetting BasisSetting::parse(const std::string& id, bool swapped) {
    if (id.size() != 4 || id[1] != ':') throw std::invalid_argument("BasisSetting::parse: bad id '" + id + "'");
    BasisSetting s;
    s.swapped = swapped;
    switch (id[0]) {
        case 'x': s.ion = IonAxis::X; break;
        case 'y': s.ion = IonAxis::Y; break;
        case 'z': s.ion = IonAxis::Z; break;
        default: throw std::invalid_argument("BasisSetting::parse: bad ion axis in '" + id + "'");
    }
    const std::string ph = id.substr(2);
    if (ph == "HV") s.photon = PhotonBasis::HV;
    else if (ph == "DA") s.photon = PhotonBasis::DA;
    else if (ph == "RL") s.photon = PhotonBasis::RL;
    else throw std::invalid_argument("BasisSetting::parse: bad photon basis in '" + id + "'");
    return s;
}

std::vector<BasisSetting> BasisSetting::tomography_set() {
    std::vector<BasisSetting> out;
    out.reserve(18);
    for (int i = 0; i < 18; ++i) out.push_back(from_index(i));
    return out;
}

NoiseModel NoiseModel::noiseless() {
    NoiseModel n;
    n.exit_efficiency = 1.0;
    n.apd_efficiency0 = 1.0;
    n.apd_efficiency1 = 1.0;
    n.dark_rate = 0.0;
    n.readout_error = 0.0;
    n.path_imbalance = 1.0;
    return n;
}

void NoiseModel::validate() const {
    auto prob = [](double p, const char* name) {
        if (p < 0.0 || p > 1.0)
            throw std::invalid_argument(std::string("NoiseModel: ") + name + " must lie in [0,1]");
    };
    prob(exit_efficiency, "exit_efficiency");
    prob(apd_efficiency0, "apd_efficiency0");
    prob(apd_efficiency1, "apd_efficiency1");
    prob(readout_error, "readout_error");
    if (dark_rate < 0.0) throw std::invalid_argument("NoiseModel: dark_rate must be >= 0");
    if (detection_window < 0.0) throw std::invalid_argument("NoiseModel: detection_window must be >= 0");
    if (path_imbalance < 0.0 || path_imbalance > 1.0)
        throw std::invalid_argument("NoiseModel: path_imbalance must lie in [0,1]");
}

CountTable CountTable::summed() const {
    if (compensated_) return *this;
    CountTable out(true);
    for (int base = 0; base < 9; ++base) {
        const SettingCounts& u = rows_[static_cast<size_t>(base)];
        const SettingCounts& s = rows_[static_cast<size_t>(base + 9)];
        SettingCounts& o = out.row(base);
        for (int det = 0; det < 2; ++det)
            for (int ion = 0; ion < 2; ++ion)
                o.joint[static_cast<size_t>(2 * det + ion)] =
                    u.joint[static_cast<size_t>(2 * det + ion)] +
                    s.joint[static_cast<size_t>(2 * (1 - det) + ion)];
        o.no_photon = u.no_photon + s.no_photon;
        o.sequences = u.sequences + s.sequences;
    }
    return out;
}

std::int64_t CountTable::total_detected() const {
    std::int64_t n = 0;
    for (const auto& r : rows_) n += r.detected();
    return n;
}

std::int64_t CountTable::total_sequences() const {
    std::int64_t n = 0;
    for (const auto& r : rows_) n += r.sequences;
    return n;
}

void CountTable::write(std::ostream& os) const {
    os << "# joint ion-photon counts\n";
    os << "# columns: setting swap field count   (swap: 0 raw, 1 raw path-swapped, s summed)\n";
    for (int i = 0; i < n_settings(); ++i) {
        const std::string swap = compensated_ ? "s" : (i >= 9 ? "1" : "0");
        const std::string id = BasisSetting::from_index(i % 9).id();
        const SettingCounts& r = rows_[static_cast<size_t>(i)];
        for (int det = 0; det < 2; ++det)
            for (int ion = 0; ion < 2; ++ion)
                os << id << ' ' << swap << " d" << det << (ion ? "D" : "S") << ' '
                   << r.joint[static_cast<size_t>(2 * det + ion)] << "\n";
        os << id << ' ' << swap << " no_photon " << r.no_photon << "\n";
        os << id << ' ' << swap << " sequences " << r.sequences << "\n";
    }
}

CountTable CountTable::read(std::istream& is) {
    std::string line;
    int lineno = 0;
    bool compensated = false;
    bool shape_known = false;
    std::vector<SettingCounts> rows;

    auto fail = [&](const std::string& msg) {
        throw std::runtime_error("CountTable::read: line " + std::to_string(lineno) + ": " + msg);
    };

    std::vector<SettingCounts> raw18(18), sum9(9);
    std::vector<bool> seen18(18, false), seen9(9, false);

    while (std::getline(is, line)) {
        ++lineno;
        const auto pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == '#') continue;
        std::istringstream ls(line);
        std::string id, swap, field;
        std::int64_t count = 0;
        if (!(ls >> id >> swap >> field >> count)) fail("expected 'setting swap field count'");
        if (count < 0) fail("negative count");

        bool swapped = false;
        bool summed = false;
        if (swap == "0") swapped = false;
        else if (swap == "1") swapped = true;
        else if (swap == "s") summed = true;
        else fail("bad swap column '" + swap + "'");

        if (!shape_known) { compensated = summed; shape_known = true; }
        else if (compensated != summed) fail("mixed raw and summed rows");

        BasisSetting s;
        try {
            s = BasisSetting::parse(id, swapped);
        } catch (const std::exception& e) {
            fail(e.what());
        }

        SettingCounts& r = summed ? sum9[static_cast<size_t>(s.base_index())]
                                  : raw18[static_cast<size_t>(s.index())];
        if (summed) seen9[static_cast<size_t>(s.base_index())] = true;
        else seen18[static_cast<size_t>(s.index())] = true;

        if (field == "no_photon") r.no_photon = count;
        else if (field == "sequences") r.sequences = count;
        else if (field.size() == 3 && field[0] == 'd' && (field[1] == '0' || field[1] == '1') &&
                 (field[2] == 'S' || field[2] == 'D')) {
            const int det = field[1] - '0';
            const int ion = field[2] == 'D' ? 1 : 0;
            r.joint[static_cast<size_t>(2 * det + ion)] = count;
        } else fail("unknown field '" + field + "'");
    }
    if (!shape_known) throw std::runtime_error("CountTable::read: no data rows");

    CountTable out(compensated);
    if (compensated) {
        for (int i = 0; i < 9; ++i) out.row(i) = sum9[static_cast<size_t>(i)];
    } else {
        for (int i = 0; i < 18; ++i) out.row(i) = raw18[static_cast<size_t>(i)];
    }
    return out;
}

Operator waveplate(double theta, double retardance) {
    const double c = std::cos(theta), s = std::sin(theta);
    // R(theta) diag(1, e^{-i retardance}) R(-theta)
    const cx e = std::polar(1.0, -retardance);
    Operator w(2);
    w(0, 0) = c * c + e * s * s;
    w(0, 1) = (1.0 - e) * s * c;
    w(1, 0) = (1.0 - e) * s * c;
    w(1, 1) = s * s + e * c * c;
    return w;
}

namespace {

struct Angles { double hwp, qwp; };

Angles analyzer_angles(PhotonBasis basis, bool swapped) {
    const double deg = pi / 180.0;
    switch (basis) {
        case PhotonBasis::HV: return {swapped ? 45.0 * deg : 0.0, 0.0};
        case PhotonBasis::DA: return {(swapped ? 67.5 : 22.5) * deg, 0.0};
        case PhotonBasis::RL: return {0.0, (swapped ? 135.0 : 45.0) * deg};
    }
    throw std::logic_error("analyzer_angles: bad basis");
}

} // namespace

Operator analyzer_unitary(const BasisSetting& setting) {
    const Angles a = analyzer_angles(setting.photon, setting.swapped);
    return waveplate(a.qwp, 0.5 * pi) * waveplate(a.hwp, pi);
}

Operator port_projector(const BasisSetting& setting, int detector) {
    if (detector != 0 && detector != 1) throw std::invalid_argument("port_projector: detector must be 0 or 1");
    const Operator u = analyzer_unitary(setting);
    Operator proj(2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            proj(i, j) = std::conj(u(detector, i)) * u(detector, j);
    return proj;
}

ReadoutResult ion_readout(const Operator& joint, IonAxis axis, double error, Rng& rng) {
    if (joint.dim() != kJointDim) throw std::invalid_argument("ion_readout: expected a 4-dim joint state");
    const Operator plus = tensor(pauli_projector(static_cast<PauliAxis>(axis), +1), Operator::identity(2));
    const double p_plus = std::clamp((plus * joint).trace().real(), 0.0, 1.0);

    const bool got_plus = rng.u01() < p_plus;
    IonOutcome outcome = got_plus ? IonOutcome::D : IonOutcome::S;
    if (error > 0.0 && rng.bernoulli(error))
        outcome = outcome == IonOutcome::D ? IonOutcome::S : IonOutcome::D;

    Operator proj = plus;
    if (!got_plus) {
        proj = Operator::identity(kJointDim);
        proj -= plus;
    }
    Operator collapsed = proj * joint * proj;
    const double tr = collapsed.trace().real();
    if (tr > 1e-15) collapsed *= cx(1.0 / tr);
    return {outcome, collapsed};
}

namespace {

// Ion qubit state after the photon has been measured (port projector) or
// lost (polarization traced out).
struct IonState {
    bool qubit = false;  // false: sequence failed, atom never reached D/D'
    Operator rho;        // 2x2 when qubit
};

IonOutcome readout_ion_qubit(const IonState& st, IonAxis axis, double error, Rng& rng) {
    IonOutcome outcome;
    if (!st.qubit) {
        // Failed sequence: the atom sits in S; the mapping pulse parks it
        // in the fluorescence-dark manifold, which reads like the D
        // branch on every axis.
        outcome = IonOutcome::D;
    } else {
        const Operator plus = pauli_projector(static_cast<PauliAxis>(axis), +1);
        const double p_plus = std::clamp((plus * st.rho).trace().real(), 0.0, 1.0);
        outcome = rng.u01() < p_plus ? IonOutcome::D : IonOutcome::S;
    }
    if (error > 0.0 && rng.bernoulli(error))
        outcome = outcome == IonOutcome::D ? IonOutcome::S : IonOutcome::D;
    return outcome;
}

} // namespace

std::optional<DetectionEvent> simulate_sequence(const RamanTrajectory& traj,
                                                const NoiseModel& noise,
                                                const BasisSetting& setting,
                                                std::uint64_t seed,
                                                std::int64_t sequence_index) {
    Rng rng(seed, static_cast<std::uint64_t>(setting.index()) + 1,
            static_cast<std::uint64_t>(sequence_index) + 1);

    IonState ion;
    bool real_click = false;
    int real_port = 0;
    double real_time = 0.0;

    if (rng.bernoulli(traj.generation_probability)) {
        const double t_emit = traj.sample_emission_time(rng);
        const Operator joint = traj.conditional_joint(t_emit);

        if (rng.bernoulli(noise.exit_efficiency)) {
            // Photon reaches the analyzer; the beamsplitter measures the
            // port basis whether or not the APD fires.
            const Operator m0 = tensor(Operator::identity(2), port_projector(setting, 0));
            const double q0 = std::clamp((m0 * joint).trace().real(), 0.0, 1.0);
            const int port = rng.u01() < q0 ? 0 : 1;

            const Operator mp = tensor(Operator::identity(2), port_projector(setting, port));
            Operator proj = mp * joint * mp;
            const double tr = proj.trace().real();
            if (tr > 1e-15) proj *= cx(1.0 / tr);
            ion.qubit = true;
            ion.rho = partial_trace(proj, 2, 2, 0);

            const double path = port == 0 ? 1.0 : noise.path_imbalance;
            const double eff = (port == 0 ? noise.apd_efficiency0 : noise.apd_efficiency1) * path;
            if (rng.bernoulli(eff)) {
                real_click = true;
                real_port = port;
                real_time = t_emit;
            }
        } else {
            // Photon absorbed or scattered at the mirrors: polarization
            // lost to the environment, ion populations survive without
            // coherence.
            ion.qubit = true;
            ion.rho = Operator(2);
            ion.rho(0, 0) = joint(0, 0);
            ion.rho(1, 1) = joint(3, 3);
        }
    }

    // Dark counts, half the quoted rate per APD, uniform over the gated
    // window (never past the pulse: clicks outside it are not recorded).
    const double window = std::min(noise.detection_window, traj.params.pulse_duration);
    const double lam = 0.5 * noise.dark_rate * window;
    bool dark_click = false;
    int dark_port = 0;
    double dark_time = 0.0;
    for (int apd = 0; apd < 2; ++apd) {
        const int n = lam > 0.0 ? rng.poisson(lam) : 0;
        for (int k = 0; k < n; ++k) {
            const double t = rng.uniform(0.0, window);
            if (!dark_click || t < dark_time) {
                dark_click = true;
                dark_port = apd;
                dark_time = t;
            }
        }
    }

    DetectionEvent ev;
    ev.sequence_index = sequence_index;
    ev.setting_index = setting.index();

    if (real_click && (!dark_click || real_time <= dark_time)) {
        ev.detector = real_port;
        ev.detection_time = real_time;
        ev.dark = false;
    } else if (dark_click) {
        ev.detector = dark_port;
        ev.detection_time = dark_time;
        ev.dark = true;
    } else {
        return std::nullopt;
    }

    ev.ion = readout_ion_qubit(ion, setting.ion, noise.readout_error, rng);
    return ev;
}

ExperimentResult run_experiment(const SystemParams& params,
                                const NoiseModel& noise,
                                const std::vector<BasisSetting>& settings,
                                std::int64_t sequences_per_setting,
                                std::uint64_t seed,
                                int threads) {
    const RamanTrajectory traj = compute_trajectory(params);
    return run_experiment(traj, noise, settings, sequences_per_setting, seed, threads);
}

ExperimentResult run_experiment(const RamanTrajectory& traj,
                                const NoiseModel& noise,
                                const std::vector<BasisSetting>& settings,
                                std::int64_t sequences_per_setting,
                                std::uint64_t seed,
                                int threads) {
    noise.validate();
    if (sequences_per_setting < 0) throw std::invalid_argument("run_experiment: negative sequence count");

    // Every basis pair needs both swap partners for path compensation.
    std::array<std::array<bool, 2>, 9> present{};
    for (const auto& s : settings) present[static_cast<size_t>(s.base_index())][s.swapped ? 1 : 0] = true;
    for (int base = 0; base < 9; ++base) {
        const auto& p = present[static_cast<size_t>(base)];
        if (p[0] != p[1])
            throw std::invalid_argument("run_experiment: missing swap partner for setting " +
                                        BasisSetting::from_index(base).id());
    }

    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 1;

    auto run_setting = [&](const BasisSetting& s) {
        std::pair<SettingCounts, std::vector<DetectionEvent>> out;
        out.first.sequences = sequences_per_setting;
        for (std::int64_t i = 0; i < sequences_per_setting; ++i) {
            const auto ev = simulate_sequence(traj, noise, s, seed, i);
            if (!ev) {
                ++out.first.no_photon;
                continue;
            }
            ++out.first.joint[static_cast<size_t>(2 * ev->detector + static_cast<int>(ev->ion))];
            out.second.push_back(*ev);
        }
        return out;
    };

    std::vector<std::future<std::pair<SettingCounts, std::vector<DetectionEvent>>>> futures;
    futures.reserve(settings.size());
    for (const auto& s : settings)
        futures.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred, run_setting, s));

    ExperimentResult result;
    for (size_t k = 0; k < settings.size(); ++k) {
        auto [counts, events] = futures[k].get();
        SettingCounts& row = result.counts.row(settings[k].index());
        for (int j = 0; j < 4; ++j) row.joint[static_cast<size_t>(j)] += counts.joint[static_cast<size_t>(j)];
        row.no_photon += counts.no_photon;
        row.sequences += counts.sequences;
        result.events.insert(result.events.end(), events.begin(), events.end());
    }
    return result;
}

void write_events(std::ostream& os, const std::vector<DetectionEvent>& events) {
    os << "# columns: sequence setting swap detector time_us dark ion\n";
    char buf[64];
    for (const auto& e : events) {
        const BasisSetting s = BasisSetting::from_index(e.setting_index);
        std::snprintf(buf, sizeof buf, "%.6f", e.detection_time * 1e6);
        os << e.sequence_index << ' ' << s.id() << ' ' << (s.swapped ? 1 : 0) << ' ' << e.detector
           << ' ' << buf << ' ' << (e.dark ? 1 : 0) << ' ' << (e.ion == IonOutcome::D ? 'D' : 'S')
           << "\n";
    }
}

std::vector<DetectionEvent> read_events(std::istream& is) {
    std::vector<DetectionEvent> events;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == '#') continue;
        std::istringstream ls(line);
        std::int64_t seq;
        std::string id, ion;
        int swap, det, dark;
        double t_us;
        if (!(ls >> seq >> id >> swap >> det >> t_us >> dark >> ion) || (ion != "S" && ion != "D"))
            throw std::runtime_error("read_events: line " + std::to_string(lineno) + ": malformed record");
        DetectionEvent e;
        e.sequence_index = seq;
        e.setting_index = BasisSetting::parse(id, swap != 0).index();
        e.detector = det;
        e.detection_time = t_us * 1e-6;
        e.dark = dark != 0;
        e.ion = ion == "D" ? IonOutcome::D : IonOutcome::S;
        events.push_back(e);
    }
    return events;
}

CountTable counts_from_events(const std::vector<DetectionEvent>& events) {
    CountTable t(false);
    for (const auto& e : events) {
        SettingCounts& row = t.row(e.setting_index);
        ++row.joint[static_cast<size_t>(2 * e.detector + static_cast<int>(e.ion))];
        ++row.sequences;
    }
    return t;
}

} // namespace ipe
