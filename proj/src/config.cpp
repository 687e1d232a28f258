#include "ipe/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace ipe {

namespace {

struct Entry {
    std::string value;
    int line = 0;
    bool used = false;
};

using Sections = std::map<std::string, std::map<std::string, Entry>>;

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

Sections read_sections(std::istream& is, const std::string& origin) {
    Sections out;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto cut = line.find_first_of("#;");
        std::string body = trim(cut == std::string::npos ? line : line.substr(0, cut));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']')
                throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": unterminated section header");
            section = trim(body.substr(1, body.size() - 2));
            if (section.empty())
                throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty section name");
            out.try_emplace(section);
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty key or value");
        if (section.empty())
            throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": key outside any section");
        auto [it, fresh] = out[section].emplace(key, Entry{value, lineno, false});
        if (!fresh)
            throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return out;
}

class Reader {
public:
    Reader(Sections& s, std::string origin) : sections_(s), origin_(std::move(origin)) {}

    std::optional<std::string> raw(const std::string& section, const std::string& key) {
        auto sit = sections_.find(section);
        if (sit == sections_.end()) return std::nullopt;
        auto kit = sit->second.find(key);
        if (kit == sit->second.end()) return std::nullopt;
        kit->second.used = true;
        return kit->second.value;
    }

    double number(const std::string& section, const std::string& key, double fallback) {
        const auto v = raw(section, key);
        if (!v) return fallback;
        return parse_number(section, key, *v);
    }

    std::optional<double> number_opt(const std::string& section, const std::string& key) {
        const auto v = raw(section, key);
        if (!v) return std::nullopt;
        return parse_number(section, key, *v);
    }

    bool flag(const std::string& section, const std::string& key, bool fallback) {
        const auto v = raw(section, key);
        if (!v) return fallback;
        if (*v == "true" || *v == "1" || *v == "yes") return true;
        if (*v == "false" || *v == "0" || *v == "no") return false;
        fail(section, key, "expected a boolean");
        return fallback;
    }

    std::vector<double> list(const std::string& section, const std::string& key) {
        const auto v = raw(section, key);
        std::vector<double> out;
        if (!v) return out;
        std::string item;
        std::istringstream ss(*v);
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) fail(section, key, "empty list item");
            out.push_back(parse_number(section, key, item));
        }
        return out;
    }

    void reject_unknown() const {
        for (const auto& [sec, keys] : sections_)
            for (const auto& [key, entry] : keys)
                if (!entry.used)
                    throw std::runtime_error(origin_ + ":" + std::to_string(entry.line) +
                                             ": unknown key '" + sec + "." + key + "'");
    }

private:
    double parse_number(const std::string& section, const std::string& key, const std::string& v) {
        try {
            size_t pos = 0;
            const double x = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("trailing characters");
            return x;
        } catch (const std::exception&) {
            fail(section, key, "expected a number, got '" + v + "'");
        }
        return 0.0;
    }

    [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& msg) {
        int line = 0;
        auto sit = sections_.find(section);
        if (sit != sections_.end()) {
            auto kit = sit->second.find(key);
            if (kit != sit->second.end()) line = kit->second.line;
        }
        throw std::runtime_error(origin_ + ":" + std::to_string(line) + ": " + section + "." + key +
                                 ": " + msg);
    }

    Sections& sections_;
    std::string origin_;
};

} // namespace

RunConfig parse_config(std::istream& is, const std::string& origin) {
    Sections sections = read_sections(is, origin);
    Reader r(sections, origin);
    RunConfig cfg;
    SystemParams base; // defaults

    SystemParams& p = cfg.system;
    p.g = mhz(r.number("system", "g_mhz", base.g / mhz(1)));
    p.kappa = mhz(r.number("system", "kappa_mhz", base.kappa / mhz(1)));
    p.gamma = mhz(r.number("system", "gamma_mhz", base.gamma / mhz(1)));
    p.rabi1 = mhz(r.number("system", "rabi1_mhz", base.rabi1 / mhz(1)));
    p.rabi2 = mhz(r.number("system", "rabi2_mhz", base.rabi2 / mhz(1)));
    p.cavity_detuning = mhz(r.number("system", "cavity_detuning_mhz", base.cavity_detuning / mhz(1)));
    p.zeeman_split = mhz(r.number("system", "zeeman_mhz", base.zeeman_split / mhz(1)));
    p.detuning1 = mhz(r.number("system", "detuning1_mhz", p.cavity_detuning / mhz(1)));
    const auto det2 = r.number_opt("system", "detuning2_mhz");
    p.detuning2 = det2 ? mhz(*det2) : p.cavity_detuning + p.zeeman_split;
    p.proj1 = r.number("system", "proj1", base.proj1);
    p.proj2 = r.number("system", "proj2", base.proj2);
    p.raman_phase = pi * r.number("system", "raman_phase_pi", base.raman_phase / pi);
    p.pulse_duration = usec(r.number("system", "pulse_us", base.pulse_duration / usec(1)));
    p.ramp_time = usec(r.number("system", "ramp_us", base.ramp_time / usec(1)));
    p.drive2_delay = usec(r.number("system", "drive2_delay_us", base.drive2_delay / usec(1)));
    p.scatter_fail_fraction = r.number("system", "scatter_fail_fraction", base.scatter_fail_fraction);
    p.beat_mismatch = 2.0 * pi * 1e3 * r.number("system", "beat_mismatch_khz", 0.0);
    p.stark_compensated = r.flag("system", "stark_compensated", base.stark_compensated);

    NoiseModel& n = cfg.noise;
    NoiseModel nbase;
    n.exit_efficiency = r.number("noise", "exit_efficiency", nbase.exit_efficiency);
    n.apd_efficiency0 = r.number("noise", "apd_efficiency0", nbase.apd_efficiency0);
    n.apd_efficiency1 = r.number("noise", "apd_efficiency1", nbase.apd_efficiency1);
    n.dark_rate = r.number("noise", "dark_rate_hz", nbase.dark_rate);
    n.detection_window = usec(r.number("noise", "detection_window_us", p.pulse_duration / usec(1)));
    n.readout_error = r.number("noise", "readout_error", nbase.readout_error);
    n.path_imbalance = r.number("noise", "path_imbalance", nbase.path_imbalance);

    const double seq = r.number("run", "sequences_per_setting", static_cast<double>(cfg.sequences_per_setting));
    if (seq < 0 || seq != std::floor(seq))
        throw std::runtime_error(origin + ": run.sequences_per_setting must be a nonnegative integer");
    cfg.sequences_per_setting = static_cast<std::int64_t>(seq);
    const auto seed = r.number_opt("run", "seed");
    if (seed) {
        if (*seed < 0 || *seed != std::floor(*seed))
            throw std::runtime_error(origin + ": run.seed must be a nonnegative integer");
        cfg.seed = static_cast<std::uint64_t>(*seed);
    }
    cfg.bins = static_cast<int>(r.number("run", "bins", cfg.bins));
    cfg.resamples = static_cast<int>(r.number("run", "resamples", cfg.resamples));

    for (double x : r.list("sweep", "phases_pi")) cfg.sweep_phases.push_back(pi * x);
    cfg.sweep_amplitudes = r.list("sweep", "amplitudes");
    for (double a : cfg.sweep_amplitudes)
        if (a <= 0.0 || a >= 1.0)
            throw std::runtime_error(origin + ": sweep.amplitudes entries must lie in (0,1)");

    r.reject_unknown();
    p.validate();
    n.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    return parse_config(f, path);
}

std::string default_config_text() {
    SystemParams p;
    NoiseModel n;
    std::ostringstream os;
    os.precision(12);
    os << "[system]\n";
    os << "g_mhz = " << p.g / mhz(1) << "\n";
    os << "kappa_mhz = " << p.kappa / mhz(1) << "\n";
    os << "gamma_mhz = " << p.gamma / mhz(1) << "\n";
    os << "rabi1_mhz = " << p.rabi1 / mhz(1) << "\n";
    os << "rabi2_mhz = " << p.rabi2 / mhz(1) << "\n";
    os << "detuning1_mhz = " << p.detuning1 / mhz(1) << "\n";
    os << "detuning2_mhz = " << p.detuning2 / mhz(1) << "\n";
    os << "cavity_detuning_mhz = " << p.cavity_detuning / mhz(1) << "\n";
    os << "zeeman_mhz = " << p.zeeman_split / mhz(1) << "\n";
    os << "proj1 = " << p.proj1 << "\n";
    os << "proj2 = " << p.proj2 << "\n";
    os << "raman_phase_pi = " << p.raman_phase / pi << "\n";
    os << "pulse_us = " << p.pulse_duration / usec(1) << "\n";
    os << "ramp_us = " << p.ramp_time / usec(1) << "\n";
    os << "drive2_delay_us = " << p.drive2_delay / usec(1) << "\n";
    os << "scatter_fail_fraction = " << p.scatter_fail_fraction << "\n";
    os << "beat_mismatch_khz = 0\n";
    os << "stark_compensated = " << (p.stark_compensated ? "true" : "false") << "\n";
    os << "\n[noise]\n";
    os << "exit_efficiency = " << n.exit_efficiency << "\n";
    os << "apd_efficiency0 = " << n.apd_efficiency0 << "\n";
    os << "apd_efficiency1 = " << n.apd_efficiency1 << "\n";
    os << "dark_rate_hz = " << n.dark_rate << "\n";
    os << "detection_window_us = " << n.detection_window / usec(1) << "\n";
    os << "readout_error = " << n.readout_error << "\n";
    os << "path_imbalance = " << n.path_imbalance << "\n";
    os << "\n[run]\n";
    os << "sequences_per_setting = 40000\n";
    os << "seed = 1\n";
    os << "bins = 5\n";
    os << "resamples = 200\n";
    os << "\n[sweep]\n";
    os << "phases_pi = 0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75\n";
    os << "amplitudes = 0.707106781187, 0.577350269190, 0.353553390593\n";
    return os.str();
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace ipe
