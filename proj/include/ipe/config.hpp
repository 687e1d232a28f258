// config.hpp — sectioned key/value run configuration.
//
// Frequencies are given in MHz (cycles), times in microseconds, dark
// rates in Hz; conversion to angular frequencies happens once, here.

#pragma once

#include "ipe/dynamics.hpp"
#include "ipe/measure.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ipe {

struct RunConfig {
    SystemParams system;
    NoiseModel noise;
    std::int64_t sequences_per_setting = 40000;
    std::optional<std::uint64_t> seed;
    std::vector<double> sweep_phases;     // radians
    std::vector<double> sweep_amplitudes; // target cos(alpha) values
    int bins = 5;
    int resamples = 200;
};

// Parsed INI-style text: sections of key = value lines, '#' or ';'
// comments. Unknown keys and malformed lines fail with their line
// number.
RunConfig parse_config(std::istream& is, const std::string& origin = "<config>");
RunConfig load_config(const std::string& path);

// The default configuration, serialized (round-trips through
// parse_config).
std::string default_config_text();

// FNV-1a hash of the raw config text, for run manifests.
std::uint64_t fnv1a(const std::string& text);

} // namespace ipe
