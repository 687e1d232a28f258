// Unit tests for the configuration parser.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ipe/config.hpp"

#include <sstream>

using namespace ipe;

TEST_CASE("default config text round-trips to default parameters") {
    std::istringstream ss(default_config_text());
    const RunConfig cfg = parse_config(ss);
    const SystemParams def;
    CHECK(cfg.system.g == doctest::Approx(def.g));
    CHECK(cfg.system.kappa == doctest::Approx(def.kappa));
    CHECK(cfg.system.rabi1 == doctest::Approx(def.rabi1));
    CHECK(cfg.system.rabi2 == doctest::Approx(def.rabi2));
    CHECK(cfg.system.detuning1 == doctest::Approx(def.detuning1));
    CHECK(cfg.system.detuning2 == doctest::Approx(def.detuning2));
    CHECK(cfg.system.pulse_duration == doctest::Approx(def.pulse_duration));
    CHECK(cfg.noise.exit_efficiency == doctest::Approx(0.16));
    CHECK(cfg.seed.has_value());
    CHECK(*cfg.seed == 1);
    CHECK(cfg.sweep_phases.size() == 8);
    CHECK(cfg.sweep_amplitudes.size() == 3);
}

TEST_CASE("sensible minimal configs parse") {
    std::istringstream ss("[system]\nrabi1_mhz = 5\n[run]\nsequences_per_setting = 100\n");
    const RunConfig cfg = parse_config(ss);
    CHECK(cfg.system.rabi1 == doctest::Approx(mhz(5.0)));
    CHECK(cfg.sequences_per_setting == 100);
    CHECK_FALSE(cfg.seed.has_value());
    // detuning2 defaults onto the two-photon resonance
    CHECK(cfg.system.detuning2 == doctest::Approx(cfg.system.cavity_detuning + cfg.system.zeeman_split));
}

TEST_CASE("unknown keys fail with their location") {
    std::istringstream ss("[system]\ng_mhz = 1.4\nbogus_key = 3\n");
    try {
        parse_config(ss, "test.ini");
        FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("test.ini:3") != std::string::npos);
        CHECK(msg.find("bogus_key") != std::string::npos);
    }
}

TEST_CASE("malformed values fail with their location") {
    std::istringstream ss("[noise]\ndark_rate_hz = thirty-six\n");
    try {
        parse_config(ss, "cfg");
        FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("cfg:2") != std::string::npos);
    }

    std::istringstream missing_eq("[system]\ng_mhz 1.4\n");
    CHECK_THROWS(parse_config(missing_eq));

    std::istringstream orphan("g_mhz = 1.4\n");
    CHECK_THROWS(parse_config(orphan));

    std::istringstream dup("[system]\ng_mhz = 1\ng_mhz = 2\n");
    CHECK_THROWS(parse_config(dup));

    std::istringstream bad_amp("[sweep]\namplitudes = 0.5, 1.5\n");
    CHECK_THROWS(parse_config(bad_amp));
}

TEST_CASE("physical validation still applies to parsed parameters") {
    std::istringstream ss("[system]\ng_mhz = -1\n");
    CHECK_THROWS(parse_config(ss));
}

TEST_CASE("beat mismatch and phase conventions") {
    std::istringstream ss("[system]\nbeat_mismatch_khz = 50\nraman_phase_pi = 0.25\n");
    const RunConfig cfg = parse_config(ss);
    CHECK(cfg.system.beat_mismatch == doctest::Approx(2.0 * pi * 50e3));
    CHECK(cfg.system.raman_phase == doctest::Approx(0.25 * pi));
    // mismatch shifts the path-2 two-photon detuning
    CHECK(cfg.system.delta2() == doctest::Approx(-2.0 * pi * 50e3));
    CHECK(cfg.system.delta1() == doctest::Approx(0.0));
}

TEST_CASE("config hash is stable and content sensitive") {
    const std::string a = default_config_text();
    CHECK(fnv1a(a) == fnv1a(a));
    CHECK(fnv1a(a) != fnv1a(a + " "));
}
