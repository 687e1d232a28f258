// Unit tests for the efficiency budget calculators.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ipe/budget.hpp"
#include "ipe/rng.hpp"

using namespace ipe;

TEST_CASE("output coupling golden values") {
    CHECK(output_coupling({13.0, 1.3, 68.0}) == doctest::Approx(0.158).epsilon(0.01));
    CHECK(output_coupling({13.0, 1.3, 4.0}) == doctest::Approx(0.710).epsilon(0.002));
    CHECK(output_coupling({500.0, 1.3, 4.0}) == doctest::Approx(0.990).epsilon(0.001));
    CHECK_THROWS(output_coupling({0.0, 0.0, 0.0}));
}

TEST_CASE("output coupling monotonicity") {
    Rng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const MirrorBudget m{rng.uniform(1, 500), rng.uniform(0.1, 50), rng.uniform(0.1, 100)};
        const double base = output_coupling(m);
        CHECK(output_coupling({m.t1_ppm * 1.1, m.t2_ppm, m.loss_ppm}) > base);
        CHECK(output_coupling({m.t1_ppm, m.t2_ppm * 1.1, m.loss_ppm}) < base);
        CHECK(output_coupling({m.t1_ppm, m.t2_ppm, m.loss_ppm * 1.1}) < base);
    }
}

TEST_CASE("free-space collection") {
    CHECK(free_space_collection(0.5) == doctest::Approx(0.067).epsilon(0.01));
    CHECK(free_space_collection(1.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(free_space_collection(0.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_THROWS(free_space_collection(1.5));
    CHECK_THROWS(free_space_collection(-0.1));
}

TEST_CASE("detection budget") {
    NoiseModel n; // exit 0.16, APDs 0.40
    const auto b = detection_budget(0.9, n, 1.5e-3);
    CHECK(b.probability == doctest::Approx(0.0576).epsilon(1e-12));
    CHECK(b.rate_hz == doctest::Approx(38.4).epsilon(1e-12));

    NoiseModel dead = n;
    dead.exit_efficiency = 0.0;
    const auto z = detection_budget(0.9, dead, 1.5e-3);
    CHECK(z.probability == 0.0);
    CHECK(z.rate_hz == 0.0);

    // multiplicative in each factor until capped
    NoiseModel half = n;
    half.exit_efficiency *= 0.5;
    CHECK(detection_budget(0.9, half, 1.5e-3).probability == doctest::Approx(0.5 * b.probability).epsilon(1e-12));
    CHECK(detection_budget(0.45, n, 1.5e-3).probability == doctest::Approx(0.5 * b.probability).epsilon(1e-12));
    NoiseModel full = n;
    full.exit_efficiency = 1.0;
    full.apd_efficiency0 = full.apd_efficiency1 = 1.0;
    CHECK(detection_budget(1.0, full, 1.0).probability == 1.0);
}
