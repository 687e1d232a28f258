// Unit tests for witnesses, fits and bootstrap errors.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ipe/analysis.hpp"
#include "ipe/dynamics.hpp"
#include "ipe/tomography.hpp"

#include <cmath>

using namespace ipe;

namespace {

Operator bell_rho() {
    const Ket b = target_state(pi / 4, 0.0);
    return outer(b, b);
}

Operator werner(double p) {
    Operator rho = bell_rho();
    rho *= cx(p);
    Operator mixed = Operator::identity(4);
    mixed *= cx(0.25 * (1.0 - p));
    rho += mixed;
    return rho;
}

} // namespace

TEST_CASE("fidelity of pure, mixed and blended states") {
    const Ket psi = target_state(pi / 4, 0.3);
    const Operator pure = outer(psi, psi);
    CHECK(fidelity(pure, psi) == doctest::Approx(1.0).epsilon(1e-12));

    Operator mixed = Operator::identity(4);
    mixed *= 0.25;
    CHECK(fidelity(mixed, psi) == doctest::Approx(0.25).epsilon(1e-12));

    Operator blend = pure;
    blend *= cx(0.9);
    Operator rest = Operator::identity(4);
    rest *= cx(0.1 * 0.25);
    blend += rest;
    CHECK(fidelity(blend, psi) == doctest::Approx(0.925).epsilon(1e-12));

    CHECK_THROWS(fidelity(Operator::identity(2), psi));
}

TEST_CASE("concurrence of reference states") {
    CHECK(concurrence(bell_rho()) == doctest::Approx(1.0).epsilon(1e-9));

    const Ket product = tensor(Ket::basis(2, 0), Ket::basis(2, 1));
    CHECK(concurrence(outer(product, product)) < 1e-9);

    // Werner family: max(0, (3p-1)/2)
    for (double p : {0.0, 0.2, 1.0 / 3.0, 0.5, 0.8, 1.0}) {
        const double expect = std::max(0.0, (3.0 * p - 1.0) / 2.0);
        CHECK(concurrence(werner(p)) == doctest::Approx(expect).epsilon(1e-7));
    }
}

TEST_CASE("concurrence equals twice the coherence for target-form states") {
    for (double alpha : {0.1, 0.3, pi / 4, 1.1, 1.4}) {
        for (double phi : {0.0, 0.7, -2.1}) {
            const Ket psi = target_state(alpha, phi);
            const Operator rho = outer(psi, psi);
            CHECK(std::abs(concurrence(rho) - 2.0 * std::abs(stored_coherence(rho))) < 1e-9);
        }
    }
    // holds for dephased (mixed) states of the same support as well
    const Ket psi = target_state(0.9, 0.4);
    Operator rho = outer(psi, psi);
    rho(0, 3) *= 0.6;
    rho(3, 0) *= 0.6;
    CHECK(std::abs(concurrence(rho) - 2.0 * std::abs(stored_coherence(rho))) < 1e-9);
}

TEST_CASE("optimal Bell observable") {
    const ChshResult bell = chsh_optimal(bell_rho());
    const double max = 2.0 * std::sqrt(2.0);
    CHECK(std::abs(bell.value - max) < 1e-6);
    CHECK(std::abs(bell.horodecki_bound - max) < 1e-9);
    CHECK(std::abs(bell.value - bell.horodecki_bound) < 1e-6);

    Operator mixed = Operator::identity(4);
    mixed *= 0.25;
    CHECK(chsh_optimal(mixed).value < 1e-6);

    const ChshResult w = chsh_optimal(werner(0.9));
    CHECK(std::abs(w.value - 0.9 * max) < 1e-6);

    // optimizer dominance over random fixed axis choices
    Rng rng(71);
    const Operator rho = werner(0.7);
    const ChshResult opt = chsh_optimal(rho);
    std::array<std::array<double, 3>, 3> t{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            t[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                (rho * tensor(pauli(static_cast<PauliAxis>(i)), pauli(static_cast<PauliAxis>(j)))).trace().real();
    auto corr = [&](const std::array<double, 3>& a, const std::array<double, 3>& b) {
        double s = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                s += a[static_cast<size_t>(i)] * t[static_cast<size_t>(i)][static_cast<size_t>(j)] * b[static_cast<size_t>(j)];
        return s;
    };
    auto rand_axis = [&]() {
        const double th = std::acos(rng.uniform(-1.0, 1.0));
        const double ph = rng.uniform(0.0, 2.0 * pi);
        return std::array<double, 3>{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
    };
    for (int rep = 0; rep < 50; ++rep) {
        const auto a = rand_axis(), ap = rand_axis(), b = rand_axis(), bp = rand_axis();
        const double s = std::abs(corr(a, b) - corr(a, bp) + corr(ap, b) + corr(ap, bp));
        CHECK(s <= opt.value + 1e-9);
    }
    CHECK(opt.value <= opt.horodecki_bound + 1e-6);
}

TEST_CASE("coherence phase conventions") {
    const Ket psi = target_state(pi / 4, 0.25 * pi);
    const Operator rho = outer(psi, psi);
    CHECK(coherence_phase(rho) == doctest::Approx(0.25 * pi).epsilon(1e-12));

    const Ket flat = target_state(pi / 4, 0.0);
    CHECK(std::abs(coherence_phase(outer(flat, flat))) < 1e-12);

    Operator conj_rho(4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) conj_rho(i, j) = std::conj(rho(i, j));
    CHECK(coherence_phase(conj_rho) == doctest::Approx(-0.25 * pi).epsilon(1e-12));

    Operator no_coherence = Operator::identity(4);
    no_coherence *= 0.25;
    CHECK_THROWS(coherence_phase(no_coherence));
}

TEST_CASE("simultaneous sinusoid fit") {
    std::vector<double> phases, re, im;
    for (int k = 0; k < 8; ++k) {
        const double phi = k * pi / 4.0;
        phases.push_back(phi);
        re.push_back(0.5 * std::cos(phi));
        im.push_back(0.5 * std::sin(phi));
    }
    const SinusoidFit fit = sinusoid_fit(phases, re, im);
    CHECK(fit.contrast == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(fit.phase_offset) < 1e-12);
    CHECK(fit.residual_rms < 1e-10);

    std::vector<double> flat_re(8, 0.2), flat_im(8, -0.1);
    const SinusoidFit flat = sinusoid_fit(phases, flat_re, flat_im);
    CHECK(flat.contrast < 1e-12);

    std::vector<double> few = {0.0, 1.0, 2.0};
    std::vector<double> v3 = {1.0, 2.0, 3.0};
    CHECK_THROWS(sinusoid_fit(few, v3, v3));
    std::vector<double> same(8, 1.0);
    CHECK_THROWS(sinusoid_fit(same, flat_re, flat_im));
}

TEST_CASE("bootstrap: deterministic counts have zero spread") {
    CountTable t(true);
    for (int base = 0; base < 9; ++base) {
        t.row(base).joint[0] = 1000; // single outcome per setting
        t.row(base).sequences = 1000;
    }
    const double sd = bootstrap_std(
        t, [](const CountTable& c) { return static_cast<double>(c.row(0).joint[0]); }, 100, 5);
    CHECK(sd == 0.0);
}

TEST_CASE("bootstrap spread matches the binomial expectation") {
    CountTable t(true);
    for (int base = 0; base < 9; ++base) {
        t.row(base).joint[0] = 500;
        t.row(base).joint[2] = 500;
        t.row(base).sequences = 1000;
    }
    int failures = -1;
    const double sd = bootstrap_std(
        t,
        [](const CountTable& c) {
            return static_cast<double>(c.row(0).joint[0] + c.row(0).joint[1]) /
                   static_cast<double>(c.row(0).detected());
        },
        400, 11, &failures);
    CHECK(failures == 0);
    CHECK(sd == doctest::Approx(std::sqrt(0.25 / 1000.0)).epsilon(0.15));
}

TEST_CASE("bootstrap resamples preserve per-setting totals") {
    CountTable t(true);
    Rng fill(9);
    for (int base = 0; base < 9; ++base) {
        for (int k = 0; k < 4; ++k) t.row(base).joint[static_cast<size_t>(k)] = 100 + fill.next_u64() % 400;
        t.row(base).sequences = 4000;
    }
    for (int r = 0; r < 50; ++r) {
        Rng rng(1234, 0, static_cast<std::uint64_t>(r));
        const CountTable rs = resample_counts(t, rng);
        for (int base = 0; base < 9; ++base) CHECK(rs.row(base).detected() == t.row(base).detected());
    }
}

TEST_CASE("time-bin phase analysis API") {
    SystemParams p;
    p.detuning1 = p.cavity_detuning;
    p.detuning2 = p.cavity_detuning + p.zeeman_split;
    p.raman_phase = 0.25 * pi;
    const auto result = run_experiment(p, NoiseModel::noiseless(), BasisSetting::tomography_set(), 1200, 31);

    const auto one = phase_vs_timebin(result.events, 1, 100, 40, 3);
    REQUIRE(one.size() == 1);
    CHECK(one[0].phase == doctest::Approx(0.25 * pi).epsilon(0.05));
    CHECK(one[0].events == static_cast<std::int64_t>(result.events.size()));

    CHECK_THROWS(phase_vs_timebin(result.events, 5, 1000000, 10, 3));
    CHECK_THROWS(phase_slope(one));

    const auto three = phase_vs_timebin(result.events, 3, 100, 40, 3);
    REQUIRE(three.size() == 3);
    CHECK(three[0].time < three[1].time);
    CHECK(three[1].time < three[2].time);
    const auto slope = phase_slope(three);
    CHECK(std::abs(slope.slope) < 2.5 * slope.slope_std + 1e3);
}

TEST_CASE("witness report on clean synthetic data") {
    SystemParams p;
    p.detuning1 = p.cavity_detuning;
    p.detuning2 = p.cavity_detuning + p.zeeman_split;
    p.raman_phase = 0.5 * pi;
    const auto result = run_experiment(p, NoiseModel::noiseless(), BasisSetting::tomography_set(), 1200, 47);
    const Ket target = target_state(mixing_angle(p), p.raman_phase);
    const WitnessReport rep = witness_report(result.counts, target, 30, 7);
    CHECK(rep.fidelity > 0.98);
    CHECK(rep.concurrence > 0.95);
    CHECK(rep.chsh > 2.6);
    CHECK(rep.chsh <= 2.0 * std::sqrt(2.0) + 1e-9);
    CHECK(rep.coherence_phase == doctest::Approx(0.5 * pi).epsilon(0.05));
    CHECK(rep.fidelity_std > 0.0);
    CHECK(rep.fidelity_std < 0.02);
}
