#include "ipe/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace ipe {

Operator povm_element(const BasisSetting& setting, int detector, IonOutcome ion) {
    const Operator ion_proj =
        pauli_projector(static_cast<PauliAxis>(setting.ion), ion == IonOutcome::D ? +1 : -1);
    return tensor(ion_proj, port_projector(setting, detector));
}

namespace {

struct DesignRow {
    Operator projector;
    std::int64_t count = 0;
    int setting = 0; // base index 0..8
};

// Flatten a table to (projector, count) rows over the nine compensated
// settings; requires every setting to carry detected events.
std::vector<DesignRow> design_rows(const CountTable& counts, bool require_coverage = true) {
    const CountTable t = counts.compensated() ? counts : counts.summed();
    std::string missing;
    std::vector<DesignRow> rows;
    rows.reserve(36);
    for (int base = 0; base < 9; ++base) {
        const BasisSetting s = BasisSetting::from_index(base);
        const SettingCounts& r = t.row(base);
        if (r.detected() <= 0) {
            missing += missing.empty() ? s.id() : (", " + s.id());
            continue;
        }
        for (int det = 0; det < 2; ++det)
            for (int ion = 0; ion < 2; ++ion)
                rows.push_back({povm_element(s, det, ion == 1 ? IonOutcome::D : IonOutcome::S),
                                r.joint[static_cast<size_t>(2 * det + ion)], base});
    }
    if (require_coverage && !missing.empty())
        throw std::runtime_error("tomography: no detected events for setting(s): " + missing);
    return rows;
}

Operator two_qubit_pauli(int mu, int nu) {
    auto one = [](int k) {
        return k == 0 ? Operator::identity(2) : pauli(static_cast<PauliAxis>(k - 1));
    };
    return tensor(one(mu), one(nu));
}

// tr(a * b) without forming the product.
double trace_product(const Operator& a, const Operator& b) {
    cx t = 0.0;
    const int n = a.dim();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) t += a(i, j) * b(j, i);
    return t.real();
}

} // namespace

Operator linear_inversion(const CountTable& counts) {
    const CountTable t = counts.compensated() ? counts : counts.summed();
    const auto rows = design_rows(t);

    // rho = (1/4) sum_{mu,nu} s_{mu nu} sigma_mu (x) sigma_nu with
    // s_00 = 1; solve least squares for the 15 remaining coordinates.
    std::vector<Operator> basis;
    basis.reserve(16);
    for (int mu = 0; mu < 4; ++mu)
        for (int nu = 0; nu < 4; ++nu) basis.push_back(two_qubit_pauli(mu, nu));

    const size_t np = 15;
    std::vector<double> ata(np * np, 0.0), atb(np, 0.0);
    for (const auto& row : rows) {
        const double total = static_cast<double>(t.row(row.setting).detected());
        const double f = static_cast<double>(row.count) / total;
        double coef[16];
        for (size_t b = 0; b < 16; ++b)
            coef[b] = 0.25 * trace_product(row.projector, basis[b]);
        const double target = f - coef[0];
        for (size_t i = 0; i < np; ++i) {
            atb[i] += coef[i + 1] * target;
            for (size_t j = 0; j < np; ++j) ata[i * np + j] += coef[i + 1] * coef[j + 1];
        }
    }

    std::vector<double> x;
    try {
        x = solve_linear(std::move(ata), std::move(atb));
    } catch (const std::runtime_error&) {
        throw std::runtime_error("linear_inversion: projector set is rank deficient");
    }

    Operator rho = basis[0];
    rho *= cx(0.25);
    for (size_t i = 0; i < np; ++i) {
        Operator term = basis[i + 1];
        term *= cx(0.25 * x[i]);
        rho += term;
    }
    return rho;
}

double loglikelihood(const Operator& rho, const CountTable& counts) {
    if (rho.dim() != kJointDim) throw std::invalid_argument("loglikelihood: expected a 4-dim state");
    const auto rows = design_rows(counts, false);
    double ll = 0.0;
    for (const auto& row : rows) {
        if (row.count == 0) continue;
        const double p = trace_product(rho, row.projector);
        if (p <= 0.0)
            throw std::runtime_error("loglikelihood: observed outcome has nonpositive probability");
        ll += static_cast<double>(row.count) * std::log(p);
    }
    return ll;
}

TomographyResult mle_reconstruct(const CountTable& counts, double tol, int max_iterations) {
    const auto rows = design_rows(counts); // throws on missing coverage
    double n_total = 0.0;
    for (const auto& row : rows) n_total += static_cast<double>(row.count);
    if (n_total <= 0.0) throw std::runtime_error("mle_reconstruct: no detected events");

    constexpr double dilution = 0.1;
    const Operator eye = Operator::identity(kJointDim);

    TomographyResult res;
    Operator rho = eye;
    rho *= cx(0.25);

    // One pass of outcome probabilities per iteration serves both the
    // likelihood and the R operator.
    std::vector<double> probs(rows.size());
    double ll_prev = 0.0;
    bool have_prev = false;

    for (int it = 0; it < max_iterations; ++it) {
        double ll = 0.0;
        for (size_t k = 0; k < rows.size(); ++k) {
            probs[k] = trace_product(rho, rows[k].projector);
            if (rows[k].count == 0) continue;
            if (probs[k] <= 0.0)
                throw std::runtime_error("mle_reconstruct: observed outcome has nonpositive probability");
            ll += static_cast<double>(rows[k].count) * std::log(probs[k]);
        }
        res.iterations = it;
        res.log_likelihood = ll;
        if (have_prev) {
            if (ll < ll_prev) res.max_ll_decrease = std::max(res.max_ll_decrease, ll_prev - ll);
            if (std::abs(ll - ll_prev) < tol) {
                res.converged = true;
                break;
            }
        }
        ll_prev = ll;
        have_prev = true;

        Operator a = eye;
        a *= cx(1.0 - dilution);
        for (size_t k = 0; k < rows.size(); ++k) {
            if (rows[k].count == 0) continue;
            Operator term = rows[k].projector;
            term *= cx(dilution * static_cast<double>(rows[k].count) /
                       (std::max(probs[k], 1e-300) * n_total));
            a += term;
        }

        rho = a * rho * a;
        const double tr = rho.trace().real();
        rho *= cx(1.0 / tr);
        // Symmetrize away accumulated roundoff.
        Operator h = rho.adjoint();
        rho += h;
        rho *= cx(0.5);
    }
    res.rho = rho;
    return res;
}

} // namespace ipe
