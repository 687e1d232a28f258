#include "ipe/analysis.hpp"

#include "ipe/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <ostream>

namespace ipe {

double fidelity(const Operator& rho, const Ket& psi) {
    if (rho.dim() != psi.dim()) throw std::invalid_argument("fidelity: dimension mismatch");
    cx val = 0.0;
    for (int i = 0; i < rho.dim(); ++i)
        for (int j = 0; j < rho.dim(); ++j) val += std::conj(psi[i]) * rho(i, j) * psi[j];
    return val.real();
}

double concurrence(const Operator& rho) {
    if (rho.dim() != 4) throw std::invalid_argument("concurrence: expected a two-qubit state");
    const Operator yy = tensor(pauli(PauliAxis::Y), pauli(PauliAxis::Y));
    Operator conj_rho(4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) conj_rho(i, j) = std::conj(rho(i, j));
    const Operator flipped = yy * conj_rho * yy;

    // Eigenvalues of rho * flipped equal those of sqrt(rho) flipped
    // sqrt(rho), which is Hermitian PSD. Numerically-zero eigenvalues
    // are clipped before the square root, which would otherwise blow
    // roundoff up to its square root.
    const Operator root = hermitian_sqrt(rho);
    const EigenSystem es = eigen_hermitian(root * flipped * root);
    const double floor = 1e-12 * std::max(es.values[3], 0.0);
    std::array<double, 4> lam{};
    for (int k = 0; k < 4; ++k) {
        const double v = es.values[static_cast<size_t>(k)];
        lam[static_cast<size_t>(k)] = v > floor ? std::sqrt(v) : 0.0;
    }
    std::sort(lam.begin(), lam.end(), std::greater<>());
    return std::max(0.0, lam[0] - lam[1] - lam[2] - lam[3]);
}

namespace {

using Vec3 = std::array<double, 3>;

Vec3 sph(double theta, double phi) {
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

Vec3 mat_vec(const std::array<std::array<double, 3>, 3>& m, const Vec3& v) {
    Vec3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r[static_cast<size_t>(i)] += m[static_cast<size_t>(i)][static_cast<size_t>(j)] * v[static_cast<size_t>(j)];
    return r;
}

double norm3(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

Vec3 unit3(const Vec3& v) {
    const double n = norm3(v);
    if (n <= 0.0) return {0.0, 0.0, 1.0};
    return {v[0] / n, v[1] / n, v[2] / n};
}

// Downhill simplex on a small fixed-dimension objective.
template <size_t N, typename F>
std::pair<std::array<double, N>, double> nelder_mead(F f, std::array<double, N> start, double step,
                                                     int max_iter = 400) {
    std::array<std::array<double, N>, N + 1> pts;
    std::array<double, N + 1> val;
    pts[0] = start;
    for (size_t i = 0; i < N; ++i) {
        pts[i + 1] = start;
        pts[i + 1][i] += step;
    }
    for (size_t i = 0; i <= N; ++i) val[i] = f(pts[i]);

    auto order = [&]() {
        for (size_t i = 0; i <= N; ++i)
            for (size_t j = i + 1; j <= N; ++j)
                if (val[j] < val[i]) {
                    std::swap(val[i], val[j]);
                    std::swap(pts[i], pts[j]);
                }
    };

    for (int it = 0; it < max_iter; ++it) {
        order();
        double spread = 0.0;
        for (size_t i = 0; i < N; ++i) spread = std::max(spread, std::abs(pts[N][i] - pts[0][i]));
        if (spread < 1e-10 && std::abs(val[N] - val[0]) < 1e-13) break;

        std::array<double, N> centroid{};
        for (size_t i = 0; i < N; ++i) {
            for (size_t j = 0; j < N; ++j) centroid[j] += pts[i][j];
        }
        for (size_t j = 0; j < N; ++j) centroid[j] /= static_cast<double>(N);

        auto blend = [&](double c) {
            std::array<double, N> p;
            for (size_t j = 0; j < N; ++j) p[j] = centroid[j] + c * (pts[N][j] - centroid[j]);
            return p;
        };

        const auto refl = blend(-1.0);
        const double fr = f(refl);
        if (fr < val[0]) {
            const auto exp_p = blend(-2.0);
            const double fe = f(exp_p);
            if (fe < fr) { pts[N] = exp_p; val[N] = fe; }
            else { pts[N] = refl; val[N] = fr; }
        } else if (fr < val[N - 1]) {
            pts[N] = refl;
            val[N] = fr;
        } else {
            const auto con = blend(0.5);
            const double fc = f(con);
            if (fc < val[N]) { pts[N] = con; val[N] = fc; }
            else {
                for (size_t i = 1; i <= N; ++i) {
                    for (size_t j = 0; j < N; ++j) pts[i][j] = 0.5 * (pts[i][j] + pts[0][j]);
                    val[i] = f(pts[i]);
                }
            }
        }
    }
    order();
    return {pts[0], val[0]};
}

} // namespace

ChshResult chsh_optimal(const Operator& rho) {
    if (rho.dim() != 4) throw std::invalid_argument("chsh_optimal: expected a two-qubit state");

    // Correlation matrix T_ij = tr(rho sigma_i (x) sigma_j).
    std::array<std::array<double, 3>, 3> t{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            t[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                (rho * tensor(pauli(static_cast<PauliAxis>(i)), pauli(static_cast<PauliAxis>(j))))
                    .trace()
                    .real();

    // For fixed photon axes b, b' the optimal ion axes are along
    // T(b -+ b'), leaving S(b,b') = |T(b-b')| + |T(b+b')|.
    auto objective = [&](const std::array<double, 4>& ang) {
        const Vec3 b = sph(ang[0], ang[1]);
        const Vec3 bp = sph(ang[2], ang[3]);
        const Vec3 diff = {b[0] - bp[0], b[1] - bp[1], b[2] - bp[2]};
        const Vec3 sum = {b[0] + bp[0], b[1] + bp[1], b[2] + bp[2]};
        return norm3(mat_vec(t, diff)) + norm3(mat_vec(t, sum));
    };

    std::array<double, 4> best{};
    double best_val = -1.0;
    const int n_theta = 13, n_phi = 24;
    for (int i1 = 0; i1 < n_theta; ++i1)
        for (int j1 = 0; j1 < n_phi; ++j1)
            for (int i2 = 0; i2 < n_theta; ++i2)
                for (int j2 = 0; j2 < n_phi; ++j2) {
                    const std::array<double, 4> ang = {pi * i1 / (n_theta - 1), 2.0 * pi * j1 / n_phi,
                                                       pi * i2 / (n_theta - 1), 2.0 * pi * j2 / n_phi};
                    const double v = objective(ang);
                    if (v > best_val) { best_val = v; best = ang; }
                }

    auto neg = [&](const std::array<double, 4>& a) { return -objective(a); };
    auto [opt, negval] = nelder_mead<4>(neg, best, 0.05);
    const auto [opt2, negval2] = nelder_mead<4>(neg, opt, 0.005);
    if (negval2 < negval) { opt = opt2; negval = negval2; }

    ChshResult res;
    res.value = -negval;
    const Vec3 b = sph(opt[0], opt[1]);
    const Vec3 bp = sph(opt[2], opt[3]);
    const Vec3 diff = {b[0] - bp[0], b[1] - bp[1], b[2] - bp[2]};
    const Vec3 sum = {b[0] + bp[0], b[1] + bp[1], b[2] + bp[2]};
    res.axes[0] = unit3(mat_vec(t, diff));
    res.axes[1] = unit3(mat_vec(t, sum));
    res.axes[2] = b;
    res.axes[3] = bp;

    // Certificate: 2 sqrt(s1 + s2) with s the two largest eigenvalues of
    // T^T T.
    Operator m(3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k)
                s += t[static_cast<size_t>(k)][static_cast<size_t>(i)] * t[static_cast<size_t>(k)][static_cast<size_t>(j)];
            m(i, j) = s;
        }
    const EigenSystem es = eigen_hermitian(m);
    res.horodecki_bound = 2.0 * std::sqrt(std::max(0.0, es.values[2] + es.values[1]));
    return res;
}

cx stored_coherence(const Operator& rho) {
    if (rho.dim() != kJointDim) throw std::invalid_argument("stored_coherence: expected a 4-dim state");
    return rho(3, 0);
}

double coherence_phase(const Operator& rho, double floor) {
    const cx c = stored_coherence(rho);
    if (std::abs(c) < floor)
        throw std::runtime_error("coherence_phase: coherence magnitude below floor");
    return std::arg(c);
}

SinusoidFit sinusoid_fit(std::span<const double> phases,
                         std::span<const double> re_values,
                         std::span<const double> im_values) {
    const size_t n = phases.size();
    if (re_values.size() != n || im_values.size() != n)
        throw std::invalid_argument("sinusoid_fit: input lengths differ");
    std::vector<double> distinct(phases.begin(), phases.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end(),
                               [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                   distinct.end());
    if (distinct.size() < 4) throw std::invalid_argument("sinusoid_fit: need at least 4 distinct phases");

    // Re = X cos - Y sin, Im = X sin + Y cos with X = A cos(phi0),
    // Y = A sin(phi0); the joint normal matrix is n * identity.
    double sx = 0.0, sy = 0.0;
    for (size_t k = 0; k < n; ++k) {
        const double c = std::cos(phases[k]), s = std::sin(phases[k]);
        sx += re_values[k] * c + im_values[k] * s;
        sy += -re_values[k] * s + im_values[k] * c;
    }
    const double x = sx / static_cast<double>(n);
    const double y = sy / static_cast<double>(n);

    SinusoidFit fit;
    const double amp = std::hypot(x, y);
    fit.contrast = 2.0 * amp;
    fit.phase_offset = amp > 0.0 ? std::atan2(y, x) : 0.0;
    fit.fit_re.resize(n);
    fit.fit_im.resize(n);
    double ss = 0.0;
    for (size_t k = 0; k < n; ++k) {
        const double c = std::cos(phases[k]), s = std::sin(phases[k]);
        fit.fit_re[k] = x * c - y * s;
        fit.fit_im[k] = x * s + y * c;
        ss += (fit.fit_re[k] - re_values[k]) * (fit.fit_re[k] - re_values[k]) +
              (fit.fit_im[k] - im_values[k]) * (fit.fit_im[k] - im_values[k]);
    }
    fit.residual_rms = std::sqrt(ss / (2.0 * static_cast<double>(n)));
    return fit;
}

namespace {

double wrap_angle(double a) {
    while (a > pi) a -= 2.0 * pi;
    while (a <= -pi) a += 2.0 * pi;
    return a;
}

} // namespace

CountTable resample_counts(const CountTable& counts, Rng& rng) {
    CountTable out(counts.compensated());
    for (int i = 0; i < counts.n_settings(); ++i) {
        const SettingCounts& src = counts.row(i);
        SettingCounts& dst = out.row(i);
        dst.no_photon = src.no_photon;
        dst.sequences = src.sequences;
        const std::int64_t total = src.detected();
        if (total == 0) continue;
        std::array<double, 4> cdf{};
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) {
            acc += static_cast<double>(src.joint[static_cast<size_t>(k)]);
            cdf[static_cast<size_t>(k)] = acc;
        }
        for (std::int64_t d = 0; d < total; ++d) {
            const int k = rng.discrete_cdf(cdf);
            ++dst.joint[static_cast<size_t>(k)];
        }
    }
    return out;
}

double bootstrap_std(const CountTable& counts,
                     const std::function<double(const CountTable&)>& estimator,
                     int resamples,
                     std::uint64_t seed,
                     int* failures) {
    if (resamples < 2) throw std::invalid_argument("bootstrap_std: need at least 2 resamples");
    std::vector<double> vals;
    vals.reserve(static_cast<size_t>(resamples));
    int failed = 0;
    for (int r = 0; r < resamples; ++r) {
        Rng rng(seed, 0x626f6f74ULL, static_cast<std::uint64_t>(r) + 1);
        const CountTable rs = resample_counts(counts, rng);
        try {
            vals.push_back(estimator(rs));
        } catch (const std::exception&) {
            ++failed;
        }
    }
    if (failures) *failures = failed;
    if (failed * 100 > resamples)
        std::cerr << "bootstrap_std: warning: " << failed << "/" << resamples
                  << " resamples failed\n";
    if (vals.size() < 2) throw std::runtime_error("bootstrap_std: too many estimator failures");
    const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(vals.size() - 1));
}

std::vector<PhaseBinPoint> phase_vs_timebin(const std::vector<DetectionEvent>& events,
                                            int bins, int min_events, int resamples,
                                            std::uint64_t seed) {
    if (bins < 1) throw std::invalid_argument("phase_vs_timebin: bins must be >= 1");
    std::vector<DetectionEvent> sorted = events;
    std::sort(sorted.begin(), sorted.end(),
              [](const DetectionEvent& a, const DetectionEvent& b) {
                  return a.detection_time < b.detection_time;
              });
    const size_t n = sorted.size();
    if (static_cast<std::int64_t>(n) < static_cast<std::int64_t>(bins) * min_events)
        throw std::runtime_error("phase_vs_timebin: not enough events for " + std::to_string(bins) +
                                 " bins of " + std::to_string(min_events));

    std::vector<PhaseBinPoint> out;
    for (int b = 0; b < bins; ++b) {
        const size_t lo = n * static_cast<size_t>(b) / static_cast<size_t>(bins);
        const size_t hi = n * static_cast<size_t>(b + 1) / static_cast<size_t>(bins);
        const std::vector<DetectionEvent> slice(sorted.begin() + static_cast<std::ptrdiff_t>(lo),
                                                sorted.begin() + static_cast<std::ptrdiff_t>(hi));
        if (static_cast<int>(slice.size()) < min_events)
            throw std::runtime_error("phase_vs_timebin: bin " + std::to_string(b) + " underpopulated");

        const CountTable counts = counts_from_events(slice);
        const TomographyResult rec = mle_reconstruct(counts);
        PhaseBinPoint pt;
        pt.events = static_cast<std::int64_t>(slice.size());
        double tsum = 0.0;
        for (const auto& e : slice) tsum += e.detection_time;
        pt.time = tsum / static_cast<double>(slice.size());
        pt.phase = coherence_phase(rec.rho);

        // Circular bootstrap spread about the point estimate.
        double ss = 0.0;
        int ok = 0;
        for (int r = 0; r < resamples; ++r) {
            Rng rng(seed, 0x62696e00ULL + static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(r) + 1);
            try {
                const CountTable rs = resample_counts(counts, rng);
                const double ph = coherence_phase(mle_reconstruct(rs).rho);
                const double d = wrap_angle(ph - pt.phase);
                ss += d * d;
                ++ok;
            } catch (const std::exception&) {
            }
        }
        pt.stddev = ok > 1 ? std::sqrt(ss / static_cast<double>(ok - 1)) : 0.0;
        out.push_back(pt);
    }
    return out;
}

SlopeFit phase_slope(const std::vector<PhaseBinPoint>& points) {
    if (points.size() < 2) throw std::invalid_argument("phase_slope: need at least two points");
    // Unwrap sequentially, then weighted least squares.
    std::vector<double> t(points.size()), y(points.size()), w(points.size());
    double prev = points[0].phase;
    double acc = points[0].phase;
    for (size_t i = 0; i < points.size(); ++i) {
        if (i > 0) {
            acc += wrap_angle(points[i].phase - prev);
            prev = points[i].phase;
        }
        t[i] = points[i].time;
        y[i] = acc;
        const double sd = points[i].stddev > 1e-9 ? points[i].stddev : 1e-9;
        w[i] = 1.0 / (sd * sd);
    }
    double sw = 0.0, swt = 0.0, swy = 0.0, swtt = 0.0, swty = 0.0;
    for (size_t i = 0; i < points.size(); ++i) {
        sw += w[i];
        swt += w[i] * t[i];
        swy += w[i] * y[i];
        swtt += w[i] * t[i] * t[i];
        swty += w[i] * t[i] * y[i];
    }
    const double det = sw * swtt - swt * swt;
    if (std::abs(det) < 1e-30) throw std::runtime_error("phase_slope: degenerate time points");
    SlopeFit fit;
    fit.slope = (sw * swty - swt * swy) / det;
    fit.intercept = (swtt * swy - swt * swty) / det;
    fit.slope_std = std::sqrt(sw / det);
    return fit;
}

WitnessReport witness_report(const CountTable& counts, const Ket& target,
                             int resamples, std::uint64_t seed) {
    const TomographyResult rec = mle_reconstruct(counts);
    WitnessReport rep;
    rep.fidelity = fidelity(rec.rho, target);
    rep.concurrence = concurrence(rec.rho);
    rep.chsh = chsh_optimal(rec.rho).value;
    rep.coherence_phase = coherence_phase(rec.rho);

    double sf = 0.0, sc = 0.0, sb = 0.0, sp = 0.0;
    double mf = 0.0, mc = 0.0, mb = 0.0;
    std::vector<std::array<double, 4>> vals;
    for (int r = 0; r < resamples; ++r) {
        Rng rng(seed, 0x7769746eULL, static_cast<std::uint64_t>(r) + 1);
        try {
            const CountTable rs = resample_counts(counts, rng);
            const TomographyResult rr = mle_reconstruct(rs);
            vals.push_back({fidelity(rr.rho, target), concurrence(rr.rho),
                            chsh_optimal(rr.rho).value,
                            wrap_angle(coherence_phase(rr.rho) - rep.coherence_phase)});
        } catch (const std::exception&) {
        }
    }
    if (vals.size() >= 2) {
        for (const auto& v : vals) { mf += v[0]; mc += v[1]; mb += v[2]; }
        const double nn = static_cast<double>(vals.size());
        mf /= nn; mc /= nn; mb /= nn;
        for (const auto& v : vals) {
            sf += (v[0] - mf) * (v[0] - mf);
            sc += (v[1] - mc) * (v[1] - mc);
            sb += (v[2] - mb) * (v[2] - mb);
            sp += v[3] * v[3];
        }
        rep.fidelity_std = std::sqrt(sf / (nn - 1.0));
        rep.concurrence_std = std::sqrt(sc / (nn - 1.0));
        rep.chsh_std = std::sqrt(sb / (nn - 1.0));
        rep.coherence_phase_std = std::sqrt(sp / (nn - 1.0));
    }
    return rep;
}

void write_witness_report(std::ostream& os, const WitnessReport& r) {
    os << "fidelity " << r.fidelity << "\n";
    os << "fidelity_std " << r.fidelity_std << "\n";
    os << "concurrence " << r.concurrence << "\n";
    os << "concurrence_std " << r.concurrence_std << "\n";
    os << "chsh " << r.chsh << "\n";
    os << "chsh_std " << r.chsh_std << "\n";
    os << "coherence_phase " << r.coherence_phase << "\n";
    os << "coherence_phase_std " << r.coherence_phase_std << "\n";
}

} // namespace ipe
