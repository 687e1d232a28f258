#include "ipe/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace ipe {

namespace {

void require_same_dim(const Operator& a, const Operator& b, const char* what) {
    if (a.dim() != b.dim())
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                    std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) + ")");
}

} // namespace

Operator& Operator::operator+=(const Operator& o) {
    require_same_dim(*this, o, "Operator+=");
    for (size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
    return *this;
}

Operator& Operator::operator-=(const Operator& o) {
    require_same_dim(*this, o, "Operator-=");
    for (size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
    return *this;
}

Operator& Operator::operator*=(cx s) {
    for (auto& z : a_) z *= s;
    return *this;
}

Operator Operator::adjoint() const {
    Operator r(dim_);
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j) r(j, i) = std::conj((*this)(i, j));
    return r;
}

cx Operator::trace() const {
    cx t = 0.0;
    for (int i = 0; i < dim_; ++i) t += (*this)(i, i);
    return t;
}

double Operator::frobenius_norm() const {
    double s = 0.0;
    for (const auto& z : a_) s += std::norm(z);
    return std::sqrt(s);
}

double Operator::max_abs() const {
    double m = 0.0;
    for (const auto& z : a_) m = std::max(m, std::abs(z));
    return m;
}

Operator operator+(Operator a, const Operator& b) { return a += b; }
Operator operator-(Operator a, const Operator& b) { return a -= b; }

Operator operator*(const Operator& a, const Operator& b) {
    require_same_dim(a, b, "Operator*");
    const int n = a.dim();
    Operator r(n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            const cx aik = a(i, k);
            if (aik == cx(0.0)) continue;
            for (int j = 0; j < n; ++j) r(i, j) += aik * b(k, j);
        }
    return r;
}

Operator operator*(cx s, Operator a) { return a *= s; }

double Ket::norm() const {
    double s = 0.0;
    for (const auto& z : amp) s += std::norm(z);
    return std::sqrt(s);
}

void Ket::normalize() {
    const double n = norm();
    if (n <= 0.0) throw std::runtime_error("Ket::normalize: zero vector");
    for (auto& z : amp) z /= n;
}

Ket Ket::basis(int dim, int i) {
    Ket v(dim);
    if (i < 0 || i >= dim) throw std::out_of_range("Ket::basis: index out of range");
    v[i] = 1.0;
    return v;
}

Ket operator*(const Operator& m, const Ket& v) {
    if (m.dim() != v.dim()) throw std::invalid_argument("Operator*Ket: dimension mismatch");
    Ket r(m.dim());
    for (int i = 0; i < m.dim(); ++i) {
        cx s = 0.0;
        for (int j = 0; j < m.dim(); ++j) s += m(i, j) * v[j];
        r[i] = s;
    }
    return r;
}

cx inner(const Ket& a, const Ket& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("inner: dimension mismatch");
    cx s = 0.0;
    for (int i = 0; i < a.dim(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

Operator outer(const Ket& a, const Ket& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("outer: dimension mismatch");
    Operator r(a.dim());
    for (int i = 0; i < a.dim(); ++i)
        for (int j = 0; j < a.dim(); ++j) r(i, j) = a[i] * std::conj(b[j]);
    return r;
}

Operator tensor(const Operator& a, const Operator& b) {
    const int na = a.dim(), nb = b.dim();
    Operator r(na * nb);
    for (int ia = 0; ia < na; ++ia)
        for (int ja = 0; ja < na; ++ja) {
            const cx f = a(ia, ja);
            if (f == cx(0.0)) continue;
            for (int ib = 0; ib < nb; ++ib)
                for (int jb = 0; jb < nb; ++jb)
                    r(ia * nb + ib, ja * nb + jb) = f * b(ib, jb);
        }
    return r;
}

Ket tensor(const Ket& a, const Ket& b) {
    Ket r(a.dim() * b.dim());
    for (int i = 0; i < a.dim(); ++i)
        for (int j = 0; j < b.dim(); ++j) r[i * b.dim() + j] = a[i] * b[j];
    return r;
}

Operator partial_trace(const Operator& rho, int dim_a, int dim_b, int keep) {
    if (dim_a <= 0 || dim_b <= 0) throw std::invalid_argument("partial_trace: nonpositive dimension");
    if (rho.dim() != dim_a * dim_b)
        throw std::invalid_argument("partial_trace: operator dimension does not factor as requested");
    if (keep != 0 && keep != 1) throw std::invalid_argument("partial_trace: keep must be 0 or 1");

    if (keep == 0) {
        Operator r(dim_a);
        for (int i = 0; i < dim_a; ++i)
            for (int j = 0; j < dim_a; ++j) {
                cx s = 0.0;
                for (int b = 0; b < dim_b; ++b) s += rho(i * dim_b + b, j * dim_b + b);
                r(i, j) = s;
            }
        return r;
    }
    Operator r(dim_b);
    for (int i = 0; i < dim_b; ++i)
        for (int j = 0; j < dim_b; ++j) {
            cx s = 0.0;
            for (int a = 0; a < dim_a; ++a) s += rho(a * dim_b + i, a * dim_b + j);
            r(i, j) = s;
        }
    return r;
}

Operator pauli(PauliAxis axis) {
    Operator m(2);
    switch (axis) {
        case PauliAxis::X: m(0, 1) = 1.0; m(1, 0) = 1.0; break;
        case PauliAxis::Y: m(0, 1) = cx(0.0, -1.0); m(1, 0) = cx(0.0, 1.0); break;
        case PauliAxis::Z: m(0, 0) = 1.0; m(1, 1) = -1.0; break;
    }
    return m;
}

Operator pauli_projector(PauliAxis axis, int sign) {
    if (sign != 1 && sign != -1) throw std::invalid_argument("pauli_projector: sign must be +-1");
    Operator p = Operator::identity(2);
    p += cx(static_cast<double>(sign)) * pauli(axis);
    p *= 0.5;
    return p;
}

DensityCheck check_density_matrix(const Operator& rho, double tol) {
    DensityCheck c;
    double herm = 0.0;
    for (int i = 0; i < rho.dim(); ++i)
        for (int j = i; j < rho.dim(); ++j)
            herm = std::max(herm, std::abs(rho(i, j) - std::conj(rho(j, i))));
    c.hermiticity_error = herm;
    c.trace_error = std::abs(rho.trace() - cx(1.0));

    if (herm > tol) {
        c.violation = "hermiticity";
        return c;
    }
    if (c.trace_error > tol) {
        c.violation = "trace";
        return c;
    }
    // Eigenvalues of the Hermitian part; at this point the anti-Hermitian
    // remainder is below tol.
    Operator h = rho;
    h += rho.adjoint();
    h *= 0.5;
    const EigenSystem es = eigen_hermitian(h);
    c.min_eigenvalue = es.values.front();
    if (c.min_eigenvalue < -tol) {
        c.violation = "positivity";
        return c;
    }
    c.ok = true;
    return c;
}

EigenSystem eigen_hermitian(const Operator& a, double off_tol, int max_sweeps) {
    const int n = a.dim();
    Operator m = a;
    // Work on the exactly Hermitian part so roundoff in the input cannot
    // leave a residual anti-Hermitian component behind.
    m += a.adjoint();
    m *= 0.5;
    Operator v = Operator::identity(n);

    const double scale = std::max(1.0, m.frobenius_norm());
    const double target = off_tol * scale;

    auto off_norm = [&]() {
        double s = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) s += 2.0 * std::norm(m(p, q));
        return std::sqrt(s);
    };

    for (int sweep = 0; sweep < max_sweeps && off_norm() > target; ++sweep) {
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                const cx apq = m(p, q);
                const double mag = std::abs(apq);
                if (mag <= target / (n * n)) continue;

                // Phase that makes the coupling real, then a real Jacobi
                // rotation on the 2x2 block.
                const double phi = std::arg(apq);
                const double app = m(p, p).real();
                const double aqq = m(q, q).real();
                const double tau = (aqq - app) / (2.0 * mag);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double cth = 1.0 / std::sqrt(1.0 + t * t);
                const double sth = t * cth;
                const cx up = cx(cth, 0.0);                 // U(p,p)
                const cx uq = std::polar(cth, -phi);        // U(q,q)
                const cx upq = cx(sth, 0.0);                // U(p,q)
                const cx uqp = std::polar(-sth, -phi);      // U(q,p)

                // Columns p and q: M <- M U
                for (int k = 0; k < n; ++k) {
                    const cx mp = m(k, p), mq = m(k, q);
                    m(k, p) = mp * up + mq * uqp;
                    m(k, q) = mp * upq + mq * uq;
                }
                // Rows p and q: M <- U^dag M
                for (int k = 0; k < n; ++k) {
                    const cx mp = m(p, k), mq = m(q, k);
                    m(p, k) = std::conj(up) * mp + std::conj(uqp) * mq;
                    m(q, k) = std::conj(upq) * mp + std::conj(uq) * mq;
                }
                // Accumulate eigenvectors: V <- V U
                for (int k = 0; k < n; ++k) {
                    const cx vp = v(k, p), vq = v(k, q);
                    v(k, p) = vp * up + vq * uqp;
                    v(k, q) = vp * upq + vq * uq;
                }
                m(p, q) = 0.0;
                m(q, p) = 0.0;
            }
    }

    EigenSystem es;
    es.values.resize(static_cast<size_t>(n));
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) { return m(i, i).real() < m(j, j).real(); });

    es.vectors = Operator(n);
    for (int c = 0; c < n; ++c) {
        es.values[static_cast<size_t>(c)] = m(order[static_cast<size_t>(c)], order[static_cast<size_t>(c)]).real();
        for (int r = 0; r < n; ++r) es.vectors(r, c) = v(r, order[static_cast<size_t>(c)]);
    }
    return es;
}

Operator hermitian_sqrt(const Operator& a) {
    const EigenSystem es = eigen_hermitian(a);
    const int n = a.dim();
    Operator r(n);
    for (int k = 0; k < n; ++k) {
        const double lam = es.values[static_cast<size_t>(k)];
        if (lam <= 0.0) continue;
        const double s = std::sqrt(lam);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                r(i, j) += s * es.vectors(i, k) * std::conj(es.vectors(j, k));
    }
    return r;
}

double trace_distance(const Operator& a, const Operator& b) {
    Operator d = a;
    d -= b;
    const EigenSystem es = eigen_hermitian(d);
    double s = 0.0;
    for (double lam : es.values) s += std::abs(lam);
    return 0.5 * s;
}

std::string format_entry(cx z) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g%+.12gi", z.real(), z.imag());
    return buf;
}

void write_operator(std::ostream& os, const Operator& m) {
    os << m.dim() << "\n";
    for (int i = 0; i < m.dim(); ++i) {
        for (int j = 0; j < m.dim(); ++j) {
            if (j) os << ' ';
            os << format_entry(m(i, j));
        }
        os << "\n";
    }
}

namespace {

cx parse_entry(const std::string& tok) {
    const char* s = tok.c_str();
    char* end = nullptr;
    const double re = std::strtod(s, &end);
    if (end == s) throw std::runtime_error("read_operator: bad entry '" + tok + "'");
    const char* s2 = end;
    const double im = std::strtod(s2, &end);
    if (end == s2 || *end != 'i')
        throw std::runtime_error("read_operator: bad entry '" + tok + "'");
    return {re, im};
}

} // namespace

Operator read_operator(std::istream& is) {
    std::string line;
    int dim = 0;
    while (std::getline(is, line)) {
        const auto pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == '#') continue;
        dim = std::stoi(line);
        break;
    }
    if (dim <= 0) throw std::runtime_error("read_operator: missing or invalid dimension");
    Operator m(dim);
    for (int i = 0; i < dim; ++i) {
        if (!std::getline(is, line)) throw std::runtime_error("read_operator: truncated at row " + std::to_string(i));
        std::istringstream row(line);
        std::string tok;
        for (int j = 0; j < dim; ++j) {
            if (!(row >> tok))
                throw std::runtime_error("read_operator: row " + std::to_string(i) + " has too few entries");
            m(i, j) = parse_entry(tok);
        }
    }
    return m;
}

std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b) {
    const size_t n = b.size();
    if (a.size() != n * n) throw std::invalid_argument("solve_linear: size mismatch");
    for (size_t col = 0; col < n; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        if (std::abs(a[piv * n + col]) < 1e-14)
            throw std::runtime_error("solve_linear: singular system");
        if (piv != col) {
            for (size_t c = 0; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
            std::swap(b[piv], b[col]);
        }
        const double d = a[col * n + col];
        for (size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / d;
            if (f == 0.0) continue;
            for (size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (size_t ri = n; ri-- > 0;) {
        double s = b[ri];
        for (size_t c = ri + 1; c < n; ++c) s -= a[ri * n + c] * x[c];
        x[ri] = s / a[ri * n + ri];
    }
    return x;
}

} // namespace ipe
