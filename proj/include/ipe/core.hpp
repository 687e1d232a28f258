// core.hpp — dense complex linear algebra and two-qubit state primitives.
//
// Everything here operates on small matrices (dimension <= ~12): direct
// dense algorithms throughout, no sparse or blocked paths. Density
// matrices, Hamiltonians and measurement operators all share the
// Operator type; pure states use Ket.

#pragma once

#include <complex>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace ipe {

using cx = std::complex<double>;

// Square complex matrix with explicit dimension. Value type: cheap to
// copy at these sizes, safe to share across threads once built.
class Operator {
public:
    Operator() = default;
    explicit Operator(int dim) : dim_(dim), a_(static_cast<size_t>(dim) * dim) {
        if (dim <= 0) throw std::invalid_argument("Operator: dimension must be positive");
    }

    static Operator identity(int dim) {
        Operator m(dim);
        for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
        return m;
    }

    int dim() const { return dim_; }

    cx& operator()(int r, int c) { return a_[static_cast<size_t>(r) * dim_ + c]; }
    const cx& operator()(int r, int c) const { return a_[static_cast<size_t>(r) * dim_ + c]; }

    Operator& operator+=(const Operator& o);
    Operator& operator-=(const Operator& o);
    Operator& operator*=(cx s);

    Operator adjoint() const;
    cx trace() const;
    double frobenius_norm() const;
    double max_abs() const;

    const std::vector<cx>& data() const { return a_; }

private:
    int dim_ = 0;
    std::vector<cx> a_;
};

Operator operator+(Operator a, const Operator& b);
Operator operator-(Operator a, const Operator& b);
Operator operator*(const Operator& a, const Operator& b);
Operator operator*(cx s, Operator a);

// Column vector of complex amplitudes.
struct Ket {
    std::vector<cx> amp;

    Ket() = default;
    explicit Ket(int dim) : amp(static_cast<size_t>(dim)) {
        if (dim <= 0) throw std::invalid_argument("Ket: dimension must be positive");
    }

    int dim() const { return static_cast<int>(amp.size()); }
    cx& operator[](int i) { return amp[static_cast<size_t>(i)]; }
    const cx& operator[](int i) const { return amp[static_cast<size_t>(i)]; }

    double norm() const;
    void normalize();

    // Basis vector |i> in the given dimension.
    static Ket basis(int dim, int i);
};

Ket operator*(const Operator& m, const Ket& v);
cx inner(const Ket& a, const Ket& b);       // <a|b>
Operator outer(const Ket& a, const Ket& b); // |a><b|

// Kronecker product; result dimension dim(a)*dim(b), subsystem a is the
// slow index.
Operator tensor(const Operator& a, const Operator& b);
Ket tensor(const Ket& a, const Ket& b);

// Trace out one half of a bipartite operator on C^dimA (x) C^dimB.
// keep = 0 retains subsystem A, keep = 1 retains B.
Operator partial_trace(const Operator& rho, int dim_a, int dim_b, int keep);

enum class PauliAxis { X, Y, Z };

Operator pauli(PauliAxis axis);

// Projector onto the +1 (sign=+1) or -1 (sign=-1) eigenstate of the
// Pauli operator along `axis`.
Operator pauli_projector(PauliAxis axis, int sign);

// Density-matrix physicality gate. `violation` names the first failed
// condition out of {"hermiticity", "trace", "positivity"} and is empty
// when the check passes.
struct DensityCheck {
    bool ok = false;
    std::string violation;
    double hermiticity_error = 0.0;
    double trace_error = 0.0;
    double min_eigenvalue = 0.0;
};

DensityCheck check_density_matrix(const Operator& rho, double tol = 1e-9);

// Eigendecomposition of a Hermitian matrix by cyclic Jacobi sweeps with
// complex plane rotations. Eigenvalues ascending; eigenvectors are the
// columns of `vectors`. Stops when the off-diagonal Frobenius norm falls
// below off_tol * max(1, ||A||_F).
struct EigenSystem {
    std::vector<double> values;
    Operator vectors;
};

EigenSystem eigen_hermitian(const Operator& a, double off_tol = 1e-12, int max_sweeps = 100);

// Principal square root of a positive semidefinite matrix; small negative
// eigenvalues (numerical noise) are clipped to zero.
Operator hermitian_sqrt(const Operator& a);

// (1/2)||a - b||_1 for Hermitian a, b.
double trace_distance(const Operator& a, const Operator& b);

// Text serialization: one row per line, row-major, each entry printed as
// "re+imi" with 12 significant digits. The first non-comment line holds
// the dimension.
void write_operator(std::ostream& os, const Operator& m);
Operator read_operator(std::istream& is);
std::string format_entry(cx z);

// Dense real linear solve A x = b by Gaussian elimination with partial
// pivoting; A is n*n row-major and is consumed.
std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b);

} // namespace ipe
