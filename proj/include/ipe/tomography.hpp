// tomography.hpp — reconstruction of the 4x4 ion-photon density matrix
// from joint counts.
//
// Two routes: linear inversion (least squares over the projector set,
// not positivity-constrained — the cross-check) and iterated
// maximum-likelihood (the production path), a diluted R*rho*R fixed
// point that keeps the log-likelihood nondecreasing.

#pragma once

#include "ipe/core.hpp"
#include "ipe/measure.hpp"

namespace ipe {

// Projector measured jointly by (ion outcome, detector) under a setting:
// (ion Pauli eigenprojector) (x) (analyzer port projector). The four
// elements of any setting sum to the identity.
Operator povm_element(const BasisSetting& setting, int detector, IonOutcome ion);

// Least-squares solution of tr(rho * proj) = frequency over all settings
// of the table. Hermitian with unit trace by construction; eigenvalues
// may come out negative for noisy finite samples.
Operator linear_inversion(const CountTable& counts);

// Multinomial log-likelihood sum_k n_k log tr(rho Pi_k) over the
// detected outcomes. Throws when some observed outcome has nonpositive
// probability under rho.
double loglikelihood(const Operator& rho, const CountTable& counts);

struct TomographyResult {
    Operator rho;
    int iterations = 0;
    double log_likelihood = 0.0;
    bool converged = false;
    double max_ll_decrease = 0.0; // largest single-step drop observed (monotonicity audit)
};

// Diluted R*rho*R iteration from the maximally mixed state
// (dilution 0.1). Stops when the log-likelihood changes by less than
// `tol` or after max_iterations; `converged` reports which.
TomographyResult mle_reconstruct(const CountTable& counts, double tol = 1e-10,
                                 int max_iterations = 100000);

} // namespace ipe
