// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <armadillo>
#include <complex>
#include <stdexcept>
#include <string>

namespace cfmimo {

using cx = std::complex<double>;

// Thrown when a system handed to hermitian_solve (or a Rayleigh denominator
// after all regularization attempts) is not positive definite.
class indefinite_system_error : public std::runtime_error {
  public:
    explicit indefinite_system_error(const std::string& what) : std::runtime_error(what) {}
};

// Generalized Rayleigh quotient q(w) = |w^H b|^2 / (w^H A w) with Hermitian
// positive semidefinite denominator A.
struct HermitianForm {
    arma::cx_vec numerator;   // b
    arma::cx_mat denominator; // A
};

struct RayleighMax {
    arma::cx_vec argmax;      // w* = A^{-1} b (defined up to nonzero scale)
    double value = 0.0;       // b^H A^{-1} b = max over w of q(w)
    bool regularized = false; // true when escalation beyond the default ridge was needed
};

// Column-major stacking. unvec(vec(M), rows, cols) == M exactly.
arma::cx_vec vec(const arma::cx_mat& m);
arma::cx_mat unvec(const arma::cx_vec& v, arma::uword rows, arma::uword cols);

arma::cx_mat kron(const arma::cx_mat& a, const arma::cx_mat& b);

// acc += scale * kron(a, b) without materializing the Kronecker product.
void add_kron(arma::cx_mat& acc, const arma::cx_mat& a, const arma::cx_mat& b, cx scale = cx(1.0, 0.0));

bool is_hermitian(const arma::cx_mat& a, double rel_tol = 1e-12);

// Solves A X = B for Hermitian positive definite A via Cholesky factorization.
arma::cx_mat hermitian_solve(const arma::cx_mat& a, const arma::cx_mat& b);

// Maximizes q(w) = |w^H b|^2 / (w^H A w). The denominator is regularized as
// A + eps * tr(A)/n * I with eps = 1e-12; if the factorization still fails the
// ridge is escalated (flagged via RayleighMax::regularized) before giving up.
RayleighMax rayleigh_max(const HermitianForm& form);

} // namespace cfmimo
