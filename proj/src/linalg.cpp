// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#include "cfmimo/linalg.hpp"

namespace cfmimo {

arma::cx_vec vec(const arma::cx_mat& m)
{
    return arma::vectorise(m);
}

arma::cx_mat unvec(const arma::cx_vec& v, arma::uword rows, arma::uword cols)
{
    if (v.n_elem != rows * cols)
        throw std::invalid_argument("unvec: vector length " + std::to_string(v.n_elem) +
                                    " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
    return arma::reshape(v, rows, cols);
}

arma::cx_mat kron(const arma::cx_mat& a, const arma::cx_mat& b)
{
    return arma::kron(a, b);
}

void add_kron(arma::cx_mat& acc, const arma::cx_mat& a, const arma::cx_mat& b, cx scale)
{
    const arma::uword ar = a.n_rows, ac = a.n_cols, br = b.n_rows, bc = b.n_cols;
    if (acc.n_rows != ar * br || acc.n_cols != ac * bc)
        throw std::invalid_argument("add_kron: accumulator shape mismatch");
    for (arma::uword j = 0; j < ac; ++j) {
        for (arma::uword i = 0; i < ar; ++i) {
            const cx w = scale * a(i, j);
            if (w == cx(0.0, 0.0))
                continue;
            acc.submat(i * br, j * bc, (i + 1) * br - 1, (j + 1) * bc - 1) += w * b;
        }
    }
}

bool is_hermitian(const arma::cx_mat& a, double rel_tol)
{
    if (a.n_rows != a.n_cols)
        return false;
    const double scale = arma::norm(a, "fro");
    if (scale == 0.0)
        return true;
    return arma::norm(a - a.t(), "fro") <= rel_tol * scale;
}

arma::cx_mat hermitian_solve(const arma::cx_mat& a, const arma::cx_mat& b)
{
    if (a.n_rows != a.n_cols || a.n_rows != b.n_rows)
        throw std::invalid_argument("hermitian_solve: dimension mismatch");
    arma::cx_mat r;
    if (!arma::chol(r, arma::cx_mat((a + a.t()) * 0.5)))
        throw indefinite_system_error("hermitian_solve: system is not positive definite");
    return arma::solve(arma::trimatu(r), arma::solve(arma::trimatl(r.t()), b));
}

RayleighMax rayleigh_max(const HermitianForm& form)
{
    const arma::uword n = form.denominator.n_rows;
    if (form.denominator.n_cols != n || form.numerator.n_elem != n)
        throw std::invalid_argument("rayleigh_max: dimension mismatch");
    if (arma::norm(form.numerator) == 0.0)
        throw std::invalid_argument("rayleigh_max: zero numerator vector");

    const arma::cx_mat a = (form.denominator + form.denominator.t()) * 0.5;
    double ridge_scale = std::real(arma::trace(a)) / double(n);
    if (!(ridge_scale > 0.0))
        ridge_scale = 1.0;

    double eps = 1e-12;
    for (int attempt = 0; attempt < 8; ++attempt) {
        arma::cx_mat a_reg = a;
        a_reg.diag() += cx(eps * ridge_scale, 0.0);
        arma::cx_mat r;
        if (arma::chol(r, a_reg)) {
            arma::cx_vec y = arma::solve(arma::trimatl(r.t()), form.numerator);
            arma::cx_vec w = arma::solve(arma::trimatu(r), y);
            RayleighMax out;
            out.argmax = std::move(w);
            out.value = std::real(arma::cdot(form.numerator, out.argmax));
            out.regularized = attempt > 0;
            return out;
        }
        eps *= 100.0;
    }
    throw indefinite_system_error("rayleigh_max: denominator not positive definite after regularization");
}

} // namespace cfmimo
