// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <armadillo>
#include <string>
#include <vector>

namespace cfmimo {

// Leading-order operation counts per realization of the AP/UE locations.
// `combining` covers the per-coherence-block combining design over I_r
// realizations; `precompute` the one-off statistics-based work.
struct ComplexityEstimate {
    std::string scheme;
    std::string combining_formula;
    std::string precompute_formula;
    double combining_flops = 0.0;
    double precompute_flops = 0.0;
};

std::vector<ComplexityEstimate> complexity_table(arma::uword m, arma::uword n, arma::uword k,
                                                 arma::uword tau_p, arma::uword realizations);

std::string complexity_report(arma::uword m, arma::uword n, arma::uword k, arma::uword tau_p,
                              arma::uword realizations);

} // namespace cfmimo
