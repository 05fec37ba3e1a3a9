// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#include "cfmimo/complexity.hpp"

#include <cmath>
#include <cstdio>

namespace cfmimo {

std::vector<ComplexityEstimate> complexity_table(arma::uword m_in, arma::uword n_in, arma::uword k_in,
                                                 arma::uword tau_p, arma::uword realizations)
{
    const double m = double(m_in), n = double(n_in), k = double(k_in);
    const double ir = double(realizations);
    const double copilot = std::floor(k / double(tau_p)); // average co-pilot set size

    std::vector<ComplexityEstimate> table;
    table.push_back({"C-MMSE", "M^3 K N^3 I_r + M^2 K N^2 I_r", "M K N^3",
                     m * m * m * k * n * n * n * ir + m * m * k * n * n * ir, m * k * n * n * n});
    table.push_back({"C-OBE", "M^2 K N^2 I_r", "M^6 K N^6 + M^4 K N^4 floor(K/tau_p)",
                     m * m * k * n * n * ir,
                     std::pow(m, 6) * k * std::pow(n, 6) + std::pow(m, 4) * k * std::pow(n, 4) * copilot});
    table.push_back({"L-MMSE", "M K N^2 I_r + M N^3 I_r", "M K N^3",
                     m * k * n * n * ir + m * n * n * n * ir, m * k * n * n * n});
    table.push_back({"DG-OBE", "M K N^2 I_r", "M^3 K N^6 + M^2 K N^4 floor(K/tau_p)",
                     m * k * n * n * ir,
                     std::pow(m, 3) * k * std::pow(n, 6) + m * m * k * std::pow(n, 4) * copilot});
    table.push_back({"DL-OBE", "M K N^2 I_r", "M K N^6 + M K N^4 floor(K/tau_p)",
                     m * k * n * n * ir,
                     m * k * std::pow(n, 6) + m * k * std::pow(n, 4) * copilot});
    table.push_back({"LSFD", "-", "M K^2 N^3 + M^3 K", 0.0,
                     m * k * k * n * n * n + m * m * m * k});
    return table;
}

std::string complexity_report(arma::uword m, arma::uword n, arma::uword k, arma::uword tau_p,
                              arma::uword realizations)
{
    const auto table = complexity_table(m, n, k, tau_p, realizations);
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "Complexity orders at M=%llu N=%llu K=%llu tau_p=%llu I_r=%llu\n",
                  (unsigned long long)m, (unsigned long long)n, (unsigned long long)k,
                  (unsigned long long)tau_p, (unsigned long long)realizations);
    out += line;
    std::snprintf(line, sizeof(line), "%-8s  %-36s %-14s %-42s %s\n", "scheme", "combining",
                  "combining_ops", "precompute", "precompute_ops");
    out += line;
    for (const auto& row : table) {
        std::snprintf(line, sizeof(line), "%-8s  %-36s %-14.4g %-42s %.4g\n", row.scheme.c_str(),
                      row.combining_formula.c_str(), row.combining_flops,
                      row.precompute_formula.c_str(), row.precompute_flops);
        out += line;
    }
    return out;
}

} // namespace cfmimo
