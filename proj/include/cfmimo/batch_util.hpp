// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <armadillo>
#include <cmath>
#include <vector>

namespace cfmimo {

struct SubBatchBounds {
    arma::uword begin = 0, end = 0;
    arma::uword size() const { return end - begin; }
};

// Contiguous index ranges; boundaries depend only on (count, parts), never on
// the worker schedule.
inline std::vector<SubBatchBounds> split_batch(arma::uword count, arma::uword parts)
{
    std::vector<SubBatchBounds> out;
    out.reserve(parts);
    for (arma::uword j = 0; j < parts; ++j)
        out.push_back({j * count / parts, (j + 1) * count / parts});
    return out;
}

// Standard error of the mean estimated from sub-batch values.
inline double stderr_of(const std::vector<double>& values)
{
    if (values.size() < 2)
        return 0.0;
    double mean = 0.0;
    for (double v : values)
        mean += v;
    mean /= double(values.size());
    double ss = 0.0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    return std::sqrt(ss / double(values.size() - 1) / double(values.size()));
}

} // namespace cfmimo
