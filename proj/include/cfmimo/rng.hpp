// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <armadillo>
#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>

namespace cfmimo {

namespace rng_detail {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace rng_detail

// Counter-based random substream in the SplittableRandom style: output i is a
// pure function of (key, i), and the key is a pure function of (seed, path).
// Every (sample, pair) substream can therefore be generated on any worker, in
// any order, with identical results.
class Substream {
  public:
    Substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
        : key_(rng_detail::mix64(seed + rng_detail::kGamma))
    {
        for (auto id : path)
            key_ = rng_detail::mix64(key_ ^ rng_detail::mix64(id + rng_detail::kGamma));
    }

    std::uint64_t next_u64() { return rng_detail::mix64(key_ + (++counter_) * rng_detail::kGamma); }

    // Uniform in [0, 1).
    double next_u01() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe as a log() argument.
    double next_u01_open() { return double((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_u01(); }

    // Circularly symmetric complex normal with unit variance, E{|x|^2} = 1.
    std::complex<double> next_cn()
    {
        const double r = std::sqrt(-std::log(next_u01_open()));
        const double phi = 2.0 * M_PI * next_u01();
        return {r * std::cos(phi), r * std::sin(phi)};
    }

    // Real standard normal.
    double next_gauss()
    {
        const double r = std::sqrt(-2.0 * std::log(next_u01_open()));
        return r * std::cos(2.0 * M_PI * next_u01());
    }

    arma::cx_vec cn_vector(arma::uword n)
    {
        arma::cx_vec v(n);
        for (arma::uword i = 0; i < n; ++i)
            v(i) = next_cn();
        return v;
    }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace cfmimo
