// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "cfmimo/rng.hpp"
#include "cfmimo/scenario.hpp"

namespace cfmimo {

// One coherence block: phase shifts, true channels and phase-aware MMSE
// estimates, in stacked MN x K form. AP m owns rows [m*N, (m+1)*N).
struct ChannelSample {
    arma::mat theta;    // M x K
    arma::cx_mat g;     // MN x K
    arma::cx_mat g_hat; // MN x K
};

inline arma::cx_mat ap_rows(const arma::cx_mat& stacked, arma::uword m, arma::uword n)
{
    return stacked.rows(m * n, (m + 1) * n - 1);
}

// Sample x ~ CN(0, R) for Hermitian PSD R (eigen factorization, tolerates
// rank deficiency).
arma::cx_vec correlated_gaussian(const arma::cx_mat& r, Substream& stream);

// Deterministic per-index sampler: draw(i) depends only on (stats, seed, i).
class ChannelSampler {
  public:
    ChannelSampler(const ScenarioStatistics& stats, std::uint64_t seed);

    ChannelSample draw(std::uint64_t sample_index) const;

    const ScenarioStatistics& stats() const { return *stats_; }
    std::uint64_t seed() const { return seed_; }

  private:
    const ScenarioStatistics* stats_;
    std::uint64_t seed_;
};

std::vector<ChannelSample> batch_samples(const ScenarioStatistics& stats, std::uint64_t seed,
                                         arma::uword count);

// Binary batch dump for regression fixtures. Layout: 'CFMB', u32 version, then
// u32 M, N, K, count (little endian), then count records of g followed by
// g_hat, each MN x K column-major complex64 (float32 re, float32 im).
void dump_batch(const std::string& path, const ScenarioStatistics& stats,
                const std::vector<ChannelSample>& batch);
std::vector<ChannelSample> load_batch(const std::string& path, arma::uword expect_m,
                                      arma::uword expect_n, arma::uword expect_k);

} // namespace cfmimo
