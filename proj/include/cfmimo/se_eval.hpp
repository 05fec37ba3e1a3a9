// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "cfmimo/combining.hpp"

namespace cfmimo {

enum class Bound {
    uatf_centralized,
    uatf_lsfd,
    uatf_ewdp,
    uatf_local,
    standard_centralized,
    standard_local,
};

enum class Method { mc, closed };

std::string bound_name(Bound b);
std::string method_name(Method m);

// Per-UE SINR/SE under one (scheme, bound, method). Local bounds carry one
// entry per (AP, UE) pair, flattened as m * K + k.
struct SEReport {
    std::string scheme;
    Bound bound = Bound::uatf_centralized;
    Method method = Method::mc;
    double prelog = 1.0;
    arma::uword samples = 0; // 0 for closed-form results
    bool degenerate = false; // some SINR clamped to zero (zero combiner or denominator)
    arma::vec sinr;
    arma::vec se;           // prelog * log2(1 + sinr)
    arma::vec sinr_stderr;  // sub-batch spread; zero for closed
    arma::vec se_stderr;
};

struct McOptions {
    arma::uword realizations = 10000;
    arma::uword subbatches = 10;
    std::uint64_t seed = 1;
    unsigned workers = 0; // 0: CFMIMO_WORKERS env var, else hardware concurrency
};

// Distributed second moments of the two-layer decoder, estimated from one batch.
struct MomentSet {
    arma::cx_mat b_kk;             // M x K, E{v_mk^H g_mk}
    std::vector<arma::cx_cube> xi; // per UE k: M x M x K cube, slice l = Xi_kl
    arma::mat d;                   // M x K, E{||v_mk||^2}
};

// ---------------------------------------------------------------------------
// Monte-Carlo evaluation. One pass over the batch serves all schemes; chunk
// boundaries and the reduction order are fixed, so results do not depend on
// the worker count.
// ---------------------------------------------------------------------------

std::vector<SEReport> evaluate_centralized_mc(const ScenarioStatistics& stats,
                                              const std::vector<CentralizedScheme>& schemes,
                                              const std::vector<Bound>& bounds,
                                              const McOptions& opts);

struct DistributedMcResult {
    std::vector<SEReport> reports;
    std::vector<MomentSet> moments;   // per scheme; filled when keep_moments
    std::vector<arma::cx_mat> lsfd_a; // per scheme: M x K optimal weights (when uatf_lsfd requested)
};

DistributedMcResult evaluate_distributed_mc(const ScenarioStatistics& stats,
                                            const std::vector<LocalScheme>& schemes,
                                            const std::vector<Bound>& bounds, const McOptions& opts,
                                            bool keep_moments = false);

// ---------------------------------------------------------------------------
// Closed-form evaluation for statistics-based (BE) combiners.
// ---------------------------------------------------------------------------

// Closed UatF SINR of the centralized combiner v = W g_hat; dispatches to the
// no-phase-shift variant when the scenario mitigates phase shifts.
double uatf_centralized_closed_sinr(const ScenarioStatistics& stats, arma::uword k,
                                    const arma::cx_mat& w);

// The LoS fourth-moment correction term of the closed UatF denominator
// (phase-shift model). Identically zero in the Rayleigh limit.
double uatf_centralized_omega(const ScenarioStatistics& stats, arma::uword k, const arma::cx_mat& w);
SEReport uatf_centralized_closed(const ScenarioStatistics& stats, const std::string& scheme,
                                 const std::vector<BEMatrix>& per_ue);

struct LsfdClosedTerms {
    arma::cx_vec b_bar;           // M
    arma::vec d_bar;              // M
    arma::cx_mat weighted_xi_sum; // sum_l p_l Xi_kl, M x M
};
LsfdClosedTerms lsfd_closed_terms(const ScenarioStatistics& stats, arma::uword k,
                                  const std::vector<arma::cx_mat>& w_per_ap);

struct LsfdClosedResult {
    SEReport ewdp;      // equal weights
    SEReport lsfd;      // optimal weights
    arma::cx_mat a_opt; // M x K
};
LsfdClosedResult lsfd_closed(const ScenarioStatistics& stats, const std::string& scheme,
                             const std::vector<BEMatrix>& per_ue);

double local_uatf_closed_sinr(const ScenarioStatistics& stats, arma::uword m, arma::uword k,
                              const arma::cx_mat& w);
SEReport local_uatf_closed(const ScenarioStatistics& stats, const std::string& scheme,
                           const std::vector<BEMatrix>& per_ue);

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct Aggregate {
    double avg_se = 0.0;
    double sum_se = 0.0;  // per-drop sum: entries-per-report times the average
    arma::vec cdf;        // sorted pooled per-UE SE values
};

Aggregate aggregate(const std::vector<SEReport>& reports);

double se_of_sinr(double prelog, double sinr);

} // namespace cfmimo
