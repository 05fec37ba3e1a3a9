// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/scenario.hpp"

namespace cfmimo {

enum class Provenance { identity, mc_obe, closed_obe, manual };

// A bilinear-equalizer matrix: the combiner is v = W g_hat with W built from
// channel statistics only, held fixed across coherence blocks.
struct BEMatrix {
    bool centralized = true;
    Provenance provenance = Provenance::manual;
    arma::cx_mat w;                     // centralized: MN x MN
    std::vector<arma::cx_mat> w_per_ap; // local: M matrices, N x N each
    bool regularized = false;           // solver escalated beyond the default ridge
};

BEMatrix identity_be(arma::uword stack_dim);
BEMatrix identity_local_be(arma::uword num_aps, arma::uword num_antennas);

std::string be_to_json(const BEMatrix& be);
BEMatrix be_from_json(const std::string& text);

// Combining vectors for one coherence block. Centralized schemes fill an
// MN x K matrix (column per UE); local schemes an N x K x M cube (slice per AP).
struct CentralizedScheme {
    std::string name;
    bool per_sample = false; // true when the combiner depends on the instantaneous estimates
    std::function<arma::cx_mat(const ChannelSample&)> combine;
};

struct LocalScheme {
    std::string name;
    bool per_sample = false;
    std::function<arma::cx_cube(const ChannelSample&)> combine;
};

CentralizedScheme c_mr();
CentralizedScheme c_mmse(const ScenarioStatistics& stats);
CentralizedScheme be_centralized(std::string name, std::vector<BEMatrix> per_ue);
LocalScheme l_mr();
LocalScheme l_mmse(const ScenarioStatistics& stats);
LocalScheme be_local(std::string name, std::vector<BEMatrix> per_ue);

// ---------------------------------------------------------------------------
// Closed-form OBE constructions (statistics only, no channel samples).
// ---------------------------------------------------------------------------

struct CentralizedObeTerms {
    arma::cx_mat gamma;                // denominator quadratic form over vec(W)
    arma::cx_vec r_bar;                // vec of E{g_hat g_hat^H}
    arma::cx_vec g_bar;                // vec of the LoS outer-product matrix
    std::vector<arma::cx_vec> r_tilde; // vec of the co-pilot cross matrices, aligned with copilot[k]
    arma::cx_mat upsilon;              // LoS fourth-moment matrix (phase model only)
};

struct CobeClosed {
    BEMatrix w;    // unit Frobenius norm
    double sinr = 0.0;
    bool regularized = false;
    CentralizedObeTerms terms; // populated when keep_terms
};

// Centralized OBE in the random-phase-shift model.
CobeClosed c_obe_closed(const ScenarioStatistics& stats, arma::uword k, bool keep_terms = false);
// Variant for perfectly mitigated phase shifts (cross-UE LoS terms present).
CobeClosed c_obe_closed_nophase(const ScenarioStatistics& stats, arma::uword k, bool keep_terms = false);
// Exact block-diagonal solution of the phase-shift model, built from the
// per-AP distributed systems; avoids the (MN)^2-dim dense solve.
CobeClosed c_obe_closed_blockdiag(const ScenarioStatistics& stats, arma::uword k);

struct LocalObeTerms {
    arma::cx_mat gamma; // N^2 x N^2 denominator form over vec(W_mk)
    arma::cx_vec r_bar; // vec of per-AP E{g_hat g_hat^H}
};
LocalObeTerms local_obe_terms(const ScenarioStatistics& stats, arma::uword m, arma::uword k);

struct DlObeClosed {
    arma::cx_mat w; // N x N, unit Frobenius norm
    double sinr = 0.0;
    bool regularized = false;
};
DlObeClosed dl_obe_closed(const ScenarioStatistics& stats, arma::uword m, arma::uword k);

struct DistributedObeTerms {
    arma::cx_mat lambda; // MN^2 x MN^2 denominator form over [vec(W_1k); ...; vec(W_Mk)]
    arma::cx_vec h_bar;  // stacked vec of per-AP E{g_hat g_hat^H}
};

struct DgObeClosed {
    BEMatrix w; // local scope; stacked vec normalized to unit norm
    double sinr = 0.0;
    bool regularized = false;
    DistributedObeTerms terms;
};
DgObeClosed dg_obe_closed(const ScenarioStatistics& stats, arma::uword k, bool keep_terms = false);

// ---------------------------------------------------------------------------
// Monte-Carlo OBE constructions: the same maximizations with every expectation
// replaced by a plain sample mean over `realizations` coherence blocks.
// ---------------------------------------------------------------------------

struct McObe {
    BEMatrix w;
    double sinr = 0.0;
    double sinr_stderr = 0.0; // sub-batch spread of the maximized SINR
    bool regularized = false;
};

McObe c_obe_mc(const ScenarioStatistics& stats, std::uint64_t seed, arma::uword realizations,
               arma::uword k);
McObe dg_obe_mc(const ScenarioStatistics& stats, std::uint64_t seed, arma::uword realizations,
                arma::uword k);
McObe dl_obe_mc(const ScenarioStatistics& stats, std::uint64_t seed, arma::uword realizations,
                arma::uword m, arma::uword k);

// All (m, k) local OBE systems from a single batch pass.
struct DlObeMcAll {
    arma::mat sinr;                           // M x K
    arma::mat sinr_stderr;                    // M x K
    std::vector<std::vector<arma::cx_mat>> w; // [m][k], unit Frobenius norm
};
DlObeMcAll dl_obe_mc_all(const ScenarioStatistics& stats, std::uint64_t seed,
                         arma::uword realizations);

// LSFD weights: a* = (sum_l p_l Xi_kl - p_k b b^H + sigma^2 diag(d))^{-1} b,
// maximizing the two-layer SINR; *sinr receives p_k b^H a*.
arma::cx_vec lsfd_weights(const arma::cx_mat& weighted_xi_sum, const arma::cx_vec& b_kk,
                          const arma::vec& d_k, double p_k, double sigma2, double* sinr = nullptr,
                          bool* regularized = nullptr);

// sum_l p_l E{g_l g_l^H} + sigma^2 I restricted to AP m (N x N), and the
// collective version (MN x MN); shared by the closed-form assemblies.
arma::cx_mat signal_gram_ap(const ScenarioStatistics& stats, arma::uword m);
arma::cx_mat signal_gram_collective(const ScenarioStatistics& stats);

} // namespace cfmimo
