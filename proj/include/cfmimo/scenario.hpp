// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cfmimo/linalg.hpp"

namespace cfmimo {

enum class PilotPolicy { round_robin, greedy };

// Network-wide constants for one simulation. Units are SI (meters, watts,
// radians) unless the name says otherwise.
struct NetworkConfig {
    arma::uword num_aps = 8;          // M
    arma::uword num_antennas = 2;     // N, per AP
    arma::uword num_ues = 8;          // K
    arma::uword pilot_len = 2;        // tau_p, channel uses
    arma::uword coherence_len = 200;  // tau_c, channel uses
    double area_side_m = 1000.0;
    double height_diff_m = 11.0;
    double tx_power_w = 0.2;                         // p_k, same for every UE
    double noise_power_w = 3.9810717055349694e-13;   // -94 dBm
    double angular_std_rad = 15.0 * M_PI / 180.0;
    double rician_range_m = std::numeric_limits<double>::infinity();
    bool phase_shifts = true;
    PilotPolicy pilot_policy = PilotPolicy::greedy;
    double pathloss_const_db = -30.18; // beta[dB] = const - exp * log10(d / 1 m)
    double pathloss_exp = 26.0;
    std::uint64_t seed = 1;

    void validate() const; // throws std::invalid_argument
    double prelog() const { return double(coherence_len - pilot_len) / double(coherence_len); }
};

struct Geometry {
    arma::mat ap_pos;  // 2 x M
    arma::mat ue_pos;  // 2 x K
    arma::mat dist;    // M x K wrap-around distance, incl. height difference
    arma::mat azimuth; // M x K angle of the wrapped AP->UE displacement
};

struct PilotAssignment {
    arma::uword pilot_len = 1;
    arma::uvec pilot_of_ue;                          // K entries in [0, tau_p)
    std::vector<std::vector<arma::uword>> copilot;   // per UE: sorted co-pilot set incl. itself
};

// Everything that is fixed for one (AP m, UE k) pair once locations are drawn.
struct PairStatistics {
    double distance = 0.0;
    double azimuth = 0.0;
    double beta = 0.0;      // linear large-scale gain
    double kappa = 0.0;     // Rician factor (0 for Rayleigh links)
    double beta_los = 0.0;
    double beta_nlos = 0.0;
    bool has_los = false;

    arma::cx_vec g_los;       // LoS vector, N
    arma::cx_mat R_nlos;      // NLoS spatial correlation, N x N
    arma::cx_mat Psi;         // pilot Gram, N x N
    arma::cx_mat R_hat;       // estimate covariance, N x N
    arma::cx_mat C_err;       // estimation-error covariance, N x N
    arma::cx_mat R_bar;       // g_los g_los^H + R_hat
    arma::cx_mat est_gain;    // sqrt(p) R_nlos Psi^{-1}
    arma::cx_mat nlos_factor; // F with F F^H = R_nlos (eigen factorization)
};

// A full scenario realization: geometry, pilots and all per-pair statistics.
// Immutable once built; shareable across Monte-Carlo workers.
struct ScenarioStatistics {
    NetworkConfig config;
    Geometry geometry;
    PilotAssignment pilots;
    std::vector<PairStatistics> pair_stats; // index m * K + k

    const PairStatistics& pair(arma::uword m, arma::uword k) const
    {
        return pair_stats[m * config.num_ues + k];
    }

    // T_mlk = R_ml Psi_mk^{-1} R_mk for l in P_k, aligned with pilots.copilot[k].
    const arma::cx_mat& copilot_cross(arma::uword m, arma::uword k, std::size_t copilot_index) const
    {
        return copilot_cross_[(m * config.num_ues + k)][copilot_index];
    }

    bool all_rayleigh() const;

    // Collective (stacked, MN-dim) forms used by the centralized processing path.
    arma::cx_vec stacked_los(arma::uword k) const;       // [g_los_1k; ...; g_los_Mk], no phases
    arma::cx_mat collective_R_nlos(arma::uword k) const; // blockdiag
    arma::cx_mat collective_Psi(arma::uword k) const;    // blockdiag
    arma::cx_mat collective_R_hat(arma::uword k) const;  // blockdiag
    arma::cx_mat collective_C(arma::uword k) const;      // blockdiag
    // E{g_bar_k g_bar_k^H}: blockdiag of per-AP outer products in the phase-shift
    // model, full outer product when phase shifts are mitigated.
    arma::cx_mat collective_G_bar(arma::uword k) const;
    arma::cx_mat collective_R_bar(arma::uword k) const;  // collective_G_bar + collective_R_hat
    arma::cx_mat collective_cross(arma::uword k, std::size_t copilot_index) const; // blockdiag T_lk

    std::vector<std::vector<arma::cx_mat>> copilot_cross_; // [m*K+k][copilot index]
};

// Wrapped displacement from a to b on a ring of circumference side; the result
// has the smallest magnitude among all images.
double wrap_delta(double from, double to, double side);

Geometry place_network(const NetworkConfig& config);

// kappa = 10^(1.3 - 0.003 d), d in meters.
double rician_factor(double distance_m);

double pathloss_db(double distance_m, const NetworkConfig& config);
double pathloss_linear(double distance_m, const NetworkConfig& config);

// Half-wavelength ULA steering scaled to the LoS gain: [g]_n = sqrt(beta_los) e^{j pi (n-1) sin(angle)}.
arma::cx_vec los_vector(double beta_los, double angle_rad, arma::uword num_antennas);

// Gaussian local scattering correlation (closed-form approximation), projected
// to the PSD cone with the trace renormalized to N * beta_nlos.
arma::cx_mat local_scattering_correlation(double beta_nlos, double angle_rad, double angular_std_rad,
                                          arma::uword num_antennas);

PilotAssignment assign_pilots(arma::uword num_ues, arma::uword pilot_len, PilotPolicy policy,
                              const arma::mat& beta = arma::mat());

ScenarioStatistics build_statistics(const NetworkConfig& config);

} // namespace cfmimo
