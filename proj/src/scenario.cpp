// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#include "cfmimo/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "cfmimo/rng.hpp"

namespace cfmimo {

namespace {

// Substream path tags; each scenario-level draw gets its own branch.
enum : std::uint64_t { kStreamApPos = 0, kStreamUePos = 1 };

} // namespace

void NetworkConfig::validate() const
{
    if (num_aps < 1 || num_antennas < 1 || num_ues < 1)
        throw std::invalid_argument("config: M, N, K must all be >= 1");
    if (pilot_len < 1 || pilot_len > coherence_len)
        throw std::invalid_argument("config: need 1 <= tau_p <= tau_c");
    if (!(area_side_m > 0.0))
        throw std::invalid_argument("config: area side must be positive");
    if (!(tx_power_w > 0.0) || !(noise_power_w > 0.0))
        throw std::invalid_argument("config: powers must be positive");
    if (angular_std_rad < 0.0)
        throw std::invalid_argument("config: angular std must be nonnegative");
    if (rician_range_m < 0.0)
        throw std::invalid_argument("config: rician range must be nonnegative");
    if (height_diff_m < 0.0)
        throw std::invalid_argument("config: height difference must be nonnegative");
}

double wrap_delta(double from, double to, double side)
{
    double d = to - from;
    if (d > 0.5 * side)
        d -= side;
    else if (d < -0.5 * side)
        d += side;
    return d;
}

Geometry place_network(const NetworkConfig& config)
{
    config.validate();
    const arma::uword m_count = config.num_aps, k_count = config.num_ues;

    Geometry geo;
    geo.ap_pos.set_size(2, m_count);
    geo.ue_pos.set_size(2, k_count);

    for (arma::uword m = 0; m < m_count; ++m) {
        Substream s(config.seed, {kStreamApPos, m});
        geo.ap_pos(0, m) = s.uniform(0.0, config.area_side_m);
        geo.ap_pos(1, m) = s.uniform(0.0, config.area_side_m);
    }
    for (arma::uword k = 0; k < k_count; ++k) {
        Substream s(config.seed, {kStreamUePos, k});
        geo.ue_pos(0, k) = s.uniform(0.0, config.area_side_m);
        geo.ue_pos(1, k) = s.uniform(0.0, config.area_side_m);
    }

    geo.dist.set_size(m_count, k_count);
    geo.azimuth.set_size(m_count, k_count);
    for (arma::uword m = 0; m < m_count; ++m) {
        for (arma::uword k = 0; k < k_count; ++k) {
            const double dx = wrap_delta(geo.ap_pos(0, m), geo.ue_pos(0, k), config.area_side_m);
            const double dy = wrap_delta(geo.ap_pos(1, m), geo.ue_pos(1, k), config.area_side_m);
            geo.dist(m, k) = std::sqrt(dx * dx + dy * dy + config.height_diff_m * config.height_diff_m);
            geo.azimuth(m, k) = std::atan2(dy, dx);
        }
    }
    return geo;
}

double rician_factor(double distance_m)
{
    return std::pow(10.0, 1.3 - 0.003 * distance_m);
}

double pathloss_db(double distance_m, const NetworkConfig& config)
{
    return config.pathloss_const_db - config.pathloss_exp * std::log10(distance_m);
}

double pathloss_linear(double distance_m, const NetworkConfig& config)
{
    return std::pow(10.0, pathloss_db(distance_m, config) / 10.0);
}

arma::cx_vec los_vector(double beta_los, double angle_rad, arma::uword num_antennas)
{
    arma::cx_vec g(num_antennas);
    const double amp = std::sqrt(beta_los);
    const double step = M_PI * std::sin(angle_rad);
    for (arma::uword n = 0; n < num_antennas; ++n)
        g(n) = std::polar(amp, step * double(n));
    return g;
}

arma::cx_mat local_scattering_correlation(double beta_nlos, double angle_rad, double angular_std_rad,
                                          arma::uword num_antennas)
{
    const arma::uword n = num_antennas;
    arma::cx_mat r(n, n);
    const double sin_phi = std::sin(angle_rad);
    const double cos_phi = std::cos(angle_rad);
    for (arma::uword a = 0; a < n; ++a) {
        for (arma::uword b = 0; b < n; ++b) {
            const double gap = double(a) - double(b);
            const double phase = M_PI * gap * sin_phi;
            const double spread = M_PI * gap * cos_phi * angular_std_rad;
            r(a, b) = std::polar(beta_nlos * std::exp(-0.5 * spread * spread), phase);
        }
    }

    // The Gaussian approximation can be slightly indefinite for large spreads;
    // clip negative eigenvalues and restore the trace.
    arma::vec eigval;
    arma::cx_mat eigvec;
    if (!arma::eig_sym(eigval, eigvec, arma::cx_mat((r + r.t()) * 0.5)))
        throw std::runtime_error("local_scattering_correlation: eigendecomposition failed");
    if (eigval.min() < 0.0) {
        eigval.transform([](double v) { return v < 0.0 ? 0.0 : v; });
        const double target = beta_nlos * double(n);
        const double got = arma::accu(eigval);
        if (got > 0.0)
            eigval *= target / got;
        r = eigvec * arma::diagmat(arma::cx_vec(eigval, arma::vec(n, arma::fill::zeros))) * eigvec.t();
    }
    return r;
}

PilotAssignment assign_pilots(arma::uword num_ues, arma::uword pilot_len, PilotPolicy policy,
                              const arma::mat& beta)
{
    if (pilot_len < 1)
        throw std::invalid_argument("assign_pilots: tau_p must be >= 1");

    PilotAssignment pa;
    pa.pilot_len = pilot_len;
    pa.pilot_of_ue.set_size(num_ues);

    if (policy == PilotPolicy::round_robin || pilot_len >= num_ues) {
        for (arma::uword k = 0; k < num_ues; ++k)
            pa.pilot_of_ue(k) = k % pilot_len;
    } else {
        if (beta.n_cols != num_ues || beta.n_rows < 1)
            throw std::invalid_argument("assign_pilots: greedy policy needs the beta matrix");
        // First tau_p UEs get orthogonal pilots; each later UE joins the pilot
        // with the least summed gain toward its strongest AP.
        std::vector<double> load(pilot_len);
        for (arma::uword k = 0; k < num_ues; ++k) {
            if (k < pilot_len) {
                pa.pilot_of_ue(k) = k;
                continue;
            }
            const arma::uword best_ap = arma::index_max(beta.col(k));
            std::fill(load.begin(), load.end(), 0.0);
            for (arma::uword l = 0; l < k; ++l)
                load[pa.pilot_of_ue(l)] += beta(best_ap, l);
            arma::uword best_t = 0;
            for (arma::uword t = 1; t < pilot_len; ++t)
                if (load[t] < load[best_t])
                    best_t = t;
            pa.pilot_of_ue(k) = best_t;
        }
    }

    pa.copilot.assign(num_ues, {});
    for (arma::uword k = 0; k < num_ues; ++k)
        for (arma::uword l = 0; l < num_ues; ++l)
            if (pa.pilot_of_ue(l) == pa.pilot_of_ue(k))
                pa.copilot[k].push_back(l);
    return pa;
}

bool ScenarioStatistics::all_rayleigh() const
{
    for (const auto& p : pair_stats)
        if (p.has_los)
            return false;
    return true;
}

arma::cx_vec ScenarioStatistics::stacked_los(arma::uword k) const
{
    const arma::uword n = config.num_antennas;
    arma::cx_vec g(config.num_aps * n, arma::fill::zeros);
    for (arma::uword m = 0; m < config.num_aps; ++m)
        g.subvec(m * n, (m + 1) * n - 1) = pair(m, k).g_los;
    return g;
}

namespace {

arma::cx_mat blockdiag_of(const ScenarioStatistics& s, arma::uword k,
                          const arma::cx_mat PairStatistics::*field)
{
    const arma::uword n = s.config.num_antennas;
    arma::cx_mat out(s.config.num_aps * n, s.config.num_aps * n, arma::fill::zeros);
    for (arma::uword m = 0; m < s.config.num_aps; ++m)
        out.submat(m * n, m * n, (m + 1) * n - 1, (m + 1) * n - 1) = s.pair(m, k).*field;
    return out;
}

} // namespace

arma::cx_mat ScenarioStatistics::collective_R_nlos(arma::uword k) const
{
    return blockdiag_of(*this, k, &PairStatistics::R_nlos);
}

arma::cx_mat ScenarioStatistics::collective_Psi(arma::uword k) const
{
    return blockdiag_of(*this, k, &PairStatistics::Psi);
}

arma::cx_mat ScenarioStatistics::collective_R_hat(arma::uword k) const
{
    return blockdiag_of(*this, k, &PairStatistics::R_hat);
}

arma::cx_mat ScenarioStatistics::collective_C(arma::uword k) const
{
    return blockdiag_of(*this, k, &PairStatistics::C_err);
}

arma::cx_mat ScenarioStatistics::collective_G_bar(arma::uword k) const
{
    const arma::uword n = config.num_antennas;
    if (config.phase_shifts) {
        arma::cx_mat out(config.num_aps * n, config.num_aps * n, arma::fill::zeros);
        for (arma::uword m = 0; m < config.num_aps; ++m) {
            const arma::cx_vec& g = pair(m, k).g_los;
            out.submat(m * n, m * n, (m + 1) * n - 1, (m + 1) * n - 1) = g * g.t();
        }
        return out;
    }
    const arma::cx_vec g = stacked_los(k);
    return g * g.t();
}

arma::cx_mat ScenarioStatistics::collective_R_bar(arma::uword k) const
{
    return collective_G_bar(k) + collective_R_hat(k);
}

arma::cx_mat ScenarioStatistics::collective_cross(arma::uword k, std::size_t copilot_index) const
{
    const arma::uword n = config.num_antennas;
    arma::cx_mat out(config.num_aps * n, config.num_aps * n, arma::fill::zeros);
    for (arma::uword m = 0; m < config.num_aps; ++m)
        out.submat(m * n, m * n, (m + 1) * n - 1, (m + 1) * n - 1) = copilot_cross(m, k, copilot_index);
    return out;
}

ScenarioStatistics build_statistics(const NetworkConfig& config)
{
    config.validate();
    const arma::uword m_count = config.num_aps;
    const arma::uword k_count = config.num_ues;
    const arma::uword n = config.num_antennas;

    ScenarioStatistics s;
    s.config = config;
    s.geometry = place_network(config);

    // Large-scale gains, LoS vectors and NLoS correlations per pair.
    s.pair_stats.resize(m_count * k_count);
    arma::mat beta(m_count, k_count);
    for (arma::uword m = 0; m < m_count; ++m) {
        for (arma::uword k = 0; k < k_count; ++k) {
            PairStatistics& p = s.pair_stats[m * k_count + k];
            p.distance = s.geometry.dist(m, k);
            p.azimuth = s.geometry.azimuth(m, k);
            p.beta = pathloss_linear(p.distance, config);
            p.has_los = p.distance <= config.rician_range_m;
            p.kappa = p.has_los ? rician_factor(p.distance) : 0.0;
            p.beta_los = p.has_los ? p.kappa / (p.kappa + 1.0) * p.beta : 0.0;
            p.beta_nlos = p.beta - p.beta_los;
            p.g_los = p.has_los ? los_vector(p.beta_los, p.azimuth, n)
                                : arma::cx_vec(n, arma::fill::zeros);
            p.R_nlos = local_scattering_correlation(p.beta_nlos, p.azimuth, config.angular_std_rad, n);
            beta(m, k) = p.beta;
        }
    }

    s.pilots = assign_pilots(k_count, config.pilot_len, config.pilot_policy, beta);

    // Pilot Grams and estimation statistics. Psi depends only on (m, pilot),
    // so compute per pilot index and share.
    const double p_tx = config.tx_power_w;
    const double tau_p = double(config.pilot_len);
    s.copilot_cross_.resize(m_count * k_count);
    for (arma::uword m = 0; m < m_count; ++m) {
        std::vector<arma::cx_mat> psi_of_pilot(s.pilots.pilot_len);
        std::vector<bool> have(s.pilots.pilot_len, false);
        for (arma::uword k = 0; k < k_count; ++k) {
            PairStatistics& p = s.pair_stats[m * k_count + k];
            const arma::uword t = s.pilots.pilot_of_ue(k);
            if (!have[t]) {
                arma::cx_mat psi(n, n, arma::fill::zeros);
                for (arma::uword l : s.pilots.copilot[k])
                    psi += p_tx * tau_p * s.pair_stats[m * k_count + l].R_nlos;
                psi.diag() += cx(config.noise_power_w, 0.0);
                psi_of_pilot[t] = std::move(psi);
                have[t] = true;
            }
            p.Psi = psi_of_pilot[t];

            const arma::cx_mat psi_inv_R = hermitian_solve(p.Psi, p.R_nlos);
            p.R_hat = p_tx * tau_p * p.R_nlos * psi_inv_R;
            p.R_hat = (p.R_hat + p.R_hat.t()) * 0.5;
            p.C_err = p.R_nlos - p.R_hat;
            p.R_bar = p.g_los * p.g_los.t() + p.R_hat;
            p.est_gain = std::sqrt(p_tx) * psi_inv_R.t();

            // Eigen factorization tolerates rank-deficient correlation.
            arma::vec eigval;
            arma::cx_mat eigvec;
            if (!arma::eig_sym(eigval, eigvec, p.R_nlos))
                throw std::runtime_error("build_statistics: eigendecomposition failed");
            eigval.transform([](double v) { return v < 0.0 ? 0.0 : std::sqrt(v); });
            p.nlos_factor = eigvec * arma::diagmat(arma::cx_vec(eigval, arma::vec(n, arma::fill::zeros)));
        }
        for (arma::uword k = 0; k < k_count; ++k) {
            PairStatistics& p = s.pair_stats[m * k_count + k];
            const arma::cx_mat psi_inv_Rk = hermitian_solve(p.Psi, p.R_nlos);
            auto& cross = s.copilot_cross_[m * k_count + k];
            cross.reserve(s.pilots.copilot[k].size());
            for (arma::uword l : s.pilots.copilot[k]) {
                const PairStatistics& pl = s.pair_stats[m * k_count + l];
                cross.push_back(pl.R_nlos * psi_inv_Rk);
            }
        }
    }
    return s;
}

} // namespace cfmimo
