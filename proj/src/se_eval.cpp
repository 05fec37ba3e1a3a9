// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#include "cfmimo/se_eval.hpp"

#include <algorithm>
#include <cmath>

#include "cfmimo/batch_util.hpp"
#include "cfmimo/parallel.hpp"

namespace cfmimo {

std::string bound_name(Bound b)
{
    switch (b) {
    case Bound::uatf_centralized: return "UatF-centralized";
    case Bound::uatf_lsfd: return "UatF-LSFD";
    case Bound::uatf_ewdp: return "UatF-EWDP";
    case Bound::uatf_local: return "UatF-local";
    case Bound::standard_centralized: return "standard-centralized";
    case Bound::standard_local: return "standard-local";
    }
    return "?";
}

std::string method_name(Method m)
{
    return m == Method::mc ? "mc" : "closed";
}

double se_of_sinr(double prelog, double sinr)
{
    return prelog * std::log2(1.0 + sinr);
}

namespace {

bool wants(const std::vector<Bound>& bounds, Bound b)
{
    return std::find(bounds.begin(), bounds.end(), b) != bounds.end();
}

double quotient_or_zero(double num, double denom, bool& degenerate)
{
    if (!(denom > 0.0) || num <= 0.0) {
        degenerate = true;
        return 0.0;
    }
    return num / denom;
}

// Fills per-entry stderr fields from per-sub-batch values.
void fill_stderr(SEReport& r, const std::vector<arma::vec>& sinr_subs, double prelog)
{
    const arma::uword n = r.sinr.n_elem;
    r.sinr_stderr.zeros(n);
    r.se_stderr.zeros(n);
    std::vector<double> s, se;
    for (arma::uword i = 0; i < n; ++i) {
        s.clear();
        se.clear();
        for (const auto& sub : sinr_subs) {
            s.push_back(sub(i));
            se.push_back(se_of_sinr(prelog, sub(i)));
        }
        r.sinr_stderr(i) = stderr_of(s);
        r.se_stderr(i) = stderr_of(se);
    }
}

void finish_report(SEReport& r)
{
    r.se.set_size(r.sinr.n_elem);
    for (arma::uword i = 0; i < r.sinr.n_elem; ++i)
        r.se(i) = se_of_sinr(r.prelog, r.sinr(i));
}

} // namespace

// ---------------------------------------------------------------------------
// Centralized Monte Carlo
// ---------------------------------------------------------------------------

namespace {

struct CentralAccum {
    arma::cx_vec num;   // sum of v_k^H g_k
    arma::mat interf;   // (l, k): sum of |v_k^H g_l|^2
    arma::vec vnorm;    // sum of ||v_k||^2
    arma::vec selog;    // sum of log2(1 + instantaneous SINR), standard bound
    void init(arma::uword k_count)
    {
        num.zeros(k_count);
        interf.zeros(k_count, k_count);
        vnorm.zeros(k_count);
        selog.zeros(k_count);
    }
};

arma::vec uatf_sinr_from(const CentralAccum& a, double n_samples, double p, double sigma2,
                         bool& degenerate)
{
    const arma::uword k_count = a.num.n_elem;
    arma::vec sinr(k_count);
    for (arma::uword k = 0; k < k_count; ++k) {
        const cx mean_num = a.num(k) / n_samples;
        const double num = p * std::norm(mean_num);
        const double denom = p * arma::accu(a.interf.col(k)) / n_samples - num +
                             sigma2 * a.vnorm(k) / n_samples;
        sinr(k) = quotient_or_zero(num, denom, degenerate);
    }
    return sinr;
}

} // namespace

std::vector<SEReport> evaluate_centralized_mc(const ScenarioStatistics& stats,
                                              const std::vector<CentralizedScheme>& schemes,
                                              const std::vector<Bound>& bounds, const McOptions& opts)
{
    const arma::uword k_count = stats.config.num_ues;
    const arma::uword stack = stats.config.num_aps * stats.config.num_antennas;
    const double p = stats.config.tx_power_w;
    const double sigma2 = stats.config.noise_power_w;
    const double prelog = stats.config.prelog();
    const bool want_uatf = wants(bounds, Bound::uatf_centralized);
    const bool want_std = wants(bounds, Bound::standard_centralized);
    if (!want_uatf && !want_std)
        return {};

    arma::cx_mat noise_err_gram; // sum_l p_l C_l + sigma^2 I
    if (want_std) {
        noise_err_gram.zeros(stack, stack);
        for (arma::uword l = 0; l < k_count; ++l)
            noise_err_gram += p * stats.collective_C(l);
        noise_err_gram.diag() += cx(sigma2, 0.0);
    }

    const auto sub = split_batch(opts.realizations, opts.subbatches);
    const ChannelSampler sampler(stats, opts.seed);
    std::vector<std::vector<CentralAccum>> acc(schemes.size(),
                                               std::vector<CentralAccum>(sub.size()));
    for (auto& per_scheme : acc)
        for (auto& a : per_scheme)
            a.init(k_count);

    run_tasks(sub.size(), opts.workers, [&](arma::uword j) {
        for (arma::uword i = sub[j].begin; i < sub[j].end; ++i) {
            const ChannelSample s = sampler.draw(i);
            for (std::size_t si = 0; si < schemes.size(); ++si) {
                const arma::cx_mat v = schemes[si].combine(s);
                CentralAccum& a = acc[si][j];
                if (want_uatf) {
                    const arma::cx_mat gv = s.g.t() * v; // (l,k) = g_l^H v_k
                    for (arma::uword k = 0; k < k_count; ++k)
                        a.num(k) += std::conj(gv(k, k));
                    a.interf += arma::square(arma::abs(gv));
                    a.vnorm += arma::sum(arma::square(arma::abs(v)), 0).t();
                }
                if (want_std) {
                    const arma::cx_mat qv = s.g_hat.t() * v; // (l,k) = g_hat_l^H v_k
                    const arma::cx_mat zv = noise_err_gram * v;
                    const arma::mat q2 = arma::square(arma::abs(qv));
                    for (arma::uword k = 0; k < k_count; ++k) {
                        const double own = p * q2(k, k);
                        const double cross = p * (arma::accu(q2.col(k)) - q2(k, k));
                        const double noise = std::real(arma::cdot(v.col(k), zv.col(k)));
                        const double denom = cross + noise;
                        a.selog(k) += std::log2(1.0 + (denom > 0.0 ? own / denom : 0.0));
                    }
                }
            }
        }
    });

    std::vector<SEReport> out;
    for (std::size_t si = 0; si < schemes.size(); ++si) {
        if (want_uatf) {
            SEReport r;
            r.scheme = schemes[si].name;
            r.bound = Bound::uatf_centralized;
            r.method = Method::mc;
            r.prelog = prelog;
            r.samples = opts.realizations;

            CentralAccum total;
            total.init(k_count);
            std::vector<arma::vec> sub_sinr;
            for (std::size_t j = 0; j < sub.size(); ++j) {
                if (sub[j].size() == 0)
                    continue;
                const CentralAccum& a = acc[si][j];
                bool sub_degen = false;
                sub_sinr.push_back(uatf_sinr_from(a, double(sub[j].size()), p, sigma2, sub_degen));
                total.num += a.num;
                total.interf += a.interf;
                total.vnorm += a.vnorm;
            }
            r.sinr = uatf_sinr_from(total, double(opts.realizations), p, sigma2, r.degenerate);
            finish_report(r);
            fill_stderr(r, sub_sinr, prelog);
            out.push_back(std::move(r));
        }
        if (want_std) {
            SEReport r;
            r.scheme = schemes[si].name;
            r.bound = Bound::standard_centralized;
            r.method = Method::mc;
            r.prelog = prelog;
            r.samples = opts.realizations;

            arma::vec total(k_count, arma::fill::zeros);
            std::vector<arma::vec> sub_sinr;
            for (std::size_t j = 0; j < sub.size(); ++j) {
                if (sub[j].size() == 0)
                    continue;
                const arma::vec mean_log = acc[si][j].selog / double(sub[j].size());
                sub_sinr.push_back(arma::exp2(mean_log) - 1.0);
                total += acc[si][j].selog;
            }
            const arma::vec mean_log = total / double(opts.realizations);
            r.sinr = arma::exp2(mean_log) - 1.0; // SE = prelog * mean log2(1+inst)
            finish_report(r);
            fill_stderr(r, sub_sinr, prelog);
            out.push_back(std::move(r));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Distributed Monte Carlo
// ---------------------------------------------------------------------------

namespace {

struct DistAccum {
    std::vector<arma::cx_mat> cmean;   // per k: M x K, sum of c_mkl = v_mk^H g_ml
    std::vector<arma::mat> c2;         // per k: M x K, sum of |c_mkl|^2
    std::vector<arma::cx_mat> wxs;     // per k: M x M, sum over samples of sum_l p_l c c^H
    arma::mat d;                       // M x K, sum of ||v_mk||^2
    arma::mat selog;                   // M x K, standard-local log sum
    std::vector<arma::cx_cube> fullxi; // per k: M x M x K, optional

    void init(arma::uword m_count, arma::uword k_count, bool keep_full)
    {
        cmean.assign(k_count, arma::cx_mat(m_count, k_count, arma::fill::zeros));
        c2.assign(k_count, arma::mat(m_count, k_count, arma::fill::zeros));
        wxs.assign(k_count, arma::cx_mat(m_count, m_count, arma::fill::zeros));
        d.zeros(m_count, k_count);
        selog.zeros(m_count, k_count);
        if (keep_full)
            fullxi.assign(k_count, arma::cx_cube(m_count, m_count, k_count, arma::fill::zeros));
    }

    void add(const DistAccum& o)
    {
        for (std::size_t k = 0; k < cmean.size(); ++k) {
            cmean[k] += o.cmean[k];
            c2[k] += o.c2[k];
            wxs[k] += o.wxs[k];
        }
        d += o.d;
        selog += o.selog;
        for (std::size_t k = 0; k < fullxi.size(); ++k)
            fullxi[k] += o.fullxi[k];
    }
};

struct DistEval {
    arma::vec ewdp;      // K
    arma::vec lsfd;      // K
    arma::cx_mat a_opt;  // M x K
    arma::vec local;     // M*K, index m*K+k
    bool degenerate = false;
};

DistEval evaluate_dist_accum(const DistAccum& a, double n, double p, double sigma2, bool want_ewdp,
                             bool want_lsfd, bool want_local)
{
    const arma::uword m_count = a.d.n_rows;
    const arma::uword k_count = a.d.n_cols;
    DistEval ev;
    ev.ewdp.zeros(k_count);
    ev.lsfd.zeros(k_count);
    ev.a_opt.zeros(m_count, k_count);
    ev.local.zeros(m_count * k_count);

    for (arma::uword k = 0; k < k_count; ++k) {
        const arma::cx_vec b_bar = a.cmean[k].col(k) / n;
        const arma::cx_mat xi_sum = a.wxs[k] / n;
        const arma::vec d_col = a.d.col(k) / n;
        if (want_ewdp) {
            const double num = p * std::norm(arma::accu(b_bar));
            const double den = std::real(arma::accu(xi_sum)) - num + sigma2 * arma::accu(d_col);
            ev.ewdp(k) = quotient_or_zero(num, den, ev.degenerate);
        }
        if (want_lsfd) {
            double sinr = 0.0;
            ev.a_opt.col(k) = lsfd_weights(xi_sum, b_bar, d_col, p, sigma2, &sinr);
            ev.lsfd(k) = sinr;
        }
        if (want_local) {
            for (arma::uword m = 0; m < m_count; ++m) {
                const double num = p * std::norm(a.cmean[k](m, k) / n);
                const double den = p * arma::accu(a.c2[k].row(m)) / n - num + sigma2 * a.d(m, k) / n;
                ev.local(m * k_count + k) = quotient_or_zero(num, den, ev.degenerate);
            }
        }
    }
    return ev;
}

} // namespace

DistributedMcResult evaluate_distributed_mc(const ScenarioStatistics& stats,
                                            const std::vector<LocalScheme>& schemes,
                                            const std::vector<Bound>& bounds, const McOptions& opts,
                                            bool keep_moments)
{
    const arma::uword m_count = stats.config.num_aps;
    const arma::uword n = stats.config.num_antennas;
    const arma::uword k_count = stats.config.num_ues;
    const double p = stats.config.tx_power_w;
    const double sigma2 = stats.config.noise_power_w;
    const double prelog = stats.config.prelog();
    const bool want_ewdp = wants(bounds, Bound::uatf_ewdp);
    const bool want_lsfd = wants(bounds, Bound::uatf_lsfd);
    const bool want_local = wants(bounds, Bound::uatf_local);
    const bool want_std_local = wants(bounds, Bound::standard_local);

    std::vector<arma::cx_mat> ap_noise_err; // per AP: sum_l p_l C_ml + sigma^2 I
    if (want_std_local) {
        ap_noise_err.assign(m_count, arma::cx_mat(n, n, arma::fill::zeros));
        for (arma::uword m = 0; m < m_count; ++m) {
            for (arma::uword l = 0; l < k_count; ++l)
                ap_noise_err[m] += p * stats.pair(m, l).C_err;
            ap_noise_err[m].diag() += cx(sigma2, 0.0);
        }
    }

    const auto sub = split_batch(opts.realizations, opts.subbatches);
    const ChannelSampler sampler(stats, opts.seed);
    std::vector<std::vector<DistAccum>> acc(schemes.size(), std::vector<DistAccum>(sub.size()));
    for (auto& per_scheme : acc)
        for (auto& a : per_scheme)
            a.init(m_count, k_count, keep_moments);

    run_tasks(sub.size(), opts.workers, [&](arma::uword j) {
        std::vector<arma::cx_mat> c_of_ap(m_count); // per AP: K x K, (k,l) = v_mk^H g_ml
        arma::cx_mat bk(m_count, k_count);
        for (arma::uword i = sub[j].begin; i < sub[j].end; ++i) {
            const ChannelSample s = sampler.draw(i);
            for (std::size_t si = 0; si < schemes.size(); ++si) {
                const arma::cx_cube v = schemes[si].combine(s);
                DistAccum& a = acc[si][j];
                for (arma::uword m = 0; m < m_count; ++m) {
                    const auto gm = s.g.rows(m * n, (m + 1) * n - 1);
                    c_of_ap[m] = v.slice(m).t() * gm;
                    a.d.row(m) += arma::sum(arma::square(arma::abs(v.slice(m))), 0);
                }
                for (arma::uword k = 0; k < k_count; ++k) {
                    for (arma::uword m = 0; m < m_count; ++m)
                        bk.row(m) = c_of_ap[m].row(k);
                    a.cmean[k] += bk;
                    a.c2[k] += arma::square(arma::abs(bk));
                    a.wxs[k] += p * (bk * bk.t());
                    if (keep_moments)
                        for (arma::uword l = 0; l < k_count; ++l)
                            a.fullxi[k].slice(l) += bk.col(l) * bk.col(l).t();
                }
                if (want_std_local) {
                    for (arma::uword m = 0; m < m_count; ++m) {
                        const auto ghm = s.g_hat.rows(m * n, (m + 1) * n - 1);
                        const arma::cx_mat qm = v.slice(m).t() * ghm;
                        const arma::cx_mat zv = ap_noise_err[m] * v.slice(m);
                        const arma::mat q2 = arma::square(arma::abs(qm));
                        for (arma::uword k = 0; k < k_count; ++k) {
                            const double own = p * q2(k, k);
                            const double cross = p * (arma::accu(q2.row(k)) - q2(k, k));
                            const double noise =
                                std::real(arma::cdot(v.slice(m).col(k), zv.col(k)));
                            const double denom = cross + noise;
                            a.selog(m, k) += std::log2(1.0 + (denom > 0.0 ? own / denom : 0.0));
                        }
                    }
                }
            }
        }
    });

    DistributedMcResult result;
    for (std::size_t si = 0; si < schemes.size(); ++si) {
        DistAccum total;
        total.init(m_count, k_count, keep_moments);
        std::vector<DistEval> sub_eval;
        for (std::size_t j = 0; j < sub.size(); ++j) {
            if (sub[j].size() == 0)
                continue;
            sub_eval.push_back(evaluate_dist_accum(acc[si][j], double(sub[j].size()), p, sigma2,
                                                   want_ewdp, want_lsfd, want_local));
            total.add(acc[si][j]);
        }
        const double n_all = double(opts.realizations);
        const DistEval full =
            evaluate_dist_accum(total, n_all, p, sigma2, want_ewdp, want_lsfd, want_local);

        auto make_report = [&](Bound b, const arma::vec& sinr,
                               const std::vector<arma::vec>& sub_sinr) {
            SEReport r;
            r.scheme = schemes[si].name;
            r.bound = b;
            r.method = Method::mc;
            r.prelog = prelog;
            r.samples = opts.realizations;
            r.degenerate = full.degenerate;
            r.sinr = sinr;
            finish_report(r);
            fill_stderr(r, sub_sinr, prelog);
            result.reports.push_back(std::move(r));
        };

        std::vector<arma::vec> sub_vals;
        if (want_ewdp) {
            sub_vals.clear();
            for (const auto& e : sub_eval)
                sub_vals.push_back(e.ewdp);
            make_report(Bound::uatf_ewdp, full.ewdp, sub_vals);
        }
        if (want_lsfd) {
            sub_vals.clear();
            for (const auto& e : sub_eval)
                sub_vals.push_back(e.lsfd);
            make_report(Bound::uatf_lsfd, full.lsfd, sub_vals);
            result.lsfd_a.push_back(full.a_opt);
        }
        if (want_local) {
            sub_vals.clear();
            for (const auto& e : sub_eval)
                sub_vals.push_back(e.local);
            make_report(Bound::uatf_local, full.local, sub_vals);
        }
        if (want_std_local) {
            SEReport r;
            r.scheme = schemes[si].name;
            r.bound = Bound::standard_local;
            r.method = Method::mc;
            r.prelog = prelog;
            r.samples = opts.realizations;
            std::vector<arma::vec> sub_sinr;
            for (std::size_t j = 0; j < sub.size(); ++j) {
                if (sub[j].size() == 0)
                    continue;
                arma::vec v(m_count * k_count);
                for (arma::uword m = 0; m < m_count; ++m)
                    for (arma::uword k = 0; k < k_count; ++k)
                        v(m * k_count + k) =
                            std::exp2(acc[si][j].selog(m, k) / double(sub[j].size())) - 1.0;
                sub_sinr.push_back(std::move(v));
            }
            r.sinr.set_size(m_count * k_count);
            for (arma::uword m = 0; m < m_count; ++m)
                for (arma::uword k = 0; k < k_count; ++k)
                    r.sinr(m * k_count + k) = std::exp2(total.selog(m, k) / n_all) - 1.0;
            finish_report(r);
            fill_stderr(r, sub_sinr, prelog);
            result.reports.push_back(std::move(r));
        }

        if (keep_moments) {
            MomentSet ms;
            ms.b_kk.set_size(m_count, k_count);
            ms.d = total.d / n_all;
            ms.xi.assign(k_count, arma::cx_cube(m_count, m_count, k_count));
            for (arma::uword k = 0; k < k_count; ++k) {
                ms.b_kk.col(k) = total.cmean[k].col(k) / n_all;
                ms.xi[k] = total.fullxi[k] / n_all;
            }
            result.moments.push_back(std::move(ms));
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

namespace {

// Signal grams without the noise term: sum_l p_l E{g_l g_l^H}.
arma::cx_mat interference_gram_collective(const ScenarioStatistics& stats)
{
    arma::cx_mat s = signal_gram_collective(stats);
    s.diag() -= cx(stats.config.noise_power_w, 0.0);
    return s;
}

arma::cx_mat interference_gram_ap(const ScenarioStatistics& stats, arma::uword m)
{
    arma::cx_mat s = signal_gram_ap(stats, m);
    s.diag() -= cx(stats.config.noise_power_w, 0.0);
    return s;
}

// LoS fourth-moment corrections, assembled from the AP blocks of W.
double th1_omega(const ScenarioStatistics& stats, arma::uword k, const arma::cx_mat& w)
{
    const arma::uword m_count = stats.config.num_aps;
    const arma::uword n = stats.config.num_antennas;
    const arma::cx_mat g_bar = stats.collective_G_bar(k);
    const arma::cx_mat r_hat = stats.collective_R_hat(k);

    cx omega = arma::trace(w.t() * r_hat) * arma::trace(w * g_bar) +
               arma::trace(w.t() * g_bar) * arma::trace(w * r_hat) -
               arma::trace(w.t() * g_bar * w * g_bar);
    for (arma::uword m1 = 0; m1 < m_count; ++m1) {
        const arma::cx_vec& g1 = stats.pair(m1, k).g_los;
        const arma::cx_mat w11 = w.submat(m1 * n, m1 * n, (m1 + 1) * n - 1, (m1 + 1) * n - 1);
        omega += arma::trace(w11.t() * (g1 * g1.t()) * w11 * (g1 * g1.t()));
        for (arma::uword m2 = 0; m2 < m_count; ++m2) {
            if (m1 == m2)
                continue;
            const arma::cx_vec& g2 = stats.pair(m2, k).g_los;
            const arma::cx_mat w22 = w.submat(m2 * n, m2 * n, (m2 + 1) * n - 1, (m2 + 1) * n - 1);
            const arma::cx_mat w21 = w.submat(m2 * n, m1 * n, (m2 + 1) * n - 1, (m1 + 1) * n - 1);
            const arma::cx_mat g12 = g1 * g2.t();
            omega += arma::trace(w11.t() * g12 * w22 * g12.t());
            omega += arma::trace(w21.t() * (g2 * g2.t()) * w21 * (g1 * g1.t()));
        }
    }
    return std::real(omega);
}

double th1_sinr_phase(const ScenarioStatistics& stats, arma::uword k, const arma::cx_mat& w)
{
    const double p = stats.config.tx_power_w;
    const double tau_p = double(stats.config.pilot_len);
    const double sigma2 = stats.config.noise_power_w;

    const arma::cx_mat g_bar = stats.collective_G_bar(k);
    const arma::cx_mat r_hat = stats.collective_R_hat(k);
    const arma::cx_mat r_bar = g_bar + r_hat;

    const double num = p * std::norm(arma::trace(w.t() * r_bar));
    double denom = std::real(arma::trace(w.t() * interference_gram_collective(stats) * w * r_bar));

    const auto& copilot = stats.pilots.copilot[k];
    for (std::size_t j = 0; j < copilot.size(); ++j) {
        const arma::cx_mat t_lk = stats.collective_cross(k, j);
        denom += p * (p * p * tau_p * tau_p) * std::norm(arma::trace(w.t() * t_lk));
    }
    denom += p * th1_omega(stats, k, w);
    denom += -num + sigma2 * std::real(arma::trace(w * r_bar * w.t()));
    if (!(denom > 0.0))
        return 0.0;
    return num / denom;
}

double th1_sinr_nophase(const ScenarioStatistics& stats, arma::uword k, const arma::cx_mat& w)
{
    const double p = stats.config.tx_power_w;
    const double tau_p = double(stats.config.pilot_len);
    const double sigma2 = stats.config.noise_power_w;

    const arma::cx_vec los_k = stats.stacked_los(k);
    const arma::cx_mat r_bar = los_k * los_k.t() + stats.collective_R_hat(k);

    arma::cx_mat gram(r_bar.n_rows, r_bar.n_cols, arma::fill::zeros);
    for (arma::uword l = 0; l < stats.config.num_ues; ++l) {
        const arma::cx_vec los_l = stats.stacked_los(l);
        gram += p * (los_l * los_l.t() + stats.collective_R_nlos(l));
    }

    const double num = p * std::norm(arma::trace(w.t() * r_bar));
    double denom = std::real(arma::trace(w.t() * gram * w * r_bar));

    const auto& copilot = stats.pilots.copilot[k];
    for (std::size_t j = 0; j < copilot.size(); ++j) {
        const arma::uword l = copilot[j];
        const arma::cx_mat t_lk = stats.collective_cross(k, j);
        const arma::cx_vec los_l = stats.stacked_los(l);
        const cx tr_g_lk = arma::trace(w.t() * (los_l * los_k.t()));
        const cx tr_g_kl = arma::trace(w * (los_k * los_l.t()));
        const cx tr_t = arma::trace(w.t() * t_lk);
        const cx tr_t_rev = arma::trace(w * t_lk.t());
        const cx eps = p * tau_p * (tr_g_lk * tr_t_rev + tr_g_kl * tr_t) +
                       (p * p * tau_p * tau_p) * (tr_t * std::conj(tr_t));
        denom += p * std::real(eps);
    }
    denom += -num + sigma2 * std::real(arma::trace(w * r_bar * w.t()));
    if (!(denom > 0.0))
        return 0.0;
    return num / denom;
}

} // namespace

double uatf_centralized_closed_sinr(const ScenarioStatistics& stats, arma::uword k,
                                    const arma::cx_mat& w)
{
    return stats.config.phase_shifts ? th1_sinr_phase(stats, k, w) : th1_sinr_nophase(stats, k, w);
}

double uatf_centralized_omega(const ScenarioStatistics& stats, arma::uword k, const arma::cx_mat& w)
{
    return th1_omega(stats, k, w);
}

SEReport uatf_centralized_closed(const ScenarioStatistics& stats, const std::string& scheme,
                                 const std::vector<BEMatrix>& per_ue)
{
    SEReport r;
    r.scheme = scheme;
    r.bound = Bound::uatf_centralized;
    r.method = Method::closed;
    r.prelog = stats.config.prelog();
    r.sinr.set_size(stats.config.num_ues);
    for (arma::uword k = 0; k < stats.config.num_ues; ++k)
        r.sinr(k) = uatf_centralized_closed_sinr(stats, k, per_ue[k].w);
    finish_report(r);
    r.sinr_stderr.zeros(r.sinr.n_elem);
    r.se_stderr.zeros(r.sinr.n_elem);
    return r;
}

LsfdClosedTerms lsfd_closed_terms(const ScenarioStatistics& stats, arma::uword k,
                                  const std::vector<arma::cx_mat>& w_per_ap)
{
    if (!stats.config.phase_shifts && !stats.all_rayleigh())
        throw std::invalid_argument("lsfd_closed_terms: closed form requires the phase-shift model");
    const arma::uword m_count = stats.config.num_aps;
    const double p = stats.config.tx_power_w;
    const double tau_p = double(stats.config.pilot_len);

    LsfdClosedTerms t;
    t.b_bar.set_size(m_count);
    t.d_bar.set_size(m_count);
    t.weighted_xi_sum.zeros(m_count, m_count);

    for (arma::uword m = 0; m < m_count; ++m) {
        const PairStatistics& pk = stats.pair(m, k);
        const arma::cx_mat& w = w_per_ap[m];
        t.b_bar(m) = arma::trace(w.t() * pk.R_bar);
        t.d_bar(m) = std::real(arma::trace(w * pk.R_bar * w.t()));
        t.weighted_xi_sum(m, m) +=
            std::real(arma::trace(w.t() * interference_gram_ap(stats, m) * w * pk.R_bar));
    }

    const auto& copilot = stats.pilots.copilot[k];
    for (std::size_t j = 0; j < copilot.size(); ++j) {
        const arma::uword l = copilot[j];
        arma::cx_vec gamma(m_count);
        for (arma::uword m = 0; m < m_count; ++m) {
            const PairStatistics& pk = stats.pair(m, k);
            const arma::cx_mat& w = w_per_ap[m];
            const arma::cx_mat t_mlk = stats.copilot_cross(m, k, j);
            // gamma_mkl = tr(W^H B_mlk); B = sqrt(p_k p_l) tau_p T for l != k, R_bar for l = k
            gamma(m) = (l == k) ? arma::trace(w.t() * pk.R_bar)
                                : cx(p * tau_p, 0.0) * arma::trace(w.t() * t_mlk);
            double upsilon = (p * p * tau_p * tau_p) * std::norm(arma::trace(w.t() * t_mlk));
            if (l == k) {
                const arma::cx_mat g_outer = pk.g_los * pk.g_los.t();
                upsilon += std::real(arma::trace(w.t() * g_outer) * arma::trace(w * pk.R_hat) +
                                     arma::trace(w.t() * pk.R_hat) * arma::trace(w * g_outer));
            }
            t.weighted_xi_sum(m, m) += p * upsilon;
        }
        t.weighted_xi_sum += p * (gamma * gamma.t());
        for (arma::uword m = 0; m < m_count; ++m)
            t.weighted_xi_sum(m, m) -= p * std::norm(gamma(m));
    }
    return t;
}

LsfdClosedResult lsfd_closed(const ScenarioStatistics& stats, const std::string& scheme,
                             const std::vector<BEMatrix>& per_ue)
{
    const arma::uword m_count = stats.config.num_aps;
    const arma::uword k_count = stats.config.num_ues;
    const double p = stats.config.tx_power_w;
    const double sigma2 = stats.config.noise_power_w;

    LsfdClosedResult out;
    out.a_opt.set_size(m_count, k_count);
    auto init_report = [&](SEReport& r, Bound b) {
        r.scheme = scheme;
        r.bound = b;
        r.method = Method::closed;
        r.prelog = stats.config.prelog();
        r.sinr.set_size(k_count);
    };
    init_report(out.ewdp, Bound::uatf_ewdp);
    init_report(out.lsfd, Bound::uatf_lsfd);

    for (arma::uword k = 0; k < k_count; ++k) {
        const LsfdClosedTerms t = lsfd_closed_terms(stats, k, per_ue[k].w_per_ap);
        const double num = p * std::norm(arma::accu(t.b_bar));
        const double denom =
            std::real(arma::accu(t.weighted_xi_sum)) - num + sigma2 * arma::accu(t.d_bar);
        out.ewdp.sinr(k) = denom > 0.0 ? num / denom : 0.0;
        double sinr_opt = 0.0;
        out.a_opt.col(k) = lsfd_weights(t.weighted_xi_sum, t.b_bar, t.d_bar, p, sigma2, &sinr_opt);
        out.lsfd.sinr(k) = sinr_opt;
    }
    finish_report(out.ewdp);
    finish_report(out.lsfd);
    out.ewdp.sinr_stderr.zeros(k_count);
    out.ewdp.se_stderr.zeros(k_count);
    out.lsfd.sinr_stderr.zeros(k_count);
    out.lsfd.se_stderr.zeros(k_count);
    return out;
}

double local_uatf_closed_sinr(const ScenarioStatistics& stats, arma::uword m, arma::uword k,
                              const arma::cx_mat& w)
{
    const LocalObeTerms t = local_obe_terms(stats, m, k);
    const arma::cx_vec wv = vec(w);
    const double num = stats.config.tx_power_w * std::norm(arma::cdot(wv, t.r_bar));
    const double denom = std::real(arma::cdot(wv, t.gamma * wv));
    return denom > 0.0 ? num / denom : 0.0;
}

SEReport local_uatf_closed(const ScenarioStatistics& stats, const std::string& scheme,
                           const std::vector<BEMatrix>& per_ue)
{
    const arma::uword m_count = stats.config.num_aps;
    const arma::uword k_count = stats.config.num_ues;
    SEReport r;
    r.scheme = scheme;
    r.bound = Bound::uatf_local;
    r.method = Method::closed;
    r.prelog = stats.config.prelog();
    r.sinr.set_size(m_count * k_count);
    for (arma::uword m = 0; m < m_count; ++m)
        for (arma::uword k = 0; k < k_count; ++k)
            r.sinr(m * k_count + k) = local_uatf_closed_sinr(stats, m, k, per_ue[k].w_per_ap[m]);
    finish_report(r);
    r.sinr_stderr.zeros(r.sinr.n_elem);
    r.se_stderr.zeros(r.sinr.n_elem);
    return r;
}

Aggregate aggregate(const std::vector<SEReport>& reports)
{
    if (reports.empty())
        throw std::invalid_argument("aggregate: empty input");
    std::vector<double> pooled;
    double sum_of_sums = 0.0;
    for (const auto& r : reports) {
        for (arma::uword i = 0; i < r.se.n_elem; ++i)
            pooled.push_back(r.se(i));
        sum_of_sums += arma::accu(r.se);
    }
    if (pooled.empty())
        throw std::invalid_argument("aggregate: reports carry no entries");
    Aggregate a;
    a.cdf = arma::sort(arma::vec(pooled));
    a.avg_se = arma::mean(a.cdf);
    a.sum_se = sum_of_sums / double(reports.size());
    return a;
}

} // namespace cfmimo
