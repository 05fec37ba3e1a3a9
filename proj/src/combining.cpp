// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#include "cfmimo/combining.hpp"

#include <json.hpp>

#include "cfmimo/batch_util.hpp"

namespace cfmimo {

namespace {

using nlohmann::json;

void require_phase_model(const ScenarioStatistics& stats, const char* who)
{
    if (!stats.config.phase_shifts && !stats.all_rayleigh())
        throw std::invalid_argument(std::string(who) +
                                    ": closed form requires the random-phase-shift model "
                                    "(or a pure Rayleigh scenario)");
}

arma::cx_mat unit_frobenius(const arma::cx_mat& w)
{
    const double n = arma::norm(w, "fro");
    return n > 0.0 ? arma::cx_mat(w / n) : w;
}

json cx_mat_to_json(const arma::cx_mat& m)
{
    json entries = json::array();
    for (arma::uword j = 0; j < m.n_cols; ++j)
        for (arma::uword i = 0; i < m.n_rows; ++i)
            entries.push_back({m(i, j).real(), m(i, j).imag()});
    return {{"rows", m.n_rows}, {"cols", m.n_cols}, {"entries", entries}};
}

arma::cx_mat cx_mat_from_json(const json& j)
{
    const arma::uword rows = j.at("rows"), cols = j.at("cols");
    const auto& entries = j.at("entries");
    if (entries.size() != rows * cols)
        throw std::invalid_argument("BEMatrix json: entry count mismatch");
    arma::cx_mat m(rows, cols);
    std::size_t idx = 0;
    for (arma::uword jj = 0; jj < cols; ++jj)
        for (arma::uword ii = 0; ii < rows; ++ii, ++idx)
            m(ii, jj) = cx(entries[idx][0].get<double>(), entries[idx][1].get<double>());
    return m;
}

const char* provenance_name(Provenance p)
{
    switch (p) {
    case Provenance::identity: return "identity";
    case Provenance::mc_obe: return "mc_obe";
    case Provenance::closed_obe: return "closed_obe";
    default: return "manual";
    }
}

Provenance provenance_from(const std::string& s)
{
    if (s == "identity") return Provenance::identity;
    if (s == "mc_obe") return Provenance::mc_obe;
    if (s == "closed_obe") return Provenance::closed_obe;
    return Provenance::manual;
}

} // namespace

BEMatrix identity_be(arma::uword stack_dim)
{
    BEMatrix be;
    be.centralized = true;
    be.provenance = Provenance::identity;
    be.w = arma::cx_mat(stack_dim, stack_dim, arma::fill::eye);
    return be;
}

BEMatrix identity_local_be(arma::uword num_aps, arma::uword num_antennas)
{
    BEMatrix be;
    be.centralized = false;
    be.provenance = Provenance::identity;
    be.w_per_ap.assign(num_aps, arma::cx_mat(num_antennas, num_antennas, arma::fill::eye));
    return be;
}

std::string be_to_json(const BEMatrix& be)
{
    json j;
    j["scope"] = be.centralized ? "centralized" : "local";
    j["provenance"] = provenance_name(be.provenance);
    j["regularized"] = be.regularized;
    if (be.centralized) {
        j["matrix"] = cx_mat_to_json(be.w);
    } else {
        json blocks = json::array();
        for (const auto& w : be.w_per_ap)
            blocks.push_back(cx_mat_to_json(w));
        j["blocks"] = blocks;
    }
    return j.dump();
}

BEMatrix be_from_json(const std::string& text)
{
    const json j = json::parse(text);
    BEMatrix be;
    be.centralized = j.at("scope") == "centralized";
    be.provenance = provenance_from(j.at("provenance"));
    be.regularized = j.value("regularized", false);
    if (be.centralized) {
        be.w = cx_mat_from_json(j.at("matrix"));
    } else {
        for (const auto& b : j.at("blocks"))
            be.w_per_ap.push_back(cx_mat_from_json(b));
    }
    return be;
}

// ---------------------------------------------------------------------------
// Per-sample schemes
// ---------------------------------------------------------------------------

CentralizedScheme c_mr()
{
    return {"c-mr", false, [](const ChannelSample& s) { return s.g_hat; }};
}

CentralizedScheme c_mmse(const ScenarioStatistics& stats)
{
    const arma::uword stack = stats.config.num_aps * stats.config.num_antennas;
    const double p = stats.config.tx_power_w;
    arma::cx_mat base(stack, stack, arma::fill::zeros);
    for (arma::uword k = 0; k < stats.config.num_ues; ++k)
        base += p * stats.collective_C(k);
    base.diag() += cx(stats.config.noise_power_w, 0.0);

    return {"c-mmse", true, [base, p](const ChannelSample& s) {
                const arma::cx_mat gram = base + p * (s.g_hat * s.g_hat.t());
                return arma::cx_mat(p * hermitian_solve(gram, s.g_hat));
            }};
}

CentralizedScheme be_centralized(std::string name, std::vector<BEMatrix> per_ue)
{
    return {std::move(name), false, [w = std::move(per_ue)](const ChannelSample& s) {
                arma::cx_mat v(s.g_hat.n_rows, s.g_hat.n_cols);
                for (arma::uword k = 0; k < s.g_hat.n_cols; ++k)
                    v.col(k) = w[k].w * s.g_hat.col(k);
                return v;
            }};
}

LocalScheme l_mr()
{
    return {"l-mr", false, [](const ChannelSample& s) {
                const arma::uword m_count = s.theta.n_rows;
                const arma::uword n = s.g_hat.n_rows / m_count;
                arma::cx_cube v(n, s.g_hat.n_cols, m_count);
                for (arma::uword m = 0; m < m_count; ++m)
                    v.slice(m) = s.g_hat.rows(m * n, (m + 1) * n - 1);
                return v;
            }};
}

LocalScheme l_mmse(const ScenarioStatistics& stats)
{
    const arma::uword m_count = stats.config.num_aps;
    const arma::uword n = stats.config.num_antennas;
    const double p = stats.config.tx_power_w;
    std::vector<arma::cx_mat> base(m_count, arma::cx_mat(n, n, arma::fill::zeros));
    for (arma::uword m = 0; m < m_count; ++m) {
        for (arma::uword k = 0; k < stats.config.num_ues; ++k)
            base[m] += p * stats.pair(m, k).C_err;
        base[m].diag() += cx(stats.config.noise_power_w, 0.0);
    }

    return {"l-mmse", true, [base = std::move(base), p, n, m_count](const ChannelSample& s) {
                arma::cx_cube v(n, s.g_hat.n_cols, m_count);
                for (arma::uword m = 0; m < m_count; ++m) {
                    const arma::cx_mat gh = s.g_hat.rows(m * n, (m + 1) * n - 1);
                    v.slice(m) = p * hermitian_solve(base[m] + p * (gh * gh.t()), gh);
                }
                return v;
            }};
}

LocalScheme be_local(std::string name, std::vector<BEMatrix> per_ue)
{
    return {std::move(name), false, [w = std::move(per_ue)](const ChannelSample& s) {
                const arma::uword m_count = s.theta.n_rows;
                const arma::uword n = s.g_hat.n_rows / m_count;
                arma::cx_cube v(n, s.g_hat.n_cols, m_count);
                for (arma::uword m = 0; m < m_count; ++m)
                    for (arma::uword k = 0; k < s.g_hat.n_cols; ++k)
                        v.slice(m).col(k) = w[k].w_per_ap[m] * s.g_hat.submat(m * n, k, (m + 1) * n - 1, k);
                return v;
            }};
}

// ---------------------------------------------------------------------------
// Closed-form assemblies
// ---------------------------------------------------------------------------

arma::cx_mat signal_gram_ap(const ScenarioStatistics& stats, arma::uword m)
{
    const arma::uword n = stats.config.num_antennas;
    arma::cx_mat s(n, n, arma::fill::zeros);
    for (arma::uword l = 0; l < stats.config.num_ues; ++l) {
        const PairStatistics& p = stats.pair(m, l);
        s += stats.config.tx_power_w * (p.g_los * p.g_los.t() + p.R_nlos);
    }
    s.diag() += cx(stats.config.noise_power_w, 0.0);
    return s;
}

arma::cx_mat signal_gram_collective(const ScenarioStatistics& stats)
{
    const arma::uword stack = stats.config.num_aps * stats.config.num_antennas;
    arma::cx_mat s(stack, stack, arma::fill::zeros);
    for (arma::uword l = 0; l < stats.config.num_ues; ++l)
        s += stats.config.tx_power_w * (stats.collective_G_bar(l) + stats.collective_R_nlos(l));
    s.diag() += cx(stats.config.noise_power_w, 0.0);
    return s;
}

LocalObeTerms local_obe_terms(const ScenarioStatistics& stats, arma::uword m, arma::uword k)
{
    require_phase_model(stats, "local_obe_terms");
    const arma::uword n = stats.config.num_antennas;
    const double p = stats.config.tx_power_w;
    const double tau_p = double(stats.config.pilot_len);
    const PairStatistics& pk = stats.pair(m, k);

    LocalObeTerms t;
    t.r_bar = vec(pk.R_bar);
    t.gamma.zeros(n * n, n * n);
    add_kron(t.gamma, pk.R_bar.st(), signal_gram_ap(stats, m));

    const auto& copilot = stats.pilots.copilot[k];
    for (std::size_t j = 0; j < copilot.size(); ++j) {
        const arma::cx_vec r_tilde = vec(stats.copilot_cross(m, k, j));
        t.gamma += (p * p * p * tau_p * tau_p) * (r_tilde * r_tilde.t());
        if (copilot[j] == k) {
            const arma::cx_vec g_bar = vec(arma::cx_mat(pk.g_los * pk.g_los.t()));
            t.gamma += (p * p * tau_p) * (g_bar * r_tilde.t() + r_tilde * g_bar.t());
        }
    }
    t.gamma -= p * (t.r_bar * t.r_bar.t());
    return t;
}

DlObeClosed dl_obe_closed(const ScenarioStatistics& stats, arma::uword m, arma::uword k)
{
    const LocalObeTerms t = local_obe_terms(stats, m, k);
    const RayleighMax rm = rayleigh_max({t.r_bar, t.gamma});
    DlObeClosed out;
    out.w = unit_frobenius(unvec(rm.argmax, stats.config.num_antennas, stats.config.num_antennas));
    out.sinr = stats.config.tx_power_w * rm.value;
    out.regularized = rm.regularized;
    return out;
}

DgObeClosed dg_obe_closed(const ScenarioStatistics& stats, arma::uword k, bool keep_terms)
{
    require_phase_model(stats, "dg_obe_closed");
    const arma::uword m_count = stats.config.num_aps;
    const arma::uword n = stats.config.num_antennas;
    const arma::uword blk = n * n;
    const double p = stats.config.tx_power_w;
    const double tau_p = double(stats.config.pilot_len);

    arma::cx_mat lambda(m_count * blk, m_count * blk, arma::fill::zeros);
    arma::cx_vec h_bar(m_count * blk);
    for (arma::uword m = 0; m < m_count; ++m) {
        const LocalObeTerms t = local_obe_terms(stats, m, k);
        lambda.submat(m * blk, m * blk, (m + 1) * blk - 1, (m + 1) * blk - 1) = t.gamma;
        h_bar.subvec(m * blk, (m + 1) * blk - 1) = t.r_bar;
    }

    // Cross-AP coupling from co-pilot UEs, Lambda^(3) with the l = k part
    // already folded into the per-AP blocks above.
    const auto& copilot = stats.pilots.copilot[k];
    const double cross_scale = p * tau_p; // sqrt(p_k p_l) tau_p with uniform powers
    for (std::size_t j = 0; j < copilot.size(); ++j) {
        if (copilot[j] == k)
            continue;
        arma::cx_vec b(m_count * blk);
        for (arma::uword m = 0; m < m_count; ++m)
            b.subvec(m * blk, (m + 1) * blk - 1) = cross_scale * vec(stats.copilot_cross(m, k, j));
        lambda += p * (b * b.t());
        for (arma::uword m = 0; m < m_count; ++m) {
            const arma::cx_vec bm = b.subvec(m * blk, (m + 1) * blk - 1);
            lambda.submat(m * blk, m * blk, (m + 1) * blk - 1, (m + 1) * blk - 1) -= p * (bm * bm.t());
        }
    }

    const RayleighMax rm = rayleigh_max({h_bar, lambda});
    DgObeClosed out;
    out.sinr = p * rm.value;
    out.regularized = rm.regularized;
    const arma::cx_vec w = rm.argmax / arma::norm(rm.argmax);
    out.w.centralized = false;
    out.w.provenance = Provenance::closed_obe;
    out.w.regularized = rm.regularized;
    out.w.w_per_ap.reserve(m_count);
    for (arma::uword m = 0; m < m_count; ++m)
        out.w.w_per_ap.push_back(unvec(w.subvec(m * blk, (m + 1) * blk - 1), n, n));
    if (keep_terms) {
        out.terms.lambda = std::move(lambda);
        out.terms.h_bar = std::move(h_bar);
    }
    return out;
}

// LoS fourth-moment matrix: entry (a,b) of block (c,d) is the
// quadruple product of LoS entries whenever the random phases pair up
// ((m1=m2, m3=m4) or (m1=m4, m2=m3)), else zero.
static arma::cx_mat upsilon_matrix(const ScenarioStatistics& stats, arma::uword k)
{
    const arma::uword m_count = stats.config.num_aps;
    const arma::uword n = stats.config.num_antennas;
    const arma::uword stack = m_count * n;
    arma::cx_mat u(stack * stack, stack * stack, arma::fill::zeros);

    for (arma::uword m_u = 0; m_u < m_count; ++m_u) {
        const arma::cx_vec& gu = stats.pair(m_u, k).g_los;
        for (arma::uword m_v = 0; m_v < m_count; ++m_v) {
            const arma::cx_vec& gv = stats.pair(m_v, k).g_los;
            for (arma::uword n1 = 0; n1 < n; ++n1)
                for (arma::uword n2 = 0; n2 < n; ++n2)
                    for (arma::uword n3 = 0; n3 < n; ++n3)
                        for (arma::uword n4 = 0; n4 < n; ++n4) {
                            {
                                // m1 = m2 = m_u, m3 = m4 = m_v
                                const arma::uword d = m_u * n + n1, c = m_u * n + n2;
                                const arma::uword a = m_v * n + n3, b = m_v * n + n4;
                                u(c * stack + a, d * stack + b) =
                                    gu(n1) * std::conj(gu(n2)) * gv(n3) * std::conj(gv(n4));
                            }
                            if (m_u != m_v) {
                                // m1 = m4 = m_u, m2 = m3 = m_v
                                const arma::uword d = m_u * n + n1, c = m_v * n + n2;
                                const arma::uword a = m_v * n + n3, b = m_u * n + n4;
                                u(c * stack + a, d * stack + b) =
                                    gu(n1) * std::conj(gv(n2)) * gv(n3) * std::conj(gu(n4));
                            }
                        }
        }
    }
    return u;
}

CobeClosed c_obe_closed(const ScenarioStatistics& stats, arma::uword k, bool keep_terms)
{
    require_phase_model(stats, "c_obe_closed");
    const arma::uword stack = stats.config.num_aps * stats.config.num_antennas;
    const double p = stats.config.tx_power_w;
    const double tau_p = double(stats.config.pilot_len);

    const arma::cx_mat r_bar_mat = stats.collective_R_bar(k);
    const arma::cx_mat g_bar_mat = stats.collective_G_bar(k);
    const arma::cx_vec r_bar = vec(r_bar_mat);
    const arma::cx_vec g_bar = vec(g_bar_mat);

    arma::cx_mat gamma(stack * stack, stack * stack, arma::fill::zeros);
    add_kron(gamma, r_bar_mat.st(), signal_gram_collective(stats));

    std::vector<arma::cx_vec> r_tilde;
    const auto& copilot = stats.pilots.copilot[k];
    r_tilde.reserve(copilot.size());
    for (std::size_t j = 0; j < copilot.size(); ++j) {
        r_tilde.push_back(vec(stats.collective_cross(k, j)));
        gamma += (p * p * p * tau_p * tau_p) * (r_tilde.back() * r_tilde.back().t());
        if (copilot[j] == k)
            gamma += (p * p * tau_p) *
                     (g_bar * r_tilde.back().t() + r_tilde.back() * g_bar.t());
    }

    arma::cx_mat upsilon = upsilon_matrix(stats, k);
    gamma += p * upsilon;
    add_kron(gamma, g_bar_mat.st(), g_bar_mat, cx(-p, 0.0));
    gamma -= p * (r_bar * r_bar.t());

    const RayleighMax rm = rayleigh_max({r_bar, gamma});
    CobeClosed out;
    out.sinr = p * rm.value;
    out.regularized = rm.regularized;
    out.w.centralized = true;
    out.w.provenance = Provenance::closed_obe;
    out.w.regularized = rm.regularized;
    out.w.w = unit_frobenius(unvec(rm.argmax, stack, stack));
    if (keep_terms) {
        out.terms.gamma = std::move(gamma);
        out.terms.r_bar = r_bar;
        out.terms.g_bar = g_bar;
        out.terms.r_tilde = std::move(r_tilde);
        out.terms.upsilon = std::move(upsilon);
    }
    return out;
}

CobeClosed c_obe_closed_nophase(const ScenarioStatistics& stats, arma::uword k, bool keep_terms)
{
    if (stats.config.phase_shifts && !stats.all_rayleigh())
        throw std::invalid_argument("c_obe_closed_nophase: scenario has random phase shifts");
    const arma::uword stack = stats.config.num_aps * stats.config.num_antennas;
    const double p = stats.config.tx_power_w;
    const double tau_p = double(stats.config.pilot_len);

    const arma::cx_vec los_k = stats.stacked_los(k);
    const arma::cx_mat g_bar_mat = los_k * los_k.t();
    const arma::cx_mat r_bar_mat = g_bar_mat + stats.collective_R_hat(k);
    const arma::cx_vec r_bar = vec(r_bar_mat);
    const arma::cx_vec g_bar = vec(g_bar_mat);

    arma::cx_mat signal_gram(stack, stack, arma::fill::zeros);
    for (arma::uword l = 0; l < stats.config.num_ues; ++l) {
        const arma::cx_vec los_l = stats.stacked_los(l);
        signal_gram += p * (los_l * los_l.t() + stats.collective_R_nlos(l));
    }
    signal_gram.diag() += cx(stats.config.noise_power_w, 0.0);

    arma::cx_mat gamma(stack * stack, stack * stack, arma::fill::zeros);
    add_kron(gamma, r_bar_mat.st(), signal_gram);

    std::vector<arma::cx_vec> r_tilde;
    const auto& copilot = stats.pilots.copilot[k];
    r_tilde.reserve(copilot.size());
    for (std::size_t j = 0; j < copilot.size(); ++j) {
        const arma::uword l = copilot[j];
        r_tilde.push_back(vec(stats.collective_cross(k, j)));
        const arma::cx_vec g_lk = vec(arma::cx_mat(stats.stacked_los(l) * los_k.t()));
        gamma += p * ((p * tau_p) * (g_lk * r_tilde.back().t() + r_tilde.back() * g_lk.t()) +
                      (p * p * tau_p * tau_p) * (r_tilde.back() * r_tilde.back().t()));
    }
    gamma -= p * (r_bar * r_bar.t());

    const RayleighMax rm = rayleigh_max({r_bar, gamma});
    CobeClosed out;
    out.sinr = p * rm.value;
    out.regularized = rm.regularized;
    out.w.centralized = true;
    out.w.provenance = Provenance::closed_obe;
    out.w.regularized = rm.regularized;
    out.w.w = unit_frobenius(unvec(rm.argmax, stack, stack));
    if (keep_terms) {
        out.terms.gamma = std::move(gamma);
        out.terms.r_bar = r_bar;
        out.terms.g_bar = g_bar;
        out.terms.r_tilde = std::move(r_tilde);
    }
    return out;
}

CobeClosed c_obe_closed_blockdiag(const ScenarioStatistics& stats, arma::uword k)
{
    require_phase_model(stats, "c_obe_closed_blockdiag");
    const arma::uword n = stats.config.num_antennas;
    const arma::uword stack = stats.config.num_aps * n;
    const DgObeClosed dg = dg_obe_closed(stats, k);

    CobeClosed out;
    out.sinr = dg.sinr; // UatF moments of a block-diagonal W equal the EWDP moments
    out.regularized = dg.regularized;
    out.w.centralized = true;
    out.w.provenance = Provenance::closed_obe;
    out.w.regularized = dg.regularized;
    out.w.w.zeros(stack, stack);
    for (arma::uword m = 0; m < stats.config.num_aps; ++m)
        out.w.w.submat(m * n, m * n, (m + 1) * n - 1, (m + 1) * n - 1) = dg.w.w_per_ap[m];
    out.w.w = unit_frobenius(out.w.w);
    return out;
}

// ---------------------------------------------------------------------------
// Monte-Carlo OBE constructions
// ---------------------------------------------------------------------------

namespace {

// acc += coef-weighted Kronecker accumulation: acc += kron(conj(gh) gh^T, y).
void accumulate_obe_gram(arma::cx_mat& acc, const arma::cx_vec& gh, const arma::cx_mat& y)
{
    const arma::uword dim = gh.n_elem;
    for (arma::uword d = 0; d < dim; ++d) {
        const cx gd = gh(d);
        for (arma::uword jj = 0; jj < dim; ++jj) {
            const cx* ycol = y.colptr(jj);
            cx* acol = acc.colptr(d * dim + jj);
            for (arma::uword c = 0; c < dim; ++c) {
                const cx coef = std::conj(gh(c)) * gd;
                cx* dst = acol + c * dim;
                for (arma::uword ii = 0; ii < dim; ++ii)
                    dst[ii] += coef * ycol[ii];
            }
        }
    }
}

struct ObeSystemSolve {
    double sinr = 0.0;
    arma::cx_vec w;
    bool regularized = false;
};

// Solve the generic sampled OBE system
//   (gram - p vec(Rgh) vec(Rgh)^H + kron(noise_gram^T, I)) w = vec(Rgh)
// with noise_gram = sigma^2 E{g_hat g_hat^H}, the quadratic form of
// sigma^2 E{||W g_hat||^2}.
ObeSystemSolve solve_obe_system(const arma::cx_mat& gram, const arma::cx_mat& r_gh,
                                const arma::cx_mat& noise_gram, double p, arma::uword ident_dim)
{
    const arma::cx_vec rhs = vec(r_gh);
    arma::cx_mat sys = gram - p * (rhs * rhs.t());
    add_kron(sys, noise_gram.st(), arma::cx_mat(ident_dim, ident_dim, arma::fill::eye));
    const RayleighMax rm = rayleigh_max({rhs, sys});
    return {p * rm.value, rm.argmax, rm.regularized};
}

} // namespace

McObe c_obe_mc(const ScenarioStatistics& stats, std::uint64_t seed, arma::uword realizations,
               arma::uword k)
{
    const arma::uword stack = stats.config.num_aps * stats.config.num_antennas;
    const double p = stats.config.tx_power_w;
    const double sigma2 = stats.config.noise_power_w;
    const ChannelSampler sampler(stats, seed);
    const auto bounds = split_batch(realizations, 10);

    arma::cx_mat gram_total(stack * stack, stack * stack, arma::fill::zeros);
    arma::cx_mat r_gh_total(stack, stack, arma::fill::zeros);
    arma::cx_mat r_hh_total(stack, stack, arma::fill::zeros);
    std::vector<double> sub_sinr;

    arma::cx_mat gram_sub(stack * stack, stack * stack, arma::fill::zeros);
    arma::cx_mat r_gh_sub(stack, stack, arma::fill::zeros);
    arma::cx_mat r_hh_sub(stack, stack, arma::fill::zeros);

    for (const auto& b : bounds) {
        if (b.begin == b.end)
            continue;
        gram_sub.zeros();
        r_gh_sub.zeros();
        r_hh_sub.zeros();
        for (arma::uword i = b.begin; i < b.end; ++i) {
            const ChannelSample s = sampler.draw(i);
            const arma::cx_mat y = p * (s.g * s.g.t()); // sum_l p_l g_l g_l^H
            accumulate_obe_gram(gram_sub, s.g_hat.col(k), y);
            r_gh_sub += s.g.col(k) * s.g_hat.col(k).t();
            r_hh_sub += s.g_hat.col(k) * s.g_hat.col(k).t();
        }
        const double n_sub = double(b.end - b.begin);
        // noise term sigma^2 E{||W g_hat||^2} enters through kron(Rhh^T, I)
        sub_sinr.push_back(solve_obe_system(arma::cx_mat(gram_sub / n_sub),
                                            arma::cx_mat(r_gh_sub / n_sub),
                                            arma::cx_mat(sigma2 * r_hh_sub / n_sub), p, stack)
                               .sinr);
        gram_total += gram_sub;
        r_gh_total += r_gh_sub;
        r_hh_total += r_hh_sub;
    }

    const double n_all = double(realizations);
    const ObeSystemSolve sol =
        solve_obe_system(arma::cx_mat(gram_total / n_all), arma::cx_mat(r_gh_total / n_all),
                         arma::cx_mat(sigma2 * r_hh_total / n_all), p, stack);

    McObe out;
    out.sinr = sol.sinr;
    out.sinr_stderr = stderr_of(sub_sinr);
    out.regularized = sol.regularized;
    out.w.centralized = true;
    out.w.provenance = Provenance::mc_obe;
    out.w.regularized = sol.regularized;
    out.w.w = unit_frobenius(unvec(sol.w, stack, stack));
    return out;
}

McObe dg_obe_mc(const ScenarioStatistics& stats, std::uint64_t seed, arma::uword realizations,
                arma::uword k)
{
    const arma::uword m_count = stats.config.num_aps;
    const arma::uword n = stats.config.num_antennas;
    const arma::uword k_count = stats.config.num_ues;
    const arma::uword blk = n * n;
    const arma::uword dim = m_count * blk;
    const double p = stats.config.tx_power_w;
    const double sigma2 = stats.config.noise_power_w;
    const ChannelSampler sampler(stats, seed);
    const auto bounds = split_batch(realizations, 10);

    arma::cx_mat gram_total(dim, dim, arma::fill::zeros);
    arma::cx_vec h_total(dim, arma::fill::zeros);
    arma::cx_cube r_hh_total(n, n, m_count, arma::fill::zeros);
    std::vector<double> sub_sinr;

    arma::cx_mat z(dim, k_count);
    auto solve_dg = [&](const arma::cx_mat& gram, const arma::cx_vec& h, const arma::cx_cube& r_hh,
                        double n_samples) {
        arma::cx_mat sys = gram / n_samples;
        const arma::cx_vec h_mean = h / n_samples;
        sys -= p * (h_mean * h_mean.t());
        const arma::cx_mat eye_n(n, n, arma::fill::eye);
        for (arma::uword m = 0; m < m_count; ++m) {
            arma::cx_mat theta(blk, blk, arma::fill::zeros);
            add_kron(theta, arma::cx_mat(r_hh.slice(m).st() / n_samples), eye_n, cx(sigma2, 0.0));
            sys.submat(m * blk, m * blk, (m + 1) * blk - 1, (m + 1) * blk - 1) += theta;
        }
        return rayleigh_max({h_mean, sys});
    };

    arma::cx_mat gram_sub(dim, dim, arma::fill::zeros);
    arma::cx_vec h_sub(dim, arma::fill::zeros);
    arma::cx_cube r_hh_sub(n, n, m_count, arma::fill::zeros);
    for (const auto& b : bounds) {
        if (b.begin == b.end)
            continue;
        gram_sub.zeros();
        h_sub.zeros();
        r_hh_sub.zeros();
        for (arma::uword i = b.begin; i < b.end; ++i) {
            const ChannelSample s = sampler.draw(i);
            for (arma::uword m = 0; m < m_count; ++m) {
                const arma::cx_vec ghmk = s.g_hat.submat(m * n, k, (m + 1) * n - 1, k);
                for (arma::uword l = 0; l < k_count; ++l) {
                    const arma::cx_vec gml = s.g.submat(m * n, l, (m + 1) * n - 1, l);
                    z.submat(m * blk, l, (m + 1) * blk - 1, l) = vec(arma::cx_mat(gml * ghmk.t()));
                }
                r_hh_sub.slice(m) += ghmk * ghmk.t();
            }
            gram_sub += p * (z * z.t());
            h_sub += z.col(k);
        }
        const double n_sub = double(b.end - b.begin);
        sub_sinr.push_back(p * solve_dg(gram_sub, h_sub, r_hh_sub, n_sub).value);
        gram_total += gram_sub;
        h_total += h_sub;
        r_hh_total += r_hh_sub;
    }

    const RayleighMax rm = solve_dg(gram_total, h_total, r_hh_total, double(realizations));
    McObe out;
    out.sinr = p * rm.value;
    out.sinr_stderr = stderr_of(sub_sinr);
    out.regularized = rm.regularized;
    out.w.centralized = false;
    out.w.provenance = Provenance::mc_obe;
    out.w.regularized = rm.regularized;
    const arma::cx_vec w = rm.argmax / arma::norm(rm.argmax);
    for (arma::uword m = 0; m < m_count; ++m)
        out.w.w_per_ap.push_back(unvec(w.subvec(m * blk, (m + 1) * blk - 1), n, n));
    return out;
}

McObe dl_obe_mc(const ScenarioStatistics& stats, std::uint64_t seed, arma::uword realizations,
                arma::uword m, arma::uword k)
{
    const arma::uword n = stats.config.num_antennas;
    const double p = stats.config.tx_power_w;
    const double sigma2 = stats.config.noise_power_w;
    const ChannelSampler sampler(stats, seed);
    const auto bounds = split_batch(realizations, 10);

    arma::cx_mat gram_total(n * n, n * n, arma::fill::zeros);
    arma::cx_mat r_gh_total(n, n, arma::fill::zeros);
    arma::cx_mat r_hh_total(n, n, arma::fill::zeros);
    std::vector<double> sub_sinr;

    arma::cx_mat gram_sub(n * n, n * n, arma::fill::zeros);
    arma::cx_mat r_gh_sub(n, n, arma::fill::zeros);
    arma::cx_mat r_hh_sub(n, n, arma::fill::zeros);
    for (const auto& b : bounds) {
        if (b.begin == b.end)
            continue;
        gram_sub.zeros();
        r_gh_sub.zeros();
        r_hh_sub.zeros();
        for (arma::uword i = b.begin; i < b.end; ++i) {
            const ChannelSample s = sampler.draw(i);
            const arma::cx_mat gm = s.g.rows(m * n, (m + 1) * n - 1);
            const arma::cx_vec ghmk = s.g_hat.submat(m * n, k, (m + 1) * n - 1, k);
            accumulate_obe_gram(gram_sub, ghmk, arma::cx_mat(p * (gm * gm.t())));
            r_gh_sub += gm.col(k) * ghmk.t();
            r_hh_sub += ghmk * ghmk.t();
        }
        const double n_sub = double(b.end - b.begin);
        sub_sinr.push_back(solve_obe_system(arma::cx_mat(gram_sub / n_sub),
                                            arma::cx_mat(r_gh_sub / n_sub),
                                            arma::cx_mat(sigma2 * r_hh_sub / n_sub), p, n)
                               .sinr);
        gram_total += gram_sub;
        r_gh_total += r_gh_sub;
        r_hh_total += r_hh_sub;
    }

    const double n_all = double(realizations);
    const ObeSystemSolve sol =
        solve_obe_system(arma::cx_mat(gram_total / n_all), arma::cx_mat(r_gh_total / n_all),
                         arma::cx_mat(sigma2 * r_hh_total / n_all), p, n);

    McObe out;
    out.sinr = sol.sinr;
    out.sinr_stderr = stderr_of(sub_sinr);
    out.regularized = sol.regularized;
    out.w.centralized = false;
    out.w.provenance = Provenance::mc_obe;
    out.w.regularized = sol.regularized;
    out.w.w_per_ap.assign(stats.config.num_aps, arma::cx_mat());
    out.w.w_per_ap[m] = unit_frobenius(unvec(sol.w, n, n));
    return out;
}

DlObeMcAll dl_obe_mc_all(const ScenarioStatistics& stats, std::uint64_t seed,
                         arma::uword realizations)
{
    const arma::uword m_count = stats.config.num_aps;
    const arma::uword k_count = stats.config.num_ues;
    const arma::uword n = stats.config.num_antennas;
    const double p = stats.config.tx_power_w;
    const double sigma2 = stats.config.noise_power_w;
    const ChannelSampler sampler(stats, seed);
    const auto bounds = split_batch(realizations, 10);

    struct PairAcc {
        arma::cx_mat gram, r_gh, r_hh;
    };
    auto make_accs = [&] {
        std::vector<PairAcc> accs(m_count * k_count);
        for (auto& a : accs) {
            a.gram.zeros(n * n, n * n);
            a.r_gh.zeros(n, n);
            a.r_hh.zeros(n, n);
        }
        return accs;
    };
    std::vector<PairAcc> total = make_accs();
    std::vector<PairAcc> sub = make_accs();
    std::vector<std::vector<double>> sub_sinr(m_count * k_count);

    for (const auto& b : bounds) {
        if (b.begin == b.end)
            continue;
        for (auto& a : sub) {
            a.gram.zeros();
            a.r_gh.zeros();
            a.r_hh.zeros();
        }
        for (arma::uword i = b.begin; i < b.end; ++i) {
            const ChannelSample s = sampler.draw(i);
            for (arma::uword m = 0; m < m_count; ++m) {
                const arma::cx_mat gm = s.g.rows(m * n, (m + 1) * n - 1);
                const arma::cx_mat ym = p * (gm * gm.t());
                for (arma::uword k = 0; k < k_count; ++k) {
                    PairAcc& a = sub[m * k_count + k];
                    const arma::cx_vec ghmk = s.g_hat.submat(m * n, k, (m + 1) * n - 1, k);
                    accumulate_obe_gram(a.gram, ghmk, ym);
                    a.r_gh += gm.col(k) * ghmk.t();
                    a.r_hh += ghmk * ghmk.t();
                }
            }
        }
        const double n_sub = double(b.end - b.begin);
        for (arma::uword mk = 0; mk < m_count * k_count; ++mk) {
            sub_sinr[mk].push_back(solve_obe_system(arma::cx_mat(sub[mk].gram / n_sub),
                                                    arma::cx_mat(sub[mk].r_gh / n_sub),
                                                    arma::cx_mat(sigma2 * sub[mk].r_hh / n_sub), p, n)
                                       .sinr);
            total[mk].gram += sub[mk].gram;
            total[mk].r_gh += sub[mk].r_gh;
            total[mk].r_hh += sub[mk].r_hh;
        }
    }

    DlObeMcAll out;
    out.sinr.set_size(m_count, k_count);
    out.sinr_stderr.set_size(m_count, k_count);
    out.w.assign(m_count, std::vector<arma::cx_mat>(k_count));
    const double n_all = double(realizations);
    for (arma::uword m = 0; m < m_count; ++m)
        for (arma::uword k = 0; k < k_count; ++k) {
            const arma::uword mk = m * k_count + k;
            const ObeSystemSolve sol = solve_obe_system(
                arma::cx_mat(total[mk].gram / n_all), arma::cx_mat(total[mk].r_gh / n_all),
                arma::cx_mat(sigma2 * total[mk].r_hh / n_all), p, n);
            out.sinr(m, k) = sol.sinr;
            out.sinr_stderr(m, k) = stderr_of(sub_sinr[mk]);
            out.w[m][k] = unit_frobenius(unvec(sol.w, n, n));
        }
    return out;
}

arma::cx_vec lsfd_weights(const arma::cx_mat& weighted_xi_sum, const arma::cx_vec& b_kk,
                          const arma::vec& d_k, double p_k, double sigma2, double* sinr,
                          bool* regularized)
{
    arma::cx_mat denom = weighted_xi_sum - p_k * (b_kk * b_kk.t());
    denom.diag() += arma::cx_vec(sigma2 * d_k, arma::vec(d_k.n_elem, arma::fill::zeros));
    const RayleighMax rm = rayleigh_max({b_kk, denom});
    if (sinr)
        *sinr = p_k * rm.value;
    if (regularized)
        *regularized = rm.regularized;
    return rm.argmax;
}

} // namespace cfmimo
