// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cfmimo/se_eval.hpp"
#include "test_util.hpp"

using namespace cfmimo;
using test::random_cx_mat;

namespace {

NetworkConfig base_config(arma::uword m, arma::uword n, arma::uword k, arma::uword tau,
                          std::uint64_t seed = 12)
{
    NetworkConfig c;
    c.num_aps = m;
    c.num_antennas = n;
    c.num_ues = k;
    c.pilot_len = tau;
    c.pilot_policy = PilotPolicy::round_robin;
    c.seed = seed;
    return c;
}

// Trace-route denominator for one UE, reconstructed from
// the closed SINR; used to cross-check the kron-route quadratic forms.
double th1_denominator(const ScenarioStatistics& s, arma::uword k, const arma::cx_mat& w)
{
    const double sinr = uatf_centralized_closed_sinr(s, k, w);
    const double num =
        s.config.tx_power_w * std::norm(arma::trace(w.t() * s.collective_R_bar(k)));
    return num / sinr;
}

} // namespace

TEST_CASE("BEMatrix json round trip")
{
    Substream rng(2, {0});
    BEMatrix be;
    be.centralized = true;
    be.provenance = Provenance::closed_obe;
    be.regularized = true;
    be.w = random_cx_mat(rng, 3, 3);
    const BEMatrix back = be_from_json(be_to_json(be));
    CHECK(back.centralized);
    CHECK(back.provenance == Provenance::closed_obe);
    CHECK(back.regularized);
    CHECK(test::rel_fro(back.w, be.w) < 1e-15);

    BEMatrix loc;
    loc.centralized = false;
    loc.provenance = Provenance::mc_obe;
    loc.w_per_ap = {random_cx_mat(rng, 2, 2), random_cx_mat(rng, 2, 2)};
    const BEMatrix back_loc = be_from_json(be_to_json(loc));
    CHECK_FALSE(back_loc.centralized);
    REQUIRE(back_loc.w_per_ap.size() == 2);
    CHECK(test::rel_fro(back_loc.w_per_ap[1], loc.w_per_ap[1]) < 1e-15);
}

TEST_CASE("c_mr equals the identity BE combiner")
{
    const ScenarioStatistics s = build_statistics(base_config(2, 2, 3, 2));
    const ChannelSampler sampler(s, 4);
    const ChannelSample smp = sampler.draw(0);
    const std::vector<BEMatrix> eye(s.config.num_ues, identity_be(4));
    const arma::cx_mat v_mr = c_mr().combine(smp);
    const arma::cx_mat v_be = be_centralized("id", eye).combine(smp);
    CHECK(arma::norm(v_mr - v_be, "fro") == 0.0);
    CHECK(arma::norm(v_mr - smp.g_hat, "fro") == 0.0);
}

TEST_CASE("c_mmse with one UE and no estimation error points along MR")
{
    NetworkConfig c = base_config(2, 2, 1, 1);
    ScenarioStatistics s = build_statistics(c);
    for (auto& p : s.pair_stats)
        p.C_err.zeros(); // error-free estimation: the Gram becomes g g^H + sigma^2 I
    const ChannelSampler sampler(s, 5);
    const ChannelSample smp = sampler.draw(0);
    const arma::cx_mat v = c_mmse(s).combine(smp);
    // Sherman-Morrison: (g g^H p + Z)^{-1} g is collinear with g for scalar Z
    const arma::cx_vec a = v.col(0) / arma::norm(v.col(0));
    const arma::cx_vec b = smp.g_hat.col(0) / arma::norm(smp.g_hat.col(0));
    CHECK(std::abs(std::abs(arma::cdot(a, b)) - 1.0) < 1e-8);
}

TEST_CASE("l_mmse reduces to the scalar formula at K = N = 1")
{
    NetworkConfig c = base_config(2, 1, 1, 1);
    const ScenarioStatistics s = build_statistics(c);
    const ChannelSampler sampler(s, 6);
    const ChannelSample smp = sampler.draw(0);
    const arma::cx_cube v = l_mmse(s).combine(smp);
    const double p = c.tx_power_w;
    for (arma::uword m = 0; m < c.num_aps; ++m) {
        const cx ghat = smp.g_hat(m, 0);
        const double cerr = std::real(s.pair(m, 0).C_err(0, 0));
        const cx want = p * ghat / (p * (std::norm(ghat) + cerr) + c.noise_power_w);
        CHECK(std::abs(v(0, 0, m) - want) < 1e-12 * std::abs(want));
    }
}

TEST_CASE("centralized OBE quadratic form equals the trace-route denominator")
{
    // Two independent assemblies of the same denominator: the scalar trace
    // route vs the kron-built Gamma.
    for (bool phase : {true, false}) {
        NetworkConfig c = base_config(2, 2, 4, 2, 31);
        c.phase_shifts = phase;
        const ScenarioStatistics s = build_statistics(c);
        Substream rng(8, {phase ? 1u : 0u});
        for (arma::uword k = 0; k < c.num_ues; ++k) {
            const CobeClosed closed =
                phase ? c_obe_closed(s, k, true) : c_obe_closed_nophase(s, k, true);
            for (int t = 0; t < 4; ++t) {
                const arma::cx_mat w = random_cx_mat(rng, 4, 4);
                const arma::cx_vec wv = vec(w);
                const double quad = std::real(arma::cdot(wv, closed.terms.gamma * wv));
                const double want = th1_denominator(s, k, w);
                CHECK(quad == doctest::Approx(want).epsilon(1e-8));
            }
        }
    }
}

TEST_CASE("local OBE quadratic form equals the per-AP trace route")
{
    const ScenarioStatistics s = build_statistics(base_config(3, 2, 4, 2, 33));
    Substream rng(9, {0});
    const double p = s.config.tx_power_w;
    for (arma::uword k = 0; k < s.config.num_ues; ++k) {
        std::vector<arma::cx_mat> w_set;
        for (arma::uword m = 0; m < s.config.num_aps; ++m)
            w_set.push_back(random_cx_mat(rng, 2, 2));
        const LsfdClosedTerms terms = lsfd_closed_terms(s, k, w_set);
        for (arma::uword m = 0; m < s.config.num_aps; ++m) {
            const LocalObeTerms lt = local_obe_terms(s, m, k);
            const arma::cx_vec wv = vec(w_set[m]);
            const double quad = std::real(arma::cdot(wv, lt.gamma * wv));
            const double want = std::real(terms.weighted_xi_sum(m, m)) -
                                p * std::norm(terms.b_bar(m)) +
                                s.config.noise_power_w * terms.d_bar(m);
            CHECK(quad == doctest::Approx(want).epsilon(1e-8));
        }
    }
}

TEST_CASE("distributed OBE quadratic form equals the equal-weight trace route")
{
    const ScenarioStatistics s = build_statistics(base_config(3, 2, 4, 2, 35));
    Substream rng(10, {0});
    const double p = s.config.tx_power_w;
    const arma::uword blk = 4;
    for (arma::uword k = 0; k < s.config.num_ues; ++k) {
        const DgObeClosed dg = dg_obe_closed(s, k, true);
        std::vector<arma::cx_mat> w_set;
        arma::cx_vec wd(s.config.num_aps * blk);
        for (arma::uword m = 0; m < s.config.num_aps; ++m) {
            w_set.push_back(random_cx_mat(rng, 2, 2));
            wd.subvec(m * blk, (m + 1) * blk - 1) = vec(w_set[m]);
        }
        const LsfdClosedTerms terms = lsfd_closed_terms(s, k, w_set);
        const double quad = std::real(arma::cdot(wd, dg.terms.lambda * wd));
        const double want = std::real(arma::accu(terms.weighted_xi_sum)) -
                            p * std::norm(arma::accu(terms.b_bar)) +
                            s.config.noise_power_w * arma::accu(terms.d_bar);
        CHECK(quad == doctest::Approx(want).epsilon(1e-8));
    }
}

TEST_CASE("upsilon matches its Monte-Carlo definition")
{
    const ScenarioStatistics s = build_statistics(base_config(2, 2, 2, 1, 37));
    const arma::uword stack = 4;
    const CobeClosed closed = c_obe_closed(s, 0, true);
    REQUIRE(closed.terms.upsilon.n_rows == stack * stack);

    Substream rng(11, {0});
    arma::cx_mat mc(stack * stack, stack * stack, arma::fill::zeros);
    const arma::uword draws = 20000;
    for (arma::uword i = 0; i < draws; ++i) {
        arma::cx_vec g(stack);
        for (arma::uword m = 0; m < s.config.num_aps; ++m) {
            const cx phase = std::polar(1.0, rng.uniform(-M_PI, M_PI));
            g.subvec(m * 2, m * 2 + 1) = phase * s.pair(m, 0).g_los;
        }
        const arma::cx_mat outer = g * g.t();
        mc += kron(outer.st(), outer);
    }
    mc /= double(draws);
    CHECK(arma::norm(mc - closed.terms.upsilon, "fro") <=
          0.05 * arma::norm(closed.terms.upsilon, "fro"));
}

TEST_CASE("Rayleigh limit: phase and no-phase closed OBE coincide")
{
    NetworkConfig c = base_config(2, 2, 3, 1, 39);
    c.rician_range_m = 0.0;
    const ScenarioStatistics s = build_statistics(c);
    for (arma::uword k = 0; k < c.num_ues; ++k) {
        const CobeClosed a = c_obe_closed(s, k);
        const CobeClosed b = c_obe_closed_nophase(s, k);
        CHECK(a.sinr == doctest::Approx(b.sinr).epsilon(1e-8));
        // arg max defined up to scale; both are unit-Frobenius
        const double align = std::abs(arma::accu(arma::conj(a.w.w) % b.w.w));
        CHECK(align == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("single-AP centralized OBE equals the local OBE")
{
    const ScenarioStatistics s = build_statistics(base_config(1, 3, 3, 1, 41));
    for (arma::uword k = 0; k < s.config.num_ues; ++k) {
        const CobeClosed cen = c_obe_closed(s, k);
        const DlObeClosed loc = dl_obe_closed(s, 0, k);
        CHECK(cen.sinr == doctest::Approx(loc.sinr).epsilon(1e-9));
        const double align = std::abs(arma::accu(arma::conj(cen.w.w) % loc.w));
        CHECK(align == doctest::Approx(1.0).epsilon(1e-7));
    }
}

TEST_CASE("single-AP DG-OBE equals DL-OBE")
{
    const ScenarioStatistics s = build_statistics(base_config(1, 2, 3, 1, 43));
    for (arma::uword k = 0; k < s.config.num_ues; ++k) {
        const DgObeClosed dg = dg_obe_closed(s, k);
        const DlObeClosed dl = dl_obe_closed(s, 0, k);
        CHECK(dg.sinr == doctest::Approx(dl.sinr).epsilon(1e-9));
    }
}

TEST_CASE("block-diagonal C-OBE construction matches the dense solution")
{
    const ScenarioStatistics s = build_statistics(base_config(3, 2, 4, 2, 45));
    for (arma::uword k = 0; k < s.config.num_ues; ++k) {
        const CobeClosed dense = c_obe_closed(s, k);
        const CobeClosed block = c_obe_closed_blockdiag(s, k);
        CHECK(block.sinr == doctest::Approx(dense.sinr).epsilon(1e-6));
        const double align = std::abs(arma::accu(arma::conj(dense.w.w) % block.w.w));
        CHECK(align == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("N = 1 DG-OBE reproduces the optimal LSFD weights over MR")
{
    const ScenarioStatistics s = build_statistics(base_config(4, 1, 3, 1, 47));
    const std::vector<BEMatrix> eye(s.config.num_ues, identity_local_be(4, 1));
    for (arma::uword k = 0; k < s.config.num_ues; ++k) {
        const DgObeClosed dg = dg_obe_closed(s, k);
        const LsfdClosedTerms terms = lsfd_closed_terms(s, k, eye[k].w_per_ap);
        double lsfd_sinr = 0.0;
        lsfd_weights(terms.weighted_xi_sum, terms.b_bar, terms.d_bar, s.config.tx_power_w,
                     s.config.noise_power_w, &lsfd_sinr);
        CHECK(dg.sinr == doctest::Approx(lsfd_sinr).epsilon(1e-8));
    }
}

TEST_CASE("N = 1 local OBE ties MR by scale invariance")
{
    const ScenarioStatistics s = build_statistics(base_config(3, 1, 3, 1, 48));
    for (arma::uword m = 0; m < s.config.num_aps; ++m)
        for (arma::uword k = 0; k < s.config.num_ues; ++k) {
            const DlObeClosed dl = dl_obe_closed(s, m, k);
            const arma::cx_mat eye1(1, 1, arma::fill::eye);
            CHECK(dl.sinr ==
                  doctest::Approx(local_uatf_closed_sinr(s, m, k, eye1)).epsilon(1e-9));
        }
}

TEST_CASE("closed OBE agrees with the sampled system")
{
    const NetworkConfig c = base_config(2, 2, 3, 1, 49);
    const ScenarioStatistics s = build_statistics(c);
    const arma::uword realizations = 10000;
    for (arma::uword k = 0; k < c.num_ues; ++k) {
        const CobeClosed closed = c_obe_closed(s, k);
        const McObe mc = c_obe_mc(s, 1000 + k, realizations, k);
        CHECK(std::abs(closed.sinr - mc.sinr) <= 3.0 * mc.sinr_stderr);

        const DgObeClosed dg = dg_obe_closed(s, k);
        const McObe dgmc = dg_obe_mc(s, 2000 + k, realizations, k);
        CHECK(std::abs(dg.sinr - dgmc.sinr) <= 3.0 * dgmc.sinr_stderr);
    }
    const DlObeMcAll dl_mc = dl_obe_mc_all(s, 3000, realizations);
    for (arma::uword m = 0; m < c.num_aps; ++m)
        for (arma::uword k = 0; k < c.num_ues; ++k) {
            const DlObeClosed closed = dl_obe_closed(s, m, k);
            CHECK(std::abs(closed.sinr - dl_mc.sinr(m, k)) <= 3.0 * dl_mc.sinr_stderr(m, k));
            const double align =
                std::abs(arma::accu(arma::conj(closed.w) % dl_mc.w[m][k]));
            CHECK(align > 0.98);
        }
}

TEST_CASE("scalar network: any BE matrix ties MR, OBE included")
{
    const NetworkConfig c = base_config(1, 1, 1, 1, 50);
    const ScenarioStatistics s = build_statistics(c);
    const McObe obe = c_obe_mc(s, 5000, 2000, 0);
    McOptions opts;
    opts.realizations = 2000;
    opts.seed = 5000;
    const auto mr = evaluate_centralized_mc(s, {c_mr()}, {Bound::uatf_centralized}, opts);
    CHECK(obe.sinr == doctest::Approx(mr[0].sinr(0)).epsilon(1e-9));
}

TEST_CASE("closed OBE objective dominates identity and random matrices")
{
    const ScenarioStatistics s = build_statistics(base_config(3, 2, 4, 2, 52));
    Substream rng(14, {0});
    const arma::uword stack = 6;
    for (arma::uword k = 0; k < s.config.num_ues; ++k) {
        const CobeClosed cobe = c_obe_closed(s, k);
        CHECK(cobe.sinr >=
              uatf_centralized_closed_sinr(s, k, arma::cx_mat(stack, stack, arma::fill::eye)) *
                  (1.0 - 1e-9));
        for (int t = 0; t < 20; ++t)
            CHECK(cobe.sinr >=
                  uatf_centralized_closed_sinr(s, k, random_cx_mat(rng, stack, stack)) *
                      (1.0 - 1e-9));
    }
}

TEST_CASE("dl_obe_mc single-pair agrees with the all-pairs pass")
{
    const NetworkConfig c = base_config(2, 2, 2, 1, 51);
    const ScenarioStatistics s = build_statistics(c);
    const McObe one = dl_obe_mc(s, 4000, 2000, 1, 0);
    const DlObeMcAll all = dl_obe_mc_all(s, 4000, 2000);
    CHECK(one.sinr == doctest::Approx(all.sinr(1, 0)).epsilon(1e-10));
}

TEST_CASE("closed forms refuse the no-phase model with LoS")
{
    NetworkConfig c = base_config(2, 2, 2, 1, 53);
    c.phase_shifts = false;
    const ScenarioStatistics s = build_statistics(c);
    CHECK_THROWS_AS(dg_obe_closed(s, 0), std::invalid_argument);
    CHECK_THROWS_AS(dl_obe_closed(s, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(c_obe_closed(s, 0), std::invalid_argument);
    CHECK_THROWS_AS(c_obe_closed_nophase(build_statistics(base_config(2, 2, 2, 1, 53)), 0),
                    std::invalid_argument);
}

TEST_CASE("lsfd_weights properties")
{
    const ScenarioStatistics s = build_statistics(base_config(3, 2, 3, 1, 55));
    const std::vector<BEMatrix> eye(s.config.num_ues, identity_local_be(3, 2));
    for (arma::uword k = 0; k < s.config.num_ues; ++k) {
        const LsfdClosedTerms t = lsfd_closed_terms(s, k, eye[k].w_per_ap);
        double opt = 0.0;
        const arma::cx_vec a = lsfd_weights(t.weighted_xi_sum, t.b_bar, t.d_bar,
                                            s.config.tx_power_w, s.config.noise_power_w, &opt);
        // equal weights never beat the optimum
        const double num = s.config.tx_power_w * std::norm(arma::accu(t.b_bar));
        const double den = std::real(arma::accu(t.weighted_xi_sum)) - num +
                           s.config.noise_power_w * arma::accu(t.d_bar);
        CHECK(opt >= num / den - 1e-12 * opt);
        CHECK(a.n_elem == s.config.num_aps);
    }
    // M = 1: weights are a scale factor, optimal equals equal-weight
    const ScenarioStatistics s1 = build_statistics(base_config(1, 2, 3, 1, 57));
    const std::vector<BEMatrix> eye1(s1.config.num_ues, identity_local_be(1, 2));
    const LsfdClosedTerms t1 = lsfd_closed_terms(s1, 0, eye1[0].w_per_ap);
    double opt1 = 0.0;
    lsfd_weights(t1.weighted_xi_sum, t1.b_bar, t1.d_bar, s1.config.tx_power_w,
                 s1.config.noise_power_w, &opt1);
    const double num1 = s1.config.tx_power_w * std::norm(arma::accu(t1.b_bar));
    const double den1 = std::real(arma::accu(t1.weighted_xi_sum)) - num1 +
                        s1.config.noise_power_w * arma::accu(t1.d_bar);
    CHECK(opt1 == doctest::Approx(num1 / den1).epsilon(1e-10));
}

TEST_CASE("OBE perturbation optimality")
{
    const ScenarioStatistics s = build_statistics(base_config(2, 2, 3, 1, 59));
    Substream rng(13, {0});
    const double p = s.config.tx_power_w;
    auto quotient = [&](const arma::cx_vec& w, const arma::cx_vec& b, const arma::cx_mat& a) {
        return p * std::norm(arma::cdot(w, b)) / std::real(arma::cdot(w, a * w));
    };
    const CobeClosed cobe = c_obe_closed(s, 0, true);
    const arma::cx_vec w_star = vec(cobe.w.w);
    const double best = quotient(w_star, cobe.terms.r_bar, cobe.terms.gamma);
    CHECK(best == doctest::Approx(cobe.sinr).epsilon(1e-8));
    for (int t = 0; t < 100; ++t) {
        arma::cx_vec delta = rng.cn_vector(w_star.n_elem);
        delta *= 0.1 * arma::norm(w_star) / arma::norm(delta);
        CHECK(quotient(w_star + delta, cobe.terms.r_bar, cobe.terms.gamma) <=
              best * (1.0 + 1e-9));
    }
}
