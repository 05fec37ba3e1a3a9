// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line; the
// exit code is the number of failed criteria. Run a single criterion with
// `acceptance --only <n>`.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cfmimo/batch_util.hpp"
#include "cfmimo/experiment.hpp"
#include "cfmimo/io.hpp"
#include "cfmimo/parallel.hpp"
#include "test_util.hpp"

using namespace cfmimo;

namespace {

struct CriterionResult {
    bool pass = true;
    std::string detail;
};

double avg(const arma::vec& v)
{
    return arma::mean(v);
}

// Conservative standard error of the per-UE average (UE errors treated as
// independent).
double avg_stderr(const SEReport& r)
{
    return std::sqrt(arma::accu(arma::square(r.se_stderr))) / double(r.se_stderr.n_elem);
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

const SEReport& pick(const std::vector<SEReport>& reports, const std::string& scheme, Bound bound)
{
    for (const auto& r : reports)
        if (r.scheme == scheme && r.bound == bound)
            return r;
    throw std::runtime_error("missing report " + scheme + "/" + bound_name(bound));
}

// ---------------------------------------------------------------------------
// 1. Closed-form equivalence across randomized scenarios.
// ---------------------------------------------------------------------------
CriterionResult criterion1()
{
    ValidationOptions opts;
    opts.scenarios = 20;
    opts.realizations = 10000;
    opts.seed = 7;
    const ValidationResult res = run_closed_form_validation(opts);
    arma::uword fails = 0;
    double max_z = 0.0;
    for (const auto& r : res.records) {
        fails += r.pass ? 0 : 1;
        max_z = std::max(max_z, std::abs(r.closed - r.mc) / std::max(r.tolerance / 2.0, 1e-30));
    }
    CriterionResult out;
    out.pass = res.all_pass;
    out.detail = std::to_string(res.records.size()) + " comparisons, " + std::to_string(fails) +
                 " outside 2*stderr, max z " + fmt(max_z);
    return out;
}

// ---------------------------------------------------------------------------
// 2. OBE optimality under random perturbations.
// ---------------------------------------------------------------------------
CriterionResult criterion2()
{
    NetworkConfig c;
    c.num_aps = 4;
    c.num_antennas = 2;
    c.num_ues = 4;
    c.pilot_len = 2;
    c.pilot_policy = PilotPolicy::round_robin;
    c.seed = 97;
    OptimalityOptions opts;
    opts.realizations = 10000;
    opts.seed = 11;
    const OptimalityResult res = run_obe_optimality(c, opts);
    CriterionResult out;
    out.pass = true;
    arma::uword worst_wins = opts.perturbations;
    for (const auto& r : res.records) {
        out.pass = out.pass && r.pass;
        if (r.trials == opts.perturbations)
            worst_wins = std::min(worst_wins, r.wins);
    }
    out.detail = std::to_string(res.records.size()) + " checks, worst perturbation score " +
                 std::to_string(worst_wins) + "/" + std::to_string(opts.perturbations);
    return out;
}

// ---------------------------------------------------------------------------
// 3. Reductions.
// ---------------------------------------------------------------------------
CriterionResult criterion3()
{
    CriterionResult out;
    std::string detail;

    // (a) The closed form at W = I equals Monte-Carlo C-MR.
    {
        NetworkConfig c;
        c.num_aps = 4;
        c.num_antennas = 2;
        c.num_ues = 5;
        c.pilot_len = 2;
        c.pilot_policy = PilotPolicy::round_robin;
        c.seed = 301;
        const ScenarioStatistics s = build_statistics(c);
        McOptions mo;
        mo.realizations = 10000;
        mo.seed = 302;
        const auto mc = evaluate_centralized_mc(s, {c_mr()}, {Bound::uatf_centralized}, mo);
        const std::vector<BEMatrix> eye(c.num_ues, identity_be(8));
        const SEReport closed = uatf_centralized_closed(s, "c-mr", eye);
        const double gap = std::abs(avg(closed.se) - avg(mc[0].se));
        const double tol = 2.0 * avg_stderr(mc[0]);
        out.pass = out.pass && gap <= tol;
        detail += "(a) gap " + fmt(gap) + " tol " + fmt(tol);
    }

    // (b) Rayleigh limit: omega vanishes exactly and closed still matches MC.
    {
        NetworkConfig c;
        c.num_aps = 3;
        c.num_antennas = 2;
        c.num_ues = 4;
        c.pilot_len = 2;
        c.rician_range_m = 0.0;
        c.pilot_policy = PilotPolicy::round_robin;
        c.seed = 303;
        const ScenarioStatistics s = build_statistics(c);
        Substream rng(304, {0});
        bool omega_zero = true;
        for (int t = 0; t < 10; ++t) {
            const arma::cx_mat w = test::random_cx_mat(rng, 6, 6);
            omega_zero = omega_zero && uatf_centralized_omega(s, 0, w) == 0.0;
        }
        McOptions mo;
        mo.realizations = 10000;
        mo.seed = 305;
        const auto mc = evaluate_centralized_mc(s, {c_mr()}, {Bound::uatf_centralized}, mo);
        const std::vector<BEMatrix> eye(c.num_ues, identity_be(6));
        const SEReport closed = uatf_centralized_closed(s, "c-mr", eye);
        const double gap = std::abs(avg(closed.se) - avg(mc[0].se));
        const double tol = 2.0 * avg_stderr(mc[0]);
        out.pass = out.pass && omega_zero && gap <= tol;
        detail += std::string("; (b) omega ") + (omega_zero ? "== 0" : "!= 0") + ", gap " +
                  fmt(gap) + " tol " + fmt(tol);
    }

    // (c) N = 1: DG-OBE equals optimal LSFD over MR; (d) no LSFD gain on DG-OBE.
    {
        NetworkConfig c;
        c.num_aps = 8;
        c.num_antennas = 1;
        c.num_ues = 6;
        c.pilot_len = 2;
        c.pilot_policy = PilotPolicy::round_robin;
        c.seed = 306;
        const ScenarioStatistics s = build_statistics(c);
        const auto dg = build_dg_obe_matrices(s);
        McOptions mo;
        mo.realizations = 10000;
        mo.seed = 307;
        const auto mc = evaluate_distributed_mc(s, {be_local("dg-obe", dg), l_mr()},
                                                {Bound::uatf_ewdp, Bound::uatf_lsfd}, mo);
        const SEReport& dg_ewdp = pick(mc.reports, "dg-obe", Bound::uatf_ewdp);
        const SEReport& dg_lsfd = pick(mc.reports, "dg-obe", Bound::uatf_lsfd);
        const SEReport& mr_lsfd = pick(mc.reports, "l-mr", Bound::uatf_lsfd);

        const double gap_c = std::abs(avg(dg_ewdp.se) - avg(mr_lsfd.se));
        const double tol_c =
            2.0 * std::sqrt(std::pow(avg_stderr(dg_ewdp), 2) + std::pow(avg_stderr(mr_lsfd), 2));
        out.pass = out.pass && gap_c <= tol_c;
        detail += "; (c) gap " + fmt(gap_c) + " tol " + fmt(tol_c);

        const double improve = avg(dg_lsfd.se) - avg(dg_ewdp.se);
        const double tol_d = avg_stderr(dg_ewdp);
        out.pass = out.pass && improve < tol_d;
        detail += "; (d) lsfd gain " + fmt(improve) + " < stderr " + fmt(tol_d);
    }

    out.detail = detail;
    return out;
}

// ---------------------------------------------------------------------------
// 4. Scheme ordering trend at desk scale.
// ---------------------------------------------------------------------------
CriterionResult criterion4()
{
    NetworkConfig base;
    base.num_aps = 20;
    base.num_antennas = 4;
    base.num_ues = 20;
    base.pilot_len = 1;
    base.seed = 401;

    const arma::uword drops = 5;
    const arma::uword realizations = 1000;

    struct Tally {
        double se_sum = 0.0, var_sum = 0.0;
        arma::uword n = 0;
        void add(const SEReport& r)
        {
            se_sum += arma::accu(r.se);
            var_sum += arma::accu(arma::square(r.se_stderr));
            n += r.se.n_elem;
        }
        double mean() const { return se_sum / double(n); }
        double err() const { return std::sqrt(var_sum) / double(n); }
    };
    Tally mmse_std, obe_std, obe_uatf, mr_uatf, lmmse_lsfd, dg_ewdp, lmr_lsfd;

    for (arma::uword d = 0; d < drops; ++d) {
        NetworkConfig c = base;
        c.seed = base.seed + 7919 * d;
        const ScenarioStatistics s = build_statistics(c);
        const auto cobe = build_cobe_matrices(s, false); // block-diagonal path at MN = 80
        McOptions mo;
        mo.realizations = realizations;
        mo.seed = c.seed ^ 0x5eedULL;

        const auto cen = evaluate_centralized_mc(
            s, {c_mmse(s), be_centralized("c-obe", cobe), c_mr()},
            {Bound::uatf_centralized, Bound::standard_centralized}, mo);
        mmse_std.add(pick(cen, "c-mmse", Bound::standard_centralized));
        obe_std.add(pick(cen, "c-obe", Bound::standard_centralized));
        obe_uatf.add(pick(cen, "c-obe", Bound::uatf_centralized));
        mr_uatf.add(pick(cen, "c-mr", Bound::uatf_centralized));

        const auto dg = build_dg_obe_matrices(s);
        const auto dist = evaluate_distributed_mc(s, {l_mmse(s), be_local("dg-obe", dg), l_mr()},
                                                  {Bound::uatf_ewdp, Bound::uatf_lsfd}, mo);
        lmmse_lsfd.add(pick(dist.reports, "l-mmse", Bound::uatf_lsfd));
        dg_ewdp.add(pick(dist.reports, "dg-obe", Bound::uatf_ewdp));
        lmr_lsfd.add(pick(dist.reports, "l-mr", Bound::uatf_lsfd));
    }

    auto ordered = [](const Tally& hi, const Tally& lo) {
        return hi.mean() - lo.mean() > 2.0 * std::sqrt(hi.err() * hi.err() + lo.err() * lo.err());
    };

    CriterionResult out;
    const bool o1 = ordered(mmse_std, obe_std);
    const bool o2 = ordered(obe_std, obe_uatf);
    const bool o3 = ordered(obe_uatf, mr_uatf);
    const bool o4 = ordered(lmmse_lsfd, dg_ewdp);
    const bool o5 = ordered(dg_ewdp, lmr_lsfd);
    const double ratio = obe_uatf.mean() / mr_uatf.mean();
    const bool ratio_ok = ratio >= 1.6 && ratio <= 2.7;
    out.pass = o1 && o2 && o3 && o4 && o5 && ratio_ok;
    out.detail = "centralized " + fmt(mmse_std.mean()) + " >= " + fmt(obe_std.mean()) +
                 " >= " + fmt(obe_uatf.mean()) + " >= " + fmt(mr_uatf.mean()) + "; distributed " +
                 fmt(lmmse_lsfd.mean()) + " >= " + fmt(dg_ewdp.mean()) + " >= " +
                 fmt(lmr_lsfd.mean()) + "; c-obe/c-mr ratio " + fmt(ratio);
    return out;
}

// ---------------------------------------------------------------------------
// 5. Pilot-contamination robustness: the C-OBE vs C-MMSE gap shrinks when
//    contamination is severe.
// ---------------------------------------------------------------------------
CriterionResult criterion5()
{
    NetworkConfig base;
    base.num_aps = 20;
    base.num_antennas = 4;
    base.num_ues = 20;
    base.seed = 501;

    const arma::uword drops = 3;
    double gap[2] = {0.0, 0.0}; // relative gaps at tau_p = 1 and tau_p = 5
    for (int t = 0; t < 2; ++t) {
        const arma::uword tau = t == 0 ? 1 : 5;
        double se_obe = 0.0, se_mmse = 0.0;
        for (arma::uword d = 0; d < drops; ++d) {
            NetworkConfig c = base;
            c.pilot_len = tau;
            c.seed = base.seed + 104729 * d; // same drops across tau via the same base seeds
            const ScenarioStatistics s = build_statistics(c);
            const auto cobe = build_cobe_matrices(s, false);
            McOptions mo;
            mo.realizations = 1000;
            mo.seed = c.seed ^ 0xabcdULL;
            const auto cen =
                evaluate_centralized_mc(s, {c_mmse(s), be_centralized("c-obe", cobe)},
                                        {Bound::standard_centralized}, mo);
            se_mmse += avg(pick(cen, "c-mmse", Bound::standard_centralized).se);
            se_obe += avg(pick(cen, "c-obe", Bound::standard_centralized).se);
        }
        gap[t] = (se_mmse - se_obe) / se_mmse;
    }

    CriterionResult out;
    out.pass = gap[0] < gap[1];
    out.detail = "relative gap at tau_p=1: " + fmt(gap[0]) + ", at tau_p=5: " + fmt(gap[1]);
    return out;
}

// ---------------------------------------------------------------------------
// 6. Vectorization identity suite at 1e-10 on 1000 randomized instances.
// ---------------------------------------------------------------------------
CriterionResult criterion6()
{
    Substream rng(601, {0});
    arma::uword fails = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const arma::uword n = 2 + trial % 4;
        const arma::cx_mat a = test::random_cx_mat(rng, n, n);
        const arma::cx_mat b = test::random_cx_mat(rng, n, n);
        const arma::cx_mat c = test::random_cx_mat(rng, n, n);
        const arma::cx_mat d = test::random_cx_mat(rng, n, n);
        const arma::cx_vec x = test::random_cx_vec(rng, n);
        const arma::cx_vec y = test::random_cx_vec(rng, n);

        double errs[5];
        errs[0] = std::abs(arma::cdot(x, a * y) - arma::trace(a * (y * x.t()))) /
                  (1.0 + std::abs(arma::trace(a * (y * x.t()))));
        errs[1] = arma::norm(vec(a * b * c) - kron(c.st(), a) * vec(b)) /
                  arma::norm(kron(c.st(), a) * vec(b));
        errs[2] = std::abs(arma::trace(a * b) - arma::cdot(vec(arma::cx_mat(a.t())), vec(b))) /
                  (1.0 + std::abs(arma::trace(a * b)));
        errs[3] = std::abs(arma::trace(a * b * c) -
                           arma::cdot(vec(arma::cx_mat(a.t())),
                                      kron(arma::cx_mat(n, n, arma::fill::eye), b) * vec(c))) /
                  (1.0 + std::abs(arma::trace(a * b * c)));
        errs[4] = std::abs(arma::trace(a.t() * b * c * d.st()) -
                           arma::cdot(vec(a), kron(d, b) * vec(c))) /
                  (1.0 + std::abs(arma::trace(a.t() * b * c * d.st())));
        for (double e : errs) {
            worst = std::max(worst, e);
            fails += e > 1e-10 ? 1 : 0;
        }
    }
    CriterionResult out;
    out.pass = fails == 0;
    out.detail = "5000 identity checks, worst relative error " + fmt(worst);
    return out;
}

// ---------------------------------------------------------------------------
// 7. Statistical channel-model suite at 1e5 draws.
// ---------------------------------------------------------------------------
CriterionResult criterion7()
{
    NetworkConfig c;
    c.num_aps = 2;
    c.num_antennas = 2;
    c.num_ues = 2;
    c.pilot_len = 1; // contaminated estimation
    c.seed = 701;
    const ScenarioStatistics s = build_statistics(c);
    const ChannelSampler sampler(s, 702);
    const arma::uword draws = 100000;
    const arma::uword n = c.num_antennas;

    arma::cx_mat cov_hat(n, n, arma::fill::zeros);
    arma::cx_mat cov_err(n, n, arma::fill::zeros);
    cx mean_phase(0.0, 0.0);
    for (arma::uword i = 0; i < draws; ++i) {
        const ChannelSample smp = sampler.draw(i);
        const cx phase = std::polar(1.0, smp.theta(0, 0));
        const arma::cx_vec ghat = smp.g_hat.submat(0, 0, n - 1, 0);
        const arma::cx_vec g = smp.g.submat(0, 0, n - 1, 0);
        const arma::cx_vec centered = ghat - phase * s.pair(0, 0).g_los;
        const arma::cx_vec err = g - ghat;
        cov_hat += centered * centered.t();
        cov_err += err * err.t();
        mean_phase += phase;
    }
    cov_hat /= double(draws);
    cov_err /= double(draws);
    mean_phase /= double(draws);

    const double e1 = test::rel_fro(cov_hat, s.pair(0, 0).R_hat);
    const double e2 = test::rel_fro(cov_err, s.pair(0, 0).C_err);
    const double phase_bound = 3.0 / std::sqrt(double(draws));
    CriterionResult out;
    out.pass = e1 <= 0.03 && e2 <= 0.03 && std::abs(mean_phase) <= phase_bound;
    out.detail = "cov(g_hat) err " + fmt(e1) + ", cov(err) err " + fmt(e2) + ", |E e^{j theta}| " +
                 fmt(std::abs(mean_phase)) + " (3-sigma bound " + fmt(phase_bound) + ")";
    return out;
}

// ---------------------------------------------------------------------------
// 8. Determinism across worker counts.
// ---------------------------------------------------------------------------
CriterionResult criterion8()
{
    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / "cfmimo_acceptance_det";
    fs::remove_all(base);

    NetworkConfig cfg;
    cfg.num_aps = 3;
    cfg.num_antennas = 2;
    cfg.num_ues = 4;
    cfg.pilot_len = 2;
    cfg.seed = 801;

    auto run_with = [&](unsigned workers, const std::string& sub) {
        ExperimentSpec spec;
        spec.preset = "fig1-se-vs-N";
        spec.sweep = {1, 2};
        spec.drops = 2;
        spec.realizations = 400;
        spec.workers = workers;
        spec.out_dir = (base / sub).string();
        run_experiment(spec, cfg);
        return read_text_file((base / sub / "summary.csv").string()) +
               read_text_file((base / sub / "reports.csv").string());
    };
    const std::string one = run_with(1, "w1");
    const std::string eight = run_with(8, "w8");
    const std::string again = run_with(1, "w1b");
    fs::remove_all(base);

    CriterionResult out;
    out.pass = one == eight && one == again;
    out.detail = out.pass ? "1-worker, 8-worker and repeat runs byte-identical"
                          : "outputs differ across runs";
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    int only = 0;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc)
            only = std::atoi(argv[i + 1]);

    const std::vector<std::pair<std::string, std::function<CriterionResult()>>> criteria = {
        {"closed-form equivalence (5 closed-form families, 20 scenarios)", criterion1},
        {"OBE optimality under 10% Frobenius perturbations", criterion2},
        {"reduction identities (C-MR, Rayleigh, N=1 LSFD, no-LSFD-gain)", criterion3},
        {"scheme ordering trend at desk scale", criterion4},
        {"pilot-contamination robustness trend", criterion5},
        {"vectorization identity suite", criterion6},
        {"statistical channel-model suite", criterion7},
        {"determinism across worker counts", criterion8},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only != 0 && only != int(i + 1))
            continue;
        CriterionResult res;
        try {
            res = criteria[i].second();
        } catch (const std::exception& e) {
            res.pass = false;
            res.detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %zu: %s -- %s\n", res.pass ? "PASS" : "FAIL", i + 1,
                    criteria[i].first.c_str(), res.detail.c_str());
        std::fflush(stdout);
        failures += res.pass ? 0 : 1;
    }
    return failures;
}
