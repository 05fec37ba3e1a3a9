// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "cfmimo/complexity.hpp"
#include "cfmimo/experiment.hpp"
#include "cfmimo/io.hpp"

namespace {

cfmimo::NetworkConfig load_base_config(const std::string& path)
{
    if (path.empty())
        return cfmimo::NetworkConfig{};
    return cfmimo::load_config(path);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"cfmimo: uplink cell-free massive MIMO spectral-efficiency simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string preset;
    std::string out_dir = "out";
    std::string phase = "";
    std::uint64_t seed = 0;
    arma::uword drops = 0, realizations = 0;
    unsigned workers = 0;
    bool paper_scale = false, force_closed_cobe = false;
    std::vector<double> sweep;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON network config file");
        cmd->add_option("--seed", seed, "master RNG seed (0: keep config seed)");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--workers", workers, "worker threads (0: CFMIMO_WORKERS or hardware)");
        cmd->add_option("--phase-shifts", phase, "override the phase-shift model")
            ->check(CLI::IsMember({"on", "off"}));
    };

    CLI::App* run = app.add_subcommand("run", "run an experiment preset");
    add_common(run);
    run->add_option("--preset", preset, "preset id")
        ->required()
        ->check(CLI::IsMember(cfmimo::preset_ids()));
    run->add_option("--drops", drops, "location realizations per sweep point");
    run->add_option("--realizations", realizations, "channel realizations per drop");
    run->add_option("--sweep", sweep, "override the preset sweep values");
    std::vector<std::string> schemes, bounds;
    run->add_option("--schemes", schemes, "restrict output to these schemes");
    run->add_option("--bounds", bounds, "restrict output to these bounds");
    run->add_flag("--paper-scale", paper_scale, "use the full-scale experiment profile");
    run->add_flag("--force-closed-cobe", force_closed_cobe,
                  "allow the dense closed C-OBE solve at any stack size");

    CLI::App* validate = app.add_subcommand("validate", "closed-form vs Monte-Carlo validation");
    add_common(validate);
    arma::uword v_scenarios = 20;
    validate->add_option("--scenarios", v_scenarios, "number of randomized scenarios");
    validate->add_option("--realizations", realizations, "channel realizations per scenario");

    CLI::App* complexity = app.add_subcommand("complexity", "Table-style complexity orders");
    add_common(complexity);
    arma::uword c_real = 1000;
    complexity->add_option("--realizations", c_real, "channel realizations I_r");

    CLI::App* optimality = app.add_subcommand("optimality", "OBE optimality test suite");
    add_common(optimality);
    optimality->add_option("--realizations", realizations, "channel realizations for agreement checks");

    CLI11_PARSE(app, argc, argv);

    try {
        cfmimo::NetworkConfig base = load_base_config(config_path);
        const int phase_override = phase.empty() ? -1 : (phase == "on" ? 1 : 0);

        if (run->parsed()) {
            cfmimo::ExperimentSpec spec;
            spec.preset = preset;
            spec.sweep = sweep;
            spec.schemes = schemes;
            spec.bounds = bounds;
            spec.drops = drops;
            spec.realizations = realizations;
            spec.out_dir = out_dir;
            spec.paper_scale = paper_scale;
            spec.force_closed_cobe = force_closed_cobe;
            spec.workers = workers;
            spec.seed = seed;
            spec.phase_override = phase_override;
            return cfmimo::run_experiment(spec, base);
        }
        if (validate->parsed()) {
            cfmimo::ValidationOptions opts;
            opts.scenarios = v_scenarios;
            if (realizations)
                opts.realizations = realizations;
            if (seed)
                opts.seed = seed;
            opts.workers = workers;
            const cfmimo::ValidationResult res = cfmimo::run_closed_form_validation(opts);
            arma::uword failed = 0;
            for (const auto& r : res.records)
                failed += r.pass ? 0 : 1;
            std::printf("validate: %llu comparisons, %llu outside 2*stderr, verdict %s\n",
                        (unsigned long long)res.records.size(), (unsigned long long)failed,
                        res.all_pass ? "PASS" : "FAIL");
            return res.all_pass ? 0 : 1;
        }
        if (complexity->parsed()) {
            std::fputs(cfmimo::complexity_report(base.num_aps, base.num_antennas, base.num_ues,
                                                 base.pilot_len, c_real)
                           .c_str(),
                       stdout);
            return 0;
        }
        if (optimality->parsed()) {
            cfmimo::OptimalityOptions opts;
            if (realizations)
                opts.realizations = realizations;
            if (seed)
                opts.seed = seed;
            opts.workers = workers;
            if (phase_override >= 0)
                base.phase_shifts = phase_override != 0;
            const cfmimo::OptimalityResult res = cfmimo::run_obe_optimality(base, opts);
            for (const auto& r : res.records)
                std::printf("%-34s wins %3llu/%-3llu detail %-12.5g %s\n", r.name.c_str(),
                            (unsigned long long)r.wins, (unsigned long long)r.trials, r.detail,
                            r.pass ? "PASS" : "FAIL");
            return res.all_pass ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
