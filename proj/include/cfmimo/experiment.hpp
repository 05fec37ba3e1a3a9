// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "cfmimo/io.hpp"
#include "cfmimo/se_eval.hpp"

namespace cfmimo {

struct ExperimentSpec {
    std::string preset;
    std::vector<double> sweep;        // empty: preset defaults
    std::vector<std::string> schemes; // empty: preset defaults; otherwise row filter
    std::vector<std::string> bounds;  // empty: preset defaults; otherwise row filter
    arma::uword drops = 0;            // 0: preset default
    arma::uword realizations = 0;     // 0: preset default
    std::string out_dir = "out";
    bool paper_scale = false;
    bool force_closed_cobe = false; // run the dense closed C-OBE at any stack size
    unsigned workers = 0;
    std::uint64_t seed = 0;   // 0: keep base config seed
    int phase_override = -1;  // -1 keep, 0 off, 1 on
};

const std::vector<std::string>& preset_ids();

// Runs one preset; writes summary.csv, reports.csv, cdf.csv (CDF presets) and
// manifest.json under spec.out_dir. Returns a process exit code.
int run_experiment(const ExperimentSpec& spec, NetworkConfig base);

// Dense closed C-OBE is restricted to stacks MN <= this in presets; larger
// phase-shift scenarios use the exact block-diagonal construction instead.
inline constexpr arma::uword kClosedCobeMaxStack = 16;

// Statistics-based C-OBE matrices for every UE, choosing the construction by
// scenario size and phase model.
std::vector<BEMatrix> build_cobe_matrices(const ScenarioStatistics& stats, bool force_dense);
std::vector<BEMatrix> build_dg_obe_matrices(const ScenarioStatistics& stats);
std::vector<BEMatrix> build_dl_obe_matrices(const ScenarioStatistics& stats);

// ---------------------------------------------------------------------------
// Closed-form-vs-Monte-Carlo validation (the `validate` subcommand).
// ---------------------------------------------------------------------------

struct ValidationOptions {
    arma::uword scenarios = 20;
    arma::uword realizations = 10000;
    std::uint64_t seed = 7;
    unsigned workers = 0;
};

struct CheckRecord {
    std::string name;     // e.g. "centralized-uatf[c-mr]"
    arma::uword scenario = 0;
    double closed = 0.0;
    double mc = 0.0;
    double tolerance = 0.0; // 2 * stderr (+ small absolute floor)
    bool pass = true;
};

struct ValidationResult {
    std::vector<CheckRecord> records;
    bool all_pass = true;
};

ValidationResult run_closed_form_validation(const ValidationOptions& opts);

// ---------------------------------------------------------------------------
// OBE optimality suite (the `optimality` subcommand).
// ---------------------------------------------------------------------------

struct OptimalityOptions {
    arma::uword perturbations = 100;
    double perturbation_scale = 0.1; // Frobenius fraction
    arma::uword realizations = 10000;
    std::uint64_t seed = 11;
    unsigned workers = 0;
};

struct OptimalityRecord {
    std::string name;
    arma::uword wins = 0;   // perturbations not exceeding the optimum
    arma::uword trials = 0;
    double detail = 0.0;    // scheme-specific metric (agreement gap, off-diagonal ratio, ...)
    bool pass = true;
};

struct OptimalityResult {
    std::vector<OptimalityRecord> records;
    bool all_pass = true;
};

OptimalityResult run_obe_optimality(const NetworkConfig& config, const OptimalityOptions& opts);

} // namespace cfmimo
