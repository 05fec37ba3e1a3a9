// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfmimo/scenario.hpp"
#include "cfmimo/se_eval.hpp"

namespace cfmimo {

// Deterministic float formatting shared by every CSV writer.
std::string format_double(double v);

// Per-UE report rows: ue,scheme,bound,method,sinr,se,stderr,samples.
std::string reports_to_csv(const std::vector<SEReport>& reports);

NetworkConfig config_from_json(const std::string& text);
std::string config_to_json(const NetworkConfig& config);
NetworkConfig load_config(const std::string& path);

// Geometry + per-pair large-scale quantities, for reproducibility.
std::string scenario_to_json(const ScenarioStatistics& stats);

std::uint64_t fnv1a64(const std::string& data);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

} // namespace cfmimo
