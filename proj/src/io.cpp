// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#include "cfmimo/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cfmimo {

using nlohmann::json;

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string reports_to_csv(const std::vector<SEReport>& reports)
{
    std::string out = "ue,scheme,bound,method,sinr,se,stderr,samples\n";
    for (const auto& r : reports) {
        for (arma::uword i = 0; i < r.se.n_elem; ++i) {
            out += std::to_string(i) + "," + r.scheme + "," + bound_name(r.bound) + "," +
                   method_name(r.method) + "," + format_double(r.sinr(i)) + "," +
                   format_double(r.se(i)) + "," + format_double(r.se_stderr(i)) + "," +
                   std::to_string(r.samples) + "\n";
        }
    }
    return out;
}

namespace {

PilotPolicy pilot_policy_from(const std::string& s)
{
    if (s == "round_robin")
        return PilotPolicy::round_robin;
    if (s == "greedy")
        return PilotPolicy::greedy;
    throw std::invalid_argument("config: unknown pilot policy '" + s + "'");
}

} // namespace

NetworkConfig config_from_json(const std::string& text)
{
    const json j = json::parse(text);
    NetworkConfig c;
    c.num_aps = j.value("M", c.num_aps);
    c.num_antennas = j.value("N", c.num_antennas);
    c.num_ues = j.value("K", c.num_ues);
    c.pilot_len = j.value("tau_p", c.pilot_len);
    c.coherence_len = j.value("tau_c", c.coherence_len);
    c.area_side_m = j.value("area_side_m", c.area_side_m);
    c.height_diff_m = j.value("height_diff_m", c.height_diff_m);
    c.tx_power_w = j.value("tx_power_w", c.tx_power_w);
    c.noise_power_w = j.value("noise_power_w", c.noise_power_w);
    if (j.contains("angular_std_deg"))
        c.angular_std_rad = j["angular_std_deg"].get<double>() * M_PI / 180.0;
    if (j.contains("rician_range_m")) {
        const auto& v = j["rician_range_m"];
        c.rician_range_m = v.is_string() ? std::numeric_limits<double>::infinity() : v.get<double>();
    }
    c.phase_shifts = j.value("phase_shifts", c.phase_shifts);
    if (j.contains("pilot_policy"))
        c.pilot_policy = pilot_policy_from(j["pilot_policy"].get<std::string>());
    c.pathloss_const_db = j.value("pathloss_const_db", c.pathloss_const_db);
    c.pathloss_exp = j.value("pathloss_exp", c.pathloss_exp);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

std::string config_to_json(const NetworkConfig& c)
{
    json j;
    j["M"] = c.num_aps;
    j["N"] = c.num_antennas;
    j["K"] = c.num_ues;
    j["tau_p"] = c.pilot_len;
    j["tau_c"] = c.coherence_len;
    j["area_side_m"] = c.area_side_m;
    j["height_diff_m"] = c.height_diff_m;
    j["tx_power_w"] = c.tx_power_w;
    j["noise_power_w"] = c.noise_power_w;
    j["angular_std_deg"] = c.angular_std_rad * 180.0 / M_PI;
    if (std::isinf(c.rician_range_m))
        j["rician_range_m"] = "inf";
    else
        j["rician_range_m"] = c.rician_range_m;
    j["phase_shifts"] = c.phase_shifts;
    j["pilot_policy"] = c.pilot_policy == PilotPolicy::greedy ? "greedy" : "round_robin";
    j["pathloss_const_db"] = c.pathloss_const_db;
    j["pathloss_exp"] = c.pathloss_exp;
    j["seed"] = c.seed;
    return j.dump(2);
}

NetworkConfig load_config(const std::string& path)
{
    return config_from_json(read_text_file(path));
}

std::string scenario_to_json(const ScenarioStatistics& stats)
{
    json j;
    j["config"] = json::parse(config_to_json(stats.config));
    json aps = json::array(), ues = json::array();
    for (arma::uword m = 0; m < stats.config.num_aps; ++m)
        aps.push_back({stats.geometry.ap_pos(0, m), stats.geometry.ap_pos(1, m)});
    for (arma::uword k = 0; k < stats.config.num_ues; ++k)
        ues.push_back({stats.geometry.ue_pos(0, k), stats.geometry.ue_pos(1, k)});
    j["ap_pos"] = aps;
    j["ue_pos"] = ues;
    json pilots = json::array();
    for (arma::uword k = 0; k < stats.config.num_ues; ++k)
        pilots.push_back(stats.pilots.pilot_of_ue(k));
    j["pilot_of_ue"] = pilots;
    json pairs = json::array();
    for (arma::uword m = 0; m < stats.config.num_aps; ++m)
        for (arma::uword k = 0; k < stats.config.num_ues; ++k) {
            const PairStatistics& p = stats.pair(m, k);
            pairs.push_back({{"m", m},
                             {"k", k},
                             {"distance_m", p.distance},
                             {"beta", p.beta},
                             {"kappa", p.kappa},
                             {"beta_los", p.beta_los},
                             {"beta_nlos", p.beta_nlos},
                             {"has_los", p.has_los}});
        }
    j["pairs"] = pairs;
    return j.dump(2);
}

std::uint64_t fnv1a64(const std::string& data)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_text_file(const std::string& path, const std::string& content)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open for writing: " + path);
    f << content;
}

std::string read_text_file(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace cfmimo
