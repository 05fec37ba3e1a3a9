// cfmimo -- uplink cell-free massive MIMO spectral-efficiency simulator
// SPDX-License-Identifier: Apache-2.0

#include "cfmimo/channel.hpp"

#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace cfmimo {

namespace {

// Substream path tags for per-sample draws. Geometry uses tags 0/1 in
// scenario.cpp; keep these disjoint.
enum : std::uint64_t { kStreamPhase = 2, kStreamNlos = 3, kStreamPilotNoise = 4 };

} // namespace

arma::cx_vec correlated_gaussian(const arma::cx_mat& r, Substream& stream)
{
    if (r.n_rows != r.n_cols)
        throw std::invalid_argument("correlated_gaussian: covariance must be square");
    arma::vec eigval;
    arma::cx_mat eigvec;
    if (!arma::eig_sym(eigval, eigvec, arma::cx_mat((r + r.t()) * 0.5)))
        throw std::runtime_error("correlated_gaussian: eigendecomposition failed");
    const double floor = -1e-8 * std::max(1.0, eigval.max());
    if (eigval.min() < floor)
        throw std::invalid_argument("correlated_gaussian: covariance is indefinite");
    eigval.transform([](double v) { return v < 0.0 ? 0.0 : std::sqrt(v); });
    const arma::cx_mat factor =
        eigvec * arma::diagmat(arma::cx_vec(eigval, arma::vec(r.n_rows, arma::fill::zeros)));
    return factor * stream.cn_vector(r.n_rows);
}

ChannelSampler::ChannelSampler(const ScenarioStatistics& stats, std::uint64_t seed)
    : stats_(&stats), seed_(seed)
{
}

ChannelSample ChannelSampler::draw(std::uint64_t index) const
{
    const ScenarioStatistics& s = *stats_;
    const arma::uword m_count = s.config.num_aps;
    const arma::uword k_count = s.config.num_ues;
    const arma::uword n = s.config.num_antennas;
    const double tau_p = double(s.config.pilot_len);
    const double sigma2 = s.config.noise_power_w;

    ChannelSample out;
    out.theta.set_size(m_count, k_count);
    out.g.set_size(m_count * n, k_count);
    out.g_hat.set_size(m_count * n, k_count);

    // NLoS fades first; pilot observations combine them across co-pilot UEs.
    arma::cx_mat nlos(m_count * n, k_count);
    for (arma::uword m = 0; m < m_count; ++m) {
        for (arma::uword k = 0; k < k_count; ++k) {
            const PairStatistics& p = s.pair(m, k);
            Substream phase_stream(seed_, {kStreamPhase, index, m * k_count + k});
            out.theta(m, k) =
                s.config.phase_shifts ? phase_stream.uniform(-M_PI, M_PI) : 0.0;
            Substream nlos_stream(seed_, {kStreamNlos, index, m * k_count + k});
            nlos.submat(m * n, k, (m + 1) * n - 1, k) = p.nlos_factor * nlos_stream.cn_vector(n);
            out.g.submat(m * n, k, (m + 1) * n - 1, k) =
                p.g_los * std::polar(1.0, out.theta(m, k)) + nlos.submat(m * n, k, (m + 1) * n - 1, k);
        }
    }

    // Pilot noise is drawn once per (AP, pilot index) and shared by co-pilot UEs.
    arma::cx_mat pilot_noise(m_count * n, s.pilots.pilot_len);
    for (arma::uword m = 0; m < m_count; ++m) {
        for (arma::uword t = 0; t < s.pilots.pilot_len; ++t) {
            Substream noise_stream(seed_, {kStreamPilotNoise, index, m * s.pilots.pilot_len + t});
            pilot_noise.submat(m * n, t, (m + 1) * n - 1, t) =
                std::sqrt(tau_p * sigma2) * noise_stream.cn_vector(n);
        }
    }

    // Phase-aware MMSE estimate: g_hat = g_los e^{j theta} + sqrt(p) R Psi^{-1} (y - y_bar),
    // where y - y_bar = sum_{l in P_k} sqrt(p_l) tau_p nlos_l + pilot noise.
    const double sqrt_p_tau = std::sqrt(s.config.tx_power_w) * tau_p;
    for (arma::uword m = 0; m < m_count; ++m) {
        for (arma::uword k = 0; k < k_count; ++k) {
            const PairStatistics& p = s.pair(m, k);
            arma::cx_vec delta = pilot_noise.submat(m * n, s.pilots.pilot_of_ue(k),
                                                    (m + 1) * n - 1, s.pilots.pilot_of_ue(k));
            for (arma::uword l : s.pilots.copilot[k])
                delta += sqrt_p_tau * nlos.submat(m * n, l, (m + 1) * n - 1, l);
            out.g_hat.submat(m * n, k, (m + 1) * n - 1, k) =
                p.g_los * std::polar(1.0, out.theta(m, k)) + p.est_gain * delta;
        }
    }
    return out;
}

std::vector<ChannelSample> batch_samples(const ScenarioStatistics& stats, std::uint64_t seed,
                                         arma::uword count)
{
    ChannelSampler sampler(stats, seed);
    std::vector<ChannelSample> batch;
    batch.reserve(count);
    for (arma::uword i = 0; i < count; ++i)
        batch.push_back(sampler.draw(i));
    return batch;
}

namespace {

void write_cx_mat_f32(std::FILE* f, const arma::cx_mat& m)
{
    for (arma::uword j = 0; j < m.n_cols; ++j) {
        for (arma::uword i = 0; i < m.n_rows; ++i) {
            const float re = float(m(i, j).real());
            const float im = float(m(i, j).imag());
            std::fwrite(&re, sizeof(float), 1, f);
            std::fwrite(&im, sizeof(float), 1, f);
        }
    }
}

arma::cx_mat read_cx_mat_f32(std::FILE* f, arma::uword rows, arma::uword cols)
{
    arma::cx_mat m(rows, cols);
    for (arma::uword j = 0; j < cols; ++j) {
        for (arma::uword i = 0; i < rows; ++i) {
            float re = 0.0f, im = 0.0f;
            if (std::fread(&re, sizeof(float), 1, f) != 1 || std::fread(&im, sizeof(float), 1, f) != 1)
                throw std::runtime_error("load_batch: truncated file");
            m(i, j) = cx(re, im);
        }
    }
    return m;
}

constexpr char kMagic[4] = {'C', 'F', 'M', 'B'};
constexpr std::uint32_t kVersion = 1;

} // namespace

void dump_batch(const std::string& path, const ScenarioStatistics& stats,
                const std::vector<ChannelSample>& batch)
{
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f)
        throw std::runtime_error("dump_batch: cannot open " + path);
    std::fwrite(kMagic, 1, 4, f);
    const std::uint32_t header[5] = {kVersion, std::uint32_t(stats.config.num_aps),
                                     std::uint32_t(stats.config.num_antennas),
                                     std::uint32_t(stats.config.num_ues), std::uint32_t(batch.size())};
    std::fwrite(header, sizeof(std::uint32_t), 5, f);
    for (const auto& sample : batch) {
        write_cx_mat_f32(f, sample.g);
        write_cx_mat_f32(f, sample.g_hat);
    }
    std::fclose(f);
}

std::vector<ChannelSample> load_batch(const std::string& path, arma::uword expect_m,
                                      arma::uword expect_n, arma::uword expect_k)
{
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f)
        throw std::runtime_error("load_batch: cannot open " + path);
    char magic[4];
    std::uint32_t header[5];
    if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, kMagic, 4) != 0 ||
        std::fread(header, sizeof(std::uint32_t), 5, f) != 5 || header[0] != kVersion) {
        std::fclose(f);
        throw std::runtime_error("load_batch: bad header in " + path);
    }
    if (header[1] != expect_m || header[2] != expect_n || header[3] != expect_k) {
        std::fclose(f);
        throw std::runtime_error("load_batch: dimension mismatch in " + path);
    }
    std::vector<ChannelSample> batch(header[4]);
    const arma::uword rows = arma::uword(header[1]) * header[2];
    try {
        for (auto& sample : batch) {
            sample.g = read_cx_mat_f32(f, rows, header[3]);
            sample.g_hat = read_cx_mat_f32(f, rows, header[3]);
        }
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fclose(f);
    return batch;
}

} // namespace cfmimo
