#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wavelit/errors.hpp"
#include "wavelit/rng.hpp"

// Multi-dataset batch sampling: uniform, temperature-scaled proportional and
// sqrt(N)-proportional weighting over per-dataset token counts, with KL and
// oversampling diagnostics.

namespace wavelit {

struct DatasetStats {
    std::string name;
    std::int64_t n_trajectories = 0;  // n_i
    std::int64_t tokens_per_example = 0;  // tau_i

    std::int64_t total_tokens() const { return n_trajectories * tokens_per_example; }  // N_i
};

struct CorpusStats {
    std::vector<DatasetStats> datasets;
};

// Post-wavelet token count for an H x W grid at the given decomposition level.
inline std::int64_t tokens_for_grid(std::int64_t h, std::int64_t w, int dwt_levels) {
    return (h >> dwt_levels) * (w >> dwt_levels);
}

// The eight-dataset corpus used as the reference fixture in tests and the
// sampling-report CLI.
inline CorpusStats reference_corpus() {
    CorpusStats c;
    c.datasets = {
        {"active_matter", 14000, tokens_for_grid(256, 256, 1)},
        {"gray_scott_reaction_diffusion", 960000, tokens_for_grid(128, 128, 1)},
        {"rayleigh_benard", 278600, tokens_for_grid(512, 128, 1)},
        {"shear_flow", 178304, tokens_for_grid(256, 512, 1)},
        {"turbulent_radiative_layer_2D", 7200, tokens_for_grid(128, 384, 1)},
        {"viscoelastic_instability", 6487, tokens_for_grid(512, 512, 1)},
        {"acoustic_scattering_maze", 321600, tokens_for_grid(256, 256, 1)},
        {"helmholtz_staircase", 20384, tokens_for_grid(1024, 256, 1)},
    };
    return c;
}

// p_i = N_i / sum_j N_j
inline std::vector<double> proportional_share(const CorpusStats& stats) {
    if (stats.datasets.empty()) throw ConfigError("sampling: empty corpus");
    double total = 0.0;
    for (const auto& d : stats.datasets) {
        if (d.n_trajectories <= 0 || d.tokens_per_example <= 0)
            throw ConfigError("sampling: dataset '" + d.name + "' has non-positive counts");
        total += static_cast<double>(d.total_tokens());
    }
    if (total <= 0.0) throw ConfigError("sampling: zero total token count");
    std::vector<double> p;
    p.reserve(stats.datasets.size());
    for (const auto& d : stats.datasets) p.push_back(static_cast<double>(d.total_tokens()) / total);
    return p;
}

struct SamplingWeights {
    std::string scheme;  // uniform | temperature | sqrt
    double temperature = 0.0;
    std::vector<double> w;
};

// Schemes: uniform w_i = 1/K; temperature w_i proportional to exp(p_i / T)
// (computed with the max subtracted, so small T degenerates smoothly toward
// the argmax of p — exact ties stay equally weighted); sqrt w_i proportional
// to sqrt(N_i).
inline SamplingWeights sampling_weights(const std::string& scheme, const CorpusStats& stats,
                                        double temperature = 0.0) {
    const auto p = proportional_share(stats);
    SamplingWeights out;
    out.scheme = scheme;
    const std::size_t k = p.size();
    if (scheme == "uniform") {
        out.w.assign(k, 1.0 / static_cast<double>(k));
        return out;
    }
    if (scheme == "temperature") {
        if (temperature <= 0.0)
            throw ConfigError("sampling: temperature scheme requires T > 0, got " +
                              std::to_string(temperature));
        out.temperature = temperature;
        double pmax = p[0];
        for (double v : p) pmax = std::max(pmax, v);
        double z = 0.0;
        out.w.resize(k);
        for (std::size_t i = 0; i < k; ++i) {
            out.w[i] = std::exp((p[i] - pmax) / temperature);
            z += out.w[i];
        }
        for (auto& v : out.w) v /= z;
        return out;
    }
    if (scheme == "sqrt") {
        double z = 0.0;
        out.w.resize(k);
        for (std::size_t i = 0; i < k; ++i) {
            out.w[i] = std::sqrt(static_cast<double>(stats.datasets[i].total_tokens()));
            z += out.w[i];
        }
        for (auto& v : out.w) v /= z;
        return out;
    }
    throw ConfigError("sampling: unknown scheme '" + scheme + "' (supported: uniform, temperature, sqrt)");
}

// D_KL(w || p) in nats.
inline double kl_to_proportional(const std::vector<double>& w, const std::vector<double>& p) {
    if (w.size() != p.size()) throw DimensionError("kl_to_proportional: size mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
        if (w[i] > 0.0) kl += w[i] * std::log(w[i] / p[i]);
    return kl;
}

inline std::vector<double> oversampling_ratio(const std::vector<double>& w, const std::vector<double>& p) {
    if (w.size() != p.size()) throw DimensionError("oversampling_ratio: size mismatch");
    std::vector<double> r(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) r[i] = w[i] / p[i];
    return r;
}

// Categorical draw over the weights.
inline std::size_t next_dataset(const SamplingWeights& weights, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.w.size(); ++i) {
        acc += weights.w[i];
        if (u < acc) return i;
    }
    return weights.w.size() - 1;
}

// ---------------------------------------------------------------------------
// Corpus stats file: one record per line,
//   name n_trajectories height width dwt_levels
// '#' starts a comment. tau_i and N_i are derived.

inline CorpusStats read_corpus_stats(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("corpus stats: cannot open " + path);
    CorpusStats stats;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string name;
        if (!(ls >> name)) continue;  // blank line
        std::int64_t n = 0, h = 0, w = 0;
        int levels = 0;
        if (!(ls >> n >> h >> w >> levels))
            throw ConfigError("corpus stats: malformed record at line " + std::to_string(lineno) + " in " +
                              path);
        std::string extra;
        if (ls >> extra)
            throw ConfigError("corpus stats: trailing fields at line " + std::to_string(lineno) + " in " +
                              path);
        if (n <= 0 || h <= 0 || w <= 0 || levels < 0 || (h >> levels) == 0 || (w >> levels) == 0)
            throw ConfigError("corpus stats: invalid values at line " + std::to_string(lineno) + " in " +
                              path);
        stats.datasets.push_back({name, n, tokens_for_grid(h, w, levels)});
    }
    if (stats.datasets.empty()) throw ConfigError("corpus stats: no records in " + path);
    return stats;
}

// Diagnostics table: per-dataset probabilities under every scheme plus the KL
// footer and oversampling ratios, as CSV.
inline std::string sampling_report_csv(const CorpusStats& stats, double temperature = 0.2) {
    const auto p = proportional_share(stats);
    const auto uni = sampling_weights("uniform", stats);
    const auto tmp = sampling_weights("temperature", stats, temperature);
    const auto sq = sampling_weights("sqrt", stats);
    std::ostringstream os;
    os << "dataset,prop_pure,uniform,prop_temp,sqrt_n\n";
    char buf[256];
    for (std::size_t i = 0; i < stats.datasets.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.4f,%.4f\n", stats.datasets[i].name.c_str(), p[i],
                      uni.w[i], tmp.w[i], sq.w[i]);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "kl_nats,0.000,%.3f,%.3f,%.3f\n", kl_to_proportional(uni.w, p),
                  kl_to_proportional(tmp.w, p), kl_to_proportional(sq.w, p));
    os << buf;
    const auto r_uni = oversampling_ratio(uni.w, p);
    const auto r_tmp = oversampling_ratio(tmp.w, p);
    const auto r_sq = oversampling_ratio(sq.w, p);
    for (std::size_t i = 0; i < stats.datasets.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "oversampling_%s,1.0,%.1f,%.1f,%.1f\n",
                      stats.datasets[i].name.c_str(), r_uni[i], r_tmp[i], r_sq[i]);
        os << buf;
    }
    return os.str();
}

}  // namespace wavelit
