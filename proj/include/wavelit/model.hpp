#pragma once

#include <string>
#include <vector>

#include "wavelit/pyramid.hpp"
#include "wavelit/wavelet.hpp"

// Full WaveLiT assembly: wavelet tokenization -> linear embed -> depth
// multiscale mixing blocks -> linear projection back to subband channels ->
// inverse DWT. Token features are flattened in (time, subband-block,
// channel) order, i.e. feature index = (t * 4^l + s) * C + c, matching the
// packed DWT channel layout; this order is frozen for checkpoint and
// lifting-matrix compatibility.

namespace wavelit {

struct WaveLiTConfig {
    std::int64_t embed_dim = 32;  // D
    int depth = 2;                // number of pyramid blocks
    int fpn_levels = 1;           // L
    std::string wavelet = "bior2.2";
    int dwt_levels = 1;           // l
    std::int64_t channels = 1;      // input C
    std::int64_t out_channels = 1;  // predicted C
    std::int64_t history = 2;       // T
    std::int64_t grid_h = 32;
    std::int64_t grid_w = 32;
    int heads = 1;
    MixerAblation mixer;
    bool predict_delta = false;  // experimental: add last input frame to the output

    std::int64_t bands() const { return std::int64_t{1} << (2 * dwt_levels); }
    std::int64_t token_h() const { return grid_h >> dwt_levels; }
    std::int64_t token_w() const { return grid_w >> dwt_levels; }
    std::int64_t token_features() const { return history * bands() * channels; }

    void validate() const {
        if (embed_dim < 1 || depth < 1) throw ConfigError("model: embed_dim and depth must be >= 1");
        if (dwt_levels < 1) throw ConfigError("model: dwt_levels must be >= 1");
        if (fpn_levels < 0) throw ConfigError("model: fpn_levels must be >= 0");
        const std::int64_t div = std::int64_t{1} << (dwt_levels + fpn_levels);
        if (grid_h % div != 0 || grid_w % div != 0)
            throw ConfigError("model: grid " + std::to_string(grid_h) + "x" + std::to_string(grid_w) +
                              " must be divisible by 2^(dwt_levels+fpn_levels)=" + std::to_string(div));
    }
};

// Named desk-scale configurations, sized by the parameter count formula
// (~13*D^2 per block): tiny lands near 30k learnable scalars, the small
// proxy near 1.2M.
inline WaveLiTConfig wavelit_tiny() {
    WaveLiTConfig c;
    c.embed_dim = 32;
    c.depth = 2;
    return c;
}

inline WaveLiTConfig wavelit_small_proxy() {
    WaveLiTConfig c;
    c.embed_dim = 124;
    c.depth = 6;
    return c;
}

inline WaveLiTConfig named_config(const std::string& name) {
    if (name == "wavelit-tiny") return wavelit_tiny();
    if (name == "wavelit-small-proxy") return wavelit_small_proxy();
    throw ConfigError("named_config: unknown model '" + name +
                      "' (supported: wavelit-tiny, wavelit-small-proxy)");
}

namespace detail {

// [B,T,h,w,Cd] -> [B, h*w, T*Cd] keeping (t, subband, channel) feature order.
inline Tensor flatten_tokens(const Tensor& packed) {
    const std::int64_t b = packed.extent(0), t = packed.extent(1), h = packed.extent(2),
                       w = packed.extent(3), cd = packed.extent(4);
    Tensor perm = permute(packed, {0, 2, 3, 1, 4});  // [B,h,w,T,Cd]
    return reshape(perm, {b, h * w, t * cd});
}

inline Tensor last_frame(const Tensor& x) {
    // [B,T,H,W,C] -> [B,1,H,W,C]
    Tensor p = permute(x, {0, 2, 3, 4, 1});
    Tensor s = slice_last(p, x.extent(1) - 1, 1);
    return permute(s, {0, 4, 1, 2, 3});
}

}  // namespace detail

struct WaveLiTModel {
    WaveLiTConfig cfg;
    WaveletFilterBank bank;
    ParamStore store;
    Tensor embed_w, embed_b;
    std::vector<PyramidParams> blocks;
    Tensor out_w, out_b;  // zero-initialized: the model predicts the zero field at init

    static WaveLiTModel create(const WaveLiTConfig& cfg, Rng& rng) {
        cfg.validate();
        WaveLiTModel m;
        m.cfg = cfg;
        m.bank = filter_bank(cfg.wavelet);
        const std::int64_t feat = cfg.token_features();
        const double init_std = 1.0 / std::sqrt(static_cast<double>(feat));
        m.embed_w = m.store.add("embed.w", Tensor::randn({feat, cfg.embed_dim}, rng, init_std));
        m.embed_b = m.store.add("embed.b", Tensor::zeros({cfg.embed_dim}));
        for (int i = 0; i < cfg.depth; ++i)
            m.blocks.push_back(PyramidParams::create(m.store, "block" + std::to_string(i), cfg.embed_dim,
                                                     cfg.heads, cfg.mixer, cfg.fpn_levels, rng));
        const std::int64_t out_feat = cfg.out_channels * cfg.bands();
        m.out_w = m.store.add("out.w", Tensor::zeros({cfg.embed_dim, out_feat}));
        m.out_b = m.store.add("out.b", Tensor::zeros({out_feat}));
        return m;
    }

    static WaveLiTModel create(const WaveLiTConfig& cfg, std::uint64_t seed) {
        Rng rng = Rng::stream(seed, "init");
        return create(cfg, rng);
    }

    void check_input(const Tensor& x) const {
        if (x.shape().size() != 5 || x.extent(1) != cfg.history || x.extent(2) != cfg.grid_h ||
            x.extent(3) != cfg.grid_w || x.extent(4) != cfg.channels)
            throw DimensionError("forward: input " + shape_str(x.shape()) + " does not match config [B," +
                                 std::to_string(cfg.history) + "," + std::to_string(cfg.grid_h) + "," +
                                 std::to_string(cfg.grid_w) + "," + std::to_string(cfg.channels) + "]");
    }

    Tensor tokens(const Tensor& x) const {
        check_input(x);
        auto s = dwt2(x, bank, cfg.dwt_levels);
        return detail::flatten_tokens(s.packed);
    }

    Tensor trunk(const Tensor& tok) const {
        Grid g{cfg.token_h(), cfg.token_w()};
        Tensor h = add_bias(matmul(tok, embed_w), embed_b);
        for (const auto& blk : blocks) h = pyramid_forward(h, g, blk);
        return h;
    }

    Tensor decode(const Tensor& latent, const Tensor& head_w, const Tensor& head_b,
                  std::int64_t out_channels) const {
        const std::int64_t b = latent.extent(0);
        Tensor proj = add_bias(matmul(latent, head_w), head_b);
        SubbandSet s;
        s.levels = cfg.dwt_levels;
        s.base_channels = out_channels;
        s.packed = reshape(proj, {b, 1, cfg.token_h(), cfg.token_w(), out_channels * cfg.bands()});
        return idwt2(s, bank);
    }

    // [B,T,H,W,C] -> [B,1,H,W,C_out], next-step field prediction.
    Tensor forward(const Tensor& x) const {
        Tensor latent = trunk(tokens(x));
        Tensor y = decode(latent, out_w, out_b, cfg.out_channels);
        if (cfg.predict_delta) y = add(y, detail::last_frame(x));
        return y;
    }

    std::int64_t param_count() const { return store.count(); }
};

// ---------------------------------------------------------------------------
// Multi-task variant: one shared trunk across datasets with a per-channel
// lifting matrix (no bias, so absent zero-padded channels contribute exactly
// zero), a per-dataset task embedding added to every token, and per-dataset
// linear output heads.

struct FMDataset {
    std::string name;
    std::vector<std::int64_t> channel_map;  // native channel -> canonical index
    std::int64_t out_channels = 1;
};

struct FMConfig {
    std::int64_t canonical_channels = 1;  // C_total
    std::vector<FMDataset> datasets;

    void validate() const {
        if (datasets.empty()) throw ConfigError("fm: no datasets registered");
        for (const auto& d : datasets) {
            std::vector<bool> seen(static_cast<std::size_t>(canonical_channels), false);
            for (auto idx : d.channel_map) {
                if (idx < 0 || idx >= canonical_channels)
                    throw ConfigError("fm: dataset " + d.name + " canonical index " + std::to_string(idx) +
                                      " out of range");
                if (seen[static_cast<std::size_t>(idx)])
                    throw ConfigError("fm: dataset " + d.name + " repeats canonical index " +
                                      std::to_string(idx));
                seen[static_cast<std::size_t>(idx)] = true;
            }
        }
    }
};

struct WaveLiTFM {
    WaveLiTConfig cfg;  // trunk config; cfg.channels == fm.canonical_channels
    FMConfig fm;
    WaveletFilterBank bank;
    ParamStore store;
    Tensor w_lift;  // [C_total, T*4^l, D], no bias
    std::vector<Tensor> task_embeds;
    std::vector<PyramidParams> blocks;
    std::vector<std::pair<Tensor, Tensor>> heads;  // disjoint per dataset

    static WaveLiTFM create(const WaveLiTConfig& trunk_cfg, const FMConfig& fm_cfg, Rng& rng) {
        WaveLiTConfig cfg = trunk_cfg;
        cfg.channels = fm_cfg.canonical_channels;
        cfg.validate();
        fm_cfg.validate();
        WaveLiTFM m;
        m.cfg = cfg;
        m.fm = fm_cfg;
        m.bank = filter_bank(cfg.wavelet);
        const std::int64_t per_channel = cfg.history * cfg.bands();
        const double init_std = 1.0 / std::sqrt(static_cast<double>(per_channel * cfg.channels));
        m.w_lift = m.store.add("lift.w",
                               Tensor::randn({cfg.channels, per_channel, cfg.embed_dim}, rng, init_std));
        for (std::size_t k = 0; k < fm_cfg.datasets.size(); ++k)
            m.task_embeds.push_back(
                m.store.add("task." + fm_cfg.datasets[k].name, Tensor::zeros({cfg.embed_dim})));
        for (int i = 0; i < cfg.depth; ++i)
            m.blocks.push_back(PyramidParams::create(m.store, "block" + std::to_string(i), cfg.embed_dim,
                                                     cfg.heads, cfg.mixer, cfg.fpn_levels, rng));
        for (const auto& d : fm_cfg.datasets) {
            const std::int64_t out_feat = d.out_channels * cfg.bands();
            m.heads.emplace_back(m.store.add("head." + d.name + ".w", Tensor::zeros({cfg.embed_dim, out_feat})),
                                 m.store.add("head." + d.name + ".b", Tensor::zeros({out_feat})));
        }
        return m;
    }

    const FMDataset& dataset(std::size_t id) const {
        if (id >= fm.datasets.size())
            throw ConfigError("fm: unknown dataset id " + std::to_string(id) + " (have " +
                              std::to_string(fm.datasets.size()) + ")");
        return fm.datasets[id];
    }

    // Scatter a native-channel batch [B,T,H,W,C_native] into the canonical
    // channel space, zero elsewhere. Pure data prep, not differentiated.
    Tensor to_canonical(const Tensor& native, std::size_t id) const {
        const auto& d = dataset(id);
        if (native.extent(-1) != static_cast<std::int64_t>(d.channel_map.size()))
            throw DimensionError("fm: native batch has " + std::to_string(native.extent(-1)) +
                                 " channels, dataset " + d.name + " maps " +
                                 std::to_string(d.channel_map.size()));
        Shape s = native.shape();
        s.back() = cfg.channels;
        Tensor out = Tensor::zeros(s);
        const std::int64_t rows = native.size() / native.extent(-1);
        const std::int64_t cn = native.extent(-1);
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t c = 0; c < cn; ++c)
                out.data()[r * cfg.channels + d.channel_map[static_cast<std::size_t>(c)]] =
                    native[r * cn + c];
        return out;
    }

    // z = sum_c x_c W_lift[c] (+ task embedding on every token). The lifting
    // matmul's zero-skip accumulation makes an all-zero channel contribute
    // bit-exactly nothing.
    Tensor fm_embed(const Tensor& canonical, std::size_t id) const {
        const auto& d = dataset(id);
        (void)d;
        auto s = dwt2(canonical, bank, cfg.dwt_levels);
        Tensor tok = detail::flatten_tokens(s.packed);  // [B,N, M*C] feature = m*C + c
        const std::int64_t m_sz = cfg.history * cfg.bands();
        Tensor w_full = reshape(permute(w_lift, {1, 0, 2}), {m_sz * cfg.channels, cfg.embed_dim});
        Tensor z = matmul(tok, w_full);
        return add_bias(z, task_embeds[id]);
    }

    Tensor trunk(const Tensor& embedded) const {
        Grid g{cfg.token_h(), cfg.token_w()};
        Tensor h = embedded;
        for (const auto& blk : blocks) h = pyramid_forward(h, g, blk);
        return h;
    }

    Tensor fm_head(const Tensor& latent, std::size_t id) const {
        const auto& d = dataset(id);
        const std::int64_t b = latent.extent(0);
        Tensor proj = add_bias(matmul(latent, heads[id].first), heads[id].second);
        SubbandSet s;
        s.levels = cfg.dwt_levels;
        s.base_channels = d.out_channels;
        s.packed = reshape(proj, {b, 1, cfg.token_h(), cfg.token_w(), d.out_channels * cfg.bands()});
        return idwt2(s, bank);
    }

    Tensor forward(const Tensor& canonical, std::size_t id) const {
        return fm_head(trunk(fm_embed(canonical, id)), id);
    }

    std::int64_t param_count() const { return store.count(); }
};

}  // namespace wavelit
