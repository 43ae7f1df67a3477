#pragma once

#include <string>
#include <vector>

#include "wavelit/mixer.hpp"

// Shared-weight multiscale pyramid: one mixer applied at L+1 resolutions
// built by successive 2x average pooling, outputs upsampled back to the base
// grid and combined with learned scalar weights. Per-level RoPE frequencies
// recalibrate automatically because the mixer receives the level's grid.

namespace wavelit {

struct PyramidParams {
    MixerParams mixer;     // single shared parameter set for every level
    Tensor level_weights;  // [L+1]
    int levels = 1;        // L

    static PyramidParams create(ParamStore& store, const std::string& prefix, std::int64_t dim, int heads,
                                const MixerAblation& flags, int levels, Rng& rng) {
        if (levels < 0) throw ConfigError("pyramid: levels must be >= 0");
        PyramidParams p;
        p.levels = levels;
        p.mixer = MixerParams::create(store, prefix + ".mixer", dim, heads, flags, rng);
        p.level_weights =
            store.add(prefix + ".level_weights",
                      Tensor::filled({levels + 1}, 1.0 / static_cast<double>(levels + 1)));
        return p;
    }
};

inline Tensor pyramid_forward(const Tensor& x, const Grid& grid, const PyramidParams& p) {
    const std::int64_t div = std::int64_t{1} << p.levels;
    if (grid.h % div != 0 || grid.w % div != 0)
        throw DimensionError("pyramid_forward: grid " + std::to_string(grid.h) + "x" + std::to_string(grid.w) +
                             " must be divisible by 2^" + std::to_string(p.levels));
    Tensor level_input = x;
    Tensor acc;
    for (int l = 0; l <= p.levels; ++l) {
        const Grid g{grid.h >> l, grid.w >> l};
        Tensor y = mixer_block(level_input, p.mixer, g);
        Tensor up = detail::tokens_to_grid(y, g);
        for (int u = 0; u < l; ++u) up = upsample_nearest2(up);
        Tensor term = mul_scalar(detail::grid_to_tokens(up), slice_last(p.level_weights, l, 1));
        acc = (l == 0) ? term : add(acc, term);
        if (l < p.levels) level_input = detail::grid_to_tokens(avg_pool2(detail::tokens_to_grid(level_input, g)));
    }
    return acc;
}

}  // namespace wavelit
