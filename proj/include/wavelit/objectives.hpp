#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "wavelit/tensor.hpp"
#include "wavelit/wavelet.hpp"

// Training losses and evaluation metrics: pixel-space MSE plus an L1 loss on
// the wavelet subbands of prediction and target, relative L2, VRMSE, and the
// radially averaged power spectral density diagnostic.

namespace wavelit {

struct LossWeights {
    double lambda_mse = 1.0;
    double lambda_l1 = 1.0;
};

struct CombinedLossParts {
    Tensor total;
    double mse_value = 0.0;
    double wavelet_value = 0.0;
};

// lambda_mse * mean((pred-target)^2) + lambda_l1 * mean(|dwt(pred)-dwt(target)|).
// The wavelet term reduces by mean so lambda_l1 = 1 stays scale-comparable to
// the MSE across grid sizes; sum_reduction switches to a plain sum.
inline CombinedLossParts combined_loss_parts(const Tensor& pred, const Tensor& target,
                                             const WaveletFilterBank& bank, const LossWeights& w,
                                             int dwt_levels = 1, bool sum_reduction = false) {
    check_same_shape("combined_loss", pred, target);
    CombinedLossParts parts;
    Tensor mse_term = mse(pred, target);
    Tensor ps = dwt2(pred, bank, dwt_levels).packed;
    Tensor ts = dwt2(target, bank, dwt_levels).packed;
    Tensor l1_term = l1(ps, ts);
    if (sum_reduction) l1_term = scale(l1_term, static_cast<double>(ps.size()));
    parts.mse_value = mse_term.item();
    parts.wavelet_value = l1_term.item();
    parts.total = add(scale(mse_term, w.lambda_mse), scale(l1_term, w.lambda_l1));
    return parts;
}

inline Tensor combined_loss(const Tensor& pred, const Tensor& target, const WaveletFilterBank& bank,
                            const LossWeights& w, int dwt_levels = 1, bool sum_reduction = false) {
    return combined_loss_parts(pred, target, bank, w, dwt_levels, sum_reduction).total;
}

// ||pred - target||_2 / ||target||_2 over the flattened fields.
inline double relative_l2(const Tensor& pred, const Tensor& target) {
    check_same_shape("relative_l2", pred, target);
    double num = 0.0, den = 0.0;
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        num += d * d;
        den += target[i] * target[i];
    }
    if (den == 0.0) throw NumericError("relative_l2: undefined for zero-norm target");
    return std::sqrt(num / den);
}

// RMSE / std(target), per channel (last axis) then averaged over channels.
// The std removes the per-channel mean and is taken over all other axes.
inline double vrmse(const Tensor& pred, const Tensor& target) {
    check_same_shape("vrmse", pred, target);
    const std::int64_t c = pred.extent(-1);
    const std::int64_t rows = pred.size() / c;
    double acc = 0.0;
    for (std::int64_t ch = 0; ch < c; ++ch) {
        double se = 0.0, mean_t = 0.0;
        for (std::int64_t r = 0; r < rows; ++r) {
            const double d = pred[r * c + ch] - target[r * c + ch];
            se += d * d;
            mean_t += target[r * c + ch];
        }
        mean_t /= static_cast<double>(rows);
        double var_t = 0.0;
        for (std::int64_t r = 0; r < rows; ++r) {
            const double d = target[r * c + ch] - mean_t;
            var_t += d * d;
        }
        var_t /= static_cast<double>(rows);
        if (var_t == 0.0)
            throw NumericError("vrmse: zero-variance target channel " + std::to_string(ch));
        acc += std::sqrt(se / static_cast<double>(rows)) / std::sqrt(var_t);
    }
    return acc / static_cast<double>(c);
}

// ---------------------------------------------------------------------------
// Radially averaged power spectral density of a square field. Forward DFT is
// unnormalized, so Parseval reads sum |F|^2 = H*W * sum x^2. Frequencies are
// centered (k > H/2 maps to k - H) and binned by floor(sqrt(kx^2 + ky^2)).

struct RapsdResult {
    std::vector<double> mean_power;       // indexed by integer radius
    std::vector<std::int64_t> bin_count;  // samples per radius bin
    double total_power = 0.0;             // sum |F|^2 over all frequencies
};

inline RapsdResult rapsd(const Tensor& field) {
    if (field.shape().size() != 2 || field.extent(0) != field.extent(1))
        throw DimensionError("rapsd: need a square [H,H] field, got " + shape_str(field.shape()));
    const std::int64_t n = field.extent(0);
    using cd = std::complex<double>;
    std::vector<cd> tw(static_cast<std::size_t>(n * n));
    for (std::int64_t k = 0; k < n; ++k)
        for (std::int64_t x = 0; x < n; ++x) {
            const double ang = -2.0 * 3.14159265358979323846 * static_cast<double>(k * x) / static_cast<double>(n);
            tw[static_cast<std::size_t>(k * n + x)] = cd(std::cos(ang), std::sin(ang));
        }
    // rows then columns
    std::vector<cd> rowft(static_cast<std::size_t>(n * n));
    for (std::int64_t y = 0; y < n; ++y)
        for (std::int64_t k = 0; k < n; ++k) {
            cd acc(0.0, 0.0);
            for (std::int64_t x = 0; x < n; ++x) acc += field[y * n + x] * tw[static_cast<std::size_t>(k * n + x)];
            rowft[static_cast<std::size_t>(y * n + k)] = acc;
        }
    const std::int64_t rmax = static_cast<std::int64_t>(std::floor(std::sqrt(2.0) * static_cast<double>(n / 2))) + 1;
    RapsdResult res;
    res.mean_power.assign(static_cast<std::size_t>(rmax + 1), 0.0);
    res.bin_count.assign(static_cast<std::size_t>(rmax + 1), 0);
    for (std::int64_t ky = 0; ky < n; ++ky)
        for (std::int64_t kx = 0; kx < n; ++kx) {
            cd acc(0.0, 0.0);
            for (std::int64_t y = 0; y < n; ++y)
                acc += rowft[static_cast<std::size_t>(y * n + kx)] * tw[static_cast<std::size_t>(ky * n + y)];
            const double p = std::norm(acc);
            const std::int64_t fx = kx <= n / 2 ? kx : kx - n;
            const std::int64_t fy = ky <= n / 2 ? ky : ky - n;
            const auto r = static_cast<std::int64_t>(
                std::floor(std::sqrt(static_cast<double>(fx * fx + fy * fy))));
            res.mean_power[static_cast<std::size_t>(r)] += p;
            res.bin_count[static_cast<std::size_t>(r)] += 1;
            res.total_power += p;
        }
    for (std::size_t i = 0; i < res.mean_power.size(); ++i)
        if (res.bin_count[i] > 0) res.mean_power[i] /= static_cast<double>(res.bin_count[i]);
    return res;
}

}  // namespace wavelit
