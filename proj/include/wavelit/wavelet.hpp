#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "wavelit/tensor.hpp"

// Single- and multi-level 2D discrete wavelet transform with exact inverse.
//
// Conventions (fixed by the round-trip tests, documented here because the
// model's lifting matrix indexes the output):
//   - Boundary extension is reflect (whole-sample symmetric, no edge
//     repetition, as in numpy/jax 'reflect'). haar never reads the
//     extension at all because its even-phase windows tile the signal.
//   - Analysis samples the lowpass at even phase and the highpass at odd
//     phase; each subband then mirrors onto itself at the boundaries, which
//     is what makes the half-length representation invertible.
//   - One 2D level maps [..., H, W, C] -> [..., H/2, W/2, 4C] with channel
//     blocks ordered (LL, LH, HL, HH), original channels fastest within a
//     block. The first letter is the H-axis filter, the second the W-axis.
//   - Multi-level transforms re-apply the 2D level to the whole channel
//     stack, so level l yields C*4^l channels at (H/2^l, W/2^l). This is the
//     uniform tokenization layout, not an approximation-only pyramid.

namespace wavelit {

struct WaveletFilter {
    std::vector<double> taps;
    int center = 0;  // index of the m = 0 tap
};

struct WaveletFilterBank {
    std::string name;
    WaveletFilter dec_lo, dec_hi, rec_lo, rec_hi;
    int phase_lo = 0;  // analysis sampling phase per band
    int phase_hi = 1;
};

inline WaveletFilterBank filter_bank(const std::string& name) {
    const double s2 = std::sqrt(2.0);
    if (name == "haar") {
        const double s = 1.0 / s2;
        WaveletFilterBank b;
        b.name = name;
        b.dec_lo = {{s, s}, 0};
        b.dec_hi = {{s, -s}, 0};
        b.rec_lo = {{s, s}, 0};
        b.rec_hi = {{s, -s}, 0};
        b.phase_lo = 0;
        b.phase_hi = 0;
        return b;
    }
    if (name == "bior2.2") {
        const double q = 0.5 / s2;  // 1/(2*sqrt2); highpass is [-q, 2q, -q] so constants cancel exactly
        const double h = 2.0 * q;
        WaveletFilterBank b;
        b.name = name;
        b.dec_lo = {{0.0, -s2 / 8.0, s2 / 4.0, 3.0 * s2 / 4.0, s2 / 4.0, -s2 / 8.0}, 3};
        b.dec_hi = {{0.0, -q, h, -q, 0.0, 0.0}, 2};
        b.rec_lo = {{0.0, q, h, q, 0.0, 0.0}, 2};
        b.rec_hi = {{0.0, -s2 / 8.0, -s2 / 4.0, 3.0 * s2 / 4.0, -s2 / 4.0, -s2 / 8.0}, 3};
        return b;
    }
    if (name == "bior4.4") {
        // CDF 9/7 pair, sqrt2-normalized.
        const double a97[9] = {0.026748757410810,  -0.016864118442875, -0.078223266528990,
                               0.266864118442875,  0.602949018236360,  0.266864118442875,
                               -0.078223266528990, -0.016864118442875, 0.026748757410810};
        const double s97[7] = {-0.045635881557125, -0.028771763114250, 0.295635881557125,
                               0.557543526228500,  0.295635881557125,  -0.028771763114250,
                               -0.045635881557125};
        WaveletFilterBank b;
        b.name = name;
        b.dec_lo.taps.assign(10, 0.0);
        b.dec_lo.center = 5;
        for (int i = 0; i < 9; ++i) b.dec_lo.taps[static_cast<std::size_t>(i + 1)] = a97[i] * s2;
        b.rec_hi.taps.assign(10, 0.0);
        b.rec_hi.center = 5;
        for (int i = 0; i < 9; ++i) {
            const int m = i - 4;
            b.rec_hi.taps[static_cast<std::size_t>(i + 1)] = ((m % 2 == 0) ? 1.0 : -1.0) * a97[i] * s2;
        }
        b.rec_lo.taps.assign(10, 0.0);
        b.rec_lo.center = 5;
        for (int i = 0; i < 7; ++i) b.rec_lo.taps[static_cast<std::size_t>(i + 2)] = s97[i] * s2;
        b.dec_hi.taps.assign(10, 0.0);
        b.dec_hi.center = 5;
        for (int i = 0; i < 7; ++i) {
            const int m = i - 3;
            b.dec_hi.taps[static_cast<std::size_t>(i + 2)] = ((m % 2 == 0) ? 1.0 : -1.0) * s97[i] * s2;
        }
        return b;
    }
    throw ConfigError("filter_bank: unknown wavelet '" + name + "' (supported: haar, bior2.2, bior4.4)");
}

namespace detail {

// Whole-sample reflect onto [0, n).
inline std::int64_t fold_reflect(std::int64_t i, std::int64_t n) {
    const std::int64_t p = 2 * n - 2;
    if (p <= 0) return 0;
    i %= p;
    if (i < 0) i += p;
    return i < n ? i : p - i;
}

// Subband self-mirroring index maps induced by the reflect extension and the
// even/odd sampling phases.
inline std::int64_t fold_lo(std::int64_t k, std::int64_t nh) {
    while (k < 0 || k >= nh) {
        if (k < 0)
            k = -k;
        else
            k = 2 * nh - 1 - k;
    }
    return k;
}

inline std::int64_t fold_hi(std::int64_t k, std::int64_t nh) {
    while (k < 0 || k >= nh) {
        if (k < 0)
            k = -1 - k;
        else
            k = 2 * nh - 2 - k;
    }
    return k;
}

// out[k] = sum_m h[m] x[fold(2k + phase + m)]
inline void dwt_axis(const double* x, std::int64_t n, const WaveletFilter& f, int phase, double* out) {
    const std::int64_t nh = n / 2;
    const int len = static_cast<int>(f.taps.size());
    for (std::int64_t k = 0; k < nh; ++k) {
        double acc = 0.0;
        for (int i = 0; i < len; ++i) {
            const double c = f.taps[static_cast<std::size_t>(i)];
            if (c == 0.0) continue;
            acc += c * x[fold_reflect(2 * k + phase + (i - f.center), n)];
        }
        out[k] = acc;
    }
}

// Adjoint of dwt_axis: scatter g_out back into g_x.
inline void dwt_axis_adj(const double* g_out, std::int64_t n, const WaveletFilter& f, int phase, double* g_x) {
    const std::int64_t nh = n / 2;
    const int len = static_cast<int>(f.taps.size());
    for (std::int64_t k = 0; k < nh; ++k) {
        const double gv = g_out[k];
        if (gv == 0.0) continue;
        for (int i = 0; i < len; ++i) {
            const double c = f.taps[static_cast<std::size_t>(i)];
            if (c == 0.0) continue;
            g_x[fold_reflect(2 * k + phase + (i - f.center), n)] += c * gv;
        }
    }
}

// x[n] = sum_m g0[m] lo[fold_lo((n - phase_lo - m)/2)] + same for hi.
inline void idwt_axis(const double* lo, const double* hi, std::int64_t n, const WaveletFilterBank& b,
                      double* out) {
    const std::int64_t nh = n / 2;
    const auto& g0 = b.rec_lo;
    const auto& g1 = b.rec_hi;
    for (std::int64_t pos = 0; pos < n; ++pos) {
        double acc = 0.0;
        for (int i = 0; i < static_cast<int>(g0.taps.size()); ++i) {
            const double c = g0.taps[static_cast<std::size_t>(i)];
            if (c == 0.0) continue;
            const std::int64_t t = pos - b.phase_lo - (i - g0.center);
            if ((t & 1) == 0) acc += c * lo[fold_lo(t / 2, nh)];
        }
        for (int i = 0; i < static_cast<int>(g1.taps.size()); ++i) {
            const double c = g1.taps[static_cast<std::size_t>(i)];
            if (c == 0.0) continue;
            const std::int64_t t = pos - b.phase_hi - (i - g1.center);
            if ((t & 1) == 0) acc += c * hi[fold_hi(t / 2, nh)];
        }
        out[pos] = acc;
    }
}

inline void idwt_axis_adj(const double* g_out, std::int64_t n, const WaveletFilterBank& b, double* g_lo,
                          double* g_hi) {
    const std::int64_t nh = n / 2;
    const auto& g0 = b.rec_lo;
    const auto& g1 = b.rec_hi;
    for (std::int64_t pos = 0; pos < n; ++pos) {
        const double gv = g_out[pos];
        if (gv == 0.0) continue;
        for (int i = 0; i < static_cast<int>(g0.taps.size()); ++i) {
            const double c = g0.taps[static_cast<std::size_t>(i)];
            if (c == 0.0) continue;
            const std::int64_t t = pos - b.phase_lo - (i - g0.center);
            if ((t & 1) == 0) g_lo[fold_lo(t / 2, nh)] += c * gv;
        }
        for (int i = 0; i < static_cast<int>(g1.taps.size()); ++i) {
            const double c = g1.taps[static_cast<std::size_t>(i)];
            if (c == 0.0) continue;
            const std::int64_t t = pos - b.phase_hi - (i - g1.center);
            if ((t & 1) == 0) g_hi[fold_hi(t / 2, nh)] += c * gv;
        }
    }
}

// One 2D level on raw arrays: [p, h, w, c] -> [p, h/2, w/2, 4c],
// blocks (LL, LH, HL, HH), W axis transformed first.
inline void dwt2_level_forward(const double* x, std::int64_t p, std::int64_t h, std::int64_t w,
                               std::int64_t c, const WaveletFilterBank& b, double* out) {
    const std::int64_t hh = h / 2, wh = w / 2;
    std::vector<double> row(static_cast<std::size_t>(w)), lo_row(static_cast<std::size_t>(wh)),
        hi_row(static_cast<std::size_t>(wh));
    std::vector<double> tmp_lo(static_cast<std::size_t>(h * wh)), tmp_hi(static_cast<std::size_t>(h * wh));
    std::vector<double> col(static_cast<std::size_t>(h)), lo_col(static_cast<std::size_t>(hh)),
        hi_col(static_cast<std::size_t>(hh));
    const std::int64_t oc = 4 * c;
    for (std::int64_t pi = 0; pi < p; ++pi) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const double* xin = x + pi * h * w * c + ch;
            for (std::int64_t i = 0; i < h; ++i) {
                for (std::int64_t j = 0; j < w; ++j) row[static_cast<std::size_t>(j)] = xin[(i * w + j) * c];
                dwt_axis(row.data(), w, b.dec_lo, b.phase_lo, lo_row.data());
                dwt_axis(row.data(), w, b.dec_hi, b.phase_hi, hi_row.data());
                for (std::int64_t j = 0; j < wh; ++j) {
                    tmp_lo[static_cast<std::size_t>(i * wh + j)] = lo_row[static_cast<std::size_t>(j)];
                    tmp_hi[static_cast<std::size_t>(i * wh + j)] = hi_row[static_cast<std::size_t>(j)];
                }
            }
            double* o = out + pi * hh * wh * oc;
            for (std::int64_t j = 0; j < wh; ++j) {
                // columns of tmp_lo -> LL / HL; tmp_hi -> LH / HH
                for (std::int64_t i = 0; i < h; ++i) col[static_cast<std::size_t>(i)] = tmp_lo[static_cast<std::size_t>(i * wh + j)];
                dwt_axis(col.data(), h, b.dec_lo, b.phase_lo, lo_col.data());
                dwt_axis(col.data(), h, b.dec_hi, b.phase_hi, hi_col.data());
                for (std::int64_t i = 0; i < hh; ++i) {
                    o[(i * wh + j) * oc + 0 * c + ch] = lo_col[static_cast<std::size_t>(i)];
                    o[(i * wh + j) * oc + 2 * c + ch] = hi_col[static_cast<std::size_t>(i)];
                }
                for (std::int64_t i = 0; i < h; ++i) col[static_cast<std::size_t>(i)] = tmp_hi[static_cast<std::size_t>(i * wh + j)];
                dwt_axis(col.data(), h, b.dec_lo, b.phase_lo, lo_col.data());
                dwt_axis(col.data(), h, b.dec_hi, b.phase_hi, hi_col.data());
                for (std::int64_t i = 0; i < hh; ++i) {
                    o[(i * wh + j) * oc + 1 * c + ch] = lo_col[static_cast<std::size_t>(i)];
                    o[(i * wh + j) * oc + 3 * c + ch] = hi_col[static_cast<std::size_t>(i)];
                }
            }
        }
    }
}

inline void dwt2_level_adjoint(const double* g_out, std::int64_t p, std::int64_t h, std::int64_t w,
                               std::int64_t c, const WaveletFilterBank& b, double* g_x) {
    const std::int64_t hh = h / 2, wh = w / 2;
    const std::int64_t oc = 4 * c;
    std::vector<double> g_tmp_lo(static_cast<std::size_t>(h * wh)), g_tmp_hi(static_cast<std::size_t>(h * wh));
    std::vector<double> lo_col(static_cast<std::size_t>(hh)), hi_col(static_cast<std::size_t>(hh)),
        col(static_cast<std::size_t>(h));
    std::vector<double> lo_row(static_cast<std::size_t>(wh)), hi_row(static_cast<std::size_t>(wh)),
        row(static_cast<std::size_t>(w));
    for (std::int64_t pi = 0; pi < p; ++pi) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            std::fill(g_tmp_lo.begin(), g_tmp_lo.end(), 0.0);
            std::fill(g_tmp_hi.begin(), g_tmp_hi.end(), 0.0);
            const double* go = g_out + pi * hh * wh * oc;
            for (std::int64_t j = 0; j < wh; ++j) {
                for (std::int64_t i = 0; i < hh; ++i) {
                    lo_col[static_cast<std::size_t>(i)] = go[(i * wh + j) * oc + 0 * c + ch];
                    hi_col[static_cast<std::size_t>(i)] = go[(i * wh + j) * oc + 2 * c + ch];
                }
                std::fill(col.begin(), col.end(), 0.0);
                dwt_axis_adj(lo_col.data(), h, b.dec_lo, b.phase_lo, col.data());
                dwt_axis_adj(hi_col.data(), h, b.dec_hi, b.phase_hi, col.data());
                for (std::int64_t i = 0; i < h; ++i) g_tmp_lo[static_cast<std::size_t>(i * wh + j)] += col[static_cast<std::size_t>(i)];
                for (std::int64_t i = 0; i < hh; ++i) {
                    lo_col[static_cast<std::size_t>(i)] = go[(i * wh + j) * oc + 1 * c + ch];
                    hi_col[static_cast<std::size_t>(i)] = go[(i * wh + j) * oc + 3 * c + ch];
                }
                std::fill(col.begin(), col.end(), 0.0);
                dwt_axis_adj(lo_col.data(), h, b.dec_lo, b.phase_lo, col.data());
                dwt_axis_adj(hi_col.data(), h, b.dec_hi, b.phase_hi, col.data());
                for (std::int64_t i = 0; i < h; ++i) g_tmp_hi[static_cast<std::size_t>(i * wh + j)] += col[static_cast<std::size_t>(i)];
            }
            double* gx = g_x + pi * h * w * c + ch;
            for (std::int64_t i = 0; i < h; ++i) {
                for (std::int64_t j = 0; j < wh; ++j) {
                    lo_row[static_cast<std::size_t>(j)] = g_tmp_lo[static_cast<std::size_t>(i * wh + j)];
                    hi_row[static_cast<std::size_t>(j)] = g_tmp_hi[static_cast<std::size_t>(i * wh + j)];
                }
                std::fill(row.begin(), row.end(), 0.0);
                dwt_axis_adj(lo_row.data(), w, b.dec_lo, b.phase_lo, row.data());
                dwt_axis_adj(hi_row.data(), w, b.dec_hi, b.phase_hi, row.data());
                for (std::int64_t j = 0; j < w; ++j) gx[(i * w + j) * c] += row[static_cast<std::size_t>(j)];
            }
        }
    }
}

inline void idwt2_level_forward(const double* s, std::int64_t p, std::int64_t hh, std::int64_t wh,
                                std::int64_t c, const WaveletFilterBank& b, double* out) {
    const std::int64_t h = 2 * hh, w = 2 * wh;
    const std::int64_t oc = 4 * c;
    std::vector<double> lo_col(static_cast<std::size_t>(hh)), hi_col(static_cast<std::size_t>(hh)),
        col(static_cast<std::size_t>(h));
    std::vector<double> tmp_lo(static_cast<std::size_t>(h * wh)), tmp_hi(static_cast<std::size_t>(h * wh));
    std::vector<double> lo_row(static_cast<std::size_t>(wh)), hi_row(static_cast<std::size_t>(wh)),
        row(static_cast<std::size_t>(w));
    for (std::int64_t pi = 0; pi < p; ++pi) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const double* si = s + pi * hh * wh * oc;
            for (std::int64_t j = 0; j < wh; ++j) {
                for (std::int64_t i = 0; i < hh; ++i) {
                    lo_col[static_cast<std::size_t>(i)] = si[(i * wh + j) * oc + 0 * c + ch];
                    hi_col[static_cast<std::size_t>(i)] = si[(i * wh + j) * oc + 2 * c + ch];
                }
                idwt_axis(lo_col.data(), hi_col.data(), h, b, col.data());
                for (std::int64_t i = 0; i < h; ++i) tmp_lo[static_cast<std::size_t>(i * wh + j)] = col[static_cast<std::size_t>(i)];
                for (std::int64_t i = 0; i < hh; ++i) {
                    lo_col[static_cast<std::size_t>(i)] = si[(i * wh + j) * oc + 1 * c + ch];
                    hi_col[static_cast<std::size_t>(i)] = si[(i * wh + j) * oc + 3 * c + ch];
                }
                idwt_axis(lo_col.data(), hi_col.data(), h, b, col.data());
                for (std::int64_t i = 0; i < h; ++i) tmp_hi[static_cast<std::size_t>(i * wh + j)] = col[static_cast<std::size_t>(i)];
            }
            double* o = out + pi * h * w * c + ch;
            for (std::int64_t i = 0; i < h; ++i) {
                for (std::int64_t j = 0; j < wh; ++j) {
                    lo_row[static_cast<std::size_t>(j)] = tmp_lo[static_cast<std::size_t>(i * wh + j)];
                    hi_row[static_cast<std::size_t>(j)] = tmp_hi[static_cast<std::size_t>(i * wh + j)];
                }
                idwt_axis(lo_row.data(), hi_row.data(), w, b, row.data());
                for (std::int64_t j = 0; j < w; ++j) o[(i * w + j) * c] = row[static_cast<std::size_t>(j)];
            }
        }
    }
}

inline void idwt2_level_adjoint(const double* g_out, std::int64_t p, std::int64_t hh, std::int64_t wh,
                                std::int64_t c, const WaveletFilterBank& b, double* g_s) {
    const std::int64_t h = 2 * hh, w = 2 * wh;
    const std::int64_t oc = 4 * c;
    std::vector<double> row(static_cast<std::size_t>(w)), lo_row(static_cast<std::size_t>(wh)),
        hi_row(static_cast<std::size_t>(wh));
    std::vector<double> g_tmp_lo(static_cast<std::size_t>(h * wh)), g_tmp_hi(static_cast<std::size_t>(h * wh));
    std::vector<double> col(static_cast<std::size_t>(h)), lo_col(static_cast<std::size_t>(hh)),
        hi_col(static_cast<std::size_t>(hh));
    for (std::int64_t pi = 0; pi < p; ++pi) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            std::fill(g_tmp_lo.begin(), g_tmp_lo.end(), 0.0);
            std::fill(g_tmp_hi.begin(), g_tmp_hi.end(), 0.0);
            const double* go = g_out + pi * h * w * c + ch;
            for (std::int64_t i = 0; i < h; ++i) {
                for (std::int64_t j = 0; j < w; ++j) row[static_cast<std::size_t>(j)] = go[(i * w + j) * c];
                std::fill(lo_row.begin(), lo_row.end(), 0.0);
                std::fill(hi_row.begin(), hi_row.end(), 0.0);
                idwt_axis_adj(row.data(), w, b, lo_row.data(), hi_row.data());
                for (std::int64_t j = 0; j < wh; ++j) {
                    g_tmp_lo[static_cast<std::size_t>(i * wh + j)] += lo_row[static_cast<std::size_t>(j)];
                    g_tmp_hi[static_cast<std::size_t>(i * wh + j)] += hi_row[static_cast<std::size_t>(j)];
                }
            }
            double* gs = g_s + pi * hh * wh * oc;
            for (std::int64_t j = 0; j < wh; ++j) {
                for (std::int64_t i = 0; i < h; ++i) col[static_cast<std::size_t>(i)] = g_tmp_lo[static_cast<std::size_t>(i * wh + j)];
                std::fill(lo_col.begin(), lo_col.end(), 0.0);
                std::fill(hi_col.begin(), hi_col.end(), 0.0);
                idwt_axis_adj(col.data(), h, b, lo_col.data(), hi_col.data());
                for (std::int64_t i = 0; i < hh; ++i) {
                    gs[(i * wh + j) * oc + 0 * c + ch] += lo_col[static_cast<std::size_t>(i)];
                    gs[(i * wh + j) * oc + 2 * c + ch] += hi_col[static_cast<std::size_t>(i)];
                }
                for (std::int64_t i = 0; i < h; ++i) col[static_cast<std::size_t>(i)] = g_tmp_hi[static_cast<std::size_t>(i * wh + j)];
                std::fill(lo_col.begin(), lo_col.end(), 0.0);
                std::fill(hi_col.begin(), hi_col.end(), 0.0);
                idwt_axis_adj(col.data(), h, b, lo_col.data(), hi_col.data());
                for (std::int64_t i = 0; i < hh; ++i) {
                    gs[(i * wh + j) * oc + 1 * c + ch] += lo_col[static_cast<std::size_t>(i)];
                    gs[(i * wh + j) * oc + 3 * c + ch] += hi_col[static_cast<std::size_t>(i)];
                }
            }
        }
    }
}

}  // namespace detail

// One 2D analysis level as a differentiable op.
inline Tensor dwt2_level(const Tensor& x, const WaveletFilterBank& bank) {
    auto [p, h, w, c] = detail::field_dims("dwt2", x);
    if (h % 2 != 0) throw DimensionError("dwt2: H=" + std::to_string(h) + " not divisible by 2");
    if (w % 2 != 0) throw DimensionError("dwt2: W=" + std::to_string(w) + " not divisible by 2");
    Shape out_shape = x.shape();
    out_shape[out_shape.size() - 3] = h / 2;
    out_shape[out_shape.size() - 2] = w / 2;
    out_shape[out_shape.size() - 1] = 4 * c;
    Tensor out = Tensor::uninit(out_shape);
    detail::dwt2_level_forward(x.data(), p, h, w, c, bank, out.data());
    if (detail::track({&x})) {
        auto xn = x.node(), on = out.node();
        auto bk = std::make_shared<WaveletFilterBank>(bank);
        detail::mark_and_record(out, [xn, on, bk, p = p, h = h, w = w, c = c] {
            if (on->grad.empty() || !xn->needs_grad()) return;
            detail::dwt2_level_adjoint(on->grad.data(), p, h, w, c, *bk, xn->grad_buffer().data());
        });
    }
    return out;
}

inline Tensor idwt2_level(const Tensor& s, const WaveletFilterBank& bank) {
    auto [p, hh, wh, oc] = detail::field_dims("idwt2", s);
    if (oc % 4 != 0) throw DimensionError("idwt2: channel count " + std::to_string(oc) + " not divisible by 4");
    const std::int64_t c = oc / 4;
    Shape out_shape = s.shape();
    out_shape[out_shape.size() - 3] = 2 * hh;
    out_shape[out_shape.size() - 2] = 2 * wh;
    out_shape[out_shape.size() - 1] = c;
    Tensor out = Tensor::uninit(out_shape);
    detail::idwt2_level_forward(s.data(), p, hh, wh, c, bank, out.data());
    if (detail::track({&s})) {
        auto sn = s.node(), on = out.node();
        auto bk = std::make_shared<WaveletFilterBank>(bank);
        detail::mark_and_record(out, [sn, on, bk, p = p, hh = hh, wh = wh, c = c] {
            if (on->grad.empty() || !sn->needs_grad()) return;
            detail::idwt2_level_adjoint(on->grad.data(), p, hh, wh, c, *bk, sn->grad_buffer().data());
        });
    }
    return out;
}

// Multi-level subband stack. `packed` has channels C*4^levels in blocks of
// the recursion described above; ll()/lh()/hl()/hh() slice the four
// top-level blocks.
struct SubbandSet {
    Tensor packed;
    int levels = 1;
    std::int64_t base_channels = 1;

    Tensor ll() const { return block(0); }
    Tensor lh() const { return block(1); }
    Tensor hl() const { return block(2); }
    Tensor hh() const { return block(3); }

    Tensor block(int s) const {
        const std::int64_t q = packed.extent(-1) / 4;
        return slice_last(packed, s * q, q);
    }
};

inline SubbandSet dwt2(const Tensor& x, const WaveletFilterBank& bank, int levels = 1) {
    if (levels < 1) throw ConfigError("dwt2: levels must be >= 1, got " + std::to_string(levels));
    const std::int64_t h = x.extent(-3), w = x.extent(-2);
    const std::int64_t div = std::int64_t{1} << levels;
    if (h % div != 0)
        throw DimensionError("dwt2: axis H extent " + std::to_string(h) + " not divisible by 2^" +
                             std::to_string(levels));
    if (w % div != 0)
        throw DimensionError("dwt2: axis W extent " + std::to_string(w) + " not divisible by 2^" +
                             std::to_string(levels));
    SubbandSet s;
    s.levels = levels;
    s.base_channels = x.extent(-1);
    Tensor cur = x;
    for (int l = 0; l < levels; ++l) cur = dwt2_level(cur, bank);
    s.packed = cur;
    return s;
}

inline Tensor idwt2(const SubbandSet& s, const WaveletFilterBank& bank) {
    const std::int64_t expect = s.base_channels * (std::int64_t{1} << (2 * s.levels));
    if (s.packed.extent(-1) != expect)
        throw DimensionError("idwt2: packed channels " + std::to_string(s.packed.extent(-1)) +
                             " inconsistent with " + std::to_string(s.base_channels) + " base channels at level " +
                             std::to_string(s.levels));
    Tensor cur = s.packed;
    for (int l = 0; l < s.levels; ++l) cur = idwt2_level(cur, bank);
    return cur;
}

}  // namespace wavelit
