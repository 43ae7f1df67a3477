#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "wavelit/params.hpp"
#include "wavelit/tensor.hpp"

// Token-mixing block: kernelized linear attention with an optional
// ridge-corrected state, 2D-axial RoPE, CPE/LePE depthwise positional
// operators and an output kernel gate, plus a quadratic softmax-attention
// reference used by the benchmark and the attention ablation.

namespace wavelit {

struct Grid {
    std::int64_t h = 1;
    std::int64_t w = 1;
    std::int64_t tokens() const { return h * w; }
};

// Positive feature map applied to queries and keys: elu(x) + 1.
inline Tensor feature_map(const Tensor& x) { return elu_plus_one(x); }

// ---------------------------------------------------------------------------
// 2D-axial rotary embedding. The head dimension splits into quarters: the
// first half of the pairs rotates with the row index, the second half with
// the column index. Per-axis frequencies are log-spaced from pi/2 down to
// 2*pi/extent, so the slowest rotation completes at most one period across
// the grid. Position (0,0) is the identity.
inline Tensor apply_rope(const Tensor& x, const Grid& grid) {
    const std::int64_t d = x.extent(-1);
    const std::int64_t n = x.extent(-2);
    if (d % 4 != 0) throw ConfigError("apply_rope: feature dim " + std::to_string(d) + " not divisible by 4");
    if (n != grid.tokens())
        throw DimensionError("apply_rope: token count " + std::to_string(n) + " != grid " +
                             std::to_string(grid.h) + "x" + std::to_string(grid.w));
    const std::int64_t pairs = d / 2;
    const std::int64_t per_axis = d / 4;
    auto axis_freq = [per_axis](std::int64_t i, std::int64_t extent) {
        const double lo = 2.0 * 3.14159265358979323846 / static_cast<double>(extent);
        const double hi = 0.5 * 3.14159265358979323846;
        if (per_axis == 1) return lo;
        const double t = static_cast<double>(i) / static_cast<double>(per_axis - 1);
        return hi * std::pow(lo / hi, t);
    };
    auto cosv = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n * pairs));
    auto sinv = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n * pairs));
    for (std::int64_t r = 0; r < grid.h; ++r)
        for (std::int64_t cc = 0; cc < grid.w; ++cc) {
            const std::int64_t tok = r * grid.w + cc;
            for (std::int64_t p = 0; p < pairs; ++p) {
                const double theta = p < per_axis
                                         ? axis_freq(p, grid.h) * static_cast<double>(r)
                                         : axis_freq(p - per_axis, grid.w) * static_cast<double>(cc);
                (*cosv)[static_cast<std::size_t>(tok * pairs + p)] = std::cos(theta);
                (*sinv)[static_cast<std::size_t>(tok * pairs + p)] = std::sin(theta);
            }
        }
    const std::int64_t rows = x.size() / (n * d);
    Tensor out = Tensor::uninit(x.shape());
    const double* px = x.data();
    double* po = out.data();
    for (std::int64_t b = 0; b < rows; ++b)
        for (std::int64_t t = 0; t < n; ++t)
            for (std::int64_t p = 0; p < pairs; ++p) {
                const std::int64_t base = (b * n + t) * d + 2 * p;
                const double cs = (*cosv)[static_cast<std::size_t>(t * pairs + p)];
                const double sn = (*sinv)[static_cast<std::size_t>(t * pairs + p)];
                po[base] = px[base] * cs - px[base + 1] * sn;
                po[base + 1] = px[base] * sn + px[base + 1] * cs;
            }
    if (detail::track({&x})) {
        auto xn = x.node(), on = out.node();
        detail::mark_and_record(out, [xn, on, cosv, sinv, rows, n, d, pairs] {
            if (on->grad.empty() || !xn->needs_grad()) return;
            auto& g = xn->grad_buffer();
            for (std::int64_t b = 0; b < rows; ++b)
                for (std::int64_t t = 0; t < n; ++t)
                    for (std::int64_t p = 0; p < pairs; ++p) {
                        const std::int64_t base = (b * n + t) * d + 2 * p;
                        const double cs = (*cosv)[static_cast<std::size_t>(t * pairs + p)];
                        const double sn = (*sinv)[static_cast<std::size_t>(t * pairs + p)];
                        const double ga = on->grad[static_cast<std::size_t>(base)];
                        const double gb = on->grad[static_cast<std::size_t>(base + 1)];
                        g[static_cast<std::size_t>(base)] += ga * cs + gb * sn;
                        g[static_cast<std::size_t>(base + 1)] += -ga * sn + gb * cs;
                    }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Attention primitives. All accept [N, d] or [B, N, d].

namespace detail {
inline Tensor as_batched(const Tensor& x) {
    if (x.shape().size() == 2) {
        Shape s = x.shape();
        s.insert(s.begin(), 1);
        return reshape(x, s);
    }
    return x;
}
}  // namespace detail

// C = sum_j v_j phi(k_j)^T and G = sum_j phi(k_j) phi(k_j)^T, accumulated
// over all tokens at once (bidirectional).
struct AttentionState {
    Tensor C;  // [B, dv, dk]
    Tensor G;  // [B, dk, dk]
};

inline AttentionState attention_state(const Tensor& k, const Tensor& v) {
    Tensor kb = detail::as_batched(k);
    Tensor vb = detail::as_batched(v);
    Tensor phik = feature_map(kb);
    AttentionState st;
    st.C = bmm(transpose2(vb), phik);
    st.G = bmm(transpose2(phik), phik);
    return st;
}

// S_lambda = C (G + lambda I)^{-1} via the SPD solve.
inline Tensor ridge_state(const AttentionState& st, const Tensor& lambda) {
    Tensor x = solve_spd(add_scaled_identity(st.G, lambda), transpose2(st.C));
    return transpose2(x);  // [B, dv, dk]
}

// o_i = C phi(q_i); the normalizing denominator is omitted.
inline Tensor linear_attention_vanilla(const Tensor& q, const Tensor& k, const Tensor& v) {
    const bool flat = q.shape().size() == 2;
    Tensor qb = detail::as_batched(q), kb = detail::as_batched(k), vb = detail::as_batched(v);
    if (qb.extent(0) != kb.extent(0) || kb.extent(-2) != vb.extent(-2))
        throw DimensionError("linear_attention: mismatched token counts " + shape_str(k.shape()) + " vs " +
                             shape_str(v.shape()));
    Tensor phiq = feature_map(qb);
    Tensor phik = feature_map(kb);
    Tensor m = bmm(transpose2(phik), vb);  // [B, dk, dv] = C^T
    Tensor o = bmm(phiq, m);
    if (flat) return reshape(o, {o.extent(-2), o.extent(-1)});
    return o;
}

// o_i = S_lambda phi(q_i), S_lambda = C (G + lambda I)^{-1}.
inline Tensor linear_attention_ridge(const Tensor& q, const Tensor& k, const Tensor& v,
                                     const Tensor& lambda) {
    if (lambda.item() <= 0.0)
        throw ConfigError("linear_attention_ridge: lambda must be > 0, got " + std::to_string(lambda.item()));
    const bool flat = q.shape().size() == 2;
    Tensor qb = detail::as_batched(q), kb = detail::as_batched(k), vb = detail::as_batched(v);
    Tensor phiq = feature_map(qb);
    Tensor phik = feature_map(kb);
    Tensor g = bmm(transpose2(phik), phik);
    Tensor m = bmm(transpose2(phik), vb);  // C^T
    Tensor st = solve_spd(add_scaled_identity(g, lambda), m);  // (G+lI)^{-1} C^T = S^T
    Tensor o = bmm(phiq, st);
    if (flat) return reshape(o, {o.extent(-2), o.extent(-1)});
    return o;
}

// Frobenius-regularized reconstruction loss; used by tests to certify that
// ridge_state minimizes it.
inline Tensor ridge_objective(const Tensor& s, const Tensor& k_set, const Tensor& v_set, double lambda) {
    Tensor phik = feature_map(k_set);              // [N, dk]
    Tensor pred = matmul(phik, transpose2(s));     // [N, dv]
    Tensor diff = sub(v_set, pred);
    Tensor data_term = sum(mul(diff, diff));
    Tensor reg = scale(sum(mul(s, s)), lambda);
    return add(data_term, reg);
}

// Standard scaled dot-product attention, the quadratic reference.
inline Tensor softmax_attention_reference(const Tensor& q, const Tensor& k, const Tensor& v) {
    const bool flat = q.shape().size() == 2;
    Tensor qb = detail::as_batched(q), kb = detail::as_batched(k), vb = detail::as_batched(v);
    const double scale_f = 1.0 / std::sqrt(static_cast<double>(qb.extent(-1)));
    Tensor logits = scale(bmm(qb, transpose2(kb)), scale_f);  // [B, N, N]
    Tensor attn = softmax_last(logits);
    Tensor o = bmm(attn, vb);
    if (flat) return reshape(o, {o.extent(-2), o.extent(-1)});
    return o;
}

// ---------------------------------------------------------------------------
// Full mixer block

struct MixerAblation {
    bool ridge = true;
    bool kernel_gate = true;
    bool lepe = true;
    bool cpe = true;
    bool rope = true;
    bool mila_block = true;
    std::string attention = "linear";  // linear | softmax
};

// Named mixer configurations for the additive ablation: the A-branch grows
// a plain RoPE linear-attention block, the B-branch repeats it with the
// MILA-style block wiring and no gate, C1 is the full model. RoPE stays on
// in every row.
inline MixerAblation mixer_ablation_config(const std::string& row) {
    MixerAblation f;
    f.ridge = f.kernel_gate = f.lepe = f.cpe = f.mila_block = false;
    if (row == "A1") return f;
    if (row == "A2") {
        f.ridge = true;
        return f;
    }
    if (row == "A3") {
        f.ridge = f.kernel_gate = true;
        return f;
    }
    if (row == "A4") {
        f.ridge = f.kernel_gate = f.lepe = true;
        return f;
    }
    if (row == "A5") {
        f.ridge = f.kernel_gate = f.lepe = f.cpe = true;
        return f;
    }
    if (row == "B1") {
        f.lepe = f.mila_block = true;
        return f;
    }
    if (row == "B2") {
        f.ridge = f.lepe = f.mila_block = true;
        return f;
    }
    if (row == "B3") {
        f.ridge = f.lepe = f.cpe = f.mila_block = true;
        return f;
    }
    if (row == "C1") {
        f.ridge = f.kernel_gate = f.lepe = f.cpe = f.mila_block = true;
        return f;
    }
    throw ConfigError("mixer_ablation_config: unknown row '" + row +
                      "' (supported: A1 A2 A3 A4 A5 B1 B2 B3 C1)");
}

struct MixerParams {
    Tensor w_q, w_k, w_v, w_o;
    Tensor cpe1_kernels, cpe2_kernels;  // depthwise 3x3 on the residual stream
    Tensor lepe_kernels;                // depthwise 3x3 on the value path
    Tensor gate_proj;
    Tensor ridge_lambda_raw;  // softplus(raw) = effective lambda > 0
    Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
    Tensor norm_attn, norm_mlp, norm_out;
    std::int64_t dim = 0;
    int heads = 1;
    MixerAblation flags;

    Tensor ridge_lambda() const { return softplus(ridge_lambda_raw); }

    // Output projection, second MLP layer and the positional kernels start
    // at zero so the block is the identity at init.
    static MixerParams create(ParamStore& store, const std::string& prefix, std::int64_t dim, int heads,
                              const MixerAblation& flags, Rng& rng) {
        MixerParams p;
        p.dim = dim;
        p.heads = heads;
        p.flags = flags;
        if (dim % heads != 0)
            throw ConfigError("mixer: dim " + std::to_string(dim) + " not divisible by heads " +
                              std::to_string(heads));
        const double init_std = 1.0 / std::sqrt(static_cast<double>(dim));
        p.w_q = store.add(prefix + ".w_q", Tensor::randn({dim, dim}, rng, init_std));
        p.w_k = store.add(prefix + ".w_k", Tensor::randn({dim, dim}, rng, init_std));
        p.w_v = store.add(prefix + ".w_v", Tensor::randn({dim, dim}, rng, init_std));
        p.w_o = store.add(prefix + ".w_o", Tensor::zeros({dim, dim}));
        p.cpe1_kernels = store.add(prefix + ".cpe1", Tensor::zeros({3, 3, dim}));
        p.cpe2_kernels = store.add(prefix + ".cpe2", Tensor::zeros({3, 3, dim}));
        p.lepe_kernels = store.add(prefix + ".lepe", Tensor::zeros({3, 3, dim}));
        p.gate_proj = store.add(prefix + ".gate", Tensor::randn({dim, dim}, rng, init_std));
        // softplus(0.5413...) = 1: start mid-regime between vanilla and least squares
        p.ridge_lambda_raw = store.add(prefix + ".ridge_lambda_raw", Tensor::scalar(0.5413248546129181));
        p.mlp_w1 = store.add(prefix + ".mlp_w1", Tensor::randn({dim, 4 * dim}, rng, init_std));
        p.mlp_b1 = store.add(prefix + ".mlp_b1", Tensor::zeros({4 * dim}));
        p.mlp_w2 = store.add(prefix + ".mlp_w2", Tensor::zeros({4 * dim, dim}));
        p.mlp_b2 = store.add(prefix + ".mlp_b2", Tensor::zeros({dim}));
        p.norm_attn = store.add(prefix + ".norm_attn", Tensor::ones({dim}));
        p.norm_mlp = store.add(prefix + ".norm_mlp", Tensor::ones({dim}));
        p.norm_out = store.add(prefix + ".norm_out", Tensor::ones({dim}));
        return p;
    }
};

namespace detail {

inline Tensor tokens_to_grid(const Tensor& x, const Grid& g) {
    Shape s = x.shape();  // [..., N, D]
    const std::int64_t d = s.back();
    s.pop_back();
    s.pop_back();
    s.push_back(g.h);
    s.push_back(g.w);
    s.push_back(d);
    return reshape(x, s);
}

inline Tensor grid_to_tokens(const Tensor& x) {
    Shape s = x.shape();  // [..., h, w, D]
    const std::int64_t d = s.back();
    const std::int64_t w = s[s.size() - 2], h = s[s.size() - 3];
    s.resize(s.size() - 3);
    s.push_back(h * w);
    s.push_back(d);
    return reshape(x, s);
}

}  // namespace detail

// One full mixing block on tokens [B, N, D] arranged row-major on the grid.
inline Tensor mixer_block(const Tensor& x, const MixerParams& p, const Grid& grid) {
    if (x.extent(-2) != grid.tokens())
        throw DimensionError("mixer_block: N=" + std::to_string(x.extent(-2)) + " != grid " +
                             std::to_string(grid.h) + "x" + std::to_string(grid.w));
    const auto& f = p.flags;
    Tensor h = x;

    if (f.cpe) h = add(h, detail::grid_to_tokens(depthwise_conv2(detail::tokens_to_grid(h, grid), p.cpe1_kernels)));

    // Attention sub-block, pre-norm.
    {
        Tensor a_in = rms_norm(h, p.norm_attn);
        Tensor q = matmul(a_in, p.w_q);
        Tensor k = matmul(a_in, p.w_k);
        Tensor v = matmul(a_in, p.w_v);
        const std::int64_t dh = p.dim / p.heads;
        std::vector<Tensor> head_outs;
        for (int hd = 0; hd < p.heads; ++hd) {
            Tensor qh = p.heads == 1 ? q : slice_last(q, hd * dh, dh);
            Tensor kh = p.heads == 1 ? k : slice_last(k, hd * dh, dh);
            Tensor vh = p.heads == 1 ? v : slice_last(v, hd * dh, dh);
            Tensor oh;
            if (f.attention == "softmax") {
                if (f.rope) {
                    qh = apply_rope(qh, grid);
                    kh = apply_rope(kh, grid);
                }
                oh = softmax_attention_reference(qh, kh, vh);
            } else {
                Tensor phiq = feature_map(qh);
                Tensor phik = feature_map(kh);
                if (f.rope) {
                    phiq = apply_rope(phiq, grid);
                    phik = apply_rope(phik, grid);
                }
                Tensor g = bmm(transpose2(phik), phik);
                Tensor m = bmm(transpose2(phik), vh);
                if (f.ridge) {
                    Tensor st = solve_spd(add_scaled_identity(g, p.ridge_lambda()), m);
                    oh = bmm(phiq, st);
                } else {
                    oh = bmm(phiq, m);
                }
            }
            head_outs.push_back(oh);
        }
        Tensor o = p.heads == 1 ? head_outs[0] : concat_last(head_outs);
        if (f.lepe)
            o = add(o, detail::grid_to_tokens(depthwise_conv2(detail::tokens_to_grid(v, grid), p.lepe_kernels)));
        if (f.kernel_gate) o = mul(sigmoid(matmul(a_in, p.gate_proj)), o);
        if (f.mila_block) o = rms_norm(o, p.norm_out);
        h = add(h, matmul(o, p.w_o));
    }

    if (f.cpe && f.mila_block)
        h = add(h, detail::grid_to_tokens(depthwise_conv2(detail::tokens_to_grid(h, grid), p.cpe2_kernels)));

    // MLP sub-block, pre-norm.
    {
        Tensor m_in = rms_norm(h, p.norm_mlp);
        Tensor z = gelu(add_bias(matmul(m_in, p.mlp_w1), p.mlp_b1));
        h = add(h, add_bias(matmul(z, p.mlp_w2), p.mlp_b2));
    }
    return h;
}

}  // namespace wavelit
