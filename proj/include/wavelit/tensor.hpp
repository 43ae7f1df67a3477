#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wavelit/errors.hpp"
#include "wavelit/rng.hpp"

// Dense double-precision tensors with reverse-mode autodiff on a per-thread
// tape. Layout is row-major, last axis fastest (channels-last for fields).
// Broadcasting is deliberately limited to scalar-times-tensor and
// per-channel bias; everything else requires an explicit reshape.

namespace wavelit {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;   // empty until first accumulation
    bool requires_grad = false;
    bool on_graph = false;      // set when produced by a recorded op

    bool needs_grad() const { return requires_grad || on_graph; }

    void accumulate(const std::vector<double>& g) {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
    }

    std::vector<double>& grad_buffer() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        return grad;
    }
};

}  // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape) { return filled(std::move(shape), 0.0); }
    static Tensor ones(Shape shape) { return filled(std::move(shape), 1.0); }

    static Tensor filled(Shape shape, double v) {
        Tensor t = uninit(std::move(shape));
        std::fill(t.node_->value.begin(), t.node_->value.end(), v);
        return t;
    }

    static Tensor from(Shape shape, std::vector<double> data) {
        if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
            throw DimensionError("Tensor::from: shape " + shape_str(shape) + " does not match " +
                                 std::to_string(data.size()) + " values");
        Tensor t;
        t.node_ = std::make_shared<detail::Node>();
        t.node_->shape = std::move(shape);
        t.node_->value = std::move(data);
        return t;
    }

    static Tensor scalar(double v) { return from({1}, {v}); }

    static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0) {
        Tensor t = uninit(std::move(shape));
        for (auto& v : t.node_->value) v = stddev * rng.normal();
        return t;
    }

    static Tensor uninit(Shape shape) {
        Tensor t;
        t.node_ = std::make_shared<detail::Node>();
        t.node_->value.resize(static_cast<std::size_t>(shape_numel(shape)));
        t.node_->shape = std::move(shape);
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::int64_t size() const { return static_cast<std::int64_t>(node_->value.size()); }
    std::int64_t extent(int axis) const {
        int r = static_cast<int>(node_->shape.size());
        return node_->shape[static_cast<std::size_t>(axis < 0 ? axis + r : axis)];
    }

    double* data() { return node_->value.data(); }
    const double* data() const { return node_->value.data(); }
    const std::vector<double>& values() const { return node_->value; }
    double operator[](std::int64_t i) const { return node_->value[static_cast<std::size_t>(i)]; }

    double item() const {
        if (size() != 1) throw UsageError("item(): tensor has " + std::to_string(size()) + " elements");
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool b) {
        node_->requires_grad = b;
        return *this;
    }

    bool has_grad() const { return !node_->grad.empty(); }
    std::vector<double>& grad() { return node_->grad_buffer(); }
    const std::vector<double>& grad() const { return node_->grad; }
    void zero_grad() { node_->grad.clear(); }

    // Same values, cut off from the graph.
    Tensor detach() const {
        Tensor t;
        t.node_ = std::make_shared<detail::Node>();
        t.node_->shape = node_->shape;
        t.node_->value = node_->value;
        return t;
    }

    std::shared_ptr<detail::Node> node() const { return node_; }
    bool on_graph() const { return node_->on_graph; }

private:
    std::shared_ptr<detail::Node> node_;
};

// ---------------------------------------------------------------------------
// Tape

class Tape {
public:
    void record(std::shared_ptr<detail::Node> out, std::function<void()> backward_fn) {
        records_.push_back({std::move(out), std::move(backward_fn)});
    }

    std::size_t size() const { return records_.size(); }

    // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse, visiting
    // each record exactly once. Intermediate grads are transient per call;
    // leaf (requires_grad) grads accumulate across repeated calls.
    void backward(const Tensor& loss) {
        if (loss.size() != 1) throw UsageError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
        for (auto& r : records_)
            if (!r.out->requires_grad) r.out->grad.clear();
        loss.node()->accumulate({1.0});
        for (auto it = records_.rbegin(); it != records_.rend(); ++it) it->fn();
    }

    void clear() { records_.clear(); }

private:
    struct Record {
        std::shared_ptr<detail::Node> out;
        std::function<void()> fn;
    };
    std::vector<Record> records_;
};

namespace detail {
inline Tape*& tape_slot() {
    thread_local Tape* slot = nullptr;
    return slot;
}
}  // namespace detail

inline Tape* active_tape() { return detail::tape_slot(); }

struct TapeScope {
    Tape tape;
    Tape* prev;
    TapeScope() : prev(detail::tape_slot()) { detail::tape_slot() = &tape; }
    ~TapeScope() { detail::tape_slot() = prev; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;
};

struct NoGradScope {
    Tape* prev;
    NoGradScope() : prev(detail::tape_slot()) { detail::tape_slot() = nullptr; }
    ~NoGradScope() { detail::tape_slot() = prev; }
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;
};

namespace detail {

inline bool track(std::initializer_list<const Tensor*> inputs) {
    if (!tape_slot()) return false;
    for (const Tensor* t : inputs)
        if (t->node()->needs_grad()) return true;
    return false;
}

inline void mark_and_record(Tensor& out, std::function<void()> fn) {
    out.node()->on_graph = true;
    tape_slot()->record(out.node(), std::move(fn));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Shape helpers

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
}

// ---------------------------------------------------------------------------
// Elementwise binary ops (same shape)

namespace detail {

template <class Fwd, class Bwd>
Tensor binary_elementwise(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Bwd bwd) {
    check_same_shape(name, a, b);
    Tensor out = Tensor::uninit(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    const std::size_t n = static_cast<std::size_t>(a.size());
    for (std::size_t i = 0; i < n; ++i) po[i] = fwd(pa[i], pb[i]);
    if (track({&a, &b})) {
        auto an = a.node(), bn = b.node(), on = out.node();
        mark_and_record(out, [an, bn, on, bwd] {
            if (on->grad.empty()) return;
            bwd(*an, *bn, *on);
        });
    }
    return out;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::binary_elementwise(
        "add", a, b, [](double x, double y) { return x + y; },
        [](detail::Node& an, detail::Node& bn, detail::Node& on) {
            if (an.needs_grad()) an.accumulate(on.grad);
            if (bn.needs_grad()) bn.accumulate(on.grad);
        });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::binary_elementwise(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](detail::Node& an, detail::Node& bn, detail::Node& on) {
            if (an.needs_grad()) an.accumulate(on.grad);
            if (bn.needs_grad()) {
                auto& g = bn.grad_buffer();
                for (std::size_t i = 0; i < on.grad.size(); ++i) g[i] -= on.grad[i];
            }
        });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    return detail::binary_elementwise(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](detail::Node& an, detail::Node& bn, detail::Node& on) {
            if (an.needs_grad()) {
                auto& g = an.grad_buffer();
                for (std::size_t i = 0; i < on.grad.size(); ++i) g[i] += on.grad[i] * bn.value[i];
            }
            if (bn.needs_grad()) {
                auto& g = bn.grad_buffer();
                for (std::size_t i = 0; i < on.grad.size(); ++i) g[i] += on.grad[i] * an.value[i];
            }
        });
}

// ---------------------------------------------------------------------------
// Elementwise unary ops

namespace detail {

template <class Fwd, class Deriv>
Tensor unary_elementwise(const Tensor& x, Fwd fwd, Deriv deriv) {
    Tensor out = Tensor::uninit(x.shape());
    const double* px = x.data();
    double* po = out.data();
    const std::size_t n = static_cast<std::size_t>(x.size());
    for (std::size_t i = 0; i < n; ++i) po[i] = fwd(px[i]);
    if (track({&x})) {
        auto xn = x.node(), on = out.node();
        mark_and_record(out, [xn, on, deriv] {
            if (on->grad.empty() || !xn->needs_grad()) return;
            auto& g = xn->grad_buffer();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                g[i] += on->grad[i] * deriv(xn->value[i], on->value[i]);
        });
    }
    return out;
}

}  // namespace detail

inline Tensor scale(const Tensor& x, double c) {
    return detail::unary_elementwise(
        x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

inline Tensor exp(const Tensor& x) {
    return detail::unary_elementwise(
        x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Tensor sigmoid(const Tensor& x) {
    return detail::unary_elementwise(
        x,
        [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
        [](double, double y) { return y * (1.0 - y); });
}

// elu(x) + 1: strictly positive, C^1 everywhere (both one-sided derivatives
// at 0 equal 1).
inline Tensor elu_plus_one(const Tensor& x) {
    return detail::unary_elementwise(
        x, [](double v) { return v > 0.0 ? v + 1.0 : std::exp(v); },
        [](double v, double y) { return v > 0.0 ? 1.0 : y; });
}

inline Tensor softplus(const Tensor& x) {
    return detail::unary_elementwise(
        x, [](double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); },
        [](double v, double) { return 1.0 / (1.0 + std::exp(-v)); });
}

inline Tensor gelu(const Tensor& x) {
    constexpr double kInvSqrt2 = 0.7071067811865476;
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    return detail::unary_elementwise(
        x, [=](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
        [=](double v, double) {
            return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
        });
}

// ---------------------------------------------------------------------------
// Restricted broadcasts: scalar-tensor product and per-channel bias

// y = s * x, s is a one-element tensor (learnable scalar).
inline Tensor mul_scalar(const Tensor& x, const Tensor& s) {
    if (s.size() != 1) throw DimensionError("mul_scalar: scalar operand has shape " + shape_str(s.shape()));
    Tensor out = Tensor::uninit(x.shape());
    const double sv = s[0];
    const double* px = x.data();
    double* po = out.data();
    for (std::int64_t i = 0; i < x.size(); ++i) po[i] = sv * px[i];
    if (detail::track({&x, &s})) {
        auto xn = x.node(), sn = s.node(), on = out.node();
        detail::mark_and_record(out, [xn, sn, on] {
            if (on->grad.empty()) return;
            if (xn->needs_grad()) {
                auto& g = xn->grad_buffer();
                const double sv2 = sn->value[0];
                for (std::size_t i = 0; i < on->grad.size(); ++i) g[i] += sv2 * on->grad[i];
            }
            if (sn->needs_grad()) {
                double acc = 0.0;
                for (std::size_t i = 0; i < on->grad.size(); ++i) acc += on->grad[i] * xn->value[i];
                sn->grad_buffer()[0] += acc;
            }
        });
    }
    return out;
}

// y[..., c] = x[..., c] + b[c]
inline Tensor add_bias(const Tensor& x, const Tensor& b) {
    if (b.shape().size() != 1 || b.extent(0) != x.extent(-1))
        throw DimensionError("add_bias: bias " + shape_str(b.shape()) + " does not match last axis of " +
                             shape_str(x.shape()));
    Tensor out = Tensor::uninit(x.shape());
    const std::int64_t c = b.extent(0);
    const std::int64_t rows = x.size() / c;
    const double* px = x.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t j = 0; j < c; ++j) po[r * c + j] = px[r * c + j] + pb[j];
    if (detail::track({&x, &b})) {
        auto xn = x.node(), bn = b.node(), on = out.node();
        detail::mark_and_record(out, [xn, bn, on, rows, c] {
            if (on->grad.empty()) return;
            if (xn->needs_grad()) xn->accumulate(on->grad);
            if (bn->needs_grad()) {
                auto& g = bn->grad_buffer();
                for (std::int64_t r = 0; r < rows; ++r)
                    for (std::int64_t j = 0; j < c; ++j) g[static_cast<std::size_t>(j)] += on->grad[static_cast<std::size_t>(r * c + j)];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reductions

inline Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < x.size(); ++i) acc += x[i];
    Tensor out = Tensor::from({1}, {acc});
    if (detail::track({&x})) {
        auto xn = x.node(), on = out.node();
        detail::mark_and_record(out, [xn, on] {
            if (on->grad.empty() || !xn->needs_grad()) return;
            auto& g = xn->grad_buffer();
            const double go = on->grad[0];
            for (auto& v : g) v += go;
        });
    }
    return out;
}

inline Tensor mean(const Tensor& x) {
    const double inv_n = 1.0 / static_cast<double>(x.size());
    double acc = 0.0;
    for (std::int64_t i = 0; i < x.size(); ++i) acc += x[i];
    Tensor out = Tensor::from({1}, {acc * inv_n});
    if (detail::track({&x})) {
        auto xn = x.node(), on = out.node();
        detail::mark_and_record(out, [xn, on, inv_n] {
            if (on->grad.empty() || !xn->needs_grad()) return;
            auto& g = xn->grad_buffer();
            const double go = on->grad[0] * inv_n;
            for (auto& v : g) v += go;
        });
    }
    return out;
}

// mean((a-b)^2). The mean is over all elements; the gradient examples in the
// tests assume this reduction.
inline Tensor mse(const Tensor& a, const Tensor& b) {
    check_same_shape("mse", a, b);
    const double inv_n = 1.0 / static_cast<double>(a.size());
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    Tensor out = Tensor::from({1}, {acc * inv_n});
    if (detail::track({&a, &b})) {
        auto an = a.node(), bn = b.node(), on = out.node();
        detail::mark_and_record(out, [an, bn, on, inv_n] {
            if (on->grad.empty()) return;
            const double go = 2.0 * inv_n * on->grad[0];
            if (an->needs_grad()) {
                auto& g = an->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += go * (an->value[i] - bn->value[i]);
            }
            if (bn->needs_grad()) {
                auto& g = bn->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] -= go * (an->value[i] - bn->value[i]);
            }
        });
    }
    return out;
}

// mean(|a-b|); subgradient 0 at ties.
inline Tensor l1(const Tensor& a, const Tensor& b) {
    check_same_shape("l1", a, b);
    const double inv_n = 1.0 / static_cast<double>(a.size());
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    Tensor out = Tensor::from({1}, {acc * inv_n});
    if (detail::track({&a, &b})) {
        auto an = a.node(), bn = b.node(), on = out.node();
        detail::mark_and_record(out, [an, bn, on, inv_n] {
            if (on->grad.empty()) return;
            const double go = inv_n * on->grad[0];
            for (std::size_t i = 0; i < an->value.size(); ++i) {
                const double d = an->value[i] - bn->value[i];
                const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                if (an->needs_grad()) an->grad_buffer()[i] += go * s;
                if (bn->needs_grad()) bn->grad_buffer()[i] -= go * s;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Matrix products

// a: [..., k] contracted with b: [k, n] -> [..., n]. Leading axes of a are
// flattened row-wise. Gradients: dA = dC B^T, dB = A^T dC.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() < 1 || b.shape().size() != 2)
        throw DimensionError("matmul: need a=[...,k], b=[k,n], got " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    const std::int64_t k = a.extent(-1);
    if (b.extent(0) != k)
        throw DimensionError("matmul: inner extents differ " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    const std::int64_t n = b.extent(1);
    const std::int64_t m = a.size() / k;
    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    out_shape.push_back(n);
    Tensor out = Tensor::zeros(std::move(out_shape));
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::int64_t i = 0; i < m; ++i) {
        const double* arow = pa + i * k;
        double* orow = po + i * n;
        for (std::int64_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = pb + kk * n;
            for (std::int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    if (detail::track({&a, &b})) {
        auto an = a.node(), bn = b.node(), on = out.node();
        detail::mark_and_record(out, [an, bn, on, m, k, n] {
            if (on->grad.empty()) return;
            const double* go = on->grad.data();
            if (an->needs_grad()) {
                auto& ga = an->grad_buffer();
                const double* pb2 = bn->value.data();
                for (std::int64_t i = 0; i < m; ++i)
                    for (std::int64_t kk = 0; kk < k; ++kk) {
                        double acc = 0.0;
                        const double* brow = pb2 + kk * n;
                        const double* grow = go + i * n;
                        for (std::int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        ga[static_cast<std::size_t>(i * k + kk)] += acc;
                    }
            }
            if (bn->needs_grad()) {
                auto& gb = bn->grad_buffer();
                const double* pa2 = an->value.data();
                for (std::int64_t i = 0; i < m; ++i) {
                    const double* arow = pa2 + i * k;
                    const double* grow = go + i * n;
                    for (std::int64_t kk = 0; kk < k; ++kk) {
                        const double av = arow[kk];
                        if (av == 0.0) continue;
                        double* brow = gb.data() + kk * n;
                        for (std::int64_t j = 0; j < n; ++j) brow[j] += av * grow[j];
                    }
                }
            }
        });
    }
    return out;
}

// Batched matmul: a [..., m, k] x b [..., k, n] with identical leading dims.
inline Tensor bmm(const Tensor& a, const Tensor& b) {
    if (a.shape().size() < 2 || b.shape().size() != a.shape().size())
        throw DimensionError("bmm: rank mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    Shape lead(a.shape().begin(), a.shape().end() - 2);
    Shape lead_b(b.shape().begin(), b.shape().end() - 2);
    const std::int64_t m = a.extent(-2), k = a.extent(-1), n = b.extent(-1);
    if (lead != lead_b || b.extent(-2) != k)
        throw DimensionError("bmm: incompatible " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const std::int64_t batch = shape_numel(lead);
    Shape out_shape = lead;
    out_shape.push_back(m);
    out_shape.push_back(n);
    Tensor out = Tensor::zeros(std::move(out_shape));
    for (std::int64_t bidx = 0; bidx < batch; ++bidx) {
        const double* pa = a.data() + bidx * m * k;
        const double* pb = b.data() + bidx * k * n;
        double* po = out.data() + bidx * m * n;
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t kk = 0; kk < k; ++kk) {
                const double av = pa[i * k + kk];
                if (av == 0.0) continue;
                for (std::int64_t j = 0; j < n; ++j) po[i * n + j] += av * pb[kk * n + j];
            }
    }
    if (detail::track({&a, &b})) {
        auto an = a.node(), bn = b.node(), on = out.node();
        detail::mark_and_record(out, [an, bn, on, batch, m, k, n] {
            if (on->grad.empty()) return;
            for (std::int64_t bidx = 0; bidx < batch; ++bidx) {
                const double* go = on->grad.data() + bidx * m * n;
                if (an->needs_grad()) {
                    double* ga = an->grad_buffer().data() + bidx * m * k;
                    const double* pb2 = bn->value.data() + bidx * k * n;
                    for (std::int64_t i = 0; i < m; ++i)
                        for (std::int64_t kk = 0; kk < k; ++kk) {
                            double acc = 0.0;
                            for (std::int64_t j = 0; j < n; ++j) acc += go[i * n + j] * pb2[kk * n + j];
                            ga[i * k + kk] += acc;
                        }
                }
                if (bn->needs_grad()) {
                    double* gb = bn->grad_buffer().data() + bidx * k * n;
                    const double* pa2 = an->value.data() + bidx * m * k;
                    for (std::int64_t i = 0; i < m; ++i)
                        for (std::int64_t kk = 0; kk < k; ++kk) {
                            const double av = pa2[i * k + kk];
                            if (av == 0.0) continue;
                            for (std::int64_t j = 0; j < n; ++j) gb[kk * n + j] += av * go[i * n + j];
                        }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Layout ops

inline Tensor reshape(const Tensor& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.size())
        throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(new_shape) +
                             " changes element count");
    Tensor out = Tensor::from(std::move(new_shape), x.values());
    if (detail::track({&x})) {
        auto xn = x.node(), on = out.node();
        detail::mark_and_record(out, [xn, on] {
            if (on->grad.empty() || !xn->needs_grad()) return;
            xn->accumulate(on->grad);
        });
    }
    return out;
}

namespace detail {

inline std::vector<std::int64_t> row_major_strides(const Shape& s) {
    std::vector<std::int64_t> st(s.size());
    std::int64_t acc = 1;
    for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
        st[static_cast<std::size_t>(i)] = acc;
        acc *= s[static_cast<std::size_t>(i)];
    }
    return st;
}

}  // namespace detail

inline Tensor permute(const Tensor& x, const std::vector<int>& axes) {
    const std::size_t r = x.shape().size();
    if (axes.size() != r) throw DimensionError("permute: axes rank mismatch for " + shape_str(x.shape()));
    Shape out_shape(r);
    for (std::size_t i = 0; i < r; ++i) out_shape[i] = x.shape()[static_cast<std::size_t>(axes[i])];
    const auto in_strides = detail::row_major_strides(x.shape());
    // Map each output linear index to its input linear index.
    std::vector<std::int64_t> perm_strides(r);
    for (std::size_t i = 0; i < r; ++i) perm_strides[i] = in_strides[static_cast<std::size_t>(axes[i])];
    Tensor out = Tensor::uninit(out_shape);
    const std::int64_t n = x.size();
    std::vector<std::int64_t> idx(r, 0);
    const double* px = x.data();
    double* po = out.data();
    std::int64_t src = 0;
    for (std::int64_t linear = 0; linear < n; ++linear) {
        po[linear] = px[src];
        for (int ax = static_cast<int>(r) - 1; ax >= 0; --ax) {
            auto a = static_cast<std::size_t>(ax);
            if (++idx[a] < out_shape[a]) {
                src += perm_strides[a];
                break;
            }
            src -= perm_strides[a] * (out_shape[a] - 1);
            idx[a] = 0;
        }
    }
    if (detail::track({&x})) {
        auto xn = x.node(), on = out.node();
        detail::mark_and_record(out, [xn, on, out_shape, perm_strides, r, n] {
            if (on->grad.empty() || !xn->needs_grad()) return;
            auto& g = xn->grad_buffer();
            std::vector<std::int64_t> idx2(r, 0);
            std::int64_t src2 = 0;
            for (std::int64_t linear = 0; linear < n; ++linear) {
                g[static_cast<std::size_t>(src2)] += on->grad[static_cast<std::size_t>(linear)];
                for (int ax = static_cast<int>(r) - 1; ax >= 0; --ax) {
                    auto a = static_cast<std::size_t>(ax);
                    if (++idx2[a] < out_shape[a]) {
                        src2 += perm_strides[a];
                        break;
                    }
                    src2 -= perm_strides[a] * (out_shape[a] - 1);
                    idx2[a] = 0;
                }
            }
        });
    }
    return out;
}

// Transpose the trailing two axes.
inline Tensor transpose2(const Tensor& x) {
    const std::size_t r = x.shape().size();
    if (r < 2) throw DimensionError("transpose2: rank < 2 for " + shape_str(x.shape()));
    std::vector<int> axes(r);
    std::iota(axes.begin(), axes.end(), 0);
    std::swap(axes[r - 1], axes[r - 2]);
    return permute(x, axes);
}

inline Tensor slice_last(const Tensor& x, std::int64_t start, std::int64_t len) {
    const std::int64_t c = x.extent(-1);
    if (start < 0 || len < 1 || start + len > c)
        throw DimensionError("slice_last: [" + std::to_string(start) + "," + std::to_string(start + len) +
                             ") out of range for " + shape_str(x.shape()));
    Shape out_shape = x.shape();
    out_shape.back() = len;
    Tensor out = Tensor::uninit(out_shape);
    const std::int64_t rows = x.size() / c;
    const double* px = x.data();
    double* po = out.data();
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t j = 0; j < len; ++j) po[r * len + j] = px[r * c + start + j];
    if (detail::track({&x})) {
        auto xn = x.node(), on = out.node();
        detail::mark_and_record(out, [xn, on, rows, c, start, len] {
            if (on->grad.empty() || !xn->needs_grad()) return;
            auto& g = xn->grad_buffer();
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t j = 0; j < len; ++j)
                    g[static_cast<std::size_t>(r * c + start + j)] += on->grad[static_cast<std::size_t>(r * len + j)];
        });
    }
    return out;
}

inline Tensor concat_last(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw UsageError("concat_last: no inputs");
    Shape lead = parts[0].shape();
    lead.pop_back();
    std::int64_t total = 0;
    for (const auto& p : parts) {
        Shape pl = p.shape();
        const std::int64_t pc = pl.back();
        pl.pop_back();
        if (pl != lead) throw DimensionError("concat_last: leading shape mismatch");
        total += pc;
    }
    Shape out_shape = lead;
    out_shape.push_back(total);
    Tensor out = Tensor::uninit(out_shape);
    const std::int64_t rows = out.size() / total;
    double* po = out.data();
    std::int64_t off = 0;
    for (const auto& p : parts) {
        const std::int64_t pc = p.extent(-1);
        const double* pp = p.data();
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t j = 0; j < pc; ++j) po[r * total + off + j] = pp[r * pc + j];
        off += pc;
    }
    bool any = false;
    if (active_tape())
        for (const auto& p : parts) any = any || p.node()->needs_grad();
    if (active_tape() && any) {
        std::vector<std::shared_ptr<detail::Node>> nodes;
        for (const auto& p : parts) nodes.push_back(p.node());
        auto on = out.node();
        detail::mark_and_record(out, [nodes, on, rows, total] {
            if (on->grad.empty()) return;
            std::int64_t off2 = 0;
            for (const auto& pn : nodes) {
                const std::int64_t pc = static_cast<std::int64_t>(pn->value.size()) / rows;
                if (pn->needs_grad()) {
                    auto& g = pn->grad_buffer();
                    for (std::int64_t r = 0; r < rows; ++r)
                        for (std::int64_t j = 0; j < pc; ++j)
                            g[static_cast<std::size_t>(r * pc + j)] +=
                                on->grad[static_cast<std::size_t>(r * total + off2 + j)];
                }
                off2 += pc;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// SPD solve (Cholesky), differentiable through the solve.
// G is symmetrized internally; the gradient accounts for that, so
// finite-difference probes against arbitrary dense perturbations agree.

namespace detail {

// Factor M = L L^T in place of a copy; returns L (lower). Throws naming the
// first non-positive pivot.
inline std::vector<double> cholesky(const double* m, std::int64_t d) {
    std::vector<double> L(static_cast<std::size_t>(d * d), 0.0);
    for (std::int64_t i = 0; i < d; ++i) {
        for (std::int64_t j = 0; j <= i; ++j) {
            double acc = 0.5 * (m[i * d + j] + m[j * d + i]);
            for (std::int64_t k = 0; k < j; ++k) acc -= L[static_cast<std::size_t>(i * d + k)] * L[static_cast<std::size_t>(j * d + k)];
            if (i == j) {
                if (!(acc > 0.0))
                    throw SingularityError("solve_spd: non-positive pivot at diagonal index " + std::to_string(i));
                L[static_cast<std::size_t>(i * d + i)] = std::sqrt(acc);
            } else {
                L[static_cast<std::size_t>(i * d + j)] = acc / L[static_cast<std::size_t>(j * d + j)];
            }
        }
    }
    return L;
}

// Solve (L L^T) X = B for X, column count n.
inline void cholesky_solve(const std::vector<double>& L, std::int64_t d, const double* b, double* x,
                           std::int64_t n) {
    std::vector<double> y(static_cast<std::size_t>(d));
    for (std::int64_t col = 0; col < n; ++col) {
        for (std::int64_t i = 0; i < d; ++i) {
            double acc = b[i * n + col];
            for (std::int64_t k = 0; k < i; ++k) acc -= L[static_cast<std::size_t>(i * d + k)] * y[static_cast<std::size_t>(k)];
            y[static_cast<std::size_t>(i)] = acc / L[static_cast<std::size_t>(i * d + i)];
        }
        for (std::int64_t i = d - 1; i >= 0; --i) {
            double acc = y[static_cast<std::size_t>(i)];
            for (std::int64_t k = i + 1; k < d; ++k) acc -= L[static_cast<std::size_t>(k * d + i)] * x[k * n + col];
            x[i * n + col] = acc / L[static_cast<std::size_t>(i * d + i)];
        }
    }
}

}  // namespace detail

// Solve G X = B with G SPD, batched over identical leading dims.
inline Tensor solve_spd(const Tensor& g, const Tensor& b) {
    if (g.shape().size() < 2 || b.shape().size() != g.shape().size())
        throw DimensionError("solve_spd: rank mismatch " + shape_str(g.shape()) + " vs " + shape_str(b.shape()));
    const std::int64_t d = g.extent(-1);
    if (g.extent(-2) != d || b.extent(-2) != d)
        throw DimensionError("solve_spd: G " + shape_str(g.shape()) + " incompatible with B " +
                             shape_str(b.shape()));
    Shape lead_g(g.shape().begin(), g.shape().end() - 2);
    Shape lead_b(b.shape().begin(), b.shape().end() - 2);
    if (lead_g != lead_b) throw DimensionError("solve_spd: batch dims differ");
    const std::int64_t batch = shape_numel(lead_g);
    const std::int64_t n = b.extent(-1);
    Tensor out = Tensor::uninit(b.shape());
    auto factors = std::make_shared<std::vector<std::vector<double>>>();
    factors->reserve(static_cast<std::size_t>(batch));
    for (std::int64_t bi = 0; bi < batch; ++bi) {
        auto L = detail::cholesky(g.data() + bi * d * d, d);
        detail::cholesky_solve(L, d, b.data() + bi * d * n, out.data() + bi * d * n, n);
        factors->push_back(std::move(L));
    }
    if (detail::track({&g, &b})) {
        auto gn = g.node(), bn = b.node(), on = out.node();
        detail::mark_and_record(out, [gn, bn, on, factors, batch, d, n] {
            if (on->grad.empty()) return;
            std::vector<double> s(static_cast<std::size_t>(d * n));
            for (std::int64_t bi = 0; bi < batch; ++bi) {
                detail::cholesky_solve((*factors)[static_cast<std::size_t>(bi)], d,
                                       on->grad.data() + bi * d * n, s.data(), n);
                if (bn->needs_grad()) {
                    auto& gb = bn->grad_buffer();
                    for (std::int64_t i = 0; i < d * n; ++i) gb[static_cast<std::size_t>(bi * d * n + i)] += s[static_cast<std::size_t>(i)];
                }
                if (gn->needs_grad()) {
                    // d/dG of sym-solve: -sym(S X^T)
                    auto& gg = gn->grad_buffer();
                    const double* x = on->value.data() + bi * d * n;
                    for (std::int64_t i = 0; i < d; ++i)
                        for (std::int64_t j = 0; j < d; ++j) {
                            double acc = 0.0;
                            for (std::int64_t col = 0; col < n; ++col)
                                acc += s[static_cast<std::size_t>(i * n + col)] * x[j * n + col] +
                                       s[static_cast<std::size_t>(j * n + col)] * x[i * n + col];
                            gg[static_cast<std::size_t>(bi * d * d + i * d + j)] -= 0.5 * acc;
                        }
                }
            }
        });
    }
    return out;
}

// G + s*I on the trailing two axes; s is a one-element tensor.
inline Tensor add_scaled_identity(const Tensor& g, const Tensor& s) {
    if (s.size() != 1) throw DimensionError("add_scaled_identity: scalar has shape " + shape_str(s.shape()));
    const std::int64_t d = g.extent(-1);
    if (g.shape().size() < 2 || g.extent(-2) != d)
        throw DimensionError("add_scaled_identity: not square: " + shape_str(g.shape()));
    const std::int64_t batch = g.size() / (d * d);
    Tensor out = Tensor::from(g.shape(), g.values());
    const double sv = s[0];
    for (std::int64_t bi = 0; bi < batch; ++bi)
        for (std::int64_t i = 0; i < d; ++i) out.data()[bi * d * d + i * d + i] += sv;
    if (detail::track({&g, &s})) {
        auto gn = g.node(), sn = s.node(), on = out.node();
        detail::mark_and_record(out, [gn, sn, on, batch, d] {
            if (on->grad.empty()) return;
            if (gn->needs_grad()) gn->accumulate(on->grad);
            if (sn->needs_grad()) {
                double acc = 0.0;
                for (std::int64_t bi = 0; bi < batch; ++bi)
                    for (std::int64_t i = 0; i < d; ++i) acc += on->grad[static_cast<std::size_t>(bi * d * d + i * d + i)];
                sn->grad_buffer()[0] += acc;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spatial ops on channels-last fields [..., H, W, C]

namespace detail {

struct FieldDims {
    std::int64_t batch, h, w, c;
};

inline FieldDims field_dims(const char* op, const Tensor& x) {
    if (x.shape().size() < 3) throw DimensionError(std::string(op) + ": need [...,H,W,C], got " + shape_str(x.shape()));
    const std::int64_t c = x.extent(-1), w = x.extent(-2), h = x.extent(-3);
    return {x.size() / (h * w * c), h, w, c};
}

}  // namespace detail

// 2x2 mean pooling over the spatial axes.
inline Tensor avg_pool2(const Tensor& x) {
    auto [batch, h, w, c] = detail::field_dims("avg_pool2", x);
    if (h % 2 != 0) throw DimensionError("avg_pool2: odd H=" + std::to_string(h));
    if (w % 2 != 0) throw DimensionError("avg_pool2: odd W=" + std::to_string(w));
    Shape out_shape = x.shape();
    out_shape[out_shape.size() - 3] = h / 2;
    out_shape[out_shape.size() - 2] = w / 2;
    Tensor out = Tensor::uninit(out_shape);
    const double* px = x.data();
    double* po = out.data();
    const std::int64_t oh = h / 2, ow = w / 2;
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t i = 0; i < oh; ++i)
            for (std::int64_t j = 0; j < ow; ++j)
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    const std::int64_t base = ((b * h + 2 * i) * w + 2 * j) * c + ch;
                    po[((b * oh + i) * ow + j) * c + ch] =
                        0.25 * (px[base] + px[base + c] + px[base + w * c] + px[base + w * c + c]);
                }
    if (detail::track({&x})) {
        auto xn = x.node(), on = out.node();
        detail::mark_and_record(out, [xn, on, batch, h, w, c, oh, ow] {
            if (on->grad.empty() || !xn->needs_grad()) return;
            auto& g = xn->grad_buffer();
            for (std::int64_t b = 0; b < batch; ++b)
                for (std::int64_t i = 0; i < oh; ++i)
                    for (std::int64_t j = 0; j < ow; ++j)
                        for (std::int64_t ch = 0; ch < c; ++ch) {
                            const double gv = 0.25 * on->grad[static_cast<std::size_t>(((b * oh + i) * ow + j) * c + ch)];
                            const std::int64_t base = ((b * h + 2 * i) * w + 2 * j) * c + ch;
                            g[static_cast<std::size_t>(base)] += gv;
                            g[static_cast<std::size_t>(base + c)] += gv;
                            g[static_cast<std::size_t>(base + w * c)] += gv;
                            g[static_cast<std::size_t>(base + w * c + c)] += gv;
                        }
        });
    }
    return out;
}

// Nearest-neighbor 2x upsampling; exact left inverse of avg_pool2 is
// avg_pool2(upsample_nearest2(x)) == x.
inline Tensor upsample_nearest2(const Tensor& x) {
    auto [batch, h, w, c] = detail::field_dims("upsample_nearest2", x);
    Shape out_shape = x.shape();
    out_shape[out_shape.size() - 3] = 2 * h;
    out_shape[out_shape.size() - 2] = 2 * w;
    Tensor out = Tensor::uninit(out_shape);
    const double* px = x.data();
    double* po = out.data();
    const std::int64_t oh = 2 * h, ow = 2 * w;
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t i = 0; i < oh; ++i)
            for (std::int64_t j = 0; j < ow; ++j)
                for (std::int64_t ch = 0; ch < c; ++ch)
                    po[((b * oh + i) * ow + j) * c + ch] = px[((b * h + i / 2) * w + j / 2) * c + ch];
    if (detail::track({&x})) {
        auto xn = x.node(), on = out.node();
        detail::mark_and_record(out, [xn, on, batch, h, w, c, oh, ow] {
            if (on->grad.empty() || !xn->needs_grad()) return;
            auto& g = xn->grad_buffer();
            for (std::int64_t b = 0; b < batch; ++b)
                for (std::int64_t i = 0; i < oh; ++i)
                    for (std::int64_t j = 0; j < ow; ++j)
                        for (std::int64_t ch = 0; ch < c; ++ch)
                            g[static_cast<std::size_t>(((b * h + i / 2) * w + j / 2) * c + ch)] +=
                                on->grad[static_cast<std::size_t>(((b * oh + i) * ow + j) * c + ch)];
        });
    }
    return out;
}

// Per-channel 2D correlation with zero padding, shape preserving.
// kernels: [kh, kw, C], kh and kw odd.
inline Tensor depthwise_conv2(const Tensor& x, const Tensor& kernels) {
    auto [batch, h, w, c] = detail::field_dims("depthwise_conv2", x);
    if (kernels.shape().size() != 3 || kernels.extent(2) != c)
        throw DimensionError("depthwise_conv2: kernels " + shape_str(kernels.shape()) + " vs input " +
                             shape_str(x.shape()));
    const std::int64_t kh = kernels.extent(0), kw = kernels.extent(1);
    if (kh % 2 == 0 || kw % 2 == 0)
        throw ConfigError("depthwise_conv2: kernel extents must be odd, got " + shape_str(kernels.shape()));
    const std::int64_t ch2 = kh / 2, cw2 = kw / 2;
    Tensor out = Tensor::zeros(x.shape());
    const double* px = x.data();
    const double* pk = kernels.data();
    double* po = out.data();
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t i = 0; i < h; ++i)
            for (std::int64_t j = 0; j < w; ++j)
                for (std::int64_t u = 0; u < kh; ++u) {
                    const std::int64_t pi = i + u - ch2;
                    if (pi < 0 || pi >= h) continue;
                    for (std::int64_t v = 0; v < kw; ++v) {
                        const std::int64_t pj = j + v - cw2;
                        if (pj < 0 || pj >= w) continue;
                        const double* xrow = px + ((b * h + pi) * w + pj) * c;
                        const double* krow = pk + (u * kw + v) * c;
                        double* orow = po + ((b * h + i) * w + j) * c;
                        for (std::int64_t chn = 0; chn < c; ++chn) orow[chn] += xrow[chn] * krow[chn];
                    }
                }
    if (detail::track({&x, &kernels})) {
        auto xn = x.node(), kn = kernels.node(), on = out.node();
        detail::mark_and_record(out, [xn, kn, on, batch, h, w, c, kh, kw, ch2, cw2] {
            if (on->grad.empty()) return;
            const double* go = on->grad.data();
            for (std::int64_t b = 0; b < batch; ++b)
                for (std::int64_t i = 0; i < h; ++i)
                    for (std::int64_t j = 0; j < w; ++j)
                        for (std::int64_t u = 0; u < kh; ++u) {
                            const std::int64_t pi = i + u - ch2;
                            if (pi < 0 || pi >= h) continue;
                            for (std::int64_t v = 0; v < kw; ++v) {
                                const std::int64_t pj = j + v - cw2;
                                if (pj < 0 || pj >= w) continue;
                                const std::int64_t xoff = ((b * h + pi) * w + pj) * c;
                                const std::int64_t koff = (u * kw + v) * c;
                                const std::int64_t ooff = ((b * h + i) * w + j) * c;
                                if (xn->needs_grad()) {
                                    auto& gx = xn->grad_buffer();
                                    for (std::int64_t chn = 0; chn < c; ++chn)
                                        gx[static_cast<std::size_t>(xoff + chn)] +=
                                            go[ooff + chn] * kn->value[static_cast<std::size_t>(koff + chn)];
                                }
                                if (kn->needs_grad()) {
                                    auto& gk = kn->grad_buffer();
                                    for (std::int64_t chn = 0; chn < c; ++chn)
                                        gk[static_cast<std::size_t>(koff + chn)] +=
                                            go[ooff + chn] * xn->value[static_cast<std::size_t>(xoff + chn)];
                                }
                            }
                        }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normalization & softmax

// Scale-only RMS normalization over the last axis: y = x / rms(x) * gain.
inline Tensor rms_norm(const Tensor& x, const Tensor& gain, double eps = 1e-8) {
    const std::int64_t d = x.extent(-1);
    if (gain.shape().size() != 1 || gain.extent(0) != d)
        throw DimensionError("rms_norm: gain " + shape_str(gain.shape()) + " vs " + shape_str(x.shape()));
    const std::int64_t rows = x.size() / d;
    Tensor out = Tensor::uninit(x.shape());
    std::vector<double> inv_rms(static_cast<std::size_t>(rows));
    const double* px = x.data();
    const double* pg = gain.data();
    double* po = out.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        double ms = 0.0;
        for (std::int64_t j = 0; j < d; ++j) ms += px[r * d + j] * px[r * d + j];
        const double ir = 1.0 / std::sqrt(ms / static_cast<double>(d) + eps);
        inv_rms[static_cast<std::size_t>(r)] = ir;
        for (std::int64_t j = 0; j < d; ++j) po[r * d + j] = px[r * d + j] * ir * pg[j];
    }
    if (detail::track({&x, &gain})) {
        auto xn = x.node(), gn = gain.node(), on = out.node();
        auto ir_keep = std::make_shared<std::vector<double>>(std::move(inv_rms));
        detail::mark_and_record(out, [xn, gn, on, ir_keep, rows, d] {
            if (on->grad.empty()) return;
            const double* go = on->grad.data();
            for (std::int64_t r = 0; r < rows; ++r) {
                const double ir = (*ir_keep)[static_cast<std::size_t>(r)];
                const double* xr = xn->value.data() + r * d;
                const double* gr = go + r * d;
                if (xn->needs_grad()) {
                    double dot = 0.0;
                    for (std::int64_t j = 0; j < d; ++j) dot += gr[j] * gn->value[static_cast<std::size_t>(j)] * xr[j];
                    const double coef = ir * ir * ir * dot / static_cast<double>(d);
                    auto& gx = xn->grad_buffer();
                    for (std::int64_t j = 0; j < d; ++j)
                        gx[static_cast<std::size_t>(r * d + j)] +=
                            gr[j] * gn->value[static_cast<std::size_t>(j)] * ir - coef * xr[j];
                }
                if (gn->needs_grad()) {
                    auto& gg = gn->grad_buffer();
                    for (std::int64_t j = 0; j < d; ++j) gg[static_cast<std::size_t>(j)] += gr[j] * xr[j] * ir;
                }
            }
        });
    }
    return out;
}

inline Tensor softmax_last(const Tensor& x) {
    const std::int64_t d = x.extent(-1);
    const std::int64_t rows = x.size() / d;
    Tensor out = Tensor::uninit(x.shape());
    const double* px = x.data();
    double* po = out.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        double mx = px[r * d];
        for (std::int64_t j = 1; j < d; ++j) mx = std::max(mx, px[r * d + j]);
        double z = 0.0;
        for (std::int64_t j = 0; j < d; ++j) z += std::exp(px[r * d + j] - mx);
        for (std::int64_t j = 0; j < d; ++j) po[r * d + j] = std::exp(px[r * d + j] - mx) / z;
    }
    if (detail::track({&x})) {
        auto xn = x.node(), on = out.node();
        detail::mark_and_record(out, [xn, on, rows, d] {
            if (on->grad.empty() || !xn->needs_grad()) return;
            auto& g = xn->grad_buffer();
            for (std::int64_t r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (std::int64_t j = 0; j < d; ++j)
                    dot += on->grad[static_cast<std::size_t>(r * d + j)] * on->value[static_cast<std::size_t>(r * d + j)];
                for (std::int64_t j = 0; j < d; ++j)
                    g[static_cast<std::size_t>(r * d + j)] +=
                        on->value[static_cast<std::size_t>(r * d + j)] *
                        (on->grad[static_cast<std::size_t>(r * d + j)] - dot);
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gradient utilities

// Global-norm clip over a parameter set: rescale all grads by
// min(1, max_norm/||g||_2). Returns the pre-clip norm.
inline double clip_by_global_norm(std::vector<Tensor>& params, double max_norm) {
    double sq = 0.0;
    for (auto& p : params) {
        if (!p.has_grad()) continue;
        for (double v : p.grad()) sq += v * v;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (auto& p : params) {
            if (!p.has_grad()) continue;
            for (double& v : p.grad()) v *= s;
        }
    }
    return norm;
}

}  // namespace wavelit
