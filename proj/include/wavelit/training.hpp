#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "wavelit/checkpoint.hpp"
#include "wavelit/model.hpp"
#include "wavelit/objectives.hpp"
#include "wavelit/synthdata.hpp"

// Optimizer, schedule, EMA, the teacher-forced pretraining loop and the four
// rollout-finetuning strategies. All randomness flows through two named
// sub-streams (batch sampling, teacher-forcing coins) whose counters are
// checkpointed, so an interrupted run resumes bit-exactly.

namespace wavelit {

// ---------------------------------------------------------------------------
// Learning-rate schedule: linear warmup then exponential decay with a
// continuous (non-staircase) exponent by default.

struct ScheduleConfig {
    double warmup_start = 1e-7;
    double peak = 1e-3;
    std::int64_t warmup_steps = 5000;
    double decay_rate = 0.99;
    std::int64_t transition_steps = 2000;
    bool staircase = false;
};

inline double lr_at(std::int64_t step, const ScheduleConfig& cfg) {
    if (step < 0) throw UsageError("lr_at: negative step");
    if (step < cfg.warmup_steps) {
        const double t = static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
        return cfg.warmup_start + (cfg.peak - cfg.warmup_start) * t;
    }
    double exponent = static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(cfg.transition_steps);
    if (cfg.staircase) exponent = std::floor(exponent);
    return cfg.peak * std::pow(cfg.decay_rate, exponent);
}

// ---------------------------------------------------------------------------
// AdamW with decoupled weight decay.

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

struct OptimizerState {
    AdamWConfig cfg;
    std::int64_t step = 0;
    std::vector<std::vector<double>> m, v;

    static OptimizerState create(const ParamStore& params, const AdamWConfig& cfg) {
        OptimizerState st;
        st.cfg = cfg;
        for (const auto& [_, t] : params.items) {
            st.m.emplace_back(static_cast<std::size_t>(t.size()), 0.0);
            st.v.emplace_back(static_cast<std::size_t>(t.size()), 0.0);
        }
        return st;
    }
};

inline void adamw_step(ParamStore& params, OptimizerState& st, double lr) {
    if (st.m.size() != params.items.size())
        throw UsageError("adamw_step: optimizer state does not match parameter set");
    st.step += 1;
    const double b1 = st.cfg.beta1, b2 = st.cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
    for (std::size_t pi = 0; pi < params.items.size(); ++pi) {
        auto& [name, t] = params.items[pi];
        if (!t.has_grad()) {
            // decay still applies to parameters that saw no gradient
            for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] -= lr * st.cfg.weight_decay * t.data()[i];
            continue;
        }
        const auto& g = t.grad();
        auto& m = st.m[pi];
        auto& v = st.v[pi];
        for (std::int64_t i = 0; i < t.size(); ++i) {
            const double gi = g[static_cast<std::size_t>(i)];
            if (!std::isfinite(gi))
                throw NumericError("adamw_step: non-finite gradient in parameter '" + name + "'");
            m[static_cast<std::size_t>(i)] = b1 * m[static_cast<std::size_t>(i)] + (1.0 - b1) * gi;
            v[static_cast<std::size_t>(i)] = b2 * v[static_cast<std::size_t>(i)] + (1.0 - b2) * gi * gi;
            const double mhat = m[static_cast<std::size_t>(i)] / bc1;
            const double vhat = v[static_cast<std::size_t>(i)] / bc2;
            t.data()[i] -= lr * (mhat / (std::sqrt(vhat) + st.cfg.eps) + st.cfg.weight_decay * t.data()[i]);
        }
    }
}

// ---------------------------------------------------------------------------
// Exponential moving average of parameters, applied at evaluation.

struct EmaState {
    double decay = 0.999;
    std::vector<std::vector<double>> shadow;

    static EmaState create(const ParamStore& params, double decay) {
        EmaState st;
        st.decay = decay;
        for (const auto& [_, t] : params.items)
            st.shadow.emplace_back(t.values().begin(), t.values().end());
        return st;
    }

    void update(const ParamStore& params) {
        for (std::size_t pi = 0; pi < params.items.size(); ++pi) {
            const auto& t = params.items[pi].second;
            auto& s = shadow[pi];
            for (std::int64_t i = 0; i < t.size(); ++i)
                s[static_cast<std::size_t>(i)] = decay * s[static_cast<std::size_t>(i)] + (1.0 - decay) * t[i];
        }
    }

    void copy_into(ParamStore& params) const {
        for (std::size_t pi = 0; pi < params.items.size(); ++pi) {
            auto& t = params.items[pi].second;
            for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = shadow[pi][static_cast<std::size_t>(i)];
        }
    }
};

inline void ema_update(EmaState& ema, const ParamStore& params) { ema.update(params); }

// ---------------------------------------------------------------------------
// Sliding-window dataset over generated trajectories.

struct WindowDataset {
    std::vector<Trajectory> trajs;
    std::int64_t history = 2;

    std::int64_t grid_h() const { return trajs.at(0).spec.h; }
    std::int64_t grid_w() const { return trajs.at(0).spec.w; }
    std::int64_t channels() const { return trajs.at(0).spec.channels(); }

    // One (history -> next frame) training pair from trajectory ti at offset.
    void window(std::int64_t ti, std::int64_t offset, double* input, double* target) const {
        const auto& tr = trajs[static_cast<std::size_t>(ti)];
        const std::int64_t frame = tr.spec.h * tr.spec.w * tr.spec.channels();
        std::memcpy(input, tr.frames.data() + offset * frame,
                    sizeof(double) * static_cast<std::size_t>(frame * history));
        std::memcpy(target, tr.frames.data() + (offset + history) * frame,
                    sizeof(double) * static_cast<std::size_t>(frame));
    }

    std::pair<Tensor, Tensor> sample_batch(std::int64_t batch, Rng& rng) const {
        const std::int64_t h = grid_h(), w = grid_w(), c = channels();
        Tensor x = Tensor::uninit({batch, history, h, w, c});
        Tensor y = Tensor::uninit({batch, 1, h, w, c});
        const std::int64_t frame = h * w * c;
        for (std::int64_t b = 0; b < batch; ++b) {
            const auto ti = static_cast<std::int64_t>(rng.below(trajs.size()));
            const std::int64_t max_off = trajs[static_cast<std::size_t>(ti)].spec.n_steps - history - 1;
            if (max_off < 0) throw ConfigError("dataset: trajectory shorter than history+1");
            const auto off = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(max_off + 1)));
            window(ti, off, x.data() + b * frame * history, y.data() + b * frame);
        }
        return {x, y};
    }
};

// ---------------------------------------------------------------------------
// Metrics rows (CSV schema: step,split,loss_mse,loss_wavelet,lr,grad_norm,
// vrmse_median,rel_l2)

struct MetricsRow {
    std::int64_t step = 0;
    std::string split;
    double loss_mse = 0.0;
    double loss_wavelet = 0.0;
    double lr = 0.0;
    double grad_norm = 0.0;
    double vrmse_median = 0.0;
    double rel_l2 = 0.0;
};

inline std::string metrics_csv_header() {
    return "step,split,loss_mse,loss_wavelet,lr,grad_norm,vrmse_median,rel_l2";
}

inline std::string to_csv(const MetricsRow& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%lld,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                  static_cast<long long>(r.step), r.split.c_str(), r.loss_mse, r.loss_wavelet, r.lr,
                  r.grad_norm, r.vrmse_median, r.rel_l2);
    return buf;
}

// ---------------------------------------------------------------------------
// Training state bundle (checkpointable).

struct TrainConfig {
    ScheduleConfig schedule;
    AdamWConfig adamw;
    LossWeights loss;
    std::int64_t steps = 1000;
    std::int64_t batch_size = 4;
    double clip_norm = 1.0;
    double ema_decay = 0.999;
    std::uint64_t seed = 0;
    std::int64_t checkpoint_every = 0;  // 0: only at the end
    bool wavelet_loss_sum = false;
};

struct FinetuneConfig {
    std::string strategy = "scheduled_sampling";  // bptt | causal_bptt | pushforward
    int unroll = 8;
    double epsilon = 1.0;
    double tf_start = 1.0;
    double tf_end = 0.1;

    void validate() const {
        if (strategy != "scheduled_sampling" && strategy != "bptt" && strategy != "causal_bptt" &&
            strategy != "pushforward")
            throw ConfigError("finetune: unknown strategy '" + strategy + "'");
        if (unroll < 1) throw ConfigError("finetune: unroll must be >= 1");
        if (epsilon < 0.0) throw ConfigError("finetune: epsilon must be >= 0");
    }
};

struct TrainingState {
    OptimizerState opt;
    EmaState ema;
    Rng data_rng;
    Rng tf_rng;
    std::int64_t step = 0;

    static TrainingState create(const ParamStore& params, const TrainConfig& cfg) {
        TrainingState st;
        st.opt = OptimizerState::create(params, cfg.adamw);
        st.ema = EmaState::create(params, cfg.ema_decay);
        st.data_rng = Rng::stream(cfg.seed, "data");
        st.tf_rng = Rng::stream(cfg.seed, "teacher-forcing");
        return st;
    }
};

inline double bits_as_double(std::uint64_t v) {
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

inline std::uint64_t double_as_bits(double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    return v;
}

inline std::vector<CheckpointRecord> training_records(const ParamStore& params, const TrainingState& st) {
    std::vector<CheckpointRecord> recs;
    for (const auto& [name, t] : params.items)
        recs.push_back({"param/" + name, t.shape(), t.values()});
    for (std::size_t pi = 0; pi < params.items.size(); ++pi) {
        recs.push_back({"adam_m/" + params.items[pi].first, params.items[pi].second.shape(), st.opt.m[pi]});
        recs.push_back({"adam_v/" + params.items[pi].first, params.items[pi].second.shape(), st.opt.v[pi]});
        recs.push_back({"ema/" + params.items[pi].first, params.items[pi].second.shape(), st.ema.shadow[pi]});
    }
    recs.push_back({"meta/state", {6},
                    {static_cast<double>(st.step), static_cast<double>(st.opt.step),
                     bits_as_double(st.data_rng.key), bits_as_double(st.data_rng.counter),
                     bits_as_double(st.tf_rng.key), bits_as_double(st.tf_rng.counter)}});
    return recs;
}

inline void save_training_state(const std::string& path, const ParamStore& params, const TrainingState& st) {
    save_checkpoint(path, training_records(params, st));
}

// Parameters-only archive (e.g. the separate EMA checkpoint).
inline void save_params(const std::string& path, const ParamStore& params) {
    std::vector<CheckpointRecord> recs;
    for (const auto& [name, t] : params.items)
        recs.push_back({"param/" + name, t.shape(), t.values()});
    save_checkpoint(path, recs);
}

inline void load_training_state(const std::string& path, ParamStore& params, TrainingState& st) {
    auto recs = load_checkpoint(path);
    std::map<std::string, const CheckpointRecord*> by_name;
    for (const auto& r : recs) by_name[r.name] = &r;
    auto need = [&](const std::string& name) -> const CheckpointRecord& {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw ConfigError("checkpoint: missing record '" + name + "'");
        return *it->second;
    };
    for (std::size_t pi = 0; pi < params.items.size(); ++pi) {
        auto& [name, t] = params.items[pi];
        const auto& pr = need("param/" + name);
        if (pr.shape != t.shape())
            throw ConfigError("checkpoint: shape mismatch for '" + name + "'");
        std::copy(pr.data.begin(), pr.data.end(), t.data());
        st.opt.m[pi] = need("adam_m/" + name).data;
        st.opt.v[pi] = need("adam_v/" + name).data;
        st.ema.shadow[pi] = need("ema/" + name).data;
    }
    const auto& meta = need("meta/state").data;
    st.step = static_cast<std::int64_t>(meta[0]);
    st.opt.step = static_cast<std::int64_t>(meta[1]);
    st.data_rng.key = double_as_bits(meta[2]);
    st.data_rng.counter = double_as_bits(meta[3]);
    st.tf_rng.key = double_as_bits(meta[4]);
    st.tf_rng.counter = double_as_bits(meta[5]);
}

// Load just the parameter records, ignoring optimizer/EMA state.
inline void load_params(const std::string& path, ParamStore& params, const std::string& prefix = "param/") {
    auto recs = load_checkpoint(path);
    std::map<std::string, const CheckpointRecord*> by_name;
    for (const auto& r : recs) by_name[r.name] = &r;
    for (auto& [name, t] : params.items) {
        auto it = by_name.find(prefix + name);
        if (it == by_name.end()) throw ConfigError("checkpoint: missing record '" + prefix + name + "'");
        if (it->second->shape != t.shape()) throw ConfigError("checkpoint: shape mismatch for '" + name + "'");
        std::copy(it->second->data.begin(), it->second->data.end(), t.data());
    }
}

// ---------------------------------------------------------------------------
// Teacher-forced pretraining.

inline MetricsRow train_step_metrics(std::int64_t step, const std::string& split,
                                     const CombinedLossParts& parts, double lr, double grad_norm,
                                     const Tensor& pred, const Tensor& target) {
    MetricsRow row;
    row.step = step;
    row.split = split;
    row.loss_mse = parts.mse_value;
    row.loss_wavelet = parts.wavelet_value;
    row.lr = lr;
    row.grad_norm = grad_norm;
    row.vrmse_median = vrmse(pred, target);
    row.rel_l2 = relative_l2(pred, target);
    return row;
}

inline std::vector<MetricsRow> pretrain(WaveLiTModel& model, const WindowDataset& data,
                                        const TrainConfig& cfg, TrainingState& st,
                                        const std::function<void(std::int64_t)>& on_checkpoint = {}) {
    std::vector<MetricsRow> rows;
    auto params = model.store.tensors();
    while (st.step < cfg.steps) {
        auto [x, y] = data.sample_batch(cfg.batch_size, st.data_rng);
        model.store.zero_grads();
        CombinedLossParts parts;
        Tensor pred;
        {
            TapeScope scope;
            pred = model.forward(x);
            parts = combined_loss_parts(pred, y, model.bank, cfg.loss, model.cfg.dwt_levels,
                                        cfg.wavelet_loss_sum);
            if (!std::isfinite(parts.total.item()))
                throw NumericError("pretrain: non-finite loss at step " + std::to_string(st.step));
            scope.tape.backward(parts.total);
        }
        const double gnorm = clip_by_global_norm(params, cfg.clip_norm);
        const double lr = lr_at(st.step, cfg.schedule);
        adamw_step(model.store, st.opt, lr);
        st.ema.update(model.store);
        rows.push_back(train_step_metrics(st.step, "train", parts, lr, gnorm, pred, y));
        st.step += 1;
        if (on_checkpoint && cfg.checkpoint_every > 0 && st.step % cfg.checkpoint_every == 0)
            on_checkpoint(st.step);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Rollout finetuning.

// Teacher-forcing probability: exactly tf_start at step 0 and tf_end at the
// final configured step, linear in between.
inline double tf_probability(const FinetuneConfig& ft, std::int64_t step, std::int64_t total_steps) {
    if (total_steps <= 1) return ft.tf_end;
    const double t = static_cast<double>(step) / static_cast<double>(total_steps - 1);
    return ft.tf_start + (ft.tf_end - ft.tf_start) * t;
}

// w_i = exp(-eps * sum_{k<i} L_k) over detached per-step losses.
inline std::vector<double> causal_weights(const std::vector<double>& losses, double eps) {
    std::vector<double> w(losses.size());
    double cum = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        w[i] = std::exp(-eps * cum);
        cum += losses[i];
    }
    return w;
}

namespace detail {

// history [1,T,H,W,C] advanced by one frame [1,1,H,W,C]; differentiable so
// gradients thread through the rollout when the frame is attached.
inline Tensor advance_history(const Tensor& hist, const Tensor& frame) {
    const std::int64_t t = hist.extent(1);
    Tensor ph = permute(hist, {0, 2, 3, 4, 1});
    Tensor tail = slice_last(ph, 1, t - 1);
    Tensor pf = permute(frame, {0, 2, 3, 4, 1});
    Tensor cat = concat_last({tail, pf});
    return permute(cat, {0, 4, 1, 2, 3});
}

}  // namespace detail

struct UnrollResult {
    Tensor loss;                      // scalar, differentiable
    std::vector<double> step_losses;  // detached per-step combined losses
};

// Build the K-step rollout loss graph for one sample under the configured
// strategy. `history` is [1,T,H,W,C]; `targets` holds K frames [K,H,W,C].
inline UnrollResult unroll_rollout_loss(const WaveLiTModel& model, const Tensor& history,
                                        const Tensor& targets, const FinetuneConfig& ft,
                                        const LossWeights& weights, double tf_prob, Rng& tf_rng) {
    ft.validate();
    const std::int64_t k = ft.unroll;
    if (targets.extent(0) < k)
        throw ConfigError("finetune: unroll K=" + std::to_string(k) + " exceeds " +
                          std::to_string(targets.extent(0)) + " available target frames");
    const std::int64_t h = model.cfg.grid_h, w = model.cfg.grid_w, c = model.cfg.channels;
    const std::int64_t frame_sz = h * w * c;
    UnrollResult res;
    Tensor hist = history;
    Tensor total;
    const bool pushforward = ft.strategy == "pushforward";
    for (std::int64_t i = 0; i < k; ++i) {
        Tensor target = Tensor::uninit({1, 1, h, w, c});
        std::memcpy(target.data(), targets.data() + i * frame_sz,
                    sizeof(double) * static_cast<std::size_t>(frame_sz));
        Tensor pred;
        Tensor step_loss;
        const bool last = (i + 1 == k);
        if (pushforward && !last) {
            NoGradScope ng;
            pred = model.forward(hist);
            res.step_losses.push_back(
                combined_loss(pred, target, model.bank, weights, model.cfg.dwt_levels).item());
            hist = detail::advance_history(hist, pred.detach());
            continue;
        }
        pred = model.forward(hist);
        step_loss = combined_loss(pred, target, model.bank, weights, model.cfg.dwt_levels);
        res.step_losses.push_back(step_loss.item());

        Tensor weighted = step_loss;
        if (ft.strategy == "causal_bptt") {
            double cum = 0.0;
            for (std::size_t p = 0; p + 1 < res.step_losses.size(); ++p) cum += res.step_losses[p];
            weighted = scale(step_loss, std::exp(-ft.epsilon * cum));
        }
        total = total.defined() ? add(total, weighted) : weighted;

        if (last) break;
        if (ft.strategy == "scheduled_sampling") {
            const bool teacher = tf_rng.uniform() < tf_prob;
            hist = detail::advance_history(hist, teacher ? target : pred);
        } else {  // bptt, causal_bptt stay fully autoregressive
            hist = detail::advance_history(hist, pred);
        }
    }
    res.loss = total;
    return res;
}

inline std::vector<MetricsRow> rollout_finetune(WaveLiTModel& model, const WindowDataset& data,
                                                const TrainConfig& cfg, const FinetuneConfig& ft,
                                                TrainingState& st,
                                                const std::function<void(std::int64_t)>& on_checkpoint = {}) {
    ft.validate();
    const std::int64_t t = model.cfg.history;
    const std::int64_t h = model.cfg.grid_h, w = model.cfg.grid_w, c = model.cfg.channels;
    const std::int64_t frame_sz = h * w * c;
    std::vector<MetricsRow> rows;
    auto params = model.store.tensors();
    while (st.step < cfg.steps) {
        const double tf_prob = tf_probability(ft, st.step, cfg.steps);
        model.store.zero_grads();
        double loss_value = 0.0;
        double mse_proxy = 0.0;
        {
            TapeScope scope;
            Tensor batch_loss;
            for (std::int64_t b = 0; b < cfg.batch_size; ++b) {
                const auto ti = static_cast<std::int64_t>(st.data_rng.below(data.trajs.size()));
                const auto& tr = data.trajs[static_cast<std::size_t>(ti)];
                const std::int64_t max_off = tr.spec.n_steps - t - ft.unroll;
                if (max_off < 0)
                    throw ConfigError("finetune: trajectory too short for history + K unroll");
                const auto off = static_cast<std::int64_t>(
                    st.data_rng.below(static_cast<std::uint64_t>(max_off + 1)));
                Tensor hist = Tensor::uninit({1, t, h, w, c});
                std::memcpy(hist.data(), tr.frames.data() + off * frame_sz,
                            sizeof(double) * static_cast<std::size_t>(frame_sz * t));
                Tensor targets = Tensor::uninit({ft.unroll, h, w, c});
                std::memcpy(targets.data(), tr.frames.data() + (off + t) * frame_sz,
                            sizeof(double) * static_cast<std::size_t>(frame_sz * ft.unroll));
                auto unrolled = unroll_rollout_loss(model, hist, targets, ft, cfg.loss, tf_prob, st.tf_rng);
                batch_loss = batch_loss.defined() ? add(batch_loss, unrolled.loss) : unrolled.loss;
                mse_proxy += unrolled.step_losses.back();
            }
            batch_loss = scale(batch_loss, 1.0 / static_cast<double>(cfg.batch_size));
            loss_value = batch_loss.item();
            if (!std::isfinite(loss_value))
                throw NumericError("finetune: non-finite loss at step " + std::to_string(st.step));
            scope.tape.backward(batch_loss);
        }
        const double gnorm = clip_by_global_norm(params, cfg.clip_norm);
        const double lr = lr_at(st.step, cfg.schedule);
        adamw_step(model.store, st.opt, lr);
        st.ema.update(model.store);
        MetricsRow row;
        row.step = st.step;
        row.split = "finetune";
        row.loss_mse = loss_value;
        row.loss_wavelet = mse_proxy / static_cast<double>(cfg.batch_size);
        row.lr = lr;
        row.grad_norm = gnorm;
        rows.push_back(row);
        st.step += 1;
        if (on_checkpoint && cfg.checkpoint_every > 0 && st.step % cfg.checkpoint_every == 0)
            on_checkpoint(st.step);
    }
    return rows;
}

}  // namespace wavelit
