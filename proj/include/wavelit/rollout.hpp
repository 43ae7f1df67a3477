#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "wavelit/objectives.hpp"
#include "wavelit/rng.hpp"
#include "wavelit/tensor.hpp"

// Autoregressive rollout evaluation and the geometric error bound: per-step
// errors against ground truth, window aggregates (median over trajectories),
// divergence flagging, empirical Lipschitz estimation and verification of
// E_n <= eps (L^n - 1)/(L - 1).

namespace wavelit {

// One autoregressive step: consumes the current history [1,T,H,W,C], returns
// the next frame [1,1,H,W,C].
using StepMap = std::function<Tensor(const Tensor&)>;

struct RolloutStepRecord {
    std::int64_t trajectory_id = 0;
    std::int64_t step = 0;  // 1-based prediction index
    double vrmse_err = 0.0;
    double rel_l2 = 0.0;
    double abs_l2 = 0.0;
    bool diverged = false;
};

struct RolloutWindows {
    std::int64_t short_lo = 1, short_hi = 20;
    std::int64_t long_lo = 21, long_hi = 60;
};

struct RolloutReport {
    std::vector<RolloutStepRecord> steps;
    double one_step_vrmse = 0.0;   // median over trajectories of E_1
    double short_vrmse = 0.0;      // median of per-trajectory mean over [short_lo, short_hi]
    double long_vrmse = 0.0;       // median of per-trajectory mean over [long_lo, long_hi]
    std::int64_t trajectories = 0;
    std::int64_t diverged_count = 0;  // excluded from the medians
    RolloutWindows windows;
};

namespace detail_rollout {

inline Tensor shift_history(const Tensor& hist, const Tensor& frame) {
    // non-differentiable evaluation path: plain buffer shuffle
    const std::int64_t t = hist.extent(1);
    const std::int64_t frame_sz = hist.size() / t;
    Tensor out = Tensor::uninit(hist.shape());
    std::memcpy(out.data(), hist.data() + frame_sz, sizeof(double) * static_cast<std::size_t>((t - 1) * frame_sz));
    std::memcpy(out.data() + (t - 1) * frame_sz, frame.data(), sizeof(double) * static_cast<std::size_t>(frame_sz));
    return out;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail_rollout

// Divergence rule: any non-finite value or step VRMSE above the threshold
// marks the trajectory diverged from that step on.
inline std::vector<RolloutStepRecord> rollout_trajectory(const StepMap& step_fn, Tensor history,
                                                         const Tensor& targets, std::int64_t trajectory_id,
                                                         double divergence_vrmse = 1e3) {
    const std::int64_t n_steps = targets.extent(0);
    const std::int64_t frame_sz = targets.size() / n_steps;
    std::vector<RolloutStepRecord> records;
    bool diverged = false;
    NoGradScope ng;
    for (std::int64_t s = 0; s < n_steps; ++s) {
        Tensor pred = step_fn(history);
        Tensor target = Tensor::uninit(pred.shape());
        std::memcpy(target.data(), targets.data() + s * frame_sz,
                    sizeof(double) * static_cast<std::size_t>(frame_sz));
        RolloutStepRecord rec;
        rec.trajectory_id = trajectory_id;
        rec.step = s + 1;
        bool finite = true;
        double sq = 0.0;
        for (std::int64_t i = 0; i < pred.size(); ++i) {
            if (!std::isfinite(pred[i])) {
                finite = false;
                break;
            }
            const double d = pred[i] - target[i];
            sq += d * d;
        }
        if (finite) {
            rec.abs_l2 = std::sqrt(sq);
            rec.vrmse_err = vrmse(pred, target);
            rec.rel_l2 = relative_l2(pred, target);
            if (rec.vrmse_err > divergence_vrmse) diverged = true;
        } else {
            diverged = true;
        }
        rec.diverged = diverged || !finite;
        records.push_back(rec);
        if (rec.diverged) break;
        history = detail_rollout::shift_history(history, pred);
    }
    return records;
}

inline RolloutReport aggregate_rollout(const std::vector<std::vector<RolloutStepRecord>>& per_traj,
                                       const RolloutWindows& windows) {
    RolloutReport rep;
    rep.windows = windows;
    rep.trajectories = static_cast<std::int64_t>(per_traj.size());
    std::vector<double> one, short_w, long_w;
    for (const auto& recs : per_traj) {
        for (const auto& r : recs) rep.steps.push_back(r);
        const bool diverged = !recs.empty() && recs.back().diverged;
        if (diverged) {
            rep.diverged_count += 1;
            continue;
        }
        double s_acc = 0.0, l_acc = 0.0;
        std::int64_t s_cnt = 0, l_cnt = 0;
        for (const auto& r : recs) {
            if (r.step == 1) one.push_back(r.vrmse_err);
            if (r.step >= windows.short_lo && r.step <= windows.short_hi) {
                s_acc += r.vrmse_err;
                s_cnt += 1;
            }
            if (r.step >= windows.long_lo && r.step <= windows.long_hi) {
                l_acc += r.vrmse_err;
                l_cnt += 1;
            }
        }
        if (s_cnt > 0) short_w.push_back(s_acc / static_cast<double>(s_cnt));
        if (l_cnt > 0) long_w.push_back(l_acc / static_cast<double>(l_cnt));
    }
    rep.one_step_vrmse = detail_rollout::median(one);
    rep.short_vrmse = detail_rollout::median(short_w);
    rep.long_vrmse = detail_rollout::median(long_w);
    return rep;
}

// Rollouts across trajectories are independent; `threads` > 1 evaluates them
// in parallel with results placed in deterministic slots.
inline RolloutReport autoregressive_rollout(const StepMap& step_fn, const std::vector<Tensor>& histories,
                                            const std::vector<Tensor>& targets,
                                            const RolloutWindows& windows = {}, int threads = 1,
                                            double divergence_vrmse = 1e3) {
    if (histories.size() != targets.size())
        throw DimensionError("autoregressive_rollout: histories vs targets count mismatch");
    std::vector<std::vector<RolloutStepRecord>> per_traj(histories.size());
    if (threads <= 1) {
        for (std::size_t i = 0; i < histories.size(); ++i)
            per_traj[i] = rollout_trajectory(step_fn, histories[i], targets[i],
                                             static_cast<std::int64_t>(i), divergence_vrmse);
    } else {
        std::vector<std::thread> pool;
        std::size_t next = 0;
        const std::size_t n = histories.size();
        const int width = std::min<int>(threads, static_cast<int>(n));
        for (int tix = 0; tix < width; ++tix) {
            pool.emplace_back([&, tix] {
                for (std::size_t i = static_cast<std::size_t>(tix); i < n; i += static_cast<std::size_t>(width))
                    per_traj[i] = rollout_trajectory(step_fn, histories[i], targets[i],
                                                     static_cast<std::int64_t>(i), divergence_vrmse);
            });
        }
        for (auto& th : pool) th.join();
        (void)next;
    }
    return aggregate_rollout(per_traj, windows);
}

inline std::string rollout_report_csv(const RolloutReport& rep) {
    std::ostringstream os;
    os << "trajectory_id,step,vrmse,rel_l2,diverged\n";
    char buf[160];
    for (const auto& r : rep.steps) {
        std::snprintf(buf, sizeof(buf), "%lld,%lld,%.17g,%.17g,%d\n", static_cast<long long>(r.trajectory_id),
                      static_cast<long long>(r.step), r.vrmse_err, r.rel_l2, r.diverged ? 1 : 0);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "window,one_step,,%.17g,\n", rep.one_step_vrmse);
    os << buf;
    std::snprintf(buf, sizeof(buf), "window,steps_%lld_%lld,,%.17g,\n",
                  static_cast<long long>(rep.windows.short_lo), static_cast<long long>(rep.windows.short_hi),
                  rep.short_vrmse);
    os << buf;
    std::snprintf(buf, sizeof(buf), "window,steps_%lld_%lld,,%.17g,\n",
                  static_cast<long long>(rep.windows.long_lo), static_cast<long long>(rep.windows.long_hi),
                  rep.long_vrmse);
    os << buf;
    std::snprintf(buf, sizeof(buf), "diverged,%lld,of,%lld,\n", static_cast<long long>(rep.diverged_count),
                  static_cast<long long>(rep.trajectories));
    os << buf;
    return os.str();
}

// ---------------------------------------------------------------------------
// Geometric error bound (the L -> 1 limit switches to the n*eps branch).

inline double error_bound(double eps, double lip, std::int64_t n, double branch_tol = 1e-9) {
    if (eps < 0.0 || lip <= 0.0 || n < 0) throw UsageError("error_bound: need eps >= 0, L > 0, n >= 0");
    if (std::abs(lip - 1.0) < branch_tol) return static_cast<double>(n) * eps;
    return eps * (std::pow(lip, static_cast<double>(n)) - 1.0) / (lip - 1.0);
}

// Empirical lower bound on the Lipschitz constant of F: max over probes of
// ||F(x) - F(x + d)|| / ||d|| with random directions of norm `radius`.
inline double estimate_lipschitz(const std::function<Tensor(const Tensor&)>& map,
                                 const std::vector<Tensor>& probes, double radius, Rng& rng,
                                 int directions_per_probe = 4) {
    if (radius <= 0.0) throw UsageError("estimate_lipschitz: radius must be > 0");
    double best = 0.0;
    for (const auto& x : probes) {
        Tensor fx = map(x);
        for (int d = 0; d < directions_per_probe; ++d) {
            Tensor delta = Tensor::randn(x.shape(), rng);
            double nrm = 0.0;
            for (std::int64_t i = 0; i < delta.size(); ++i) nrm += delta[i] * delta[i];
            nrm = std::sqrt(nrm);
            if (nrm == 0.0) continue;
            Tensor xp = Tensor::uninit(x.shape());
            for (std::int64_t i = 0; i < x.size(); ++i) xp.data()[i] = x[i] + delta[i] * radius / nrm;
            Tensor fxp = map(xp);
            double diff = 0.0;
            for (std::int64_t i = 0; i < fx.size(); ++i) {
                const double dd = fx[i] - fxp[i];
                diff += dd * dd;
            }
            best = std::max(best, std::sqrt(diff) / radius);
        }
    }
    return best;
}

// Rolls a ground-truth map f and a surrogate F from the same start and
// asserts E_n <= error_bound(eps, lip, n) for every n.
struct BoundVerification {
    bool passed = true;
    std::int64_t first_violation = -1;
    std::vector<double> errors;  // E_1..E_n
};

inline BoundVerification bound_verification(const std::function<Tensor(const Tensor&)>& truth,
                                            const std::function<Tensor(const Tensor&)>& surrogate,
                                            const Tensor& start, double eps, double lip,
                                            std::int64_t n_steps, double slack = 1e-9) {
    BoundVerification out;
    Tensor x = start;
    Tensor xhat = start;
    for (std::int64_t n = 1; n <= n_steps; ++n) {
        x = truth(x);
        xhat = surrogate(xhat);
        double sq = 0.0;
        for (std::int64_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - xhat[i];
            sq += d * d;
        }
        const double err = std::sqrt(sq);
        out.errors.push_back(err);
        if (err > error_bound(eps, lip, n) + slack && out.first_violation < 0) {
            out.passed = false;
            out.first_violation = n;
        }
    }
    return out;
}

}  // namespace wavelit
