#pragma once

#include <cstring>
#include <thread>
#include <vector>

#include "wavelit/model.hpp"
#include "wavelit/objectives.hpp"
#include "wavelit/rollout.hpp"
#include "wavelit/synthdata.hpp"

// Evaluation harness shared by the CLI and the acceptance suite:
// teacher-forced one-step metrics over all sliding positions (median over
// trajectories) and autoregressive window rollouts.

namespace wavelit {

struct OneStepEval {
    double median_vrmse = 0.0;
    double median_rel_l2 = 0.0;
    double median_wavelet_l1 = 0.0;  // mean |dwt(pred) - dwt(target)| over subbands
    std::int64_t positions = 0;
};

inline OneStepEval one_step_eval(const WaveLiTModel& model, const std::vector<Trajectory>& trajs,
                                 int threads = 1) {
    const std::int64_t t = model.cfg.history;
    const std::int64_t h = model.cfg.grid_h, w = model.cfg.grid_w, c = model.cfg.channels;
    const std::int64_t frame = h * w * c;
    std::vector<double> traj_vrmse(trajs.size()), traj_rel(trajs.size()), traj_w1(trajs.size());
    std::vector<std::int64_t> traj_pos(trajs.size(), 0);
    auto eval_traj = [&](std::size_t ti) {
        NoGradScope ng;
        const auto& tr = trajs[ti];
        double acc_v = 0.0, acc_r = 0.0, acc_w = 0.0;
        std::int64_t cnt = 0;
        for (std::int64_t off = 0; off + t < tr.spec.n_steps; ++off) {
            Tensor hist = Tensor::uninit({1, t, h, w, c});
            std::memcpy(hist.data(), tr.frames.data() + off * frame,
                        sizeof(double) * static_cast<std::size_t>(frame * t));
            Tensor target = Tensor::uninit({1, 1, h, w, c});
            std::memcpy(target.data(), tr.frames.data() + (off + t) * frame,
                        sizeof(double) * static_cast<std::size_t>(frame));
            Tensor pred = model.forward(hist);
            acc_v += vrmse(pred, target);
            acc_r += relative_l2(pred, target);
            acc_w += l1(dwt2(pred, model.bank, model.cfg.dwt_levels).packed,
                        dwt2(target, model.bank, model.cfg.dwt_levels).packed)
                         .item();
            cnt += 1;
        }
        traj_vrmse[ti] = acc_v / static_cast<double>(cnt);
        traj_rel[ti] = acc_r / static_cast<double>(cnt);
        traj_w1[ti] = acc_w / static_cast<double>(cnt);
        traj_pos[ti] = cnt;
    };
    if (threads <= 1) {
        for (std::size_t ti = 0; ti < trajs.size(); ++ti) eval_traj(ti);
    } else {
        std::vector<std::thread> pool;
        const int width = std::min<int>(threads, static_cast<int>(trajs.size()));
        for (int k = 0; k < width; ++k)
            pool.emplace_back([&, k] {
                for (std::size_t ti = static_cast<std::size_t>(k); ti < trajs.size();
                     ti += static_cast<std::size_t>(width))
                    eval_traj(ti);
            });
        for (auto& th : pool) th.join();
    }
    OneStepEval out;
    out.median_vrmse = detail_rollout::median(traj_vrmse);
    out.median_rel_l2 = detail_rollout::median(traj_rel);
    out.median_wavelet_l1 = detail_rollout::median(traj_w1);
    for (auto p : traj_pos) out.positions += p;
    return out;
}

inline StepMap model_step_map(const WaveLiTModel& model) {
    return [&model](const Tensor& hist) { return model.forward(hist); };
}

inline RolloutReport eval_rollout(const WaveLiTModel& model, const std::vector<Trajectory>& trajs,
                                  const RolloutWindows& windows, std::int64_t max_steps,
                                  double divergence_vrmse = 1e3, int threads = 1) {
    const std::int64_t t = model.cfg.history;
    const std::int64_t h = model.cfg.grid_h, w = model.cfg.grid_w, c = model.cfg.channels;
    const std::int64_t frame = h * w * c;
    std::vector<Tensor> hists, targets;
    for (const auto& tr : trajs) {
        const std::int64_t avail = tr.spec.n_steps - t;
        const std::int64_t n = std::min<std::int64_t>(max_steps, avail);
        if (n < 1) throw ConfigError("eval_rollout: trajectory shorter than history+1");
        Tensor hist = Tensor::uninit({1, t, h, w, c});
        std::memcpy(hist.data(), tr.frames.data(), sizeof(double) * static_cast<std::size_t>(frame * t));
        Tensor tg = Tensor::uninit({n, h, w, c});
        std::memcpy(tg.data(), tr.frames.data() + t * frame,
                    sizeof(double) * static_cast<std::size_t>(frame * n));
        hists.push_back(hist);
        targets.push_back(tg);
    }
    return autoregressive_rollout(model_step_map(model), hists, targets, windows, threads,
                                  divergence_vrmse);
}

}  // namespace wavelit
