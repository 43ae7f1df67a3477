#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "wavelit/model.hpp"
#include "wavelit/rollout.hpp"
#include "wavelit/synthdata.hpp"
#include "wavelit/training.hpp"

// Run configuration: a strict JSON schema (unknown keys rejected, every
// field defaulted) covering model, training, finetuning, data generation and
// evaluation. `wavelit config --print-defaults` dumps the full default tree.

namespace wavelit {

struct DataSpecConfig {
    TrajectorySpec base;
    std::int64_t count = 8;        // trajectories generated from seed_base..seed_base+count-1
    std::uint64_t seed_base = 0;
};

struct EvalConfig {
    RolloutWindows windows;
    std::int64_t rollout_steps = 20;
    double divergence_vrmse = 1e3;
    std::int64_t n_trajectories = 4;  // held-out trajectories for eval/ablate
};

struct RunConfig {
    std::uint64_t seed = 0;
    WaveLiTConfig model;
    TrainConfig training;
    FinetuneConfig finetune;
    std::int64_t finetune_steps = 0;  // 0: training.steps / 10
    std::vector<DataSpecConfig> data;
    EvalConfig eval;

    std::int64_t effective_finetune_steps() const {
        return finetune_steps > 0 ? finetune_steps : std::max<std::int64_t>(1, training.steps / 10);
    }
};

namespace detail_config {

using nlohmann::json;

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline void read_mixer(const json& j, MixerAblation& m) {
    check_keys(j, {"ridge", "kernel_gate", "lepe", "cpe", "rope", "mila_block", "attention"},
               "model.mixer");
    read(j, "ridge", m.ridge);
    read(j, "kernel_gate", m.kernel_gate);
    read(j, "lepe", m.lepe);
    read(j, "cpe", m.cpe);
    read(j, "rope", m.rope);
    read(j, "mila_block", m.mila_block);
    read(j, "attention", m.attention);
    if (m.attention != "linear" && m.attention != "softmax")
        throw ConfigError("config: model.mixer.attention must be 'linear' or 'softmax'");
}

inline void read_model(const json& j, WaveLiTConfig& m) {
    check_keys(j,
               {"name", "embed_dim", "depth", "fpn_levels", "wavelet", "dwt_levels", "channels",
                "out_channels", "history", "grid_h", "grid_w", "heads", "predict_delta", "mixer"},
               "model");
    if (j.contains("name")) m = named_config(j.at("name").get<std::string>());
    read(j, "embed_dim", m.embed_dim);
    read(j, "depth", m.depth);
    read(j, "fpn_levels", m.fpn_levels);
    read(j, "wavelet", m.wavelet);
    read(j, "dwt_levels", m.dwt_levels);
    read(j, "channels", m.channels);
    read(j, "out_channels", m.out_channels);
    read(j, "history", m.history);
    read(j, "grid_h", m.grid_h);
    read(j, "grid_w", m.grid_w);
    read(j, "heads", m.heads);
    read(j, "predict_delta", m.predict_delta);
    if (j.contains("mixer")) read_mixer(j.at("mixer"), m.mixer);
}

inline void read_schedule(const json& j, ScheduleConfig& s) {
    check_keys(j, {"warmup_start", "peak", "warmup_steps", "decay_rate", "transition_steps", "staircase"},
               "training.schedule");
    read(j, "warmup_start", s.warmup_start);
    read(j, "peak", s.peak);
    read(j, "warmup_steps", s.warmup_steps);
    read(j, "decay_rate", s.decay_rate);
    read(j, "transition_steps", s.transition_steps);
    read(j, "staircase", s.staircase);
    if (!(s.peak > s.warmup_start) || !(s.warmup_start > 0.0))
        throw ConfigError("config: schedule requires peak > warmup_start > 0");
}

inline void read_adamw(const json& j, AdamWConfig& a) {
    check_keys(j, {"beta1", "beta2", "eps", "weight_decay"}, "training.adamw");
    read(j, "beta1", a.beta1);
    read(j, "beta2", a.beta2);
    read(j, "eps", a.eps);
    read(j, "weight_decay", a.weight_decay);
}

inline void read_loss(const json& j, LossWeights& w) {
    check_keys(j, {"lambda_mse", "lambda_l1"}, "loss");
    read(j, "lambda_mse", w.lambda_mse);
    read(j, "lambda_l1", w.lambda_l1);
    if (w.lambda_mse < 0.0 || w.lambda_l1 < 0.0) throw ConfigError("config: loss weights must be >= 0");
}

inline void read_training(const json& j, TrainConfig& t) {
    check_keys(j,
               {"steps", "batch_size", "clip_norm", "ema_decay", "checkpoint_every", "wavelet_loss_sum",
                "schedule", "adamw"},
               "training");
    read(j, "steps", t.steps);
    read(j, "batch_size", t.batch_size);
    read(j, "clip_norm", t.clip_norm);
    read(j, "ema_decay", t.ema_decay);
    read(j, "checkpoint_every", t.checkpoint_every);
    read(j, "wavelet_loss_sum", t.wavelet_loss_sum);
    if (j.contains("schedule")) read_schedule(j.at("schedule"), t.schedule);
    if (j.contains("adamw")) read_adamw(j.at("adamw"), t.adamw);
}

inline void read_finetune(const json& j, FinetuneConfig& f, std::int64_t& steps) {
    check_keys(j, {"strategy", "unroll", "epsilon", "tf_start", "tf_end", "steps"}, "finetune");
    read(j, "strategy", f.strategy);
    read(j, "unroll", f.unroll);
    read(j, "epsilon", f.epsilon);
    read(j, "tf_start", f.tf_start);
    read(j, "tf_end", f.tf_end);
    read(j, "steps", steps);
    f.validate();
}

inline void read_data_entry(const json& j, DataSpecConfig& d) {
    check_keys(j,
               {"system", "h", "w", "n_steps", "dt", "nu", "ax", "ay", "gs_du", "gs_dv", "gs_feed",
                "gs_kill", "ic_std", "count", "seed_base"},
               "data[]");
    if (j.contains("system")) d.base.system = system_from_name(j.at("system").get<std::string>());
    read(j, "h", d.base.h);
    read(j, "w", d.base.w);
    read(j, "n_steps", d.base.n_steps);
    read(j, "dt", d.base.dt);
    read(j, "nu", d.base.nu);
    read(j, "ax", d.base.ax);
    read(j, "ay", d.base.ay);
    read(j, "gs_du", d.base.gs_du);
    read(j, "gs_dv", d.base.gs_dv);
    read(j, "gs_feed", d.base.gs_feed);
    read(j, "gs_kill", d.base.gs_kill);
    read(j, "ic_std", d.base.ic_std);
    read(j, "count", d.count);
    read(j, "seed_base", d.seed_base);
    d.base.validate();
    if (d.count < 1) throw ConfigError("config: data count must be >= 1");
}

inline void read_eval(const json& j, EvalConfig& e) {
    check_keys(j, {"short_lo", "short_hi", "long_lo", "long_hi", "rollout_steps", "divergence_vrmse",
                   "n_trajectories"},
               "eval");
    read(j, "short_lo", e.windows.short_lo);
    read(j, "short_hi", e.windows.short_hi);
    read(j, "long_lo", e.windows.long_lo);
    read(j, "long_hi", e.windows.long_hi);
    read(j, "rollout_steps", e.rollout_steps);
    read(j, "divergence_vrmse", e.divergence_vrmse);
    read(j, "n_trajectories", e.n_trajectories);
}

}  // namespace detail_config

inline RunConfig config_from_json(const nlohmann::json& j) {
    using detail_config::check_keys;
    RunConfig cfg;
    cfg.data.push_back(DataSpecConfig{});  // default: one heat2d block
    check_keys(j, {"seed", "model", "training", "finetune", "loss", "data", "eval"}, "top level");
    detail_config::read(j, "seed", cfg.seed);
    if (j.contains("model")) detail_config::read_model(j.at("model"), cfg.model);
    if (j.contains("training")) detail_config::read_training(j.at("training"), cfg.training);
    if (j.contains("finetune")) detail_config::read_finetune(j.at("finetune"), cfg.finetune, cfg.finetune_steps);
    if (j.contains("loss")) detail_config::read_loss(j.at("loss"), cfg.training.loss);
    if (j.contains("data")) {
        if (!j.at("data").is_array()) throw ConfigError("config: data must be an array");
        cfg.data.clear();
        for (const auto& entry : j.at("data")) {
            DataSpecConfig d;
            detail_config::read_data_entry(entry, d);
            cfg.data.push_back(d);
        }
        if (cfg.data.empty()) throw ConfigError("config: data array is empty");
    }
    if (j.contains("eval")) detail_config::read_eval(j.at("eval"), cfg.eval);
    cfg.training.seed = cfg.seed;
    cfg.model.validate();
    return cfg;
}

inline nlohmann::json config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["model"] = {{"embed_dim", cfg.model.embed_dim},
                  {"depth", cfg.model.depth},
                  {"fpn_levels", cfg.model.fpn_levels},
                  {"wavelet", cfg.model.wavelet},
                  {"dwt_levels", cfg.model.dwt_levels},
                  {"channels", cfg.model.channels},
                  {"out_channels", cfg.model.out_channels},
                  {"history", cfg.model.history},
                  {"grid_h", cfg.model.grid_h},
                  {"grid_w", cfg.model.grid_w},
                  {"heads", cfg.model.heads},
                  {"predict_delta", cfg.model.predict_delta},
                  {"mixer",
                   {{"ridge", cfg.model.mixer.ridge},
                    {"kernel_gate", cfg.model.mixer.kernel_gate},
                    {"lepe", cfg.model.mixer.lepe},
                    {"cpe", cfg.model.mixer.cpe},
                    {"rope", cfg.model.mixer.rope},
                    {"mila_block", cfg.model.mixer.mila_block},
                    {"attention", cfg.model.mixer.attention}}}};
    j["training"] = {{"steps", cfg.training.steps},
                     {"batch_size", cfg.training.batch_size},
                     {"clip_norm", cfg.training.clip_norm},
                     {"ema_decay", cfg.training.ema_decay},
                     {"checkpoint_every", cfg.training.checkpoint_every},
                     {"wavelet_loss_sum", cfg.training.wavelet_loss_sum},
                     {"schedule",
                      {{"warmup_start", cfg.training.schedule.warmup_start},
                       {"peak", cfg.training.schedule.peak},
                       {"warmup_steps", cfg.training.schedule.warmup_steps},
                       {"decay_rate", cfg.training.schedule.decay_rate},
                       {"transition_steps", cfg.training.schedule.transition_steps},
                       {"staircase", cfg.training.schedule.staircase}}},
                     {"adamw",
                      {{"beta1", cfg.training.adamw.beta1},
                       {"beta2", cfg.training.adamw.beta2},
                       {"eps", cfg.training.adamw.eps},
                       {"weight_decay", cfg.training.adamw.weight_decay}}}};
    j["finetune"] = {{"strategy", cfg.finetune.strategy}, {"unroll", cfg.finetune.unroll},
                     {"epsilon", cfg.finetune.epsilon},   {"tf_start", cfg.finetune.tf_start},
                     {"tf_end", cfg.finetune.tf_end},     {"steps", cfg.effective_finetune_steps()}};
    j["loss"] = {{"lambda_mse", cfg.training.loss.lambda_mse}, {"lambda_l1", cfg.training.loss.lambda_l1}};
    j["data"] = nlohmann::json::array();
    for (const auto& d : cfg.data) {
        nlohmann::json e = {{"system", system_name(d.base.system)},
                            {"h", d.base.h},
                            {"w", d.base.w},
                            {"n_steps", d.base.n_steps},
                            {"dt", d.base.dt},
                            {"ic_std", d.base.ic_std},
                            {"count", d.count},
                            {"seed_base", d.seed_base}};
        switch (d.base.system) {
            case System::heat2d: e["nu"] = d.base.nu; break;
            case System::advection2d:
                e["ax"] = d.base.ax;
                e["ay"] = d.base.ay;
                break;
            case System::gray_scott2d:
                e["gs_du"] = d.base.gs_du;
                e["gs_dv"] = d.base.gs_dv;
                e["gs_feed"] = d.base.gs_feed;
                e["gs_kill"] = d.base.gs_kill;
                break;
        }
        j["data"].push_back(e);
    }
    j["eval"] = {{"short_lo", cfg.eval.windows.short_lo},
                 {"short_hi", cfg.eval.windows.short_hi},
                 {"long_lo", cfg.eval.windows.long_lo},
                 {"long_hi", cfg.eval.windows.long_hi},
                 {"rollout_steps", cfg.eval.rollout_steps},
                 {"divergence_vrmse", cfg.eval.divergence_vrmse},
                 {"n_trajectories", cfg.eval.n_trajectories}};
    return j;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

}  // namespace wavelit
