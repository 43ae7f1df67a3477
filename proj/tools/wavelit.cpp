// Command-line front end: data generation, training, rollout finetuning,
// evaluation, the attention benchmark, sampling diagnostics and ablation
// sweeps. Exit codes: 0 success, 2 usage/config error, 3 numerical failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wavelit/config.hpp"
#include "wavelit/evaluate.hpp"
#include "wavelit/mixer.hpp"
#include "wavelit/sampling.hpp"
#include "wavelit/training.hpp"

namespace fs = std::filesystem;
using namespace wavelit;

namespace {

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("WAVELIT_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

std::vector<Trajectory> generate_all(const RunConfig& cfg) {
    std::vector<Trajectory> out;
    for (const auto& d : cfg.data)
        for (std::int64_t i = 0; i < d.count; ++i) {
            TrajectorySpec spec = d.base;
            spec.seed = d.seed_base + static_cast<std::uint64_t>(i);
            out.push_back(generate(spec));
        }
    return out;
}

std::vector<Trajectory> load_trajectory_dir(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".wtrj") files.push_back(entry.path().string());
    if (files.empty()) throw ConfigError("no .wtrj files in " + dir);
    std::sort(files.begin(), files.end());
    std::vector<Trajectory> out;
    out.reserve(files.size());
    for (const auto& f : files) out.push_back(read_trajectory(f));
    return out;
}

std::vector<Trajectory> training_data(const RunConfig& cfg, const std::string& data_dir) {
    return data_dir.empty() ? generate_all(cfg) : load_trajectory_dir(data_dir);
}

// Held-out trajectories for eval/ablate: same specs, disjoint seed range.
std::vector<Trajectory> heldout_data(const RunConfig& cfg) {
    std::vector<Trajectory> out;
    for (const auto& d : cfg.data)
        for (std::int64_t i = 0; i < cfg.eval.n_trajectories; ++i) {
            TrajectorySpec spec = d.base;
            spec.seed = d.seed_base + 1000000 + static_cast<std::uint64_t>(i);
            out.push_back(generate(spec));
        }
    return out;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open for writing: " + path);
    os << content;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open for writing: " + path);
    os << metrics_csv_header() << "\n";
    for (const auto& r : rows) os << to_csv(r) << "\n";
}

WaveLiTModel build_model(const RunConfig& cfg) {
    Rng init = Rng::stream(cfg.seed, "init");
    return WaveLiTModel::create(cfg.model, init);
}

void save_run_checkpoints(const std::string& out_dir, WaveLiTModel& model, const TrainingState& st) {
    save_training_state(out_dir + "/checkpoint.wlt", model.store, st);
    // EMA weights persisted separately as a plain parameter archive
    std::vector<double> backup;
    for (const auto& [_, t] : model.store.items) backup.insert(backup.end(), t.values().begin(), t.values().end());
    st.ema.copy_into(model.store);
    save_params(out_dir + "/checkpoint_ema.wlt", model.store);
    std::size_t off = 0;
    for (auto& [_, t] : model.store.items) {
        std::copy(backup.begin() + static_cast<std::ptrdiff_t>(off),
                  backup.begin() + static_cast<std::ptrdiff_t>(off + static_cast<std::size_t>(t.size())),
                  t.data());
        off += static_cast<std::size_t>(t.size());
    }
}

int cmd_generate(const std::string& config_path, const std::string& out_dir, bool force) {
    RunConfig cfg = load_config(config_path);
    if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force)
        throw ConfigError("output directory " + out_dir + " exists and is not empty (use --force)");
    fs::create_directories(out_dir);
    std::size_t idx = 0;
    std::cout << "system          grid      steps  file\n";
    for (const auto& d : cfg.data)
        for (std::int64_t i = 0; i < d.count; ++i) {
            TrajectorySpec spec = d.base;
            spec.seed = d.seed_base + static_cast<std::uint64_t>(i);
            Trajectory traj = generate(spec);
            char name[64];
            std::snprintf(name, sizeof(name), "traj_%05zu.wtrj", idx++);
            const std::string path = out_dir + "/" + name;
            write_trajectory(path, traj);
            std::printf("%-15s %4lldx%-4lld %5lld  %s\n", system_name(spec.system),
                        static_cast<long long>(spec.h), static_cast<long long>(spec.w),
                        static_cast<long long>(spec.n_steps), path.c_str());
        }
    std::cout << idx << " trajectories written to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir, const std::string& data_dir,
              const std::string& resume) {
    RunConfig cfg = load_config(config_path);
    fs::create_directories(out_dir);
    WaveLiTModel model = build_model(cfg);
    WindowDataset ds;
    ds.history = cfg.model.history;
    ds.trajs = training_data(cfg, data_dir);
    TrainingState st = TrainingState::create(model.store, cfg.training);
    if (!resume.empty()) load_training_state(resume, model.store, st);
    write_text(out_dir + "/config.json", config_to_json(cfg).dump(2) + "\n");
    std::vector<MetricsRow> rows;
    auto checkpoint = [&](std::int64_t) { save_run_checkpoints(out_dir, model, st); };
    try {
        rows = pretrain(model, ds, cfg.training, st, checkpoint);
    } catch (const std::runtime_error&) {
        write_metrics_csv(out_dir + "/metrics.csv", rows);
        throw;  // numerical failure: exit 3, last periodic checkpoint retained
    }
    save_run_checkpoints(out_dir, model, st);
    write_metrics_csv(out_dir + "/metrics.csv", rows);
    std::cout << "trained " << st.step << " steps, params " << model.param_count() << ", checkpoints in "
              << out_dir << "\n";
    return 0;
}

int cmd_finetune(const std::string& config_path, const std::string& out_dir, const std::string& data_dir,
                 const std::string& init, const std::string& resume) {
    RunConfig cfg = load_config(config_path);
    fs::create_directories(out_dir);
    WaveLiTModel model = build_model(cfg);
    WindowDataset ds;
    ds.history = cfg.model.history;
    ds.trajs = training_data(cfg, data_dir);
    TrainConfig ft_train = cfg.training;
    ft_train.steps = cfg.effective_finetune_steps();
    TrainingState st = TrainingState::create(model.store, ft_train);
    if (!resume.empty()) {
        load_training_state(resume, model.store, st);
    } else if (!init.empty()) {
        load_params(init, model.store);
        st.ema = EmaState::create(model.store, ft_train.ema_decay);
    } else {
        throw ConfigError("finetune: provide --init (pretrained checkpoint) or --resume");
    }
    write_text(out_dir + "/config.json", config_to_json(cfg).dump(2) + "\n");
    std::vector<MetricsRow> rows;
    auto checkpoint = [&](std::int64_t) { save_run_checkpoints(out_dir, model, st); };
    try {
        rows = rollout_finetune(model, ds, ft_train, cfg.finetune, st, checkpoint);
    } catch (const std::runtime_error&) {
        write_metrics_csv(out_dir + "/metrics.csv", rows);
        throw;
    }
    save_run_checkpoints(out_dir, model, st);
    write_metrics_csv(out_dir + "/metrics.csv", rows);
    std::cout << "finetuned (" << cfg.finetune.strategy << ", K=" << cfg.finetune.unroll << ") for "
              << st.step << " steps, checkpoints in " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint, const std::string& data_dir,
             const std::string& out_csv, int threads) {
    RunConfig cfg = load_config(config_path);
    if (!fs::exists(checkpoint)) throw ConfigError("eval: missing checkpoint " + checkpoint);
    WaveLiTModel model = build_model(cfg);
    load_params(checkpoint, model.store);
    std::vector<Trajectory> trajs = data_dir.empty() ? heldout_data(cfg) : load_trajectory_dir(data_dir);
    OneStepEval one = one_step_eval(model, trajs, threads);
    RolloutReport rep = eval_rollout(model, trajs, cfg.eval.windows, cfg.eval.rollout_steps,
                                     cfg.eval.divergence_vrmse, threads);
    std::ostringstream os;
    os << rollout_report_csv(rep);
    char buf[200];
    std::snprintf(buf, sizeof(buf), "teacher_forced,one_step_vrmse_median,,%.17g,\n", one.median_vrmse);
    os << buf;
    std::snprintf(buf, sizeof(buf), "teacher_forced,one_step_rel_l2_median,,%.17g,\n", one.median_rel_l2);
    os << buf;
    std::snprintf(buf, sizeof(buf), "teacher_forced,one_step_wavelet_l1_median,,%.17g,\n",
                  one.median_wavelet_l1);
    os << buf;
    write_text(out_csv, os.str());
    std::cout << "eval: one-step rel_l2 median " << one.median_rel_l2 << ", rollout windows ["
              << rep.one_step_vrmse << ", " << rep.short_vrmse << ", " << rep.long_vrmse << "], "
              << rep.diverged_count << "/" << rep.trajectories << " diverged -> " << out_csv << "\n";
    return 0;
}

int cmd_bench_attention(const std::string& out_csv, const std::string& sizes_arg,
                        const std::string& kinds_arg, std::int64_t dim, int repeats) {
    std::vector<std::int64_t> sizes;
    {
        std::istringstream ss(sizes_arg);
        std::string tok;
        while (std::getline(ss, tok, ',')) sizes.push_back(std::stoll(tok));
    }
    std::vector<std::string> kinds;
    {
        std::istringstream ss(kinds_arg);
        std::string tok;
        while (std::getline(ss, tok, ',')) kinds.push_back(tok);
    }
    std::ostringstream os;
    os << "n,kind,seconds\n";
    for (const auto& kind : kinds) {
        if (kind != "linear" && kind != "softmax")
            throw ConfigError("bench-attention: unknown kind '" + kind + "'");
        for (std::int64_t n : sizes) {
            Rng rng = Rng::stream(static_cast<std::uint64_t>(n), "bench");
            Tensor q = Tensor::randn({n, dim}, rng).set_requires_grad(true);
            Tensor k = Tensor::randn({n, dim}, rng).set_requires_grad(true);
            Tensor v = Tensor::randn({n, dim}, rng).set_requires_grad(true);
            double best = 1e300;
            for (int r = 0; r < repeats; ++r) {
                q.zero_grad();
                k.zero_grad();
                v.zero_grad();
                const auto t0 = std::chrono::steady_clock::now();
                {
                    TapeScope scope;
                    Tensor o = kind == "linear" ? linear_attention_vanilla(q, k, v)
                                                : softmax_attention_reference(q, k, v);
                    scope.tape.backward(sum(o));
                }
                const auto t1 = std::chrono::steady_clock::now();
                best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
            }
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%lld,%s,%.6f\n", static_cast<long long>(n), kind.c_str(), best);
            os << buf;
            std::cout << buf;
        }
    }
    write_text(out_csv, os.str());
    return 0;
}

int cmd_sampling_report(const std::string& stats_path, bool builtin, const std::string& out_csv,
                        double temperature) {
    CorpusStats stats = builtin ? reference_corpus() : read_corpus_stats(stats_path);
    const std::string csv = sampling_report_csv(stats, temperature);
    write_text(out_csv, csv);
    std::cout << csv;
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& axis, const std::string& out_csv) {
    RunConfig base = load_config(config_path);
    struct Variant {
        std::string label;
        RunConfig cfg;
    };
    std::vector<Variant> variants;
    if (axis == "wavelet") {
        for (const char* w : {"haar", "bior2.2", "bior4.4"}) {
            RunConfig c = base;
            c.model.wavelet = w;
            variants.push_back({w, c});
        }
    } else if (axis == "loss") {
        const std::pair<double, double> weight_rows[] = {{1, 0}, {0, 1}, {1, 1}};
        for (auto [lm, ll] : weight_rows) {
            RunConfig c = base;
            c.training.loss = {lm, ll};
            char label[32];
            std::snprintf(label, sizeof(label), "mse%g_l1%g", lm, ll);
            variants.push_back({label, c});
        }
    } else if (axis == "fpn") {
        for (int l : {0, 1, 2, 3, 4}) {
            RunConfig c = base;
            c.model.fpn_levels = l;
            const std::int64_t div = std::int64_t{1} << (c.model.dwt_levels + l);
            if (c.model.grid_h % div != 0 || c.model.grid_w % div != 0) continue;  // grid too small
            variants.push_back({"fpn_l" + std::to_string(l), c});
        }
    } else if (axis == "mixer") {
        for (const char* row : {"A1", "A2", "A3", "A4", "A5", "B1", "B2", "B3", "C1"}) {
            RunConfig c = base;
            c.model.mixer = mixer_ablation_config(row);
            variants.push_back({row, c});
        }
    } else {
        throw ConfigError("ablate: unknown axis '" + axis + "' (supported: wavelet, loss, fpn, mixer)");
    }
    std::ostringstream os;
    os << "axis,variant,one_step_rel_l2,one_step_vrmse,one_step_wavelet_l1,final_train_mse\n";
    for (auto& var : variants) {
        WaveLiTModel model = build_model(var.cfg);
        WindowDataset ds;
        ds.history = var.cfg.model.history;
        ds.trajs = generate_all(var.cfg);
        TrainingState st = TrainingState::create(model.store, var.cfg.training);
        auto rows = pretrain(model, ds, var.cfg.training, st);
        st.ema.copy_into(model.store);
        OneStepEval one = one_step_eval(model, heldout_data(var.cfg));
        char buf[200];
        std::snprintf(buf, sizeof(buf), "%s,%s,%.6g,%.6g,%.6g,%.6g\n", axis.c_str(), var.label.c_str(),
                      one.median_rel_l2, one.median_vrmse, one.median_wavelet_l1,
                      rows.empty() ? 0.0 : rows.back().loss_mse);
        os << buf;
        std::cout << buf;
    }
    write_text(out_csv, os.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wavelit: wavelet-tokenized linear-attention PDE surrogate"};
    app.require_subcommand(1);
    app.fallthrough();
    int threads_flag = 0;
    app.add_option("--threads", threads_flag, "evaluation parallelism width (fallback: WAVELIT_THREADS)");

    auto* cfg_cmd = app.add_subcommand("config", "configuration utilities");
    bool print_defaults = false;
    cfg_cmd->add_flag("--print-defaults", print_defaults, "dump the full default config as JSON");

    std::string config_path, out_path, data_dir, resume, init, checkpoint, stats_path, axis;
    bool force = false, builtin_fixture = false;

    auto* gen = app.add_subcommand("generate", "generate synthetic trajectory files");
    gen->add_option("--config", config_path)->required();
    gen->add_option("--out", out_path)->required();
    gen->add_flag("--force", force, "overwrite a non-empty output directory");

    auto* train = app.add_subcommand("train", "teacher-forced pretraining");
    train->add_option("--config", config_path)->required();
    train->add_option("--out", out_path)->required();
    train->add_option("--data", data_dir, "trajectory directory (default: generate from config)");
    train->add_option("--resume", resume, "resume training state checkpoint");

    auto* ft = app.add_subcommand("finetune", "rollout finetuning from a pretrained checkpoint");
    ft->add_option("--config", config_path)->required();
    ft->add_option("--out", out_path)->required();
    ft->add_option("--data", data_dir);
    ft->add_option("--init", init, "pretrained parameter checkpoint to start from");
    ft->add_option("--resume", resume, "resume finetuning state checkpoint");

    auto* ev = app.add_subcommand("eval", "teacher-forced + autoregressive evaluation");
    ev->add_option("--config", config_path)->required();
    ev->add_option("--checkpoint", checkpoint)->required();
    ev->add_option("--data", data_dir);
    ev->add_option("--out", out_path)->required();

    std::string sizes = "1024,2048,4096", kinds = "linear,softmax";
    std::int64_t bench_dim = 32;
    int repeats = 3;
    auto* bench = app.add_subcommand("bench-attention", "forward+backward wall-clock per token count");
    bench->add_option("--out", out_path)->required();
    bench->add_option("--sizes", sizes, "comma-separated token counts");
    bench->add_option("--kinds", kinds, "comma-separated attention kinds (linear, softmax)");
    bench->add_option("--dim", bench_dim);
    bench->add_option("--repeats", repeats);

    double temperature = 0.2;
    auto* rep = app.add_subcommand("sampling-report", "multi-dataset sampling diagnostics");
    rep->add_option("--stats", stats_path, "corpus stats file");
    rep->add_flag("--builtin-fixture", builtin_fixture, "use the built-in eight-dataset reference corpus");
    rep->add_option("--out", out_path)->required();
    rep->add_option("--temperature", temperature);

    auto* abl = app.add_subcommand("ablate", "configured sweep over one ablation axis");
    abl->add_option("--config", config_path)->required();
    abl->add_option("--axis", axis)->required();
    abl->add_option("--out", out_path)->required();

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cfg_cmd->parsed()) {
            if (print_defaults) {
                RunConfig defaults;
                defaults.data.push_back(DataSpecConfig{});
                std::cout << config_to_json(defaults).dump(2) << "\n";
                return 0;
            }
            std::cerr << "config: nothing to do (use --print-defaults)\n";
            return 2;
        }
        if (gen->parsed()) return cmd_generate(config_path, out_path, force);
        if (train->parsed()) return cmd_train(config_path, out_path, data_dir, resume);
        if (ft->parsed()) return cmd_finetune(config_path, out_path, data_dir, init, resume);
        if (ev->parsed()) return cmd_eval(config_path, checkpoint, data_dir, out_path, resolve_threads(threads_flag));
        if (bench->parsed()) return cmd_bench_attention(out_path, sizes, kinds, bench_dim, repeats);
        if (rep->parsed()) {
            if (!builtin_fixture && stats_path.empty())
                throw ConfigError("sampling-report: provide --stats or --builtin-fixture");
            return cmd_sampling_report(stats_path, builtin_fixture, out_path, temperature);
        }
        if (abl->parsed()) return cmd_ablate(config_path, axis, out_path);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const SingularityError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
