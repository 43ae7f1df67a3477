#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "wavelit/rollout.hpp"
#include "wavelit/synthdata.hpp"

using namespace wavelit;

TEST(ErrorBound, PaperBranches) {
    EXPECT_DOUBLE_EQ(error_bound(0.1, 1.0, 10), 1.0);           // n*eps branch
    EXPECT_DOUBLE_EQ(error_bound(1.0, 2.0, 3), 7.0);            // 1 + 2 + 4
    EXPECT_DOUBLE_EQ(error_bound(0.37, 1.5, 0), 0.0);           // n = 0
    EXPECT_THROW(error_bound(-0.1, 1.0, 3), UsageError);
    EXPECT_THROW(error_bound(0.1, 0.0, 3), UsageError);
}

TEST(ErrorBound, MonotoneInAllArguments) {
    Rng rng = Rng::stream(1, "mono");
    for (int trial = 0; trial < 200; ++trial) {
        const double eps = rng.uniform(0.0, 1.0);
        const double lip = rng.uniform(0.1, 2.5);
        const std::int64_t n = 1 + static_cast<std::int64_t>(rng.below(30));
        EXPECT_LE(error_bound(eps, lip, n), error_bound(eps + 0.1, lip, n) + 1e-12);
        EXPECT_LE(error_bound(eps, lip, n), error_bound(eps, lip + 0.1, n) + 1e-12);
        EXPECT_LE(error_bound(eps, lip, n), error_bound(eps, lip, n + 1) + 1e-12);
    }
}

TEST(ErrorBound, ContinuityAtUnitLipschitz) {
    const double eps = 0.3;
    for (std::int64_t n : {1, 5, 20, 50}) {
        const double lim = static_cast<double>(n) * eps;
        const double near = error_bound(eps, 1.0 + 1e-10, n, /*branch_tol=*/0.0);
        EXPECT_LE(std::abs(near - lim), 1e-6 * lim);
    }
}

TEST(EstimateLipschitz, KnownMaps) {
    Rng rng = Rng::stream(2, "lip");
    std::vector<Tensor> probes;
    for (int i = 0; i < 4; ++i) probes.push_back(Tensor::randn({8}, rng));
    auto identity = [](const Tensor& x) { return x.detach(); };
    Rng r1 = Rng::stream(3, "dirs");
    EXPECT_NEAR(estimate_lipschitz(identity, probes, 1e-3, r1), 1.0, 1e-10);
    auto doubler = [](const Tensor& x) { return scale(x, 2.0); };
    Rng r2 = Rng::stream(3, "dirs");
    EXPECT_NEAR(estimate_lipschitz(doubler, probes, 1e-3, r2), 2.0, 1e-10);
}

TEST(EstimateLipschitz, ContractiveClampOutsideBall) {
    // map: project onto the ball of radius 1; on exterior probes the
    // estimate cannot exceed 1.
    auto clamp = [](const Tensor& x) {
        double nrm = 0.0;
        for (std::int64_t i = 0; i < x.size(); ++i) nrm += x[i] * x[i];
        nrm = std::sqrt(nrm);
        Tensor out = x.detach();
        if (nrm > 1.0)
            for (std::int64_t i = 0; i < x.size(); ++i) out.data()[i] = x[i] / nrm;
        return out;
    };
    Rng rng = Rng::stream(4, "lip");
    std::vector<Tensor> probes;
    for (int i = 0; i < 4; ++i) {
        Tensor p = Tensor::randn({6}, rng);
        double nrm = 0.0;
        for (std::int64_t j = 0; j < 6; ++j) nrm += p[j] * p[j];
        nrm = std::sqrt(nrm);
        for (std::int64_t j = 0; j < 6; ++j) p.data()[j] = 3.0 * p[j] / nrm;  // radius 3, exterior
        probes.push_back(p);
    }
    Rng dirs = Rng::stream(5, "dirs");
    EXPECT_LE(estimate_lipschitz(clamp, probes, 1e-4, dirs), 1.0 + 1e-6);
}

TEST(BoundVerification, ContractiveExpansiveExact) {
    Rng rng = Rng::stream(6, "bv");
    Tensor start = Tensor::randn({16}, rng);
    // surrogate = a*x + b with ||b|| = eps has per-step error exactly eps
    auto make_pair = [&](double a, double eps) {
        Tensor b = Tensor::randn({16}, rng);
        double nrm = 0.0;
        for (std::int64_t i = 0; i < 16; ++i) nrm += b[i] * b[i];
        nrm = std::sqrt(nrm);
        Tensor bias = Tensor::uninit({16});
        for (std::int64_t i = 0; i < 16; ++i) bias.data()[i] = b[i] * eps / nrm;
        auto truth = [a](const Tensor& x) { return scale(x, a); };
        auto surrogate = [a, bias](const Tensor& x) { return add(scale(x, a), bias); };
        return std::make_pair(std::function<Tensor(const Tensor&)>(truth),
                              std::function<Tensor(const Tensor&)>(surrogate));
    };

    {
        auto [f, F] = make_pair(0.5, 0.01);
        auto res = bound_verification(f, F, start, 0.01, 0.5, 50);
        EXPECT_TRUE(res.passed);
        // contractive: errors bounded by eps/(1-L) = 2 eps
        for (double e : res.errors) EXPECT_LE(e, 0.02 + 1e-9);
    }
    {
        auto [f, F] = make_pair(1.0, 0.1);
        auto res = bound_verification(f, F, start, 0.1, 1.0, 10);
        EXPECT_TRUE(res.passed);
        EXPECT_NEAR(res.errors.back(), 1.0, 1e-9);  // n*eps with aligned bias: exactly n*eps
    }
    {
        auto [f, F] = make_pair(1.5, 0.01);
        auto res = bound_verification(f, F, start, 0.01, 1.5, 20);
        EXPECT_TRUE(res.passed);
        EXPECT_LE(res.errors.back(), error_bound(0.01, 1.5, 20) + 1e-9);
    }
    {
        // eps = 0: surrogate equals truth, all errors zero
        auto truth = [](const Tensor& x) { return scale(x, 0.8); };
        auto res = bound_verification(truth, truth, start, 0.0, 0.8, 30);
        EXPECT_TRUE(res.passed);
        for (double e : res.errors) EXPECT_EQ(e, 0.0);
    }
}

TEST(BoundVerification, ViolationReportsFirstStep) {
    Tensor start = Tensor::ones({4});
    auto truth = [](const Tensor& x) { return x.detach(); };
    auto bad = [](const Tensor& x) { return add(x, Tensor::filled(x.shape(), 1.0)); };  // error 2 per step
    auto res = bound_verification(truth, bad, start, 0.1, 1.0, 5);  // claimed eps far too small
    EXPECT_FALSE(res.passed);
    EXPECT_EQ(res.first_violation, 1);
}

TEST(Rollout, PerfectModelZeroErrors) {
    // oracle passthrough: the step map returns the matching target frame
    TrajectorySpec spec;
    spec.system = System::heat2d;
    spec.h = spec.w = 16;
    spec.n_steps = 12;
    spec.seed = 7;
    Trajectory traj = generate(spec);
    const std::int64_t frame = 16 * 16;
    Tensor hist = Tensor::uninit({1, 2, 16, 16, 1});
    std::memcpy(hist.data(), traj.frames.data(), sizeof(double) * 2 * frame);
    Tensor targets = Tensor::uninit({10, 16, 16, 1});
    std::memcpy(targets.data(), traj.frames.data() + 2 * frame, sizeof(double) * 10 * frame);
    std::int64_t step_ix = 0;
    StepMap oracle = [&](const Tensor&) {
        Tensor out = Tensor::uninit({1, 1, 16, 16, 1});
        std::memcpy(out.data(), targets.data() + step_ix * frame, sizeof(double) * frame);
        step_ix += 1;
        return out;
    };
    auto recs = rollout_trajectory(oracle, hist, targets, 0);
    for (const auto& r : recs) {
        EXPECT_EQ(r.vrmse_err, 0.0);
        EXPECT_EQ(r.rel_l2, 0.0);
        EXPECT_FALSE(r.diverged);
    }
}

TEST(Rollout, IdentityModelOnStaticTarget) {
    Rng rng = Rng::stream(8, "static");
    Tensor field = Tensor::randn({16, 16, 1}, rng);
    Tensor hist = Tensor::uninit({1, 2, 16, 16, 1});
    std::memcpy(hist.data(), field.data(), sizeof(double) * 256);
    std::memcpy(hist.data() + 256, field.data(), sizeof(double) * 256);
    Tensor targets = Tensor::uninit({6, 16, 16, 1});
    for (int s = 0; s < 6; ++s) std::memcpy(targets.data() + s * 256, field.data(), sizeof(double) * 256);
    StepMap identity = [](const Tensor& h) {
        const std::int64_t t = h.extent(1);
        Tensor out = Tensor::uninit({1, 1, h.extent(2), h.extent(3), h.extent(4)});
        const std::int64_t frame = out.size();
        std::memcpy(out.data(), h.data() + (t - 1) * frame, sizeof(double) * static_cast<std::size_t>(frame));
        return out;
    };
    auto recs = rollout_trajectory(identity, hist, targets, 0);
    for (const auto& r : recs) EXPECT_EQ(r.vrmse_err, 0.0);
}

TEST(Rollout, IdentityModelOnDriftingTargetGrowsLinearly) {
    Rng rng = Rng::stream(9, "drift");
    Tensor delta = Tensor::randn({16, 16, 1}, rng);
    Tensor hist = Tensor::zeros({1, 2, 16, 16, 1});  // u_0 = 0 history
    const int n = 8;
    Tensor targets = Tensor::uninit({n, 16, 16, 1});
    for (int s = 0; s < n; ++s)
        for (std::int64_t i = 0; i < 256; ++i)
            targets.data()[s * 256 + i] = static_cast<double>(s + 1) * delta[i];
    StepMap identity = [](const Tensor& h) {
        const std::int64_t t = h.extent(1);
        Tensor out = Tensor::uninit({1, 1, h.extent(2), h.extent(3), h.extent(4)});
        const std::int64_t frame = out.size();
        std::memcpy(out.data(), h.data() + (t - 1) * frame, sizeof(double) * static_cast<std::size_t>(frame));
        return out;
    };
    auto recs = rollout_trajectory(identity, hist, targets, 0);
    // prediction stays 0; E_n = n * ||delta||
    double dn = 0.0;
    for (std::int64_t i = 0; i < 256; ++i) dn += delta[i] * delta[i];
    dn = std::sqrt(dn);
    for (const auto& r : recs) EXPECT_NEAR(r.abs_l2, static_cast<double>(r.step) * dn, 1e-9);
}

TEST(Rollout, DivergenceFlaggedAndExcluded) {
    Tensor hist = Tensor::zeros({1, 2, 8, 8, 1});
    Rng rng = Rng::stream(10, "div");
    Tensor targets = Tensor::randn({4, 8, 8, 1}, rng);
    StepMap nan_model = [](const Tensor& h) {
        Tensor out = Tensor::filled({1, 1, h.extent(2), h.extent(3), h.extent(4)},
                                    std::numeric_limits<double>::quiet_NaN());
        return out;
    };
    StepMap fine_model = [&](const Tensor& h) {
        Tensor out = Tensor::uninit({1, 1, 8, 8, 1});
        std::memcpy(out.data(), targets.data(), sizeof(double) * 64);
        (void)h;
        return out;
    };
    std::vector<std::vector<RolloutStepRecord>> per_traj;
    per_traj.push_back(rollout_trajectory(nan_model, hist, targets, 0));
    per_traj.push_back(rollout_trajectory(fine_model, hist, targets, 1));
    auto rep = aggregate_rollout(per_traj, {});
    EXPECT_EQ(rep.diverged_count, 1);
    EXPECT_EQ(rep.trajectories, 2);
    EXPECT_EQ(rep.one_step_vrmse, 0.0);  // the diverged trajectory is excluded from the median
}

TEST(Rollout, WindowAggregationMatchesHandComputedMedian) {
    // three trajectories with constant per-step vrmse 1, 2, 5 -> medians 2
    std::vector<std::vector<RolloutStepRecord>> per_traj(3);
    const double levels[3] = {1.0, 2.0, 5.0};
    for (int t = 0; t < 3; ++t)
        for (int s = 1; s <= 30; ++s) {
            RolloutStepRecord r;
            r.trajectory_id = t;
            r.step = s;
            r.vrmse_err = levels[t];
            per_traj[static_cast<std::size_t>(t)].push_back(r);
        }
    RolloutWindows w;
    w.short_lo = 1;
    w.short_hi = 20;
    w.long_lo = 21;
    w.long_hi = 30;
    auto rep = aggregate_rollout(per_traj, w);
    EXPECT_DOUBLE_EQ(rep.one_step_vrmse, 2.0);
    EXPECT_DOUBLE_EQ(rep.short_vrmse, 2.0);
    EXPECT_DOUBLE_EQ(rep.long_vrmse, 2.0);
}

TEST(Rollout, ThreadedMatchesSerial) {
    TrajectorySpec spec;
    spec.system = System::heat2d;
    spec.h = spec.w = 16;
    spec.n_steps = 10;
    std::vector<Tensor> hists, targets;
    for (int t = 0; t < 5; ++t) {
        spec.seed = 20 + static_cast<std::uint64_t>(t);
        Trajectory traj = generate(spec);
        const std::int64_t frame = 256;
        Tensor h = Tensor::uninit({1, 2, 16, 16, 1});
        std::memcpy(h.data(), traj.frames.data(), sizeof(double) * 2 * frame);
        Tensor tg = Tensor::uninit({8, 16, 16, 1});
        std::memcpy(tg.data(), traj.frames.data() + 2 * frame, sizeof(double) * 8 * frame);
        hists.push_back(h);
        targets.push_back(tg);
    }
    StepMap identity = [](const Tensor& h) {
        const std::int64_t t = h.extent(1);
        Tensor out = Tensor::uninit({1, 1, h.extent(2), h.extent(3), h.extent(4)});
        const std::int64_t frame = out.size();
        std::memcpy(out.data(), h.data() + (t - 1) * frame, sizeof(double) * static_cast<std::size_t>(frame));
        return out;
    };
    auto serial = autoregressive_rollout(identity, hists, targets, {}, 1);
    auto threaded = autoregressive_rollout(identity, hists, targets, {}, 4);
    ASSERT_EQ(serial.steps.size(), threaded.steps.size());
    for (std::size_t i = 0; i < serial.steps.size(); ++i) {
        EXPECT_EQ(serial.steps[i].vrmse_err, threaded.steps[i].vrmse_err);
        EXPECT_EQ(serial.steps[i].trajectory_id, threaded.steps[i].trajectory_id);
    }
    EXPECT_EQ(serial.short_vrmse, threaded.short_vrmse);
}

TEST(Rollout, RecurrenceHoldsOnSyntheticConstructions) {
    // E_{n+1} <= eps + L E_n on every synthetic pair. The per-step
    // perturbation is 0.99 eps so the claimed eps stays a strict upper bound
    // and the check is robust to rounding at large error magnitudes.
    Rng rng = Rng::stream(11, "rec");
    Tensor start = Tensor::randn({12}, rng);
    for (double lip : {0.5, 1.0, 1.5}) {
        Tensor b = Tensor::randn({12}, rng);
        double nrm = 0.0;
        for (std::int64_t i = 0; i < 12; ++i) nrm += b[i] * b[i];
        nrm = std::sqrt(nrm);
        Tensor bias = Tensor::uninit({12});
        for (std::int64_t i = 0; i < 12; ++i) bias.data()[i] = 0.99 * 0.01 * b[i] / nrm;
        auto truth = [lip](const Tensor& x) { return scale(x, lip); };
        auto surr = [lip, bias](const Tensor& x) { return add(scale(x, lip), bias); };
        auto res = bound_verification(truth, surr, start, 0.01, lip, 40);
        EXPECT_TRUE(res.passed) << lip;
        for (std::size_t n = 0; n + 1 < res.errors.size(); ++n)
            EXPECT_LE(res.errors[n + 1], 0.01 + lip * res.errors[n] + 1e-9);
    }
}
