#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>

#include "test_util.hpp"
#include "wavelit/synthdata.hpp"

using namespace wavelit;
using wavelit::testing::max_abs_diff;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST(Heat, SingleModeDecaysToOneOverE) {
    TrajectorySpec spec;
    spec.system = System::heat2d;
    spec.h = spec.w = 32;
    spec.nu = 1.0 / (4.0 * kPi * kPi);
    spec.dt = 1.0;
    Tensor u0 = Tensor::uninit({32, 32, 1});
    for (std::int64_t y = 0; y < 32; ++y)
        for (std::int64_t x = 0; x < 32; ++x)
            u0.data()[y * 32 + x] = std::sin(2.0 * kPi * static_cast<double>(x) / 32.0);
    Tensor u1 = oracle_step(spec, u0);
    const double decay = std::exp(-1.0);
    for (std::int64_t i = 0; i < u0.size(); ++i) EXPECT_NEAR(u1[i], decay * u0[i], 1e-10);
}

TEST(Heat, ConstantFieldUnchanged) {
    TrajectorySpec spec;
    spec.system = System::heat2d;
    spec.h = spec.w = 16;
    Tensor u0 = Tensor::filled({16, 16, 1}, 3.5);
    Tensor u1 = oracle_step(spec, u0);
    EXPECT_LE(max_abs_diff(u0, u1), 1e-11);
}

TEST(Heat, EnergyStrictlyDecreases) {
    TrajectorySpec spec;
    spec.system = System::heat2d;
    spec.h = spec.w = 32;
    spec.seed = 3;
    spec.n_steps = 8;
    spec.nu = 1e-3;
    spec.dt = 0.1;
    Trajectory traj = generate(spec);
    auto energy = [&](std::int64_t j) {
        double mean = 0.0;
        for (std::int64_t i = 0; i < 32 * 32; ++i) mean += traj.frames[j * 32 * 32 + i];
        mean /= 1024.0;
        double e = 0.0;
        for (std::int64_t i = 0; i < 32 * 32; ++i) {
            const double d = traj.frames[j * 32 * 32 + i] - mean;
            e += d * d;
        }
        return e;
    };
    for (std::int64_t j = 0; j + 1 < spec.n_steps; ++j) EXPECT_LT(energy(j + 1), energy(j));
}

TEST(Heat, MaximumPrinciple) {
    TrajectorySpec spec;
    spec.system = System::heat2d;
    spec.h = spec.w = 32;
    spec.seed = 4;
    spec.n_steps = 16;
    spec.nu = 2e-3;
    Trajectory traj = generate(spec);
    double max0 = 0.0;
    for (std::int64_t i = 0; i < 1024; ++i) max0 = std::max(max0, std::abs(traj.frames[i]));
    for (std::int64_t j = 1; j < spec.n_steps; ++j) {
        double mx = 0.0;
        for (std::int64_t i = 0; i < 1024; ++i) mx = std::max(mx, std::abs(traj.frames[j * 1024 + i]));
        EXPECT_LE(mx, max0 + 1e-12);
    }
}

TEST(Advection, FullPeriodWrapsExactly) {
    TrajectorySpec spec;
    spec.system = System::advection2d;
    spec.h = spec.w = 32;
    spec.ax = 1.0;
    spec.ay = 0.0;
    spec.dt = 1.0;
    spec.seed = 5;
    Rng rng = Rng::stream(5, "adv");
    Tensor u0 = Tensor::randn({32, 32, 1}, rng);
    Tensor u1 = oracle_step(spec, u0);
    EXPECT_LE(max_abs_diff(u0, u1), 1e-9);
}

TEST(Advection, SumExactlyConserved) {
    TrajectorySpec spec;
    spec.system = System::advection2d;
    spec.h = spec.w = 32;
    spec.seed = 6;
    spec.n_steps = 10;
    spec.dt = 0.013;
    Trajectory traj = generate(spec);
    auto total = [&](std::int64_t j) {
        double s = 0.0;
        for (std::int64_t i = 0; i < 1024; ++i) s += traj.frames[j * 1024 + i];
        return s;
    };
    const double t0 = total(0);
    for (std::int64_t j = 1; j < spec.n_steps; ++j) EXPECT_NEAR(total(j), t0, 1e-9);
}

TEST(Advection, IntegerShiftIsRearrangement) {
    TrajectorySpec spec;
    spec.system = System::advection2d;
    spec.h = spec.w = 32;
    spec.ax = 1.0;
    spec.ay = 0.0;
    spec.dt = 1.0 / 32.0;  // exactly one grid cell
    Rng rng = Rng::stream(7, "adv");
    Tensor u0 = Tensor::randn({32, 32, 1}, rng);
    Tensor u1 = oracle_step(spec, u0);
    for (std::int64_t y = 0; y < 32; ++y)
        for (std::int64_t x = 0; x < 32; ++x)
            EXPECT_NEAR(u1[y * 32 + x], u0[y * 32 + (x + 31) % 32], 1e-9);
}

TEST(GrayScott, SubstepHalvingConverges) {
    TrajectorySpec spec;
    spec.system = System::gray_scott2d;
    spec.h = spec.w = 16;
    spec.seed = 8;
    spec.dt = 1.0;
    spec.n_steps = 4;
    Trajectory traj = generate(spec);
    Tensor state = Tensor::uninit({16, 16, 2});
    for (std::int64_t i = 0; i < state.size(); ++i) state.data()[i] = traj.frames[i];
    Tensor coarse = state, fine = state;
    for (int step = 0; step < 3; ++step) {
        coarse = oracle_step(spec, coarse, 1);
        fine = oracle_step(spec, fine, 2);
    }
    EXPECT_LE(max_abs_diff(coarse, fine), 1e-6);
}

TEST(GrayScott, BlowUpReported) {
    TrajectorySpec spec;
    spec.system = System::gray_scott2d;
    spec.h = spec.w = 16;
    spec.gs_du = 50.0;  // diffusion number far beyond stability
    spec.dt = 10.0;
    spec.seed = 9;
    spec.n_steps = 8;
    EXPECT_THROW(generate(spec), NumericError);
}

TEST(Generate, DeterministicPerSeed) {
    TrajectorySpec spec;
    spec.system = System::heat2d;
    spec.h = spec.w = 32;
    spec.seed = 10;
    spec.n_steps = 6;
    Trajectory a = generate(spec);
    Trajectory b = generate(spec);
    for (std::int64_t i = 0; i < a.frames.size(); ++i) EXPECT_EQ(a.frames[i], b.frames[i]);
    spec.seed = 11;
    Trajectory c = generate(spec);
    EXPECT_GT(max_abs_diff(a.frames, c.frames), 1e-3);
}

TEST(Generate, BandLimitedInitialCondition) {
    TrajectorySpec spec;
    spec.system = System::heat2d;
    spec.h = spec.w = 32;
    spec.seed = 12;
    spec.n_steps = 2;
    Trajectory traj = generate(spec);
    // all power beyond |k| = H/4 must vanish
    std::vector<double> plane(1024);
    for (std::int64_t i = 0; i < 1024; ++i) plane[static_cast<std::size_t>(i)] = traj.frames[i];
    auto f = wavelit::detail_synth::dft2(plane.data(), 32, 32);
    for (std::int64_t ky = 0; ky < 32; ++ky)
        for (std::int64_t kx = 0; kx < 32; ++kx) {
            const auto fx = wavelit::detail_synth::signed_freq(kx, 32);
            const auto fy = wavelit::detail_synth::signed_freq(ky, 32);
            if (fx * fx + fy * fy > 8 * 8)
                EXPECT_LE(std::abs(f[static_cast<std::size_t>(ky * 32 + kx)]), 1e-9);
        }
}

TEST(TrajectoryFile, RoundTripBitExact) {
    TrajectorySpec spec;
    spec.system = System::advection2d;
    spec.h = spec.w = 16;
    spec.seed = 13;
    spec.n_steps = 5;
    spec.ax = 0.7;
    spec.ay = -0.2;
    Trajectory traj = generate(spec);
    const std::string path = ::testing::TempDir() + "traj_roundtrip.wtrj";
    write_trajectory(path, traj);
    Trajectory back = read_trajectory(path);
    EXPECT_EQ(back.spec.system, spec.system);
    EXPECT_EQ(back.spec.n_steps, spec.n_steps);
    EXPECT_DOUBLE_EQ(back.spec.ax, spec.ax);
    ASSERT_EQ(back.frames.size(), traj.frames.size());
    for (std::int64_t i = 0; i < traj.frames.size(); ++i) EXPECT_EQ(back.frames[i], traj.frames[i]);
    std::remove(path.c_str());
}

TEST(TrajectoryFile, ExpectedByteLength) {
    TrajectorySpec spec;
    spec.system = System::heat2d;
    spec.h = spec.w = 32;
    spec.seed = 14;
    spec.n_steps = 64;
    Trajectory traj = generate(spec);
    const std::string path = ::testing::TempDir() + "traj_size.wtrj";
    write_trajectory(path, traj);
    std::ifstream is(path, std::ios::binary | std::ios::ate);
    const auto bytes = static_cast<std::int64_t>(is.tellg());
    // header: 4 magic + 5*u32 + u64 + f64 + u64 + u32 (nparams) + 2 param f64
    const std::int64_t header = 4 + 4 * 5 + 8 + 8 + 8 + 4 + 16;
    EXPECT_EQ(bytes, header + 8 * 32 * 32 * 64);
    std::remove(path.c_str());
}

TEST(Spec, ValidationRules) {
    TrajectorySpec spec;
    spec.h = 24;  // not a power of two
    EXPECT_THROW(spec.validate(), ConfigError);
    spec.h = 256;  // too large
    spec.w = 32;
    EXPECT_THROW(spec.validate(), ConfigError);
    EXPECT_THROW(system_from_name("burgers1d"), ConfigError);
}
