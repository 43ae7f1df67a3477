#pragma once

#include <complex>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "wavelit/errors.hpp"
#include "wavelit/rng.hpp"
#include "wavelit/tensor.hpp"

// Deterministic synthetic PDE trajectories on the periodic unit square.
// heat2d and advection2d evolve exactly in Fourier space (each mode damped
// by exp(-nu 4 pi^2 |k|^2 t) or phase-shifted by exp(-2 pi i k.a t));
// gray_scott2d integrates with RK4 at dt/16 substeps as a reference oracle.
// Initial conditions are band-limited (modes |k| <= H/4) so wavelet detail
// bands carry signal.

namespace wavelit {

enum class System : std::uint32_t { heat2d = 0, advection2d = 1, gray_scott2d = 2 };

inline const char* system_name(System s) {
    switch (s) {
        case System::heat2d: return "heat2d";
        case System::advection2d: return "advection2d";
        case System::gray_scott2d: return "gray_scott2d";
    }
    return "?";
}

inline System system_from_name(const std::string& name) {
    if (name == "heat2d") return System::heat2d;
    if (name == "advection2d") return System::advection2d;
    if (name == "gray_scott2d") return System::gray_scott2d;
    throw ConfigError("unknown system '" + name + "' (supported: heat2d, advection2d, gray_scott2d)");
}

struct TrajectorySpec {
    System system = System::heat2d;
    std::int64_t h = 32, w = 32;
    std::int64_t n_steps = 64;  // stored frames, initial state included
    double dt = 0.05;
    double nu = 5e-3;                 // heat2d
    double ax = 1.0, ay = 0.0;        // advection2d velocity
    double gs_du = 2e-5, gs_dv = 1e-5, gs_feed = 0.04, gs_kill = 0.06;  // gray_scott2d
    double ic_std = 1.0;              // initial-condition standard deviation (spectral systems)
    std::uint64_t seed = 0;

    std::int64_t channels() const { return system == System::gray_scott2d ? 2 : 1; }

    void validate() const {
        auto pow2 = [](std::int64_t v) { return v >= 2 && (v & (v - 1)) == 0; };
        if (!pow2(h) || !pow2(w) || h > 128 || w > 128)
            throw ConfigError("trajectory grid must be a power of two <= 128, got " + std::to_string(h) +
                              "x" + std::to_string(w));
        if (n_steps < 2) throw ConfigError("trajectory needs at least 2 frames");
        if (dt <= 0.0) throw ConfigError("trajectory dt must be positive");
    }
};

struct Trajectory {
    TrajectorySpec spec;
    Tensor frames;  // [n_steps, H, W, C]
};

namespace detail_synth {

using cd = std::complex<double>;
constexpr double kTwoPi = 6.283185307179586476925286766559;

// Factorized (per-axis) unnormalized forward DFT of a real field.
inline std::vector<cd> dft2(const double* u, std::int64_t h, std::int64_t w) {
    std::vector<cd> rows(static_cast<std::size_t>(h * w));
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t k = 0; k < w; ++k) {
            cd acc(0, 0);
            for (std::int64_t x = 0; x < w; ++x) {
                const double a = -kTwoPi * static_cast<double>(k * x) / static_cast<double>(w);
                acc += u[y * w + x] * cd(std::cos(a), std::sin(a));
            }
            rows[static_cast<std::size_t>(y * w + k)] = acc;
        }
    std::vector<cd> out(static_cast<std::size_t>(h * w));
    for (std::int64_t kx = 0; kx < w; ++kx)
        for (std::int64_t ky = 0; ky < h; ++ky) {
            cd acc(0, 0);
            for (std::int64_t y = 0; y < h; ++y) {
                const double a = -kTwoPi * static_cast<double>(ky * y) / static_cast<double>(h);
                acc += rows[static_cast<std::size_t>(y * w + kx)] * cd(std::cos(a), std::sin(a));
            }
            out[static_cast<std::size_t>(ky * w + kx)] = acc;
        }
    return out;
}

inline void idft2(const std::vector<cd>& f, std::int64_t h, std::int64_t w, double* out) {
    std::vector<cd> rows(static_cast<std::size_t>(h * w));
    for (std::int64_t ky = 0; ky < h; ++ky)
        for (std::int64_t x = 0; x < w; ++x) {
            cd acc(0, 0);
            for (std::int64_t kx = 0; kx < w; ++kx) {
                const double a = kTwoPi * static_cast<double>(kx * x) / static_cast<double>(w);
                acc += f[static_cast<std::size_t>(ky * w + kx)] * cd(std::cos(a), std::sin(a));
            }
            rows[static_cast<std::size_t>(ky * w + x)] = acc;
        }
    const double norm = 1.0 / static_cast<double>(h * w);
    for (std::int64_t x = 0; x < w; ++x)
        for (std::int64_t y = 0; y < h; ++y) {
            cd acc(0, 0);
            for (std::int64_t ky = 0; ky < h; ++ky) {
                const double a = kTwoPi * static_cast<double>(ky * y) / static_cast<double>(h);
                acc += rows[static_cast<std::size_t>(ky * w + x)] * cd(std::cos(a), std::sin(a));
            }
            out[y * w + x] = acc.real() * norm;
        }
}

inline std::int64_t signed_freq(std::int64_t k, std::int64_t n) { return k <= n / 2 ? k : k - n; }

// Per-mode evolution factor over time t.
inline cd mode_factor(const TrajectorySpec& s, std::int64_t fx, std::int64_t fy, double t) {
    if (s.system == System::heat2d) {
        const double k2 = static_cast<double>(fx * fx + fy * fy);
        return cd(std::exp(-s.nu * 4.0 * 9.869604401089358 * k2 * t), 0.0);  // 4 pi^2 |k|^2
    }
    const double phase = -kTwoPi * (static_cast<double>(fx) * s.ax + static_cast<double>(fy) * s.ay) * t;
    return cd(std::cos(phase), std::sin(phase));
}

// Band-limited Hermitian-symmetric random spectrum, |k| <= H/4.
inline std::vector<cd> random_spectrum(const TrajectorySpec& s, Rng& rng) {
    const std::int64_t h = s.h, w = s.w;
    std::vector<cd> f(static_cast<std::size_t>(h * w), cd(0, 0));
    const std::int64_t kmax = std::min(h, w) / 4;
    for (std::int64_t fy = -kmax; fy <= kmax; ++fy)
        for (std::int64_t fx = -kmax; fx <= kmax; ++fx) {
            if (fx * fx + fy * fy > kmax * kmax) continue;
            if (fy < 0 || (fy == 0 && fx < 0)) continue;  // fill half-plane, mirror the rest
            const double amp = 1.0 / (1.0 + static_cast<double>(fx * fx + fy * fy));
            cd a(amp * rng.normal(), amp * rng.normal());
            if (fx == 0 && fy == 0) a = cd(0.0, 0.0);  // zero mean field
            const std::int64_t px = (fx + w) % w, py = (fy + h) % h;
            const std::int64_t qx = (w - px) % w, qy = (h - py) % h;
            if (px == qx && py == qy) a = cd(a.real(), 0.0);
            f[static_cast<std::size_t>(py * w + px)] = a;
            f[static_cast<std::size_t>(qy * w + qx)] = std::conj(a);
        }
    return f;
}

}  // namespace detail_synth

// One exact (heat/advection) or reference (gray-scott, RK4 at
// dt/(16*substep_mult)) step from an arbitrary state [H,W,C].
inline Tensor oracle_step(const TrajectorySpec& spec, const Tensor& state, int substep_mult = 1) {
    spec.validate();
    const std::int64_t h = spec.h, w = spec.w, c = spec.channels();
    if (state.shape() != Shape{h, w, c})
        throw DimensionError("oracle_step: state " + shape_str(state.shape()) + " does not match spec");
    if (spec.system == System::heat2d || spec.system == System::advection2d) {
        std::vector<double> plane(static_cast<std::size_t>(h * w));
        for (std::int64_t i = 0; i < h * w; ++i) plane[static_cast<std::size_t>(i)] = state[i];
        auto f = detail_synth::dft2(plane.data(), h, w);
        for (std::int64_t ky = 0; ky < h; ++ky)
            for (std::int64_t kx = 0; kx < w; ++kx)
                f[static_cast<std::size_t>(ky * w + kx)] *=
                    detail_synth::mode_factor(spec, detail_synth::signed_freq(kx, w),
                                              detail_synth::signed_freq(ky, h), spec.dt);
        Tensor out = Tensor::uninit({h, w, 1});
        detail_synth::idft2(f, h, w, out.data());
        return out;
    }
    // gray-scott RK4
    const std::int64_t n = h * w;
    std::vector<double> u(static_cast<std::size_t>(n)), v(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        u[static_cast<std::size_t>(i)] = state[i * 2];
        v[static_cast<std::size_t>(i)] = state[i * 2 + 1];
    }
    const double inv_dx2 = static_cast<double>(w * w);  // dx = 1/W on the unit square
    const double inv_dy2 = static_cast<double>(h * h);
    auto rhs = [&](const std::vector<double>& uu, const std::vector<double>& vv, std::vector<double>& du,
                   std::vector<double>& dv) {
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x) {
                const std::int64_t i = y * w + x;
                const std::int64_t xm = y * w + (x + w - 1) % w, xp = y * w + (x + 1) % w;
                const std::int64_t ym = ((y + h - 1) % h) * w + x, yp = ((y + 1) % h) * w + x;
                const double lap_u = (uu[static_cast<std::size_t>(xm)] + uu[static_cast<std::size_t>(xp)] -
                                      2.0 * uu[static_cast<std::size_t>(i)]) *
                                         inv_dx2 +
                                     (uu[static_cast<std::size_t>(ym)] + uu[static_cast<std::size_t>(yp)] -
                                      2.0 * uu[static_cast<std::size_t>(i)]) *
                                         inv_dy2;
                const double lap_v = (vv[static_cast<std::size_t>(xm)] + vv[static_cast<std::size_t>(xp)] -
                                      2.0 * vv[static_cast<std::size_t>(i)]) *
                                         inv_dx2 +
                                     (vv[static_cast<std::size_t>(ym)] + vv[static_cast<std::size_t>(yp)] -
                                      2.0 * vv[static_cast<std::size_t>(i)]) *
                                         inv_dy2;
                const double uvv = uu[static_cast<std::size_t>(i)] * vv[static_cast<std::size_t>(i)] *
                                   vv[static_cast<std::size_t>(i)];
                du[static_cast<std::size_t>(i)] =
                    spec.gs_du * lap_u - uvv + spec.gs_feed * (1.0 - uu[static_cast<std::size_t>(i)]);
                dv[static_cast<std::size_t>(i)] =
                    spec.gs_dv * lap_v + uvv - (spec.gs_feed + spec.gs_kill) * vv[static_cast<std::size_t>(i)];
            }
    };
    const int substeps = 16 * substep_mult;
    const double hstep = spec.dt / static_cast<double>(substeps);
    std::vector<double> k1u(u.size()), k1v(u.size()), k2u(u.size()), k2v(u.size()), k3u(u.size()),
        k3v(u.size()), k4u(u.size()), k4v(u.size()), tu(u.size()), tv(u.size());
    for (int s = 0; s < substeps; ++s) {
        rhs(u, v, k1u, k1v);
        for (std::size_t i = 0; i < u.size(); ++i) {
            tu[i] = u[i] + 0.5 * hstep * k1u[i];
            tv[i] = v[i] + 0.5 * hstep * k1v[i];
        }
        rhs(tu, tv, k2u, k2v);
        for (std::size_t i = 0; i < u.size(); ++i) {
            tu[i] = u[i] + 0.5 * hstep * k2u[i];
            tv[i] = v[i] + 0.5 * hstep * k2v[i];
        }
        rhs(tu, tv, k3u, k3v);
        for (std::size_t i = 0; i < u.size(); ++i) {
            tu[i] = u[i] + hstep * k3u[i];
            tv[i] = v[i] + hstep * k3v[i];
        }
        rhs(tu, tv, k4u, k4v);
        for (std::size_t i = 0; i < u.size(); ++i) {
            u[i] += hstep / 6.0 * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i]);
            v[i] += hstep / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
            if (!std::isfinite(u[i]) || !std::isfinite(v[i]) || std::abs(u[i]) > 1e3)
                throw NumericError("gray_scott2d: oracle blow-up (unstable parameters)");
        }
    }
    Tensor out = Tensor::uninit({h, w, 2});
    for (std::int64_t i = 0; i < n; ++i) {
        out.data()[i * 2] = u[static_cast<std::size_t>(i)];
        out.data()[i * 2 + 1] = v[static_cast<std::size_t>(i)];
    }
    return out;
}

inline Trajectory generate(const TrajectorySpec& spec) {
    spec.validate();
    const std::int64_t h = spec.h, w = spec.w, c = spec.channels();
    Trajectory traj;
    traj.spec = spec;
    traj.frames = Tensor::uninit({spec.n_steps, h, w, c});
    Rng rng = Rng::stream(spec.seed, "trajectory-ic");
    if (spec.system == System::heat2d || spec.system == System::advection2d) {
        auto f0 = detail_synth::random_spectrum(spec, rng);
        {
            // normalize the initial frame to the requested standard deviation
            std::vector<double> frame0(static_cast<std::size_t>(h * w));
            detail_synth::idft2(f0, h, w, frame0.data());
            double mean = 0.0;
            for (double v : frame0) mean += v;
            mean /= static_cast<double>(h * w);
            double var = 0.0;
            for (double v : frame0) var += (v - mean) * (v - mean);
            var /= static_cast<double>(h * w);
            if (var > 0.0) {
                const double gain = spec.ic_std / std::sqrt(var);
                for (auto& v : f0) v *= gain;
            }
        }
        std::vector<detail_synth::cd> ft(f0.size());
        for (std::int64_t j = 0; j < spec.n_steps; ++j) {
            const double t = spec.dt * static_cast<double>(j);
            for (std::int64_t ky = 0; ky < h; ++ky)
                for (std::int64_t kx = 0; kx < w; ++kx)
                    ft[static_cast<std::size_t>(ky * w + kx)] =
                        f0[static_cast<std::size_t>(ky * w + kx)] *
                        detail_synth::mode_factor(spec, detail_synth::signed_freq(kx, w),
                                                  detail_synth::signed_freq(ky, h), t);
            detail_synth::idft2(ft, h, w, traj.frames.data() + j * h * w);
        }
        return traj;
    }
    // gray-scott: homogeneous (u,v) = (1,0) plus seeded spots
    Tensor state = Tensor::uninit({h, w, 2});
    for (std::int64_t i = 0; i < h * w; ++i) {
        state.data()[i * 2] = 1.0;
        state.data()[i * 2 + 1] = 0.0;
    }
    const int spots = 4;
    const std::int64_t radius = std::max<std::int64_t>(2, h / 16);
    for (int s = 0; s < spots; ++s) {
        const std::int64_t cy = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(h)));
        const std::int64_t cx = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(w)));
        for (std::int64_t dy = -radius; dy <= radius; ++dy)
            for (std::int64_t dx = -radius; dx <= radius; ++dx) {
                if (dx * dx + dy * dy > radius * radius) continue;
                const std::int64_t y = (cy + dy + h) % h, x = (cx + dx + w) % w;
                state.data()[(y * w + x) * 2] = 0.5;
                state.data()[(y * w + x) * 2 + 1] = 0.25;
            }
    }
    for (std::int64_t i = 0; i < h * w * 2; ++i) state.data()[i] += 0.01 * rng.normal();
    for (std::int64_t j = 0; j < spec.n_steps; ++j) {
        std::memcpy(traj.frames.data() + j * h * w * 2, state.data(),
                    sizeof(double) * static_cast<std::size_t>(h * w * 2));
        if (j + 1 < spec.n_steps) state = oracle_step(spec, state);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Trajectory file format: "WTRJ", u32 version, u32 system, u32 H, u32 W,
// u32 C, u64 n_steps, f64 dt, u64 seed, u32 n_params, f64 params[],
// then frame-major little-endian f64 values.

namespace detail_synth {

template <class T>
void put(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw ConfigError("trajectory file: truncated");
    return v;
}

inline std::vector<double> spec_params(const TrajectorySpec& s) {
    switch (s.system) {
        case System::heat2d: return {s.nu, s.ic_std};
        case System::advection2d: return {s.ax, s.ay, s.ic_std};
        case System::gray_scott2d: return {s.gs_du, s.gs_dv, s.gs_feed, s.gs_kill};
    }
    return {};
}

}  // namespace detail_synth

inline void write_trajectory(const std::string& path, const Trajectory& traj) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open for writing: " + path);
    os.write("WTRJ", 4);
    detail_synth::put<std::uint32_t>(os, 1);
    detail_synth::put<std::uint32_t>(os, static_cast<std::uint32_t>(traj.spec.system));
    detail_synth::put<std::uint32_t>(os, static_cast<std::uint32_t>(traj.spec.h));
    detail_synth::put<std::uint32_t>(os, static_cast<std::uint32_t>(traj.spec.w));
    detail_synth::put<std::uint32_t>(os, static_cast<std::uint32_t>(traj.spec.channels()));
    detail_synth::put<std::uint64_t>(os, static_cast<std::uint64_t>(traj.spec.n_steps));
    detail_synth::put<double>(os, traj.spec.dt);
    detail_synth::put<std::uint64_t>(os, traj.spec.seed);
    const auto params = detail_synth::spec_params(traj.spec);
    detail_synth::put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
    for (double p : params) detail_synth::put<double>(os, p);
    os.write(reinterpret_cast<const char*>(traj.frames.data()),
             static_cast<std::streamsize>(sizeof(double)) * traj.frames.size());
    if (!os) throw ConfigError("write failed: " + path);
}

inline Trajectory read_trajectory(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open trajectory file: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "WTRJ") throw ConfigError("not a trajectory file: " + path);
    const auto version = detail_synth::get<std::uint32_t>(is);
    if (version != 1) throw ConfigError("unsupported trajectory version " + std::to_string(version));
    Trajectory traj;
    traj.spec.system = static_cast<System>(detail_synth::get<std::uint32_t>(is));
    traj.spec.h = detail_synth::get<std::uint32_t>(is);
    traj.spec.w = detail_synth::get<std::uint32_t>(is);
    const auto c = detail_synth::get<std::uint32_t>(is);
    traj.spec.n_steps = static_cast<std::int64_t>(detail_synth::get<std::uint64_t>(is));
    traj.spec.dt = detail_synth::get<double>(is);
    traj.spec.seed = detail_synth::get<std::uint64_t>(is);
    const auto np = detail_synth::get<std::uint32_t>(is);
    std::vector<double> params(np);
    for (auto& p : params) p = detail_synth::get<double>(is);
    switch (traj.spec.system) {
        case System::heat2d:
            if (np >= 1) traj.spec.nu = params[0];
            if (np >= 2) traj.spec.ic_std = params[1];
            break;
        case System::advection2d:
            if (np >= 2) {
                traj.spec.ax = params[0];
                traj.spec.ay = params[1];
            }
            if (np >= 3) traj.spec.ic_std = params[2];
            break;
        case System::gray_scott2d:
            if (np >= 4) {
                traj.spec.gs_du = params[0];
                traj.spec.gs_dv = params[1];
                traj.spec.gs_feed = params[2];
                traj.spec.gs_kill = params[3];
            }
            break;
    }
    traj.frames = Tensor::uninit({traj.spec.n_steps, traj.spec.h, traj.spec.w, static_cast<std::int64_t>(c)});
    is.read(reinterpret_cast<char*>(traj.frames.data()),
            static_cast<std::streamsize>(sizeof(double)) * traj.frames.size());
    if (!is) throw ConfigError("trajectory file: truncated frames in " + path);
    return traj;
}

}  // namespace wavelit
