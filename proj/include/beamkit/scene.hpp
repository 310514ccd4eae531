// scene.hpp
// Free-field two-speaker scene synthesis: per-channel fractional steering
// delays, SIR scaling at the reference channel, y = s + n exactly.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "beamkit/common.hpp"
#include "beamkit/delay.hpp"
#include "beamkit/geometry.hpp"
#include "beamkit/signal.hpp"

namespace beamkit {

struct SceneSpec {
    double target_doa_deg = 90.0;
    double interferer_doa_deg = 90.0;
    double sir_db = 0.0;
    std::uint64_t seed = 0;
    double duration_s = 1.0;
};

struct Scene {
    MultichannelSignal mixture;     // y
    MultichannelSignal target;      // s, per-channel image
    MultichannelSignal interferer;  // n, per-channel image
    SceneSpec spec;
    ArrayGeometry geometry;
};

inline double mean_power(const std::vector<double>& x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return x.empty() ? 0.0 : acc / double(x.size());
}

// Speech-shaped noise with an on/off activity envelope: white Gaussian noise
// through a one-pole lowpass (spectral tilt), a slowly wandering two-pole
// resonance (formant-like, gives partial time-frequency disjointness between
// sources) and a DC blocker, gated by raised-cosine segments of 80-320 ms,
// unit RMS overall.
inline std::vector<double> synth_speech_like(std::size_t length, double sample_rate, Rng& rng) {
    std::vector<double> x(length);
    double lp = 0.0, prev_in = 0.0, hp = 0.0;
    const double a = 0.92;    // lowpass pole
    const double dc = 0.995;  // DC blocker
    const double rr = 0.997;  // resonance radius; narrow formant-like peaks
    const int n_res = 2;
    double r1[n_res] = {0, 0}, r2[n_res] = {0, 0};
    double omega[n_res], target[n_res];
    std::size_t glide[n_res] = {0, 0};
    for (int q = 0; q < n_res; q++) omega[q] = target[q] = rng.uniform(0.04, 0.5) * kPi;
    for (std::size_t k = 0; k < length; k++) {
        double w = rng.gaussian();
        lp = a * lp + (1.0 - a) * w;
        double v = lp * 4.0 + 0.15 * w;  // tilted spectrum with a high band floor
        double res_sum = 0.0;
        for (int q = 0; q < n_res; q++) {
            if (glide[q] == 0) {
                target[q] = rng.uniform(0.04, 0.5) * kPi;
                glide[q] = 400 + rng.uniform_index(1200);  // 25-100 ms glides
            }
            omega[q] += (target[q] - omega[q]) / double(glide[q]);
            glide[q]--;
            double res = v + 2.0 * rr * std::cos(omega[q]) * r1[q] - rr * rr * r2[q];
            r2[q] = r1[q];
            r1[q] = res;
            res_sum += res;
        }
        v = 1.0 * res_sum + 0.01 * v;
        hp = dc * hp + v - prev_in;
        prev_in = v;
        x[k] = hp;
    }

    // activity envelope
    const std::size_t ramp = static_cast<std::size_t>(0.010 * sample_rate);
    std::vector<double> env(length, 0.0);
    std::size_t k = 0;
    bool active = rng.uniform() < 0.7;
    while (k < length) {
        double seg_s = active ? rng.uniform(0.12, 0.32) : rng.uniform(0.08, 0.20);
        std::size_t seg = std::max<std::size_t>(1, static_cast<std::size_t>(seg_s * sample_rate));
        seg = std::min(seg, length - k);
        if (active) {
            for (std::size_t i = 0; i < seg; i++) {
                double g = 1.0;
                if (i < ramp) g = 0.5 - 0.5 * std::cos(kPi * double(i) / double(ramp));
                if (seg - 1 - i < ramp)
                    g = std::min(g, 0.5 - 0.5 * std::cos(kPi * double(seg - 1 - i) / double(ramp)));
                env[k + i] = g;
            }
        }
        k += seg;
        active = !active;
    }
    bool any_active = false;
    for (double e : env)
        if (e > 0) any_active = true;
    for (std::size_t i = 0; i < length; i++) x[i] *= any_active ? env[i] : 1.0;

    // soft limiter keeps the crest factor speech-like
    double pre = std::sqrt(std::max(mean_power(x), 1e-30));
    for (double& v : x) v = 3.0 * pre * std::tanh(v / (3.0 * pre));

    double p = mean_power(x);
    require(p > 0.0, "degenerate synthetic source");
    double g = 1.0 / std::sqrt(p);
    for (double& v : x) v *= g;
    return x;
}

// Broadband variant: the same activity-gated noise without the resonances.
// Latent-domain directional features of an untrained (random) filter bank
// need broadband excitation to show their DOA signature.
inline std::vector<double> synth_broadband_like(std::size_t length, double sample_rate,
                                                Rng& rng) {
    std::vector<double> x(length);
    double lp = 0.0, prev_in = 0.0, hp = 0.0;
    for (std::size_t k = 0; k < length; k++) {
        double w = rng.gaussian();
        lp = 0.92 * lp + 0.08 * w;
        double v = lp * 4.0 + 0.5 * w;
        hp = 0.995 * hp + v - prev_in;
        prev_in = v;
        x[k] = hp;
    }
    const std::size_t ramp = static_cast<std::size_t>(0.010 * sample_rate);
    std::vector<double> env(length, 0.0);
    std::size_t k = 0;
    bool active = rng.uniform() < 0.7;
    while (k < length) {
        double seg_s = active ? rng.uniform(0.12, 0.32) : rng.uniform(0.08, 0.20);
        std::size_t seg = std::max<std::size_t>(1, static_cast<std::size_t>(seg_s * sample_rate));
        seg = std::min(seg, length - k);
        if (active) {
            for (std::size_t i = 0; i < seg; i++) {
                double g = 1.0;
                if (i < ramp) g = 0.5 - 0.5 * std::cos(kPi * double(i) / double(ramp));
                if (seg - 1 - i < ramp)
                    g = std::min(g, 0.5 - 0.5 * std::cos(kPi * double(seg - 1 - i) / double(ramp)));
                env[k + i] = g;
            }
        }
        k += seg;
        active = !active;
    }
    bool any_active = false;
    for (double e : env)
        if (e > 0) any_active = true;
    for (std::size_t i = 0; i < length; i++) x[i] *= any_active ? env[i] : 1.0;
    double p = mean_power(x);
    require(p > 0.0, "degenerate synthetic source");
    double g = 1.0 / std::sqrt(p);
    for (double& v : x) v *= g;
    return x;
}

// Voiced-excitation variant: a positive glottal-like pulse train at a
// wandering pitch through a one-pole decay. Its sign-consistent pulses give
// the real-valued latent features a stable interchannel-delay signature.
inline std::vector<double> synth_voiced_like(std::size_t length, double sample_rate, Rng& rng) {
    std::vector<double> x(length, 0.0);
    double pitch = rng.uniform(80.0, 220.0);
    double pos = rng.uniform(0.0, 100.0);
    while (pos < double(length)) {
        x[static_cast<std::size_t>(pos)] += rng.uniform(0.7, 1.3);
        pitch = std::min(250.0, std::max(70.0, pitch + rng.uniform(-4.0, 4.0)));
        pos += sample_rate / pitch;
    }
    double s = 0.0;
    for (auto& v : x) {
        s = 0.92 * s + v;
        v = s;
    }
    double p = mean_power(x);
    require(p > 0.0, "degenerate synthetic source");
    for (auto& v : x) v /= std::sqrt(p);
    return x;
}

// Per-channel free-field source image: channel m carries the source delayed
// by its steering delay relative to the reference channel.
inline MultichannelSignal propagate(const std::vector<double>& source, const ArrayGeometry& g,
                                    double theta_deg, double sample_rate) {
    MultichannelSignal img(g.channels(), source.size(), sample_rate);
    for (std::size_t m = 0; m < g.channels(); m++) {
        double tau = channel_delay(g, m, theta_deg, sample_rate);
        img.samples[m] = (m == g.reference) ? source : fractional_delay(source, tau);
    }
    return img;
}

inline Scene simulate_scene(const SceneSpec& spec, const ArrayGeometry& geometry,
                            const std::vector<double>& target_src,
                            const std::vector<double>& interferer_src,
                            double sample_rate = 16000.0) {
    geometry.validate();
    require(target_src.size() == interferer_src.size(), "source length mismatch");
    double ps = mean_power(target_src), pn = mean_power(interferer_src);
    require(ps > 0.0 && pn > 0.0, "degenerate source");

    // scale the interferer so the reference-channel power ratio equals sir_db
    double alpha = std::sqrt(ps / (pn * std::pow(10.0, spec.sir_db / 10.0)));
    std::vector<double> n_src(interferer_src);
    for (double& v : n_src) v *= alpha;

    Scene scene;
    scene.spec = spec;
    scene.geometry = geometry;
    scene.target = propagate(target_src, geometry, spec.target_doa_deg, sample_rate);
    scene.interferer = propagate(n_src, geometry, spec.interferer_doa_deg, sample_rate);
    scene.mixture = MultichannelSignal(geometry.channels(), target_src.size(), sample_rate);
    for (std::size_t m = 0; m < geometry.channels(); m++)
        for (std::size_t k = 0; k < target_src.size(); k++)
            scene.mixture.samples[m][k] = scene.target.samples[m][k] +
                                          scene.interferer.samples[m][k];
    return scene;
}

// Scene with synthesized sources, fully determined by (spec.seed, spec).
inline Scene simulate_scene(const SceneSpec& spec, const ArrayGeometry& geometry,
                            double sample_rate = 16000.0) {
    auto len = static_cast<std::size_t>(spec.duration_s * sample_rate);
    Rng rng_t = Rng::derived(spec.seed, 1);
    Rng rng_i = Rng::derived(spec.seed, 2);
    auto s = synth_speech_like(len, sample_rate, rng_t);
    auto n = synth_speech_like(len, sample_rate, rng_i);
    return simulate_scene(spec, geometry, s, n, sample_rate);
}

}  // namespace beamkit
