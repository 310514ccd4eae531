// losses.hpp
// Scale-invariant SDR and the log Mel-filterbank distance; the plain value
// routines here are shared by the evaluation metric and the training losses
// so the two agree bit for bit.
#pragma once

#include <cmath>
#include <vector>

#include "beamkit/common.hpp"
#include "beamkit/stft.hpp"

namespace beamkit {

inline constexpr double kSiSdrCapDb = 80.0;

//   s_target = <est, ref> ref / ||ref||^2
//   e_noise  = est - s_target
//   SI-SDR   = 10 log10(||s_target||^2 / ||e_noise||^2), capped at +80 dB
// Inputs are trimmed to the shorter length.
inline double si_sdr_db(const std::vector<double>& est, const std::vector<double>& ref) {
    std::size_t n = std::min(est.size(), ref.size());
    require(n > 0, "si_sdr: empty input");
    double dot = 0.0, rr = 0.0;
    for (std::size_t k = 0; k < n; k++) {
        dot += est[k] * ref[k];
        rr += ref[k] * ref[k];
    }
    require(rr > 0.0, "si_sdr: zero reference");
    double alpha = dot / rr;
    double a = 0.0, b = 0.0;
    for (std::size_t k = 0; k < n; k++) {
        double st = alpha * ref[k];
        double e = est[k] - st;
        a += st * st;
        b += e * e;
    }
    if (b < 1e-16 * a) return kSiSdrCapDb;
    return 10.0 * std::log10(a / b);
}

// gradient of SI-SDR with respect to the estimate (zero when capped):
//   d/d est = (10/ln 10) (2 alpha ref / A - 2 e / B)
inline std::vector<double> si_sdr_grad(const std::vector<double>& est,
                                       const std::vector<double>& ref) {
    std::size_t n = std::min(est.size(), ref.size());
    double dot = 0.0, rr = 0.0;
    for (std::size_t k = 0; k < n; k++) {
        dot += est[k] * ref[k];
        rr += ref[k] * ref[k];
    }
    require(rr > 0.0, "si_sdr_grad: zero reference");
    double alpha = dot / rr;
    double a = 0.0, b = 0.0;
    std::vector<double> e(n);
    for (std::size_t k = 0; k < n; k++) {
        double st = alpha * ref[k];
        e[k] = est[k] - st;
        a += st * st;
        b += e[k] * e[k];
    }
    std::vector<double> g(est.size(), 0.0);
    if (b < 1e-16 * a || a == 0.0) return g;  // capped: constant
    const double c = 10.0 / std::log(10.0);
    for (std::size_t k = 0; k < n; k++) g[k] = c * (2.0 * alpha * ref[k] / a - 2.0 * e[k] / b);
    return g;
}

// 40 triangular Mel filters spanning 0-8 kHz; weights over one-sided bins
struct MelBank {
    std::vector<std::vector<double>> weights;  // [band][bin]

    static double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
    static double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

    static MelBank make(std::size_t bands, std::size_t bins, double sample_rate,
                        std::size_t n_fft) {
        MelBank bank;
        bank.weights.assign(bands, std::vector<double>(bins, 0.0));
        double mel_max = hz_to_mel(sample_rate / 2.0);
        std::vector<double> edges(bands + 2);
        for (std::size_t i = 0; i < edges.size(); i++)
            edges[i] = mel_to_hz(mel_max * double(i) / double(bands + 1));
        for (std::size_t b = 0; b < bands; b++) {
            double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
            for (std::size_t f = 0; f < bins; f++) {
                double fhz = double(f) * sample_rate / double(n_fft);
                if (fhz > lo && fhz < mid)
                    bank.weights[b][f] = (fhz - lo) / (mid - lo);
                else if (fhz >= mid && fhz < hi)
                    bank.weights[b][f] = (hi - fhz) / (hi - mid);
            }
        }
        return bank;
    }
};

// mean over frames and bands of (log10 MFB(|est|) - log10 MFB(|ref|))^2
inline double lmfb_loss(const std::vector<std::vector<cplx>>& est_spec,
                        const std::vector<std::vector<cplx>>& ref_spec, const MelBank& bank) {
    require(est_spec.size() == ref_spec.size() && !est_spec.empty() &&
                est_spec[0].size() == ref_spec[0].size(),
            "lmfb_loss: spectrogram shapes differ");
    const double floor = 1e-8;
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < est_spec.size(); t++) {
        for (const auto& w : bank.weights) {
            double ea = 0.0, eb = 0.0;
            for (std::size_t f = 0; f < est_spec[t].size(); f++) {
                ea += w[f] * std::abs(est_spec[t][f]);
                eb += w[f] * std::abs(ref_spec[t][f]);
            }
            double d = std::log10(ea + floor) - std::log10(eb + floor);
            acc += d * d;
            count++;
        }
    }
    return acc / double(count);
}

}  // namespace beamkit
