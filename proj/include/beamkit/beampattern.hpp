// beampattern.hpp
// Spatial response of filter-and-sum weights over a DOA grid:
//   FD:  B(theta, f) = | sum_m w_m^*(f_bin) exp(-j 2 pi f tau_m(theta)) |
//   TD:  B(theta, f) = | sum_m w_m       exp(-j 2 pi f tau_m(theta)) |
// with tau_m(theta) the per-channel plane-wave delay in seconds. TD weights
// are frame-averaged first, so the gain depends on theta and f only through
// the product f * cos(theta): the pattern is frequency-invariant in shape.
#pragma once

#include <cmath>
#include <complex>
#include <fstream>
#include <string>
#include <vector>

#include "beamkit/beamformers.hpp"
#include "beamkit/geometry.hpp"

namespace beamkit {

inline double channel_delay_seconds(const ArrayGeometry& g, std::size_t m, double theta_deg) {
    return (g.positions[m] - g.positions[g.reference]) * std::cos(theta_deg * kPi / 180.0) /
           g.sound_speed;
}

// [theta][freq] linear gains for frequency-domain weights
inline std::vector<std::vector<double>> beam_pattern_fd(const FdWeights& w,
                                                        const ArrayGeometry& geometry,
                                                        const std::vector<double>& freqs_hz,
                                                        const std::vector<double>& thetas_deg,
                                                        double sample_rate, std::size_t n_fft) {
    require(!w.time_variant, "beam_pattern_fd: pass a selected frame for time-variant weights");
    std::size_t M = w.channels;
    std::vector<std::vector<double>> out(thetas_deg.size(),
                                         std::vector<double>(freqs_hz.size(), 0.0));
    for (std::size_t a = 0; a < thetas_deg.size(); a++) {
        for (std::size_t q = 0; q < freqs_hz.size(); q++) {
            auto bin = static_cast<std::size_t>(
                std::llround(freqs_hz[q] * double(n_fft) / sample_rate));
            require(bin < w.ti.size(), "beam_pattern_fd: frequency above Nyquist");
            cplx acc(0);
            for (std::size_t m = 0; m < M; m++) {
                double tau = channel_delay_seconds(geometry, m, thetas_deg[a]);
                acc += std::conj(w.ti[bin][m]) * std::polar(1.0, -kTwoPi * freqs_hz[q] * tau);
            }
            out[a][q] = std::abs(acc);
        }
    }
    return out;
}

// [theta][freq] linear gains for a time-domain spatial weight vector
// (a frame's weights, averaged over n when per-sample)
inline std::vector<std::vector<double>> beam_pattern_td(const std::vector<double>& w_spatial,
                                                        const ArrayGeometry& geometry,
                                                        const std::vector<double>& freqs_hz,
                                                        const std::vector<double>& thetas_deg) {
    std::size_t M = w_spatial.size();
    std::vector<std::vector<double>> out(thetas_deg.size(),
                                         std::vector<double>(freqs_hz.size(), 0.0));
    for (std::size_t a = 0; a < thetas_deg.size(); a++)
        for (std::size_t q = 0; q < freqs_hz.size(); q++) {
            cplx acc(0);
            for (std::size_t m = 0; m < M; m++) {
                double tau = channel_delay_seconds(geometry, m, thetas_deg[a]);
                acc += w_spatial[m] * std::polar(1.0, -kTwoPi * freqs_hz[q] * tau);
            }
            out[a][q] = std::abs(acc);
        }
    return out;
}

// mean spatial weight vector of time-domain weights
inline std::vector<double> average_spatial_weights(const TdWeights& w) {
    std::size_t M = w.channels;
    std::vector<double> out(M, 0.0);
    std::size_t count = 0;
    if (w.per_sample) {
        for (const auto& fr : w.sample_gains)
            for (const auto& smp : fr) {
                for (std::size_t m = 0; m < M; m++) out[m] += smp[m];
                count++;
            }
    } else {
        for (const auto& fr : w.frame_constant) {
            for (std::size_t m = 0; m < M; m++) out[m] += fr[m];
            count++;
        }
    }
    for (auto& v : out) v /= double(std::max<std::size_t>(count, 1));
    return out;
}

// CSV: header "theta_deg,g_<f1>hz,..."; gains in dB floored at -60
inline void write_beam_pattern_csv(const std::string& path,
                                   const std::vector<double>& thetas_deg,
                                   const std::vector<double>& freqs_hz,
                                   const std::vector<std::vector<double>>& gains) {
    std::ofstream out(path);
    require(out.good(), "cannot open for writing: " + path);
    out << "theta_deg";
    for (double f : freqs_hz) out << ",g_" << static_cast<long>(f) << "hz";
    out << "\n";
    for (std::size_t a = 0; a < thetas_deg.size(); a++) {
        out << thetas_deg[a];
        for (std::size_t q = 0; q < freqs_hz.size(); q++) {
            double db = 20.0 * std::log10(std::max(gains[a][q], 1e-12));
            out << "," << std::max(db, -60.0);
        }
        out << "\n";
    }
    require(out.good(), "write failed: " + path);
}

}  // namespace beamkit
