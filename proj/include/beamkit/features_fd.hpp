// features_fd.hpp
// Frequency-domain features: log power spectra, interchannel phase
// differences, DOA-conditioned phase templates and the directional feature
//   FD-DF(t,f) = sum_p cos(IPD^(p)(t,f) - T-IPD^(p)(f)).
#pragma once

#include <cmath>
#include <vector>

#include "beamkit/common.hpp"
#include "beamkit/delay.hpp"
#include "beamkit/geometry.hpp"
#include "beamkit/stft.hpp"

namespace beamkit {

inline constexpr double kMagnitudeFloor = 1e-8;

// 20 log10 |Y^ref(t,f)|, magnitude floored before the log.
inline std::vector<std::vector<double>> lps(const ComplexSpectrogram& spec,
                                            std::size_t ref_channel) {
    require(ref_channel < spec.channels(), "lps: reference channel out of range");
    std::vector<std::vector<double>> out(spec.frames(), std::vector<double>(spec.bands()));
    for (std::size_t t = 0; t < spec.frames(); t++)
        for (std::size_t f = 0; f < spec.bands(); f++)
            out[t][f] = 20.0 * std::log10(std::max(std::abs(spec.values[ref_channel][t][f]),
                                                   kMagnitudeFloor));
    return out;
}

// angle(Y^{p1}) - angle(Y^{p2}), wrapped to (-pi, pi]. Result is [pair][t][f].
inline std::vector<std::vector<std::vector<double>>> ipd(
    const ComplexSpectrogram& spec, const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    std::vector<std::vector<std::vector<double>>> out(
        pairs.size(),
        std::vector<std::vector<double>>(spec.frames(), std::vector<double>(spec.bands())));
    for (std::size_t p = 0; p < pairs.size(); p++) {
        require(pairs[p].first < spec.channels() && pairs[p].second < spec.channels(),
                "ipd: pair channel out of range");
        for (std::size_t t = 0; t < spec.frames(); t++)
            for (std::size_t f = 0; f < spec.bands(); f++)
                out[p][t][f] = wrap_phase(std::arg(spec.values[pairs[p].first][t][f]) -
                                          std::arg(spec.values[pairs[p].second][t][f]));
    }
    return out;
}

// DOA-conditioned phase template, [pair][f] in (-pi, pi].
struct TargetPhaseTemplate {
    std::vector<std::vector<double>> t_ipd;  // [pair][band]
    double theta_deg = 0.0;
};

// Phase difference a unit impulse from theta experiences at each pair,
// computed through the STFT kernel. The impulse sits mid-frame so both it
// and its fractionally delayed copy stay inside the window support (the
// analysis window vanishes at the frame edges). The result equals the
// analytic wrap(2*pi*f_bin*tau/N) within interpolator tolerance.
inline TargetPhaseTemplate t_ipd(const ArrayGeometry& geometry, double theta_deg,
                                 const StftKernel& kernel, double sample_rate = 16000.0) {
    require(theta_deg >= 0.0 && theta_deg <= 180.0, "t_ipd: theta outside [0, 180] degrees");
    const std::size_t n = kernel.window_length();
    const std::size_t center = n / 2;
    TargetPhaseTemplate out;
    out.theta_deg = theta_deg;
    out.t_ipd.assign(geometry.pairs.size(), std::vector<double>(kernel.bands(), 0.0));

    std::vector<double> impulse(n, 0.0);
    impulse[center] = 1.0;
    std::vector<cplx> base(kernel.bands());
    kernel.analyze(impulse.data(), base.data());

    std::vector<cplx> delayed(kernel.bands());
    for (std::size_t p = 0; p < geometry.pairs.size(); p++) {
        double tau = steering_delay(geometry, p, theta_deg, sample_rate);
        // interpolator tails may truncate at the frame edge, exactly as a
        // framed signal would
        require(std::fabs(tau) < double(center), "t_ipd: window too short for this pair delay");
        auto shifted = fractional_delay(impulse, tau);
        kernel.analyze(shifted.data(), delayed.data());
        for (std::size_t f = 0; f < kernel.bands(); f++)
            out.t_ipd[p][f] = wrap_phase(std::arg(base[f]) - std::arg(delayed[f]));
    }
    return out;
}

// Analytic template wrap(2*pi*f_bin*tau(theta)/N); the independent form the
// impulse-based computation must agree with.
inline TargetPhaseTemplate t_ipd_analytic(const ArrayGeometry& geometry, double theta_deg,
                                          std::size_t window_length, std::size_t bands,
                                          double sample_rate = 16000.0) {
    TargetPhaseTemplate out;
    out.theta_deg = theta_deg;
    out.t_ipd.assign(geometry.pairs.size(), std::vector<double>(bands, 0.0));
    for (std::size_t p = 0; p < geometry.pairs.size(); p++) {
        double tau = steering_delay(geometry, p, theta_deg, sample_rate);
        for (std::size_t f = 0; f < bands; f++)
            out.t_ipd[p][f] = wrap_phase(kTwoPi * double(f) * tau / double(window_length));
    }
    return out;
}

// FD-DF(t,f) = sum_p cos(IPD^(p)(t,f) - T-IPD^(p)(f)); value in [-P, P].
inline std::vector<std::vector<double>> fd_df(
    const std::vector<std::vector<std::vector<double>>>& ipd_values,
    const TargetPhaseTemplate& tpl) {
    require(ipd_values.size() == tpl.t_ipd.size(), "fd_df: pair count mismatch");
    require(!ipd_values.empty(), "fd_df: no pairs");
    std::size_t T = ipd_values[0].size(), F = ipd_values[0][0].size();
    std::vector<std::vector<double>> out(T, std::vector<double>(F, 0.0));
    for (std::size_t p = 0; p < ipd_values.size(); p++) {
        require(tpl.t_ipd[p].size() == F, "fd_df: band count mismatch");
        for (std::size_t t = 0; t < T; t++)
            for (std::size_t f = 0; f < F; f++)
                out[t][f] += std::cos(ipd_values[p][t][f] - tpl.t_ipd[p][f]);
    }
    return out;
}

// The feature stack fed to the FD mask estimator; IPD enters as cos/sin
// pairs to avoid the wrap discontinuity. Width F*(1 + 2P + 1).
struct FdFeatureStack {
    std::vector<std::vector<double>> lps;                    // [t][f]
    std::vector<std::vector<std::vector<double>>> ipd;       // [p][t][f]
    std::vector<std::vector<double>> fd_df;                  // [t][f]

    std::size_t frames() const { return lps.size(); }
    std::size_t width() const {
        return lps.empty() ? 0 : lps[0].size() * (2 + 2 * ipd.size());
    }
    // concatenated row: [LPS | cos IPD_p... | sin IPD_p... | FD-DF]
    std::vector<double> row(std::size_t t) const {
        std::vector<double> r;
        r.reserve(width());
        r.insert(r.end(), lps[t].begin(), lps[t].end());
        for (const auto& p : ipd) {
            for (double v : p[t]) r.push_back(std::cos(v));
            for (double v : p[t]) r.push_back(std::sin(v));
        }
        r.insert(r.end(), fd_df[t].begin(), fd_df[t].end());
        return r;
    }
};

inline FdFeatureStack fd_features(const ComplexSpectrogram& spec, const ArrayGeometry& geometry,
                                  double target_doa_deg, const StftKernel& kernel,
                                  std::size_t ref_channel = 0) {
    FdFeatureStack st;
    st.lps = lps(spec, ref_channel);
    st.ipd = ipd(spec, geometry.pairs);
    st.fd_df = fd_df(st.ipd, t_ipd(geometry, target_doa_deg, kernel, spec.sample_rate));
    return st;
}

}  // namespace beamkit
