// beamformers.hpp
// Closed-form beamformers in both domains.
//
//   FD MVDR : w(f) = Phi_nn^{-1} v / (v^H Phi_nn^{-1} v), v = PCA(Phi_ss)
//   FD MCWF : w(f) = Phi_yy^{-1} Phi_ys u
//   TD MVDR : w(t) = R_nn^{-1} h / (h^T R_nn^{-1} h), h = PCA(R_ss)
//   TD MCWF : w(t) = R_yy^{-1} r_ys
//
// The MVDR reference scaling: after forming the direction, the weight is
// rescaled so the response toward v equals v's reference-channel component
// (reference-channel distortionless). Every inversion gets diagonal loading
// eps * trace / M.
#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "beamkit/common.hpp"
#include "beamkit/features_td.hpp"
#include "beamkit/linalg.hpp"
#include "beamkit/scm.hpp"
#include "beamkit/signal.hpp"
#include "beamkit/stft.hpp"

namespace beamkit {

// complex filter-and-sum coefficients; [f][m] when time-invariant,
// [t][f][m] when time-variant
struct FdWeights {
    bool time_variant = false;
    std::vector<std::vector<cplx>> ti;
    std::vector<std::vector<std::vector<cplx>>> tv;
    std::size_t channels = 0;
};

// real filter-and-sum coefficients; [t][m] frame-constant or [t][n][m]
// per sample
struct TdWeights {
    bool per_sample = false;
    std::vector<std::vector<double>> frame_constant;
    std::vector<std::vector<std::vector<double>>> sample_gains;
    std::size_t channels = 0;
};

inline FdWeights fd_eq_mvdr(const FdScmAgg& phi_nn, const FdScmAgg& phi_ss, std::size_t ref) {
    require(phi_nn.channels == phi_ss.channels && phi_nn.values.size() == phi_ss.values.size(),
            "fd_eq_mvdr: statistic shapes differ");
    std::size_t M = phi_nn.channels, F = phi_nn.values.size();
    FdWeights out;
    out.channels = M;
    out.ti.assign(F, std::vector<cplx>(M));
    for (std::size_t f = 0; f < F; f++) {
        auto v = principal_eigenvector(phi_ss.values[f], M, ref);
        auto loaded = diag_load(phi_nn.values[f], M);
        auto x = solve_dense(loaded, v, M,
                             "fd_eq_mvdr at frequency bin " + std::to_string(f));
        cplx denom(0);
        for (std::size_t i = 0; i < M; i++) denom += std::conj(v[i]) * x[i];
        require(std::abs(denom) > 1e-300,
                "fd_eq_mvdr: degenerate response at frequency bin " + std::to_string(f));
        cplx scale = v[ref] / denom;  // v[ref] is real >= 0 by the PCA convention
        for (std::size_t i = 0; i < M; i++) out.ti[f][i] = x[i] * scale;
    }
    return out;
}

inline FdWeights fd_eq_mcwf(const FdScmAgg& phi_yy, const FdScmAgg& phi_ys, std::size_t ref) {
    require(phi_yy.channels == phi_ys.channels && phi_yy.values.size() == phi_ys.values.size(),
            "fd_eq_mcwf: statistic shapes differ");
    std::size_t M = phi_yy.channels, F = phi_yy.values.size();
    FdWeights out;
    out.channels = M;
    out.ti.assign(F, std::vector<cplx>(M));
    for (std::size_t f = 0; f < F; f++) {
        std::vector<cplx> rhs(M);
        for (std::size_t i = 0; i < M; i++) rhs[i] = phi_ys.values[f][i * M + ref];
        auto loaded = diag_load(phi_yy.values[f], M);
        // Wiener output estimates S_ref: hat s = w^H Y with w = Phi_yy^{-1} Phi_ys u,
        // so the solve target is the conjugate-consistent column
        auto x = solve_dense(loaded, rhs, M,
                             "fd_eq_mcwf at frequency bin " + std::to_string(f));
        out.ti[f] = x;
    }
    return out;
}

inline TdWeights td_eq_mvdr(const TdScm& r_nn, const TdScm& r_ss, std::size_t ref) {
    require(r_nn.mode != TdAveraging::per_sample && r_ss.mode == r_nn.mode,
            "td_eq_mvdr: needs frame-averaged or global statistics");
    std::size_t M = r_nn.channels;
    std::size_t T = (r_nn.mode == TdAveraging::global_avg) ? 1 : r_nn.frames();
    TdWeights out;
    out.channels = M;
    out.frame_constant.assign(T, std::vector<double>(M));
    for (std::size_t t = 0; t < T; t++) {
        auto h = principal_eigenvector(r_ss.at_frame(t), M, ref);
        auto loaded = diag_load(r_nn.at_frame(t), M);
        auto x = solve_dense(loaded, h, M, "td_eq_mvdr at frame " + std::to_string(t));
        double denom = 0;
        for (std::size_t i = 0; i < M; i++) denom += h[i] * x[i];
        require(std::fabs(denom) > 1e-300,
                "td_eq_mvdr: degenerate response at frame " + std::to_string(t));
        double scale = h[ref] / denom;
        for (std::size_t i = 0; i < M; i++) out.frame_constant[t][i] = x[i] * scale;
    }
    return out;
}

inline TdWeights td_eq_mcwf(const TdScm& r_yy, const std::vector<std::vector<double>>& r_ys) {
    require(r_yy.mode != TdAveraging::per_sample, "td_eq_mcwf: needs averaged statistics");
    std::size_t M = r_yy.channels;
    std::size_t T = (r_yy.mode == TdAveraging::global_avg) ? 1 : r_yy.frames();
    require(r_ys.size() == T, "td_eq_mcwf: statistic shapes differ");
    TdWeights out;
    out.channels = M;
    out.frame_constant.assign(T, std::vector<double>(M));
    for (std::size_t t = 0; t < T; t++) {
        auto loaded = diag_load(r_yy.at_frame(t), M);
        out.frame_constant[t] =
            solve_dense(loaded, r_ys[t], M, "td_eq_mcwf at frame " + std::to_string(t));
    }
    return out;
}

// Per-sample Wiener solve on the rank-1 statistics R_yy(t,n), r_ys(t,n):
// w(t,n) = (R_yy(t,n) + loading)^{-1} ybar(t,n) s_ref(t,n). With oracle
// targets this is the high-ceiling time-domain Wiener filter.
inline TdWeights td_eq_mcwf_per_sample(const Frames& y_frames,
                                       const std::vector<std::vector<double>>& s_ref_frames) {
    std::size_t T = y_frames.size(), M = y_frames[0].size(), N = y_frames[0][0].size();
    require(s_ref_frames.size() == T && s_ref_frames[0].size() == N,
            "td_eq_mcwf_per_sample: shape mismatch");
    TdWeights out;
    out.channels = M;
    out.per_sample = true;
    out.sample_gains.assign(T, std::vector<std::vector<double>>(N, std::vector<double>(M, 0.0)));
    std::vector<double> r(M * M), rhs(M);
    for (std::size_t t = 0; t < T; t++) {
        for (std::size_t n = 0; n < N; n++) {
            for (std::size_t i = 0; i < M; i++) {
                rhs[i] = y_frames[t][i][n] * s_ref_frames[t][n];
                for (std::size_t j = 0; j < M; j++)
                    r[i * M + j] = y_frames[t][i][n] * y_frames[t][j][n];
            }
            auto loaded = diag_load(r, M);
            out.sample_gains[t][n] =
                solve_dense(loaded, rhs, M, "td_eq_mcwf_per_sample at frame " + std::to_string(t));
        }
    }
    return out;
}

// Steering vector from globally averaged target statistics (Eq. 19's h).
inline std::vector<double> td_mvdr_steering(const Frames& s_frames, std::size_t ref) {
    auto r_ss = td_scm(s_frames, ScmKind::ss, TdAveraging::global_avg);
    return principal_eigenvector(r_ss.values[0][0], r_ss.channels, ref);
}

// MVDR with per-sample noise statistics and a fixed steering vector:
// w(t,n) = (R_nn(t,n) + loading)^{-1} h / (h^T (...) h), rescaled to the
// reference convention.
inline TdWeights td_eq_mvdr_per_sample(const Frames& n_frames, const std::vector<double>& h,
                                       std::size_t ref) {
    std::size_t T = n_frames.size(), M = n_frames[0].size(), N = n_frames[0][0].size();
    require(h.size() == M && ref < M, "td_eq_mvdr_per_sample: bad steering");
    TdWeights out;
    out.channels = M;
    out.per_sample = true;
    out.sample_gains.assign(T, std::vector<std::vector<double>>(N, std::vector<double>(M, 0.0)));
    std::vector<double> r(M * M);
    for (std::size_t t = 0; t < T; t++) {
        for (std::size_t n = 0; n < N; n++) {
            for (std::size_t i = 0; i < M; i++)
                for (std::size_t j = 0; j < M; j++)
                    r[i * M + j] = n_frames[t][i][n] * n_frames[t][j][n];
            auto loaded = diag_load(r, M);
            auto x = solve_dense(loaded, h, M,
                                 "td_eq_mvdr_per_sample at frame " + std::to_string(t));
            double denom = 0;
            for (std::size_t i = 0; i < M; i++) denom += h[i] * x[i];
            require(std::fabs(denom) > 1e-300, "td_eq_mvdr_per_sample: degenerate response");
            double scale = h[ref] / denom;
            for (std::size_t i = 0; i < M; i++) out.sample_gains[t][n][i] = x[i] * scale;
        }
    }
    return out;
}

// hat S(t,f) = w^H(t,f) Y(t,f); time-invariant weights broadcast over frames
inline std::vector<std::vector<cplx>> apply_fd(const FdWeights& w,
                                               const ComplexSpectrogram& spec) {
    std::size_t M = spec.channels(), T = spec.frames(), F = spec.bands();
    require(w.channels == M, "apply_fd: channel mismatch");
    std::vector<std::vector<cplx>> out(T, std::vector<cplx>(F, cplx(0)));
    for (std::size_t t = 0; t < T; t++)
        for (std::size_t f = 0; f < F; f++) {
            const auto& wf = w.time_variant ? w.tv[t][f] : w.ti[f];
            cplx acc(0);
            for (std::size_t m = 0; m < M; m++) acc += std::conj(wf[m]) * spec.values[m][t][f];
            out[t][f] = acc;
        }
    return out;
}

// hat s(t,n) = w^T(t,n) ybar(t,n); frame-constant weights broadcast over n.
// Synthesis divides by the frame coverage so w = one-hot reproduces the
// chosen channel exactly.
inline std::vector<double> apply_td(const TdWeights& w, const Frames& y_frames,
                                    const FrameGrid& grid) {
    std::size_t T = y_frames.size(), M = y_frames[0].size(), N = y_frames[0][0].size();
    require(w.channels == M, "apply_td: channel mismatch");
    std::vector<std::vector<double>> frames(T, std::vector<double>(N, 0.0));
    for (std::size_t t = 0; t < T; t++) {
        std::size_t wt = (w.frame_constant.size() == 1 && !w.per_sample) ? 0 : t;
        for (std::size_t n = 0; n < N; n++) {
            double acc = 0;
            for (std::size_t m = 0; m < M; m++) {
                double g = w.per_sample ? w.sample_gains[t][n][m] : w.frame_constant[wt][m];
                acc += g * y_frames[t][m][n];
            }
            frames[t][n] = acc;
        }
    }
    auto y = overlap_add(frames, grid);
    auto cov = overlap_count(T, grid);
    for (std::size_t k = 0; k < y.size(); k++) y[k] /= cov[k];
    return y;
}

// Latent-domain Wiener filters on the real representation. TI solves one
// M x M system per latent unit from time-summed statistics; TV uses the
// per-frame rank-1 statistics with diagonal loading (Sherman-Morrison form).
enum class LatentVariant { time_invariant, time_variant };

struct LatentWiener {
    LatentVariant variant = LatentVariant::time_invariant;
    std::vector<std::vector<std::vector<double>>> weights;  // TI: [1][f'][M]; TV: [t][f'][M]
    std::vector<std::vector<double>> output;                // beamformed latent, [t][f']
};

inline LatentWiener latent_eq_mcwf(const LatentRepresentation& mix,
                                   const std::vector<std::vector<double>>& masked_target,
                                   LatentVariant variant) {
    std::size_t M = mix.channels(), T = mix.frames(), F = mix.filters();
    require(masked_target.size() == T && (T == 0 || masked_target[0].size() == F),
            "latent_eq_mcwf: masked target shape mismatch");
    LatentWiener out;
    out.variant = variant;
    out.output.assign(T, std::vector<double>(F, 0.0));

    if (variant == LatentVariant::time_invariant) {
        out.weights.assign(1, std::vector<std::vector<double>>(F, std::vector<double>(M, 0.0)));
        for (std::size_t f = 0; f < F; f++) {
            std::vector<double> phi(M * M, 0.0), rhs(M, 0.0);
            for (std::size_t t = 0; t < T; t++) {
                for (std::size_t i = 0; i < M; i++) {
                    double yi = mix.values[i][t][f];
                    rhs[i] += yi * masked_target[t][f];
                    for (std::size_t j = 0; j < M; j++) phi[i * M + j] += yi * mix.values[j][t][f];
                }
            }
            auto loaded = diag_load(phi, M);
            out.weights[0][f] =
                solve_dense(loaded, rhs, M, "latent_eq_mcwf at unit " + std::to_string(f));
            for (std::size_t t = 0; t < T; t++) {
                double acc = 0;
                for (std::size_t m = 0; m < M; m++)
                    acc += out.weights[0][f][m] * mix.values[m][t][f];
                out.output[t][f] = acc;
            }
        }
        return out;
    }

    // time-variant: rank-1 per (t,f') statistics; with loading
    // lambda = eps*||Y||^2/M the solve reduces to w = Y s / (lambda + ||Y||^2)
    out.weights.assign(T, std::vector<std::vector<double>>(F, std::vector<double>(M, 0.0)));
    for (std::size_t t = 0; t < T; t++) {
        for (std::size_t f = 0; f < F; f++) {
            double e = 0;
            for (std::size_t m = 0; m < M; m++) e += mix.values[m][t][f] * mix.values[m][t][f];
            if (e == 0.0) continue;
            double lambda = kDiagonalLoading * e / double(M);
            double g = masked_target[t][f] / (lambda + e);
            double acc = 0;
            for (std::size_t m = 0; m < M; m++) {
                out.weights[t][f][m] = mix.values[m][t][f] * g;
                acc += out.weights[t][f][m] * mix.values[m][t][f];
            }
            out.output[t][f] = acc;
        }
    }
    return out;
}

}  // namespace beamkit
