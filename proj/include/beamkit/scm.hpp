// scm.hpp
// Spatial correlation matrices: per-(t,f) complex outer products in the
// frequency domain, per-(t,n) real outer products in the time domain, plus
// the frame and global averages the closed-form solvers consume.
// Matrices are stored row-major, entry (i,j) at index i*M + j.
#pragma once

#include <complex>
#include <vector>

#include "beamkit/common.hpp"
#include "beamkit/signal.hpp"
#include "beamkit/stft.hpp"

namespace beamkit {

enum class ScmKind { ss, nn, yy, ys };

// per-(t,f) M x M complex outer products
struct FdScm {
    std::vector<std::vector<std::vector<cplx>>> values;  // [t][f][M*M]
    std::size_t channels = 0;
    ScmKind kind = ScmKind::yy;

    std::size_t frames() const { return values.size(); }
    std::size_t bands() const { return values.empty() ? 0 : values[0].size(); }
};

// time-aggregated statistics, summed over frames
struct FdScmAgg {
    std::vector<std::vector<cplx>> values;  // [f][M*M]
    std::size_t channels = 0;
    ScmKind kind = ScmKind::yy;
};

// Phi(t,f) = a(t,f) b(t,f)^H with a, b the channel vectors of two aligned
// spectrograms. ss/nn/yy use one spectrogram for both sides.
inline FdScm fd_scm(const ComplexSpectrogram& a, const ComplexSpectrogram& b, ScmKind kind) {
    require(a.channels() == b.channels() && a.frames() == b.frames() && a.bands() == b.bands(),
            "fd_scm: operand shapes differ");
    std::size_t M = a.channels(), T = a.frames(), F = a.bands();
    FdScm out;
    out.channels = M;
    out.kind = kind;
    out.values.assign(T, std::vector<std::vector<cplx>>(F, std::vector<cplx>(M * M)));
    for (std::size_t t = 0; t < T; t++)
        for (std::size_t f = 0; f < F; f++)
            for (std::size_t i = 0; i < M; i++)
                for (std::size_t j = 0; j < M; j++)
                    out.values[t][f][i * M + j] =
                        a.values[i][t][f] * std::conj(b.values[j][t][f]);
    return out;
}

inline FdScm fd_scm(const ComplexSpectrogram& a, ScmKind kind) { return fd_scm(a, a, kind); }

inline FdScmAgg aggregate(const FdScm& scm) {
    FdScmAgg out;
    out.channels = scm.channels;
    out.kind = scm.kind;
    std::size_t M = scm.channels;
    out.values.assign(scm.bands(), std::vector<cplx>(M * M, cplx(0)));
    for (std::size_t t = 0; t < scm.frames(); t++)
        for (std::size_t f = 0; f < scm.bands(); f++)
            for (std::size_t e = 0; e < M * M; e++) out.values[f][e] += scm.values[t][f][e];
    return out;
}

// aggregated statistics computed directly, without the per-frame tensor
inline FdScmAgg fd_scm_aggregated(const ComplexSpectrogram& a, const ComplexSpectrogram& b,
                                  ScmKind kind) {
    require(a.channels() == b.channels() && a.frames() == b.frames() && a.bands() == b.bands(),
            "fd_scm: operand shapes differ");
    std::size_t M = a.channels(), T = a.frames(), F = a.bands();
    FdScmAgg out;
    out.channels = M;
    out.kind = kind;
    out.values.assign(F, std::vector<cplx>(M * M, cplx(0)));
    for (std::size_t t = 0; t < T; t++)
        for (std::size_t f = 0; f < F; f++)
            for (std::size_t i = 0; i < M; i++)
                for (std::size_t j = 0; j < M; j++)
                    out.values[f][i * M + j] += a.values[i][t][f] * std::conj(b.values[j][t][f]);
    return out;
}

inline FdScmAgg fd_scm_aggregated(const ComplexSpectrogram& a, ScmKind kind) {
    return fd_scm_aggregated(a, a, kind);
}

enum class TdAveraging { per_sample, per_frame, global_avg };

// R(t,n) = a(t,n) b(t,n)^T over frames [t][m][n]. per_frame averages over n
// within each frame; global_avg averages over all (t,n).
struct TdScm {
    // per_sample: [t][n][M*M]; per_frame: [t][0][M*M]; global_avg: [0][0][M*M]
    std::vector<std::vector<std::vector<double>>> values;
    std::size_t channels = 0;
    ScmKind kind = ScmKind::yy;
    TdAveraging mode = TdAveraging::per_frame;

    std::size_t frames() const { return values.size(); }
    const std::vector<double>& at_frame(std::size_t t) const {
        return values[mode == TdAveraging::global_avg ? 0 : t][0];
    }
};

using Frames = std::vector<std::vector<std::vector<double>>>;  // [t][m][n]

inline TdScm td_scm(const Frames& a, const Frames& b, ScmKind kind, TdAveraging mode) {
    require(!a.empty() && a.size() == b.size(), "td_scm: frame count mismatch");
    std::size_t T = a.size(), M = a[0].size(), N = a[0][0].size();
    require(b[0].size() == M && b[0][0].size() == N, "td_scm: operand shapes differ");
    TdScm out;
    out.channels = M;
    out.kind = kind;
    out.mode = mode;
    if (mode == TdAveraging::per_sample) {
        out.values.assign(T, std::vector<std::vector<double>>(N, std::vector<double>(M * M)));
        for (std::size_t t = 0; t < T; t++)
            for (std::size_t n = 0; n < N; n++)
                for (std::size_t i = 0; i < M; i++)
                    for (std::size_t j = 0; j < M; j++)
                        out.values[t][n][i * M + j] = a[t][i][n] * b[t][j][n];
        return out;
    }
    std::size_t slots = (mode == TdAveraging::per_frame) ? T : 1;
    out.values.assign(slots,
                      std::vector<std::vector<double>>(1, std::vector<double>(M * M, 0.0)));
    for (std::size_t t = 0; t < T; t++) {
        auto& dst = out.values[mode == TdAveraging::per_frame ? t : 0][0];
        for (std::size_t i = 0; i < M; i++)
            for (std::size_t j = 0; j < M; j++) {
                double acc = 0;
                for (std::size_t n = 0; n < N; n++) acc += a[t][i][n] * b[t][j][n];
                dst[i * M + j] += acc;
            }
    }
    double denom = (mode == TdAveraging::per_frame) ? double(N) : double(N) * double(T);
    for (auto& slot : out.values)
        for (double& v : slot[0]) v /= denom;
    return out;
}

inline TdScm td_scm(const Frames& a, ScmKind kind, TdAveraging mode) {
    return td_scm(a, a, kind, mode);
}

// cross-correlation vector r_ys(t) = mean_n ybar(t,n) s_ref(t,n); [t][M] for
// per_frame, [1][M] for global
inline std::vector<std::vector<double>> td_cross(const Frames& y,
                                                 const std::vector<std::vector<double>>& s_ref,
                                                 TdAveraging mode) {
    require(mode != TdAveraging::per_sample, "td_cross: per-sample mode not used");
    std::size_t T = y.size(), M = y[0].size(), N = y[0][0].size();
    require(s_ref.size() == T && s_ref[0].size() == N, "td_cross: shape mismatch");
    std::size_t slots = (mode == TdAveraging::per_frame) ? T : 1;
    std::vector<std::vector<double>> out(slots, std::vector<double>(M, 0.0));
    for (std::size_t t = 0; t < T; t++) {
        auto& dst = out[mode == TdAveraging::per_frame ? t : 0];
        for (std::size_t i = 0; i < M; i++) {
            double acc = 0;
            for (std::size_t n = 0; n < N; n++) acc += y[t][i][n] * s_ref[t][n];
            dst[i] += acc;
        }
    }
    double denom = (mode == TdAveraging::per_frame) ? double(N) : double(N) * double(T);
    for (auto& row : out)
        for (double& v : row) v /= denom;
    return out;
}

}  // namespace beamkit
