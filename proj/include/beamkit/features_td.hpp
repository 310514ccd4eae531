// features_td.hpp
// Latent-domain encoder built from learnable filters, the spatial features
// ICD / T-ICD, the directional feature LD-DF, and the matching decoder.
//
// Per-channel filters are tied to a reference set through a learnable
// window:  K^m(n, f') = w^m(n) * K0(n, f'). The reference channel window is
// pinned to all-ones so the spectral feature R literally uses K0.
#pragma once

#include <cmath>
#include <vector>

#include "beamkit/common.hpp"
#include "beamkit/delay.hpp"
#include "beamkit/geometry.hpp"
#include "beamkit/linalg.hpp"
#include "beamkit/signal.hpp"

namespace beamkit {

inline constexpr double kLdDfEpsilon = 1e-8;

struct LearnableFilterBank {
    std::size_t window_length = 40;                 // N
    std::size_t filters = 256;                      // F'
    std::vector<std::vector<double>> reference;     // K0 [N][F']
    std::vector<std::vector<double>> windows;       // w^m [M][N]
    std::vector<std::vector<double>> decoder;       // [F'][N]
    std::size_t reference_channel = 0;

    std::size_t channels() const { return windows.size(); }

    // effective per-channel filter entry, re-derived on every call
    double filter(std::size_t m, std::size_t n, std::size_t f) const {
        return windows[m][n] * reference[n][f];
    }

    static LearnableFilterBank random(std::size_t channels, std::size_t n, std::size_t f,
                                      Rng& rng, std::size_t reference_channel = 0) {
        LearnableFilterBank b;
        b.window_length = n;
        b.filters = f;
        b.reference_channel = reference_channel;
        double scale = 1.0 / std::sqrt(double(n));
        b.reference.assign(n, std::vector<double>(f));
        for (auto& row : b.reference)
            for (auto& v : row) v = rng.uniform(-scale, scale);
        b.windows.assign(channels, std::vector<double>(n, 1.0));
        b.decoder.assign(f, std::vector<double>(n));
        for (auto& row : b.decoder)
            for (auto& v : row) v = rng.uniform(-scale, scale);
        return b;
    }

    // one-hot filters (f-th filter = delta at sample f), identity windows;
    // handy for exactness tests
    static LearnableFilterBank one_hot(std::size_t channels, std::size_t n) {
        LearnableFilterBank b;
        b.window_length = n;
        b.filters = n;
        b.reference.assign(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; i++) b.reference[i][i] = 1.0;
        b.windows.assign(channels, std::vector<double>(n, 1.0));
        b.decoder.assign(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; i++) b.decoder[i][i] = 1.0;
        return b;
    }
};

// real latent representation, [channel][frame][filter]
struct LatentRepresentation {
    std::vector<std::vector<std::vector<double>>> values;
    FrameGrid grid;

    std::size_t channels() const { return values.size(); }
    std::size_t frames() const { return values.empty() ? 0 : values[0].size(); }
    std::size_t filters() const { return frames() == 0 ? 0 : values[0][0].size(); }
};

// latent^m(t,f') = sum_n y^m(tH + n) K^m(n, f'); no activation here
inline LatentRepresentation encode(const MultichannelSignal& sig, const LearnableFilterBank& bank,
                                   const FrameGrid& grid) {
    require(grid.window_length == bank.window_length, "encode: grid/bank window mismatch");
    require(sig.channels() == bank.channels(), "encode: channel count mismatch");
    std::size_t T = grid.frame_count(sig.length());
    LatentRepresentation rep;
    rep.grid = grid;
    rep.values.assign(sig.channels(), std::vector<std::vector<double>>(
                                          T, std::vector<double>(bank.filters, 0.0)));
    for (std::size_t m = 0; m < sig.channels(); m++) {
        for (std::size_t t = 0; t < T; t++) {
            const double* x = sig.ch(m).data() + t * grid.hop;
            auto& row = rep.values[m][t];
            for (std::size_t n = 0; n < bank.window_length; n++) {
                double xv = x[n] * bank.windows[m][n];
                if (xv == 0.0) continue;
                const auto& kr = bank.reference[n];
                for (std::size_t f = 0; f < bank.filters; f++) row[f] += xv * kr[f];
            }
        }
    }
    return rep;
}

// R(t,f') = ReLU(latent at the reference channel); the reference window is
// all-ones so this is the K0 response.
inline std::vector<std::vector<double>> spectral_r(const LatentRepresentation& latent,
                                                   std::size_t ref_channel) {
    require(ref_channel < latent.channels(), "spectral_r: channel out of range");
    std::vector<std::vector<double>> out(latent.frames(),
                                         std::vector<double>(latent.filters()));
    for (std::size_t t = 0; t < latent.frames(); t++)
        for (std::size_t f = 0; f < latent.filters(); f++)
            out[t][f] = std::max(0.0, latent.values[ref_channel][t][f]);
    return out;
}

// ICD^(p)(t,f') = latent^{p1} - latent^{p2}, pre-activation. [pair][t][f']
inline std::vector<std::vector<std::vector<double>>> icd(
    const LatentRepresentation& latent,
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    std::vector<std::vector<std::vector<double>>> out(
        pairs.size(), std::vector<std::vector<double>>(latent.frames(),
                                                       std::vector<double>(latent.filters())));
    for (std::size_t p = 0; p < pairs.size(); p++) {
        require(pairs[p].first < latent.channels() && pairs[p].second < latent.channels(),
                "icd: pair channel out of range");
        for (std::size_t t = 0; t < latent.frames(); t++)
            for (std::size_t f = 0; f < latent.filters(); f++)
                out[p][t][f] = latent.values[pairs[p].first][t][f] -
                               latent.values[pairs[p].second][t][f];
    }
    return out;
}

// T-ICD^(p)(f') = delta[n] * K^{p1}_{f'} - delta[n - tau^(p)(theta)] * K^{p2}_{f'},
// evaluated at the frame-aligned output index (impulse at sample 0 of the
// frame; the fractionally delayed impulse is truncated to the frame exactly
// as a framed signal would be). Depends on the current bank parameters.
inline std::vector<std::vector<double>> t_icd(const LearnableFilterBank& bank,
                                              const ArrayGeometry& geometry, double theta_deg,
                                              double sample_rate = 16000.0) {
    require(theta_deg >= 0.0 && theta_deg <= 180.0, "t_icd: theta outside [0, 180] degrees");
    std::size_t N = bank.window_length;
    std::vector<std::vector<double>> out(geometry.pairs.size(),
                                         std::vector<double>(bank.filters, 0.0));
    std::vector<double> impulse(N, 0.0);
    impulse[0] = 1.0;
    for (std::size_t p = 0; p < geometry.pairs.size(); p++) {
        auto [p1, p2] = geometry.pairs[p];
        double tau = steering_delay(geometry, p, theta_deg, sample_rate);
        auto delayed = fractional_delay(impulse, tau);
        for (std::size_t f = 0; f < bank.filters; f++) {
            double a = bank.filter(p1, 0, f);  // impulse at n = 0
            double b = 0.0;
            for (std::size_t n = 0; n < N; n++)
                if (delayed[n] != 0.0) b += delayed[n] * bank.filter(p2, n, f);
            out[p][f] = a - b;
        }
    }
    return out;
}

// LD-DF(t,f') = cosine similarity across the pair dimension between the
// observed ICD vector and the T-ICD template vector; value in [-1, 1].
inline std::vector<std::vector<double>> ld_df(
    const std::vector<std::vector<std::vector<double>>>& icd_values,
    const std::vector<std::vector<double>>& t_icd_values) {
    std::size_t P = icd_values.size();
    require(P > 0 && P == t_icd_values.size(), "ld_df: pair count mismatch");
    std::size_t T = icd_values[0].size(), F = icd_values[0][0].size();
    std::vector<std::vector<double>> out(T, std::vector<double>(F, 0.0));
    for (std::size_t t = 0; t < T; t++) {
        for (std::size_t f = 0; f < F; f++) {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::size_t p = 0; p < P; p++) {
                double a = icd_values[p][t][f], b = t_icd_values[p][f];
                dot += a * b;
                na += a * a;
                nb += b * b;
            }
            out[t][f] = dot / (std::sqrt(na) * std::sqrt(nb) + kLdDfEpsilon);
        }
    }
    return out;
}

// Per-frame decoder map followed by overlap-add with the rectangular COLA
// divisor, so a latent that reproduces the framed signal reproduces the
// signal itself.
inline std::vector<double> decode(const std::vector<std::vector<double>>& latent,
                                  const std::vector<std::vector<double>>& decoder,
                                  const FrameGrid& grid) {
    require(!latent.empty(), "decode: empty latent");
    std::size_t T = latent.size(), F = latent[0].size(), N = grid.window_length;
    require(decoder.size() == F && decoder[0].size() == N, "decode: decoder shape mismatch");
    std::vector<std::vector<double>> frames(T, std::vector<double>(N, 0.0));
    for (std::size_t t = 0; t < T; t++)
        for (std::size_t f = 0; f < F; f++) {
            double a = latent[t][f];
            if (a == 0.0) continue;
            for (std::size_t n = 0; n < N; n++) frames[t][n] += a * decoder[f][n];
        }
    auto y = overlap_add(frames, grid);
    auto cov = overlap_count(T, grid);
    for (std::size_t k = 0; k < y.size(); k++) y[k] /= cov[k];
    return y;
}

// Least-squares decoder fit: choose decoder rows so the per-frame map from
// latent to the framed signal is MMSE, with a small ridge. Solves the
// F' x F' normal equations once.
inline std::vector<std::vector<double>> fit_decoder(const LatentRepresentation& latent,
                                                    std::size_t channel,
                                                    const std::vector<double>& signal,
                                                    double ridge = 1e-8) {
    std::size_t T = latent.frames(), F = latent.filters(), N = latent.grid.window_length;
    require(channel < latent.channels(), "fit_decoder: channel out of range");
    // G = L^T L, B = L^T X with L in R^{T x F}, X the framed signal in R^{T x N}
    std::vector<std::vector<double>> G(F, std::vector<double>(F, 0.0));
    std::vector<std::vector<double>> B(F, std::vector<double>(N, 0.0));
    for (std::size_t t = 0; t < T; t++) {
        const auto& row = latent.values[channel][t];
        const double* x = signal.data() + t * latent.grid.hop;
        for (std::size_t i = 0; i < F; i++) {
            if (row[i] == 0.0) continue;
            for (std::size_t j = i; j < F; j++) G[i][j] += row[i] * row[j];
            for (std::size_t n = 0; n < N; n++) B[i][n] += row[i] * x[n];
        }
    }
    double tr = 0.0;
    for (std::size_t i = 0; i < F; i++) tr += G[i][i];
    double lambda = ridge * std::max(tr / double(F), 1e-12);
    for (std::size_t i = 0; i < F; i++) {
        G[i][i] += lambda;
        for (std::size_t j = 0; j < i; j++) G[i][j] = G[j][i];
    }
    // Gaussian elimination with partial pivoting on [G | B]
    std::vector<std::size_t> piv(F);
    for (std::size_t i = 0; i < F; i++) piv[i] = i;
    for (std::size_t c = 0; c < F; c++) {
        std::size_t best = c;
        for (std::size_t r = c + 1; r < F; r++)
            if (std::fabs(G[r][c]) > std::fabs(G[best][c])) best = r;
        std::swap(G[c], G[best]);
        std::swap(B[c], B[best]);
        require(std::fabs(G[c][c]) > 1e-14, "fit_decoder: singular normal equations");
        for (std::size_t r = c + 1; r < F; r++) {
            double m = G[r][c] / G[c][c];
            if (m == 0.0) continue;
            for (std::size_t j = c; j < F; j++) G[r][j] -= m * G[c][j];
            for (std::size_t n = 0; n < N; n++) B[r][n] -= m * B[c][n];
        }
    }
    std::vector<std::vector<double>> D(F, std::vector<double>(N, 0.0));
    for (std::size_t c = F; c-- > 0;) {
        for (std::size_t n = 0; n < N; n++) {
            double acc = B[c][n];
            for (std::size_t j = c + 1; j < F; j++) acc -= G[c][j] * D[j][n];
            D[c][n] = acc / G[c][c];
        }
    }
    return D;
}

// Right pseudo-inverse of the reference filters, D = K0^T (K0 K0^T)^{-1}:
// decoding inverts encoding exactly on the image of K0 (needs F' >= N).
inline std::vector<std::vector<double>> pseudo_inverse_decoder(const LearnableFilterBank& bank,
                                                               double ridge = 1e-10) {
    std::size_t N = bank.window_length, F = bank.filters;
    std::vector<double> gram(N * N, 0.0);
    for (std::size_t i = 0; i < N; i++)
        for (std::size_t j = 0; j < N; j++) {
            double acc = 0;
            for (std::size_t f = 0; f < F; f++) acc += bank.reference[i][f] * bank.reference[j][f];
            gram[i * N + j] = acc;
        }
    auto loaded = diag_load(gram, N, ridge);
    // columns of (K0 K0^T)^{-1}
    std::vector<std::vector<double>> inv_cols(N);
    for (std::size_t c = 0; c < N; c++) {
        std::vector<double> e(N, 0.0);
        e[c] = 1.0;
        inv_cols[c] = solve_dense(loaded, e, N, "pseudo_inverse_decoder");
    }
    std::vector<std::vector<double>> dec(F, std::vector<double>(N, 0.0));
    for (std::size_t f = 0; f < F; f++)
        for (std::size_t n = 0; n < N; n++) {
            double acc = 0;
            for (std::size_t i = 0; i < N; i++) acc += bank.reference[i][f] * inv_cols[n][i];
            dec[f][n] = acc;
        }
    return dec;
}

struct TdFeatureStack {
    std::vector<std::vector<double>> r;                   // [t][f']
    std::vector<std::vector<std::vector<double>>> icd;    // [p][t][f']
    std::vector<std::vector<double>> ld_df;               // [t][f']

    std::size_t frames() const { return r.size(); }
    std::size_t width() const { return r.empty() ? 0 : r[0].size() * (2 + icd.size()); }
    // concatenated row: [R | ICD_p ... | LD-DF]
    std::vector<double> row(std::size_t t) const {
        std::vector<double> out;
        out.reserve(width());
        out.insert(out.end(), r[t].begin(), r[t].end());
        for (const auto& p : icd) out.insert(out.end(), p[t].begin(), p[t].end());
        out.insert(out.end(), ld_df[t].begin(), ld_df[t].end());
        return out;
    }
};

inline TdFeatureStack td_features(const LatentRepresentation& latent,
                                  const LearnableFilterBank& bank,
                                  const ArrayGeometry& geometry, double target_doa_deg,
                                  double sample_rate = 16000.0) {
    TdFeatureStack st;
    st.r = spectral_r(latent, bank.reference_channel);
    st.icd = icd(latent, geometry.pairs);
    st.ld_df = ld_df(st.icd, t_icd(bank, geometry, target_doa_deg, sample_rate));
    return st;
}

}  // namespace beamkit
