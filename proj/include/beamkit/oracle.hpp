// oracle.hpp
// Reference pipelines that beamform a scene from ground-truth statistics:
// ideal masks, closed-form FD/TD beamformers fed with true source images,
// and the latent-domain Wiener variants. Shared by the CLI and the
// evaluation suites.
#pragma once

#include <string>
#include <vector>

#include "beamkit/beamformers.hpp"
#include "beamkit/features_td.hpp"
#include "beamkit/masks.hpp"
#include "beamkit/scene.hpp"
#include "beamkit/scm.hpp"
#include "beamkit/stft.hpp"

namespace beamkit {

struct FdSetup {
    FrameGrid grid{512, 256};
    StftKernel kernel = StftKernel::sqrt_hann(512);
};

struct TdSetup {
    FrameGrid grid{40, 20};
};

inline std::vector<double> oracle_ideal_mask(const Scene& scene, MaskKind kind,
                                             const FdSetup& setup) {
    auto y = stft(scene.mixture, setup.kernel, setup.grid);
    auto s = stft(scene.target, setup.kernel, setup.grid);
    auto n = stft(scene.interferer, setup.kernel, setup.grid);
    auto mask = ideal_mask(s, n, y, kind, scene.geometry.reference);
    auto masked = apply_mask(mask, y, scene.geometry.reference);
    return istft_channel(masked, setup.kernel, setup.grid);
}

inline FdWeights oracle_fd_mvdr_weights(const Scene& scene, const FdSetup& setup) {
    auto s = stft(scene.target, setup.kernel, setup.grid);
    auto n = stft(scene.interferer, setup.kernel, setup.grid);
    auto phi_ss = fd_scm_aggregated(s, ScmKind::ss);
    auto phi_nn = fd_scm_aggregated(n, ScmKind::nn);
    return fd_eq_mvdr(phi_nn, phi_ss, scene.geometry.reference);
}

inline std::vector<double> oracle_fd_mvdr(const Scene& scene, const FdSetup& setup) {
    auto y = stft(scene.mixture, setup.kernel, setup.grid);
    auto bf = apply_fd(oracle_fd_mvdr_weights(scene, setup), y);
    return istft_channel(bf, setup.kernel, setup.grid);
}

inline std::vector<double> oracle_fd_mcwf(const Scene& scene, const FdSetup& setup) {
    auto y = stft(scene.mixture, setup.kernel, setup.grid);
    auto s = stft(scene.target, setup.kernel, setup.grid);
    auto phi_yy = fd_scm_aggregated(y, ScmKind::yy);
    auto phi_ys = fd_scm_aggregated(y, s, ScmKind::ys);
    auto w = fd_eq_mcwf(phi_yy, phi_ys, scene.geometry.reference);
    auto bf = apply_fd(w, y);
    return istft_channel(bf, setup.kernel, setup.grid);
}

// Oracle TD MVDR: steering from globally averaged target statistics,
// per-sample noise statistics from the true interferer images.
inline std::vector<double> oracle_td_mvdr(const Scene& scene, const TdSetup& setup) {
    auto yf = frame(scene.mixture, setup.grid);
    auto sf = frame(scene.target, setup.grid);
    auto nf = frame(scene.interferer, setup.grid);
    auto h = td_mvdr_steering(sf, scene.geometry.reference);
    auto w = td_eq_mvdr_per_sample(nf, h, scene.geometry.reference);
    return apply_td(w, yf, setup.grid);
}

// frame-averaged variant of the same oracle
inline std::vector<double> oracle_td_mvdr_frame_averaged(const Scene& scene,
                                                         const TdSetup& setup) {
    auto yf = frame(scene.mixture, setup.grid);
    auto sf = frame(scene.target, setup.grid);
    auto nf = frame(scene.interferer, setup.grid);
    auto r_ss = td_scm(sf, ScmKind::ss, TdAveraging::per_frame);
    auto r_nn = td_scm(nf, ScmKind::nn, TdAveraging::per_frame);
    auto w = td_eq_mvdr(r_nn, r_ss, scene.geometry.reference);
    return apply_td(w, yf, setup.grid);
}

// Oracle TD MCWF: the per-sample Wiener solve of the rank-1 statistics by
// default; frame-averaged and global modes remain available.
inline std::vector<double> oracle_td_mcwf(const Scene& scene, const TdSetup& setup,
                                          TdAveraging mode = TdAveraging::per_sample) {
    auto yf = frame(scene.mixture, setup.grid);
    auto s_ref = frame_channel(scene.target.ch(scene.geometry.reference), setup.grid);
    if (mode == TdAveraging::per_sample) {
        auto w = td_eq_mcwf_per_sample(yf, s_ref);
        return apply_td(w, yf, setup.grid);
    }
    auto r_yy = td_scm(yf, ScmKind::yy, mode);
    auto r_ys = td_cross(yf, s_ref, mode);
    auto w = td_eq_mcwf(r_yy, r_ys);
    return apply_td(w, yf, setup.grid);
}

// Latent-domain Wiener with the oracle target representation (clean target
// encoded through the reference filters) and a pseudo-inverse decoder.
inline std::vector<double> oracle_latent_mcwf(const Scene& scene, const LearnableFilterBank& bank,
                                              LatentVariant variant, const TdSetup& setup) {
    auto latent = encode(scene.mixture, bank, setup.grid);
    // target representation at the reference channel
    MultichannelSignal ref_only = MultichannelSignal::mono(
        scene.target.ch(scene.geometry.reference), scene.target.sample_rate);
    LearnableFilterBank mono_bank = bank;
    mono_bank.windows.assign(1, bank.windows[bank.reference_channel]);
    auto target_latent = encode(ref_only, mono_bank, setup.grid);
    auto wiener = latent_eq_mcwf(latent, target_latent.values[0], variant);
    return decode(wiener.output, pseudo_inverse_decoder(bank), setup.grid);
}

}  // namespace beamkit
