// pipeline.hpp
// End-to-end differentiable separation + beamforming pipelines.
//
// TD: learnable-filter encoder -> (R, ICD, LD-DF) features -> TCN masks ->
//     decoder -> per-sample SCM features -> recurrent weight head -> Eq. 22
//     filter-and-sum -> overlap-add.
// FD: STFT (fixed) -> (LPS, IPD, FD-DF) features -> TCN cRMs -> per-(t,f)
//     SCM features folded per frequency -> recurrent weight head -> Eq. 15
//     filter-and-sum -> WOLA synthesis.
#pragma once

#include <string>
#include <vector>

#include "beamkit/autodiff.hpp"
#include "beamkit/beamformers.hpp"
#include "beamkit/features_fd.hpp"
#include "beamkit/features_td.hpp"
#include "beamkit/masks.hpp"
#include "beamkit/nn.hpp"
#include "beamkit/scene.hpp"
#include "beamkit/scm.hpp"

namespace beamkit {

enum class Domain { fd, td };
enum class BfVariant {
    mask_only,
    eq_mvdr,
    eq_mcwf,
    an_mvdr,
    an_mcwf,
    latent_ti_mcwf,
    latent_tv_mcwf
};

inline const char* to_string(BfVariant v) {
    switch (v) {
        case BfVariant::mask_only: return "mask-only";
        case BfVariant::eq_mvdr: return "eq-mvdr";
        case BfVariant::eq_mcwf: return "eq-mcwf";
        case BfVariant::an_mvdr: return "an-mvdr";
        case BfVariant::an_mcwf: return "an-mcwf";
        case BfVariant::latent_ti_mcwf: return "latent-ti-mcwf";
        case BfVariant::latent_tv_mcwf: return "latent-tv-mcwf";
    }
    return "?";
}

inline BfVariant bf_variant_from_string(const std::string& s) {
    for (BfVariant v : {BfVariant::mask_only, BfVariant::eq_mvdr, BfVariant::eq_mcwf,
                        BfVariant::an_mvdr, BfVariant::an_mcwf, BfVariant::latent_ti_mcwf,
                        BfVariant::latent_tv_mcwf})
        if (s == to_string(v)) return v;
    throw std::runtime_error("unknown beamformer variant: " + s);
}

struct PipelineConfig {
    Domain domain = Domain::td;
    std::size_t channels = 8;
    std::size_t window_length = 40;  // N (512 for fd)
    std::size_t hop = 20;            // H (256 for fd)
    std::size_t filters = 256;       // F', td only
    BfVariant variant = BfVariant::an_mcwf;
    bool multichannel_mask = false;
    double lmfb_weight = 0.0;  // lambda for the finetuning objective
    std::uint64_t seed = 1;
    double sample_rate = 16000.0;
    // trunk sizes (toy defaults)
    std::size_t tcn_bottleneck = 64;
    std::size_t tcn_hidden = 128;
    std::size_t tcn_repeats = 2;
    std::size_t tcn_blocks = 4;
    // td head sizes per the reference configuration
    std::size_t head_proj = 32;
    std::size_t head_gru = 256;
    // fd head sizes per the reference configuration
    std::size_t fd_head_proj = 180;
    std::size_t fd_head_gru = 90;

    static PipelineConfig fd_defaults() {
        PipelineConfig c;
        c.domain = Domain::fd;
        c.window_length = 512;
        c.hop = 256;
        return c;
    }
    FrameGrid grid() const { return FrameGrid(window_length, hop); }
    std::size_t bands() const { return window_length / 2 + 1; }
};

// === time-domain pipeline ===================================================

class TdPipeline {
  public:
    TdPipeline(PipelineConfig cfg, ArrayGeometry geometry)
        : cfg_(std::move(cfg)), geometry_(std::move(geometry)) {
        require(cfg_.domain == Domain::td, "TdPipeline: config domain must be td");
        std::size_t P = geometry_.pairs.size();
        std::size_t mask_width = (cfg_.multichannel_mask ? cfg_.channels : 1) * cfg_.filters;
        nn::TcnConfig tc;
        tc.input_dim = cfg_.filters * (P + 2);
        tc.bottleneck = cfg_.tcn_bottleneck;
        tc.hidden = cfg_.tcn_hidden;
        tc.repeats = cfg_.tcn_repeats;
        tc.blocks = cfg_.tcn_blocks;
        tc.output_dim = 2 * mask_width;
        tcn_ = nn::Tcn("tcn", tc);
        if (uses_head()) {
            std::size_t n = cfg_.window_length, m = cfg_.channels;
            std::size_t in = (cfg_.variant == BfVariant::an_mcwf && !cfg_.multichannel_mask)
                                 ? n * m * m + n * m     // Eq. 25: R_yy | r_ys
                                 : 2 * n * m * m;        // Eq. 26 / MVDR pair
            head_ = nn::AnBfHead("head", in, cfg_.head_proj, cfg_.head_gru, n * m);
        }
    }

    bool uses_head() const {
        return cfg_.variant == BfVariant::an_mvdr || cfg_.variant == BfVariant::an_mcwf;
    }
    const PipelineConfig& config() const { return cfg_; }
    const ArrayGeometry& geometry() const { return geometry_; }
    const nn::AnBfHead& head() const { return head_; }

    void init(ParamStore& ps, Rng& rng) const {
        double scale = 1.0 / std::sqrt(double(cfg_.window_length));
        Tensor k0({cfg_.window_length, cfg_.filters});
        for (auto& v : k0.v) v = rng.uniform(-scale, scale);
        ps.add("K0", std::move(k0));
        for (std::size_t m = 0; m < cfg_.channels; m++) {
            if (m == geometry_.reference) continue;  // reference window pinned to ones
            Tensor w({cfg_.window_length});
            for (auto& v : w.v) v = 1.0;
            ps.add("w_" + std::to_string(m + 1), std::move(w));
        }
        Tensor dec({cfg_.filters, cfg_.window_length});
        for (auto& v : dec.v) v = rng.uniform(-scale, scale);
        ps.add("decoder", std::move(dec));
        tcn_.init(ps, rng);
        if (uses_head()) head_.init(ps, rng);
    }

    struct Forward {
        Var estimate;                 // [K], the pipeline output
        Var separated_ref;            // [K], pre-beamforming target estimate
        std::vector<Var> separated;   // per-channel target estimates
        std::vector<Var> interferer;  // per-channel interferer estimates
        Var weights;                  // [T x N*M] when the head runs
        bool has_weights = false;
    };

    // full differentiable forward pass on one mixture
    Forward forward(Ctx& ctx, const MultichannelSignal& mixture, double target_doa_deg) const {
        using namespace ad;
        const FrameGrid grid = cfg_.grid();
        const std::size_t M = cfg_.channels, N = cfg_.window_length, Fp = cfg_.filters;
        require(mixture.channels() == M, "forward: channel count mismatch");
        std::size_t T = grid.frame_count(mixture.length());

        // constants: per-channel frames
        std::vector<Var> yf(M);
        for (std::size_t m = 0; m < M; m++) {
            Tensor fr({T, N});
            for (std::size_t t = 0; t < T; t++)
                for (std::size_t n = 0; n < N; n++) fr.at(t, n) = mixture.ch(m)[t * grid.hop + n];
            yf[m] = ctx.constant(std::move(fr));
        }

        // per-channel filters K^m = w^m (.) K0 and latents
        Var k0 = ctx.param("K0");
        std::vector<Var> km(M), latent(M);
        for (std::size_t m = 0; m < M; m++) {
            km[m] = (m == geometry_.reference)
                        ? k0
                        : mul_colvec(k0, ctx.param("w_" + std::to_string(m + 1)));
            latent[m] = matmul(yf[m], km[m]);
        }

        // features: R, ICD per pair, LD-DF against the current-bank T-ICD
        std::size_t P = geometry_.pairs.size();
        Var r_feat = relu(latent[geometry_.reference]);
        std::vector<Var> icds(P), ticds(P);
        for (std::size_t p = 0; p < P; p++) {
            auto [p1, p2] = geometry_.pairs[p];
            icds[p] = sub(latent[p1], latent[p2]);
            double tau = steering_delay(geometry_, p, target_doa_deg, cfg_.sample_rate);
            Tensor dvec({1, N});
            for (std::size_t n = 0; n < N; n++) dvec.at(0, n) = delay_kernel(double(n) - tau);
            Var delayed = matmul(ctx.constant(std::move(dvec)), km[p2]);  // [1 x F']
            Var direct = slice_rows(km[p1], 0, 1);
            ticds[p] = reshape(sub(direct, delayed), {Fp});
        }
        Var num = mul_rowvec(icds[0], ticds[0]);
        Var na = mul(icds[0], icds[0]);
        Var nb = mul(ticds[0], ticds[0]);
        for (std::size_t p = 1; p < P; p++) {
            num = add(num, mul_rowvec(icds[p], ticds[p]));
            na = add(na, mul(icds[p], icds[p]));
            nb = add(nb, mul(ticds[p], ticds[p]));
        }
        // tiny floor inside the square roots keeps silence gradients finite
        Var denom = add_scalar(mul_rowvec(sqrt_op(add_scalar(na, 1e-12)),
                                          sqrt_op(add_scalar(nb, 1e-12))),
                               kLdDfEpsilon);
        Var ld = div(num, denom);

        std::vector<Var> feat_parts = {r_feat};
        for (auto& v : icds) feat_parts.push_back(v);
        feat_parts.push_back(ld);
        Var feats = concat_cols(feat_parts);

        // masks
        Var mask_out = tcn_.forward(ctx, feats);
        std::size_t mw = (cfg_.multichannel_mask ? M : 1) * Fp;
        Var mask_s = sigmoid(slice_cols(mask_out, 0, mw));
        Var mask_n = sigmoid(slice_cols(mask_out, mw, 2 * mw));

        auto mask_for = [&](Var mask, std::size_t m) {
            return cfg_.multichannel_mask ? slice_cols(mask, m * Fp, (m + 1) * Fp) : mask;
        };

        // decode separated estimates per channel
        Var dec = ctx.param("decoder");
        std::vector<double> inv_cov;
        {
            auto cov = overlap_count(T, grid);
            inv_cov.assign(cov.size(), 0.0);
            for (std::size_t k = 0; k < cov.size(); k++) inv_cov[k] = 1.0 / cov[k];
        }
        Forward out;
        out.separated.resize(M);
        out.interferer.resize(M);
        for (std::size_t m = 0; m < M; m++) {
            Var s_lat = mul(mask_for(mask_s, m), latent[m]);
            Var n_lat = mul(mask_for(mask_n, m), latent[m]);
            out.separated[m] = overlap_add_scaled(matmul(s_lat, dec), grid, inv_cov);
            out.interferer[m] = overlap_add_scaled(matmul(n_lat, dec), grid, inv_cov);
        }
        out.separated_ref = out.separated[geometry_.reference];

        if (!uses_head()) {
            out.estimate = out.separated_ref;
            return out;
        }

        // per-sample SCM features, flattened (i*M + j)-major then n
        auto framed = [&](Var sig) { return frame_signal(sig, grid); };
        std::vector<Var> s_frames(M), n_frames(M);
        for (std::size_t m = 0; m < M; m++) {
            s_frames[m] = framed(out.separated[m]);
            n_frames[m] = framed(out.interferer[m]);
        }
        std::vector<Var> blocks;
        if (cfg_.variant == BfVariant::an_mvdr) {
            for (std::size_t i = 0; i < M; i++)
                for (std::size_t j = 0; j < M; j++) blocks.push_back(mul(s_frames[i], s_frames[j]));
            for (std::size_t i = 0; i < M; i++)
                for (std::size_t j = 0; j < M; j++) blocks.push_back(mul(n_frames[i], n_frames[j]));
        } else if (cfg_.multichannel_mask) {  // Eq. 26: R_yy | R_ys
            for (std::size_t i = 0; i < M; i++)
                for (std::size_t j = 0; j < M; j++) blocks.push_back(mul(yf[i], yf[j]));
            for (std::size_t i = 0; i < M; i++)
                for (std::size_t j = 0; j < M; j++) blocks.push_back(mul(yf[i], s_frames[j]));
        } else {  // Eq. 25: R_yy | r_ys
            for (std::size_t i = 0; i < M; i++)
                for (std::size_t j = 0; j < M; j++) blocks.push_back(mul(yf[i], yf[j]));
            for (std::size_t i = 0; i < M; i++)
                blocks.push_back(mul(yf[i], s_frames[geometry_.reference]));
        }
        Var stats = concat_cols(blocks);

        Var w = head_.forward(ctx, stats);  // [T x N*M]
        out.weights = w;
        out.has_weights = true;

        // Eq. 22: s(t,n) = sum_m w_m(t,n) y_m(t,n), then overlap-add
        Var est_frames = mul(slice_cols(w, 0, N), yf[0]);
        for (std::size_t m = 1; m < M; m++)
            est_frames = add(est_frames, mul(slice_cols(w, m * N, (m + 1) * N), yf[m]));
        out.estimate = overlap_add_scaled(est_frames, grid, inv_cov);
        return out;
    }

  private:
    PipelineConfig cfg_;
    ArrayGeometry geometry_;
    nn::Tcn tcn_;
    nn::AnBfHead head_;
};

// === frequency-domain pipeline ==============================================

class FdPipeline {
  public:
    FdPipeline(PipelineConfig cfg, ArrayGeometry geometry)
        : cfg_(std::move(cfg)),
          geometry_(std::move(geometry)),
          kernel_(StftKernel::sqrt_hann(cfg_.window_length)) {
        require(cfg_.domain == Domain::fd, "FdPipeline: config domain must be fd");
        std::size_t P = geometry_.pairs.size();
        std::size_t F = cfg_.bands();
        nn::TcnConfig tc;
        tc.input_dim = F * (2 + 2 * P);
        tc.bottleneck = cfg_.tcn_bottleneck;
        tc.hidden = cfg_.tcn_hidden;
        tc.repeats = cfg_.tcn_repeats;
        tc.blocks = cfg_.tcn_blocks;
        tc.output_dim = 4 * F;  // cRM target + interferer, re and im
        tcn_ = nn::Tcn("tcn", tc);
        if (uses_head())
            head_ = nn::AnBfHead("head", 4 * cfg_.channels * cfg_.channels, cfg_.fd_head_proj,
                                 cfg_.fd_head_gru, 2 * cfg_.channels);
    }

    bool uses_head() const {
        return cfg_.variant == BfVariant::an_mvdr || cfg_.variant == BfVariant::an_mcwf;
    }
    const PipelineConfig& config() const { return cfg_; }
    const StftKernel& kernel() const { return kernel_; }
    const nn::AnBfHead& head() const { return head_; }

    void init(ParamStore& ps, Rng& rng) const {
        tcn_.init(ps, rng);
        if (uses_head()) head_.init(ps, rng);
    }

    struct Forward {
        Var estimate;  // [K]
        Var separated_ref_re, separated_ref_im;  // masked reference spectrogram
    };

    Forward forward(Ctx& ctx, const MultichannelSignal& mixture, double target_doa_deg) const {
        using namespace ad;
        const FrameGrid grid = cfg_.grid();
        const std::size_t M = cfg_.channels, F = cfg_.bands();
        auto spec = stft(mixture, kernel_, grid);
        std::size_t T = spec.frames();

        // constants: feature stack and per-channel re/im spectrograms
        auto fstack = fd_features(spec, geometry_, target_doa_deg, kernel_, geometry_.reference);
        Tensor feats({T, fstack.width()});
        for (std::size_t t = 0; t < T; t++) {
            auto row = fstack.row(t);
            std::copy(row.begin(), row.end(), feats.v.begin() + t * fstack.width());
        }
        std::vector<Var> yre(M), yim(M);
        for (std::size_t m = 0; m < M; m++) {
            Tensor re({T, F}), im({T, F});
            for (std::size_t t = 0; t < T; t++)
                for (std::size_t f = 0; f < F; f++) {
                    re.at(t, f) = spec.values[m][t][f].real();
                    im.at(t, f) = spec.values[m][t][f].imag();
                }
            yre[m] = ctx.constant(std::move(re));
            yim[m] = ctx.constant(std::move(im));
        }

        // cRMs, shared across channels
        Var mask_out = tcn_.forward(ctx, ctx.constant(std::move(feats)));
        Var ms_re = slice_cols(mask_out, 0, F);
        Var ms_im = slice_cols(mask_out, F, 2 * F);
        Var mn_re = slice_cols(mask_out, 2 * F, 3 * F);
        Var mn_im = slice_cols(mask_out, 3 * F, 4 * F);

        auto cmul_re = [&](Var are, Var aim, Var bre, Var bim) {
            return sub(mul(are, bre), mul(aim, bim));
        };
        auto cmul_im = [&](Var are, Var aim, Var bre, Var bim) {
            return add(mul(are, bim), mul(aim, bre));
        };

        std::vector<Var> sre(M), sim(M), nre(M), nim(M);
        for (std::size_t m = 0; m < M; m++) {
            sre[m] = cmul_re(ms_re, ms_im, yre[m], yim[m]);
            sim[m] = cmul_im(ms_re, ms_im, yre[m], yim[m]);
            nre[m] = cmul_re(mn_re, mn_im, yre[m], yim[m]);
            nim[m] = cmul_im(mn_re, mn_im, yre[m], yim[m]);
        }

        Forward out;
        out.separated_ref_re = sre[geometry_.reference];
        out.separated_ref_im = sim[geometry_.reference];

        if (!uses_head()) {
            out.estimate =
                istft_synth(out.separated_ref_re, out.separated_ref_im, kernel_, grid);
            return out;
        }

        // SCM features folded per frequency: [F*T x 4M^2]
        Var stats = (cfg_.variant == BfVariant::an_mvdr)
                        ? concat_cols({complex_outer_pack(sre, sim, sre, sim),
                                       complex_outer_pack(nre, nim, nre, nim)})
                        : concat_cols({complex_outer_pack(yre, yim, yre, yim),
                                       complex_outer_pack(yre, yim, sre, sim)});

        // per-frequency recurrence with shared parameters, then Eq. 15
        std::vector<Var> bf_re_cols(F), bf_im_cols(F);
        for (std::size_t f = 0; f < F; f++) {
            Var w = head_.forward(ctx, slice_rows(stats, f * T, (f + 1) * T));  // [T x 2M]
            Var acc_re, acc_im;
            for (std::size_t m = 0; m < M; m++) {
                Var wre = slice_cols(w, m, m + 1);
                Var wim = slice_cols(w, M + m, M + m + 1);
                Var yre_f = slice_cols(yre[m], f, f + 1);
                Var yim_f = slice_cols(yim[m], f, f + 1);
                // conj(w) * y accumulated over channels
                Var term_re = add(mul(wre, yre_f), mul(wim, yim_f));
                Var term_im = sub(mul(wre, yim_f), mul(wim, yre_f));
                acc_re = (m == 0) ? term_re : add(acc_re, term_re);
                acc_im = (m == 0) ? term_im : add(acc_im, term_im);
            }
            bf_re_cols[f] = acc_re;
            bf_im_cols[f] = acc_im;
        }
        Var bf_re = concat_cols(bf_re_cols);
        Var bf_im = concat_cols(bf_im_cols);
        out.estimate = istft_synth(bf_re, bf_im, kernel_, grid);
        return out;
    }

  private:
    PipelineConfig cfg_;
    ArrayGeometry geometry_;
    StftKernel kernel_;
    nn::Tcn tcn_;
    nn::AnBfHead head_;
};

}  // namespace beamkit
