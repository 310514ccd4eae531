// trainer.hpp
// Deterministic single-threaded trainer: Adam updates, per-epoch train and
// validation losses, learning-rate halving on a 3-epoch plateau, abort with
// the last good parameters when the loss goes non-finite.
#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "beamkit/losses.hpp"
#include "beamkit/pipeline.hpp"
#include "beamkit/scene.hpp"

namespace beamkit {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
  public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    double learning_rate() const { return cfg_.lr; }
    void set_learning_rate(double lr) { cfg_.lr = lr; }

    void step(ParamStore& ps, const std::map<std::string, Tensor>& grads) {
        t_++;
        double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
        double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
        for (const auto& [name, g] : grads) {
            Tensor& p = ps.at(name);
            Tensor& m = state(m_, name, p);
            Tensor& v = state(v_, name, p);
            for (std::size_t i = 0; i < p.size(); i++) {
                m.v[i] = cfg_.beta1 * m.v[i] + (1.0 - cfg_.beta1) * g.v[i];
                v.v[i] = cfg_.beta2 * v.v[i] + (1.0 - cfg_.beta2) * g.v[i] * g.v[i];
                double mh = m.v[i] / bc1, vh = v.v[i] / bc2;
                p.v[i] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
            }
        }
    }

  private:
    Tensor& state(std::map<std::string, Tensor>& store, const std::string& name,
                  const Tensor& like) {
        auto it = store.find(name);
        if (it == store.end()) it = store.emplace(name, Tensor(like.shape)).first;
        return it->second;
    }
    AdamConfig cfg_;
    std::map<std::string, Tensor> m_, v_;
    long t_ = 0;
};

// L-MFB distance as a graph node: STFT of the estimate via fixed DFT
// matrices, magnitude, Mel energies, squared log10 difference against the
// reference spectrogram's Mel energies.
inline Var lmfb_loss_node(Ctx& ctx, Var est, const std::vector<std::vector<cplx>>& ref_spec,
                          const StftKernel& kernel, const FrameGrid& grid, const MelBank& bank) {
    using namespace ad;
    std::size_t N = grid.window_length, F = kernel.bands(), B = bank.weights.size();
    Var frames = frame_signal(est, grid);
    std::size_t T = V(frames).rows();
    require(T == ref_spec.size(), "lmfb_loss_node: frame count mismatch");

    Tensor win({N});
    for (std::size_t n = 0; n < N; n++) win.v[n] = kernel.window()[n];
    Var windowed = mul_rowvec(frames, ctx.constant(std::move(win)));

    Tensor dft_re({N, F}), dft_im({N, F});
    for (std::size_t n = 0; n < N; n++)
        for (std::size_t f = 0; f < F; f++) {
            double ang = kTwoPi * double(n) * double(f) / double(N);
            dft_re.at(n, f) = std::cos(ang);
            dft_im.at(n, f) = -std::sin(ang);
        }
    Var re = matmul(windowed, ctx.constant(std::move(dft_re)));
    Var im = matmul(windowed, ctx.constant(std::move(dft_im)));
    Var mag = sqrt_op(add_scalar(add(mul(re, re), mul(im, im)), 1e-24));

    Tensor melw({F, B});
    for (std::size_t b = 0; b < B; b++)
        for (std::size_t f = 0; f < F; f++) melw.at(f, b) = bank.weights[b][f];
    Var mel = matmul(mag, ctx.constant(std::move(melw)));
    Var logmel = mul_scalar(log_op(add_scalar(mel, 1e-8)), 1.0 / std::log(10.0));

    Tensor ref_logmel({T, B});
    for (std::size_t t = 0; t < T; t++)
        for (std::size_t b = 0; b < B; b++) {
            double acc = 0;
            for (std::size_t f = 0; f < F; f++)
                acc += bank.weights[b][f] * std::abs(ref_spec[t][f]);
            ref_logmel.at(t, b) = std::log10(acc + 1e-8);
        }
    Var diff = sub(logmel, ctx.constant(std::move(ref_logmel)));
    return mean_all(mul(diff, diff));
}

struct TrainConfig {
    int epochs = 10;
    AdamConfig adam;
    int plateau_epochs = 3;       // halve lr after this many non-improving epochs
    double lmfb_weight = 0.0;     // lambda in loss = -SI-SDR + lambda * L-MFB
};

struct TrainTrace {
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_loss;
    std::vector<double> learning_rate;
    bool aborted_non_finite = false;
};

struct TrainScene {
    MultichannelSignal mixture;
    std::vector<double> target_ref;
    double target_doa_deg = 90.0;
};

inline TrainScene to_train_scene(const Scene& sc) {
    return TrainScene{sc.mixture, sc.target.ch(sc.geometry.reference), sc.spec.target_doa_deg};
}

// Works for TdPipeline and FdPipeline: anything exposing
// forward(Ctx&, mixture, doa) with an `estimate` member.
template <typename Pipeline>
TrainTrace train_pipeline(const Pipeline& pipe, ParamStore& ps,
                          const std::vector<TrainScene>& train_scenes,
                          const std::vector<TrainScene>& val_scenes, const TrainConfig& tc) {
    require(!train_scenes.empty(), "train: empty training set");
    Adam adam(tc.adam);
    TrainTrace trace;

    // Eq. 27 operates on spectrograms; the TD estimate is analyzed at the
    // standard 32 ms / 16 ms grid for the Mel distance.
    StftKernel loss_kernel = StftKernel::sqrt_hann(512);
    MelBank bank = MelBank::make(40, loss_kernel.bands(), pipe.config().sample_rate, 512);
    FrameGrid loss_grid(512, 256);

    auto scene_loss = [&](Ctx& ctx, const TrainScene& s) {
        auto fwd = pipe.forward(ctx, s.mixture, s.target_doa_deg);
        Var loss = ad::si_sdr_loss(fwd.estimate, s.target_ref);
        if (tc.lmfb_weight > 0.0) {
            std::size_t K = ad::V(fwd.estimate).size();
            std::vector<double> ref(s.target_ref.begin(),
                                    s.target_ref.begin() + std::min(K, s.target_ref.size()));
            auto ref_spec = stft_mono(ref, loss_kernel, loss_grid);
            Var est_trim = (K > ref.size()) ? ad::slice_rows(ad::reshape(fwd.estimate, {K, 1}),
                                                             0, ref.size())
                                            : fwd.estimate;
            if (K > ref.size()) est_trim = ad::reshape(est_trim, {ref.size()});
            Var lm = lmfb_loss_node(ctx, est_trim, ref_spec.values[0], loss_kernel, loss_grid,
                                    bank);
            loss = ad::add(loss, ad::mul_scalar(lm, tc.lmfb_weight));
        }
        return loss;
    };

    auto eval_loss = [&](const std::vector<TrainScene>& scenes) {
        double acc = 0;
        for (const auto& s : scenes) {
            Tape tape;
            Ctx ctx{tape, ps};
            acc += tape.val(scene_loss(ctx, s)).v[0];
        }
        return acc / double(scenes.size());
    };

    ParamStore last_good = ps;
    double best_val = 1e300;
    int stall = 0;
    for (int epoch = 0; epoch < tc.epochs; epoch++) {
        double epoch_loss = 0;
        bool bad = false;
        for (const auto& s : train_scenes) {
            Tape tape;
            Ctx ctx{tape, ps};
            Var loss = scene_loss(ctx, s);
            double lv = tape.val(loss).v[0];
            if (!std::isfinite(lv)) {
                bad = true;
                break;
            }
            epoch_loss += lv;
            tape.backward(loss);
            adam.step(ps, ctx.grads());
        }
        if (bad) {
            ps = last_good;
            trace.aborted_non_finite = true;
            break;
        }
        epoch_loss /= double(train_scenes.size());
        double val = val_scenes.empty() ? epoch_loss : eval_loss(val_scenes);
        if (!std::isfinite(val)) {
            ps = last_good;
            trace.aborted_non_finite = true;
            break;
        }
        trace.train_loss.push_back(epoch_loss);
        trace.val_loss.push_back(val);
        trace.learning_rate.push_back(adam.learning_rate());
        last_good = ps;

        if (val < best_val - 1e-9) {
            best_val = val;
            stall = 0;
        } else if (++stall >= tc.plateau_epochs) {
            adam.set_learning_rate(adam.learning_rate() * 0.5);
            stall = 0;
        }
    }
    return trace;
}

}  // namespace beamkit
