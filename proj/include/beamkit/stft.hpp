// stft.hpp
// STFT analysis/synthesis realized as convolution with a complex kernel
//   F[n][f] = w[n] * exp(-j*2*pi*n*f/N),  f = 0..N/2  (one-sided)
// and weighted overlap-add resynthesis with the same window.
#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "beamkit/common.hpp"
#include "beamkit/signal.hpp"

namespace beamkit {

inline std::vector<double> sqrt_hann_window(std::size_t n) {
    // sqrt of the periodic Hann: w[i] = sin(pi*i/N); COLA at H = N/2
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; i++) w[i] = std::sin(kPi * double(i) / double(n));
    return w;
}

inline std::vector<double> rect_window(std::size_t n) { return std::vector<double>(n, 1.0); }

// Complex analysis kernel plus the sampled cos/sin tables shared by the
// synthesis path.
class StftKernel {
  public:
    StftKernel(std::vector<double> window) : window_(std::move(window)) {
        n_ = window_.size();
        require(n_ >= 2, "window too short");
        bands_ = n_ / 2 + 1;
        cos_.assign(n_ * bands_, 0.0);
        sin_.assign(n_ * bands_, 0.0);
        for (std::size_t i = 0; i < n_; i++) {
            for (std::size_t f = 0; f < bands_; f++) {
                double ang = kTwoPi * double(i) * double(f) / double(n_);
                cos_[i * bands_ + f] = std::cos(ang);
                sin_[i * bands_ + f] = std::sin(ang);
            }
        }
    }
    static StftKernel sqrt_hann(std::size_t n) { return StftKernel(sqrt_hann_window(n)); }
    static StftKernel rectangular(std::size_t n) { return StftKernel(rect_window(n)); }

    std::size_t window_length() const { return n_; }
    std::size_t bands() const { return bands_; }
    const std::vector<double>& window() const { return window_; }

    // kernel entry F[n][f] = w[n] e^{-j 2 pi n f / N}
    cplx entry(std::size_t i, std::size_t f) const {
        return window_[i] * cplx(cos_[i * bands_ + f], -sin_[i * bands_ + f]);
    }

    // one-sided spectrum of a length-N frame
    void analyze(const double* x, cplx* out) const {
        for (std::size_t f = 0; f < bands_; f++) out[f] = cplx(0.0, 0.0);
        for (std::size_t i = 0; i < n_; i++) {
            double v = window_[i] * x[i];
            if (v == 0.0) continue;
            const double* c = &cos_[i * bands_];
            const double* s = &sin_[i * bands_];
            for (std::size_t f = 0; f < bands_; f++) out[f] += cplx(v * c[f], -v * s[f]);
        }
    }

    // inverse DFT of a one-sided spectrum (conjugate symmetry reapplied),
    // then multiplied by the synthesis window (= analysis window)
    void synthesize(const cplx* spec, double* frame_out) const {
        const bool has_nyquist = (n_ % 2 == 0);
        for (std::size_t i = 0; i < n_; i++) {
            const double* c = &cos_[i * bands_];
            const double* s = &sin_[i * bands_];
            double acc = spec[0].real();
            for (std::size_t f = 1; f < bands_; f++) {
                double term = spec[f].real() * c[f] - spec[f].imag() * s[f];
                acc += (has_nyquist && f == bands_ - 1) ? term : 2.0 * term;
            }
            frame_out[i] = window_[i] * acc / double(n_);
        }
    }

  private:
    std::vector<double> window_;
    std::size_t n_ = 0, bands_ = 0;
    std::vector<double> cos_, sin_;  // [n * bands]
};

// M x T x F one-sided complex tensor.
struct ComplexSpectrogram {
    std::vector<std::vector<std::vector<cplx>>> values;  // [channel][frame][band]
    FrameGrid grid;
    double sample_rate = 16000.0;

    std::size_t channels() const { return values.size(); }
    std::size_t frames() const { return values.empty() ? 0 : values[0].size(); }
    std::size_t bands() const { return frames() == 0 ? 0 : values[0][0].size(); }
    double bin_hz(std::size_t f) const {
        return double(f) * sample_rate / double(grid.window_length);
    }
};

// Y^m(t,f) = sum_n y^m(tH + n) F[n][f]
inline ComplexSpectrogram stft(const MultichannelSignal& sig, const StftKernel& kernel,
                               const FrameGrid& grid) {
    require(grid.window_length == kernel.window_length(),
            "stft: grid window length does not match kernel");
    std::size_t T = grid.frame_count(sig.length());
    ComplexSpectrogram spec;
    spec.grid = grid;
    spec.sample_rate = sig.sample_rate;
    spec.values.assign(sig.channels(),
                       std::vector<std::vector<cplx>>(T, std::vector<cplx>(kernel.bands())));
    for (std::size_t m = 0; m < sig.channels(); m++) {
        const auto& x = sig.ch(m);
        for (std::size_t t = 0; t < T; t++)
            kernel.analyze(x.data() + t * grid.hop, spec.values[m][t].data());
    }
    return spec;
}

inline ComplexSpectrogram stft_mono(const std::vector<double>& x, const StftKernel& kernel,
                                    const FrameGrid& grid, double fs = 16000.0) {
    return stft(MultichannelSignal::mono(x, fs), kernel, grid);
}

// Weighted overlap-add synthesis. Analysis and synthesis windows are equal,
// so the output is divided by sum_t w^2[k - tH]; that divisor is 1 on the
// interior for sqrt-Hann with H = N/2. Edge samples where the divisor is
// tiny are left tapered.
inline std::vector<double> istft_channel(const std::vector<std::vector<cplx>>& frames_spec,
                                         const StftKernel& kernel, const FrameGrid& grid) {
    require(grid.window_length == kernel.window_length(), "istft: kernel/grid mismatch");
    std::size_t T = frames_spec.size();
    require(T >= 1, "istft: empty spectrogram");
    std::size_t N = grid.window_length, H = grid.hop;
    std::vector<double> y(grid.cover_length(T), 0.0), den(y.size(), 0.0);
    std::vector<double> buf(N);
    const auto& w = kernel.window();
    for (std::size_t t = 0; t < T; t++) {
        kernel.synthesize(frames_spec[t].data(), buf.data());
        for (std::size_t i = 0; i < N; i++) {
            y[t * H + i] += buf[i];
            den[t * H + i] += w[i] * w[i];
        }
    }
    for (std::size_t k = 0; k < y.size(); k++) y[k] /= std::max(den[k], 1e-8);
    return y;
}

inline MultichannelSignal istft(const ComplexSpectrogram& spec, const StftKernel& kernel) {
    MultichannelSignal out;
    out.sample_rate = spec.sample_rate;
    out.samples.resize(spec.channels());
    for (std::size_t m = 0; m < spec.channels(); m++)
        out.samples[m] = istft_channel(spec.values[m], kernel, spec.grid);
    return out;
}

}  // namespace beamkit
