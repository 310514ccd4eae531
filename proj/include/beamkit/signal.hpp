// signal.hpp
// Multichannel sample buffers, framing grid, framing and overlap-add.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "beamkit/common.hpp"

namespace beamkit {

// M x K real sample matrix with sample-rate metadata.
struct MultichannelSignal {
    std::vector<std::vector<double>> samples;  // [channel][sample]
    double sample_rate = 16000.0;

    MultichannelSignal() = default;
    MultichannelSignal(std::size_t channels, std::size_t length, double fs = 16000.0)
        : samples(channels, std::vector<double>(length, 0.0)), sample_rate(fs) {}

    std::size_t channels() const { return samples.size(); }
    std::size_t length() const { return samples.empty() ? 0 : samples[0].size(); }
    std::vector<double>& ch(std::size_t m) { return samples[m]; }
    const std::vector<double>& ch(std::size_t m) const { return samples[m]; }

    static MultichannelSignal mono(std::vector<double> x, double fs = 16000.0) {
        MultichannelSignal s;
        s.samples.push_back(std::move(x));
        s.sample_rate = fs;
        return s;
    }

    void validate() const {
        for (const auto& c : samples) {
            require(c.size() == length(), "channel length mismatch");
            for (double v : c) require(std::isfinite(v), "non-finite sample");
        }
    }
};

// Window length N, hop H, frame count T = floor((K - N)/H) + 1.
struct FrameGrid {
    std::size_t window_length = 0;  // N
    std::size_t hop = 0;            // H

    FrameGrid() = default;
    FrameGrid(std::size_t n, std::size_t h) : window_length(n), hop(h) {
        require(h > 0 && h <= n, "FrameGrid requires 0 < H <= N");
    }
    std::size_t frame_count(std::size_t signal_length) const {
        require(signal_length >= window_length, "signal too short");
        return (signal_length - window_length) / hop + 1;
    }
    // samples produced by overlap-adding T frames
    std::size_t cover_length(std::size_t frames) const {
        return (frames - 1) * hop + window_length;
    }
};

// Frames of one channel: frame t holds samples [tH, tH + N).
inline std::vector<std::vector<double>> frame_channel(const std::vector<double>& x,
                                                      const FrameGrid& grid) {
    std::size_t T = grid.frame_count(x.size());
    std::vector<std::vector<double>> out(T, std::vector<double>(grid.window_length));
    for (std::size_t t = 0; t < T; t++)
        for (std::size_t n = 0; n < grid.window_length; n++)
            out[t][n] = x[t * grid.hop + n];
    return out;
}

// Frames of all channels: result[t] is an M x N matrix.
inline std::vector<std::vector<std::vector<double>>> frame(const MultichannelSignal& sig,
                                                           const FrameGrid& grid) {
    std::size_t T = grid.frame_count(sig.length());
    std::vector<std::vector<std::vector<double>>> out(
        T, std::vector<std::vector<double>>(sig.channels(),
                                            std::vector<double>(grid.window_length)));
    for (std::size_t m = 0; m < sig.channels(); m++)
        for (std::size_t t = 0; t < T; t++)
            for (std::size_t n = 0; n < grid.window_length; n++)
                out[t][m][n] = sig.ch(m)[t * grid.hop + n];
    return out;
}

// y(k) = sum_t frame_t(k - tH). No window, no normalization.
inline std::vector<double> overlap_add(const std::vector<std::vector<double>>& frames,
                                       const FrameGrid& grid) {
    require(!frames.empty(), "overlap_add needs at least one frame");
    std::size_t N = grid.window_length, H = grid.hop;
    std::vector<double> y(grid.cover_length(frames.size()), 0.0);
    for (std::size_t t = 0; t < frames.size(); t++)
        for (std::size_t n = 0; n < N; n++) y[t * H + n] += frames[t][n];
    return y;
}

// Per-sample frame coverage count; the rectangular-COLA divisor used when a
// plain framed signal must survive overlap-add unchanged.
inline std::vector<double> overlap_count(std::size_t frames, const FrameGrid& grid) {
    std::vector<double> c(grid.cover_length(frames), 0.0);
    for (std::size_t t = 0; t < frames; t++)
        for (std::size_t n = 0; n < grid.window_length; n++) c[t * grid.hop + n] += 1.0;
    return c;
}

}  // namespace beamkit
