#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "beamkit/common.hpp"
#include "beamkit/delay.hpp"
#include "beamkit/signal.hpp"
#include "beamkit/stft.hpp"

using namespace beamkit;

namespace {

// Independent direct-DFT oracle: one-sided spectrum of a windowed frame,
// term-by-term with std::polar.
std::vector<cplx> direct_dft(const std::vector<double>& frame, const std::vector<double>& win) {
    std::size_t n = frame.size();
    std::vector<cplx> out(n / 2 + 1, cplx(0, 0));
    for (std::size_t f = 0; f < out.size(); f++)
        for (std::size_t i = 0; i < n; i++)
            out[f] += win[i] * frame[i] * std::polar(1.0, -kTwoPi * double(i) * double(f) / double(n));
    return out;
}

std::vector<double> random_signal(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.gaussian();
    return x;
}

// band-limited random signal (<= 0.9 Nyquist) via sum of sinusoids
std::vector<double> bandlimited_signal(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n, 0.0);
    for (int c = 0; c < 24; c++) {
        double f = rng.uniform(0.01, 0.45);  // cycles/sample, 0.45 = 0.9 * Nyquist
        double a = rng.uniform(0.2, 1.0), ph = rng.uniform(0.0, kTwoPi);
        for (std::size_t k = 0; k < n; k++) x[k] += a * std::sin(kTwoPi * f * double(k) + ph);
    }
    return x;
}

double rel_l2(const std::vector<double>& a, const std::vector<double>& b, std::size_t lo,
              std::size_t hi) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = lo; k < hi; k++) {
        num += (a[k] - b[k]) * (a[k] - b[k]);
        den += a[k] * a[k];
    }
    return std::sqrt(num / std::max(den, 1e-300));
}

}  // namespace

TEST_CASE("framing arithmetic") {
    FrameGrid g1(512, 256);
    auto sig = MultichannelSignal::mono(random_signal(512, 1));
    auto fr = frame(sig, g1);
    CHECK(fr.size() == 1);
    for (std::size_t i = 0; i < 512; i++) CHECK(fr[0][0][i] == sig.ch(0)[i]);

    auto sig2 = MultichannelSignal::mono(random_signal(1024, 2));
    auto fr2 = frame(sig2, g1);
    CHECK(fr2.size() == 3);
    for (std::size_t i = 0; i < 512; i++) CHECK(fr2[1][0][i] == sig2.ch(0)[256 + i]);

    FrameGrid g3(40, 20);
    CHECK(g3.frame_count(16000) == 799);

    CHECK_THROWS(frame(MultichannelSignal::mono(random_signal(100, 3)), g1));
}

TEST_CASE("stft basics") {
    FrameGrid grid(64, 32);

    SUBCASE("zero signal -> zero spectrogram") {
        auto kernel = StftKernel::sqrt_hann(64);
        auto spec = stft_mono(std::vector<double>(256, 0.0), kernel, grid);
        for (const auto& fr : spec.values[0])
            for (auto v : fr) CHECK(std::abs(v) == 0.0);
    }

    SUBCASE("impulse at frame start, rectangular window -> flat unit spectrum") {
        auto kernel = StftKernel::rectangular(64);
        std::vector<double> x(128, 0.0);
        x[0] = 1.0;
        auto spec = stft_mono(x, kernel, grid);
        for (auto v : spec.values[0][0]) {
            CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(v.imag() == doctest::Approx(0.0).epsilon(1e-12));
        }
    }

    SUBCASE("bin-centered sinusoid, Hann window: energy at k-1..k+1, matches direct DFT") {
        std::size_t n = 64, k0 = 12;
        std::vector<double> hann(n);
        for (std::size_t i = 0; i < n; i++) hann[i] = 0.5 - 0.5 * std::cos(kTwoPi * i / double(n));
        StftKernel kernel{std::vector<double>(hann)};
        std::vector<double> x(256);
        for (std::size_t i = 0; i < x.size(); i++)
            x[i] = std::sin(kTwoPi * double(k0) * double(i) / double(n));
        auto spec = stft_mono(x, kernel, FrameGrid(n, n / 2));

        // oracle comparison on frame 1
        std::vector<double> fr(x.begin() + 32, x.begin() + 32 + n);
        auto oracle = direct_dft(fr, hann);
        double total = 0.0, local = 0.0;
        for (std::size_t f = 0; f < oracle.size(); f++) {
            CHECK(std::abs(spec.values[0][1][f] - oracle[f]) < 1e-9);
            double e = std::norm(spec.values[0][1][f]);
            total += e;
            if (f + 1 >= k0 && f <= k0 + 1) local += e;
        }
        CHECK(local / total > 0.99);
    }
}

TEST_CASE("stft linearity and shift theorem") {
    FrameGrid grid(64, 32);
    auto kernel = StftKernel::sqrt_hann(64);
    auto x = random_signal(320, 10), y = random_signal(320, 11);
    std::vector<double> z(320);
    for (std::size_t i = 0; i < 320; i++) z[i] = 2.5 * x[i] - 1.25 * y[i];
    auto sx = stft_mono(x, kernel, grid), sy = stft_mono(y, kernel, grid),
         sz = stft_mono(z, kernel, grid);
    for (std::size_t t = 0; t < sz.frames(); t++)
        for (std::size_t f = 0; f < sz.bands(); f++)
            CHECK(std::abs(sz.values[0][t][f] -
                           (2.5 * sx.values[0][t][f] - 1.25 * sy.values[0][t][f])) < 1e-10);

    // Shift theorem: for an N-periodic signal under a rectangular window, an
    // integer delay D rotates bin f by exactly -2*pi*f*D/N on interior frames.
    const std::size_t N = 64;
    const int D = 7;
    Rng rng(12);
    std::vector<double> xp(8 * N, 0.0);
    for (int h = 1; h <= 10; h++) {
        double a = rng.uniform(0.2, 1.0), ph = rng.uniform(0.0, kTwoPi);
        for (std::size_t k = 0; k < xp.size(); k++)
            xp[k] += a * std::sin(kTwoPi * double(h) * double(k) / double(N) + ph);
    }
    std::vector<double> xpd(xp.size(), 0.0);
    for (std::size_t i = D; i < xp.size(); i++) xpd[i] = xp[i - D];
    auto rk = StftKernel::rectangular(N);
    FrameGrid rg(N, N / 2);
    auto su = stft_mono(xp, rk, rg);
    auto sd = stft_mono(xpd, rk, rg);
    auto oracle_frame = direct_dft(std::vector<double>(xpd.begin() + 2 * rg.hop,
                                                       xpd.begin() + 2 * rg.hop + N),
                                   rk.window());
    for (std::size_t f = 0; f < su.bands(); f++) {
        cplx rot = std::polar(1.0, -kTwoPi * double(f) * double(D) / double(N));
        CHECK(std::abs(sd.values[0][2][f] - rot * su.values[0][2][f]) < 1e-9);
        CHECK(std::abs(sd.values[0][2][f] - oracle_frame[f]) < 1e-9);
    }
}

TEST_CASE("istft round trips") {
    SUBCASE("zero spectrogram -> zero signal") {
        auto kernel = StftKernel::sqrt_hann(64);
        ComplexSpectrogram spec;
        spec.grid = FrameGrid(64, 32);
        spec.values.assign(1, std::vector<std::vector<cplx>>(4, std::vector<cplx>(33, cplx(0, 0))));
        auto out = istft(spec, kernel);
        for (double v : out.ch(0)) CHECK(v == 0.0);
    }

    SUBCASE("white noise, N=512 H=256 sqrt-Hann: interior rel err < 1e-10") {
        FrameGrid grid(512, 256);
        auto kernel = StftKernel::sqrt_hann(512);
        auto x = random_signal(4096, 42);
        auto spec = stft_mono(x, kernel, grid);
        auto y = istft(spec, kernel);
        CHECK(rel_l2(x, y.ch(0), 512, y.length() - 512) < 1e-10);
    }

    SUBCASE("chirp round trip") {
        FrameGrid grid(512, 256);
        auto kernel = StftKernel::sqrt_hann(512);
        std::vector<double> x(4096);
        for (std::size_t k = 0; k < x.size(); k++) {
            double u = double(k) / double(x.size());
            x[k] = std::sin(kTwoPi * (200.0 * u + 2800.0 * u * u) * double(k) / 16000.0);
        }
        auto spec = stft_mono(x, kernel, grid);
        auto y = istft(spec, kernel);
        CHECK(rel_l2(x, y.ch(0), 512, y.length() - 512) < 1e-10);
    }
}

TEST_CASE("fractional delay") {
    SUBCASE("tau = 0 is identity") {
        auto x = random_signal(200, 5);
        auto y = fractional_delay(x, 0.0);
        for (std::size_t i = 0; i < x.size(); i++) CHECK(y[i] == x[i]);
    }

    SUBCASE("integer tau shifts an impulse exactly") {
        std::vector<double> x(64, 0.0);
        x[10] = 1.0;
        auto y = fractional_delay(x, 3.0);
        CHECK(y[13] == 1.0);
        for (std::size_t i = 0; i < y.size(); i++)
            if (i != 13) CHECK(y[i] == 0.0);
    }

    SUBCASE("tau = 6.997 on a 1 kHz sinusoid matches the analytic phase shift") {
        const double fs = 16000.0, fhz = 1000.0, tau = 6.997;
        std::size_t n = 2048;
        std::vector<double> x(n), want(n);
        for (std::size_t k = 0; k < n; k++) {
            x[k] = std::sin(kTwoPi * fhz * double(k) / fs);
            want[k] = std::sin(kTwoPi * fhz * (double(k) - tau) / fs);
        }
        auto y = fractional_delay(x, tau);
        // compare away from the edges where the sinc support is truncated
        double num = 0, den = 0;
        for (std::size_t k = 64; k + 64 < n; k++) {
            num += (y[k] - want[k]) * (y[k] - want[k]);
            den += want[k] * want[k];
        }
        CHECK(std::sqrt(num / den) < 1e-4);
    }

    SUBCASE("composition: tau1 then tau2 equals tau1 + tau2 on band-limited input") {
        auto x = bandlimited_signal(1024, 77);
        auto a = fractional_delay(fractional_delay(x, 2.3), 4.45);
        auto b = fractional_delay(x, 6.75);
        double num = 0, den = 0;
        for (std::size_t k = 128; k + 128 < x.size(); k++) {
            num += (a[k] - b[k]) * (a[k] - b[k]);
            den += b[k] * b[k];
        }
        CHECK(std::sqrt(num / den) < 1e-6);
    }
}

TEST_CASE("overlap add") {
    SUBCASE("single frame") {
        FrameGrid g(40, 20);
        std::vector<std::vector<double>> fr(1, random_signal(40, 9));
        auto y = overlap_add(fr, g);
        CHECK(y.size() == 40);
        for (std::size_t i = 0; i < 40; i++) CHECK(y[i] == fr[0][i]);
    }

    SUBCASE("constant ones, N=40 H=20: interior value 2") {
        FrameGrid g(40, 20);
        std::vector<std::vector<double>> fr(6, std::vector<double>(40, 1.0));
        auto y = overlap_add(fr, g);
        for (std::size_t k = 20; k + 20 < y.size(); k++) CHECK(y[k] == doctest::Approx(2.0));
    }

    SUBCASE("frame then overlap_add with H = N restores the signal") {
        FrameGrid g(32, 32);
        auto x = random_signal(128, 21);
        auto fr = frame_channel(x, g);
        auto y = overlap_add(fr, g);
        for (std::size_t i = 0; i < y.size(); i++) CHECK(y[i] == x[i]);
    }
}
