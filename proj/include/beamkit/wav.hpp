// wav.hpp
// Little-endian RIFF/WAVE read and write: PCM 16-bit and IEEE float32,
// mono or interleaved multichannel.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "beamkit/common.hpp"
#include "beamkit/signal.hpp"

namespace beamkit {

enum class WavFormat { pcm16, float32 };

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    b.push_back(v & 0xFF);
    b.push_back((v >> 8) & 0xFF);
    b.push_back((v >> 16) & 0xFF);
    b.push_back((v >> 24) & 0xFF);
}
inline void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(v & 0xFF);
    b.push_back((v >> 8) & 0xFF);
}
inline std::uint32_t get_u32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}
inline std::uint16_t get_u16(const std::uint8_t* p) {
    return std::uint16_t(p[0]) | (std::uint16_t(p[1]) << 8);
}

}  // namespace detail

inline void write_wav(const std::string& path, const MultichannelSignal& sig,
                      WavFormat fmt = WavFormat::float32) {
    const std::uint16_t channels = static_cast<std::uint16_t>(sig.channels());
    const std::uint32_t rate = static_cast<std::uint32_t>(sig.sample_rate);
    const std::uint16_t bits = fmt == WavFormat::pcm16 ? 16 : 32;
    const std::uint16_t block = channels * bits / 8;
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(sig.length()) * block;

    std::vector<std::uint8_t> b;
    b.reserve(44 + data_bytes);
    auto put_tag = [&](const char* t) { b.insert(b.end(), t, t + 4); };
    put_tag("RIFF");
    detail::put_u32(b, 36 + data_bytes);
    put_tag("WAVE");
    put_tag("fmt ");
    detail::put_u32(b, 16);
    detail::put_u16(b, fmt == WavFormat::pcm16 ? 1 : 3);  // PCM / IEEE float
    detail::put_u16(b, channels);
    detail::put_u32(b, rate);
    detail::put_u32(b, rate * block);
    detail::put_u16(b, block);
    detail::put_u16(b, bits);
    put_tag("data");
    detail::put_u32(b, data_bytes);

    for (std::size_t k = 0; k < sig.length(); k++) {
        for (std::size_t m = 0; m < channels; m++) {
            double v = sig.ch(m)[k];
            if (fmt == WavFormat::pcm16) {
                double c = std::max(-1.0, std::min(1.0, v));
                auto q = static_cast<std::int16_t>(std::lround(c * 32767.0));
                detail::put_u16(b, static_cast<std::uint16_t>(q));
            } else {
                float f = static_cast<float>(v);
                std::uint32_t u;
                std::memcpy(&u, &f, 4);
                detail::put_u32(b, u);
            }
        }
    }

    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    require(out.good(), "write failed: " + path);
}

inline MultichannelSignal read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open: " + path);
    std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
    require(b.size() >= 44 && std::memcmp(b.data(), "RIFF", 4) == 0 &&
                std::memcmp(b.data() + 8, "WAVE", 4) == 0,
            "not a RIFF/WAVE file: " + path);

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    std::size_t data_off = 0, data_len = 0;
    std::size_t pos = 12;
    while (pos + 8 <= b.size()) {
        std::uint32_t chunk_len = detail::get_u32(b.data() + pos + 4);
        if (std::memcmp(b.data() + pos, "fmt ", 4) == 0) {
            require(chunk_len >= 16, "bad fmt chunk: " + path);
            format = detail::get_u16(b.data() + pos + 8);
            channels = detail::get_u16(b.data() + pos + 10);
            rate = detail::get_u32(b.data() + pos + 12);
            bits = detail::get_u16(b.data() + pos + 22);
        } else if (std::memcmp(b.data() + pos, "data", 4) == 0) {
            data_off = pos + 8;
            data_len = chunk_len;
        }
        pos += 8 + chunk_len + (chunk_len & 1);
    }
    require(data_off != 0 && channels > 0, "missing data or fmt chunk: " + path);
    require((format == 1 && bits == 16) || (format == 3 && bits == 32),
            "unsupported WAV encoding (want PCM16 or float32): " + path);
    require(data_off + data_len <= b.size(), "truncated data chunk: " + path);

    std::size_t bytes_per = bits / 8;
    std::size_t n_samples = data_len / (bytes_per * channels);
    MultichannelSignal sig(channels, n_samples, double(rate));
    const std::uint8_t* p = b.data() + data_off;
    for (std::size_t k = 0; k < n_samples; k++) {
        for (std::size_t m = 0; m < channels; m++) {
            if (format == 1) {
                auto q = static_cast<std::int16_t>(detail::get_u16(p));
                sig.ch(m)[k] = double(q) / 32767.0;
                p += 2;
            } else {
                std::uint32_t u = detail::get_u32(p);
                float f;
                std::memcpy(&f, &u, 4);
                sig.ch(m)[k] = double(f);
                p += 4;
            }
        }
    }
    return sig;
}

}  // namespace beamkit
