// tensor_io.hpp
// "BKT1" binary tensor container: magic, u64 entry count, then per entry a
// length-prefixed UTF-8 name, dtype byte (0 f32, 1 f64, 2 c64, 3 c128),
// ndim byte, u64 dims and the row-major little-endian payload. Also the
// checkpoint framing: u64 JSON length, JSON header, container.
#pragma once

#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "beamkit/common.hpp"
#include "beamkit/tensor.hpp"

namespace beamkit {

enum class Dtype : std::uint8_t { f32 = 0, f64 = 1, c64 = 2, c128 = 3 };

inline std::size_t dtype_size(Dtype d) {
    switch (d) {
        case Dtype::f32: return 4;
        case Dtype::f64: return 8;
        case Dtype::c64: return 8;
        case Dtype::c128: return 16;
    }
    return 0;
}

struct ContainerEntry {
    std::string name;
    Dtype dtype = Dtype::f64;
    std::vector<std::uint64_t> shape;
    std::vector<std::uint8_t> payload;

    std::uint64_t element_count() const {
        std::uint64_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }
};

namespace leio {

inline void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
    for (int i = 0; i < 8; i++) b.push_back(std::uint8_t((v >> (8 * i)) & 0xFF));
}
inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; i++) b.push_back(std::uint8_t((v >> (8 * i)) & 0xFF));
}
inline std::uint64_t take_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; i++) v |= std::uint64_t(p[i]) << (8 * i);
    return v;
}
inline std::uint32_t take_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; i++) v |= std::uint32_t(p[i]) << (8 * i);
    return v;
}
inline void put_f64_le(std::vector<std::uint8_t>& b, double x) {
    std::uint64_t u;
    std::memcpy(&u, &x, 8);
    put_u64(b, u);
}
inline double take_f64_le(const std::uint8_t* p) {
    std::uint64_t u = take_u64(p);
    double x;
    std::memcpy(&x, &u, 8);
    return x;
}
inline void put_f32_le(std::vector<std::uint8_t>& b, float x) {
    std::uint32_t u;
    std::memcpy(&u, &x, 4);
    put_u32(b, u);
}
inline float take_f32_le(const std::uint8_t* p) {
    std::uint32_t u = take_u32(p);
    float x;
    std::memcpy(&x, &u, 4);
    return x;
}

}  // namespace leio

class TensorContainer {
  public:
    std::vector<ContainerEntry> entries;

    bool has(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return true;
        return false;
    }
    const ContainerEntry& find(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return e;
        throw std::runtime_error("container entry not found: " + name);
    }

    void add_f64(const std::string& name, const std::vector<std::uint64_t>& shape,
                 const double* data) {
        require(!has(name), "duplicate container entry: " + name);
        ContainerEntry e;
        e.name = name;
        e.dtype = Dtype::f64;
        e.shape = shape;
        e.payload.reserve(e.element_count() * 8);
        for (std::uint64_t i = 0; i < e.element_count(); i++)
            leio::put_f64_le(e.payload, data[i]);
        entries.push_back(std::move(e));
    }
    void add_f32(const std::string& name, const std::vector<std::uint64_t>& shape,
                 const float* data) {
        require(!has(name), "duplicate container entry: " + name);
        ContainerEntry e;
        e.name = name;
        e.dtype = Dtype::f32;
        e.shape = shape;
        e.payload.reserve(e.element_count() * 4);
        for (std::uint64_t i = 0; i < e.element_count(); i++)
            leio::put_f32_le(e.payload, data[i]);
        entries.push_back(std::move(e));
    }
    void add_c128(const std::string& name, const std::vector<std::uint64_t>& shape,
                  const cplx* data) {
        require(!has(name), "duplicate container entry: " + name);
        ContainerEntry e;
        e.name = name;
        e.dtype = Dtype::c128;
        e.shape = shape;
        e.payload.reserve(e.element_count() * 16);
        for (std::uint64_t i = 0; i < e.element_count(); i++) {
            leio::put_f64_le(e.payload, data[i].real());
            leio::put_f64_le(e.payload, data[i].imag());
        }
        entries.push_back(std::move(e));
    }
    void add_tensor(const std::string& name, const Tensor& t) {
        std::vector<std::uint64_t> shape(t.shape.begin(), t.shape.end());
        add_f64(name, shape, t.v.data());
    }

    std::vector<double> get_f64(const std::string& name) const {
        const auto& e = find(name);
        require(e.dtype == Dtype::f64, "entry is not f64: " + name);
        std::vector<double> out(e.element_count());
        for (std::uint64_t i = 0; i < out.size(); i++)
            out[i] = leio::take_f64_le(e.payload.data() + i * 8);
        return out;
    }
    std::vector<cplx> get_c128(const std::string& name) const {
        const auto& e = find(name);
        require(e.dtype == Dtype::c128, "entry is not c128: " + name);
        std::vector<cplx> out(e.element_count());
        for (std::uint64_t i = 0; i < out.size(); i++)
            out[i] = cplx(leio::take_f64_le(e.payload.data() + i * 16),
                          leio::take_f64_le(e.payload.data() + i * 16 + 8));
        return out;
    }
    Tensor get_tensor(const std::string& name) const {
        const auto& e = find(name);
        Tensor t(std::vector<std::size_t>(e.shape.begin(), e.shape.end()));
        auto data = get_f64(name);
        t.v = std::move(data);
        return t;
    }

    std::vector<std::uint8_t> serialize() const {
        std::vector<std::uint8_t> b;
        b.insert(b.end(), {'B', 'K', 'T', '1'});
        leio::put_u64(b, entries.size());
        for (const auto& e : entries) {
            require(e.payload.size() == e.element_count() * dtype_size(e.dtype),
                    "payload size mismatch for entry: " + e.name);
            leio::put_u32(b, std::uint32_t(e.name.size()));
            b.insert(b.end(), e.name.begin(), e.name.end());
            b.push_back(std::uint8_t(e.dtype));
            b.push_back(std::uint8_t(e.shape.size()));
            for (auto d : e.shape) leio::put_u64(b, d);
            b.insert(b.end(), e.payload.begin(), e.payload.end());
        }
        return b;
    }

    static TensorContainer deserialize(const std::uint8_t* p, std::size_t len,
                                       std::size_t* consumed = nullptr) {
        require(len >= 12 && std::memcmp(p, "BKT1", 4) == 0, "bad container magic");
        std::size_t pos = 4;
        std::uint64_t count = leio::take_u64(p + pos);
        pos += 8;
        TensorContainer c;
        for (std::uint64_t k = 0; k < count; k++) {
            require(pos + 4 <= len, "truncated container");
            std::uint32_t name_len = leio::take_u32(p + pos);
            pos += 4;
            require(pos + name_len + 2 <= len, "truncated container");
            ContainerEntry e;
            e.name.assign(reinterpret_cast<const char*>(p + pos), name_len);
            pos += name_len;
            require(!c.has(e.name), "duplicate container entry: " + e.name);
            std::uint8_t dt = p[pos++];
            require(dt <= 3, "bad dtype in container");
            e.dtype = Dtype(dt);
            std::uint8_t ndim = p[pos++];
            require(pos + std::size_t(ndim) * 8 <= len, "truncated container");
            for (std::uint8_t d = 0; d < ndim; d++) {
                e.shape.push_back(leio::take_u64(p + pos));
                pos += 8;
            }
            std::size_t bytes = e.element_count() * dtype_size(e.dtype);
            require(pos + bytes <= len, "truncated payload for entry: " + e.name);
            e.payload.assign(p + pos, p + pos + bytes);
            pos += bytes;
            c.entries.push_back(std::move(e));
        }
        if (consumed) *consumed = pos;
        return c;
    }

    void write(const std::string& path) const {
        auto b = serialize();
        std::ofstream out(path, std::ios::binary);
        require(out.good(), "cannot open for writing: " + path);
        out.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
        require(out.good(), "write failed: " + path);
    }
    static TensorContainer read(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        require(in.good(), "cannot open: " + path);
        std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
        return deserialize(b.data(), b.size());
    }
};

// checkpoint = [u64 json length][json header][BKT1 container]
inline void write_checkpoint(const std::string& path, const nlohmann::json& header,
                             const TensorContainer& params) {
    std::string js = header.dump();
    std::vector<std::uint8_t> b;
    leio::put_u64(b, js.size());
    b.insert(b.end(), js.begin(), js.end());
    auto pb = params.serialize();
    b.insert(b.end(), pb.begin(), pb.end());
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
    require(out.good(), "write failed: " + path);
}

inline std::pair<nlohmann::json, TensorContainer> read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open: " + path);
    std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
    require(b.size() >= 8, "truncated checkpoint: " + path);
    std::uint64_t js_len = leio::take_u64(b.data());
    require(8 + js_len <= b.size(), "truncated checkpoint header: " + path);
    auto header = nlohmann::json::parse(std::string(b.begin() + 8, b.begin() + 8 + js_len));
    auto params = TensorContainer::deserialize(b.data() + 8 + js_len, b.size() - 8 - js_len);
    return {header, params};
}

}  // namespace beamkit
