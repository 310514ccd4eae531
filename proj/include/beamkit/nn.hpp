// nn.hpp
// Parameter store, layers (linear, GRU, PReLU, global layer norm, TCN
// blocks) and the all-neural beamforming heads, all built on the autodiff
// tape. Parameters live in a named store; each forward pass binds them as
// tape leaves so gradients can be collected by name.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "beamkit/autodiff.hpp"
#include "beamkit/common.hpp"
#include "beamkit/tensor.hpp"

namespace beamkit {

struct ParamStore {
    std::vector<std::string> order;
    std::map<std::string, Tensor> values;

    void add(const std::string& name, Tensor init) {
        require(!values.count(name), "duplicate parameter: " + name);
        order.push_back(name);
        values.emplace(name, std::move(init));
    }
    Tensor& at(const std::string& name) {
        auto it = values.find(name);
        require(it != values.end(), "unknown parameter: " + name);
        return it->second;
    }
    const Tensor& at(const std::string& name) const {
        auto it = values.find(name);
        require(it != values.end(), "unknown parameter: " + name);
        return it->second;
    }
    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& [k, v] : values) n += v.size();
        return n;
    }
};

// binds store parameters to tape leaves, one leaf per parameter per tape
struct Ctx {
    Tape& tape;
    ParamStore& store;
    std::map<std::string, Var> bound;

    Var param(const std::string& name) {
        auto it = bound.find(name);
        if (it != bound.end()) return it->second;
        Var v = tape.leaf(store.at(name));
        bound.emplace(name, v);
        return v;
    }
    Var constant(Tensor t) { return tape.leaf(std::move(t)); }

    // gradients of every bound parameter after a backward pass
    std::map<std::string, Tensor> grads() const {
        std::map<std::string, Tensor> out;
        for (const auto& [name, var] : bound) out.emplace(name, tape.grad(var));
        return out;
    }
};

namespace nn {

inline Tensor uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    double scale = 1.0 / std::sqrt(double(std::max<std::size_t>(fan_in, 1)));
    for (auto& v : t.v) v = rng.uniform(-scale, scale);
    return t;
}

struct Linear {
    std::string prefix;
    std::size_t in = 0, out = 0;

    void init(ParamStore& ps, Rng& rng) const {
        ps.add(prefix + ".W", uniform_init({in, out}, in, rng));
        ps.add(prefix + ".b", Tensor({out}));
    }
    Var forward(Ctx& ctx, Var x) const {
        return ad::add_rowvec(ad::matmul(x, ctx.param(prefix + ".W")), ctx.param(prefix + ".b"));
    }
};

struct PRelu {
    std::string prefix;
    std::size_t dim = 0;

    void init(ParamStore& ps, Rng&) const {
        Tensor a({dim});
        for (auto& v : a.v) v = 0.25;
        ps.add(prefix + ".alpha", std::move(a));
    }
    Var forward(Ctx& ctx, Var x) const { return ad::prelu(x, ctx.param(prefix + ".alpha")); }
};

// global layer normalization over all (t, d) with per-channel gain and bias
struct GlobalLayerNorm {
    std::string prefix;
    std::size_t dim = 0;

    void init(ParamStore& ps, Rng&) const {
        Tensor g({dim});
        for (auto& v : g.v) v = 1.0;
        ps.add(prefix + ".gamma", std::move(g));
        ps.add(prefix + ".beta", Tensor({dim}));
    }
    Var forward(Ctx& ctx, Var x) const {
        using namespace ad;
        Var mu = mean_all(x);
        Var xc = badd(x, mul_scalar(mu, -1.0));
        Var var = mean_all(mul(xc, xc));
        Var denom = sqrt_op(add_scalar(var, 1e-8));
        Var one = ctx.constant(Tensor::scalar(1.0));
        Var inv = div(one, denom);
        Var y = bmul(xc, inv);
        return add_rowvec(mul_rowvec(y, ctx.param(prefix + ".gamma")), ctx.param(prefix + ".beta"));
    }
};

// unidirectional GRU over a [T x in] sequence; gate order (r, z, n)
struct Gru {
    std::string prefix;
    std::size_t in = 0, hidden = 0;

    void init(ParamStore& ps, Rng& rng) const {
        ps.add(prefix + ".W", uniform_init({in, 3 * hidden}, in, rng));
        ps.add(prefix + ".U", uniform_init({hidden, 3 * hidden}, hidden, rng));
        ps.add(prefix + ".bi", Tensor({3 * hidden}));
        ps.add(prefix + ".bh", Tensor({3 * hidden}));
    }

    // one cell update; x_t [1 x in], h [1 x hidden] -> new h [1 x hidden]
    Var cell(Ctx& ctx, Var x_t, Var h) const {
        using namespace ad;
        std::size_t H = hidden;
        Var xw = add_rowvec(matmul(x_t, ctx.param(prefix + ".W")), ctx.param(prefix + ".bi"));
        Var hu = add_rowvec(matmul(h, ctx.param(prefix + ".U")), ctx.param(prefix + ".bh"));
        Var r = sigmoid(add(slice_cols(xw, 0, H), slice_cols(hu, 0, H)));
        Var z = sigmoid(add(slice_cols(xw, H, 2 * H), slice_cols(hu, H, 2 * H)));
        Var ng = tanh_op(add(slice_cols(xw, 2 * H, 3 * H),
                             mul(r, slice_cols(hu, 2 * H, 3 * H))));
        Var keep = mul(z, h);
        Var update = sub(ng, mul(z, ng));  // (1 - z) * n
        return add(update, keep);
    }

    Var forward_seq(Ctx& ctx, Var x) const {
        std::size_t T = ad::V(x).rows();
        Var h = ctx.constant(Tensor({1, hidden}));
        std::vector<Var> outs;
        outs.reserve(T);
        for (std::size_t t = 0; t < T; t++) {
            h = cell(ctx, ad::slice_rows(x, t, t + 1), h);
            outs.push_back(h);
        }
        return ad::concat_rows(outs);
    }
};

struct TcnConfig {
    std::size_t input_dim = 0;
    std::size_t bottleneck = 64;
    std::size_t hidden = 128;
    std::size_t kernel = 3;
    std::size_t repeats = 2;
    std::size_t blocks = 4;  // dilations 1, 2, 4, ... within each repeat
    std::size_t output_dim = 0;
};

// Dilated temporal convolution trunk with residual bottleneck blocks and a
// linear mask head.
struct Tcn {
    std::string prefix;
    TcnConfig cfg;
    GlobalLayerNorm in_norm;
    Linear in_proj;
    struct Block {
        Linear pw1, pw2;
        PRelu act1, act2;
        GlobalLayerNorm norm1, norm2;
        std::string dw_name;
        std::size_t dilation = 1;
    };
    std::vector<Block> blocks;
    PRelu out_act;
    Linear out_proj;

    Tcn() = default;
    Tcn(std::string pfx, TcnConfig c) : prefix(std::move(pfx)), cfg(c) {
        in_norm = {prefix + ".in_norm", cfg.input_dim};
        in_proj = {prefix + ".in_proj", cfg.input_dim, cfg.bottleneck};
        for (std::size_t r = 0; r < cfg.repeats; r++) {
            for (std::size_t x = 0; x < cfg.blocks; x++) {
                Block b;
                std::string bp = prefix + ".block" + std::to_string(r) + "_" + std::to_string(x);
                b.pw1 = {bp + ".pw1", cfg.bottleneck, cfg.hidden};
                b.act1 = {bp + ".act1", cfg.hidden};
                b.norm1 = {bp + ".norm1", cfg.hidden};
                b.dw_name = bp + ".dw";
                b.act2 = {bp + ".act2", cfg.hidden};
                b.norm2 = {bp + ".norm2", cfg.hidden};
                b.pw2 = {bp + ".pw2", cfg.hidden, cfg.bottleneck};
                b.dilation = std::size_t(1) << x;
                blocks.push_back(std::move(b));
            }
        }
        out_act = {prefix + ".out_act", cfg.bottleneck};
        out_proj = {prefix + ".out_proj", cfg.bottleneck, cfg.output_dim};
    }

    void init(ParamStore& ps, Rng& rng) const {
        in_norm.init(ps, rng);
        in_proj.init(ps, rng);
        for (const auto& b : blocks) {
            b.pw1.init(ps, rng);
            b.act1.init(ps, rng);
            b.norm1.init(ps, rng);
            ps.add(b.dw_name, uniform_init({cfg.kernel, cfg.hidden}, cfg.kernel, rng));
            b.act2.init(ps, rng);
            b.norm2.init(ps, rng);
            b.pw2.init(ps, rng);
        }
        out_act.init(ps, rng);
        out_proj.init(ps, rng);
    }

    Var forward(Ctx& ctx, Var feats) const {
        using namespace ad;
        Var x = in_proj.forward(ctx, in_norm.forward(ctx, feats));
        for (const auto& b : blocks) {
            Var y = b.pw1.forward(ctx, x);
            y = b.norm1.forward(ctx, b.act1.forward(ctx, y));
            y = conv1d_dw(y, ctx.param(b.dw_name), b.dilation);
            y = b.norm2.forward(ctx, b.act2.forward(ctx, y));
            y = b.pw2.forward(ctx, y);
            x = add(x, y);
        }
        return out_proj.forward(ctx, out_act.forward(ctx, x));
    }
};

// recurrent beamforming-weight head: projection, two GRU layers, output map
struct AnBfHead {
    std::string prefix;
    std::size_t input_dim = 0, proj_dim = 0, gru_dim = 0, output_dim = 0;
    Linear proj, out;
    Gru gru1, gru2;

    AnBfHead() = default;
    AnBfHead(std::string pfx, std::size_t in, std::size_t p, std::size_t g, std::size_t o)
        : prefix(std::move(pfx)), input_dim(in), proj_dim(p), gru_dim(g), output_dim(o) {
        proj = {prefix + ".proj", input_dim, proj_dim};
        gru1 = {prefix + ".gru1", proj_dim, gru_dim};
        gru2 = {prefix + ".gru2", gru_dim, gru_dim};
        out = {prefix + ".out", gru_dim, output_dim};
    }

    void init(ParamStore& ps, Rng& rng) const {
        proj.init(ps, rng);
        gru1.init(ps, rng);
        gru2.init(ps, rng);
        out.init(ps, rng);
    }

    // stats [T x input_dim] -> weights [T x output_dim]
    Var forward(Ctx& ctx, Var stats) const {
        Var h = proj.forward(ctx, stats);
        h = gru1.forward_seq(ctx, h);
        h = gru2.forward_seq(ctx, h);
        return out.forward(ctx, h);
    }
};

// FD head dimensions: 4M^2 -> 180 -> GRU 90 -> GRU 90 -> 2M
inline AnBfHead make_fd_head(const std::string& prefix, std::size_t channels) {
    return AnBfHead(prefix, 4 * channels * channels, 180, 90, 2 * channels);
}

// TD head dimensions: 2NM^2 -> 32 -> GRU 256 -> GRU 256 -> N*M
inline AnBfHead make_td_head(const std::string& prefix, std::size_t channels,
                             std::size_t window_length, std::size_t input_blocks = 2,
                             std::size_t proj_dim = 32, std::size_t gru_dim = 256) {
    std::size_t in = input_blocks * window_length * channels * channels;
    return AnBfHead(prefix, in, proj_dim, gru_dim, window_length * channels);
}

}  // namespace nn

namespace ad {

// Packed complex outer-product features for the FD head: given per-channel
// re/im spectrogram tensors [T x F], emit rows (f*T + t) with columns
// [Re(a_i b_j^*) for i,j | Im(a_i b_j^*) for i,j], shape [F*T x 2M^2].
inline Var complex_outer_pack(const std::vector<Var>& a_re, const std::vector<Var>& a_im,
                              const std::vector<Var>& b_re, const std::vector<Var>& b_im) {
    std::size_t M = a_re.size();
    require(M > 0 && a_im.size() == M && b_re.size() == M && b_im.size() == M,
            "complex_outer_pack: channel list mismatch");
    Tape* tape = a_re[0].tape;
    std::size_t T = V(a_re[0]).rows(), F = V(a_re[0]).cols();
    std::vector<int> ids;
    for (auto& v : a_re) ids.push_back(v.id);
    for (auto& v : a_im) ids.push_back(v.id);
    for (auto& v : b_re) ids.push_back(v.id);
    for (auto& v : b_im) ids.push_back(v.id);

    std::size_t W = 2 * M * M;
    Tensor out({F * T, W});
    auto val_of = [&](std::size_t k) -> const Tensor& { return tape->val(Var{tape, int(ids[k])}); };
    for (std::size_t f = 0; f < F; f++)
        for (std::size_t t = 0; t < T; t++) {
            double* row = &out.v[(f * T + t) * W];
            for (std::size_t i = 0; i < M; i++)
                for (std::size_t j = 0; j < M; j++) {
                    double ari = val_of(i).at(t, f), aii = val_of(M + i).at(t, f);
                    double brj = val_of(2 * M + j).at(t, f), bij = val_of(3 * M + j).at(t, f);
                    row[i * M + j] = ari * brj + aii * bij;
                    row[M * M + i * M + j] = aii * brj - ari * bij;
                }
        }
    return tape->push(std::move(out), ids, [ids, M, T, F, W](Tape& t, const Tape::Node& n) {
        auto g_of = [&](std::size_t k) -> Tensor& { return t.grad_mut(ids[k]); };
        auto val_of = [&](std::size_t k) -> const Tensor& {
            return t.val(Var{&t, int(ids[k])});
        };
        for (std::size_t f = 0; f < F; f++)
            for (std::size_t tt = 0; tt < T; tt++) {
                const double* row = &n.grad.v[(f * T + tt) * W];
                for (std::size_t i = 0; i < M; i++)
                    for (std::size_t j = 0; j < M; j++) {
                        double gre = row[i * M + j];
                        double gim = row[M * M + i * M + j];
                        if (gre == 0.0 && gim == 0.0) continue;
                        double ari = val_of(i).at(tt, f), aii = val_of(M + i).at(tt, f);
                        double brj = val_of(2 * M + j).at(tt, f),
                               bij = val_of(3 * M + j).at(tt, f);
                        g_of(i).at(tt, f) += gre * brj - gim * bij;
                        g_of(M + i).at(tt, f) += gre * bij + gim * brj;
                        g_of(2 * M + j).at(tt, f) += gre * ari + gim * aii;
                        g_of(3 * M + j).at(tt, f) += gre * aii - gim * ari;
                    }
            }
    });
}

}  // namespace ad

}  // namespace beamkit
