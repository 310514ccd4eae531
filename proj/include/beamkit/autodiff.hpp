// autodiff.hpp
// Reverse-mode automatic differentiation on a tape of tensor nodes. Each op
// records its parents and a backward closure; backward() walks the tape in
// reverse creation order, which is already a topological order.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "beamkit/losses.hpp"
#include "beamkit/signal.hpp"
#include "beamkit/stft.hpp"
#include "beamkit/tensor.hpp"

namespace beamkit {

class Tape;

struct Var {
    Tape* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

class Tape {
  public:
    struct Node {
        Tensor val;
        Tensor grad;
        std::vector<int> parents;
        std::function<void(Tape&, const Node&)> back;  // may be empty (leaf)
    };

    Var push(Tensor val, std::vector<int> parents = {},
             std::function<void(Tape&, const Node&)> back = {}) {
        Node n;
        n.grad = Tensor(val.shape);
        n.val = std::move(val);
        n.parents = std::move(parents);
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return Var{this, int(nodes_.size()) - 1};
    }

    Var leaf(Tensor val) { return push(std::move(val)); }

    const Tensor& val(Var v) const { return nodes_[v.id].val; }
    const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
    Tensor& grad_mut(int id) { return nodes_[id].grad; }

    void backward(Var root) {
        require(root.valid() && root.tape == this, "backward: bad root");
        require(nodes_[root.id].val.size() == 1, "backward: root must be scalar");
        for (auto& n : nodes_) std::fill(n.grad.v.begin(), n.grad.v.end(), 0.0);
        nodes_[root.id].grad.v[0] = 1.0;
        for (int i = root.id; i >= 0; i--) {
            const Node& n = nodes_[i];
            if (n.back) n.back(*this, n);
        }
    }

    std::size_t size() const { return nodes_.size(); }

  private:
    std::vector<Node> nodes_;
};

namespace ad {

inline const Tensor& V(Var a) { return a.tape->val(a); }

inline void check_same(const Var& a, const Var& b, const char* op) {
    require(a.tape == b.tape, std::string(op) + ": vars from different tapes");
    require(V(a).same_shape(V(b)), std::string(op) + ": shape mismatch");
}

inline Var add(Var a, Var b) {
    check_same(a, b, "add");
    Tensor out = V(a);
    for (std::size_t i = 0; i < out.size(); i++) out.v[i] += V(b).v[i];
    int ia = a.id, ib = b.id;
    return a.tape->push(std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tape::Node& n) {
        auto& ga = t.grad_mut(ia);
        auto& gb = t.grad_mut(ib);
        for (std::size_t i = 0; i < n.grad.size(); i++) {
            ga.v[i] += n.grad.v[i];
            gb.v[i] += n.grad.v[i];
        }
    });
}

inline Var sub(Var a, Var b) {
    check_same(a, b, "sub");
    Tensor out = V(a);
    for (std::size_t i = 0; i < out.size(); i++) out.v[i] -= V(b).v[i];
    int ia = a.id, ib = b.id;
    return a.tape->push(std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tape::Node& n) {
        auto& ga = t.grad_mut(ia);
        auto& gb = t.grad_mut(ib);
        for (std::size_t i = 0; i < n.grad.size(); i++) {
            ga.v[i] += n.grad.v[i];
            gb.v[i] -= n.grad.v[i];
        }
    });
}

inline Var mul(Var a, Var b) {
    check_same(a, b, "mul");
    Tensor out = V(a);
    for (std::size_t i = 0; i < out.size(); i++) out.v[i] *= V(b).v[i];
    int ia = a.id, ib = b.id;
    return a.tape->push(std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tape::Node& n) {
        const auto& va = t.val(Var{&t, ia});
        const auto& vb = t.val(Var{&t, ib});
        auto& ga = t.grad_mut(ia);
        auto& gb = t.grad_mut(ib);
        for (std::size_t i = 0; i < n.grad.size(); i++) {
            ga.v[i] += n.grad.v[i] * vb.v[i];
            gb.v[i] += n.grad.v[i] * va.v[i];
        }
    });
}

inline Var div(Var a, Var b) {
    check_same(a, b, "div");
    Tensor out = V(a);
    for (std::size_t i = 0; i < out.size(); i++) out.v[i] /= V(b).v[i];
    int ia = a.id, ib = b.id;
    return a.tape->push(std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tape::Node& n) {
        const auto& va = t.val(Var{&t, ia});
        const auto& vb = t.val(Var{&t, ib});
        auto& ga = t.grad_mut(ia);
        auto& gb = t.grad_mut(ib);
        for (std::size_t i = 0; i < n.grad.size(); i++) {
            ga.v[i] += n.grad.v[i] / vb.v[i];
            gb.v[i] -= n.grad.v[i] * va.v[i] / (vb.v[i] * vb.v[i]);
        }
    });
}

inline Var mul_scalar(Var a, double c) {
    Tensor out = V(a);
    for (auto& x : out.v) x *= c;
    int ia = a.id;
    return a.tape->push(std::move(out), {ia}, [ia, c](Tape& t, const Tape::Node& n) {
        auto& ga = t.grad_mut(ia);
        for (std::size_t i = 0; i < n.grad.size(); i++) ga.v[i] += n.grad.v[i] * c;
    });
}

inline Var add_scalar(Var a, double c) {
    Tensor out = V(a);
    for (auto& x : out.v) x += c;
    int ia = a.id;
    return a.tape->push(std::move(out), {ia}, [ia](Tape& t, const Tape::Node& n) {
        auto& ga = t.grad_mut(ia);
        for (std::size_t i = 0; i < n.grad.size(); i++) ga.v[i] += n.grad.v[i];
    });
}

// broadcast of a 1-element tensor onto every element of a
inline Var badd(Var a, Var s) {
    require(V(s).size() == 1, "badd: scalar operand must have one element");
    Tensor out = V(a);
    double sv = V(s).v[0];
    for (auto& x : out.v) x += sv;
    int ia = a.id, is = s.id;
    return a.tape->push(std::move(out), {ia, is}, [ia, is](Tape& t, const Tape::Node& n) {
        auto& ga = t.grad_mut(ia);
        auto& gs = t.grad_mut(is);
        double acc = 0;
        for (std::size_t i = 0; i < n.grad.size(); i++) {
            ga.v[i] += n.grad.v[i];
            acc += n.grad.v[i];
        }
        gs.v[0] += acc;
    });
}

inline Var bmul(Var a, Var s) {
    require(V(s).size() == 1, "bmul: scalar operand must have one element");
    Tensor out = V(a);
    double sv = V(s).v[0];
    for (auto& x : out.v) x *= sv;
    int ia = a.id, is = s.id;
    return a.tape->push(std::move(out), {ia, is}, [ia, is](Tape& t, const Tape::Node& n) {
        const auto& va = t.val(Var{&t, ia});
        double sv2 = t.val(Var{&t, is}).v[0];
        auto& ga = t.grad_mut(ia);
        auto& gs = t.grad_mut(is);
        double acc = 0;
        for (std::size_t i = 0; i < n.grad.size(); i++) {
            ga.v[i] += n.grad.v[i] * sv2;
            acc += n.grad.v[i] * va.v[i];
        }
        gs.v[0] += acc;
    });
}

inline Var relu(Var a) {
    Tensor out = V(a);
    for (auto& x : out.v) x = x > 0 ? x : 0.0;
    int ia = a.id;
    return a.tape->push(std::move(out), {ia}, [ia](Tape& t, const Tape::Node& n) {
        const auto& va = t.val(Var{&t, ia});
        auto& ga = t.grad_mut(ia);
        for (std::size_t i = 0; i < n.grad.size(); i++)
            if (va.v[i] > 0) ga.v[i] += n.grad.v[i];
    });
}

// PReLU with one slope per column of a [rows x cols] matrix
inline Var prelu(Var a, Var alpha) {
    require(V(a).shape.size() == 2 && V(alpha).size() == V(a).cols(),
            "prelu: alpha must have one slope per column");
    Tensor out = V(a);
    std::size_t C = out.cols();
    for (std::size_t i = 0; i < out.size(); i++)
        if (out.v[i] < 0) out.v[i] *= V(alpha).v[i % C];
    int ia = a.id, ial = alpha.id;
    return a.tape->push(std::move(out), {ia, ial}, [ia, ial](Tape& t, const Tape::Node& n) {
        const auto& va = t.val(Var{&t, ia});
        const auto& val = t.val(Var{&t, ial});
        auto& ga = t.grad_mut(ia);
        auto& gal = t.grad_mut(ial);
        std::size_t C = va.cols();
        for (std::size_t i = 0; i < n.grad.size(); i++) {
            if (va.v[i] >= 0) {
                ga.v[i] += n.grad.v[i];
            } else {
                ga.v[i] += n.grad.v[i] * val.v[i % C];
                gal.v[i % C] += n.grad.v[i] * va.v[i];
            }
        }
    });
}

inline Var sigmoid(Var a) {
    Tensor out = V(a);
    for (auto& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
    int ia = a.id;
    int self = int(a.tape->size());
    return a.tape->push(std::move(out), {ia}, [ia, self](Tape& t, const Tape::Node& n) {
        const auto& y = t.val(Var{&t, self});
        auto& ga = t.grad_mut(ia);
        for (std::size_t i = 0; i < n.grad.size(); i++)
            ga.v[i] += n.grad.v[i] * y.v[i] * (1.0 - y.v[i]);
    });
}

inline Var tanh_op(Var a) {
    Tensor out = V(a);
    for (auto& x : out.v) x = std::tanh(x);
    int ia = a.id;
    int self = int(a.tape->size());
    return a.tape->push(std::move(out), {ia}, [ia, self](Tape& t, const Tape::Node& n) {
        const auto& y = t.val(Var{&t, self});
        auto& ga = t.grad_mut(ia);
        for (std::size_t i = 0; i < n.grad.size(); i++)
            ga.v[i] += n.grad.v[i] * (1.0 - y.v[i] * y.v[i]);
    });
}

inline Var sqrt_op(Var a) {
    Tensor out = V(a);
    for (auto& x : out.v) x = std::sqrt(x);
    int ia = a.id;
    int self = int(a.tape->size());
    return a.tape->push(std::move(out), {ia}, [ia, self](Tape& t, const Tape::Node& n) {
        const auto& y = t.val(Var{&t, self});
        auto& ga = t.grad_mut(ia);
        for (std::size_t i = 0; i < n.grad.size(); i++)
            ga.v[i] += n.grad.v[i] * 0.5 / y.v[i];
    });
}

inline Var log_op(Var a) {
    Tensor out = V(a);
    for (auto& x : out.v) x = std::log(x);
    int ia = a.id;
    return a.tape->push(std::move(out), {ia}, [ia](Tape& t, const Tape::Node& n) {
        const auto& va = t.val(Var{&t, ia});
        auto& ga = t.grad_mut(ia);
        for (std::size_t i = 0; i < n.grad.size(); i++) ga.v[i] += n.grad.v[i] / va.v[i];
    });
}

inline Var matmul(Var a, Var b) {
    require(a.tape == b.tape, "matmul: vars from different tapes");
    const Tensor& va = V(a);
    const Tensor& vb = V(b);
    require(va.shape.size() == 2 && vb.shape.size() == 2 && va.cols() == vb.rows(),
            "matmul: incompatible shapes " + std::to_string(va.shape.size() == 2 ? va.cols() : 0) +
                " vs " + std::to_string(vb.shape.size() == 2 ? vb.rows() : 0));
    std::size_t M = va.rows(), K = va.cols(), N = vb.cols();
    Tensor out({M, N});
    for (std::size_t i = 0; i < M; i++)
        for (std::size_t k = 0; k < K; k++) {
            double x = va.v[i * K + k];
            if (x == 0.0) continue;
            const double* brow = &vb.v[k * N];
            double* orow = &out.v[i * N];
            for (std::size_t j = 0; j < N; j++) orow[j] += x * brow[j];
        }
    int ia = a.id, ib = b.id;
    return a.tape->push(std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tape::Node& n) {
        const auto& va2 = t.val(Var{&t, ia});
        const auto& vb2 = t.val(Var{&t, ib});
        auto& ga = t.grad_mut(ia);
        auto& gb = t.grad_mut(ib);
        std::size_t M = va2.rows(), K = va2.cols(), N = vb2.cols();
        // ga += g b^T
        for (std::size_t i = 0; i < M; i++)
            for (std::size_t j = 0; j < N; j++) {
                double g = n.grad.v[i * N + j];
                if (g == 0.0) continue;
                const double* brow = &vb2.v[j];
                for (std::size_t k = 0; k < K; k++) ga.v[i * K + k] += g * brow[k * N];
            }
        // gb += a^T g
        for (std::size_t k = 0; k < K; k++)
            for (std::size_t i = 0; i < M; i++) {
                double x = va2.v[i * K + k];
                if (x == 0.0) continue;
                const double* grow = &n.grad.v[i * N];
                double* brow = &gb.v[k * N];
                for (std::size_t j = 0; j < N; j++) brow[j] += x * grow[j];
            }
    });
}

inline Var add_rowvec(Var a, Var v) {
    require(V(a).shape.size() == 2 && V(v).size() == V(a).cols(), "add_rowvec: shape mismatch");
    Tensor out = V(a);
    std::size_t C = out.cols();
    for (std::size_t i = 0; i < out.size(); i++) out.v[i] += V(v).v[i % C];
    int ia = a.id, iv = v.id;
    return a.tape->push(std::move(out), {ia, iv}, [ia, iv](Tape& t, const Tape::Node& n) {
        auto& ga = t.grad_mut(ia);
        auto& gv = t.grad_mut(iv);
        std::size_t C = gv.size();
        for (std::size_t i = 0; i < n.grad.size(); i++) {
            ga.v[i] += n.grad.v[i];
            gv.v[i % C] += n.grad.v[i];
        }
    });
}

inline Var mul_rowvec(Var a, Var v) {
    require(V(a).shape.size() == 2 && V(v).size() == V(a).cols(), "mul_rowvec: shape mismatch");
    Tensor out = V(a);
    std::size_t C = out.cols();
    for (std::size_t i = 0; i < out.size(); i++) out.v[i] *= V(v).v[i % C];
    int ia = a.id, iv = v.id;
    return a.tape->push(std::move(out), {ia, iv}, [ia, iv](Tape& t, const Tape::Node& n) {
        const auto& va = t.val(Var{&t, ia});
        const auto& vv = t.val(Var{&t, iv});
        auto& ga = t.grad_mut(ia);
        auto& gv = t.grad_mut(iv);
        std::size_t C = gv.size();
        for (std::size_t i = 0; i < n.grad.size(); i++) {
            ga.v[i] += n.grad.v[i] * vv.v[i % C];
            gv.v[i % C] += n.grad.v[i] * va.v[i];
        }
    });
}

// scale row r of a by v[r]
inline Var mul_colvec(Var a, Var v) {
    require(V(a).shape.size() == 2 && V(v).size() == V(a).rows(), "mul_colvec: shape mismatch");
    Tensor out = V(a);
    std::size_t C = out.cols();
    for (std::size_t i = 0; i < out.size(); i++) out.v[i] *= V(v).v[i / C];
    int ia = a.id, iv = v.id;
    return a.tape->push(std::move(out), {ia, iv}, [ia, iv](Tape& t, const Tape::Node& n) {
        const auto& va = t.val(Var{&t, ia});
        const auto& vv = t.val(Var{&t, iv});
        auto& ga = t.grad_mut(ia);
        auto& gv = t.grad_mut(iv);
        std::size_t C = va.cols();
        for (std::size_t i = 0; i < n.grad.size(); i++) {
            ga.v[i] += n.grad.v[i] * vv.v[i / C];
            gv.v[i / C] += n.grad.v[i] * va.v[i];
        }
    });
}

inline Var reshape(Var a, std::vector<std::size_t> shape) {
    require(Tensor::count(shape) == V(a).size(), "reshape: element count mismatch");
    Tensor out(std::move(shape), V(a).v);
    int ia = a.id;
    return a.tape->push(std::move(out), {ia}, [ia](Tape& t, const Tape::Node& n) {
        auto& ga = t.grad_mut(ia);
        for (std::size_t i = 0; i < n.grad.size(); i++) ga.v[i] += n.grad.v[i];
    });
}

inline Var slice_rows(Var a, std::size_t r0, std::size_t r1) {
    const Tensor& va = V(a);
    require(va.shape.size() == 2 && r0 < r1 && r1 <= va.rows(), "slice_rows: bad range");
    std::size_t C = va.cols();
    Tensor out({r1 - r0, C});
    std::copy(va.v.begin() + r0 * C, va.v.begin() + r1 * C, out.v.begin());
    int ia = a.id;
    return a.tape->push(std::move(out), {ia}, [ia, r0, C](Tape& t, const Tape::Node& n) {
        auto& ga = t.grad_mut(ia);
        for (std::size_t i = 0; i < n.grad.size(); i++) ga.v[r0 * C + i] += n.grad.v[i];
    });
}

inline Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const Tensor& va = V(a);
    require(va.shape.size() == 2 && c0 < c1 && c1 <= va.cols(), "slice_cols: bad range");
    std::size_t R = va.rows(), C = va.cols(), W = c1 - c0;
    Tensor out({R, W});
    for (std::size_t r = 0; r < R; r++)
        for (std::size_t c = 0; c < W; c++) out.v[r * W + c] = va.v[r * C + c0 + c];
    int ia = a.id;
    return a.tape->push(std::move(out), {ia}, [ia, c0, C, W](Tape& t, const Tape::Node& n) {
        auto& ga = t.grad_mut(ia);
        std::size_t R = n.grad.rows();
        for (std::size_t r = 0; r < R; r++)
            for (std::size_t c = 0; c < W; c++) ga.v[r * C + c0 + c] += n.grad.v[r * W + c];
    });
}

inline Var concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_cols: empty");
    Tape* tape = parts[0].tape;
    std::size_t R = V(parts[0]).rows(), C = 0;
    std::vector<int> ids;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
        require(p.tape == tape && V(p).rows() == R, "concat_cols: incompatible parts");
        widths.push_back(V(p).cols());
        C += V(p).cols();
        ids.push_back(p.id);
    }
    Tensor out({R, C});
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); k++) {
        const Tensor& vp = V(parts[k]);
        for (std::size_t r = 0; r < R; r++)
            for (std::size_t c = 0; c < widths[k]; c++)
                out.v[r * C + off + c] = vp.v[r * widths[k] + c];
        off += widths[k];
    }
    return tape->push(std::move(out), ids, [ids, widths, C](Tape& t, const Tape::Node& n) {
        std::size_t R = n.grad.rows();
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); k++) {
            auto& g = t.grad_mut(ids[k]);
            for (std::size_t r = 0; r < R; r++)
                for (std::size_t c = 0; c < widths[k]; c++)
                    g.v[r * widths[k] + c] += n.grad.v[r * C + off + c];
            off += widths[k];
        }
    });
}

inline Var concat_rows(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_rows: empty");
    Tape* tape = parts[0].tape;
    std::size_t C = V(parts[0]).cols(), R = 0;
    std::vector<int> ids;
    std::vector<std::size_t> heights;
    for (const auto& p : parts) {
        require(p.tape == tape && V(p).cols() == C, "concat_rows: incompatible parts");
        heights.push_back(V(p).rows());
        R += V(p).rows();
        ids.push_back(p.id);
    }
    Tensor out({R, C});
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); k++) {
        const Tensor& vp = V(parts[k]);
        std::copy(vp.v.begin(), vp.v.end(), out.v.begin() + off * C);
        off += heights[k];
    }
    return tape->push(std::move(out), ids, [ids, heights, C](Tape& t, const Tape::Node& n) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); k++) {
            auto& g = t.grad_mut(ids[k]);
            for (std::size_t i = 0; i < heights[k] * C; i++) g.v[i] += n.grad.v[off * C + i];
            off += heights[k];
        }
    });
}

inline Var sum_all(Var a) {
    double acc = 0;
    for (double x : V(a).v) acc += x;
    int ia = a.id;
    return a.tape->push(Tensor::scalar(acc), {ia}, [ia](Tape& t, const Tape::Node& n) {
        auto& ga = t.grad_mut(ia);
        for (auto& g : ga.v) g += n.grad.v[0];
    });
}

inline Var mean_all(Var a) {
    double acc = 0;
    for (double x : V(a).v) acc += x;
    double inv = 1.0 / double(V(a).size());
    int ia = a.id;
    return a.tape->push(Tensor::scalar(acc * inv), {ia}, [ia, inv](Tape& t, const Tape::Node& n) {
        auto& ga = t.grad_mut(ia);
        for (auto& g : ga.v) g += n.grad.v[0] * inv;
    });
}

// Depthwise dilated 1-D convolution over the time axis of [T x D] with a
// [KS x D] kernel, zero-padded "same" alignment.
inline Var conv1d_dw(Var x, Var k, std::size_t dilation) {
    const Tensor& vx = V(x);
    const Tensor& vk = V(k);
    require(vx.shape.size() == 2 && vk.shape.size() == 2 && vk.cols() == vx.cols(),
            "conv1d_dw: shape mismatch");
    std::size_t T = vx.rows(), D = vx.cols(), KS = vk.rows();
    std::ptrdiff_t center = std::ptrdiff_t(KS / 2);
    Tensor out({T, D});
    for (std::size_t t = 0; t < T; t++)
        for (std::size_t i = 0; i < KS; i++) {
            std::ptrdiff_t src = std::ptrdiff_t(t) + (std::ptrdiff_t(i) - center) *
                                                         std::ptrdiff_t(dilation);
            if (src < 0 || src >= std::ptrdiff_t(T)) continue;
            const double* xr = &vx.v[std::size_t(src) * D];
            const double* kr = &vk.v[i * D];
            double* orow = &out.v[t * D];
            for (std::size_t d = 0; d < D; d++) orow[d] += xr[d] * kr[d];
        }
    int ix = x.id, ik = k.id;
    return x.tape->push(std::move(out), {ix, ik},
                        [ix, ik, dilation](Tape& t, const Tape::Node& n) {
        const auto& vx2 = t.val(Var{&t, ix});
        const auto& vk2 = t.val(Var{&t, ik});
        auto& gx = t.grad_mut(ix);
        auto& gk = t.grad_mut(ik);
        std::size_t T = vx2.rows(), D = vx2.cols(), KS = vk2.rows();
        std::ptrdiff_t center = std::ptrdiff_t(KS / 2);
        for (std::size_t tt = 0; tt < T; tt++)
            for (std::size_t i = 0; i < KS; i++) {
                std::ptrdiff_t src = std::ptrdiff_t(tt) + (std::ptrdiff_t(i) - center) *
                                                              std::ptrdiff_t(dilation);
                if (src < 0 || src >= std::ptrdiff_t(T)) continue;
                const double* grow = &n.grad.v[tt * D];
                const double* xr = &vx2.v[std::size_t(src) * D];
                const double* kr = &vk2.v[i * D];
                double* gxr = &gx.v[std::size_t(src) * D];
                double* gkr = &gk.v[i * D];
                for (std::size_t d = 0; d < D; d++) {
                    gxr[d] += grow[d] * kr[d];
                    gkr[d] += grow[d] * xr[d];
                }
            }
    });
}

// gather frames [T x N] from a length-K signal [K] (frame t = x[tH .. tH+N))
inline Var frame_signal(Var x, const FrameGrid& grid) {
    const Tensor& vx = V(x);
    require(vx.shape.size() == 1, "frame_signal: expects a vector");
    std::size_t K = vx.size(), N = grid.window_length, H = grid.hop;
    std::size_t T = grid.frame_count(K);
    Tensor out({T, N});
    for (std::size_t t = 0; t < T; t++)
        for (std::size_t n = 0; n < N; n++) out.v[t * N + n] = vx.v[t * H + n];
    int ix = x.id;
    return x.tape->push(std::move(out), {ix}, [ix, N, H](Tape& t, const Tape::Node& n) {
        auto& gx = t.grad_mut(ix);
        std::size_t T = n.grad.rows();
        for (std::size_t tt = 0; tt < T; tt++)
            for (std::size_t i = 0; i < N; i++) gx.v[tt * H + i] += n.grad.v[tt * N + i];
    });
}

// overlap-add of frames [T x N] into a length-K vector, each output sample
// multiplied by a fixed per-sample scale (e.g. the 1/coverage divisor)
inline Var overlap_add_scaled(Var frames, const FrameGrid& grid,
                              const std::vector<double>& scale) {
    const Tensor& vf = V(frames);
    require(vf.shape.size() == 2 && vf.cols() == grid.window_length,
            "overlap_add_scaled: frame shape mismatch");
    std::size_t T = vf.rows(), N = grid.window_length, H = grid.hop;
    std::size_t K = grid.cover_length(T);
    require(scale.size() == K, "overlap_add_scaled: scale length mismatch");
    Tensor out({K});
    for (std::size_t t = 0; t < T; t++)
        for (std::size_t n = 0; n < N; n++) out.v[t * H + n] += vf.v[t * N + n];
    for (std::size_t k = 0; k < K; k++) out.v[k] *= scale[k];
    int idx = frames.id;
    return frames.tape->push(std::move(out), {idx},
                             [idx, N, H, scale](Tape& t, const Tape::Node& n) {
        auto& gf = t.grad_mut(idx);
        std::size_t T = gf.rows();
        for (std::size_t tt = 0; tt < T; tt++)
            for (std::size_t i = 0; i < N; i++)
                gf.v[tt * N + i] += n.grad.v[tt * H + i] * scale[tt * H + i];
    });
}

// WOLA synthesis of a one-sided complex spectrogram given as re/im [T x F]
// matrices; linear in the inputs, backward is the exact adjoint.
inline Var istft_synth(Var re, Var im, const StftKernel& kernel, const FrameGrid& grid) {
    check_same(re, im, "istft_synth");
    const Tensor& vr = V(re);
    std::size_t T = vr.rows(), F = vr.cols();
    require(F == kernel.bands() && grid.window_length == kernel.window_length(),
            "istft_synth: kernel/grid mismatch");
    std::size_t K = grid.cover_length(T);
    // per-sample divisor sum_t w^2, floored as in the plain istft
    std::vector<double> den(K, 0.0);
    const auto& w = kernel.window();
    for (std::size_t t = 0; t < T; t++)
        for (std::size_t i = 0; i < grid.window_length; i++)
            den[t * grid.hop + i] += w[i] * w[i];
    for (auto& d : den) d = 1.0 / std::max(d, 1e-8);

    std::vector<std::vector<cplx>> spec(T, std::vector<cplx>(F));
    for (std::size_t t = 0; t < T; t++)
        for (std::size_t f = 0; f < F; f++)
            spec[t][f] = cplx(vr.v[t * F + f], V(im).v[t * F + f]);
    Tensor out({K});
    std::vector<double> buf(grid.window_length);
    for (std::size_t t = 0; t < T; t++) {
        kernel.synthesize(spec[t].data(), buf.data());
        for (std::size_t i = 0; i < grid.window_length; i++) out.v[t * grid.hop + i] += buf[i];
    }
    for (std::size_t k = 0; k < K; k++) out.v[k] *= den[k];

    int ir = re.id, ii = im.id;
    const StftKernel* kptr = &kernel;
    FrameGrid g = grid;
    return re.tape->push(std::move(out), {ir, ii},
                         [ir, ii, kptr, g, den](Tape& t, const Tape::Node& n) {
        auto& gr = t.grad_mut(ir);
        auto& gi = t.grad_mut(ii);
        std::size_t T = gr.rows(), F = gr.cols(), N = g.window_length;
        const auto& w = kptr->window();
        const bool has_nyquist = (N % 2 == 0);
        // adjoint: distribute each scaled output gradient through the
        // synthesize() linear map
        for (std::size_t tt = 0; tt < T; tt++) {
            for (std::size_t i = 0; i < N; i++) {
                double gy = n.grad.v[tt * g.hop + i] * den[tt * g.hop + i] * w[i] / double(N);
                if (gy == 0.0) continue;
                for (std::size_t f = 0; f < F; f++) {
                    cplx e = kptr->entry(i, f);  // w[i] (cos - j sin); reuse tables
                    double c = e.real() / std::max(w[i], 1e-300);
                    double s = -e.imag() / std::max(w[i], 1e-300);
                    double factor = (f == 0 || (has_nyquist && f == F - 1)) ? 1.0 : 2.0;
                    gr.v[tt * F + f] += gy * factor * c;
                    gi.v[tt * F + f] -= gy * factor * s;
                }
            }
        }
    });
}

// loss = -SI-SDR(est, ref); forward shares the evaluation-metric routine so
// score and loss agree bit for bit; gradient is zero when capped
inline Var si_sdr_loss(Var est, const std::vector<double>& ref) {
    const Tensor& ve = V(est);
    require(ve.shape.size() == 1, "si_sdr_loss: estimate must be a vector");
    std::vector<double> e(ve.v.begin(), ve.v.end());
    double value = si_sdr_db(e, ref);
    int ie = est.id;
    return est.tape->push(Tensor::scalar(-value), {ie},
                          [ie, ref](Tape& t, const Tape::Node& n) {
        const auto& ve2 = t.val(Var{&t, ie});
        std::vector<double> e2(ve2.v.begin(), ve2.v.end());
        auto g = si_sdr_grad(e2, ref);
        auto& ge = t.grad_mut(ie);
        for (std::size_t i = 0; i < g.size(); i++) ge.v[i] -= n.grad.v[0] * g[i];
    });
}

}  // namespace ad

}  // namespace beamkit
