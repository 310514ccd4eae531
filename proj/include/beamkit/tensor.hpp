// tensor.hpp
// Dense row-major double tensor, the value type of the autodiff tape and
// the payload of the binary container.
#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

#include "beamkit/common.hpp"

namespace beamkit {

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        v.assign(count(shape), 0.0);
    }
    Tensor(std::vector<std::size_t> s, std::vector<double> data)
        : shape(std::move(s)), v(std::move(data)) {
        require(v.size() == count(shape), "tensor data does not match shape");
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }
    static Tensor scalar(double x) { return Tensor({1}, {x}); }

    std::size_t size() const { return v.size(); }
    std::size_t rows() const {
        require(shape.size() == 2, "rows: not a matrix");
        return shape[0];
    }
    std::size_t cols() const {
        require(shape.size() == 2, "cols: not a matrix");
        return shape[1];
    }
    double& at(std::size_t r, std::size_t c) { return v[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * shape[1] + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

}  // namespace beamkit
