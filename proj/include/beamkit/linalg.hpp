// linalg.hpp
// Small dense solves and principal eigenvectors for M <= 8 channel
// covariance work: Gaussian elimination with partial pivoting and a fixed
// 50-iteration power method. No external solver.
#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "beamkit/common.hpp"

namespace beamkit {

inline constexpr double kDiagonalLoading = 1e-6;
inline constexpr int kPowerIterations = 50;
inline constexpr double kPowerTolerance = 1e-10;

// A + eps * trace(A)/M * I, the loading applied before every inversion.
// An absolute floor keeps all-silent statistics solvable (zero right-hand
// sides then give zero weights).
template <typename T>
std::vector<T> diag_load(const std::vector<T>& a, std::size_t m, double eps = kDiagonalLoading) {
    std::vector<T> out(a);
    double tr = 0.0;
    for (std::size_t i = 0; i < m; i++) tr += std::real(cplx(a[i * m + i]));
    double add = std::max(eps * tr / double(m), 1e-30);
    for (std::size_t i = 0; i < m; i++) out[i * m + i] += T(add);
    return out;
}

// Solve A x = b in place of a copy; throws `context` on a vanishing pivot.
template <typename T>
std::vector<T> solve_dense(std::vector<T> a, std::vector<T> b, std::size_t m,
                           const std::string& context) {
    double scale = 0.0;
    for (const auto& v : a) scale = std::max(scale, std::abs(v));
    for (std::size_t c = 0; c < m; c++) {
        std::size_t best = c;
        for (std::size_t r = c + 1; r < m; r++)
            if (std::abs(a[r * m + c]) > std::abs(a[best * m + c])) best = r;
        if (best != c) {
            for (std::size_t j = 0; j < m; j++) std::swap(a[c * m + j], a[best * m + j]);
            std::swap(b[c], b[best]);
        }
        if (!(std::abs(a[c * m + c]) > 1e-13 * std::max(scale, 1e-300)))
            throw std::runtime_error(context + ": singular matrix");
        for (std::size_t r = c + 1; r < m; r++) {
            T f = a[r * m + c] / a[c * m + c];
            if (f == T(0)) continue;
            for (std::size_t j = c; j < m; j++) a[r * m + j] -= f * a[c * m + j];
            b[r] -= f * b[c];
        }
    }
    std::vector<T> x(m);
    for (std::size_t c = m; c-- > 0;) {
        T acc = b[c];
        for (std::size_t j = c + 1; j < m; j++) acc -= a[c * m + j] * x[j];
        x[c] = acc / a[c * m + c];
    }
    return x;
}

namespace detail {
template <typename T>
void matvec(const std::vector<T>& a, const std::vector<T>& v, std::vector<T>& out,
            std::size_t m) {
    for (std::size_t i = 0; i < m; i++) {
        T acc(0);
        for (std::size_t j = 0; j < m; j++) acc += a[i * m + j] * v[j];
        out[i] = acc;
    }
}
}  // namespace detail

// Principal eigenvector of a Hermitian PSD matrix, unit norm, rotated so the
// reference-channel component is real and nonnegative. A zero matrix yields
// the reference one-hot.
inline std::vector<cplx> principal_eigenvector(const std::vector<cplx>& a, std::size_t m,
                                               std::size_t ref) {
    double scale = 0.0;
    for (const auto& v : a) scale = std::max(scale, std::abs(v));
    std::vector<cplx> v(m), av(m);
    if (scale == 0.0) {
        v.assign(m, cplx(0));
        v[ref] = cplx(1);
        return v;
    }
    for (std::size_t i = 0; i < m; i++) v[i] = cplx(1.0 + 0.05 * double(i), 0.01 * double(i));
    double nrm = 0;
    for (auto& c : v) nrm += std::norm(c);
    for (auto& c : v) c /= std::sqrt(nrm);
    for (int it = 0; it < kPowerIterations; it++) {
        detail::matvec(a, v, av, m);
        double n2 = 0;
        for (auto& c : av) n2 += std::norm(c);
        if (n2 == 0.0) break;
        double inv = 1.0 / std::sqrt(n2);
        cplx align(0);
        for (std::size_t i = 0; i < m; i++) align += std::conj(av[i]) * v[i];
        cplx rot = std::abs(align) > 0 ? align / std::abs(align) : cplx(1);
        double delta = 0;
        for (std::size_t i = 0; i < m; i++) {
            cplx nv = av[i] * inv * rot;
            delta += std::norm(nv - v[i]);
            v[i] = nv;
        }
        if (std::sqrt(delta) < kPowerTolerance) break;
    }
    // fix the overall phase on the reference channel
    cplx vr = v[ref];
    if (std::abs(vr) < 1e-12) {
        std::size_t big = 0;
        for (std::size_t i = 1; i < m; i++)
            if (std::abs(v[i]) > std::abs(v[big])) big = i;
        vr = v[big];
    }
    cplx rot = std::abs(vr) > 0 ? std::conj(vr) / std::abs(vr) : cplx(1);
    for (auto& c : v) c *= rot;
    return v;
}

// real symmetric PSD version; sign chosen so the reference component >= 0
inline std::vector<double> principal_eigenvector(const std::vector<double>& a, std::size_t m,
                                                 std::size_t ref) {
    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::fabs(v));
    std::vector<double> v(m), av(m);
    if (scale == 0.0) {
        v.assign(m, 0.0);
        v[ref] = 1.0;
        return v;
    }
    for (std::size_t i = 0; i < m; i++) v[i] = 1.0 + 0.05 * double(i);
    double nrm = 0;
    for (double c : v) nrm += c * c;
    for (double& c : v) c /= std::sqrt(nrm);
    for (int it = 0; it < kPowerIterations; it++) {
        detail::matvec(a, v, av, m);
        double n2 = 0;
        for (double c : av) n2 += c * c;
        if (n2 == 0.0) break;
        double inv = 1.0 / std::sqrt(n2);
        double align = 0;
        for (std::size_t i = 0; i < m; i++) align += av[i] * v[i];
        double sgn = align < 0 ? -1.0 : 1.0;
        double delta = 0;
        for (std::size_t i = 0; i < m; i++) {
            double nv = av[i] * inv * sgn;
            delta += (nv - v[i]) * (nv - v[i]);
            v[i] = nv;
        }
        if (std::sqrt(delta) < kPowerTolerance) break;
    }
    double vr = v[ref];
    if (std::fabs(vr) < 1e-12) {
        std::size_t big = 0;
        for (std::size_t i = 1; i < m; i++)
            if (std::fabs(v[i]) > std::fabs(v[big])) big = i;
        vr = v[big];
    }
    if (vr < 0)
        for (double& c : v) c = -c;
    return v;
}

}  // namespace beamkit
