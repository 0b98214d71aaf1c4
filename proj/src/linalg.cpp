// SPDX-License-Identifier: Apache-2.0
#include "ppsdoa/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ppsdoa {

cplx cdot(std::span<const cplx> a, std::span<const cplx> b) {
    cplx s{0.0, 0.0};
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

double norm_sq(std::span<const cplx> a) {
    double s = 0.0;
    for (const cplx& v : a) s += std::norm(v);
    return s;
}

double norm_sq(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return s;
}

ThinQr qr_orthonormal(const CMatrix& a) {
    const std::size_t m = a.rows(), n = a.cols();
    ThinQr out{CMatrix(m, n), CMatrix(n, n)};
    for (std::size_t j = 0; j < n; ++j) {
        cvec v(a.col(j).begin(), a.col(j).end());
        const double orig = std::sqrt(norm_sq(std::span<const cplx>(v)));
        // two orthogonalization passes keep q orthonormal to machine precision
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t k = 0; k < j; ++k) {
                const cplx c = cdot(out.q.col(k), std::span<const cplx>(v));
                auto qk = out.q.col(k);
                for (std::size_t i = 0; i < m; ++i) v[i] -= c * qk[i];
                out.r.at(k, j) += c;
            }
        }
        const double nv = std::sqrt(norm_sq(std::span<const cplx>(v)));
        if (!(nv > 1e-14 * std::max(orig, 1.0)))
            throw std::runtime_error("qr_orthonormal: rank-deficient matrix");
        out.r.at(j, j) = nv;
        auto qj = out.q.col(j);
        for (std::size_t i = 0; i < m; ++i) qj[i] = v[i] / nv;
    }
    return out;
}

cvec solve_upper(const CMatrix& r, const cvec& b) {
    const std::size_t n = r.cols();
    cvec x(b);
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t j = ii + 1; j < n; ++j) x[ii] -= r.at(ii, j) * x[j];
        x[ii] /= r.at(ii, ii);
    }
    return x;
}

double hermitian_condition(const CMatrix& h) {
    const std::size_t n = h.rows();
    if (n == 0) return 1.0;
    // real symmetric embedding [[Re, -Im], [Im, Re]] shares the eigenvalues of h
    RMatrix e(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const cplx v = h.at(i, j);
            e.at(i, j) = v.real();
            e.at(i, j + n) = -v.imag();
            e.at(i + n, j) = v.imag();
            e.at(i + n, j + n) = v.real();
        }
    const EigenSym es = jacobi_eigh(e);
    const double lo = es.values.front(), hi = es.values.back();
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

std::optional<rvec> solve_linear(RMatrix a, rvec b) {
    const std::size_t n = a.rows();
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(a.at(i, j)));
    if (scale == 0.0) return std::nullopt;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a.at(i, k)) > std::abs(a.at(piv, k))) piv = i;
        if (std::abs(a.at(piv, k)) < 1e-13 * scale) return std::nullopt;
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a.at(k, j), a.at(piv, j));
            std::swap(b[k], b[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a.at(i, k) / a.at(k, k);
            for (std::size_t j = k; j < n; ++j) a.at(i, j) -= f * a.at(k, j);
            b[i] -= f * b[k];
        }
    }
    rvec x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= a.at(ii, j) * x[j];
        x[ii] = s / a.at(ii, ii);
    }
    return x;
}

std::optional<rvec> lstsq(RMatrix a, rvec b) {
    const std::size_t m = a.rows(), n = a.cols();
    if (m < n) return std::nullopt;
    double scale = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(a.at(i, j)));
    if (scale == 0.0) return std::nullopt;
    // Householder triangularization applied to [a | b]
    for (std::size_t k = 0; k < n; ++k) {
        double nrm = 0.0;
        for (std::size_t i = k; i < m; ++i) nrm += a.at(i, k) * a.at(i, k);
        nrm = std::sqrt(nrm);
        if (nrm < 1e-12 * scale) return std::nullopt;
        if (a.at(k, k) > 0) nrm = -nrm;
        rvec v(m - k);
        v[0] = a.at(k, k) - nrm;
        for (std::size_t i = k + 1; i < m; ++i) v[i - k] = a.at(i, k);
        const double vtv = norm_sq(std::span<const double>(v));
        if (vtv == 0.0) continue;
        a.at(k, k) = nrm;
        for (std::size_t i = k + 1; i < m; ++i) a.at(i, k) = 0.0;
        for (std::size_t j = k + 1; j < n; ++j) {
            double d = 0.0;
            for (std::size_t i = k; i < m; ++i) d += v[i - k] * a.at(i, j);
            d *= 2.0 / vtv;
            for (std::size_t i = k; i < m; ++i) a.at(i, j) -= d * v[i - k];
        }
        double d = 0.0;
        for (std::size_t i = k; i < m; ++i) d += v[i - k] * b[i];
        d *= 2.0 / vtv;
        for (std::size_t i = k; i < m; ++i) b[i] -= d * v[i - k];
    }
    rvec x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= a.at(ii, j) * x[j];
        x[ii] = s / a.at(ii, ii);
    }
    return x;
}

EigenSym jacobi_eigh(RMatrix a) {
    const std::size_t n = a.rows();
    RMatrix v(n, n);
    for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) total += a.at(i, j) * a.at(i, j);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a.at(i, j) * a.at(i, j);
        if (off <= 1e-28 * std::max(total, 1e-300)) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (apq == 0.0) continue;
                const double app = a.at(p, p), aqq = a.at(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a.at(i, p), aiq = a.at(i, q);
                    a.at(i, p) = c * aip - s * aiq;
                    a.at(i, q) = s * aip + c * aiq;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    const double apj = a.at(p, j), aqj = a.at(q, j);
                    a.at(p, j) = c * apj - s * aqj;
                    a.at(q, j) = s * apj + c * aqj;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v.at(i, p), viq = v.at(i, q);
                    v.at(i, p) = c * vip - s * viq;
                    v.at(i, q) = s * vip + c * viq;
                }
            }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return a.at(x, x) < a.at(y, y); });
    EigenSym out{rvec(n), RMatrix(n, n)};
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a.at(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) out.vectors.at(i, j) = v.at(i, order[j]);
    }
    return out;
}

}  // namespace ppsdoa
