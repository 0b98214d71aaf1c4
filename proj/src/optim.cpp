// SPDX-License-Identifier: Apache-2.0
#include "ppsdoa/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ppsdoa {

namespace {

double inf_norm(const rvec& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

bool all_finite(const rvec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

OptimResult bfgs_minimize(const std::function<double(const rvec&)>& objective,
                          const std::function<rvec(const rvec&)>& gradient, rvec x0,
                          const OptimOptions& opts) {
    const std::size_t n = x0.size();
    rvec scale = opts.scaling.empty() ? rvec(n, 1.0) : opts.scaling;
    if (scale.size() != n) throw std::invalid_argument("bfgs_minimize: scaling size mismatch");
    for (double s : scale)
        if (!(s > 0.0)) throw std::invalid_argument("bfgs_minimize: scaling must be positive");

    auto to_x = [&](const rvec& u) {
        rvec x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = u[i] * scale[i];
        return x;
    };
    auto fu = [&](const rvec& u) { return objective(to_x(u)); };
    auto gu = [&](const rvec& u) {
        rvec g = gradient(to_x(u));
        for (std::size_t i = 0; i < n; ++i) g[i] *= scale[i];
        return g;
    };

    rvec u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = x0[i] / scale[i];

    double f = fu(u);
    if (!std::isfinite(f)) throw std::invalid_argument("bfgs_minimize: objective not finite at x0");
    rvec g = gu(u);
    if (!all_finite(g)) throw std::invalid_argument("bfgs_minimize: gradient not finite at x0");

    RMatrix h(n, n);
    for (std::size_t i = 0; i < n; ++i) h.at(i, i) = 1.0;

    OptimResult res;
    res.iterations = 0;
    int stagnant = 0;
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        if (inf_norm(g) <= opts.grad_tol) {
            res.converged = true;
            break;
        }

        rvec p(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) p[i] -= h.at(i, j) * g[j];
        double slope = 0.0;
        for (std::size_t i = 0; i < n; ++i) slope += g[i] * p[i];
        if (slope >= 0.0) {
            // inverse-Hessian lost descent property: restart from steepest descent
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) h.at(i, j) = (i == j) ? 1.0 : 0.0;
            for (std::size_t i = 0; i < n; ++i) p[i] = -g[i];
            slope = -norm_sq(std::span<const double>(g));
            if (slope == 0.0) {
                res.converged = true;
                break;
            }
        }

        // before any curvature information exists the metric is arbitrary;
        // cap the first trial step to unit length in scaled coordinates
        double step = 1.0;
        if (iter == 0) {
            const double p_norm = std::sqrt(norm_sq(std::span<const double>(p)));
            if (p_norm > 1.0) step = 1.0 / p_norm;
        }
        bool accepted = false;
        rvec u_new(n);
        double f_new = f;
        for (int bt = 0; bt < opts.max_backtracks; ++bt) {
            for (std::size_t i = 0; i < n; ++i) u_new[i] = u[i] + step * p[i];
            f_new = fu(u_new);
            if (std::isfinite(f_new) && f_new <= f + opts.armijo_c1 * step * slope) {
                accepted = true;
                break;
            }
            step *= opts.backtrack_factor;
        }
        if (!accepted) break;  // best iterate so far is u

        rvec g_new = gu(u_new);
        rvec s_vec(n), y_vec(n);
        for (std::size_t i = 0; i < n; ++i) {
            s_vec[i] = u_new[i] - u[i];
            y_vec[i] = g_new[i] - g[i];
        }
        double ys = 0.0;
        for (std::size_t i = 0; i < n; ++i) ys += y_vec[i] * s_vec[i];
        const double y_nrm = std::sqrt(norm_sq(std::span<const double>(y_vec)));
        const double s_nrm = std::sqrt(norm_sq(std::span<const double>(s_vec)));
        if (ys > 1e-12 * y_nrm * s_nrm) {
            if (iter == 0) {
                // Shanno-Phua: size the initial inverse Hessian from the
                // first curvature pair
                const double gamma = ys / (y_nrm * y_nrm);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        h.at(i, j) = (i == j) ? gamma : 0.0;
            }
            // H <- (I - s y^T/ys) H (I - y s^T/ys) + s s^T/ys
            const double rho = 1.0 / ys;
            rvec hy(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) hy[i] += h.at(i, j) * y_vec[j];
            double yhy = 0.0;
            for (std::size_t i = 0; i < n; ++i) yhy += y_vec[i] * hy[i];
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    h.at(i, j) += rho * rho * (1.0 / rho + yhy) * s_vec[i] * s_vec[j] -
                                  rho * (hy[i] * s_vec[j] + s_vec[i] * hy[j]);
        }

        const double decrease = f - f_new;
        u = u_new;
        f = f_new;
        g = std::move(g_new);
        res.iterations = iter + 1;

        if (decrease <= opts.f_tol * std::max(1.0, std::abs(f))) {
            if (++stagnant >= 2) {
                res.converged = true;
                break;
            }
        } else {
            stagnant = 0;
        }
    }
    if (!res.converged && inf_norm(g) <= opts.grad_tol) res.converged = true;

    res.x = to_x(u);
    res.fx = f;
    return res;
}

rvec finite_diff_gradient(const std::function<double(const rvec&)>& objective, const rvec& x,
                          double relative_step) {
    rvec g(x.size());
    rvec probe = x;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double step = relative_step * std::max(1.0, std::abs(x[k]));
        probe[k] = x[k] + step;
        const double f_hi = objective(probe);
        probe[k] = x[k] - step;
        const double f_lo = objective(probe);
        probe[k] = x[k];
        g[k] = (f_hi - f_lo) / (2.0 * step);
    }
    return g;
}

}  // namespace ppsdoa
