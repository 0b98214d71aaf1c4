// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "ppsdoa/linalg.hpp"

namespace ppsdoa {

struct OptimOptions {
    int max_iters = 200;
    double grad_tol = 1e-7;        // infinity norm in scaled coordinates
    double f_tol = 1e-12;          // relative decrease treated as stagnation
    double armijo_c1 = 1e-4;
    double backtrack_factor = 0.5;
    int max_backtracks = 40;
    rvec scaling;                  // per-coordinate scales; empty means all ones
};

struct OptimResult {
    rvec x;
    double fx = 0.0;
    int iterations = 0;
    bool converged = false;
};

// BFGS quasi-Newton minimization with Armijo backtracking. Internally works
// on scaled coordinates x/scaling. Accepted iterates are monotone
// non-increasing in the objective; a failed line search returns the best
// iterate with converged=false. Throws std::invalid_argument when the
// objective or gradient is not finite at x0.
OptimResult bfgs_minimize(const std::function<double(const rvec&)>& objective,
                          const std::function<rvec(const rvec&)>& gradient, rvec x0,
                          const OptimOptions& opts = {});

// Central finite differences with per-coordinate step
// relative_step * max(1, |x_k|).
rvec finite_diff_gradient(const std::function<double(const rvec&)>& objective, const rvec& x,
                          double relative_step);

}  // namespace ppsdoa
