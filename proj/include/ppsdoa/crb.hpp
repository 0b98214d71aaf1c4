// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "ppsdoa/model.hpp"

namespace ppsdoa {

// The scenario does not pin down its parameters (Fisher matrix numerically
// singular), e.g. two coincident sources.
struct unidentifiable_scenario_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Lower bounds on the standard deviation of any unbiased estimator of the
// angles and phase coefficients, plus the full Fisher information matrix over
// the ordering (theta_1..theta_L, phi_1_1..phi_L_K, Re alpha, Im alpha).
struct CrbReport {
    rvec theta_std;                // radians, per source
    std::vector<rvec> phi_std;     // per source, per coefficient order
    RMatrix fim;
};

// Fisher information for the deterministic-signal model under white circular
// Gaussian noise: F_ij = (2/sigma2) * Re{ (dmu/dpsi_i)^H (dmu/dpsi_j) } with
// mu the noiseless stacked measurement. Throws std::invalid_argument for
// sigma2 <= 0 and unidentifiable_scenario_error when singular.
RMatrix fisher_information(const ArrayConfig& cfg, std::span<const SourceParams> sources,
                           double sigma2);

// Inverse-Fisher diagonal restricted to (theta, phi), as standard deviations.
// Throws unidentifiable_scenario_error when the matrix condition exceeds 1e14.
CrbReport crb_bounds(const RMatrix& fim, int num_sources, int order);

}  // namespace ppsdoa
