// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ppsdoa/model.hpp"

namespace ppsdoa {

// Two sources (or an iterate during refinement) came numerically too close:
// the stacked response matrix lost full column rank.
struct degenerate_geometry_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// DOA and coefficient estimates for i sources; phis[l] pairs with thetas[l].
struct EstimateSet {
    rvec thetas;
    std::vector<rvec> phis;
    std::optional<cvec> amplitudes;

    int count() const { return int(thetas.size()); }
    int order() const { return phis.empty() ? 0 : int(phis.front().size()); }

    std::vector<SourceParams> to_sources() const {
        std::vector<SourceParams> s(thetas.size());
        for (std::size_t l = 0; l < thetas.size(); ++l) s[l] = {thetas[l], phis[l], {1.0, 0.0}};
        return s;
    }

    void append(double theta, rvec phi) {
        thetas.push_back(theta);
        phis.push_back(std::move(phi));
        amplitudes.reset();
    }
};

// Measurement residual after projecting out the current estimates' response
// subspace, together with the orthonormal basis that defines the projector.
struct ResidualState {
    CMatrix basis;  // orthonormal columns spanning the response subspace
    cvec residual;
    double residual_norm_sq = 0.0;

    int source_count() const { return int(basis.cols()); }

    // v - Q Q^H v
    cvec project_out(const cvec& v) const;

    static ResidualState from_measurement(const cvec& x);  // zero sources
};

// Identifies one scalar parameter: index 0 is theta, 1..K are phi_1..phi_K.
struct ParamRef {
    int source = 0;
    int index = 0;
};

// Least-squares amplitudes given the response subspace, via orthogonal
// factorization. Throws degenerate_geometry_error when the response matrix
// condition number exceeds 1e12.
cvec concentrate_amplitudes(const EstimateSet& est, const cvec& x, const ArrayConfig& cfg);

// Concentrated negative log-likelihood: squared norm of the residual after
// projecting out the estimated sources. Empty estimate set gives |x|^2.
double negative_log_likelihood(const EstimateSet& est, const cvec& x, const ArrayConfig& cfg);

// Single-source matched-filter spectrum |a^H x|^2 / (M N).
double pp_beamformer(double theta, std::span<const double> phi, const cvec& x,
                     const ArrayConfig& cfg);

// Same contract as negative_log_likelihood; named separately because the
// sequential estimators call it with a growing number of sources.
double isource_cost_direct(const EstimateSet& est, const cvec& x, const ArrayConfig& cfg);

// Cost of adding one candidate source on top of a fixed residual state:
// |r|^2 - |a^H r|^2 / |P_perp a|^2. Returns nullopt when the candidate lies
// in the span of the existing estimates.
std::optional<double> isource_cost_fast(const ResidualState& state, double theta,
                                        std::span<const double> phi, const ArrayConfig& cfg);

// Projects the measurement onto the orthogonal complement of the estimated
// response subspace and keeps the basis for later candidate evaluations.
ResidualState residual_update(const EstimateSet& est, const cvec& x, const ArrayConfig& cfg);

// Analytic derivative of the stacked response matrix with respect to one
// scalar parameter; only the owning source's column is nonzero.
CMatrix response_derivatives(const ArrayConfig& cfg, const EstimateSet& est, ParamRef param);

// Gradient of the concentrated cost with respect to all parameters, ordered
// (theta_1, phi_1_1..phi_1_K, theta_2, ...).
rvec cost_gradient(const EstimateSet& est, const cvec& x, const ArrayConfig& cfg);

}  // namespace ppsdoa
