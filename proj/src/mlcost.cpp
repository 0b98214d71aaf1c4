// SPDX-License-Identifier: Apache-2.0
#include "ppsdoa/mlcost.hpp"

#include <cmath>

namespace ppsdoa {

namespace {

constexpr double kCondLimit = 1e12;

// QR of the stacked response with the rank guard shared by every operation
// that relies on full column rank. The condition number comes from the Gram
// matrix, independent of the factorization accuracy.
ThinQr factor_checked(const CMatrix& a) {
    const std::size_t k = a.cols();
    if (k > 0) {
        CMatrix gram(k, k);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) gram.at(i, j) = cdot(a.col(i), a.col(j));
        const double cond2 = hermitian_condition(gram);
        if (!(cond2 <= kCondLimit * kCondLimit))
            throw degenerate_geometry_error("response matrix is rank deficient");
    }
    return qr_orthonormal(a);
}

cvec orthogonal_residual(const CMatrix& q, const cvec& x) {
    cvec r = x;
    for (std::size_t j = 0; j < q.cols(); ++j) {
        const cplx c = cdot(q.col(j), std::span<const cplx>(x));
        auto qj = q.col(j);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= c * qj[i];
    }
    return r;
}

double param_factor_real(const ArrayConfig& cfg, std::span<const double> phi, double theta,
                         double s, int m, int index) {
    // returns the imaginary multiplier g where d(element)/d(param) = j*g*element
    if (index == 0) {
        const double omega_s = instantaneous_frequency(phi, s);
        return -omega_s * double(m) * cfg.spacing / cfg.speed * std::cos(theta);
    }
    double powk = s;
    for (int k = 1; k < index; ++k) powk *= s;
    return powk;
}

}  // namespace

cvec ResidualState::project_out(const cvec& v) const {
    return orthogonal_residual(basis, v);
}

ResidualState ResidualState::from_measurement(const cvec& x) {
    ResidualState st;
    st.basis = CMatrix(x.size(), 0);
    st.residual = x;
    st.residual_norm_sq = norm_sq(std::span<const cplx>(x));
    return st;
}

cvec concentrate_amplitudes(const EstimateSet& est, const cvec& x, const ArrayConfig& cfg) {
    const CMatrix a = stacked_response(cfg, est.to_sources());
    const ThinQr qr = factor_checked(a);
    cvec rhs(est.count());
    for (int j = 0; j < est.count(); ++j) rhs[j] = cdot(qr.q.col(j), std::span<const cplx>(x));
    return solve_upper(qr.r, rhs);
}

double negative_log_likelihood(const EstimateSet& est, const cvec& x, const ArrayConfig& cfg) {
    if (est.count() == 0) return norm_sq(std::span<const cplx>(x));
    const CMatrix a = stacked_response(cfg, est.to_sources());
    const ThinQr qr = factor_checked(a);
    return norm_sq(std::span<const cplx>(orthogonal_residual(qr.q, x)));
}

double pp_beamformer(double theta, std::span<const double> phi, const cvec& x,
                     const ArrayConfig& cfg) {
    const cvec a = response_vector(cfg, theta, phi);
    return std::norm(cdot(std::span<const cplx>(a), std::span<const cplx>(x))) / double(a.size());
}

double isource_cost_direct(const EstimateSet& est, const cvec& x, const ArrayConfig& cfg) {
    return negative_log_likelihood(est, x, cfg);
}

std::optional<double> isource_cost_fast(const ResidualState& state, double theta,
                                        std::span<const double> phi, const ArrayConfig& cfg) {
    const cvec a = response_vector(cfg, theta, phi);
    const double mn = double(a.size());
    double proj_sq = 0.0;
    for (std::size_t j = 0; j < state.basis.cols(); ++j)
        proj_sq += std::norm(cdot(state.basis.col(j), std::span<const cplx>(a)));
    double a_perp_sq = mn - proj_sq;
    if (a_perp_sq < 1e-6 * mn) {
        // recompute without cancellation before deciding the candidate is in span
        a_perp_sq = norm_sq(std::span<const cplx>(state.project_out(a)));
        if (a_perp_sq < 1e-12 * mn) return std::nullopt;
    }
    const cplx corr = cdot(std::span<const cplx>(a), std::span<const cplx>(state.residual));
    return state.residual_norm_sq - std::norm(corr) / a_perp_sq;
}

ResidualState residual_update(const EstimateSet& est, const cvec& x, const ArrayConfig& cfg) {
    if (est.count() == 0) return ResidualState::from_measurement(x);
    const CMatrix a = stacked_response(cfg, est.to_sources());
    ThinQr qr = factor_checked(a);
    ResidualState st;
    st.residual = orthogonal_residual(qr.q, x);
    st.residual_norm_sq = norm_sq(std::span<const cplx>(st.residual));
    st.basis = std::move(qr.q);
    return st;
}

CMatrix response_derivatives(const ArrayConfig& cfg, const EstimateSet& est, ParamRef param) {
    const int count = est.count();
    if (param.source < 0 || param.source >= count || param.index < 0 ||
        param.index > est.order())
        throw std::invalid_argument("response_derivatives: parameter out of range");
    CMatrix d(std::size_t(cfg.sensors) * std::size_t(cfg.snapshots), count);
    const double theta = est.thetas[param.source];
    const std::span<const double> phi(est.phis[param.source]);
    const double tau = inter_sensor_delay(theta, cfg);
    const cvec base = response_vector(cfg, theta, phi);
    auto col = d.col(param.source);
    std::size_t idx = 0;
    for (int n = -(cfg.snapshots / 2); n <= (cfg.snapshots - 1) / 2; ++n) {
        const double t = cfg.delta * n;
        for (int m = 0; m < cfg.sensors; ++m, ++idx) {
            const double g = param_factor_real(cfg, phi, theta, t - m * tau, m, param.index);
            col[idx] = cplx(0.0, g) * base[idx];
        }
    }
    return d;
}

rvec cost_gradient(const EstimateSet& est, const cvec& x, const ArrayConfig& cfg) {
    const int count = est.count();
    const int order = est.order();
    const CMatrix a = stacked_response(cfg, est.to_sources());
    const ThinQr qr = factor_checked(a);
    cvec rhs(count);
    for (int j = 0; j < count; ++j) rhs[j] = cdot(qr.q.col(j), std::span<const cplx>(x));
    const cvec alpha = solve_upper(qr.r, rhs);
    const cvec r = orthogonal_residual(qr.q, x);

    rvec grad(std::size_t(count) * (order + 1));
    std::size_t g_idx = 0;
    for (int l = 0; l < count; ++l) {
        const double theta = est.thetas[l];
        const std::span<const double> phi(est.phis[l]);
        const double tau = inter_sensor_delay(theta, cfg);
        const auto acol = a.col(l);
        for (int index = 0; index <= order; ++index, ++g_idx) {
            cplx corr{0.0, 0.0};  // r^H d for the nonzero derivative column
            std::size_t idx = 0;
            for (int n = -(cfg.snapshots / 2); n <= (cfg.snapshots - 1) / 2; ++n) {
                const double t = cfg.delta * n;
                for (int m = 0; m < cfg.sensors; ++m, ++idx) {
                    const double g = param_factor_real(cfg, phi, theta, t - m * tau, m, index);
                    corr += std::conj(r[idx]) * (cplx(0.0, g) * acol[idx]);
                }
            }
            grad[g_idx] = -2.0 * (alpha[l] * corr).real();
        }
    }
    return grad;
}

}  // namespace ppsdoa
