// SPDX-License-Identifier: Apache-2.0
#include "ppsdoa/crb.hpp"

#include <cmath>
#include <limits>

#include "ppsdoa/mlcost.hpp"

namespace ppsdoa {

namespace {

constexpr double kFimCondLimit = 1e14;

double fim_condition(const RMatrix& fim, EigenSym& es) {
    es = jacobi_eigh(fim);
    const double lo = es.values.front(), hi = es.values.back();
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

}  // namespace

RMatrix fisher_information(const ArrayConfig& cfg, std::span<const SourceParams> sources,
                           double sigma2) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("fisher_information: sigma2 must be positive");
    const int count = int(sources.size());
    const int order = count > 0 ? int(sources.front().phi.size()) : 0;
    const std::size_t mn = std::size_t(cfg.sensors) * std::size_t(cfg.snapshots);
    const std::size_t dim = std::size_t(count) * (order + 3);

    EstimateSet est;
    for (const SourceParams& s : sources) est.append(s.theta, s.phi);

    // sensitivity of the noiseless measurement to every parameter
    CMatrix jac(mn, dim);
    for (int l = 0; l < count; ++l) {
        const cvec a_col = response_vector(cfg, sources[l].theta, sources[l].phi);
        for (int index = 0; index <= order; ++index) {
            const CMatrix d = response_derivatives(cfg, est, {l, index});
            const std::size_t j =
                (index == 0) ? std::size_t(l)
                             : std::size_t(count) + std::size_t(l) * order + std::size_t(index - 1);
            auto dst = jac.col(j);
            auto src = d.col(l);
            for (std::size_t i = 0; i < mn; ++i) dst[i] = sources[l].amplitude * src[i];
        }
        auto re_col = jac.col(std::size_t(count) * (order + 1) + std::size_t(l));
        auto im_col = jac.col(std::size_t(count) * (order + 2) + std::size_t(l));
        for (std::size_t i = 0; i < mn; ++i) {
            re_col[i] = a_col[i];
            im_col[i] = cplx(0.0, 1.0) * a_col[i];
        }
    }

    RMatrix fim(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = i; j < dim; ++j) {
            const double v = (2.0 / sigma2) * cdot(jac.col(i), jac.col(j)).real();
            fim.at(i, j) = v;
            fim.at(j, i) = v;
        }

    EigenSym es;
    if (!(fim_condition(fim, es) <= kFimCondLimit))
        throw unidentifiable_scenario_error("Fisher information is numerically singular");
    return fim;
}

CrbReport crb_bounds(const RMatrix& fim, int num_sources, int order) {
    const std::size_t dim = fim.rows();
    if (dim != std::size_t(num_sources) * (order + 3))
        throw std::invalid_argument("crb_bounds: dimension mismatch");

    EigenSym es;
    if (!(fim_condition(fim, es) <= kFimCondLimit))
        throw unidentifiable_scenario_error("Fisher information is numerically singular");

    // diagonal of the inverse via the eigendecomposition
    rvec inv_diag(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j)
            inv_diag[i] += es.vectors.at(i, j) * es.vectors.at(i, j) / es.values[j];

    CrbReport report;
    report.fim = fim;
    report.theta_std.resize(std::size_t(num_sources));
    report.phi_std.assign(std::size_t(num_sources), rvec(std::size_t(order)));
    for (int l = 0; l < num_sources; ++l) {
        report.theta_std[l] = std::sqrt(std::max(0.0, inv_diag[std::size_t(l)]));
        for (int k = 0; k < order; ++k)
            report.phi_std[l][k] = std::sqrt(std::max(
                0.0, inv_diag[std::size_t(num_sources) + std::size_t(l) * order + std::size_t(k)]));
    }
    return report;
}

}  // namespace ppsdoa
