// SPDX-License-Identifier: Apache-2.0
#include "ppsdoa/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ppsdoa/rng.hpp"

namespace ppsdoa {

void ArrayConfig::validate() const {
    if (sensors < 2) throw std::invalid_argument("ArrayConfig: need at least 2 sensors");
    if (snapshots < 2) throw std::invalid_argument("ArrayConfig: need at least 2 snapshots");
    if (!(spacing > 0.0)) throw std::invalid_argument("ArrayConfig: spacing must be positive");
    if (!(speed > 0.0)) throw std::invalid_argument("ArrayConfig: speed must be positive");
    if (!(delta > 0.0)) throw std::invalid_argument("ArrayConfig: delta must be positive");
    if (omega_c < 0.0) throw std::invalid_argument("ArrayConfig: carrier must be non-negative");
}

SnapshotBlock SnapshotBlock::from_stacked(const ArrayConfig& cfg, cvec stacked) {
    if (stacked.size() != std::size_t(cfg.sensors) * std::size_t(cfg.snapshots))
        throw std::invalid_argument("SnapshotBlock: stacked length must be M*N");
    return SnapshotBlock{cfg.sensors, cfg.snapshots, cfg.delta, std::move(stacked)};
}

double inter_sensor_delay(double theta, const ArrayConfig& cfg) {
    return cfg.spacing / cfg.speed * std::sin(theta);
}

double instantaneous_frequency(std::span<const double> phi, double t) {
    // Horner over k*phi[k]
    double acc = 0.0;
    for (std::size_t k = phi.size(); k-- > 0;) acc = acc * t + double(k + 1) * phi[k];
    return acc;
}

double instantaneous_frequency_slope(std::span<const double> phi, double t) {
    double acc = 0.0;
    for (std::size_t k = phi.size(); k-- > 1;) acc = acc * t + double(k + 1) * double(k) * phi[k];
    return acc;
}

namespace {

// phase polynomial without constant term: sum_k phi[k-1] * s^k
double phase_poly(std::span<const double> phi, double s) {
    double acc = 0.0;
    for (std::size_t k = phi.size(); k-- > 0;) acc = acc * s + phi[k];
    return acc * s;
}

}  // namespace

cvec response_vector(const ArrayConfig& cfg, double theta, std::span<const double> phi) {
    const double tau = inter_sensor_delay(theta, cfg);
    cvec out(std::size_t(cfg.sensors) * std::size_t(cfg.snapshots));
    std::size_t idx = 0;
    for (int n = cfg.n_min(); n <= cfg.n_max(); ++n) {
        const double t = cfg.delta * n;
        const double carrier = cfg.omega_c * t;
        for (int m = 0; m < cfg.sensors; ++m) {
            const double s = t - m * tau;
            out[idx++] = std::polar(1.0, phase_poly(phi, s) - carrier);
        }
    }
    return out;
}

CMatrix stacked_response(const ArrayConfig& cfg, std::span<const SourceParams> sources) {
    for (const SourceParams& src : sources)
        if (src.phi.size() != sources.front().phi.size())
            throw std::invalid_argument("stacked_response: sources must share the polynomial order");
    CMatrix a(std::size_t(cfg.sensors) * std::size_t(cfg.snapshots), sources.size());
    for (std::size_t l = 0; l < sources.size(); ++l) {
        const cvec col = response_vector(cfg, sources[l].theta, sources[l].phi);
        std::copy(col.begin(), col.end(), a.col(l).begin());
    }
    return a;
}

SnapshotBlock generate_snapshots(const ArrayConfig& cfg, std::span<const SourceParams> sources,
                                 double noise_power, std::uint64_t seed) {
    if (noise_power < 0.0) throw std::invalid_argument("generate_snapshots: negative noise power");
    cfg.validate();
    cvec x(std::size_t(cfg.sensors) * std::size_t(cfg.snapshots), cplx{0.0, 0.0});
    for (const SourceParams& src : sources) {
        const cvec col = response_vector(cfg, src.theta, src.phi);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += src.amplitude * col[i];
    }
    if (noise_power > 0.0) {
        Rng rng(seed);
        for (cplx& v : x) v += rng.gaussian_complex(noise_power);
    }
    return SnapshotBlock::from_stacked(cfg, std::move(x));
}

double coherence_margin(std::span<const double> phi, const ArrayConfig& cfg, int last_sensor,
                        std::pair<int, int> time_range) {
    if (last_sensor < 1 || last_sensor > cfg.sensors)
        throw std::invalid_argument("coherence_margin: sensor index out of range");
    if (time_range.first > time_range.second || time_range.first < cfg.n_min() ||
        time_range.second > cfg.n_max())
        throw std::invalid_argument("coherence_margin: bad snapshot range");
    double omega_min = std::numeric_limits<double>::infinity();
    double slope_max = 0.0;
    for (int n = time_range.first; n <= time_range.second; ++n) {
        const double t = cfg.delta * n;
        omega_min = std::min(omega_min, instantaneous_frequency(phi, t));
        slope_max = std::max(slope_max, std::abs(instantaneous_frequency_slope(phi, t)));
    }
    if (!(omega_min > 0.0))
        throw std::domain_error("coherence_margin: instantaneous frequency not positive on range");
    return slope_max * cfg.spacing * double(last_sensor - 1) / (2.0 * omega_min * cfg.speed);
}

}  // namespace ppsdoa
