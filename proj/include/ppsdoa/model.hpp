// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ppsdoa/linalg.hpp"

namespace ppsdoa {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

// One polynomial-phase source: angle relative to broadside, passband phase
// coefficients phi[k-1] in rad/s^k for k = 1..K (phi[0] includes the carrier),
// and complex amplitude.
struct SourceParams {
    double theta = 0.0;
    rvec phi;
    cplx amplitude{1.0, 0.0};
};

// Uniform linear array and sampling constants.
struct ArrayConfig {
    int sensors = 8;          // M
    double spacing = 1.5;     // d [m]
    double speed = 1500.0;    // c [m/s]
    double delta = 0.01;      // sampling period [s]
    int snapshots = 128;      // N
    double omega_c = 0.0;     // carrier [rad/s]

    // spatial-aliasing cut-off frequency, pi*c/d
    double cutoff_omega() const { return kPi * speed / spacing; }

    // snapshot index range n = -ceil((N-1)/2) .. floor((N-1)/2)
    int n_min() const { return -(snapshots / 2); }
    int n_max() const { return (snapshots - 1) / 2; }
    int time_offset() const { return snapshots / 2; }

    void validate() const;  // throws std::invalid_argument
};

// Sensor samples for all snapshots stacked into one vector of length M*N:
// data[M*(n + time_offset) + m] holds sensor m (0-based) at snapshot n.
struct SnapshotBlock {
    int sensors = 0;
    int snapshots = 0;
    double delta = 0.0;
    cvec data;

    cplx& at(int m, int n) { return data[index_of(m, n)]; }
    const cplx& at(int m, int n) const { return data[index_of(m, n)]; }
    std::size_t index_of(int m, int n) const {
        return std::size_t(sensors) * std::size_t(n + snapshots / 2) + std::size_t(m);
    }
    int n_min() const { return -(snapshots / 2); }
    int n_max() const { return (snapshots - 1) / 2; }

    static SnapshotBlock from_stacked(const ArrayConfig& cfg, cvec stacked);
};

// Wavefront delay between adjacent sensors, (d/c)*sin(theta). Expects
// |theta| <= pi/2.
double inter_sensor_delay(double theta, const ArrayConfig& cfg);

// Derivative of the phase polynomial: sum_k k*phi[k]*t^(k-1).
double instantaneous_frequency(std::span<const double> phi, double t);

// Second phase derivative: sum_k k*(k-1)*phi[k]*t^(k-2).
double instantaneous_frequency_slope(std::span<const double> phi, double t);

// Response of a single source over all sensors and snapshots, stacked.
// Element (m, n) = exp(j*(sum_k phi_k*(delta*n - m*tau)^k - omega_c*delta*n));
// the omega_c term removes the carrier after sampling so that the stored
// snapshots are baseband while phi stays in passband convention.
cvec response_vector(const ArrayConfig& cfg, double theta, std::span<const double> phi);

// Stacked response matrix with one column per source, in input order.
// Throws std::invalid_argument when sources mix polynomial orders.
CMatrix stacked_response(const ArrayConfig& cfg, std::span<const SourceParams> sources);

// x = A*alpha + z with i.i.d. circular complex Gaussian noise of per-element
// variance noise_power. Pure function of its arguments.
SnapshotBlock generate_snapshots(const ArrayConfig& cfg, std::span<const SourceParams> sources,
                                 double noise_power, std::uint64_t seed);

// Worst-case phase linearization error ratio over sensors 1..last_sensor and
// the snapshot range [time_range.first, time_range.second]; small values mean
// the array can be treated as coherent for this source. Throws
// std::domain_error when the instantaneous frequency is not positive on the
// range.
double coherence_margin(std::span<const double> phi, const ArrayConfig& cfg, int last_sensor,
                        std::pair<int, int> time_range);

}  // namespace ppsdoa
