// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ppsdoa/model.hpp"

namespace ppsdoa {

// Complex time-frequency maps per channel, where a channel is either a sensor
// (after the STFT) or a beam (after the beamformer bank). Frame index p covers
// only positions where the analysis window lies fully inside the data;
// frequency index q covers the zero-padded DFT grid.
struct TfBeamTensor {
    int channels = 0;
    int p_min = 0, p_max = -1;
    int q_min = 0, q_max = -1;
    int window_width = 0;  // H
    int dft_length = 0;    // F
    double delta = 0.0;
    cvec values;  // layout: ((c * frames) + (p - p_min)) * bins + (q - q_min)

    int frames() const { return p_max - p_min + 1; }
    int bins() const { return q_max - q_min + 1; }
    double time_at(int p) const { return delta * p; }
    double omega_at(int q) const { return 2.0 * kPi * q / (delta * dft_length); }

    cplx& at(int c, int p, int q) { return values[index_of(c, p, q)]; }
    const cplx& at(int c, int p, int q) const { return values[index_of(c, p, q)]; }
    std::size_t index_of(int c, int p, int q) const {
        return (std::size_t(c) * frames() + std::size_t(p - p_min)) * bins() +
               std::size_t(q - q_min);
    }
};

struct SupportPoint {
    int p = 0;
    int q = 0;
    double magnitude = 0.0;
};

// Per-beam collections of retained time-frequency points.
struct SupportSet {
    std::vector<std::vector<SupportPoint>> beams;

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& b : beams) n += b.size();
        return n;
    }
};

// Sliding windowed DFT per sensor with a rectangular window of width H,
// zero-padded to F bins, normalized by 1/H. Throws std::invalid_argument for
// H > N, H < 1 or F < H.
TfBeamTensor stft_per_sensor(const SnapshotBlock& block, int window_width, int dft_length);

// Bank of M spatial DFT beamformers applied across the sensor channels,
// z_b = (1/M) * w_b^H y with [w_b]_m = exp(j*2*pi*m*b/M).
TfBeamTensor beamform(const TfBeamTensor& sensor_tf);

// Closed-form Dirichlet magnitude response of beam b toward angle theta at
// instantaneous frequency omega; 1 at the mainlobe (removable singularity).
// Non-integer b is allowed (used for mainlobe-overlap angles).
double beampattern(double theta, double omega, double beam, const ArrayConfig& cfg);

// Angle where beam b has unit response at frequency omega > 0, or nullopt
// when no such angle exists (arcsin argument outside [-1, 1]).
std::optional<double> mainlobe_angle(double omega, double beam, const ArrayConfig& cfg);

// Keeps cells whose magnitude is >= all neighbors at the same frame in the
// adjacent beams and adjacent frequency bins (beams wrap modulo M, frequency
// edges are clamped). include_same_beam_freq_neighbors additionally compares
// against (b, q+-1).
SupportSet local_maxima(const TfBeamTensor& beam_tf, bool include_same_beam_freq_neighbors = false);

// Drops members below the given percentile (linear interpolation on sorted
// values) of all retained magnitudes, pooled across beams.
SupportSet threshold_support(const SupportSet& support, double percentile);

// Beam with the largest member count; ties resolved toward the smaller index;
// nullopt when every beam is empty.
std::optional<int> dominant_beam(const SupportSet& support);

// Union of beams b-1, b, b+1 (modulo beam count); duplicate (p, q) keys keep
// the larger magnitude.
std::vector<SupportPoint> adjacent_union(const SupportSet& support, int beam);

}  // namespace ppsdoa
