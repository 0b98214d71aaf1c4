// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ppsdoa/beamspace.hpp"
#include "ppsdoa/mlcost.hpp"
#include "ppsdoa/optim.hpp"
#include "ppsdoa/rng.hpp"

namespace ppsdoa {

struct RansacOptions {
    int lambda = 500;                       // RANSAC iterations per source
    double angular_grid_step = deg2rad(1);  // spectral-search resolution
    std::uint64_t seed = 1;
    int window_width = 16;                  // STFT window H
    int dft_length = 64;                    // zero-padded DFT length F
    double epsilon_percentile = 90.0;       // support threshold
    bool strict_local_maxima = true;        // also compare same-beam frequency neighbors
    bool random_doa = false;                // search-free DOA sampling in the sequential estimator
    bool refine = true;                     // gradient refinement on/off
    int refine_starts = 8;                  // top distinct candidates tried as refinement starts
    int refine_starts_final = 24;           // starts for the last source (no later re-polish)
    OptimOptions optim;                     // refinement settings; scaling filled per scenario
};

struct Candidate {
    double theta = 0.0;
    rvec phi;
    double cost = 0.0;  // selection criterion value
    int ransac_iter = 0;
};

struct IterationDiag {
    int dominant_beam = -1;
    std::size_t support_size = 0;        // union pool around the dominant beam
    std::size_t total_support_size = 0;  // all beams together
    int candidates = 0;
    int skipped = 0;
    int selected_lambda = -1;
    double selected_theta = 0.0;
    rvec selected_phi;
    double selected_cost = 0.0;
    std::size_t corridor_size = 0;
    double residual_norm = 0.0;
    EstimateSet refined;  // estimates after this iteration
};

struct EstimationReport {
    EstimateSet estimates;  // discovery order
    std::vector<IterationDiag> iterations;
    bool failed = false;
    std::string failure_reason;
    double seconds = 0.0;
};

// One point drawn uniformly from each of `order` equal time partitions of the
// support (partition width ceil((N-H)/order), first partition starting at the
// lowest valid frame). Returns nullopt when a partition holds no point.
std::optional<std::vector<SupportPoint>> sample_tf_points(std::span<const SupportPoint> support,
                                                          int order, int snapshots,
                                                          int window_width, Rng& rng);

// Coefficients of the unique order-K phase polynomial whose instantaneous
// frequency passes through the K sampled time-frequency points; the carrier
// is added back onto the first coefficient. Returns nullopt when two points
// share a time index.
std::optional<rvec> fit_polynomial_exact(std::span<const SupportPoint> points, double delta,
                                         int dft_length, double omega_c);

// Mainlobe angles of the given beam swept along the candidate's instantaneous
// frequency over all snapshots, discretized at grid_step with both interval
// endpoints included. Empty when the mainlobe is undefined for every
// snapshot.
rvec angular_interval(std::span<const double> phi, int beam, const ArrayConfig& cfg,
                      double grid_step);

// Spectral search: grid angle minimizing the fast i-source cost, with its
// cost value. Ties resolve toward the smaller angle; nullopt when every grid
// point lies in the span of the existing estimates.
std::optional<std::pair<double, double>> candidate_doa_search(std::span<const double> grid,
                                                              std::span<const double> phi,
                                                              const ResidualState& state,
                                                              const ArrayConfig& cfg);

// Uniform draw from the grid; nullopt when the grid is empty.
std::optional<double> candidate_doa_random(std::span<const double> grid, Rng& rng);

enum class SelectionMode { ISource, SingleSource };

// Index of the winning candidate: lowest cost for ISource, highest matched
// filter value for SingleSource; ties resolve toward the earliest iteration.
std::optional<std::size_t> select_best(std::span<const Candidate> candidates, SelectionMode mode);

// Support points within one window-limited frequency bin 2*pi/(delta*H) of
// the estimated instantaneous frequency (carrier removed to match the
// baseband STFT grid).
std::vector<SupportPoint> corridor_set(std::span<const SupportPoint> support,
                                       std::span<const double> phi, double delta,
                                       int window_width, int dft_length, double omega_c);

// Set difference by (p, q) keys.
std::vector<SupportPoint> remove_corridor(std::span<const SupportPoint> support,
                                          std::span<const SupportPoint> corridor);

// Least-squares polynomial refit over the corridor points; nullopt when the
// corridor has too few points (caller keeps the RANSAC estimate).
std::optional<rvec> refit_ls(std::span<const SupportPoint> corridor, double delta, int dft_length,
                             double omega_c, int order);

// Sequential estimator: per source, beamspace support of the current
// residual, RANSAC candidate generation with spectral DOA search, selection
// by the fast i-source cost, joint gradient refinement, residual update.
EstimationReport estimate_sequential(const cvec& x, const ArrayConfig& cfg, int order,
                                     int num_sources, const RansacOptions& opts);

// Low-cost variant: beamspace computed once, random DOA sampling, selection
// by the matched-filter value, corridor-based source elimination with LS
// refit, one final joint refinement.
EstimationReport estimate_lowcost(const cvec& x, const ArrayConfig& cfg, int order,
                                  int num_sources, const RansacOptions& opts);

}  // namespace ppsdoa
