// SPDX-License-Identifier: Apache-2.0
#include "ppsdoa/estimators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace ppsdoa {

namespace {

int partition_origin(int snapshots, int window_width) {
    return -((snapshots - window_width + 1) / 2);  // -ceil((N-H)/2)
}

int partition_width(int snapshots, int window_width, int order) {
    return (snapshots - window_width + order - 1) / order;  // ceil((N-H)/K)
}

// support points bucketed into the `order` time partitions
std::vector<std::vector<SupportPoint>> partition_support(std::span<const SupportPoint> support,
                                                         int order, int snapshots,
                                                         int window_width) {
    const int p0 = partition_origin(snapshots, window_width);
    const int width = partition_width(snapshots, window_width, order);
    std::vector<std::vector<SupportPoint>> buckets(static_cast<std::size_t>(order));
    for (const SupportPoint& pt : support) {
        const int rel = pt.p - p0;
        if (rel < 0) continue;
        const int k = rel / width;
        if (k >= order) continue;
        buckets[std::size_t(k)].push_back(pt);
    }
    return buckets;
}

std::optional<std::vector<SupportPoint>> draw_from_partitions(
    const std::vector<std::vector<SupportPoint>>& buckets, Rng& rng) {
    std::vector<SupportPoint> out;
    out.reserve(buckets.size());
    for (const auto& bucket : buckets) {
        if (bucket.empty()) return std::nullopt;
        out.push_back(bucket[rng.pick(bucket.size())]);
    }
    return out;
}

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

rvec refinement_scaling(int count, int order, const ArrayConfig& cfg) {
    // theta in radians stays unscaled; phi_k is measured by the phase it
    // contributes at the edge of the observation window.
    const double half_span = 0.5 * cfg.snapshots * cfg.delta;
    rvec scale(std::size_t(count) * (order + 1));
    std::size_t idx = 0;
    for (int l = 0; l < count; ++l) {
        scale[idx++] = 1.0;
        double pw = 1.0;
        for (int k = 1; k <= order; ++k) {
            pw /= half_span;
            scale[idx++] = pw;
        }
    }
    return scale;
}

rvec pack_estimates(const EstimateSet& est) {
    rvec x;
    x.reserve(std::size_t(est.count()) * (est.order() + 1));
    for (int l = 0; l < est.count(); ++l) {
        x.push_back(est.thetas[l]);
        x.insert(x.end(), est.phis[l].begin(), est.phis[l].end());
    }
    return x;
}

EstimateSet unpack_estimates(const rvec& x, int count, int order) {
    EstimateSet est;
    std::size_t idx = 0;
    for (int l = 0; l < count; ++l) {
        est.thetas.push_back(x[idx++]);
        est.phis.emplace_back(x.begin() + idx, x.begin() + idx + order);
        idx += std::size_t(order);
    }
    return est;
}

// Joint gradient refinement of all current estimates on the concentrated ML
// cost. Returns the initial set unchanged when the start is degenerate or the
// search fails to improve.
EstimateSet refine_estimates(const EstimateSet& init, const cvec& x, const ArrayConfig& cfg,
                             const RansacOptions& opts) {
    const int count = init.count();
    const int order = init.order();
    auto objective = [&](const rvec& v) {
        try {
            return isource_cost_direct(unpack_estimates(v, count, order), x, cfg);
        } catch (const degenerate_geometry_error&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    auto gradient = [&](const rvec& v) {
        return cost_gradient(unpack_estimates(v, count, order), x, cfg);
    };

    OptimOptions oo = opts.optim;
    oo.scaling = refinement_scaling(count, order, cfg);
    try {
        const rvec x0 = pack_estimates(init);
        const double f0 = objective(x0);
        const OptimResult res = bfgs_minimize(objective, gradient, x0, oo);
        if (res.fx <= f0) {
            EstimateSet refined = unpack_estimates(res.x, count, order);
            // the response depends on theta only through sin(theta); fold
            // iterates that wandered outside the field of view back into it
            for (double& theta : refined.thetas) theta = std::asin(std::sin(theta));
            return refined;
        }
    } catch (const std::invalid_argument&) {
        // degenerate start; keep the RANSAC values
    }
    return init;
}

void fill_amplitudes(EstimateSet& est, const cvec& x, const ArrayConfig& cfg) {
    try {
        est.amplitudes = concentrate_amplitudes(est, x, cfg);
    } catch (const degenerate_geometry_error&) {
        est.amplitudes.reset();
    }
}

// removes the corridor keys from the beams that contributed to the pool
// (the dominant beam and its neighbors); distant beams keep their points
SupportSet remove_corridor_per_beam(const SupportSet& support,
                                    std::span<const SupportPoint> corridor, int beam) {
    const int m_count = int(support.beams.size());
    std::vector<bool> affected(support.beams.size(), false);
    for (int d : {-1, 0, 1}) affected[std::size_t(((beam + d) % m_count + m_count) % m_count)] = true;
    SupportSet out;
    out.beams.resize(support.beams.size());
    std::unordered_set<long long> keys;
    keys.reserve(corridor.size());
    for (const SupportPoint& pt : corridor)
        keys.insert((long long)pt.p * 1000003LL + pt.q);
    for (std::size_t b = 0; b < support.beams.size(); ++b)
        for (const SupportPoint& pt : support.beams[b])
            if (!affected[b] || !keys.count((long long)pt.p * 1000003LL + pt.q))
                out.beams[b].push_back(pt);
    return out;
}

}  // namespace

std::optional<std::vector<SupportPoint>> sample_tf_points(std::span<const SupportPoint> support,
                                                          int order, int snapshots,
                                                          int window_width, Rng& rng) {
    const auto buckets = partition_support(support, order, snapshots, window_width);
    return draw_from_partitions(buckets, rng);
}

std::optional<rvec> fit_polynomial_exact(std::span<const SupportPoint> points, double delta,
                                         int dft_length, double omega_c) {
    const int order = int(points.size());
    RMatrix a(order, order);
    rvec b(order);
    for (int r = 0; r < order; ++r) {
        const double t = delta * points[r].p;
        double pw = 1.0;
        for (int c = 0; c < order; ++c) {
            a.at(r, c) = double(c + 1) * pw;
            pw *= t;
        }
        b[r] = 2.0 * kPi * points[r].q / (delta * dft_length);
    }
    std::optional<rvec> phi = solve_linear(std::move(a), std::move(b));
    if (!phi) return std::nullopt;
    (*phi)[0] += omega_c;
    return phi;
}

rvec angular_interval(std::span<const double> phi, int beam, const ArrayConfig& cfg,
                      double grid_step) {
    // The beam attracts sources anywhere between its overlap angles with the
    // adjacent beams, so the interval spans the half-integer overlap tracks
    // around the mainlobe track, swept along the candidate's instantaneous
    // frequency.
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int n = cfg.n_min(); n <= cfg.n_max(); ++n) {
        const double omega = instantaneous_frequency(phi, cfg.delta * n);
        for (double b : {beam - 0.5, double(beam), beam + 0.5}) {
            const std::optional<double> angle = mainlobe_angle(omega, b, cfg);
            if (!angle) continue;
            lo = std::min(lo, *angle);
            hi = std::max(hi, *angle);
        }
    }
    if (!(lo <= hi)) return {};
    rvec grid;
    const int steps = int(std::floor((hi - lo) / grid_step + 1e-9));
    for (int j = 0; j <= steps; ++j) grid.push_back(lo + j * grid_step);
    if (grid.back() < hi - 1e-12 * std::max(1.0, std::abs(hi))) grid.push_back(hi);
    return grid;
}

std::optional<std::pair<double, double>> candidate_doa_search(std::span<const double> grid,
                                                              std::span<const double> phi,
                                                              const ResidualState& state,
                                                              const ArrayConfig& cfg) {
    std::optional<std::pair<double, double>> best;
    for (double theta : grid) {
        const std::optional<double> cost = isource_cost_fast(state, theta, phi, cfg);
        if (!cost) continue;
        if (!best || *cost < best->second) best = {theta, *cost};
    }
    return best;
}

std::optional<double> candidate_doa_random(std::span<const double> grid, Rng& rng) {
    if (grid.empty()) return std::nullopt;
    return grid[rng.pick(grid.size())];
}

std::optional<std::size_t> select_best(std::span<const Candidate> candidates,
                                       SelectionMode mode) {
    if (candidates.empty()) return std::nullopt;
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const bool better = (mode == SelectionMode::ISource)
                                ? candidates[i].cost < candidates[best].cost
                                : candidates[i].cost > candidates[best].cost;
        if (better) best = i;
    }
    return best;
}

std::vector<SupportPoint> corridor_set(std::span<const SupportPoint> support,
                                       std::span<const double> phi, double delta,
                                       int window_width, int dft_length, double omega_c) {
    rvec baseband(phi.begin(), phi.end());
    if (!baseband.empty()) baseband[0] -= omega_c;
    const double bin = 2.0 * kPi / (delta * window_width);
    std::vector<SupportPoint> out;
    for (const SupportPoint& pt : support) {
        const double predicted = instantaneous_frequency(baseband, delta * pt.p);
        const double omega_q = 2.0 * kPi * pt.q / (delta * dft_length);
        if (std::abs(predicted - omega_q) <= bin) out.push_back(pt);
    }
    return out;
}

std::vector<SupportPoint> remove_corridor(std::span<const SupportPoint> support,
                                          std::span<const SupportPoint> corridor) {
    std::unordered_set<long long> keys;
    keys.reserve(corridor.size());
    for (const SupportPoint& pt : corridor)
        keys.insert((long long)pt.p * 1000003LL + pt.q);
    std::vector<SupportPoint> out;
    for (const SupportPoint& pt : support)
        if (!keys.count((long long)pt.p * 1000003LL + pt.q)) out.push_back(pt);
    return out;
}

std::optional<rvec> refit_ls(std::span<const SupportPoint> corridor, double delta, int dft_length,
                             double omega_c, int order) {
    if (int(corridor.size()) <= order) return std::nullopt;
    RMatrix a(corridor.size(), std::size_t(order));
    rvec b(corridor.size());
    for (std::size_t r = 0; r < corridor.size(); ++r) {
        const double t = delta * corridor[r].p;
        double pw = 1.0;
        for (int c = 0; c < order; ++c) {
            a.at(r, c) = double(c + 1) * pw;
            pw *= t;
        }
        b[r] = 2.0 * kPi * corridor[r].q / (delta * dft_length);
    }
    std::optional<rvec> phi = lstsq(std::move(a), std::move(b));
    if (!phi) return std::nullopt;
    (*phi)[0] += omega_c;
    return phi;
}

EstimationReport estimate_sequential(const cvec& x, const ArrayConfig& cfg, int order,
                                     int num_sources, const RansacOptions& opts) {
    const double t_start = now_seconds();
    EstimationReport report;
    ResidualState state = ResidualState::from_measurement(x);

    for (int i = 1; i <= num_sources; ++i) {
        IterationDiag diag;
        const SnapshotBlock block = SnapshotBlock::from_stacked(cfg, state.residual);
        const TfBeamTensor sensor_tf =
            stft_per_sensor(block, opts.window_width, opts.dft_length);
        const TfBeamTensor beam_tf = beamform(sensor_tf);
        const SupportSet maxima = local_maxima(beam_tf, opts.strict_local_maxima);
        const SupportSet support = threshold_support(maxima, opts.epsilon_percentile);

        const std::optional<int> beam = dominant_beam(support);
        if (!beam) {
            report.failed = true;
            report.failure_reason = "no support points left for source " + std::to_string(i);
            break;
        }
        diag.dominant_beam = *beam;
        diag.total_support_size = support.total();
        const std::vector<SupportPoint> pool = adjacent_union(support, *beam);
        diag.support_size = pool.size();
        const auto buckets = partition_support(pool, order, cfg.snapshots, opts.window_width);

        std::vector<Candidate> candidates;
        for (int lam = 1; lam <= opts.lambda; ++lam) {
            Rng rng(derive_seed(opts.seed, std::uint64_t(i), std::uint64_t(lam)));
            const auto pts = draw_from_partitions(buckets, rng);
            if (!pts) {
                ++diag.skipped;
                continue;
            }
            const auto phi = fit_polynomial_exact(*pts, cfg.delta, opts.dft_length, cfg.omega_c);
            if (!phi) {
                ++diag.skipped;
                continue;
            }
            const rvec grid = angular_interval(*phi, *beam, cfg, opts.angular_grid_step);
            if (grid.empty()) {
                ++diag.skipped;
                continue;
            }
            if (opts.random_doa) {
                const std::optional<double> theta = candidate_doa_random(grid, rng);
                const std::optional<double> cost = isource_cost_fast(state, *theta, *phi, cfg);
                if (!cost) {
                    ++diag.skipped;
                    continue;
                }
                candidates.push_back({*theta, *phi, *cost, lam});
            } else {
                const auto found = candidate_doa_search(grid, *phi, state, cfg);
                if (!found) {
                    ++diag.skipped;
                    continue;
                }
                candidates.push_back({found->first, *phi, found->second, lam});
            }
        }
        diag.candidates = int(candidates.size());

        const std::optional<std::size_t> best = select_best(candidates, SelectionMode::ISource);
        if (!best) {
            report.failed = true;
            report.failure_reason = "no usable RANSAC candidate for source " + std::to_string(i);
            break;
        }
        const Candidate& won = candidates[*best];
        diag.selected_lambda = won.ransac_iter;
        diag.selected_theta = won.theta;
        diag.selected_phi = won.phi;
        diag.selected_cost = won.cost;

        if (!opts.refine) {
            report.estimates.append(won.theta, won.phi);
        } else {
            // The winning candidate is only grid-accurate and occasionally
            // starts the local search in a neighboring basin. Refinement and
            // selection minimize the same criterion, so try the few best
            // candidates as starts and keep the lowest refined cost.
            std::vector<std::size_t> order(candidates.size());
            for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return candidates[a].cost < candidates[b].cost;
            });
            const int wanted_starts =
                (i == num_sources) ? std::max(opts.refine_starts_final, opts.refine_starts)
                                   : opts.refine_starts;
            const std::size_t max_starts =
                std::min<std::size_t>(std::max(wanted_starts, 1), order.size());
            // skip starts that nearly duplicate an already-tried candidate:
            // they would refine into the same basin
            const double theta_eps = 0.5 * opts.angular_grid_step;
            const double phi_eps = kPi / (cfg.delta * opts.dft_length);
            std::vector<std::size_t> tried;
            EstimateSet best_est;
            double best_cost = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < order.size() && tried.size() < max_starts; ++c) {
                const Candidate& cand = candidates[order[c]];
                bool duplicate = false;
                for (std::size_t prev : tried) {
                    const Candidate& other = candidates[prev];
                    bool same = std::abs(cand.theta - other.theta) <= theta_eps;
                    for (std::size_t k = 0; same && k < cand.phi.size(); ++k)
                        same = std::abs(cand.phi[k] - other.phi[k]) <= phi_eps;
                    if (same) {
                        duplicate = true;
                        break;
                    }
                }
                if (duplicate) continue;
                tried.push_back(order[c]);
                EstimateSet grown = report.estimates;
                grown.append(cand.theta, cand.phi);
                const EstimateSet refined = refine_estimates(grown, x, cfg, opts);
                double cost;
                try {
                    cost = isource_cost_direct(refined, x, cfg);
                } catch (const degenerate_geometry_error&) {
                    continue;
                }
                if (cost < best_cost) {
                    best_cost = cost;
                    best_est = refined;
                }
            }
            if (!std::isfinite(best_cost)) {
                report.failed = true;
                report.failure_reason =
                    "refinement degenerate for source " + std::to_string(i);
                break;
            }
            report.estimates = best_est;
        }

        try {
            state = residual_update(report.estimates, x, cfg);
        } catch (const degenerate_geometry_error&) {
            report.failed = true;
            report.failure_reason = "estimates collapsed at source " + std::to_string(i);
            break;
        }
        diag.residual_norm = std::sqrt(state.residual_norm_sq);
        diag.refined = report.estimates;
        report.iterations.push_back(diag);
    }

    if (!report.failed) fill_amplitudes(report.estimates, x, cfg);
    report.seconds = now_seconds() - t_start;
    return report;
}

EstimationReport estimate_lowcost(const cvec& x, const ArrayConfig& cfg, int order,
                                  int num_sources, const RansacOptions& opts) {
    const double t_start = now_seconds();
    EstimationReport report;

    const SnapshotBlock block = SnapshotBlock::from_stacked(cfg, x);
    const TfBeamTensor sensor_tf = stft_per_sensor(block, opts.window_width, opts.dft_length);
    const TfBeamTensor beam_tf = beamform(sensor_tf);
    const SupportSet maxima = local_maxima(beam_tf, opts.strict_local_maxima);
    SupportSet support = threshold_support(maxima, opts.epsilon_percentile);

    for (int i = 1; i <= num_sources; ++i) {
        IterationDiag diag;
        const std::optional<int> beam = dominant_beam(support);
        if (!beam) {
            report.failed = true;
            report.failure_reason = "no support points left for source " + std::to_string(i);
            break;
        }
        diag.dominant_beam = *beam;
        diag.total_support_size = support.total();
        const std::vector<SupportPoint> pool = adjacent_union(support, *beam);
        diag.support_size = pool.size();
        const auto buckets = partition_support(pool, order, cfg.snapshots, opts.window_width);

        std::vector<Candidate> candidates;
        for (int lam = 1; lam <= opts.lambda; ++lam) {
            Rng rng(derive_seed(opts.seed, std::uint64_t(i), std::uint64_t(lam)));
            const auto pts = draw_from_partitions(buckets, rng);
            if (!pts) {
                ++diag.skipped;
                continue;
            }
            const auto phi = fit_polynomial_exact(*pts, cfg.delta, opts.dft_length, cfg.omega_c);
            if (!phi) {
                ++diag.skipped;
                continue;
            }
            const rvec grid = angular_interval(*phi, *beam, cfg, opts.angular_grid_step);
            if (grid.empty()) {
                ++diag.skipped;
                continue;
            }
            const std::optional<double> theta = candidate_doa_random(grid, rng);
            candidates.push_back({*theta, *phi, pp_beamformer(*theta, *phi, x, cfg), lam});
        }
        diag.candidates = int(candidates.size());

        const std::optional<std::size_t> best =
            select_best(candidates, SelectionMode::SingleSource);
        if (!best) {
            report.failed = true;
            report.failure_reason = "no usable RANSAC candidate for source " + std::to_string(i);
            break;
        }
        const Candidate& won = candidates[*best];
        diag.selected_lambda = won.ransac_iter;
        diag.selected_theta = won.theta;
        diag.selected_phi = won.phi;
        diag.selected_cost = won.cost;

        const std::vector<SupportPoint> corridor =
            corridor_set(pool, won.phi, cfg.delta, opts.window_width, opts.dft_length,
                         cfg.omega_c);
        diag.corridor_size = corridor.size();
        const rvec phi_final =
            refit_ls(corridor, cfg.delta, opts.dft_length, cfg.omega_c, order).value_or(won.phi);
        report.estimates.append(won.theta, phi_final);
        support = remove_corridor_per_beam(support, corridor, *beam);

        try {
            diag.residual_norm =
                std::sqrt(negative_log_likelihood(report.estimates, x, cfg));
        } catch (const degenerate_geometry_error&) {
            diag.residual_norm = std::numeric_limits<double>::quiet_NaN();
        }
        diag.refined = report.estimates;
        report.iterations.push_back(diag);
    }

    if (!report.failed) {
        if (opts.refine)
            report.estimates = refine_estimates(report.estimates, x, cfg, opts);
        if (!report.iterations.empty())
            report.iterations.back().refined = report.estimates;
        fill_amplitudes(report.estimates, x, cfg);
    }
    report.seconds = now_seconds() - t_start;
    return report;
}

}  // namespace ppsdoa
