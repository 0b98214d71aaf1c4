// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ppsdoa/crb.hpp"
#include "ppsdoa/estimators.hpp"

namespace ppsdoa {

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class EstimatorKind { Alg1, Alg2, Alg1RandomDoa, Alg1NoRefine, Alg2NoRefine };

EstimatorKind estimator_from_name(const std::string& name);  // throws config_error
std::string estimator_name(EstimatorKind kind);

struct SweepSpec {
    enum class Kind { None, Snr, DeltaTheta, DeltaPhi1, DeltaPhi2, Sensors };
    Kind kind = Kind::None;
    rvec values;  // delta_theta in degrees, sensors as integers
};

std::string sweep_column_name(SweepSpec::Kind kind);

struct ScenarioConfig {
    ArrayConfig array;
    std::vector<SourceParams> sources;
    double snr_db = 10.0;
    int mc_runs = 100;
    EstimatorKind estimator = EstimatorKind::Alg1;
    RansacOptions ransac;
    SweepSpec sweep;
    std::uint64_t master_seed = 1;
    int workers = 1;

    double noise_power() const { return std::pow(10.0, -snr_db / 10.0); }
    int order() const { return sources.empty() ? 0 : int(sources.front().phi.size()); }
};

struct RmseRow {
    double sweep_value = 0.0;
    rvec rmse;       // [theta (rad), phi_1 .. phi_K]
    rvec crb;        // same layout, RMS-pooled over sources
    double mean_time_s = 0.0;
    int failures = 0;
    int runs = 0;
};

struct RmseTable {
    SweepSpec::Kind sweep_kind = SweepSpec::Kind::Snr;
    int order = 0;
    std::vector<RmseRow> rows;
};

// Demo scenario: four fourth-order sources at the mainlobe-overlap angles of
// an 8-sensor sonar-style array.
ScenarioConfig four_source_demo();

// Two quadratic-phase sources; the second one offset from the first by the
// given angle (radians), initial frequency and chirp rate deltas.
ScenarioConfig two_chirp_demo(double delta_theta, double delta_phi1, double delta_phi2);

// Applies one sweep value to a base scenario (adjusting source 2 or the
// array), returning the concrete scenario for that row.
ScenarioConfig apply_sweep(const ScenarioConfig& base, SweepSpec::Kind kind, double value);

// Min-cost matching of estimates to true sources over all permutations,
// weighting each squared error by the parameter's CRB variance. Returns
// perm[l] = index of the estimate assigned to true source l.
std::vector<int> associate_estimates(const EstimateSet& truth, const EstimateSet& est,
                                     const CrbReport& crb);

EstimationReport run_estimator(const ScenarioConfig& scen, const cvec& x);

// Monte-Carlo sweep: R runs per row with per-run seeds derived from the
// master seed, pooled RMSE per parameter, CRB reference columns, mean wall
// time, failure count. Runs execute on `workers` threads; accumulation order
// is fixed by run index, so results do not depend on the worker count.
RmseTable run_monte_carlo(const ScenarioConfig& config);

// CSV with a header row; timing column optional so that output stays
// byte-reproducible when requested.
std::string rmse_table_csv(const RmseTable& table, bool include_timing);

// Flat key=value scenario file (angles in degrees, '#' comments).
ScenarioConfig parse_config_file(const std::string& path);
ScenarioConfig parse_config_text(const std::string& text);

// "lo:step:hi" or comma list
rvec parse_value_list(const std::string& text);

}  // namespace ppsdoa
