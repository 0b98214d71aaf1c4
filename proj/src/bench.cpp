// SPDX-License-Identifier: Apache-2.0
#include "ppsdoa/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

namespace ppsdoa {

EstimatorKind estimator_from_name(const std::string& name) {
    if (name == "alg1") return EstimatorKind::Alg1;
    if (name == "alg2") return EstimatorKind::Alg2;
    if (name == "alg1-random-doa") return EstimatorKind::Alg1RandomDoa;
    if (name == "alg1-no-refine") return EstimatorKind::Alg1NoRefine;
    if (name == "alg2-no-refine") return EstimatorKind::Alg2NoRefine;
    throw config_error("unknown estimator: " + name);
}

std::string estimator_name(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::Alg1: return "alg1";
        case EstimatorKind::Alg2: return "alg2";
        case EstimatorKind::Alg1RandomDoa: return "alg1-random-doa";
        case EstimatorKind::Alg1NoRefine: return "alg1-no-refine";
        case EstimatorKind::Alg2NoRefine: return "alg2-no-refine";
    }
    return "alg1";
}

std::string sweep_column_name(SweepSpec::Kind kind) {
    switch (kind) {
        case SweepSpec::Kind::DeltaTheta: return "delta_theta_deg";
        case SweepSpec::Kind::DeltaPhi1: return "delta_phi1_rad_s";
        case SweepSpec::Kind::DeltaPhi2: return "delta_phi2_rad_s2";
        case SweepSpec::Kind::Sensors: return "sensors";
        default: return "snr_db";
    }
}

ScenarioConfig four_source_demo() {
    ScenarioConfig scen;
    scen.array = ArrayConfig{8, 1.5, 1500.0, 0.01, 128, 2.0 * kPi * 450.0};
    const double fc = 450.0;
    scen.sources = {
        {deg2rad(-25.0), {2.0 * kPi * (fc - 16.0), -12.0, 175.0, 12.0}, {1.0, 0.0}},
        {deg2rad(-8.0), {2.0 * kPi * fc, 150.0, 0.0, 0.0}, {0.0, 1.0}},
        {deg2rad(8.0), {2.0 * kPi * fc, -150.0, 0.0, 0.0}, {-1.0, 0.0}},
        {deg2rad(25.0), {2.0 * kPi * (fc + 16.0), 12.0, -175.0, -12.0}, {0.0, -1.0}},
    };
    return scen;
}

ScenarioConfig two_chirp_demo(double delta_theta, double delta_phi1, double delta_phi2) {
    ScenarioConfig scen;
    scen.array = ArrayConfig{8, 1.5, 1500.0, 0.01, 128, 2.0 * kPi * 450.0};
    const double phi1 = 2.0 * kPi * (450.0 + 16.0);
    scen.sources = {
        {deg2rad(8.0), {phi1, -150.0}, {1.0, 0.0}},
        {deg2rad(8.0) + delta_theta, {phi1 + delta_phi1, -150.0 + delta_phi2}, {0.0, 1.0}},
    };
    scen.snr_db = 20.0;
    return scen;
}

ScenarioConfig apply_sweep(const ScenarioConfig& base, SweepSpec::Kind kind, double value) {
    ScenarioConfig scen = base;
    switch (kind) {
        case SweepSpec::Kind::None:
        case SweepSpec::Kind::Snr:
            scen.snr_db = value;
            break;
        case SweepSpec::Kind::Sensors:
            scen.array.sensors = int(std::lround(value));
            break;
        case SweepSpec::Kind::DeltaTheta:
            if (scen.sources.size() < 2) throw config_error("delta_theta sweep needs 2 sources");
            scen.sources[1].theta = scen.sources[0].theta + deg2rad(value);
            break;
        case SweepSpec::Kind::DeltaPhi1:
            if (scen.sources.size() < 2) throw config_error("delta_phi1 sweep needs 2 sources");
            scen.sources[1].phi[0] = scen.sources[0].phi[0] + value;
            break;
        case SweepSpec::Kind::DeltaPhi2:
            if (scen.sources.size() < 2 || scen.order() < 2)
                throw config_error("delta_phi2 sweep needs 2 sources of order >= 2");
            scen.sources[1].phi[1] = scen.sources[0].phi[1] + value;
            break;
    }
    return scen;
}

std::vector<int> associate_estimates(const EstimateSet& truth, const EstimateSet& est,
                                     const CrbReport& crb) {
    const int count = truth.count();
    if (est.count() != count)
        throw std::invalid_argument("associate_estimates: source counts differ");
    if (count > 8) throw std::invalid_argument("associate_estimates: too many sources");

    const int order = truth.order();
    auto pair_cost = [&](int l, int j) {
        const double dt = truth.thetas[l] - est.thetas[j];
        double c = dt * dt / std::max(crb.theta_std[l] * crb.theta_std[l], 1e-300);
        for (int k = 0; k < order; ++k) {
            const double dp = truth.phis[l][k] - est.phis[j][k];
            c += dp * dp / std::max(crb.phi_std[l][k] * crb.phi_std[l][k], 1e-300);
        }
        return c;
    };

    std::vector<int> perm(count), best(count);
    for (int i = 0; i < count; ++i) perm[i] = i;
    best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (int l = 0; l < count; ++l) c += pair_cost(l, perm[l]);
        if (c < best_cost) {
            best_cost = c;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

EstimationReport run_estimator(const ScenarioConfig& scen, const cvec& x) {
    RansacOptions opts = scen.ransac;
    const int order = scen.order();
    const int count = int(scen.sources.size());
    switch (scen.estimator) {
        case EstimatorKind::Alg1:
            break;
        case EstimatorKind::Alg1RandomDoa:
            opts.random_doa = true;
            break;
        case EstimatorKind::Alg1NoRefine:
            opts.refine = false;
            break;
        case EstimatorKind::Alg2:
        case EstimatorKind::Alg2NoRefine:
            opts.refine = (scen.estimator == EstimatorKind::Alg2);
            return estimate_lowcost(x, scen.array, order, count, opts);
    }
    return estimate_sequential(x, scen.array, order, count, opts);
}

namespace {

struct RunOutcome {
    bool ok = false;
    rvec sq_err;  // [theta, phi_1..K], summed over sources
    double seconds = 0.0;
};

RunOutcome single_run(const ScenarioConfig& scen, const EstimateSet& truth, const CrbReport& crb,
                      std::uint64_t seed) {
    const int order = scen.order();
    RunOutcome out;
    const SnapshotBlock block =
        generate_snapshots(scen.array, scen.sources, scen.noise_power(), seed);
    const EstimationReport rep = run_estimator(scen, block.data);
    out.seconds = rep.seconds;
    if (rep.failed || rep.estimates.count() != int(scen.sources.size())) return out;

    const std::vector<int> perm = associate_estimates(truth, rep.estimates, crb);
    out.sq_err.assign(std::size_t(order) + 1, 0.0);
    for (int l = 0; l < truth.count(); ++l) {
        const double dt = truth.thetas[l] - rep.estimates.thetas[perm[l]];
        out.sq_err[0] += dt * dt;
        for (int k = 0; k < order; ++k) {
            const double dp = truth.phis[l][k] - rep.estimates.phis[perm[l]][k];
            out.sq_err[std::size_t(k) + 1] += dp * dp;
        }
    }
    out.ok = true;
    return out;
}

}  // namespace

RmseTable run_monte_carlo(const ScenarioConfig& config) {
    SweepSpec sweep = config.sweep;
    if (sweep.kind == SweepSpec::Kind::None || sweep.values.empty()) {
        sweep.kind = SweepSpec::Kind::Snr;
        sweep.values = {config.snr_db};
    }

    RmseTable table;
    table.sweep_kind = sweep.kind;
    table.order = config.order();
    const int order = config.order();
    const int source_count = int(config.sources.size());

    for (std::size_t row_idx = 0; row_idx < sweep.values.size(); ++row_idx) {
        const ScenarioConfig scen = apply_sweep(config, sweep.kind, sweep.values[row_idx]);
        EstimateSet truth;
        for (const SourceParams& s : scen.sources) truth.append(s.theta, s.phi);
        const CrbReport crb =
            crb_bounds(fisher_information(scen.array, scen.sources, scen.noise_power()),
                       source_count, order);

        const int runs = scen.mc_runs;
        std::vector<RunOutcome> outcomes(static_cast<std::size_t>(runs));
        std::atomic<int> next{0};
        const int workers = std::max(1, scen.workers);
        auto worker = [&]() {
            for (int r = next.fetch_add(1); r < runs; r = next.fetch_add(1))
                outcomes[std::size_t(r)] =
                    single_run(scen, truth, crb, derive_seed(scen.master_seed, row_idx, r));
        };
        if (workers == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
            for (std::thread& t : pool) t.join();
        }

        RmseRow row;
        row.sweep_value = sweep.values[row_idx];
        row.runs = runs;
        rvec total_sq(std::size_t(order) + 1, 0.0);
        double total_time = 0.0;
        int successes = 0;
        for (const RunOutcome& o : outcomes) {
            total_time += o.seconds;
            if (!o.ok) {
                ++row.failures;
                continue;
            }
            ++successes;
            for (std::size_t j = 0; j < total_sq.size(); ++j) total_sq[j] += o.sq_err[j];
        }
        row.mean_time_s = runs > 0 ? total_time / runs : 0.0;
        row.rmse.assign(std::size_t(order) + 1, std::numeric_limits<double>::infinity());
        if (successes > 0)
            for (std::size_t j = 0; j < total_sq.size(); ++j)
                row.rmse[j] = std::sqrt(total_sq[j] / (double(successes) * source_count));
        row.crb.assign(std::size_t(order) + 1, 0.0);
        for (int l = 0; l < source_count; ++l) {
            row.crb[0] += crb.theta_std[l] * crb.theta_std[l];
            for (int k = 0; k < order; ++k)
                row.crb[std::size_t(k) + 1] += crb.phi_std[l][k] * crb.phi_std[l][k];
        }
        for (double& v : row.crb) v = std::sqrt(v / source_count);
        table.rows.push_back(std::move(row));
    }
    return table;
}

namespace {

std::string format_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string phi_unit(int k) {
    if (k == 1) return "rad_s";
    return "rad_s" + std::to_string(k);
}

}  // namespace

std::string rmse_table_csv(const RmseTable& table, bool include_timing) {
    std::string out = sweep_column_name(table.sweep_kind);
    out += ",rmse_theta_deg";
    for (int k = 1; k <= table.order; ++k) out += ",rmse_phi" + std::to_string(k) + "_" + phi_unit(k);
    out += ",crb_theta_deg";
    for (int k = 1; k <= table.order; ++k) out += ",crb_phi" + std::to_string(k) + "_" + phi_unit(k);
    if (include_timing) out += ",mean_time_s";
    out += ",failures\n";

    for (const RmseRow& row : table.rows) {
        out += format_g(row.sweep_value);
        out += "," + format_g(rad2deg(row.rmse[0]));
        for (std::size_t k = 1; k < row.rmse.size(); ++k) out += "," + format_g(row.rmse[k]);
        out += "," + format_g(rad2deg(row.crb[0]));
        for (std::size_t k = 1; k < row.crb.size(); ++k) out += "," + format_g(row.crb[k]);
        if (include_timing) out += "," + format_g(row.mean_time_s);
        out += "," + std::to_string(row.failures) + "\n";
    }
    return out;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text) {
    const std::string t = trim(text);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end == t.c_str() || *end != '\0') throw config_error("bad number: '" + text + "'");
    return v;
}

rvec parse_csv_numbers(const std::string& text) {
    rvec out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(item));
    return out;
}

SweepSpec::Kind sweep_kind_from_name(const std::string& name) {
    if (name == "snr") return SweepSpec::Kind::Snr;
    if (name == "delta_theta") return SweepSpec::Kind::DeltaTheta;
    if (name == "delta_phi1") return SweepSpec::Kind::DeltaPhi1;
    if (name == "delta_phi2") return SweepSpec::Kind::DeltaPhi2;
    if (name == "sensors") return SweepSpec::Kind::Sensors;
    if (name == "none") return SweepSpec::Kind::None;
    throw config_error("unknown sweep kind: " + name);
}

}  // namespace

rvec parse_value_list(const std::string& text) {
    const std::string t = trim(text);
    const auto c1 = t.find(':');
    if (c1 == std::string::npos) return parse_csv_numbers(t);
    const auto c2 = t.find(':', c1 + 1);
    if (c2 == std::string::npos) throw config_error("range needs lo:step:hi: '" + text + "'");
    const double lo = parse_number(t.substr(0, c1));
    const double step = parse_number(t.substr(c1 + 1, c2 - c1 - 1));
    const double hi = parse_number(t.substr(c2 + 1));
    if (!(step > 0.0)) throw config_error("range step must be positive: '" + text + "'");
    rvec out;
    for (double v = lo; v <= hi + 1e-9 * std::max(1.0, std::abs(hi)); v += step) out.push_back(v);
    return out;
}

ScenarioConfig parse_config_text(const std::string& text) {
    ScenarioConfig scen;
    std::map<int, SourceParams> sources;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("line " + std::to_string(line_no) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "array.sensors") scen.array.sensors = int(parse_number(value));
        else if (key == "array.spacing") scen.array.spacing = parse_number(value);
        else if (key == "array.speed") scen.array.speed = parse_number(value);
        else if (key == "array.delta") scen.array.delta = parse_number(value);
        else if (key == "array.snapshots") scen.array.snapshots = int(parse_number(value));
        else if (key == "array.carrier_hz") scen.array.omega_c = 2.0 * kPi * parse_number(value);
        else if (key == "snr_db") scen.snr_db = parse_number(value);
        else if (key == "runs") scen.mc_runs = int(parse_number(value));
        else if (key == "estimator") scen.estimator = estimator_from_name(value);
        else if (key == "seed") scen.master_seed = std::uint64_t(parse_number(value));
        else if (key == "workers") scen.workers = int(parse_number(value));
        else if (key == "ransac.lambda") scen.ransac.lambda = int(parse_number(value));
        else if (key == "ransac.grid_step_deg")
            scen.ransac.angular_grid_step = deg2rad(parse_number(value));
        else if (key == "ransac.window") scen.ransac.window_width = int(parse_number(value));
        else if (key == "ransac.dft") scen.ransac.dft_length = int(parse_number(value));
        else if (key == "ransac.percentile") scen.ransac.epsilon_percentile = parse_number(value);
        else if (key == "sweep.kind") scen.sweep.kind = sweep_kind_from_name(value);
        else if (key == "sweep.values") scen.sweep.values = parse_value_list(value);
        else if (key.rfind("source.", 0) == 0) {
            const auto dot = key.find('.', 7);
            if (dot == std::string::npos)
                throw config_error("line " + std::to_string(line_no) + ": bad source key");
            const int idx = int(parse_number(key.substr(7, dot - 7)));
            const std::string field = key.substr(dot + 1);
            SourceParams& src = sources[idx];
            if (field == "theta_deg") src.theta = deg2rad(parse_number(value));
            else if (field == "phi") src.phi = parse_csv_numbers(value);
            else if (field == "amp") {
                const rvec re_im = parse_csv_numbers(value);
                if (re_im.size() != 2)
                    throw config_error("line " + std::to_string(line_no) + ": amp needs re,im");
                src.amplitude = {re_im[0], re_im[1]};
            } else {
                throw config_error("line " + std::to_string(line_no) +
                                   ": unknown source field '" + field + "'");
            }
        } else {
            throw config_error("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    for (const auto& [idx, src] : sources) {
        if (src.phi.empty())
            throw config_error("source " + std::to_string(idx) + " has no phi coefficients");
        scen.sources.push_back(src);
    }
    if (!scen.sources.empty())
        for (const SourceParams& s : scen.sources)
            if (s.phi.size() != scen.sources.front().phi.size())
                throw config_error("all sources must share the polynomial order");
    scen.array.validate();
    return scen;
}

ScenarioConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

}  // namespace ppsdoa
