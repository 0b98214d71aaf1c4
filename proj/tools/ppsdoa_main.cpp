// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: scenario simulation, single-shot estimation,
// Monte-Carlo sweeps, CRB tables, beampattern curves and support-set dumps,
// all emitted as plain-text CSV.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "ppsdoa/bench.hpp"

namespace {

using namespace ppsdoa;

std::string format_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw config_error("cannot open output file: " + path);
    out << text;
}

std::string block_to_text(const SnapshotBlock& block) {
    std::string out = "# ppsdoa snapshot block\n";
    out += "# sensors=" + std::to_string(block.sensors) +
           " snapshots=" + std::to_string(block.snapshots) + " delta=" + format_g(block.delta) +
           "\n";
    out.reserve(out.size() + block.data.size() * 48);
    for (const cplx& v : block.data)
        out += format_g(v.real()) + "," + format_g(v.imag()) + "\n";
    return out;
}

SnapshotBlock block_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open block file: " + path);
    SnapshotBlock block;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::stringstream ss(line.substr(1));
            std::string token;
            while (ss >> token) {
                const auto eq = token.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = token.substr(0, eq);
                const double value = std::strtod(token.c_str() + eq + 1, nullptr);
                if (key == "sensors") block.sensors = int(value);
                else if (key == "snapshots") block.snapshots = int(value);
                else if (key == "delta") block.delta = value;
            }
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw config_error("block file: expected re,im lines");
        block.data.emplace_back(std::strtod(line.c_str(), nullptr),
                                std::strtod(line.c_str() + comma + 1, nullptr));
    }
    if (block.sensors < 1 || block.snapshots < 1 ||
        block.data.size() != std::size_t(block.sensors) * std::size_t(block.snapshots))
        throw config_error("block file: header does not match sample count");
    return block;
}

std::string estimates_csv(const EstimationReport& report, int order) {
    std::string out = "source,theta_deg";
    for (int k = 1; k <= order; ++k) out += ",phi" + std::to_string(k);
    out += ",amp_re,amp_im\n";
    const EstimateSet& est = report.estimates;
    for (int l = 0; l < est.count(); ++l) {
        out += std::to_string(l + 1) + "," + format_g(rad2deg(est.thetas[l]));
        for (int k = 0; k < order; ++k) out += "," + format_g(est.phis[l][k]);
        if (est.amplitudes && int(est.amplitudes->size()) == est.count()) {
            out += "," + format_g((*est.amplitudes)[l].real());
            out += "," + format_g((*est.amplitudes)[l].imag());
        } else {
            out += ",,";
        }
        out += "\n";
    }
    return out;
}

int env_workers() {
    const char* env = std::getenv("PPSDOA_WORKERS");
    if (!env) return 0;
    return std::atoi(env);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ppsdoa: wideband DOA and polynomial-phase estimation on a sensor array"};
    app.require_subcommand(1);

    std::string config_path, out_path, in_path;
    std::string estimator, sweep_kind, values_text, snr_text, stage = "t";
    std::string mode = "pattern";
    double snr = std::numeric_limits<double>::quiet_NaN();
    double omega_ratio = 0.9, beam = 0.0, step_deg = 0.5;
    int runs = -1, lambda = -1, workers = -1, sensors = 4;
    std::uint64_t seed = 0;
    bool have_seed = false, no_timing = false;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed)->each([&](const std::string&) { have_seed = true; });
    };

    CLI::App* sim = app.add_subcommand("simulate", "generate a snapshot block");
    sim->add_option("--config", config_path)->required();
    sim->add_option("--snr", snr);
    add_seed(sim);
    sim->add_option("--out,-o", out_path);

    CLI::App* est = app.add_subcommand("estimate", "run one estimator and print the estimates");
    est->add_option("--config", config_path)->required();
    est->add_option("--in", in_path);
    est->add_option("--snr", snr);
    est->add_option("--estimator", estimator);
    est->add_option("--lambda", lambda);
    add_seed(est);
    est->add_option("--out,-o", out_path);

    CLI::App* mc = app.add_subcommand("mc", "Monte-Carlo sweep to CSV");
    mc->add_option("--config", config_path)->required();
    mc->add_option("--snr", snr_text, "SNR list or lo:step:hi sweep");
    mc->add_option("--sweep", sweep_kind, "snr|delta_theta|delta_phi1|delta_phi2|sensors");
    mc->add_option("--values", values_text, "sweep values, list or lo:step:hi");
    mc->add_option("--runs", runs);
    mc->add_option("--estimator", estimator);
    mc->add_option("--lambda", lambda);
    mc->add_option("--workers", workers);
    mc->add_flag("--no-timing", no_timing, "omit the wall-clock column");
    add_seed(mc);
    mc->add_option("--out,-o", out_path);

    CLI::App* crb_cmd = app.add_subcommand("crb", "Cramer-Rao bounds to CSV");
    crb_cmd->add_option("--config", config_path)->required();
    crb_cmd->add_option("--snr", snr);
    crb_cmd->add_option("--out,-o", out_path);

    CLI::App* bp = app.add_subcommand("beampattern", "beam response / mainlobe curves to CSV");
    bp->add_option("--sensors", sensors);
    bp->add_option("--omega-ratio", omega_ratio, "instantaneous frequency over cut-off");
    bp->add_option("--beam", beam, "beam index (may be half-integer)");
    bp->add_option("--step-deg", step_deg);
    bp->add_option("--mode", mode, "pattern|mainlobe");
    bp->add_option("--out,-o", out_path);

    CLI::App* sup = app.add_subcommand("support", "thresholded support points to CSV");
    sup->add_option("--config", config_path)->required();
    sup->add_option("--snr", snr);
    sup->add_option("--stage", stage, "s (local maxima) or t (thresholded)");
    add_seed(sup);
    sup->add_option("--out,-o", out_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        auto load_config = [&]() {
            ScenarioConfig scen = parse_config_file(config_path);
            if (!std::isnan(snr)) scen.snr_db = snr;
            if (!estimator.empty()) scen.estimator = estimator_from_name(estimator);
            if (runs > 0) scen.mc_runs = runs;
            if (lambda > 0) scen.ransac.lambda = lambda;
            if (have_seed) scen.master_seed = seed;
            if (workers > 0)
                scen.workers = workers;
            else if (env_workers() > 0)
                scen.workers = env_workers();
            return scen;
        };

        if (sim->parsed()) {
            const ScenarioConfig scen = load_config();
            const SnapshotBlock block = generate_snapshots(
                scen.array, scen.sources, scen.noise_power(), scen.master_seed);
            write_output(out_path, block_to_text(block));
            return 0;
        }

        if (est->parsed()) {
            const ScenarioConfig scen = load_config();
            cvec x;
            if (!in_path.empty()) {
                x = block_from_file(in_path).data;
            } else {
                x = generate_snapshots(scen.array, scen.sources, scen.noise_power(),
                                       scen.master_seed)
                        .data;
            }
            const EstimationReport report = run_estimator(scen, x);
            write_output(out_path, estimates_csv(report, scen.order()));
            if (report.failed) {
                std::cerr << "estimation failed: " << report.failure_reason << "\n";
                return 2;
            }
            return 0;
        }

        if (mc->parsed()) {
            ScenarioConfig scen = load_config();
            if (!snr_text.empty()) {
                scen.sweep.kind = SweepSpec::Kind::Snr;
                scen.sweep.values = parse_value_list(snr_text);
            }
            if (!sweep_kind.empty()) {
                scen.sweep.kind = sweep_kind == "snr"           ? SweepSpec::Kind::Snr
                                  : sweep_kind == "delta_theta" ? SweepSpec::Kind::DeltaTheta
                                  : sweep_kind == "delta_phi1"  ? SweepSpec::Kind::DeltaPhi1
                                  : sweep_kind == "delta_phi2"  ? SweepSpec::Kind::DeltaPhi2
                                  : sweep_kind == "sensors"
                                      ? SweepSpec::Kind::Sensors
                                      : throw config_error("unknown sweep kind: " + sweep_kind);
                if (!values_text.empty()) scen.sweep.values = parse_value_list(values_text);
            }
            const RmseTable table = run_monte_carlo(scen);
            write_output(out_path, rmse_table_csv(table, !no_timing));
            return 0;
        }

        if (crb_cmd->parsed()) {
            const ScenarioConfig scen = load_config();
            const int order = scen.order();
            const int count = int(scen.sources.size());
            const CrbReport report =
                crb_bounds(fisher_information(scen.array, scen.sources, scen.noise_power()),
                           count, order);
            std::string out = "snr_db";
            for (int l = 1; l <= count; ++l) {
                out += ",crb_theta" + std::to_string(l) + "_deg";
                for (int k = 1; k <= order; ++k) {
                    out += ",crb_phi" + std::to_string(l) + "_" + std::to_string(k) + "_rad_s";
                    if (k > 1) out += std::to_string(k);
                }
            }
            out += "\n" + format_g(scen.snr_db);
            for (int l = 0; l < count; ++l) {
                out += "," + format_g(rad2deg(report.theta_std[l]));
                for (int k = 0; k < order; ++k) out += "," + format_g(report.phi_std[l][k]);
            }
            out += "\n";
            write_output(out_path, out);
            return 0;
        }

        if (bp->parsed()) {
            ArrayConfig cfg;
            cfg.sensors = sensors;
            std::string out;
            if (mode == "pattern") {
                const double omega = omega_ratio * cfg.cutoff_omega();
                out = "theta_deg,magnitude\n";
                for (double deg = -90.0; deg <= 90.0 + 1e-9; deg += step_deg)
                    out += format_g(deg) + "," +
                           format_g(beampattern(deg2rad(deg), omega, beam, cfg)) + "\n";
            } else if (mode == "mainlobe") {
                out = "omega_ratio,theta_deg\n";
                for (double ratio = 0.01; ratio <= 2.0 + 1e-9; ratio += 0.01) {
                    const auto angle = mainlobe_angle(ratio * cfg.cutoff_omega(), beam, cfg);
                    if (!angle) continue;
                    out += format_g(ratio) + "," + format_g(rad2deg(*angle)) + "\n";
                }
            } else {
                throw config_error("unknown beampattern mode: " + mode);
            }
            write_output(out_path, out);
            return 0;
        }

        if (sup->parsed()) {
            const ScenarioConfig scen = load_config();
            const SnapshotBlock block = generate_snapshots(
                scen.array, scen.sources, scen.noise_power(), scen.master_seed);
            const TfBeamTensor beams = beamform(stft_per_sensor(
                block, scen.ransac.window_width, scen.ransac.dft_length));
            SupportSet support = local_maxima(beams, scen.ransac.strict_local_maxima);
            if (stage == "t")
                support = threshold_support(support, scen.ransac.epsilon_percentile);
            else if (stage != "s")
                throw config_error("unknown stage: " + stage);
            std::string out = "beam,p,q,t_s,omega_rad_s,magnitude\n";
            for (std::size_t b = 0; b < support.beams.size(); ++b)
                for (const SupportPoint& pt : support.beams[b])
                    out += std::to_string(b) + "," + std::to_string(pt.p) + "," +
                           std::to_string(pt.q) + "," + format_g(beams.time_at(pt.p)) + "," +
                           format_g(beams.omega_at(pt.q)) + "," + format_g(pt.magnitude) + "\n";
            write_output(out_path, out);
            return 0;
        }
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
