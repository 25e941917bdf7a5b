// obsbench: battery SOC estimation workbench command line.

#include <complex>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "obsbench/characterization.hpp"
#include "obsbench/harness.hpp"
#include "obsbench/io.hpp"
#include "obsbench/model.hpp"
#include "obsbench/observability.hpp"
#include "obsbench/observers.hpp"

namespace fs = std::filesystem;
using namespace obsbench;
using nlohmann::json;

namespace {

std::vector<std::complex<double>> parse_poles(const std::string& spec) {
    std::vector<std::complex<double>> poles;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        // "a" or "a+bi" / "a-bi"
        double re = 0.0, im = 0.0;
        std::size_t pos = 0;
        re = std::stod(tok, &pos);
        if (pos < tok.size()) {
            std::string rest = tok.substr(pos);
            if (!rest.empty() && (rest.back() == 'i' || rest.back() == 'j')) {
                rest.pop_back();
                im = std::stod(rest);
            } else {
                throw domain_error("bad pole token: " + tok);
            }
        }
        poles.emplace_back(re, im);
    }
    if (poles.empty()) throw domain_error("empty pole list");
    return poles;
}

void write_manifest(const std::string& out_dir, const std::vector<std::string>& inputs,
                    const std::string& desc, std::uint64_t seed) {
    std::vector<ManifestInput> mi;
    for (const auto& p : inputs) mi.push_back({p, file_digest(p)});
    write_text_file(out_dir + "/manifest.json", manifest_json(mi, desc, seed));
}

void write_bundle(const std::string& out_dir, const ScenarioResult& res,
                  const std::vector<std::string>& inputs, const std::string& desc,
                  std::uint64_t seed) {
    fs::create_directories(out_dir);
    for (const auto& run : res.runs) {
        write_trajectory_csv(out_dir + "/" + run.estimator + ".csv", run);
    }
    write_comparison_csv(out_dir + "/comparison.csv", res.runs);
    write_text_file(out_dir + "/metrics.json", metrics_to_json(res.runs));
    write_manifest(out_dir, inputs, desc, seed);
}

// Low-current test CSV: header branch,soc,voltage_v.
LowCurrentTest parse_low_current_test(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) ||
        line.find("branch") == std::string::npos) {
        throw format_error(path + ": expected header branch,soc,voltage_v");
    }
    LowCurrentTest test;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::string branch, soc_s, v_s;
        if (!std::getline(ss, branch, ',') || !std::getline(ss, soc_s, ',') ||
            !std::getline(ss, v_s, ',')) {
            throw format_error(path + " row " + std::to_string(row) + ": bad record");
        }
        const double soc = std::stod(soc_s), v = std::stod(v_s);
        if (branch == "charge") test.charge.emplace_back(soc, v);
        else if (branch == "discharge") test.discharge.emplace_back(soc, v);
        else throw format_error(path + " row " + std::to_string(row) +
                                ": branch must be charge or discharge");
    }
    return test;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"obsbench: control-observer SOC estimation workbench"};
    app.require_subcommand(1);

    std::string params_path, ocv_path, loadfile_path, gains_path, scenario_path;
    std::string out_path, pso_path, pulse_path, test_path;
    std::string variant_name = "luenberger", poles_spec, scenario_name = "linear";
    std::string levels_spec = "0.5,1,2.5,5", which = "current";
    double soc0 = 0.8, dt = 1.0, soc_op = 0.5;
    double capacity_c = 58.0 * 3600.0, eta = 1.0;
    int order = 3, repetitions = 10, grid_n = 21;
    std::string q_spec = "0,0,0";

    auto* c_sim = app.add_subcommand("simulate", "ground-truth model simulation");
    c_sim->add_option("--params", params_path);
    c_sim->add_option("--ocv", ocv_path);
    c_sim->add_option("--loadfile", loadfile_path)->required();
    c_sim->add_option("--soc0", soc0);
    c_sim->add_option("--out", out_path);

    auto* c_design = app.add_subcommand("design", "pole-placement gain design");
    c_design->add_option("--variant", variant_name)->required();
    c_design->add_option("--poles", poles_spec)->required();
    c_design->add_option("--params", params_path);
    c_design->add_option("--ocv", ocv_path);
    c_design->add_option("--dt", dt);
    c_design->add_option("--out", out_path);

    auto* c_est = app.add_subcommand("estimate", "run one estimator over a loadfile");
    c_est->add_option("--gains", gains_path)->required();
    c_est->add_option("--loadfile", loadfile_path)->required();
    c_est->add_option("--params", params_path);
    c_est->add_option("--ocv", ocv_path);
    c_est->add_option("--soc0", soc0);
    c_est->add_option("--out", out_path);

    auto* c_bench = app.add_subcommand("bench", "run a full scenario");
    c_bench->add_option("--scenario", scenario_path)->required();
    c_bench->add_option("--out", out_path)->required();

    auto* c_ident = app.add_subcommand("identify", "PSO parameter identification");
    c_ident->add_option("--pulse", pulse_path)->required();
    c_ident->add_option("--ocv", ocv_path)->required();
    c_ident->add_option("--pso", pso_path)->required();
    c_ident->add_option("--capacity-c", capacity_c);
    c_ident->add_option("--eta", eta);
    c_ident->add_option("--out", out_path);

    auto* c_ocv = app.add_subcommand("ocv", "OCV-SOC extraction from a low-current test");
    c_ocv->add_option("--test", test_path)->required();
    c_ocv->add_option("--grid", grid_n);
    c_ocv->add_option("--out", out_path);

    auto* c_obs = app.add_subcommand("observability", "rank analysis");
    c_obs->add_option("--params", params_path)->required();
    c_obs->add_option("--ocv", ocv_path);
    c_obs->add_option("--scenario", scenario_name);
    c_obs->add_option("--soc", soc_op);
    c_obs->add_option("--order", order);
    c_obs->add_option("--q", q_spec);

    auto* c_sens = app.add_subcommand("sensitivity", "parameter perturbation runs");
    c_sens->add_option("--scenario", scenario_path)->required();
    c_sens->add_option("--out", out_path)->required();

    auto* c_conv = app.add_subcommand("convergence", "convergence race");
    c_conv->add_option("--scenario", scenario_path)->required();
    c_conv->add_option("--out", out_path)->required();

    auto* c_noise = app.add_subcommand("noise-sweep", "measurement uncertainty sweep");
    c_noise->add_option("--scenario", scenario_path)->required();
    c_noise->add_option("--levels", levels_spec);
    c_noise->add_option("--which", which);
    c_noise->add_option("--out", out_path)->required();

    auto* c_time = app.add_subcommand("timing", "wall-clock comparison");
    c_time->add_option("--scenario", scenario_path)->required();
    c_time->add_option("--repetitions", repetitions);
    c_time->add_option("--out", out_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const CellParams params = params_path.empty()
                                      ? default_cell()
                                      : params_from_json_file(params_path);
        const OcvCurve ocv =
            ocv_path.empty() ? default_ocv() : ocv_from_json_file(ocv_path);

        if (c_sim->parsed()) {
            const Loadfile load = parse_loadfile(loadfile_path);
            const SimResult sim = simulate(params, ocv, soc0, load);
            std::ostream* os = &std::cout;
            std::ofstream file;
            if (!out_path.empty()) {
                fs::create_directories(fs::path(out_path).parent_path().empty()
                                           ? "."
                                           : fs::path(out_path).parent_path().string());
                file.open(out_path);
                os = &file;
            }
            *os << "t,v_a,v_b,soc,v\n";
            for (const auto& pt : sim.points) {
                *os << pt.t << ',' << pt.x.v_a << ',' << pt.x.v_b << ',' << pt.x.soc
                    << ',' << pt.v << "\n";
            }
        } else if (c_design->parsed()) {
            const auto variant = observer_variant_from_string(variant_name);
            const auto poles = parse_poles(poles_spec);
            const std::optional<double> dt_opt =
                variant == ObserverVariant::Pid ? std::optional<double>(dt)
                                                : std::nullopt;
            const ObserverGains g = place_poles(variant, params, ocv, poles, dt_opt);
            const std::string js = gains_to_json(g);
            if (out_path.empty()) std::cout << js;
            else write_text_file(out_path, js);
        } else if (c_est->parsed()) {
            const ObserverGains g = gains_from_json_file(gains_path);
            Scenario s = Scenario::make_default();
            s.params = params;
            s.ocv = ocv;
            s.loadfile_path = loadfile_path;
            s.soc0_est = soc0;
            s.soc0_true = soc0;
            s.estimators = {to_string(g.variant)};
            s.gains[to_string(g.variant)] = g;
            const Loadfile load = parse_loadfile(loadfile_path);
            bool has_v = true;
            for (const auto& smp : load) has_v = has_v && std::isfinite(smp.v);
            if (!has_v) {
                throw format_error("estimate: loadfile needs a voltage_v column");
            }
            s.use_loadfile_voltage = true;
            ScenarioResult res = run_scenario(s);
            if (out_path.empty()) out_path = "estimate_out";
            write_bundle(out_path, res, {gains_path, loadfile_path}, "estimate", s.seed);
        } else if (c_bench->parsed() || c_sens->parsed() || c_conv->parsed()) {
            const Scenario s = scenario_from_json_file(scenario_path);
            const ScenarioResult res = run_scenario(s);
            write_bundle(out_path, res, {scenario_path}, to_string(s.kind), s.seed);
        } else if (c_ident->parsed()) {
            const Loadfile pulse = parse_loadfile(pulse_path);
            const PsoConfig cfg = pso_config_from_json_file(pso_path);
            const PulseFitResult fit = fit_pulse_pso(pulse, ocv, cfg, capacity_c, eta);
            std::string js = params_to_json(fit.params);
            js.insert(js.rfind('}'), ",\n  \"fit_rmse_v\": " + std::to_string(fit.rmse) + "\n");
            if (out_path.empty()) std::cout << js;
            else write_text_file(out_path, js);
        } else if (c_ocv->parsed()) {
            const LowCurrentTest test = parse_low_current_test(test_path);
            std::vector<double> grid(static_cast<std::size_t>(grid_n));
            for (int i = 0; i < grid_n; ++i) {
                grid[static_cast<std::size_t>(i)] = static_cast<double>(i) / (grid_n - 1);
            }
            const OcvCurve curve = extract_ocv(test, grid);
            const std::string js = ocv_to_json(curve);
            if (out_path.empty()) std::cout << js;
            else write_text_file(out_path, js);
        } else if (c_obs->parsed()) {
            json out;
            if (scenario_name == "linear") {
                const LinearSystem sys = build_linear_system(params, ocv, soc_op);
                const Eigen::Matrix3d con = controllability_matrix(sys);
                const Eigen::Matrix3d obs = observability_matrix(sys);
                auto mat_json = [](const Eigen::Matrix3d& m) {
                    json rows = json::array();
                    for (int r = 0; r < 3; ++r) {
                        rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
                    }
                    return rows;
                };
                auto rep_json = [](const RankReport& rep) {
                    return json{{"matrix_kind", rep.matrix_kind},
                                {"rank", rep.rank},
                                {"singular_values", rep.singular_values},
                                {"full_rank", rep.full_rank}};
                };
                out["controllability"] = {{"matrix", mat_json(con)},
                                          {"report", rep_json(rank_report(con, "controllability"))}};
                out["observability"] = {{"matrix", mat_json(obs)},
                                        {"report", rep_json(rank_report(obs, "observability"))}};
            } else {
                LieScenario sc;
                if (scenario_name == "input_nl") sc = LieScenario::InputNl;
                else if (scenario_name == "state_nl") sc = LieScenario::StateNl;
                else if (scenario_name == "measurement_nl") sc = LieScenario::MeasurementNl;
                else throw domain_error("unknown observability scenario " + scenario_name);
                const auto poles = parse_poles(q_spec); // reuse "a,b,c" parser
                if (poles.size() != 3) throw domain_error("--q needs three values");
                Eigen::Vector3d q(poles[0].real(), poles[1].real(), poles[2].real());
                const auto derivs = smooth_ocv_derivatives(ocv, soc_op, order);
                const LieResult lie = lie_observability_matrix(sc, params, derivs, q, order);
                json rows = json::array();
                for (Eigen::Index r = 0; r < lie.matrix.rows(); ++r) {
                    json row = json::array();
                    for (Eigen::Index c = 0; c < lie.matrix.cols(); ++c) {
                        row.push_back(lie.matrix(r, c));
                    }
                    rows.push_back(row);
                }
                out["matrix"] = rows;
                out["report"] = {{"matrix_kind", lie.report.matrix_kind},
                                 {"rank", lie.report.rank},
                                 {"singular_values", lie.report.singular_values},
                                 {"full_rank", lie.report.full_rank}};
            }
            std::cout << out.dump(2) << "\n";
        } else if (c_noise->parsed()) {
            Scenario s = scenario_from_json_file(scenario_path);
            std::vector<double> levels;
            {
                std::stringstream ss(levels_spec);
                std::string tok;
                while (std::getline(ss, tok, ',')) levels.push_back(std::stod(tok));
            }
            fs::create_directories(out_path);
            std::ofstream summary(out_path + "/sweep.csv");
            summary << "level,estimator,max_ae_pct,rmse_pct,mae_pct\n";
            for (double lvl : levels) {
                Scenario sl = s;
                if (which == "current") {
                    sl.kind = ScenarioKind::CurrentNoise;
                    sl.noise.bias_mean_a = lvl;
                    if (sl.noise.bias_sd_a == 0.0) sl.noise.bias_sd_a = 0.01;
                } else if (which == "voltage") {
                    sl.kind = ScenarioKind::VoltageNoise;
                    sl.noise.volt_sd_v = lvl;
                    if (sl.noise.volt_mean_v == 0.0) sl.noise.volt_mean_v = 0.004;
                } else {
                    throw domain_error("--which must be current or voltage");
                }
                const ScenarioResult res = run_scenario(sl);
                for (const auto& run : res.runs) {
                    summary << lvl << ',' << run.estimator << ','
                            << run.soc_metrics.max_ae << ',' << run.soc_metrics.rmse
                            << ',' << run.soc_metrics.mae << "\n";
                }
            }
            write_manifest(out_path, {scenario_path}, "noise-sweep:" + which, s.seed);
        } else if (c_time->parsed()) {
            const Scenario s = scenario_from_json_file(scenario_path);
            const auto report = timing_report(s, repetitions);
            fs::create_directories(out_path);
            std::ofstream csv(out_path + "/timing.csv");
            csv << "estimator,mean_seconds,sd_seconds,steps\n";
            for (const auto& e : report) {
                csv << e.estimator << ',' << e.mean_seconds << ',' << e.sd_seconds
                    << ',' << e.steps << "\n";
            }
            write_manifest(out_path, {scenario_path}, "timing", s.seed);
        }
    } catch (const design_error& e) {
        std::cerr << "design error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
