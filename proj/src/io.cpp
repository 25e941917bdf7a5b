#include "obsbench/io.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace obsbench {

using nlohmann::json;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        // trim whitespace and a possible trailing \r
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    return out;
}

double parse_double(const std::string& s, std::size_t row, const char* col) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw format_error("loadfile row " + std::to_string(row) + ": bad " + col +
                           " value '" + s + "'");
    }
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& ex) {
        throw format_error(path + ": " + ex.what());
    }
}

} // namespace

Loadfile parse_loadfile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open loadfile " + path);

    std::string line;
    if (!std::getline(in, line)) throw format_error(path + ": empty file");
    const auto header = split_csv_line(line);
    int col_t = -1, col_i = -1, col_v = -1, col_temp = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "time_s") col_t = static_cast<int>(c);
        else if (header[c] == "current_a") col_i = static_cast<int>(c);
        else if (header[c] == "voltage_v") col_v = static_cast<int>(c);
        else if (header[c] == "temp_c") col_temp = static_cast<int>(c);
        else throw format_error(path + ": unknown column '" + header[c] + "'");
    }
    if (col_t < 0 || col_i < 0) {
        throw format_error(path + ": header must contain time_s and current_a");
    }

    Loadfile out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw format_error(path + " row " + std::to_string(row) +
                               ": wrong field count");
        }
        LoadSample s;
        s.t = parse_double(fields[static_cast<std::size_t>(col_t)], row, "time_s");
        s.i = parse_double(fields[static_cast<std::size_t>(col_i)], row, "current_a");
        if (col_v >= 0) {
            s.v = parse_double(fields[static_cast<std::size_t>(col_v)], row, "voltage_v");
        }
        if (col_temp >= 0) {
            s.temp_c =
                parse_double(fields[static_cast<std::size_t>(col_temp)], row, "temp_c");
        }
        if (!std::isfinite(s.t) || !std::isfinite(s.i) ||
            (col_v >= 0 && !std::isfinite(s.v)) ||
            (col_temp >= 0 && !std::isfinite(s.temp_c))) {
            throw format_error(path + " row " + std::to_string(row) +
                               ": non-finite value");
        }
        if (!out.empty() && !(s.t > out.back().t)) {
            throw format_error(path + " row " + std::to_string(row) +
                               ": time_s not strictly increasing");
        }
        out.push_back(s);
    }
    return out;
}

namespace {

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void write_loadfile(const std::string& path, const Loadfile& load) {
    bool has_v = false, has_temp = false;
    for (const auto& s : load) {
        if (std::isfinite(s.v)) has_v = true;
        if (std::isfinite(s.temp_c)) has_temp = true;
    }
    std::ofstream out(path);
    if (!out) throw format_error("cannot write " + path);
    out << "time_s,current_a";
    if (has_v) out << ",voltage_v";
    if (has_temp) out << ",temp_c";
    out << "\n";
    for (const auto& s : load) {
        out << fmt_g17(s.t) << ',' << fmt_g17(s.i);
        if (has_v) out << ',' << fmt_g17(s.v);
        if (has_temp) out << ',' << fmt_g17(s.temp_c);
        out << "\n";
    }
}

CellParams params_from_json_file(const std::string& path) {
    const json j = read_json_file(path);
    CellParams p;
    try {
        p.r_ohm = j.at("r_ohm").get<double>();
        p.r_a = j.at("r_a").get<double>();
        p.c_a = j.at("c_a").get<double>();
        p.r_b = j.at("r_b").get<double>();
        p.c_b = j.at("c_b").get<double>();
        p.capacity_c = j.at("capacity_c").get<double>();
        p.eta = j.value("eta", 1.0);
    } catch (const json::exception& ex) {
        throw format_error(path + ": " + ex.what());
    }
    p.validate();
    return p;
}

std::string params_to_json(const CellParams& p) {
    json j{{"r_ohm", p.r_ohm}, {"r_a", p.r_a},   {"c_a", p.c_a},
           {"r_b", p.r_b},     {"c_b", p.c_b},   {"capacity_c", p.capacity_c},
           {"eta", p.eta}};
    return j.dump(2) + "\n";
}

OcvCurve ocv_from_json_file(const std::string& path) {
    const json j = read_json_file(path);
    std::vector<double> soc, ocv;
    try {
        for (const auto& bp : j.at("breakpoints")) {
            soc.push_back(bp.at("soc").get<double>());
            ocv.push_back(bp.at("ocv").get<double>());
        }
    } catch (const json::exception& ex) {
        throw format_error(path + ": " + ex.what());
    }
    return OcvCurve(std::move(soc), std::move(ocv));
}

std::string ocv_to_json(const OcvCurve& curve) {
    json bps = json::array();
    for (std::size_t i = 0; i < curve.soc_points().size(); ++i) {
        bps.push_back({{"soc", curve.soc_points()[i]}, {"ocv", curve.ocv_points()[i]}});
    }
    json j{{"breakpoints", bps}};
    return j.dump(2) + "\n";
}

ParamMap param_map_from_json_file(const std::string& path) {
    const json j = read_json_file(path);
    try {
        std::vector<double> temps = j.at("temp_grid").get<std::vector<double>>();
        std::vector<double> socs = j.at("soc_grid").get<std::vector<double>>();
        std::vector<CellParams> params;
        for (const auto& pj : j.at("params")) {
            CellParams p;
            p.r_ohm = pj.at("r_ohm").get<double>();
            p.r_a = pj.at("r_a").get<double>();
            p.c_a = pj.at("c_a").get<double>();
            p.r_b = pj.at("r_b").get<double>();
            p.c_b = pj.at("c_b").get<double>();
            p.capacity_c = pj.at("capacity_c").get<double>();
            p.eta = pj.value("eta", 1.0);
            params.push_back(p);
        }
        return ParamMap(std::move(temps), std::move(socs), std::move(params));
    } catch (const json::exception& ex) {
        throw format_error(path + ": " + ex.what());
    }
}

namespace {

Eigen::Vector3d vec3_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) {
        throw format_error("gains: expected a 3-element array");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec3_to_json(const Eigen::Vector3d& v) { return {v(0), v(1), v(2)}; }

} // namespace

ObserverGains gains_from_json_file(const std::string& path) {
    const json j = read_json_file(path);
    ObserverGains g;
    try {
        g.variant = observer_variant_from_string(j.at("variant").get<std::string>());
        switch (g.variant) {
        case ObserverVariant::Luenberger:
            g.l = vec3_from_json(j.at("l"));
            break;
        case ObserverVariant::SlidingMode:
            g.h = vec3_from_json(j.at("h"));
            g.k_dc = j.value("k_dc", 0.0);
            g.boundary_layer_phi = j.value("boundary_layer_phi", 0.01);
            break;
        case ObserverVariant::Pid:
            g.k_d = vec3_from_json(j.at("k_d"));
            g.d_filter_tau = j.value("d_filter_tau", 0.0);
            [[fallthrough]];
        case ObserverVariant::Pi:
            g.k_p = vec3_from_json(j.at("k_p"));
            g.k_i1 = j.value("k_i1", 1.0);
            g.k_i2 = vec3_from_json(j.at("k_i2"));
            break;
        }
    } catch (const json::exception& ex) {
        throw format_error(path + ": " + ex.what());
    }
    if (g.k_dc < 0.0) throw format_error(path + ": k_dc must be >= 0");
    return g;
}

std::string gains_to_json(const ObserverGains& g) {
    json j{{"variant", to_string(g.variant)}};
    switch (g.variant) {
    case ObserverVariant::Luenberger:
        j["l"] = vec3_to_json(g.l);
        break;
    case ObserverVariant::SlidingMode:
        j["h"] = vec3_to_json(g.h);
        j["k_dc"] = g.k_dc;
        j["boundary_layer_phi"] = g.boundary_layer_phi;
        break;
    case ObserverVariant::Pid:
        j["k_d"] = vec3_to_json(g.k_d);
        j["d_filter_tau"] = g.d_filter_tau;
        [[fallthrough]];
    case ObserverVariant::Pi:
        j["k_p"] = vec3_to_json(g.k_p);
        j["k_i1"] = g.k_i1;
        j["k_i2"] = vec3_to_json(g.k_i2);
        break;
    }
    return j.dump(2) + "\n";
}

PsoConfig pso_config_from_json_file(const std::string& path) {
    const json j = read_json_file(path);
    PsoConfig cfg;
    try {
        cfg.swarm_size = j.value("swarm_size", cfg.swarm_size);
        cfg.iterations = j.value("iterations", cfg.iterations);
        cfg.inertia = j.value("inertia", cfg.inertia);
        cfg.cognitive = j.value("cognitive", cfg.cognitive);
        cfg.social = j.value("social", cfg.social);
        cfg.seed = j.value("seed", cfg.seed);
        auto bounds = [&](const char* key) {
            const auto& b = j.at("bounds").at(key);
            return ParamBounds{b.at(0).get<double>(), b.at(1).get<double>()};
        };
        cfg.r_ohm = bounds("r_ohm");
        cfg.r_a = bounds("r_a");
        cfg.c_a = bounds("c_a");
        cfg.r_b = bounds("r_b");
        cfg.c_b = bounds("c_b");
    } catch (const json::exception& ex) {
        throw format_error(path + ": " + ex.what());
    }
    cfg.validate();
    return cfg;
}

namespace {

std::string dirname_of(const std::string& path) {
    const auto pos = path.find_last_of('/');
    return pos == std::string::npos ? std::string(".") : path.substr(0, pos);
}

std::string resolve(const std::string& base_dir, const std::string& ref) {
    if (!ref.empty() && ref.front() == '/') return ref;
    return base_dir + "/" + ref;
}

} // namespace

Scenario scenario_from_json_file(const std::string& path) {
    const json j = read_json_file(path);
    const std::string base = dirname_of(path);
    Scenario s = Scenario::make_default();
    try {
        s.kind = scenario_kind_from_string(j.at("kind").get<std::string>());
        if (j.contains("loadfile")) {
            s.loadfile_path = resolve(base, j.at("loadfile").get<std::string>());
        }
        s.profile = j.value("profile", s.profile);
        s.duration_s = j.value("duration_s", s.duration_s);
        s.dt = j.value("dt", s.dt);
        s.amplitude_a = j.value("amplitude_a", s.amplitude_a);
        s.soc0_true = j.value("soc0_true", s.soc0_true);
        s.soc0_est = j.value("soc0_est", s.soc0_est);
        if (j.contains("estimators")) {
            s.estimators = j.at("estimators").get<std::vector<std::string>>();
        }
        s.seed = j.value("seed", s.seed);
        s.convergence_band_pct = j.value("convergence_band_pct", s.convergence_band_pct);
        s.convergence_hold_s = j.value("convergence_hold_s", s.convergence_hold_s);
        s.timing_repetitions = j.value("timing_repetitions", s.timing_repetitions);
        if (j.contains("noise")) {
            const auto& nj = j.at("noise");
            s.noise.bias_mean_a = nj.value("bias_mean_a", 0.0);
            s.noise.bias_sd_a = nj.value("bias_sd_a", 0.0);
            s.noise.volt_mean_v = nj.value("volt_mean_v", 0.0);
            s.noise.volt_sd_v = nj.value("volt_sd_v", 0.0);
            s.noise.damping_tau_s = nj.value("damping_tau_s", s.noise.damping_tau_s);
        }
        if (j.contains("perturb")) {
            const auto& pj = j.at("perturb");
            s.perturb.name = pj.at("name").get<std::string>();
            s.perturb.relative_amp = pj.at("relative_amp").get<double>();
            const std::string env = pj.value("envelope", "step");
            if (env == "step") s.perturb.envelope = PerturbEnvelope::Step;
            else if (env == "damped") s.perturb.envelope = PerturbEnvelope::Damped;
            else throw format_error(path + ": unknown envelope '" + env + "'");
            s.perturb.tau_s = pj.value("tau_s", s.duration_s / 5.0);
        }
        if (j.contains("params")) {
            s.params = params_from_json_file(resolve(base, j.at("params").get<std::string>()));
        }
        if (j.contains("ocv")) {
            s.ocv = ocv_from_json_file(resolve(base, j.at("ocv").get<std::string>()));
        }
        if (j.contains("gains")) {
            for (const auto& [name, ref] : j.at("gains").items()) {
                s.gains[name] =
                    gains_from_json_file(resolve(base, ref.get<std::string>()));
            }
        }
    } catch (const json::exception& ex) {
        throw format_error(path + ": " + ex.what());
    }
    return s;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open " + path);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ULL;
        }
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(hash));
    return out;
}

std::string manifest_json(const std::vector<ManifestInput>& inputs,
                          const std::string& scenario_desc, std::uint64_t seed) {
    json ins = json::array();
    for (const auto& i : inputs) {
        ins.push_back({{"path", i.path}, {"digest", i.digest}});
    }
    char ts[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    json j{{"tool_version", kToolVersion},
           {"inputs", ins},
           {"scenario", scenario_desc},
           {"seed", seed},
           {"timestamp", ts}};
    return j.dump(2) + "\n";
}

void write_trajectory_csv(const std::string& path, const EstimatorRun& run) {
    std::ofstream out(path);
    if (!out) throw format_error("cannot write " + path);
    out << "t,soc_true,soc_hat,v_meas,v_hat,e\n";
    for (std::size_t k = 0; k < run.t.size(); ++k) {
        out << fmt_g17(run.t[k]) << ',' << fmt_g17(run.soc_true[k]) << ','
            << fmt_g17(run.soc_hat[k]) << ',' << fmt_g17(run.v_meas[k]) << ','
            << fmt_g17(run.v_hat[k]) << ',' << fmt_g17(run.e[k]) << "\n";
    }
}

void write_comparison_csv(const std::string& path,
                          const std::vector<EstimatorRun>& runs) {
    std::ofstream out(path);
    if (!out) throw format_error("cannot write " + path);
    // wall time is reported in metrics.json; keeping it out of the comparison
    // table makes identical reruns produce identical bytes
    out << "estimator,max_ae_pct,rmse_pct,mae_pct,convergence_time_s\n";
    for (const auto& r : runs) {
        out << r.estimator << ',' << fmt_g17(r.soc_metrics.max_ae) << ','
            << fmt_g17(r.soc_metrics.rmse) << ',' << fmt_g17(r.soc_metrics.mae) << ',';
        if (r.convergence_time_s) out << fmt_g17(*r.convergence_time_s);
        else out << "never";
        out << "\n";
    }
}

std::string metrics_to_json(const std::vector<EstimatorRun>& runs) {
    json arr = json::array();
    for (const auto& r : runs) {
        json jr{{"estimator", r.estimator},
                {"max_ae_pct", r.soc_metrics.max_ae},
                {"rmse_pct", r.soc_metrics.rmse},
                {"mae_pct", r.soc_metrics.mae},
                {"wall_seconds", r.wall_seconds},
                {"aborted", r.aborted}};
        if (r.convergence_time_s) jr["convergence_time_s"] = *r.convergence_time_s;
        arr.push_back(jr);
    }
    return json{{"runs", arr}}.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw format_error("cannot write " + path);
    out << content;
}

} // namespace obsbench
