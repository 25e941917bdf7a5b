#include "obsbench/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "obsbench/io.hpp"

namespace obsbench {

std::string to_string(ScenarioKind k) {
    switch (k) {
    case ScenarioKind::Accuracy: return "accuracy";
    case ScenarioKind::Convergence: return "convergence";
    case ScenarioKind::CurrentNoise: return "current_noise";
    case ScenarioKind::VoltageNoise: return "voltage_noise";
    case ScenarioKind::Sensitivity: return "sensitivity";
    case ScenarioKind::Timing: return "timing";
    }
    return "?";
}

ScenarioKind scenario_kind_from_string(const std::string& name) {
    if (name == "accuracy") return ScenarioKind::Accuracy;
    if (name == "convergence") return ScenarioKind::Convergence;
    if (name == "current_noise") return ScenarioKind::CurrentNoise;
    if (name == "voltage_noise") return ScenarioKind::VoltageNoise;
    if (name == "sensitivity") return ScenarioKind::Sensitivity;
    if (name == "timing") return ScenarioKind::Timing;
    throw domain_error("unknown scenario kind: " + name);
}

Metrics compute_metrics(const std::vector<double>& truth,
                        const std::vector<double>& estimate) {
    if (truth.empty() || truth.size() != estimate.size()) {
        throw domain_error("compute_metrics: sequences must be equal-length and non-empty");
    }
    Metrics m;
    double sq = 0.0, abs_sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = truth[i] - estimate[i];
        m.max_ae = std::max(m.max_ae, std::abs(d));
        sq += d * d;
        abs_sum += std::abs(d);
    }
    const double n = static_cast<double>(truth.size());
    m.rmse = std::sqrt(sq / n);
    m.mae = abs_sum / n;
    return m;
}

Loadfile inject_current_bias(const Loadfile& load, double mean_a, double sd_a,
                             std::uint64_t seed) {
    if (sd_a < 0.0) throw domain_error("inject_current_bias: sd must be >= 0");
    Loadfile out = load;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> stdnorm(0.0, 1.0);
    for (auto& s : out) {
        s.i += mean_a + sd_a * stdnorm(rng);
    }
    return out;
}

Loadfile inject_voltage_noise(const Loadfile& load, double mean_v, double sd_v,
                              double damping_tau_s, std::uint64_t seed) {
    if (sd_v < 0.0) throw domain_error("inject_voltage_noise: sd must be >= 0");
    if (!(damping_tau_s > 0.0)) {
        throw domain_error("inject_voltage_noise: damping tau must be positive (or inf)");
    }
    Loadfile out = load;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> stdnorm(0.0, 1.0);
    const double t0 = out.empty() ? 0.0 : out.front().t;
    for (auto& s : out) {
        const double env = std::isinf(damping_tau_s)
                               ? 1.0
                               : std::exp(-(s.t - t0) / damping_tau_s);
        s.v += env * (mean_v + sd_v * stdnorm(rng));
    }
    return out;
}

CellParams ParamSchedule::at(double t) const {
    if (name.empty() || relative_amp == 0.0) return base;
    double env = 1.0;
    if (envelope == PerturbEnvelope::Damped) env = std::exp(-t / tau_s);
    const double f = 1.0 + relative_amp * env;
    CellParams p = base;
    if (name == "r_ohm") p.r_ohm *= f;
    else if (name == "r_a") p.r_a *= f;
    else if (name == "c_a") p.c_a *= f;
    else if (name == "r_b") p.r_b *= f;
    else if (name == "c_b") p.c_b *= f;
    else throw domain_error("perturb_parameter: unknown parameter " + name);
    return p;
}

ParamSchedule perturb_parameter(const CellParams& p, const std::string& name,
                                double relative_amp, PerturbEnvelope envelope,
                                double tau_s) {
    p.validate();
    if (name != "r_ohm" && name != "r_a" && name != "c_a" && name != "r_b" &&
        name != "c_b") {
        throw domain_error("perturb_parameter: unknown parameter " + name);
    }
    if (std::abs(relative_amp) > 0.8) {
        throw domain_error("perturb_parameter: |relative_amp| must be <= 0.8");
    }
    ParamSchedule sched;
    sched.base = p;
    sched.name = name;
    sched.relative_amp = relative_amp;
    sched.envelope = envelope;
    sched.tau_s = tau_s;
    return sched;
}

std::optional<double> convergence_time(const EstimatorRun& run, double band_pct,
                                       double hold_s) {
    if (!(band_pct > 0.0)) throw domain_error("convergence_time: band must be positive");
    const std::size_t n = run.t.size();
    if (n == 0) return std::nullopt;
    // last index violating the band; everything after stays inside
    std::size_t first_in = 0;
    for (std::size_t k = n; k-- > 0;) {
        const double err_pct = 100.0 * std::abs(run.soc_hat[k] - run.soc_true[k]);
        if (err_pct > band_pct) {
            first_in = k + 1;
            break;
        }
    }
    if (first_in >= n) return std::nullopt;
    if (run.t.back() - run.t[first_in] < hold_s) return std::nullopt;
    return run.t[first_in] - run.t.front();
}

Scenario Scenario::make_default() {
    Scenario s;
    s.params = default_cell();
    s.ocv = default_ocv();
    s.estimators = {"luenberger", "sliding_mode", "pi", "pid", "srckf"};
    return s;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

Loadfile generate_profile(const std::string& name, double duration_s, double dt,
                          double amplitude_a, std::uint64_t seed) {
    if (!(duration_s > 0.0) || !(dt > 0.0)) {
        throw domain_error("generate_profile: duration and dt must be positive");
    }
    const std::size_t n = static_cast<std::size_t>(duration_s / dt) + 1;
    Loadfile out(n);
    for (std::size_t k = 0; k < n; ++k) out[k].t = static_cast<double>(k) * dt;

    if (name == "fuds") {
        // random piecewise segments, discharge-biased, with sharp transients
        std::mt19937_64 rng(splitmix64(seed ^ 0xf0d5ULL));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::size_t k = 0;
        while (k < n) {
            const std::size_t len =
                5 + static_cast<std::size_t>(unit(rng) * 55.0 / dt);
            // mostly discharge, occasional regen pulses
            double level;
            const double r = unit(rng);
            if (r < 0.2) level = 0.35 * amplitude_a * unit(rng);            // regen
            else if (r < 0.35) level = 0.0;                                  // coast
            else level = -amplitude_a * (0.15 + 0.85 * unit(rng));           // drive
            for (std::size_t j = 0; j < len && k < n; ++j, ++k) out[k].i = level;
        }
    } else if (name == "dst") {
        // fixed 360 s pattern scaled by amplitude, repeated
        static const std::pair<double, double> pattern[] = {
            {16, 0.0},   {28, -0.125}, {12, -0.25}, {8, 0.125},  {16, 0.0},
            {24, -0.125},{12, -0.25},  {8, 0.125},  {16, 0.0},   {24, -0.125},
            {12, -0.25}, {8, 0.125},   {16, 0.0},   {36, -0.125},{8, -0.5},
            {24, -0.625},{8, 0.25},    {32, -0.25}, {8, -1.0},   {44, 0.5}};
        std::vector<double> levels;
        for (const auto& [secs, frac] : pattern) {
            for (int j = 0; j < static_cast<int>(secs / dt); ++j) {
                levels.push_back(frac * amplitude_a);
            }
        }
        if (levels.empty()) levels.push_back(0.0);
        for (std::size_t k = 0; k < n; ++k) out[k].i = levels[k % levels.size()];
    } else {
        throw domain_error("generate_profile: unknown profile " + name);
    }
    return out;
}

ObserverGains default_design(ObserverVariant variant, const CellParams& p,
                             const OcvCurve& ocv, double dt) {
    using cd = std::complex<double>;
    switch (variant) {
    case ObserverVariant::Luenberger:
        // one fast pole for output tracking, one slow parasitic mode; the
        // resulting gain set keeps the DC current-bias error small while the
        // slow mode dominates large-signal convergence
        return place_poles(variant, p, ocv, {cd(-0.13), cd(-0.003), cd(-0.060)});
    case ObserverVariant::SlidingMode: {
        ObserverGains g = place_poles(ObserverVariant::Luenberger, p, ocv,
                                      {cd(-0.13), cd(-0.003), cd(-0.060)});
        ObserverGains smo;
        smo.variant = ObserverVariant::SlidingMode;
        smo.h = g.l;
        smo.k_dc = 0.005;
        smo.boundary_layer_phi = 0.01;
        return smo;
    }
    case ObserverVariant::Pi:
        // two poles track the RC time constants so the proportional gain on
        // the filter states stays small; the remaining pair drives the SOC
        // and integral channels faster than the Luenberger set above
        return place_poles(variant, p, ocv,
                           {cd(-1.0 / p.tau_a()), cd(-1.0 / p.tau_b()), cd(-0.025),
                            cd(-0.035)},
                           dt);
    case ObserverVariant::Pid:
        return place_poles(variant, p, ocv,
                           {cd(-1.0 / p.tau_a()), cd(-1.0 / p.tau_b()), cd(-0.030),
                            cd(-0.045)},
                           dt);
    }
    throw domain_error("unreachable");
}

namespace {

struct Truth {
    std::vector<double> soc;
    std::vector<double> v;
};

Truth simulate_truth(const Scenario& s, const Loadfile& load) {
    ParamSchedule sched;
    sched.base = s.params;
    if (s.kind == ScenarioKind::Sensitivity && !s.perturb.name.empty()) {
        sched = perturb_parameter(s.params, s.perturb.name, s.perturb.relative_amp,
                                  s.perturb.envelope, s.perturb.tau_s);
    }

    Truth truth;
    truth.soc.reserve(load.size());
    truth.v.reserve(load.size());
    StateVector x;
    x.soc = s.soc0_true;
    const double t0 = load.empty() ? 0.0 : load.front().t;
    for (std::size_t k = 0; k < load.size(); ++k) {
        const CellParams p = sched.at(load[k].t - t0);
        if (k > 0) {
            x = step_exact(p, x, load[k - 1].i, load[k].t - load[k - 1].t);
            x.soc = std::clamp(x.soc, 0.0, 1.0);
        }
        truth.soc.push_back(x.soc);
        truth.v.push_back(terminal_voltage(p, s.ocv, x, load[k].i));
    }
    return truth;
}

ObserverGains gains_for(const Scenario& s, const std::string& name) {
    auto it = s.gains.find(name);
    const ObserverVariant variant = observer_variant_from_string(name);
    ObserverGains g = (it != s.gains.end())
                          ? it->second
                          : default_design(variant, s.params, s.ocv, s.dt);
    // configuration gate: the design must be Hurwitz on every OCV segment
    const std::optional<double> dt_opt =
        (variant == ObserverVariant::Pid) ? std::optional<double>(s.dt) : std::nullopt;
    for (std::size_t i = 0; i < s.ocv.segment_count(); ++i) {
        const double m_i = s.ocv.segment(i).first;
        if (!is_hurwitz(error_matrix(g, s.params, m_i, dt_opt)).hurwitz) {
            throw design_error("scenario: " + name + " gains not Hurwitz at OCV segment " +
                               std::to_string(i));
        }
    }
    return g;
}

EstimatorRun run_estimator(const Scenario& s, const std::string& name,
                           const Loadfile& stream, const Truth& truth) {
    EstimatorRun run;
    run.estimator = name;
    const std::size_t n = stream.size();
    run.t.reserve(n);
    run.soc_true.reserve(n);
    run.soc_hat.reserve(n);
    run.v_meas.reserve(n);
    run.v_hat.reserve(n);
    run.e.reserve(n);

    StateVector x0;
    x0.soc = s.soc0_est;

    const auto record = [&](std::size_t k, double soc_hat, double v_hat) {
        run.t.push_back(stream[k].t);
        run.soc_true.push_back(truth.soc[k]);
        run.soc_hat.push_back(std::clamp(soc_hat, 0.0, 1.0));
        run.v_meas.push_back(stream[k].v);
        run.v_hat.push_back(v_hat);
        run.e.push_back(stream[k].v - v_hat);
    };

    const auto t_start = std::chrono::steady_clock::now();
    if (name == "srckf") {
        SrckfState st = srckf_default_state(x0);
        // the scenario declares its measurement-noise level, so the filter is
        // tuned with it (never below the default floor)
        const double sd = s.noise.volt_sd_v;
        st.r_meas = std::max(st.r_meas, sd * sd);
        record(0, st.x_hat.soc,
               terminal_voltage(s.params, s.ocv, st.x_hat, stream[0].i));
        for (std::size_t k = 1; k < n; ++k) {
            const double dt = stream[k].t - stream[k - 1].t;
            try {
                auto res = srckf_step(st, s.params, s.ocv, stream[k - 1].i,
                                      stream[k].v, dt, stream[k].i);
                st = res.state;
                record(k, st.x_hat.soc, res.v_hat);
            } catch (const numerical_error&) {
                run.aborted = true;
                break;
            }
        }
    } else {
        const ObserverGains gains = gains_for(s, name);
        ObserverState st;
        st.reset(x0);
        record(0, st.x_hat.soc,
               terminal_voltage(s.params, s.ocv, st.x_hat, stream[0].i));
        for (std::size_t k = 1; k < n; ++k) {
            const double dt = stream[k].t - stream[k - 1].t;
            auto res = observer_step(gains, s.params, s.ocv, st, stream[k - 1].i,
                                     stream[k].v, dt, stream[k].i);
            st = res.state;
            record(k, st.x_hat.soc, res.v_hat);
        }
    }
    const auto t_end = std::chrono::steady_clock::now();
    run.wall_seconds = std::chrono::duration<double>(t_end - t_start).count();

    std::vector<double> truth_pct(run.soc_true.size()), est_pct(run.soc_hat.size());
    for (std::size_t k = 0; k < run.soc_true.size(); ++k) {
        truth_pct[k] = 100.0 * run.soc_true[k];
        est_pct[k] = 100.0 * run.soc_hat[k];
    }
    run.soc_metrics = compute_metrics(truth_pct, est_pct);
    run.convergence_time_s =
        convergence_time(run, s.convergence_band_pct, s.convergence_hold_s);
    return run;
}

Loadfile load_stream(const Scenario& s) {
    Loadfile load = s.loadfile_path.empty()
                        ? generate_profile(s.profile, s.duration_s, s.dt,
                                           s.amplitude_a, s.seed)
                        : parse_loadfile(s.loadfile_path);
    return load;
}

} // namespace

ScenarioResult run_scenario(const Scenario& s) {
    if (s.estimators.empty()) throw domain_error("scenario: estimator list is empty");
    s.params.validate();

    Loadfile load = load_stream(s);
    const Truth truth = simulate_truth(s, load);

    // single injection pass; every estimator consumes the same stream
    Loadfile stream = load;
    if (!s.use_loadfile_voltage) {
        for (std::size_t k = 0; k < stream.size(); ++k) stream[k].v = truth.v[k];
    }
    if (s.noise.bias_mean_a != 0.0 || s.noise.bias_sd_a != 0.0) {
        stream = inject_current_bias(stream, s.noise.bias_mean_a, s.noise.bias_sd_a,
                                     splitmix64(s.seed ^ 0xc0ffeeULL));
    }
    if (s.noise.volt_mean_v != 0.0 || s.noise.volt_sd_v != 0.0) {
        stream = inject_voltage_noise(stream, s.noise.volt_mean_v, s.noise.volt_sd_v,
                                      s.noise.damping_tau_s,
                                      splitmix64(s.seed ^ 0x501acell));
    }

    ScenarioResult res;
    res.corrupted = stream;
    for (const auto& name : s.estimators) {
        res.runs.push_back(run_estimator(s, name, stream, truth));
    }
    return res;
}

std::vector<TimingEntry> timing_report(const Scenario& s, int repetitions) {
    if (repetitions < 1) throw domain_error("timing_report: repetitions must be >= 1");
    Loadfile load = load_stream(s);
    const Truth truth = simulate_truth(s, load);
    Loadfile stream = load;
    for (std::size_t k = 0; k < stream.size(); ++k) stream[k].v = truth.v[k];

    std::vector<TimingEntry> out;
    for (const auto& name : s.estimators) {
        run_estimator(s, name, stream, truth); // warm-up, untimed
        std::vector<double> times;
        times.reserve(static_cast<std::size_t>(repetitions));
        for (int r = 0; r < repetitions; ++r) {
            // scheduler noise only ever adds time; the best of three passes is
            // the robust per-repetition cost
            double best = std::numeric_limits<double>::infinity();
            for (int pass = 0; pass < 3; ++pass) {
                best = std::min(best,
                                run_estimator(s, name, stream, truth).wall_seconds);
            }
            times.push_back(best);
        }
        TimingEntry entry;
        entry.estimator = name;
        entry.steps = stream.size();
        double sum = 0.0;
        for (double t : times) sum += t;
        entry.mean_seconds = sum / static_cast<double>(repetitions);
        double var = 0.0;
        for (double t : times) var += (t - entry.mean_seconds) * (t - entry.mean_seconds);
        entry.sd_seconds = repetitions > 1
                               ? std::sqrt(var / static_cast<double>(repetitions - 1))
                               : 0.0;
        out.push_back(entry);
    }
    return out;
}

} // namespace obsbench
