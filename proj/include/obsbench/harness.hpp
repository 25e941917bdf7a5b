#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "obsbench/cell.hpp"
#include "obsbench/model.hpp"
#include "obsbench/observers.hpp"
#include "obsbench/srckf.hpp"

namespace obsbench {

enum class ScenarioKind {
    Accuracy,
    Convergence,
    CurrentNoise,
    VoltageNoise,
    Sensitivity,
    Timing
};

std::string to_string(ScenarioKind k);
ScenarioKind scenario_kind_from_string(const std::string& name);

struct Metrics {
    double max_ae = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
};

/// MaxAE / RMSE / MAE between two equal-length sequences.
Metrics compute_metrics(const std::vector<double>& truth,
                        const std::vector<double>& estimate);

/// i' = i + N(mean, sd^2), seeded; voltage and temperature columns untouched.
Loadfile inject_current_bias(const Loadfile& load, double mean_a, double sd_a,
                             std::uint64_t seed);

/// v' = v + exp(-t/tau) * (mean + N(0, sd^2)); tau = +inf disables damping.
/// The standard normal draws depend only on the seed, so sweeps over sd with
/// a shared seed scale the same noise shape.
Loadfile inject_voltage_noise(const Loadfile& load, double mean_v, double sd_v,
                              double damping_tau_s, std::uint64_t seed);

enum class PerturbEnvelope { Step, Damped };

/// Time-varying ground-truth parameter schedule: the named parameter follows
/// p * (1 + relative_amp * env(t)) while estimators keep the nominal p.
struct ParamSchedule {
    CellParams base;
    std::string name;        // r_ohm | r_a | c_a | r_b | c_b; empty = no perturbation
    double relative_amp = 0.0;
    PerturbEnvelope envelope = PerturbEnvelope::Step;
    double tau_s = 1.0;

    CellParams at(double t) const;
};

ParamSchedule perturb_parameter(const CellParams& p, const std::string& name,
                                double relative_amp, PerturbEnvelope envelope,
                                double tau_s);

struct EstimatorRun {
    std::string estimator;
    std::vector<double> t;
    std::vector<double> soc_true; // fraction
    std::vector<double> soc_hat;  // fraction, clamped to [0,1] for reporting
    std::vector<double> v_meas;
    std::vector<double> v_hat;
    std::vector<double> e; // v_meas - v_hat
    Metrics soc_metrics;   // in SOC percentage points
    std::optional<double> convergence_time_s;
    double wall_seconds = 0.0;
    bool aborted = false; // numerical failure mid-run
};

/// Earliest t after which |soc_hat - soc_true| stays within band_pct
/// (percentage points) for the rest of the run, requiring at least hold_s of
/// in-band tail; nullopt if never.
std::optional<double> convergence_time(const EstimatorRun& run, double band_pct,
                                       double hold_s);

struct NoiseSpec {
    double bias_mean_a = 0.0;
    double bias_sd_a = 0.0;
    double volt_mean_v = 0.0;
    double volt_sd_v = 0.0;
    double damping_tau_s = std::numeric_limits<double>::infinity();
};

struct PerturbSpec {
    std::string name;
    double relative_amp = 0.0;
    PerturbEnvelope envelope = PerturbEnvelope::Step;
    double tau_s = 1.0;
};

struct Scenario {
    ScenarioKind kind = ScenarioKind::Accuracy;
    std::string loadfile_path; // empty -> built-in profile
    std::string profile = "fuds"; // fuds | dst
    double duration_s = 7200.0;
    double dt = 1.0;
    double amplitude_a = 58.0; // peak current of the built-in profiles
    double soc0_true = 0.8;
    double soc0_est = 0.8;
    std::vector<std::string> estimators; // luenberger, sliding_mode, pi, pid, srckf
    NoiseSpec noise;
    PerturbSpec perturb;
    std::uint64_t seed = 1;
    double convergence_band_pct = 2.0;
    double convergence_hold_s = 60.0;
    int timing_repetitions = 10;
    /// Use the loadfile's own voltage column as the measurement instead of
    /// the simulated truth voltage (for replaying recorded data).
    bool use_loadfile_voltage = false;

    CellParams params;            // defaults to default_cell() via make_default
    OcvCurve ocv;                 // defaults to default_ocv()
    std::map<std::string, ObserverGains> gains; // per observer; designed if absent

    static Scenario make_default();
};

/// Deterministic synthetic drive cycles: piecewise current segments with
/// aggressive transients. Discharge-heavy so SOC trends down from soc0.
Loadfile generate_profile(const std::string& name, double duration_s, double dt,
                          double amplitude_a, std::uint64_t seed);

/// Default pole sets per estimator, designed against the scenario's cell and
/// OCV curve at the mean segment slope.
ObserverGains default_design(ObserverVariant variant, const CellParams& p,
                             const OcvCurve& ocv, double dt);

struct ScenarioResult {
    std::vector<EstimatorRun> runs;
    Loadfile corrupted; // the shared stream every estimator consumed
};

/// Run every listed estimator over the identical corrupted stream against
/// simulated ground truth. Deterministic per seed.
ScenarioResult run_scenario(const Scenario& s);

struct TimingEntry {
    std::string estimator;
    double mean_seconds = 0.0;
    double sd_seconds = 0.0;
    std::size_t steps = 0;
};

/// Mean/sd wall-clock over repetitions of identical estimator runs. Each
/// repetition records the best of three passes so one-sided scheduler noise
/// does not inflate the spread.
std::vector<TimingEntry> timing_report(const Scenario& s, int repetitions);

} // namespace obsbench
