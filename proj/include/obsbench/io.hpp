#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "obsbench/cell.hpp"
#include "obsbench/characterization.hpp"
#include "obsbench/harness.hpp"
#include "obsbench/observers.hpp"

namespace obsbench {

inline constexpr const char* kToolVersion = "0.1.0";

/// CSV loadfile: header `time_s,current_a[,voltage_v][,temp_c]`. Rejects
/// missing columns, non-monotone time and non-finite values, naming the row.
Loadfile parse_loadfile(const std::string& path);

/// Writes the same schema back; voltage/temperature columns included when any
/// sample carries them.
void write_loadfile(const std::string& path, const Loadfile& load);

CellParams params_from_json_file(const std::string& path);
std::string params_to_json(const CellParams& p);

OcvCurve ocv_from_json_file(const std::string& path);
std::string ocv_to_json(const OcvCurve& curve);

ParamMap param_map_from_json_file(const std::string& path);

ObserverGains gains_from_json_file(const std::string& path);
std::string gains_to_json(const ObserverGains& g);

PsoConfig pso_config_from_json_file(const std::string& path);

/// Scenario JSON; absent fields fall back to Scenario::make_default(), and
/// referenced params/ocv/gains files are loaded relative to the scenario file.
Scenario scenario_from_json_file(const std::string& path);

/// FNV-1a 64-bit digest of a file's bytes, hex-encoded.
std::string file_digest(const std::string& path);

struct ManifestInput {
    std::string path;
    std::string digest;
};

/// Reproducibility envelope written next to every output bundle.
std::string manifest_json(const std::vector<ManifestInput>& inputs,
                          const std::string& scenario_desc, std::uint64_t seed);

/// Per-run trajectory CSV: `t,soc_true,soc_hat,v_meas,v_hat,e`, fixed
/// formatting so identical runs produce identical bytes.
void write_trajectory_csv(const std::string& path, const EstimatorRun& run);

/// Table-style comparison grid (estimator x metric) for plotting.
void write_comparison_csv(const std::string& path,
                          const std::vector<EstimatorRun>& runs);

std::string metrics_to_json(const std::vector<EstimatorRun>& runs);

void write_text_file(const std::string& path, const std::string& content);

} // namespace obsbench
