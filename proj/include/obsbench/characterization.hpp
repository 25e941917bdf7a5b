#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "obsbench/cell.hpp"
#include "obsbench/model.hpp"

namespace obsbench {

/// Low-current dis/charge branches for OCV identification, each a sequence of
/// (soc, voltage) with soc monotone within the branch.
struct LowCurrentTest {
    std::vector<std::pair<double, double>> charge;    // (soc, V)
    std::vector<std::pair<double, double>> discharge; // (soc, V)
};

/// Average the interpolated charge and discharge branches onto the grid.
/// Fails if the branches do not overlap the grid or the averaged curve is not
/// strictly increasing.
OcvCurve extract_ocv(const LowCurrentTest& test, const std::vector<double>& grid);

/// Per-segment (slope, intercept) pairs of the curve.
std::vector<std::pair<double, double>> segment_slopes(const OcvCurve& curve);

struct ParamBounds {
    double lo = 0.0;
    double hi = 0.0;
};

struct PsoConfig {
    int swarm_size = 50;
    int iterations = 200;
    double inertia = 0.729;
    double cognitive = 1.494;
    double social = 1.494;
    ParamBounds r_ohm, r_a, c_a, r_b, c_b; // search box
    std::uint64_t seed = 1;

    /// Optional explicit starting positions for the first particles
    /// (remaining ones are drawn from the search box).
    std::vector<CellParams> initial_positions;

    void validate() const;
};

struct PulseFitResult {
    CellParams params;
    double rmse = 0.0; // voltage RMSE over the fit window, V
};

/// Global-best PSO fit of the five ECM impedance parameters against a pulse
/// loadfile with measured voltage. Capacity and eta are taken as known.
/// Deterministic for a given seed. The swarm is seeded around the ohmic-jump
/// guess R_ohm ~ dV/dI at the largest current step.
PulseFitResult fit_pulse_pso(const Loadfile& pulse, const OcvCurve& ocv,
                             const PsoConfig& cfg, double capacity_c, double eta);

} // namespace obsbench
