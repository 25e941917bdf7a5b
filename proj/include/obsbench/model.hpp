#pragma once

#include <vector>

#include "obsbench/cell.hpp"

namespace obsbench {

/// Linearize the cell model at the OCV segment containing soc_operating.
LinearSystem build_linear_system(const CellParams& p, const OcvCurve& ocv,
                                 double soc_operating);

/// Zero-order-hold exact step of the three decoupled state ODEs.
/// Positive current charges: it raises SOC and both RC voltages.
StateVector step_exact(const CellParams& p, const StateVector& x, double i_amps,
                       double dt);

/// Forward-Euler step, kept for stiffness experiments.
StateVector step_euler(const CellParams& p, const StateVector& x, double i_amps,
                       double dt);

/// Terminal voltage V_out = V_oc(soc) + i * R_ohm + Va + Vb.
double terminal_voltage(const CellParams& p, const OcvCurve& ocv,
                        const StateVector& x, double i_amps);

enum class StepMode { ZeroOrderHold, ForwardEuler };

struct SimPoint {
    double t = 0.0;
    StateVector x;
    double v = 0.0;
    double i = 0.0;
};

struct SimResult {
    std::vector<SimPoint> points;
    bool soc_saturated = false; // SOC hit a [0,1] clamp at some step
};

/// Ground-truth simulation over a loadfile. SOC is clamped to [0,1] with a
/// saturation flag. Current is held constant over each [t_k, t_{k+1}) interval.
SimResult simulate(const CellParams& p, const OcvCurve& ocv, double soc0,
                   const Loadfile& load, StepMode mode = StepMode::ZeroOrderHold);

/// Same, with parameters interpolated from a map at the sample temperature
/// and current SOC each step.
SimResult simulate(const ParamMap& map, const OcvCurve& ocv, double soc0,
                   const Loadfile& load, StepMode mode = StepMode::ZeroOrderHold);

/// A 21-breakpoint mildly curved NMC-flavoured OCV curve used as the bundled
/// default for synthetic experiments.
OcvCurve default_ocv();

/// Bundled large-format cell constants for synthetic experiments.
CellParams default_cell();

} // namespace obsbench
