#pragma once

#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "obsbench/errors.hpp"

namespace obsbench {

/// Physical constants of the 2nd-order equivalent circuit: series resistance,
/// two RC pairs, total capacity in coulombs and coulombic efficiency.
struct CellParams {
    double r_ohm = 0.0;      // series (ohmic) resistance, Ohm
    double r_a = 0.0;        // charge-transfer resistance, Ohm
    double c_a = 0.0;        // double-layer capacitance, F
    double r_b = 0.0;        // concentration resistance, Ohm
    double c_b = 0.0;        // diffusion capacitance, F
    double capacity_c = 0.0; // total capacity, coulombs
    double eta = 1.0;        // coulombic efficiency, (0, 1]

    double tau_a() const { return r_a * c_a; }
    double tau_b() const { return r_b * c_b; }

    void validate() const;
};

/// One sample of a drive cycle. Voltage and temperature are optional columns;
/// NaN marks absence.
struct LoadSample {
    double t = 0.0;       // s
    double i = 0.0;       // A, positive = charging
    double v = std::numeric_limits<double>::quiet_NaN(); // measured terminal V
    double temp_c = std::numeric_limits<double>::quiet_NaN();
};

using Loadfile = std::vector<LoadSample>;

/// Monotone piecewise-linear SOC -> OCV map. Breakpoints strictly increasing
/// in both coordinates and covering [0, 1].
class OcvCurve {
  public:
    OcvCurve() = default;
    OcvCurve(std::vector<double> soc, std::vector<double> ocv);

    /// V_oc at the given SOC; linear inside the containing segment.
    double eval(double soc) const;

    /// V_oc continued past [0, 1] along the edge segments. Estimators may
    /// transiently leave the domain; extrapolating keeps their output
    /// feedback linear instead of flattening it.
    double eval_extrapolated(double soc) const;

    /// Index of the segment containing soc (right-closed at soc = 1).
    std::size_t segment_index(double soc) const;

    /// Slope (V per SOC fraction) and intercept (V) of segment i.
    std::pair<double, double> segment(std::size_t i) const;

    /// SOC at which the curve takes the given voltage (inverse lookup).
    double inverse(double volts) const;

    std::size_t segment_count() const { return soc_.size() - 1; }
    double mean_slope() const;
    const std::vector<double>& soc_points() const { return soc_; }
    const std::vector<double>& ocv_points() const { return ocv_; }

  private:
    std::vector<double> soc_;
    std::vector<double> ocv_;
};

/// The (Va, Vb, s) state of the cell model.
struct StateVector {
    double v_a = 0.0; // charge-transfer RC voltage, V
    double v_b = 0.0; // concentration RC voltage, V
    double soc = 0.0; // state of charge, fraction

    Eigen::Vector3d as_vector() const { return {v_a, v_b, soc}; }
    static StateVector from_vector(const Eigen::Vector3d& x) {
        return {x(0), x(1), x(2)};
    }
};

/// Linearized state-space form at one OCV segment: diagonal A, input vector B,
/// output row C = (1, 1, m_i), feedthrough D = R_ohm, output y = V_out - c_i.
struct LinearSystem {
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    Eigen::RowVector3d c = Eigen::RowVector3d::Zero();
    double d = 0.0;
    double c_offset = 0.0; // the segment intercept c_i
};

/// Temperature x SOC grid of cell parameters, bilinearly interpolated.
class ParamMap {
  public:
    ParamMap() = default;
    ParamMap(std::vector<double> temp_grid, std::vector<double> soc_grid,
             std::vector<CellParams> params_row_major);

    /// Bilinear interpolation at (temp, soc); clamped at the grid edges.
    CellParams at(double temp_c, double soc) const;

    const std::vector<double>& temp_grid() const { return temp_grid_; }
    const std::vector<double>& soc_grid() const { return soc_grid_; }
    const CellParams& node(std::size_t ti, std::size_t si) const {
        return params_[ti * soc_grid_.size() + si];
    }

  private:
    std::vector<double> temp_grid_;
    std::vector<double> soc_grid_;
    std::vector<CellParams> params_; // row-major, temp outer
};

} // namespace obsbench
