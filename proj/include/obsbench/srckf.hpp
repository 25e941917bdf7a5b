#pragma once

#include <optional>

#include <Eigen/Dense>

#include "obsbench/cell.hpp"
#include "obsbench/model.hpp"

namespace obsbench {

/// Square-root cubature Kalman filter state: estimate, lower-triangular
/// covariance square root, and (fixed) noise settings.
struct SrckfState {
    StateVector x_hat;
    Eigen::Matrix3d s_sqrt = Eigen::Matrix3d::Zero(); // lower triangular, P = S S^T
    Eigen::Matrix3d q_proc = Eigen::Matrix3d::Zero(); // process noise covariance
    double r_meas = 1e-4;                             // measurement variance, V^2
};

/// Default tuning used for every comparative scenario.
SrckfState srckf_default_state(const StateVector& x0);

struct SrckfStepResult {
    SrckfState state;
    double v_hat = 0.0;
    double innovation = 0.0;
};

/// One predict/update cycle: third-degree spherical-radial cubature (2n = 6
/// points) through the ZOH state transition and the nonlinear terminal-voltage
/// measurement, with QR-based square-root covariance updates.
/// i_amps drives the prediction; i_meas (defaulting to i_amps) carries the
/// ohmic feedthrough at the measurement instant.
SrckfStepResult srckf_step(const SrckfState& state, const CellParams& p,
                           const OcvCurve& ocv, double i_amps, double v_meas,
                           double dt, std::optional<double> i_meas = std::nullopt);

} // namespace obsbench
