#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "obsbench/cell.hpp"
#include "obsbench/model.hpp"

namespace obsbench {

enum class ObserverVariant { Luenberger, SlidingMode, Pi, Pid };

std::string to_string(ObserverVariant v);
ObserverVariant observer_variant_from_string(const std::string& name);

/// Gain set for one observer variant. Only the fields of the active variant
/// are read.
struct ObserverGains {
    ObserverVariant variant = ObserverVariant::Luenberger;

    Eigen::Vector3d l = Eigen::Vector3d::Zero(); // Luenberger

    Eigen::Vector3d h = Eigen::Vector3d::Zero(); // sliding mode
    double k_dc = 0.0;                           // switching gain, V
    double boundary_layer_phi = 0.01;            // sat() boundary layer, V

    Eigen::Vector3d k_p = Eigen::Vector3d::Zero();  // PI / PID
    double k_i1 = 1.0;                              // fixed by convention
    Eigen::Vector3d k_i2 = Eigen::Vector3d::Zero();

    Eigen::Vector3d k_d = Eigen::Vector3d::Zero();  // PID
    double d_filter_tau = 0.0;                      // 0 = raw derivative
};

/// Mutable per-run observer state. reset() clears every accumulator.
struct ObserverState {
    StateVector x_hat;
    double c_pi = 0.0;       // error integral, V*s (PI/PID)
    double e_prev = 0.0;     // previous output error, V (PID)
    bool has_e_prev = false; // first-step guard: E_d = 0 at k = 0
    double d_filtered = 0.0; // filtered error derivative, V/s (PID)

    void reset(const StateVector& x0) {
        x_hat = x0;
        c_pi = 0.0;
        e_prev = 0.0;
        has_e_prev = false;
        d_filtered = 0.0;
    }
};

struct ObserverStepResult {
    ObserverState state;
    double v_hat = 0.0;
    double e = 0.0; // v_meas - v_hat
};

/// Boundary-layer saturation: clamp(e / phi, -1, 1).
double sat(double e, double phi);

/// One observer iteration: ZOH prediction, output error against the measured
/// terminal voltage, then the variant's correction integrated over dt.
/// i_amps drives the prediction over [t-dt, t]; i_meas (defaulting to i_amps)
/// is the current behind the ohmic feedthrough of the measurement instant,
/// so a loadfile with current steps keeps e = 0 on a matched model.
ObserverStepResult observer_step(const ObserverGains& gains, const CellParams& p,
                                 const OcvCurve& ocv, const ObserverState& state,
                                 double i_amps, double v_meas, double dt,
                                 std::optional<double> i_meas = std::nullopt);

/// Error-system matrix A_e at OCV slope m: 3x3 for Luenberger/SMO, 4x4 for
/// PI/PID (PID needs dt for the K_d/dt entries).
Eigen::MatrixXd error_matrix(const ObserverGains& gains, const CellParams& p,
                             double m, std::optional<double> dt = std::nullopt);

struct HurwitzReport {
    bool hurwitz = false;
    double spectral_abscissa = 0.0;
};

HurwitzReport is_hurwitz(const Eigen::MatrixXd& m);

/// Pole placement at OCV slope m. Pole count must equal the A_e dimension,
/// the set must be closed under conjugation with negative real parts.
/// For PI/PID the (K_p, K_i2) family is resolved with K_i1 = 1 and K_i2
/// restricted to the SOC channel (square 4x4 design); the PID derivative
/// share is K_d = derivative_share * dt * (combined proportional gain).
ObserverGains place_poles(ObserverVariant variant, const CellParams& p, double m,
                          const std::vector<std::complex<double>>& desired_poles,
                          std::optional<double> dt = std::nullopt,
                          double derivative_share = 0.2);

/// Same, designing at the mean OCV slope and re-verifying the Hurwitz
/// property at every segment slope; any failing segment rejects the design.
ObserverGains place_poles(ObserverVariant variant, const CellParams& p,
                          const OcvCurve& ocv,
                          const std::vector<std::complex<double>>& desired_poles,
                          std::optional<double> dt = std::nullopt,
                          double derivative_share = 0.2);

} // namespace obsbench
