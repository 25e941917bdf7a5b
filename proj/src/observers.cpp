#include "obsbench/observers.hpp"

#include <algorithm>
#include <cmath>

namespace obsbench {

std::string to_string(ObserverVariant v) {
    switch (v) {
    case ObserverVariant::Luenberger: return "luenberger";
    case ObserverVariant::SlidingMode: return "sliding_mode";
    case ObserverVariant::Pi: return "pi";
    case ObserverVariant::Pid: return "pid";
    }
    return "?";
}

ObserverVariant observer_variant_from_string(const std::string& name) {
    if (name == "luenberger") return ObserverVariant::Luenberger;
    if (name == "sliding_mode" || name == "smo") return ObserverVariant::SlidingMode;
    if (name == "pi") return ObserverVariant::Pi;
    if (name == "pid") return ObserverVariant::Pid;
    throw domain_error("unknown observer variant: " + name);
}

double sat(double e, double phi) {
    if (!(phi > 0.0)) throw domain_error("sat: boundary layer phi must be positive");
    return std::clamp(e / phi, -1.0, 1.0);
}

ObserverStepResult observer_step(const ObserverGains& gains, const CellParams& p,
                                 const OcvCurve& ocv, const ObserverState& state,
                                 double i_amps, double v_meas, double dt,
                                 std::optional<double> i_meas) {
    if (!(dt > 0.0)) throw domain_error("observer_step: dt must be positive");
    if (!std::isfinite(v_meas) || !std::isfinite(i_amps)) {
        throw domain_error("observer_step: non-finite measurement");
    }
    const double i_out = i_meas.value_or(i_amps);

    ObserverStepResult out;
    out.state = state;

    // Predict (same ZOH discretization as the simulator), then track the
    // terminal voltage through the local OCV segment.
    out.state.x_hat = step_exact(p, state.x_hat, i_amps, dt);
    out.v_hat = ocv.eval_extrapolated(out.state.x_hat.soc) + out.state.x_hat.v_a +
                out.state.x_hat.v_b + i_out * p.r_ohm;
    out.e = v_meas - out.v_hat;

    Eigen::Vector3d corr = Eigen::Vector3d::Zero();
    switch (gains.variant) {
    case ObserverVariant::Luenberger:
        corr = gains.l * out.e;
        break;
    case ObserverVariant::SlidingMode:
        // Switching term shares the linear gain direction; K_dc in volts so
        // k_dc -> 0 recovers the Luenberger trajectory bit for bit.
        corr = gains.h * (out.e + gains.k_dc * sat(out.e, gains.boundary_layer_phi));
        break;
    case ObserverVariant::Pi:
        out.state.c_pi += gains.k_i1 * out.e * dt;
        corr = gains.k_p * out.e + gains.k_i2 * out.state.c_pi;
        break;
    case ObserverVariant::Pid: {
        out.state.c_pi += gains.k_i1 * out.e * dt;
        const double e_d =
            state.has_e_prev ? (out.e - state.e_prev) / dt : 0.0;
        double e_d_used = e_d;
        if (gains.d_filter_tau > 0.0) {
            const double alpha = gains.d_filter_tau / (gains.d_filter_tau + dt);
            out.state.d_filtered = alpha * state.d_filtered + (1.0 - alpha) * e_d;
            e_d_used = out.state.d_filtered;
        } else {
            out.state.d_filtered = e_d;
        }
        out.state.e_prev = out.e;
        out.state.has_e_prev = true;
        corr = gains.k_p * out.e + gains.k_i2 * out.state.c_pi + gains.k_d * e_d_used;
        break;
    }
    }

    const Eigen::Vector3d x_new = out.state.x_hat.as_vector() + corr * dt;
    out.state.x_hat = StateVector::from_vector(x_new);
    return out;
}

namespace {

Eigen::Matrix3d a_matrix(const CellParams& p) {
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    a(0, 0) = -1.0 / p.tau_a();
    a(1, 1) = -1.0 / p.tau_b();
    return a;
}

Eigen::RowVector3d c_row(double m) { return {1.0, 1.0, m}; }

// Monic characteristic polynomial coefficients [1, a1, ..., an] via
// Faddeev-LeVerrier.
Eigen::VectorXd charpoly(const Eigen::MatrixXd& m) {
    const Eigen::Index n = m.rows();
    Eigen::VectorXd coeffs(n + 1);
    coeffs(0) = 1.0;
    Eigen::MatrixXd mk = m;
    for (Eigen::Index k = 1; k <= n; ++k) {
        if (k > 1) mk = m * (mk + coeffs(k - 1) * Eigen::MatrixXd::Identity(n, n));
        coeffs(k) = -mk.trace() / static_cast<double>(k);
    }
    return coeffs;
}

// Real monic polynomial from a conjugate-closed root set.
Eigen::VectorXd poly_from_roots(const std::vector<std::complex<double>>& roots) {
    std::vector<std::complex<double>> coeffs{1.0};
    for (const auto& r : roots) {
        std::vector<std::complex<double>> next(coeffs.size() + 1, 0.0);
        for (std::size_t i = 0; i < coeffs.size(); ++i) {
            next[i] += coeffs[i];
            next[i + 1] -= coeffs[i] * r;
        }
        coeffs = std::move(next);
    }
    Eigen::VectorXd out(coeffs.size());
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        if (std::abs(coeffs[i].imag()) > 1e-9 * (1.0 + std::abs(coeffs[i]))) {
            throw domain_error("place_poles: pole set not closed under conjugation");
        }
        out(static_cast<Eigen::Index>(i)) = coeffs[i].real();
    }
    return out;
}

// A_e as a function of the free gain vector, per variant.
Eigen::MatrixXd assemble_error_matrix(ObserverVariant variant,
                                      const Eigen::VectorXd& g,
                                      const CellParams& p, double m, double dt,
                                      double k_i1) {
    const Eigen::Matrix3d a = a_matrix(p);
    const Eigen::RowVector3d c = c_row(m);
    switch (variant) {
    case ObserverVariant::Luenberger:
    case ObserverVariant::SlidingMode: {
        const Eigen::Vector3d l = g.head<3>();
        return a - l * c;
    }
    case ObserverVariant::Pi:
    case ObserverVariant::Pid: {
        // For PID the proportional block carries K_p + K_d/dt; the caller
        // passes that combined vector in g.head(3).
        (void)dt;
        Eigen::Vector3d kp = g.head<3>();
        Eigen::Vector3d ki2 = g.tail<3>();
        Eigen::Matrix4d ae = Eigen::Matrix4d::Zero();
        ae.topLeftCorner<3, 3>() = a - kp * c;
        ae.topRightCorner<3, 1>() = ki2;
        ae.bottomLeftCorner<1, 3>() = -k_i1 * c;
        return ae;
    }
    }
    throw domain_error("unreachable");
}

} // namespace

Eigen::MatrixXd error_matrix(const ObserverGains& gains, const CellParams& p,
                             double m, std::optional<double> dt) {
    p.validate();
    switch (gains.variant) {
    case ObserverVariant::Luenberger:
        return assemble_error_matrix(gains.variant, gains.l, p, m, 0.0, 0.0);
    case ObserverVariant::SlidingMode:
        return assemble_error_matrix(gains.variant, gains.h, p, m, 0.0, 0.0);
    case ObserverVariant::Pi: {
        Eigen::VectorXd g(6);
        g << gains.k_p, gains.k_i2;
        return assemble_error_matrix(gains.variant, g, p, m, 0.0, gains.k_i1);
    }
    case ObserverVariant::Pid: {
        if (!dt.has_value() || !(*dt > 0.0)) {
            throw domain_error("error_matrix: pid requires a positive dt");
        }
        Eigen::VectorXd g(6);
        g << (gains.k_p + gains.k_d / *dt), gains.k_i2;
        return assemble_error_matrix(gains.variant, g, p, m, *dt, gains.k_i1);
    }
    }
    throw domain_error("unreachable");
}

HurwitzReport is_hurwitz(const Eigen::MatrixXd& m) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
    HurwitzReport rep;
    rep.spectral_abscissa = es.eigenvalues().real().maxCoeff();
    rep.hurwitz = rep.spectral_abscissa < 0.0;
    return rep;
}

ObserverGains place_poles(ObserverVariant variant, const CellParams& p, double m,
                          const std::vector<std::complex<double>>& desired_poles,
                          std::optional<double> dt, double derivative_share) {
    p.validate();
    const bool augmented =
        variant == ObserverVariant::Pi || variant == ObserverVariant::Pid;
    const int dim = augmented ? 4 : 3;
    const int ngains = augmented ? 6 : 3;

    if (static_cast<int>(desired_poles.size()) != dim) {
        throw domain_error("place_poles: pole count must equal the error-matrix dimension");
    }
    for (const auto& pole : desired_poles) {
        if (!(pole.real() < 0.0)) {
            throw domain_error("poles must have negative real parts");
        }
    }
    if (variant == ObserverVariant::Pid && (!dt.has_value() || !(*dt > 0.0))) {
        throw domain_error("place_poles: pid requires a positive dt");
    }

    const Eigen::VectorXd desired = poly_from_roots(desired_poles);

    // For the augmented variants the integral gain K_i2 is restricted to the
    // SOC channel, which makes the design square (4 unknowns, 4 coefficients)
    // and keeps the closed loop far less sensitive to the local OCV slope
    // than a minimum-norm spread across all six entries.
    const int nfree = augmented ? 4 : 3;
    const auto expand = [&](const Eigen::VectorXd& gf) {
        Eigen::VectorXd full = Eigen::VectorXd::Zero(ngains);
        full.head(3) = gf.head(3);
        if (augmented) full(5) = gf(3);
        return full;
    };

    // The characteristic polynomial is affine in the gain vector for every
    // variant, so the design reduces to one linear solve.
    const Eigen::VectorXd zero_g = Eigen::VectorXd::Zero(ngains);
    const Eigen::VectorXd coeffs0 =
        charpoly(assemble_error_matrix(variant, zero_g, p, m, dt.value_or(1.0), 1.0));
    Eigen::MatrixXd jac(dim, nfree);
    for (int j = 0; j < nfree; ++j) {
        Eigen::VectorXd ej = Eigen::VectorXd::Zero(nfree);
        ej(j) = 1.0;
        const Eigen::VectorXd cj = charpoly(
            assemble_error_matrix(variant, expand(ej), p, m, dt.value_or(1.0), 1.0));
        jac.col(j) = (cj - coeffs0).tail(dim);
    }
    const Eigen::VectorXd rhs = (desired - coeffs0).tail(dim);

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(jac);
    if (cod.rank() < dim) {
        throw design_error("place_poles: spectrum not assignable (system unobservable "
                           "at this OCV slope)");
    }
    const Eigen::VectorXd gf = cod.solve(rhs);
    const Eigen::VectorXd g = expand(gf);
    const double resid = (jac * gf - rhs).norm();
    if (resid > 1e-6 * (1.0 + rhs.norm())) {
        throw design_error("place_poles: pole placement residual too large");
    }

    ObserverGains gains;
    gains.variant = variant;
    switch (variant) {
    case ObserverVariant::Luenberger:
        gains.l = g.head<3>();
        break;
    case ObserverVariant::SlidingMode:
        gains.h = g.head<3>();
        break;
    case ObserverVariant::Pi:
        gains.k_p = g.head<3>();
        gains.k_i1 = 1.0;
        gains.k_i2 = g.tail<3>();
        break;
    case ObserverVariant::Pid: {
        const Eigen::Vector3d combined = g.head<3>();
        gains.k_d = derivative_share * *dt * combined;
        gains.k_p = (1.0 - derivative_share) * combined;
        gains.k_i1 = 1.0;
        gains.k_i2 = g.tail<3>();
        break;
    }
    }

    const auto rep = is_hurwitz(error_matrix(gains, p, m, dt));
    if (!rep.hurwitz) {
        throw design_error("place_poles: designed error matrix is not Hurwitz");
    }
    return gains;
}

ObserverGains place_poles(ObserverVariant variant, const CellParams& p,
                          const OcvCurve& ocv,
                          const std::vector<std::complex<double>>& desired_poles,
                          std::optional<double> dt, double derivative_share) {
    ObserverGains gains =
        place_poles(variant, p, ocv.mean_slope(), desired_poles, dt, derivative_share);
    for (std::size_t i = 0; i < ocv.segment_count(); ++i) {
        const double m_i = ocv.segment(i).first;
        const auto rep = is_hurwitz(error_matrix(gains, p, m_i, dt));
        if (!rep.hurwitz) {
            throw design_error("place_poles: design not Hurwitz at OCV segment " +
                               std::to_string(i) + " (slope " + std::to_string(m_i) +
                               ")");
        }
    }
    return gains;
}

} // namespace obsbench
