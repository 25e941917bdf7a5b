#include "obsbench/srckf.hpp"

#include <cmath>

#include "obsbench/errors.hpp"

namespace obsbench {

namespace {

constexpr int kN = 3;
constexpr int kPoints = 2 * kN;

// Lower-triangular factor S with S S^T = A A^T, via QR of A^T, diagonal
// flipped non-negative.
Eigen::Matrix3d tria(const Eigen::MatrixXd& a) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a.transpose());
    Eigen::Matrix3d r =
        qr.matrixQR().topRows<kN>().triangularView<Eigen::Upper>();
    Eigen::Matrix3d s = r.transpose();
    for (int j = 0; j < kN; ++j) {
        if (s(j, j) < 0.0) s.col(j) = -s.col(j);
    }
    return s;
}

// 2n cubature points around (x, S): x +- sqrt(n) * S e_j.
Eigen::Matrix<double, kN, kPoints> cubature_points(const Eigen::Vector3d& x,
                                                   const Eigen::Matrix3d& s) {
    const double scale = std::sqrt(static_cast<double>(kN));
    Eigen::Matrix<double, kN, kPoints> pts;
    for (int j = 0; j < kN; ++j) {
        pts.col(j) = x + scale * s.col(j);
        pts.col(kN + j) = x - scale * s.col(j);
    }
    return pts;
}

} // namespace

SrckfState srckf_default_state(const StateVector& x0) {
    SrckfState st;
    st.x_hat = x0;
    st.s_sqrt = Eigen::Vector3d(1e-3, 1e-3, 0.05).asDiagonal();
    st.q_proc = Eigen::Vector3d(1e-8, 1e-8, 1e-10).asDiagonal();
    st.r_meas = 1e-4;
    return st;
}

SrckfStepResult srckf_step(const SrckfState& state, const CellParams& p,
                           const OcvCurve& ocv, double i_amps, double v_meas,
                           double dt, std::optional<double> i_meas) {
    if (!(dt > 0.0)) throw domain_error("srckf_step: dt must be positive");
    if (!(state.r_meas > 0.0)) throw domain_error("srckf_step: r_meas must be positive");
    if (!std::isfinite(v_meas) || !std::isfinite(i_amps)) {
        throw domain_error("srckf_step: non-finite measurement");
    }
    p.validate();

    const double da = std::exp(-dt / p.tau_a());
    const double db = std::exp(-dt / p.tau_b());
    const Eigen::Vector3d f_diag(da, db, 1.0);
    const Eigen::Vector3d g(p.r_a * (1.0 - da), p.r_b * (1.0 - db),
                            p.eta * dt / p.capacity_c);

    const double w = 1.0 / std::sqrt(static_cast<double>(kPoints));

    // --- predict ---
    auto pts = cubature_points(state.x_hat.as_vector(), state.s_sqrt);
    Eigen::Matrix<double, kN, kPoints> prop;
    for (int j = 0; j < kPoints; ++j) {
        prop.col(j) = f_diag.cwiseProduct(pts.col(j)) + g * i_amps;
    }
    const Eigen::Vector3d x_pred = prop.rowwise().mean();

    Eigen::MatrixXd chi(kN, kPoints + kN);
    chi.leftCols<kPoints>() = w * (prop.colwise() - x_pred);
    Eigen::LLT<Eigen::Matrix3d> llt_q(state.q_proc +
                                      1e-300 * Eigen::Matrix3d::Identity());
    chi.rightCols<kN>() = Eigen::Matrix3d(llt_q.matrixL());
    const Eigen::Matrix3d s_pred = tria(chi);

    // --- update ---
    const double i_out = i_meas.value_or(i_amps);
    auto upts = cubature_points(x_pred, s_pred);
    Eigen::Matrix<double, 1, kPoints> z;
    for (int j = 0; j < kPoints; ++j) {
        z(j) = ocv.eval_extrapolated(upts(2, j)) + upts(0, j) + upts(1, j) +
               i_out * p.r_ohm;
    }
    const double z_pred = z.mean();

    const Eigen::Matrix<double, kN, kPoints> xc = w * (upts.colwise() - x_pred);
    const Eigen::Matrix<double, 1, kPoints> zc = w * (z.array() - z_pred).matrix();

    const double s_zz = std::sqrt(zc.squaredNorm() + state.r_meas);
    const Eigen::Vector3d p_xz = xc * zc.transpose();
    const Eigen::Vector3d kgain = p_xz / (s_zz * s_zz);

    const double innovation = v_meas - z_pred;

    Eigen::MatrixXd resid(kN, kPoints + 1);
    resid.leftCols<kPoints>() = xc - kgain * zc;
    resid.col(kPoints) = kgain * std::sqrt(state.r_meas);
    const Eigen::Matrix3d s_upd = tria(resid);

    if (!s_upd.allFinite()) {
        throw numerical_error("srckf_step: covariance square root lost finiteness");
    }

    SrckfStepResult out;
    out.state = state;
    out.state.x_hat = StateVector::from_vector(x_pred + kgain * innovation);
    out.state.s_sqrt = s_upd;
    out.v_hat = z_pred;
    out.innovation = innovation;
    return out;
}

} // namespace obsbench
