#include "obsbench/observability.hpp"

#include <cmath>

namespace obsbench {

int numeric_rank(const Eigen::MatrixXd& m, double eps) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    const double thresh =
        eps * sv(0) * static_cast<double>(std::max(m.rows(), m.cols()));
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > thresh) ++rank;
    }
    return rank;
}

Eigen::Matrix3d controllability_matrix(const LinearSystem& sys) {
    Eigen::Matrix3d con;
    con.col(0) = sys.b;
    con.col(1) = sys.a * sys.b;
    con.col(2) = sys.a * sys.a * sys.b;
    return con;
}

Eigen::Matrix3d observability_matrix(const LinearSystem& sys) {
    Eigen::Matrix3d obs;
    obs.row(0) = sys.c;
    obs.row(1) = sys.c * sys.a;
    obs.row(2) = sys.c * sys.a * sys.a;
    return obs;
}

RankReport rank_report(const Eigen::MatrixXd& m, const std::string& kind,
                       int state_dim) {
    RankReport rep;
    rep.matrix_kind = kind;
    rep.rank = numeric_rank(m);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
        rep.singular_values.push_back(svd.singularValues()(i));
    }
    rep.full_rank = rep.rank == state_dim;
    return rep;
}

LieResult lie_observability_matrix(LieScenario scenario, const CellParams& p,
                                   const std::vector<double>& ocv_derivs,
                                   const Eigen::Vector3d& q, int order) {
    p.validate();
    if (order < 2) throw domain_error("lie matrix: order must be >= 2");
    if (static_cast<int>(ocv_derivs.size()) < order) {
        throw domain_error("lie matrix: need OCV derivatives up to the requested order");
    }
    const double a = -1.0 / p.tau_a();
    const double b = -1.0 / p.tau_b();
    const double eta_ct = p.eta / p.capacity_c;
    const int k = order;

    std::string kind;
    Eigen::MatrixXd m;
    double nl_term = 0.0; // the d^k Voc / ds^k factor deciding full rank

    switch (scenario) {
    case LieScenario::InputNl:
    case LieScenario::MeasurementNl: {
        // rows: dh, dLf^1..dLf^k, dLg^{k-1}
        m.setZero(k + 2, 3);
        m.row(0) << 1.0, 1.0, ocv_derivs[0];
        for (int j = 1; j <= k; ++j) {
            m.row(j) << std::pow(a, j), std::pow(b, j), 0.0;
        }
        const double factor = (scenario == LieScenario::InputNl)
                                  ? std::pow(eta_ct + q(2), k - 1)
                                  : std::pow(eta_ct, k - 1);
        nl_term = factor * ocv_derivs[k - 1];
        m(k + 1, 2) = nl_term;
        kind = (scenario == LieScenario::InputNl) ? "lie_input" : "lie_measurement";
        break;
    }
    case LieScenario::StateNl: {
        // rows: dh, dLf^1..dLf^{k-1} (with Q3^j d^{j+1}Voc terms), dLg^{k-1}
        m.setZero(k + 1, 3);
        m.row(0) << 1.0, 1.0, ocv_derivs[0];
        for (int j = 1; j <= k - 1; ++j) {
            m.row(j) << std::pow(a + q(0), j), std::pow(b + q(1), j),
                std::pow(q(2), j) * ocv_derivs[j];
        }
        nl_term = std::pow(eta_ct, k - 1) * ocv_derivs[k - 1];
        m(k, 2) = nl_term;
        kind = "lie_state";
        break;
    }
    }

    LieResult res;
    res.matrix = m;
    res.report = rank_report(m, kind);
    // The structural criterion: observability of the nonlinear scenario needs
    // the higher OCV derivative term alive, not just three independent rows.
    res.report.full_rank = res.report.rank == 3 && nl_term != 0.0;
    return res;
}

std::vector<double> smooth_ocv_derivatives(const OcvCurve& curve, double soc,
                                           int max_order, int degree) {
    if (max_order < 1) throw domain_error("ocv derivatives: max_order must be >= 1");
    if (degree < 1) throw domain_error("ocv derivatives: degree must be >= 1");
    const auto& s = curve.soc_points();
    const auto& v = curve.ocv_points();
    const int n = static_cast<int>(s.size());
    Eigen::MatrixXd vand(n, degree + 1);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
        double pw = 1.0;
        for (int j = 0; j <= degree; ++j) {
            vand(i, j) = pw;
            pw *= s[i];
        }
        rhs(i) = v[i];
    }
    Eigen::VectorXd coeff = vand.colPivHouseholderQr().solve(rhs);

    std::vector<double> derivs(max_order, 0.0);
    for (int d = 1; d <= max_order; ++d) {
        double val = 0.0;
        for (int j = d; j <= degree; ++j) {
            double fall = 1.0;
            for (int r = 0; r < d; ++r) fall *= static_cast<double>(j - r);
            val += coeff(j) * fall * std::pow(soc, j - d);
        }
        derivs[d - 1] = val;
    }
    return derivs;
}

} // namespace obsbench
