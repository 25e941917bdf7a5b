#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "obsbench/cell.hpp"

namespace obsbench {

enum class LieScenario { InputNl, StateNl, MeasurementNl };

struct RankReport {
    std::string matrix_kind;
    int rank = 0;
    std::vector<double> singular_values;
    bool full_rank = false;
};

/// Relative singular-value tolerance for numeric rank decisions.
inline constexpr double kRankEps = 1e-10;

/// Numeric rank: count of sigma_i > eps * sigma_max * max(rows, cols).
int numeric_rank(const Eigen::MatrixXd& m, double eps = kRankEps);

/// Columns [B, AB, A^2 B].
Eigen::Matrix3d controllability_matrix(const LinearSystem& sys);

/// Rows [C; CA; CA^2].
Eigen::Matrix3d observability_matrix(const LinearSystem& sys);

RankReport rank_report(const Eigen::MatrixXd& m, const std::string& kind,
                       int state_dim = 3);

struct LieResult {
    Eigen::MatrixXd matrix;
    RankReport report;
};

/// Gradient-of-Lie-derivative matrix for one nonlinear scenario, assembled
/// from the printed closed forms. ocv_derivs[j] is d^{j+1} Voc / ds^{j+1}
/// (index 0 = first derivative); order k >= 2 controls the row count.
/// full_rank additionally requires the scenario's d^k Voc / ds^k term to be
/// nonzero, matching the structural argument rather than plain numeric rank.
LieResult lie_observability_matrix(LieScenario scenario, const CellParams& p,
                                   const std::vector<double>& ocv_derivs,
                                   const Eigen::Vector3d& q, int order);

/// Least-squares polynomial fit of the breakpoint curve (default degree 5),
/// returning derivatives 1..max_order of the fit at the given soc. Used to
/// supply the higher OCV derivatives that a piecewise-linear curve lacks.
std::vector<double> smooth_ocv_derivatives(const OcvCurve& curve, double soc,
                                           int max_order, int degree = 5);

} // namespace obsbench
