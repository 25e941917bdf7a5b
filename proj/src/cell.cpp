#include "obsbench/cell.hpp"

#include <algorithm>
#include <cmath>

namespace obsbench {

void CellParams::validate() const {
    auto pos = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!pos(r_ohm) || !pos(r_a) || !pos(c_a) || !pos(r_b) || !pos(c_b) ||
        !pos(capacity_c)) {
        throw domain_error("cell params: r_ohm, r_a, c_a, r_b, c_b, capacity_c "
                           "must be finite and strictly positive");
    }
    if (!std::isfinite(eta) || eta <= 0.0 || eta > 1.0) {
        throw domain_error("cell params: eta must be in (0, 1]");
    }
    if (!std::isfinite(tau_a()) || !std::isfinite(tau_b())) {
        throw domain_error("cell params: time constants must be finite");
    }
}

OcvCurve::OcvCurve(std::vector<double> soc, std::vector<double> ocv)
    : soc_(std::move(soc)), ocv_(std::move(ocv)) {
    if (soc_.size() != ocv_.size() || soc_.size() < 2) {
        throw domain_error("ocv curve: need at least two (soc, ocv) breakpoints");
    }
    for (std::size_t i = 0; i + 1 < soc_.size(); ++i) {
        if (!(soc_[i + 1] > soc_[i])) {
            throw domain_error("ocv curve: soc breakpoints must be strictly increasing");
        }
        if (!(ocv_[i + 1] > ocv_[i])) {
            throw domain_error("ocv curve: ocv values must be strictly increasing");
        }
    }
    if (soc_.front() != 0.0 || soc_.back() != 1.0) {
        throw domain_error("ocv curve: breakpoints must cover [0, 1]");
    }
}

std::size_t OcvCurve::segment_index(double soc) const {
    if (!(soc >= 0.0 && soc <= 1.0)) {
        throw domain_error("ocv eval: soc outside [0, 1]");
    }
    auto it = std::upper_bound(soc_.begin(), soc_.end(), soc);
    std::size_t i = static_cast<std::size_t>(it - soc_.begin());
    if (i == 0) return 0;
    if (i >= soc_.size()) return soc_.size() - 2;
    return i - 1;
}

std::pair<double, double> OcvCurve::segment(std::size_t i) const {
    const double s0 = soc_[i], s1 = soc_[i + 1];
    const double v0 = ocv_[i], v1 = ocv_[i + 1];
    const double m = (v1 - v0) / (s1 - s0);
    const double c = (v0 * s1 - v1 * s0) / (s1 - s0);
    return {m, c};
}

double OcvCurve::eval(double soc) const {
    const std::size_t i = segment_index(soc);
    // exact at breakpoints
    if (soc == soc_[i]) return ocv_[i];
    if (soc == soc_[i + 1]) return ocv_[i + 1];
    auto [m, c] = segment(i);
    return m * soc + c;
}

double OcvCurve::eval_extrapolated(double soc) const {
    if (soc >= 0.0 && soc <= 1.0) return eval(soc);
    const std::size_t i = (soc < 0.0) ? 0 : segment_count() - 1;
    auto [m, c] = segment(i);
    return m * soc + c;
}

double OcvCurve::inverse(double volts) const {
    if (volts <= ocv_.front()) return soc_.front();
    if (volts >= ocv_.back()) return soc_.back();
    auto it = std::upper_bound(ocv_.begin(), ocv_.end(), volts);
    std::size_t i = static_cast<std::size_t>(it - ocv_.begin()) - 1;
    auto [m, c] = segment(i);
    return (volts - c) / m;
}

double OcvCurve::mean_slope() const {
    double sum = 0.0;
    for (std::size_t i = 0; i < segment_count(); ++i) sum += segment(i).first;
    return sum / static_cast<double>(segment_count());
}

ParamMap::ParamMap(std::vector<double> temp_grid, std::vector<double> soc_grid,
                   std::vector<CellParams> params_row_major)
    : temp_grid_(std::move(temp_grid)), soc_grid_(std::move(soc_grid)),
      params_(std::move(params_row_major)) {
    if (temp_grid_.empty() || soc_grid_.empty()) {
        throw domain_error("param map: empty grid");
    }
    for (std::size_t i = 0; i + 1 < temp_grid_.size(); ++i) {
        if (!(temp_grid_[i + 1] > temp_grid_[i])) {
            throw domain_error("param map: temperature grid must be strictly increasing");
        }
    }
    for (std::size_t i = 0; i + 1 < soc_grid_.size(); ++i) {
        if (!(soc_grid_[i + 1] > soc_grid_[i])) {
            throw domain_error("param map: soc grid must be strictly increasing");
        }
    }
    if (params_.size() != temp_grid_.size() * soc_grid_.size()) {
        throw domain_error("param map: grid/params size mismatch");
    }
    for (const auto& p : params_) p.validate();
}

namespace {
// Bracketing cell index and normalized coordinate, clamped to the grid.
std::pair<std::size_t, double> locate(const std::vector<double>& grid, double v) {
    if (grid.size() == 1 || v <= grid.front()) return {0, 0.0};
    if (v >= grid.back()) return {grid.size() - 2, 1.0};
    auto it = std::upper_bound(grid.begin(), grid.end(), v);
    std::size_t i = static_cast<std::size_t>(it - grid.begin()) - 1;
    return {i, (v - grid[i]) / (grid[i + 1] - grid[i])};
}
} // namespace

CellParams ParamMap::at(double temp_c, double soc) const {
    auto [ti, ft] = locate(temp_grid_, temp_c);
    auto [si, fs] = locate(soc_grid_, soc);
    const std::size_t ti1 = (temp_grid_.size() == 1) ? ti : ti + 1;
    const std::size_t si1 = (soc_grid_.size() == 1) ? si : si + 1;

    auto lerp_field = [&](double CellParams::*f) {
        const double v00 = node(ti, si).*f, v01 = node(ti, si1).*f;
        const double v10 = node(ti1, si).*f, v11 = node(ti1, si1).*f;
        const double low = v00 + fs * (v01 - v00);
        const double high = v10 + fs * (v11 - v10);
        return low + ft * (high - low);
    };

    CellParams out;
    out.r_ohm = lerp_field(&CellParams::r_ohm);
    out.r_a = lerp_field(&CellParams::r_a);
    out.c_a = lerp_field(&CellParams::c_a);
    out.r_b = lerp_field(&CellParams::r_b);
    out.c_b = lerp_field(&CellParams::c_b);
    out.capacity_c = lerp_field(&CellParams::capacity_c);
    out.eta = lerp_field(&CellParams::eta);
    return out;
}

} // namespace obsbench
