#include "obsbench/characterization.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

namespace obsbench {

namespace {

// Linear interpolation over a branch, sorted ascending by soc internally.
class BranchInterp {
  public:
    explicit BranchInterp(std::vector<std::pair<double, double>> pts)
        : pts_(std::move(pts)) {
        if (pts_.size() < 2) {
            throw domain_error("extract_ocv: branch needs at least two samples");
        }
        const bool increasing = pts_.back().first > pts_.front().first;
        if (!increasing) std::reverse(pts_.begin(), pts_.end());
        for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
            if (!(pts_[i + 1].first > pts_[i].first)) {
                throw domain_error("extract_ocv: branch soc must be monotone");
            }
        }
    }

    double lo() const { return pts_.front().first; }
    double hi() const { return pts_.back().first; }

    double at(double soc) const {
        auto it = std::upper_bound(
            pts_.begin(), pts_.end(), soc,
            [](double s, const auto& pt) { return s < pt.first; });
        std::size_t i = static_cast<std::size_t>(it - pts_.begin());
        if (i == 0) i = 1;
        if (i == pts_.size()) i = pts_.size() - 1;
        const auto& [s0, v0] = pts_[i - 1];
        const auto& [s1, v1] = pts_[i];
        return v0 + (v1 - v0) * (soc - s0) / (s1 - s0);
    }

  private:
    std::vector<std::pair<double, double>> pts_;
};

} // namespace

OcvCurve extract_ocv(const LowCurrentTest& test, const std::vector<double>& grid) {
    BranchInterp chg(test.charge);
    BranchInterp dis(test.discharge);
    const double lo = std::max(chg.lo(), dis.lo());
    const double hi = std::min(chg.hi(), dis.hi());
    if (!(hi > lo)) {
        throw domain_error("extract_ocv: charge and discharge branches do not overlap");
    }
    if (grid.size() < 2) throw domain_error("extract_ocv: grid needs >= 2 points");
    for (double g : grid) {
        if (g < lo || g > hi) {
            throw domain_error("extract_ocv: grid point outside the common soc range");
        }
    }

    std::vector<double> soc(grid), ocv(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        ocv[i] = 0.5 * (chg.at(grid[i]) + dis.at(grid[i])); // plain average
    }
    for (std::size_t i = 0; i + 1 < ocv.size(); ++i) {
        if (!(ocv[i + 1] > ocv[i])) {
            throw identification_error("extract_ocv: averaged curve is not strictly increasing");
        }
    }
    // The OcvCurve type wants [0,1] coverage; identification grids may be
    // narrower, so rescale is not an option. Extend flat-slope-free by exact
    // endpoint extension only when the grid already covers [0,1].
    if (soc.front() != 0.0 || soc.back() != 1.0) {
        throw domain_error("extract_ocv: grid must cover [0, 1]");
    }
    return OcvCurve(std::move(soc), std::move(ocv));
}

std::vector<std::pair<double, double>> segment_slopes(const OcvCurve& curve) {
    std::vector<std::pair<double, double>> out;
    out.reserve(curve.segment_count());
    for (std::size_t i = 0; i < curve.segment_count(); ++i) {
        out.push_back(curve.segment(i));
    }
    return out;
}

void PsoConfig::validate() const {
    if (swarm_size < 2) throw domain_error("pso: swarm_size must be >= 2");
    if (iterations < 1) throw domain_error("pso: iterations must be >= 1");
    for (const ParamBounds* b : {&r_ohm, &r_a, &c_a, &r_b, &c_b}) {
        if (!(b->lo > 0.0) || !(b->hi > b->lo) || !std::isfinite(b->hi)) {
            throw domain_error("pso: bounds must be positive, finite, lo < hi");
        }
    }
}

namespace {

using Pos = std::array<double, 5>; // r_ohm, r_a, c_a, r_b, c_b

CellParams to_params(const Pos& x, double capacity_c, double eta) {
    CellParams p;
    p.r_ohm = x[0];
    p.r_a = x[1];
    p.c_a = x[2];
    p.r_b = x[3];
    p.c_b = x[4];
    p.capacity_c = capacity_c;
    p.eta = eta;
    return p;
}

double objective(const Pos& x, const Loadfile& pulse, const OcvCurve& ocv,
                 double soc0, double capacity_c, double eta) {
    const CellParams p = to_params(x, capacity_c, eta);
    try {
        const SimResult sim = simulate(p, ocv, soc0, pulse);
        double sq = 0.0;
        for (std::size_t k = 0; k < pulse.size(); ++k) {
            const double d = sim.points[k].v - pulse[k].v;
            sq += d * d;
        }
        return std::sqrt(sq / static_cast<double>(pulse.size()));
    } catch (const std::exception&) {
        return std::numeric_limits<double>::infinity();
    }
}

} // namespace

PulseFitResult fit_pulse_pso(const Loadfile& pulse, const OcvCurve& ocv,
                             const PsoConfig& cfg, double capacity_c, double eta) {
    cfg.validate();
    if (pulse.size() < 3) throw domain_error("fit_pulse_pso: pulse too short");
    for (const auto& s : pulse) {
        if (!std::isfinite(s.v)) {
            throw domain_error("fit_pulse_pso: pulse needs a measured voltage column");
        }
    }

    // Pulse detection and ohmic jump guess at the largest current step.
    const double c_rate = capacity_c / 3600.0;
    double best_di = 0.0;
    double r_guess = 0.0;
    for (std::size_t k = 1; k < pulse.size(); ++k) {
        const double di = pulse[k].i - pulse[k - 1].i;
        if (std::abs(di) > std::abs(best_di)) {
            best_di = di;
            r_guess = std::abs((pulse[k].v - pulse[k - 1].v) / di);
        }
    }
    if (std::abs(best_di) <= 0.1 * c_rate) {
        throw domain_error("fit_pulse_pso: pulse contains no current step");
    }

    // Initial SOC from the rest voltage at the first sample.
    const double soc0 = ocv.inverse(pulse.front().v);

    const std::array<ParamBounds, 5> bounds{cfg.r_ohm, cfg.r_a, cfg.c_a, cfg.r_b,
                                            cfg.c_b};
    auto clamp_box = [&](Pos& x) {
        for (int d = 0; d < 5; ++d) x[d] = std::clamp(x[d], bounds[d].lo, bounds[d].hi);
    };

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const int n = cfg.swarm_size;
    std::vector<Pos> x(n), v(n), pbest(n);
    std::vector<double> pbest_f(n);

    for (int i = 0; i < n; ++i) {
        if (i < static_cast<int>(cfg.initial_positions.size())) {
            const CellParams& g = cfg.initial_positions[i];
            x[i] = {g.r_ohm, g.r_a, g.c_a, g.r_b, g.c_b};
        } else {
            for (int d = 0; d < 5; ++d) {
                x[i][d] = bounds[d].lo + unit(rng) * (bounds[d].hi - bounds[d].lo);
            }
            // seed the ohmic dimension around the jump guess
            x[i][0] = r_guess * std::pow(10.0, 0.3 * (2.0 * unit(rng) - 1.0));
        }
        clamp_box(x[i]);
        v[i] = {0.0, 0.0, 0.0, 0.0, 0.0};
        pbest[i] = x[i];
        pbest_f[i] = objective(x[i], pulse, ocv, soc0, capacity_c, eta);
    }

    int gbest_i = 0;
    for (int i = 1; i < n; ++i) {
        if (pbest_f[i] < pbest_f[gbest_i]) gbest_i = i;
    }
    Pos gbest = pbest[gbest_i];
    double gbest_f = pbest_f[gbest_i];

    for (int it = 0; it < cfg.iterations; ++it) {
        for (int i = 0; i < n; ++i) {
            for (int d = 0; d < 5; ++d) {
                const double r1 = unit(rng), r2 = unit(rng);
                v[i][d] = cfg.inertia * v[i][d] +
                          cfg.cognitive * r1 * (pbest[i][d] - x[i][d]) +
                          cfg.social * r2 * (gbest[d] - x[i][d]);
                x[i][d] += v[i][d];
                // reflective bound handling
                if (x[i][d] < bounds[d].lo) {
                    x[i][d] = bounds[d].lo + (bounds[d].lo - x[i][d]);
                    v[i][d] = -v[i][d];
                } else if (x[i][d] > bounds[d].hi) {
                    x[i][d] = bounds[d].hi - (x[i][d] - bounds[d].hi);
                    v[i][d] = -v[i][d];
                }
            }
            clamp_box(x[i]);
            const double f = objective(x[i], pulse, ocv, soc0, capacity_c, eta);
            if (f < pbest_f[i]) {
                pbest_f[i] = f;
                pbest[i] = x[i];
            }
            if (f < gbest_f) {
                gbest_f = f;
                gbest = x[i];
            }
        }
    }

    if (!std::isfinite(gbest_f)) {
        throw identification_error("fit_pulse_pso: every candidate simulation failed");
    }
    PulseFitResult res;
    res.params = to_params(gbest, capacity_c, eta);
    res.rmse = gbest_f;
    return res;
}

} // namespace obsbench
