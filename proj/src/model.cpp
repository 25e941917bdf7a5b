#include "obsbench/model.hpp"

#include <algorithm>
#include <cmath>

namespace obsbench {

LinearSystem build_linear_system(const CellParams& p, const OcvCurve& ocv,
                                 double soc_operating) {
    p.validate();
    if (!(soc_operating >= 0.0 && soc_operating <= 1.0)) {
        throw domain_error("build_linear_system: soc outside [0, 1]");
    }
    auto [m, c] = ocv.segment(ocv.segment_index(soc_operating));

    LinearSystem sys;
    sys.a(0, 0) = -1.0 / p.tau_a();
    sys.a(1, 1) = -1.0 / p.tau_b();
    sys.a(2, 2) = 0.0;
    sys.b << 1.0 / p.c_a, 1.0 / p.c_b, p.eta / p.capacity_c;
    sys.c << 1.0, 1.0, m;
    sys.d = p.r_ohm;
    sys.c_offset = c;
    return sys;
}

StateVector step_exact(const CellParams& p, const StateVector& x, double i_amps,
                       double dt) {
    if (!(dt > 0.0)) throw domain_error("step_exact: dt must be positive");
    const double da = std::exp(-dt / p.tau_a());
    const double db = std::exp(-dt / p.tau_b());
    StateVector out;
    out.v_a = da * x.v_a + p.r_a * (1.0 - da) * i_amps;
    out.v_b = db * x.v_b + p.r_b * (1.0 - db) * i_amps;
    out.soc = x.soc + p.eta * i_amps * dt / p.capacity_c;
    return out;
}

StateVector step_euler(const CellParams& p, const StateVector& x, double i_amps,
                       double dt) {
    if (!(dt > 0.0)) throw domain_error("step_euler: dt must be positive");
    StateVector out;
    out.v_a = x.v_a + dt * (-x.v_a / p.tau_a() + i_amps / p.c_a);
    out.v_b = x.v_b + dt * (-x.v_b / p.tau_b() + i_amps / p.c_b);
    out.soc = x.soc + dt * p.eta * i_amps / p.capacity_c;
    return out;
}

double terminal_voltage(const CellParams& p, const OcvCurve& ocv,
                        const StateVector& x, double i_amps) {
    return ocv.eval(x.soc) + i_amps * p.r_ohm + x.v_a + x.v_b;
}

namespace {

template <typename ParamsAt>
SimResult simulate_impl(ParamsAt&& params_at, const OcvCurve& ocv, double soc0,
                        const Loadfile& load, StepMode mode) {
    if (!(soc0 >= 0.0 && soc0 <= 1.0)) {
        throw domain_error("simulate: initial soc outside [0, 1]");
    }
    SimResult res;
    if (load.empty()) {
        SimPoint pt;
        pt.x.soc = soc0;
        res.points.push_back(pt);
        return res;
    }
    for (std::size_t k = 0; k + 1 < load.size(); ++k) {
        if (!(load[k + 1].t > load[k].t)) {
            throw format_error("simulate: loadfile timestamps must be strictly increasing");
        }
    }

    StateVector x;
    x.soc = soc0;
    res.points.reserve(load.size());
    for (std::size_t k = 0; k < load.size(); ++k) {
        const CellParams p = params_at(load[k], x.soc);
        if (k > 0) {
            const double dt = load[k].t - load[k - 1].t;
            const double i_prev = load[k - 1].i;
            x = (mode == StepMode::ZeroOrderHold) ? step_exact(p, x, i_prev, dt)
                                                  : step_euler(p, x, i_prev, dt);
            if (x.soc < 0.0 || x.soc > 1.0) {
                x.soc = std::clamp(x.soc, 0.0, 1.0);
                res.soc_saturated = true;
            }
        }
        SimPoint pt;
        pt.t = load[k].t;
        pt.x = x;
        pt.i = load[k].i;
        pt.v = terminal_voltage(p, ocv, x, load[k].i);
        res.points.push_back(pt);
    }
    return res;
}

} // namespace

SimResult simulate(const CellParams& p, const OcvCurve& ocv, double soc0,
                   const Loadfile& load, StepMode mode) {
    p.validate();
    return simulate_impl([&](const LoadSample&, double) { return p; }, ocv, soc0,
                         load, mode);
}

SimResult simulate(const ParamMap& map, const OcvCurve& ocv, double soc0,
                   const Loadfile& load, StepMode mode) {
    const double t_mid = 0.5 * (map.temp_grid().front() + map.temp_grid().back());
    return simulate_impl(
        [&](const LoadSample& s, double soc) {
            const double temp = std::isnan(s.temp_c) ? t_mid : s.temp_c;
            return map.at(temp, soc);
        },
        ocv, soc0, load, mode);
}

OcvCurve default_ocv() {
    // 21 uniform breakpoints; gentle S-shape around a 3.2 + 0.8 s trend so
    // segment slopes stay well away from zero.
    std::vector<double> soc(21), ocv(21);
    for (int k = 0; k <= 20; ++k) {
        const double s = k / 20.0;
        soc[k] = s;
        ocv[k] = 3.2 + 0.8 * s + 0.10 * (s - 0.5) * (s - 0.5) * (s - 0.5) * 4.0 -
                 0.05 * std::exp(-12.0 * s) + 0.05 * std::exp(-12.0 * (1.0 - s));
    }
    return OcvCurve(std::move(soc), std::move(ocv));
}

CellParams default_cell() {
    CellParams p;
    p.r_ohm = 0.5e-3;
    p.r_a = 0.1e-3;
    p.c_a = 3.0e5;    // tau_a = 30 s
    p.r_b = 0.12e-3;
    p.c_b = 2.5e6;    // tau_b = 300 s
    p.capacity_c = 58.0 * 3600.0; // 58 Ah
    p.eta = 1.0;
    return p;
}

} // namespace obsbench
