#include <doctest.h>

#include <cmath>
#include <random>

#include "obsbench/errors.hpp"
#include "obsbench/model.hpp"
#include "obsbench/observers.hpp"

using namespace obsbench;
using cd = std::complex<double>;

namespace {

CellParams example_cell() {
    CellParams p;
    p.r_ohm = 0.01;
    p.r_a = 1.0;
    p.c_a = 1.0;  // tau_a = 1
    p.r_b = 2.0;
    p.c_b = 5.0;  // tau_b = 10
    p.capacity_c = 3600.0;
    p.eta = 1.0;
    return p;
}

OcvCurve slope07_curve() { return OcvCurve({0.0, 1.0}, {3.0, 3.7}); }

std::vector<double> sorted_real_eigs(const Eigen::MatrixXd& m) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(m);
    std::vector<double> out;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        out.push_back(es.eigenvalues()(i).real());
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

TEST_CASE("observer variant names round trip") {
    for (auto v : {ObserverVariant::Luenberger, ObserverVariant::SlidingMode,
                   ObserverVariant::Pi, ObserverVariant::Pid}) {
        CHECK(observer_variant_from_string(to_string(v)) == v);
    }
    CHECK(observer_variant_from_string("smo") == ObserverVariant::SlidingMode);
    CHECK_THROWS_AS(observer_variant_from_string("ekf"), domain_error);
}

TEST_CASE("boundary-layer saturation") {
    const double phi = 0.01;
    CHECK(sat(2.0 * phi, phi) == 1.0);
    CHECK(sat(-2.0 * phi, phi) == -1.0);
    CHECK(sat(0.0, phi) == 0.0);
    CHECK(sat(0.5 * phi, phi) == doctest::Approx(0.5));
    CHECK_THROWS_AS(sat(0.1, 0.0), domain_error);
    CHECK_THROWS_AS(sat(0.1, -1.0), domain_error);

    SUBCASE("odd, bounded and monotone") {
        double prev = -2.0;
        for (double e = -0.05; e <= 0.05; e += 0.001) {
            const double s = sat(e, phi);
            CHECK(s >= -1.0);
            CHECK(s <= 1.0);
            CHECK(s >= prev);
            CHECK(sat(-e, phi) == doctest::Approx(-s).epsilon(1e-14));
            prev = s;
        }
    }
}

TEST_CASE("zero-gain luenberger is open-loop propagation") {
    CellParams p = example_cell();
    OcvCurve c = slope07_curve();
    ObserverGains g;
    g.variant = ObserverVariant::Luenberger;
    ObserverState st;
    st.reset(StateVector{0.0, 0.0, 0.5});
    StateVector open = st.x_hat;
    for (int k = 0; k < 50; ++k) {
        auto res = observer_step(g, p, c, st, -5.0, 3.0 + 0.1 * k, 1.0);
        st = res.state;
        open = step_exact(p, open, -5.0, 1.0);
        CHECK(st.x_hat.v_a == open.v_a);
        CHECK(st.x_hat.v_b == open.v_b);
        CHECK(st.x_hat.soc == open.soc);
    }
}

TEST_CASE("matched measurements keep every variant on the open-loop trajectory") {
    CellParams p = example_cell();
    OcvCurve c = slope07_curve();
    // ground truth with the same model and initial state
    Loadfile load;
    for (int k = 0; k <= 200; ++k) {
        LoadSample s;
        s.t = k;
        s.i = (k % 40 < 20) ? -4.0 : 1.0;
        load.push_back(s);
    }
    SimResult truth = simulate(p, c, 0.6, load);

    for (auto variant : {ObserverVariant::Luenberger, ObserverVariant::SlidingMode,
                         ObserverVariant::Pi, ObserverVariant::Pid}) {
        ObserverGains g;
        g.variant = variant;
        g.l << 0.1, 0.1, 0.05;
        g.h = g.l;
        g.k_dc = 0.02;
        g.k_p << 0.1, 0.1, 0.05;
        g.k_i2 << 0.0, 0.0, 0.001;
        g.k_d << 0.01, 0.01, 0.005;
        ObserverState st;
        st.reset(StateVector{0.0, 0.0, 0.6});
        for (std::size_t k = 1; k < load.size(); ++k) {
            auto res = observer_step(g, p, c, st, load[k - 1].i, truth.points[k].v,
                                     1.0, load[k].i);
            st = res.state;
            CHECK(std::abs(res.e) < 1e-12);
            CHECK(st.x_hat.soc == doctest::Approx(truth.points[k].x.soc).epsilon(1e-12));
        }
    }
}

TEST_CASE("single luenberger step matches a hand oracle") {
    CellParams p;
    p.r_ohm = 0.01;
    p.r_a = 1.0;
    p.c_a = 10.0; // tau_a = 10
    p.r_b = 1.0;
    p.c_b = 10.0; // tau_b = 10
    p.capacity_c = 3600.0;
    p.eta = 1.0;
    OcvCurve c({0.0, 1.0}, {3.0, 4.0}); // slope exactly 1

    ObserverGains g;
    g.variant = ObserverVariant::Luenberger;
    g.l << 0.0, 0.0, 0.01;

    ObserverState st;
    st.reset(StateVector{0.0, 0.0, 0.5});
    const double dt = 1.0, i = 0.0;
    // measured voltage carries a 10 mV offset above the model prediction
    const double decay = std::exp(-dt / 10.0);
    const double v_pred = 3.0 + 0.5; // ocv(0.5), no RC, no current
    const double v_meas = v_pred + 0.01;

    auto res = observer_step(g, p, c, st, i, v_meas, dt);
    CHECK(res.v_hat == doctest::Approx(v_pred).epsilon(1e-14));
    CHECK(res.e == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(res.state.x_hat.v_a == doctest::Approx(0.0 * decay).epsilon(1e-14));
    CHECK(res.state.x_hat.soc ==
          doctest::Approx(0.5 + 0.01 * 0.01 * dt).epsilon(1e-12));
}

TEST_CASE("observer step input validation") {
    ObserverGains g;
    ObserverState st;
    st.reset(StateVector{});
    CHECK_THROWS_AS(observer_step(g, example_cell(), slope07_curve(), st, 0.0, 3.0, 0.0),
                    domain_error);
    CHECK_THROWS_AS(observer_step(g, example_cell(), slope07_curve(), st, 0.0,
                                  std::numeric_limits<double>::quiet_NaN(), 1.0),
                    domain_error);
}

TEST_CASE("sliding mode with zero switching gain equals luenberger bit for bit") {
    CellParams p = example_cell();
    OcvCurve c = slope07_curve();
    ObserverGains lg;
    lg.variant = ObserverVariant::Luenberger;
    lg.l << 0.2, 0.05, 0.03;
    ObserverGains sg;
    sg.variant = ObserverVariant::SlidingMode;
    sg.h = lg.l;
    sg.k_dc = 0.0;

    ObserverState a, b;
    a.reset(StateVector{0.0, 0.0, 0.4});
    b.reset(StateVector{0.0, 0.0, 0.4});
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int k = 0; k < 300; ++k) {
        const double i = -10.0 * unit(rng);
        const double v = 3.3 + 0.2 * unit(rng);
        a = observer_step(lg, p, c, a, i, v, 1.0).state;
        b = observer_step(sg, p, c, b, i, v, 1.0).state;
        CHECK(a.x_hat.v_a == b.x_hat.v_a);
        CHECK(a.x_hat.v_b == b.x_hat.v_b);
        CHECK(a.x_hat.soc == b.x_hat.soc);
    }
}

TEST_CASE("pid with zero derivative gain equals pi bit for bit") {
    CellParams p = example_cell();
    OcvCurve c = slope07_curve();
    ObserverGains pig;
    pig.variant = ObserverVariant::Pi;
    pig.k_p << 0.1, 0.02, 0.03;
    pig.k_i2 << 0.0, 0.0, 0.002;
    ObserverGains pidg = pig;
    pidg.variant = ObserverVariant::Pid;
    pidg.k_d.setZero();

    ObserverState a, b;
    a.reset(StateVector{0.0, 0.0, 0.4});
    b.reset(StateVector{0.0, 0.0, 0.4});
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int k = 0; k < 300; ++k) {
        const double i = -8.0 * unit(rng);
        const double v = 3.3 + 0.2 * unit(rng);
        a = observer_step(pig, p, c, a, i, v, 1.0).state;
        b = observer_step(pidg, p, c, b, i, v, 1.0).state;
        CHECK(a.x_hat.soc == b.x_hat.soc);
        CHECK(a.c_pi == b.c_pi);
    }
}

TEST_CASE("error matrix: zero luenberger gain leaves the open-loop spectrum") {
    ObserverGains g;
    g.variant = ObserverVariant::Luenberger;
    Eigen::MatrixXd ae = error_matrix(g, example_cell(), 0.7);
    REQUIRE(ae.rows() == 3);
    auto eigs = sorted_real_eigs(ae);
    CHECK(eigs[0] == doctest::Approx(-1.0));
    CHECK(eigs[1] == doctest::Approx(-0.1));
    CHECK(eigs[2] == doctest::Approx(0.0));
    CHECK_FALSE(is_hurwitz(ae).hurwitz);
}

TEST_CASE("error matrix: zero pi gains give the augmented open-loop spectrum") {
    ObserverGains g;
    g.variant = ObserverVariant::Pi;
    Eigen::MatrixXd ae = error_matrix(g, example_cell(), 0.7);
    REQUIRE(ae.rows() == 4);
    auto eigs = sorted_real_eigs(ae);
    CHECK(eigs[0] == doctest::Approx(-1.0));
    CHECK(eigs[1] == doctest::Approx(-0.1));
    CHECK(std::abs(eigs[2]) < 1e-12);
    CHECK(std::abs(eigs[3]) < 1e-12);
}

TEST_CASE("luenberger error matrix equals A - L C built independently") {
    CellParams p = example_cell();
    const double m = 0.7;
    ObserverGains g;
    g.variant = ObserverVariant::Luenberger;
    g.l << 0.3, -0.1, 0.05;
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    a(0, 0) = -1.0 / p.tau_a();
    a(1, 1) = -1.0 / p.tau_b();
    Eigen::RowVector3d c(1.0, 1.0, m);
    Eigen::Matrix3d expect = a - g.l * c;
    CHECK((error_matrix(g, p, m) - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("pid error matrix requires dt") {
    ObserverGains g;
    g.variant = ObserverVariant::Pid;
    CHECK_THROWS_AS(error_matrix(g, example_cell(), 0.7), domain_error);
    CHECK_NOTHROW(error_matrix(g, example_cell(), 0.7, 1.0));
}

TEST_CASE("hurwitz check") {
    Eigen::Matrix3d d = Eigen::Vector3d(-1.0, -2.0, -3.0).asDiagonal();
    auto rep = is_hurwitz(d);
    CHECK(rep.hurwitz);
    CHECK(rep.spectral_abscissa == doctest::Approx(-1.0));

    Eigen::Matrix3d z = Eigen::Vector3d(-1.0, -2.0, 0.0).asDiagonal();
    auto rep0 = is_hurwitz(z);
    CHECK_FALSE(rep0.hurwitz);
    CHECK(rep0.spectral_abscissa == doctest::Approx(0.0));
}

TEST_CASE("pole placement round trips through the error matrix") {
    CellParams p = example_cell();
    const double m = 0.7;

    SUBCASE("luenberger, poles (-1, -2, -3)") {
        auto g = place_poles(ObserverVariant::Luenberger, p, m,
                             {cd(-1), cd(-2), cd(-3)});
        auto eigs = sorted_real_eigs(error_matrix(g, p, m));
        CHECK(eigs[0] == doctest::Approx(-3.0).epsilon(1e-8));
        CHECK(eigs[1] == doctest::Approx(-2.0).epsilon(1e-8));
        CHECK(eigs[2] == doctest::Approx(-1.0).epsilon(1e-8));
        CHECK(is_hurwitz(error_matrix(g, p, m)).hurwitz);
    }
    SUBCASE("sliding mode shares the linear design") {
        auto g = place_poles(ObserverVariant::SlidingMode, p, m,
                             {cd(-0.5), cd(-1.5), cd(-2.5)});
        auto eigs = sorted_real_eigs(error_matrix(g, p, m));
        CHECK(eigs[0] == doctest::Approx(-2.5).epsilon(1e-8));
        CHECK(eigs[2] == doctest::Approx(-0.5).epsilon(1e-8));
    }
    SUBCASE("pi, four real poles") {
        auto g = place_poles(ObserverVariant::Pi, p, m,
                             {cd(-0.5), cd(-1.0), cd(-2.0), cd(-3.0)}, 1.0);
        CHECK(g.k_i1 == 1.0);
        auto eigs = sorted_real_eigs(error_matrix(g, p, m));
        CHECK(eigs[0] == doctest::Approx(-3.0).epsilon(1e-8));
        CHECK(eigs[1] == doctest::Approx(-2.0).epsilon(1e-8));
        CHECK(eigs[2] == doctest::Approx(-1.0).epsilon(1e-8));
        CHECK(eigs[3] == doctest::Approx(-0.5).epsilon(1e-8));
    }
    SUBCASE("pid splits the combined proportional gain") {
        const double dt = 1.0, share = 0.2;
        auto g = place_poles(ObserverVariant::Pid, p, m,
                             {cd(-0.5), cd(-1.0), cd(-2.0), cd(-3.0)}, dt, share);
        // k_d / dt recombines with k_p to the placed proportional block
        CHECK((g.k_d / dt - (share / (1.0 - share)) * g.k_p).cwiseAbs().maxCoeff() <
              1e-12);
        auto eigs = sorted_real_eigs(error_matrix(g, p, m, dt));
        CHECK(eigs[0] == doctest::Approx(-3.0).epsilon(1e-8));
        CHECK(eigs[3] == doctest::Approx(-0.5).epsilon(1e-8));
    }
    SUBCASE("complex conjugate pair") {
        auto g = place_poles(ObserverVariant::Luenberger, p, m,
                             {cd(-1.0, 2.0), cd(-1.0, -2.0), cd(-3.0)});
        Eigen::EigenSolver<Eigen::MatrixXd> es(error_matrix(g, p, m));
        double best = 1e300;
        for (Eigen::Index i = 0; i < 3; ++i) {
            best = std::min(best, std::abs(es.eigenvalues()(i) - cd(-1.0, 2.0)));
        }
        CHECK(best < 1e-8);
    }
}

TEST_CASE("pole placement rejects invalid requests") {
    CellParams p = example_cell();
    CHECK_THROWS_AS(place_poles(ObserverVariant::Luenberger, p, 0.7,
                                {cd(-1), cd(-2), cd(1)}),
                    domain_error);
    CHECK_THROWS_AS(place_poles(ObserverVariant::Luenberger, p, 0.7,
                                {cd(-1), cd(-2)}),
                    domain_error);
    CHECK_THROWS_AS(place_poles(ObserverVariant::Luenberger, p, 0.7,
                                {cd(-1, 1), cd(-1, 2), cd(-2)}),
                    domain_error);
    CHECK_THROWS_AS(place_poles(ObserverVariant::Pid, p, 0.7,
                                {cd(-1), cd(-2), cd(-3), cd(-4)}),
                    domain_error); // missing dt
}

TEST_CASE("pole placement fails on an unobservable cell") {
    CellParams p = example_cell();
    p.c_b = 0.5; // tau_b = tau_a = 1
    CHECK_THROWS_AS(place_poles(ObserverVariant::Luenberger, p, 0.7,
                                {cd(-1), cd(-2), cd(-3)}),
                    design_error);
    CHECK_THROWS_AS(place_poles(ObserverVariant::Pi, p, 0.7,
                                {cd(-1), cd(-2), cd(-3), cd(-4)}, 1.0),
                    design_error);
}

TEST_CASE("curve-wide design is hurwitz on every segment") {
    CellParams p = default_cell();
    OcvCurve c = default_ocv();
    auto g = place_poles(ObserverVariant::Pi, p, c,
                         {cd(-1.0 / p.tau_a()), cd(-1.0 / p.tau_b()), cd(-0.02),
                          cd(-0.03)},
                         1.0);
    for (std::size_t i = 0; i < c.segment_count(); ++i) {
        CHECK(is_hurwitz(error_matrix(g, p, c.segment(i).first, 1.0)).hurwitz);
    }
}

TEST_CASE("designed observer converges on a matched noiseless run") {
    CellParams p = default_cell();
    OcvCurve c = default_ocv();
    auto g = place_poles(ObserverVariant::Luenberger, p, c,
                         {cd(-0.13), cd(-0.003), cd(-0.060)});
    const double alpha =
        is_hurwitz(error_matrix(g, p, c.mean_slope())).spectral_abscissa;
    REQUIRE(alpha < 0.0);

    Loadfile load;
    const double horizon = 10.0 / std::abs(alpha) + 100.0;
    for (double t = 0.0; t <= horizon; t += 1.0) {
        LoadSample s;
        s.t = t;
        s.i = -10.0;
        load.push_back(s);
    }
    SimResult truth = simulate(p, c, 0.8, load);

    ObserverState st;
    st.reset(StateVector{0.0, 0.0, 0.6}); // 20-point initial soc error
    double last_e = 0.0;
    for (std::size_t k = 1; k < load.size(); ++k) {
        auto res = observer_step(g, p, c, st, load[k - 1].i, truth.points[k].v,
                                 1.0, load[k].i);
        st = res.state;
        last_e = res.e;
    }
    CHECK(std::abs(last_e) < 1e-4);
    CHECK(std::abs(st.x_hat.soc - truth.points.back().x.soc) < 1e-3);
}
