#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "obsbench/errors.hpp"
#include "obsbench/io.hpp"

using namespace obsbench;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() /
                   ("obsbench_io_test_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
    fs::create_directories(dir);
    return dir;
}

void put_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

#ifdef OBSBENCH_CLI
int run_cli(const std::string& args) {
    const std::string cmd =
        std::string(OBSBENCH_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}
#endif

} // namespace

TEST_CASE("loadfile parsing") {
    const fs::path dir = scratch_dir();
    const fs::path f = dir / "load.csv";

    SUBCASE("happy path with all four columns") {
        put_file(f, "time_s,current_a,voltage_v,temp_c\n"
                    "0,-10,3.6,25\n"
                    "1,-10.5,3.59,25\n"
                    "\n"
                    "2,0,3.61,25.5\n");
        Loadfile l = parse_loadfile(f.string());
        REQUIRE(l.size() == 3);
        CHECK(l[1].i == -10.5);
        CHECK(l[2].v == 3.61);
        CHECK(l[2].temp_c == 25.5);
    }
    SUBCASE("voltage column optional") {
        put_file(f, "time_s,current_a\n0,-1\n1,-2\n");
        Loadfile l = parse_loadfile(f.string());
        REQUIRE(l.size() == 2);
        CHECK(std::isnan(l[0].v));
    }
    SUBCASE("unknown column rejected") {
        put_file(f, "time_s,current_a,soc\n0,-1,0.5\n");
        CHECK_THROWS_AS(parse_loadfile(f.string()), format_error);
    }
    SUBCASE("missing required column rejected") {
        put_file(f, "time_s,voltage_v\n0,3.6\n");
        CHECK_THROWS_AS(parse_loadfile(f.string()), format_error);
    }
    SUBCASE("bad numeric value names the row") {
        put_file(f, "time_s,current_a\n0,-1\n1,xyz\n");
        CHECK_THROWS_WITH_AS(parse_loadfile(f.string()),
                             doctest::Contains("row 3"), format_error);
    }
    SUBCASE("non-monotone time names the row") {
        put_file(f, "time_s,current_a\n0,-1\n2,-1\n1,-1\n");
        CHECK_THROWS_WITH_AS(parse_loadfile(f.string()),
                             doctest::Contains("row 4"), format_error);
    }
    SUBCASE("non-finite value rejected") {
        put_file(f, "time_s,current_a\n0,-1\n1,inf\n");
        CHECK_THROWS_AS(parse_loadfile(f.string()), format_error);
    }
    SUBCASE("wrong field count rejected") {
        put_file(f, "time_s,current_a\n0,-1\n1\n");
        CHECK_THROWS_AS(parse_loadfile(f.string()), format_error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(parse_loadfile((dir / "nope.csv").string()), format_error);
    }
    fs::remove_all(dir);
}

TEST_CASE("loadfile write/parse round trip is bit-exact") {
    const fs::path dir = scratch_dir();
    const fs::path f = dir / "big.csv";
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Loadfile load;
    double t = 0.0;
    for (int k = 0; k < 100000; ++k) {
        t += 0.1 + unit(rng);
        LoadSample s;
        s.t = t;
        s.i = 100.0 * (unit(rng) - 0.7);
        s.v = 3.0 + unit(rng);
        load.push_back(s);
    }
    write_loadfile(f.string(), load);
    Loadfile back = parse_loadfile(f.string());
    REQUIRE(back.size() == load.size());
    for (std::size_t k = 0; k < load.size(); ++k) {
        CHECK(back[k].t == load[k].t);
        CHECK(back[k].i == load[k].i);
        CHECK(back[k].v == load[k].v);
    }
    fs::remove_all(dir);
}

TEST_CASE("cell parameter json round trip") {
    const fs::path dir = scratch_dir();
    const fs::path f = dir / "params.json";
    CellParams p = default_cell();
    put_file(f, params_to_json(p));
    CellParams back = params_from_json_file(f.string());
    CHECK(back.r_ohm == p.r_ohm);
    CHECK(back.c_b == p.c_b);
    CHECK(back.eta == p.eta);

    SUBCASE("invalid values rejected") {
        put_file(f, R"({"r_ohm":-1,"r_a":1,"c_a":1,"r_b":1,"c_b":1,"capacity_c":1})");
        CHECK_THROWS_AS(params_from_json_file(f.string()), domain_error);
    }
    SUBCASE("missing key rejected") {
        put_file(f, R"({"r_ohm":0.01})");
        CHECK_THROWS_AS(params_from_json_file(f.string()), format_error);
    }
    SUBCASE("malformed json rejected") {
        put_file(f, "{not json");
        CHECK_THROWS_AS(params_from_json_file(f.string()), format_error);
    }
    fs::remove_all(dir);
}

TEST_CASE("ocv json round trip") {
    const fs::path dir = scratch_dir();
    const fs::path f = dir / "ocv.json";
    OcvCurve c = default_ocv();
    put_file(f, ocv_to_json(c));
    OcvCurve back = ocv_from_json_file(f.string());
    REQUIRE(back.soc_points().size() == c.soc_points().size());
    for (std::size_t k = 0; k < c.soc_points().size(); ++k) {
        CHECK(back.soc_points()[k] == c.soc_points()[k]);
        CHECK(back.ocv_points()[k] == c.ocv_points()[k]);
    }
    fs::remove_all(dir);
}

TEST_CASE("gains json round trip for every variant") {
    const fs::path dir = scratch_dir();
    const fs::path f = dir / "gains.json";

    ObserverGains g;
    g.l << 0.1, 0.2, 0.3;
    g.h << 0.4, 0.5, 0.6;
    g.k_dc = 0.02;
    g.boundary_layer_phi = 0.015;
    g.k_p << 0.7, 0.8, 0.9;
    g.k_i2 << 0.0, 0.0, 0.001;
    g.k_d << 0.01, 0.02, 0.03;
    g.d_filter_tau = 2.0;

    for (auto v : {ObserverVariant::Luenberger, ObserverVariant::SlidingMode,
                   ObserverVariant::Pi, ObserverVariant::Pid}) {
        g.variant = v;
        put_file(f, gains_to_json(g));
        ObserverGains back = gains_from_json_file(f.string());
        CHECK(back.variant == v);
        switch (v) {
        case ObserverVariant::Luenberger:
            CHECK(back.l == g.l);
            break;
        case ObserverVariant::SlidingMode:
            CHECK(back.h == g.h);
            CHECK(back.k_dc == g.k_dc);
            CHECK(back.boundary_layer_phi == g.boundary_layer_phi);
            break;
        case ObserverVariant::Pid:
            CHECK(back.k_d == g.k_d);
            CHECK(back.d_filter_tau == g.d_filter_tau);
            [[fallthrough]];
        case ObserverVariant::Pi:
            CHECK(back.k_p == g.k_p);
            CHECK(back.k_i1 == g.k_i1);
            CHECK(back.k_i2 == g.k_i2);
            break;
        }
    }
    SUBCASE("negative switching gain rejected") {
        put_file(f, R"({"variant":"sliding_mode","h":[0.1,0.1,0.1],"k_dc":-1})");
        CHECK_THROWS_AS(gains_from_json_file(f.string()), format_error);
    }
    fs::remove_all(dir);
}

TEST_CASE("scenario json with defaults and overrides") {
    const fs::path dir = scratch_dir();
    const fs::path f = dir / "scenario.json";

    SUBCASE("minimal file inherits every default") {
        put_file(f, R"({"kind":"accuracy"})");
        Scenario s = scenario_from_json_file(f.string());
        CHECK(s.kind == ScenarioKind::Accuracy);
        CHECK(s.duration_s == 7200.0);
        CHECK(s.dt == 1.0);
        CHECK(s.estimators.size() == 5);
        CHECK(s.params.r_ohm == default_cell().r_ohm);
    }
    SUBCASE("noise, perturbation and referenced files") {
        put_file(dir / "params.json", params_to_json(default_cell()));
        put_file(f, R"({
          "kind": "sensitivity",
          "duration_s": 600,
          "estimators": ["pi", "srckf"],
          "noise": {"volt_sd_v": 0.01},
          "perturb": {"name": "r_ohm", "relative_amp": 0.8, "envelope": "damped"},
          "params": "params.json",
          "seed": 9
        })");
        Scenario s = scenario_from_json_file(f.string());
        CHECK(s.kind == ScenarioKind::Sensitivity);
        CHECK(s.noise.volt_sd_v == 0.01);
        CHECK(s.perturb.name == "r_ohm");
        CHECK(s.perturb.envelope == PerturbEnvelope::Damped);
        CHECK(s.perturb.tau_s == doctest::Approx(120.0)); // duration / 5
        CHECK(s.estimators.size() == 2);
        CHECK(s.seed == 9);
    }
    SUBCASE("kind is required") {
        put_file(f, R"({"duration_s": 100})");
        CHECK_THROWS_AS(scenario_from_json_file(f.string()), format_error);
    }
    SUBCASE("unknown kind rejected") {
        put_file(f, R"({"kind":"warp"})");
        CHECK_THROWS_AS(scenario_from_json_file(f.string()), domain_error);
    }
    fs::remove_all(dir);
}

TEST_CASE("file digest") {
    const fs::path dir = scratch_dir();
    put_file(dir / "empty", "");
    // FNV-1a offset basis: digest of zero bytes
    CHECK(file_digest((dir / "empty").string()) == "cbf29ce484222325");
    put_file(dir / "a", "hello\n");
    put_file(dir / "b", "hello\n");
    put_file(dir / "c", "hellp\n");
    CHECK(file_digest((dir / "a").string()) == file_digest((dir / "b").string()));
    CHECK(file_digest((dir / "a").string()) != file_digest((dir / "c").string()));
    CHECK_THROWS_AS(file_digest((dir / "missing").string()), format_error);
    fs::remove_all(dir);
}

TEST_CASE("manifest json records inputs, seed and tool version") {
    const std::string js = manifest_json({{"in/load.csv", "deadbeefdeadbeef"}},
                                         "accuracy", 77);
    const auto j = nlohmann::json::parse(js);
    CHECK(j.at("tool_version") == kToolVersion);
    CHECK(j.at("seed") == 77);
    CHECK(j.at("scenario") == "accuracy");
    CHECK(j.at("inputs").at(0).at("path") == "in/load.csv");
    CHECK(j.at("inputs").at(0).at("digest") == "deadbeefdeadbeef");
    CHECK(j.contains("timestamp"));
}

TEST_CASE("trajectory csv bytes are deterministic") {
    const fs::path dir = scratch_dir();
    EstimatorRun run;
    run.estimator = "pi";
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int k = 0; k < 500; ++k) {
        run.t.push_back(k);
        run.soc_true.push_back(unit(rng));
        run.soc_hat.push_back(unit(rng));
        run.v_meas.push_back(3.0 + unit(rng));
        run.v_hat.push_back(3.0 + unit(rng));
        run.e.push_back(run.v_meas.back() - run.v_hat.back());
    }
    write_trajectory_csv((dir / "a.csv").string(), run);
    write_trajectory_csv((dir / "b.csv").string(), run);
    const std::string a = slurp(dir / "a.csv");
    CHECK(a == slurp(dir / "b.csv"));
    CHECK(a.rfind("t,soc_true,soc_hat,v_meas,v_hat,e\n", 0) == 0);
    fs::remove_all(dir);
}

TEST_CASE("comparison csv reports metrics and missing convergence") {
    const fs::path dir = scratch_dir();
    EstimatorRun a;
    a.estimator = "luenberger";
    a.soc_metrics = {2.0, 1.0, 0.5};
    a.convergence_time_s = 120.0;
    EstimatorRun b;
    b.estimator = "srckf";
    b.soc_metrics = {4.0, 2.0, 1.0};
    write_comparison_csv((dir / "cmp.csv").string(), {a, b});
    const std::string text = slurp(dir / "cmp.csv");
    CHECK(text.find("luenberger,2,1,0.5,120\n") != std::string::npos);
    CHECK(text.find("srckf,4,2,1,never\n") != std::string::npos);

    const auto j = nlohmann::json::parse(metrics_to_json({a, b}));
    CHECK(j.at("runs").size() == 2);
    CHECK(j.at("runs").at(0).at("rmse_pct") == 1.0);
    CHECK(j.at("runs").at(0).at("convergence_time_s") == 120.0);
    CHECK_FALSE(j.at("runs").at(1).contains("convergence_time_s"));
    fs::remove_all(dir);
}

#ifdef OBSBENCH_CLI

TEST_CASE("cli exit codes") {
    const fs::path dir = scratch_dir();

    SUBCASE("design rejects an unstable pole with exit 1") {
        CHECK(run_cli("design --variant luenberger --poles -1,-2,3") == 1);
    }
    SUBCASE("design writes a valid gains file with exit 0") {
        const fs::path g = dir / "gains.json";
        CHECK(run_cli("design --variant luenberger --poles -0.13,-0.003,-0.06 --out " +
                      g.string()) == 0);
        ObserverGains back = gains_from_json_file(g.string());
        CHECK(back.variant == ObserverVariant::Luenberger);
    }
    SUBCASE("estimate with non-hurwitz gains exits 2") {
        const fs::path g = dir / "zero.json";
        put_file(g, R"({"variant":"luenberger","l":[0,0,0]})");
        const fs::path load = dir / "load.csv";
        std::string csv = "time_s,current_a,voltage_v\n";
        for (int k = 0; k <= 10; ++k) {
            csv += std::to_string(k) + ",-5,3.8\n";
        }
        put_file(load, csv);
        CHECK(run_cli("estimate --gains " + g.string() + " --loadfile " +
                      load.string()) == 2);
    }
    SUBCASE("bench writes a full bundle with exit 0") {
        const fs::path sc = dir / "scenario.json";
        put_file(sc, R"({"kind":"accuracy","duration_s":120,
                         "estimators":["luenberger","srckf"]})");
        const fs::path out = dir / "bundle";
        CHECK(run_cli("bench --scenario " + sc.string() + " --out " +
                      out.string()) == 0);
        CHECK(fs::exists(out / "luenberger.csv"));
        CHECK(fs::exists(out / "srckf.csv"));
        CHECK(fs::exists(out / "comparison.csv"));
        CHECK(fs::exists(out / "metrics.json"));
        CHECK(fs::exists(out / "manifest.json"));
        // identical reruns produce identical bytes
        const std::string first = slurp(out / "luenberger.csv");
        CHECK(run_cli("bench --scenario " + sc.string() + " --out " +
                      out.string()) == 0);
        CHECK(slurp(out / "luenberger.csv") == first);
    }
    SUBCASE("missing input file exits 1") {
        CHECK(run_cli("simulate --loadfile " + (dir / "nope.csv").string()) == 1);
    }
    fs::remove_all(dir);
}

#endif
