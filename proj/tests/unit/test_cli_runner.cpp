#include <doctest.h>

#include <cstdlib>
#include <unistd.h>
#include <fstream>
#include <sstream>

#include "dpt/cli_runner.hpp"

using namespace dpt;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"([scenario]
name = small
model = reduced
[model]
n_atoms = 4, 6
lambda = 1.2
include_dephasing = true
[initial]
state = dark
[time]
t_max = 2
n_out = 21
[outputs]
fock_rates = true
fock_n_atoms = 6
)";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("dpt_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    return d;
}

}  // namespace

TEST_CASE("builtin scenarios parse and validate") {
    const auto names = builtin_scenario_names();
    CHECK(names == std::vector<std::string>{"fig1", "fig2", "fig3", "fig4", "fig5"});
    for (const auto& n : names) {
        CAPTURE(n);
        ScenarioConfig c;
        CHECK_NOTHROW(c = builtin_scenario(n));
        CHECK_NOTHROW(validate_config(c));
        CHECK(c.name == n);
    }
    const ScenarioConfig f1 = builtin_scenario("fig1");
    ModelParams p = f1.params;
    p.n_atoms = 4;
    CHECK(p.resolved().lambda == doctest::Approx(1.44).epsilon(1e-14));
    CHECK(builtin_scenario("fig5").conditioned);
    CHECK_THROWS_AS(builtin_scenario("fig9"), ConfigError);
}

TEST_CASE("config errors are reported before any work") {
    auto bad = [](const std::string& extra) { return std::string(kSmall) + extra; };
    CHECK_THROWS_AS(parse_config(bad("[time]\nsteps = 3\n")), ConfigError);
    CHECK_THROWS_AS(parse_config(bad("[plot]\ncolor = 1\n")), ConfigError);
    CHECK_THROWS_AS(parse_config("[time]\nt_max = 1.5x\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[time]\nt_max = 0x10\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[solver]\ncheck_positivity = maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("stray = 1\n"), ConfigError);
    std::string ok = kSmall;
    ok.replace(ok.find("t_max = 2"), 9, "t_max = 2.5e0");
    CHECK(parse_config(ok).t_max == 2.5);

    ScenarioConfig c = parse_config(kSmall);
    CHECK_NOTHROW(validate_config(c));
    ScenarioConfig d = c;
    d.n_atoms_list.clear();
    CHECK_THROWS_AS(validate_config(d), ConfigError);
    d = c;
    d.asymptotic = true;
    d.params.include_dephasing = false;
    CHECK_THROWS_AS(validate_config(d), ConfigError);
    d = c;
    d.conditioned = true;  // needs the cavity
    CHECK_THROWS_AS(validate_config(d), ConfigError);
    d = c;
    d.fock_n_atoms = 5;
    CHECK_THROWS_AS(validate_config(d), ConfigError);
    d = c;
    d.n_out = 1;
    CHECK_THROWS_AS(validate_config(d), ConfigError);
    d = c;
    d.initial.kind = InitialKind::Dicke;
    d.initial.m = 0.25;
    CHECK_THROWS_AS(validate_config(d), ConfigError);
}

TEST_CASE("CSV format") {
    CsvWriter w({"t", "x"});
    w.row({0.1, 1.0 / 3.0});
    w.row({2.0, std::numeric_limits<double>::infinity()});
    CHECK(w.text() == "t,x\n0.10000000000000001,0.33333333333333331\n2,inf\n");
    CHECK(w.rows() == 2);
    CHECK_THROWS(w.row({1.0}));
    CHECK(std::strtod(format_double(1.0 / 3.0).c_str(), nullptr) == 1.0 / 3.0);
}

TEST_CASE("scenario output is deterministic and complete") {
    const ScenarioConfig cfg = parse_config(kSmall);
    const fs::path a = fresh_dir("a"), b = fresh_dir("b");
    RunOptions oa;
    oa.out_dir = a;
    RunOptions ob;
    ob.out_dir = b;
    ob.threads = 3;
    const ScenarioResult ra = run_scenario(cfg, oa);
    run_scenario(cfg, ob);
    for (const char* f : {"rate_function_N4.csv", "rate_function_N6.csv", "fock_rates.csv"}) {
        CAPTURE(f);
        REQUIRE(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    CHECK(count_lines(slurp(a / "rate_function_N4.csv")) == 1 + 21);
    CHECK(count_lines(slurp(a / "fock_rates.csv")) == 1 + 21 * 7);
    const auto& s = ra.summary;
    CHECK(s["version"].get<std::string>().find(kVersion) != std::string::npos);
    CHECK(s["runs"].size() == 2);
    for (const auto& r : s["runs"]) {
        CHECK(r["max_trace_drift"].get<double>() <= 1e-9);
        CHECK(r["min_eigenvalue"].get<double>() >= -1e-8);
    }
    // first rows: r(0) = 0
    const std::string body = slurp(a / "rate_function_N6.csv");
    CAPTURE(body.substr(0, 40));
    CHECK(body.rfind("t,L,r\n0,1,", 0) == 0);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("failed scenarios leave no partial output") {
    const ScenarioConfig cfg = parse_config(kSmall);
    const fs::path d = fresh_dir("fail");
    fs::create_directories(d / "rate_function_N6.csv");  // a directory blocks this file
    RunOptions o;
    o.out_dir = d;
    try {
        run_scenario(cfg, o);
        FAIL("expected ScenarioError");
    } catch (const ScenarioError& e) {
        CHECK(std::string(e.what()).find("scenario small") != std::string::npos);
    }
    CHECK_FALSE(fs::exists(d / "rate_function_N4.csv"));
    CHECK_FALSE(fs::exists(d / "summary.json"));
    fs::remove_all(d);
}

TEST_CASE("module failures carry the scenario context") {
    ScenarioConfig cfg = parse_config(kSmall);
    cfg.method = Method::Extended;
    cfg.initial.kind = InitialKind::Coherent;
    cfg.initial.theta = 1.0;
    cfg.initial.phi = 0.3;
    cfg.fock_rates = false;
    const fs::path d = fresh_dir("ctx");
    RunOptions o;
    o.out_dir = d;
    try {
        run_scenario(cfg, o);
        FAIL("expected ScenarioError");
    } catch (const ScenarioError& e) {
        const std::string m = e.what();
        CHECK(m.find("scenario small") != std::string::npos);
        CHECK(m.find("N=") != std::string::npos);
    }
    CHECK_FALSE(fs::exists(d / "summary.json"));
    fs::remove_all(d);
}

TEST_CASE("initial states") {
    InitialSpec s;
    CHECK((initial_state(s, 4) - dicke_state(4, 4)).norm() == 0.0);
    s.kind = InitialKind::Dicke;
    s.m = -1;
    CHECK((initial_state(s, 4) - dicke_state(4, 1)).norm() == 0.0);
    s.kind = InitialKind::Mixed;
    s.m_values = {2, 0};
    s.weights = {3, 1};
    const CMatrix m = initial_state(s, 4);
    CHECK(m(4, 4).real() == doctest::Approx(0.75));
    CHECK(m(2, 2).real() == doctest::Approx(0.25));
}

#ifdef DPT_CLI_PATH
TEST_CASE("command line tool") {
    const fs::path d = fresh_dir("cli");
    fs::create_directories(d);
    {
        std::ofstream(d / "bad.ini") << "[model]\nspin = 3\n";
        std::ofstream(d / "good.ini") << kSmall;
    }
    const std::string exe = DPT_CLI_PATH;
    auto sh = [&](const std::string& args) {
        return std::system((exe + " " + args + " > " + (d / "stdout").string() + " 2> " + (d / "stderr").string()).c_str());
    };
    CHECK(sh("list-scenarios") == 0);
    CHECK(slurp(d / "stdout").find("fig3") != std::string::npos);
    CHECK(sh("validate " + (d / "good.ini").string()) == 0);
    CHECK(sh("validate " + (d / "bad.ini").string()) != 0);
    const std::string err = slurp(d / "stderr");
    CHECK(err.rfind("{\"error\":\"config\"", 0) == 0);
    CHECK(count_lines(err) == 1);
    CHECK(sh("run " + (d / "good.ini").string() + " --out " + (d / "out").string() + " --seed 9") == 0);
    CHECK(fs::exists(d / "out" / "summary.json"));
    CHECK(sh("frobnicate") != 0);
    fs::remove_all(d);
}
#endif
