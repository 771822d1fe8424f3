// Acceptance run: one PASS/FAIL line per criterion.
//
//   dpt_acceptance [--out DIR] [--only 1,5,9]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dpt/cli_runner.hpp"
#include "dpt/extended_propagator.hpp"
#include "dpt/povm_homodyne.hpp"

using namespace dpt;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double seconds(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Table {
    std::vector<std::string> cols;
    std::vector<std::vector<double>> rows;
    int col(const std::string& c) const {
        auto it = std::find(cols.begin(), cols.end(), c);
        if (it == cols.end()) throw std::runtime_error("missing column " + c);
        return static_cast<int>(it - cols.begin());
    }
    std::vector<double> column(const std::string& c) const {
        const int i = col(c);
        std::vector<double> v;
        for (const auto& r : rows) v.push_back(r[i]);
        return v;
    }
};

Table read_csv(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    Table t;
    std::string line;
    std::getline(in, line);
    std::stringstream hs(line);
    for (std::string c; std::getline(hs, c, ',');) t.cols.push_back(c);
    while (std::getline(in, line)) {
        std::vector<double> r;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) r.push_back(std::strtod(c.c_str(), nullptr));
        t.rows.push_back(r);
    }
    return t;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

// Scenario runs shared between criteria, each run at most once.
class Runs {
public:
    explicit Runs(fs::path root) : root_(std::move(root)) {}

    const fs::path& get(const std::string& name, const ScenarioConfig& cfg) {
        auto it = done_.find(name);
        if (it != done_.end()) return it->second;
        const fs::path dir = root_ / name;
        fs::remove_all(dir);
        RunOptions o;
        o.out_dir = dir;
        const auto t0 = std::chrono::steady_clock::now();
        run_scenario(cfg, o);
        std::printf("  [run %s: %.1f s]\n", name.c_str(), seconds(t0));
        std::fflush(stdout);
        return done_.emplace(name, dir).first->second;
    }
    const fs::path& builtin(const std::string& name) { return get(name, builtin_scenario(name)); }
    std::vector<std::string> names() const {
        std::vector<std::string> v;
        for (const auto& [k, _] : done_) v.push_back(k);
        return v;
    }
    const fs::path& dir(const std::string& n) const { return done_.at(n); }

private:
    fs::path root_;
    std::map<std::string, fs::path> done_;
};

ScenarioConfig dephasing_config(int n, bool deph) {
    ScenarioConfig c;
    c.name = fmt("deph%d_N%d", deph ? 1 : 0, n);
    c.model = ModelKind::Reduced;
    c.params.lambda = 1.2;
    c.params.include_dephasing = deph;
    c.n_atoms_list = {n};
    c.t_max = 8.0;
    c.n_out = 161;
    return c;
}

// ---------------------------------------------------------------- criteria

Outcome c1_algebra(Runs&) {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int n : {1, 2, 3, 10, 50}) {
        const SpinOperators s = build_spin_operators(n);
        const Complex I(0, 1);
        const double j = 0.5 * n;
        const CMatrix id = CMatrix::Identity(n + 1, n + 1);
        worst = std::max({worst, (s.jx * s.jy - s.jy * s.jx - I * s.jz).cwiseAbs().maxCoeff(),
                          (s.jy * s.jz - s.jz * s.jy - I * s.jx).cwiseAbs().maxCoeff(),
                          (s.jz * s.jx - s.jx * s.jz - I * s.jy).cwiseAbs().maxCoeff(),
                          (s.jplus - s.jminus.adjoint()).cwiseAbs().maxCoeff(),
                          (s.jx * s.jx + s.jy * s.jy + s.jz * s.jz - j * (j + 1) * id).cwiseAbs().maxCoeff(),
                          (s.jx - s.jx.adjoint()).cwiseAbs().maxCoeff(),
                          (s.jy - s.jy.adjoint()).cwiseAbs().maxCoeff(),
                          (s.jz - s.jz.adjoint()).cwiseAbs().maxCoeff()});
    }
    const double dt = seconds(t0);
    return {worst <= 1e-10 && dt < 5.0, fmt("max residual %.2e, %.2f s", worst, dt)};
}

Outcome c2_oracle(Runs&) {
    const auto t0 = std::chrono::steady_clock::now();
    ModelParams p;
    p.n_atoms = 4;
    p.lambda = 1.2;
    ReducedGenerator gen(p);
    const std::vector<double> ts = {0.0, 0.5, 1.0, 2.0, 5.0};
    const CMatrix rho0 = dicke_state(4, 4);
    const EvolutionResult res = evolve(gen, DensityMatrix::atomic(rho0), ts);
    double worst = 0.0;
    for (std::size_t i = 1; i < ts.size(); ++i) {
        const CMatrix ref = apply_map(brute_force_propagator(gen, ts[i]), rho0);
        worst = std::max(worst, (res.states[i] - ref).cwiseAbs().maxCoeff());
    }
    const double dt = seconds(t0);
    return {worst <= 1e-8 && dt < 30.0, fmt("max deviation %.2e, %.2f s", worst, dt)};
}

Outcome c3_conservation(Runs& runs) {
    // every finite-N run of this acceptance pass
    runs.builtin("fig1");
    runs.builtin("fig2");
    runs.builtin("fig4");
    runs.builtin("fig5");
    for (int n : {25, 50, 100})
        for (bool deph : {true, false})
            runs.get(fmt("deph_%s_N%d", deph ? "on" : "off", n), dephasing_config(n, deph));
    double drift = 0.0, herm = 0.0, eig = 1.0;
    int count = 0;
    for (const auto& name : runs.names()) {
        const json s = read_json(runs.dir(name) / "summary.json");
        if (!s.contains("runs")) continue;
        for (const auto& r : s["runs"]) {
            drift = std::max(drift, r["max_trace_drift"].get<double>());
            herm = std::max(herm, r["max_hermiticity"].get<double>());
            if (!r.contains("min_eigenvalue")) return {false, "run without positivity check in " + name};
            eig = std::min(eig, r["min_eigenvalue"].get<double>());
            ++count;
        }
    }
    return {count > 0 && drift <= 1e-9 && herm <= 1e-10 && eig >= -1e-8,
            fmt("%d runs: trace drift %.2e, hermiticity %.2e, min eigenvalue %.2e", count, drift, herm, eig)};
}

Outcome c4_povm(Runs&) {
    const HalfPlanePovm povm = build_halfplane_povm(20, false);
    const RMatrix id = RMatrix::Identity(21, 21);
    const double sum_err = (povm.e_plus + povm.e_minus - id).cwiseAbs().maxCoeff();
    double diag_err = 0.0;
    for (int n = 0; n <= 20; ++n) diag_err = std::max(diag_err, std::abs(povm.e_plus(n, n) - 0.5));
    const double e01 = std::abs(halfplane_element_quadrature(0, 1) - 0.5 / std::sqrt(std::numbers::pi));
    double quad_err = 0.0;
    for (int n = 0; n <= 20; ++n)
        for (int m = n; m <= 20; ++m)
            quad_err = std::max(quad_err, std::abs(povm.e_plus(n, m) - halfplane_element_quadrature(n, m)));
    const bool ok = sum_err <= 1e-12 && diag_err <= 1e-12 && e01 <= 1e-8 && quad_err <= 1e-8;
    return {ok, fmt("E+ + E- - I %.1e, diag %.1e, <0|E+|1> %.1e, max quadrature mismatch %.1e", sum_err, diag_err,
                    e01, quad_err)};
}

Outcome c5_identity(Runs& runs) {
    const Table t = read_csv(runs.builtin("fig5") / "conditioned.csv");
    const auto L = t.column("L"), lp = t.column("L_plus"), lm = t.column("L_minus");
    double worst = 0.0;
    for (std::size_t i = 0; i < L.size(); ++i) worst = std::max(worst, std::abs(lp[i] + lm[i] - L[i]));
    return {worst <= 1e-12 && !L.empty(), fmt("%zu output times, max |L+ + L- - L| %.2e", L.size(), worst)};
}

Outcome c6_crossing(Runs& runs) {
    const fs::path d = runs.builtin("fig5");
    const Table t = read_csv(d / "conditioned.csv");
    const auto c = detect_crossing(t.column("t"), t.column("r_plus"), t.column("r_minus"), 2.0, 6.0);
    const json s = read_json(d / "summary.json");
    const double elapsed = s["elapsed_s"].get<double>();
    const int cutoff = s["runs"][0]["cavity_cutoff"].get<int>();
    if (!c) return {false, "no crossing in [2, 6]"};
    const bool ok = c->count == 1 && c->time >= 3.0 && c->time <= 5.0;
    return {ok, fmt("%d crossing(s), t = %.4f +- %.3f (n_max %d, %.0f s)", c->count, c->time, c->uncertainty, cutoff,
                    elapsed)};
}

Outcome c7_drift_diffusion(Runs&) {
    const WeakNoiseModel wm{1.2, 1.0, true};
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g;
    double worst = 0.0;
    int n_pts = 0;
    while (n_pts < 100) {
        const Vec3 n = Vec3(g(rng), g(rng), g(rng)).normalized();
        const SpinCoherentPoint x = SpinCoherentPoint::from_bloch(n);
        if (std::sin(x.theta) < 1e-3) continue;
        const Vec3 v = chart_to_cartesian_velocity(x, fp_coefficients(x, wm).drift);
        worst = std::max(worst, (v - mean_field_rhs(n, wm.lambda)).norm());
        ++n_pts;
    }
    // covariance growth of the P-function moments from the master equation
    const int N = 200;
    const double j = 0.5 * N;
    const SpinOperators ops = build_spin_operators(N);
    const CMatrix* J[3] = {&ops.jx, &ops.jy, &ops.jz};
    ModelParams p;
    p.n_atoms = N;
    p.lambda = wm.lambda;
    p.include_dephasing = true;
    const CVector psi = coherent_state_vector(N, SpinCoherentPoint::make(0.0, std::numbers::pi / 2));
    const std::vector<double> ts = {0.0, 0.02, 0.05, 0.1};
    EvolveOptions eo;
    eo.rel_tol = 1e-12;
    eo.abs_tol = 1e-14;
    const EvolutionResult res = evolve(ReducedGenerator(p), DensityMatrix::atomic(pure_state(psi)), ts, eo);
    auto pcov = [&](const CMatrix& r) {
        Vec3 m;
        Mat3 e;
        for (int a = 0; a < 3; ++a) m(a) = (r * *J[a]).trace().real() / j;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                const double ac = 0.5 * (r * (*J[a] * *J[b] + *J[b] * *J[a])).trace().real();
                e(a, b) = (ac - (a == b ? 0.5 * j : 0.0)) / (j * (j - 0.5));
            }
        return Mat3(e - m * m.transpose());
    };
    const Mat3 c0 = pcov(res.states[0]);
    const Mat3 d0 = diffusion_embedded(Vec3(1, 0, 0), wm);
    double rel = 0.0;
    for (std::size_t i = 1; i < ts.size(); ++i) {
        const Mat3 growth = (pcov(res.states[i]) - c0) / ((2.0 / N) * ts[i]);
        for (int a : {1, 2}) rel = std::max(rel, std::abs(growth(a, a) - d0(a, a)) / d0(a, a));
    }
    return {worst <= 1e-10 && rel <= 0.10,
            fmt("drift mismatch %.2e on 100 points; covariance growth off by %.1f%% (t <= 0.1)", worst, 100 * rel)};
}

Outcome c8_weak_noise(Runs& runs) {
    const WeakNoiseModel wm{1.2, 1.0, true};
    const Vec3 x0(0, 0, 1);
    ShootOptions o;
    o.n_samples = 201;
    const Characteristic mf = shoot_characteristic(x0, Vec3::Zero(), mean_field_period(1.2), wm, o);
    double s_max = 0.0;
    for (const auto& s : mf.samples) s_max = std::max(s_max, std::abs(s.s));
    double h_drift = 0.0;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-0.02, 0.02);
    for (int i = 0; i < 20; ++i) {
        const Vec3 p0(u(rng), u(rng), 0.0);
        const Characteristic c = shoot_characteristic(x0, p0, 6.0, wm, o);
        if (!c.ok) return {false, "characteristic failed: " + c.status};
        for (const auto& s : c.samples) h_drift = std::max(h_drift, std::abs(s.h - c.samples.front().h));
    }
    const json s = read_json(runs.builtin("fig2") / "summary.json");
    const double route = s["asymptotic"]["max_route_difference"].get<double>();
    // gridded landscape minimum at t = 4.8 against the tracked BVP rate
    const json l = read_json(runs.builtin("fig3") / "summary.json")["landscape"];
    double k_grid = INFINITY;
    for (const auto& m : l["minima"]) k_grid = std::min(k_grid, m["K"].get<double>());
    const Table at = read_csv(runs.dir("fig2") / "rate_function_asymptotic.csv");
    const auto ta = at.column("t"), rb = at.column("r_bvp");
    double r_bvp = NAN;
    for (std::size_t i = 0; i < ta.size(); ++i)
        if (std::abs(ta[i] - l["time"].get<double>()) < 1e-9) r_bvp = rb[i];
    const double land = std::abs(k_grid - r_bvp);
    const double s_mf = l["s_at_mean_field"].get<double>();
    const bool ok = mf.ok && s_max <= 1e-6 && s_mf <= 1e-6 && h_drift <= 1e-8 && route <= 1e-4 && land <= 1e-4;
    return {ok, fmt("S on mean-field orbit %.1e (landscape %.1e), H drift %.1e, route difference %.1e, "
                    "landscape min vs BVP at t=4.8 %.1e",
                    s_max, s_mf, h_drift, route, land)};
}

Outcome c9_convergence(Runs& runs) {
    const fs::path d = runs.builtin("fig2");
    const json s = read_json(d / "summary.json");
    const json& a = s["asymptotic"];
    const Table at = read_csv(d / "rate_function_asymptotic.csv");
    const auto ta = at.column("t"), ra = at.column("r");
    int kinks = a["kinks_in_first_period"].get<int>();
    if (a["critical_times"].empty()) return {false, "no kink detected"};
    const double tc = a["critical_times"][0].get<double>();
    std::vector<double> dist;
    std::string detail;
    for (int n : {50, 100, 200}) {
        const Table ft = read_csv(d / fmt("rate_function_N%d.csv", n));
        const auto tf = ft.column("t"), rf = ft.column("r");
        double sup = 0.0;
        for (std::size_t i = 0; i < tf.size(); ++i) {
            if (tf[i] > 8.0 + 1e-12 || std::abs(tf[i] - tc) <= 0.2) continue;
            // grids share the 0.05 spacing
            const auto it = std::min_element(ta.begin(), ta.end(), [&](double x, double y) {
                return std::abs(x - tf[i]) < std::abs(y - tf[i]);
            });
            const std::size_t k = static_cast<std::size_t>(it - ta.begin());
            if (std::abs(ta[k] - tf[i]) > 1e-9) return {false, "asymptotic grid does not cover the finite-N grid"};
            sup = std::max(sup, std::abs(rf[i] - ra[k]));
        }
        dist.push_back(sup);
        detail += fmt("N=%d %.4f; ", n, sup);
    }
    const bool mono = dist[0] > dist[1] && dist[1] > dist[2];
    const bool ok = mono && dist[2] <= 0.05 && kinks == 1;
    return {ok, detail + fmt("kinks in first period %d, t_c = %.4f", kinks, tc)};
}

Outcome c10_cut(Runs& runs) {
    const double tc = read_json(runs.builtin("fig2") / "summary.json")["asymptotic"]["critical_times"][0].get<double>();
    const json s = read_json(runs.builtin("fig3") / "summary.json");
    struct Snap {
        double t;
        std::vector<double> alpha, k;
        int global;
    };
    std::vector<Snap> near;
    std::string detail;
    bool s_ok = true;
    double s_worst = 0.0;
    for (const auto& c : s["cuts"]) {
        const double t = c["time"].get<double>();
        const auto& sm = c["s_minima"];
        if (sm.size() != 1) s_ok = false;
        for (const auto& m : sm) s_worst = std::max(s_worst, std::abs(m["S"].get<double>()));
        if (std::abs(t - tc) > 0.45) continue;
        Snap sn{t, {}, {}, -1};
        for (const auto& m : c["k_minima"]) {
            sn.alpha.push_back(m["alpha"].get<double>());
            sn.k.push_back(m["K"].get<double>());
        }
        if (!sn.k.empty()) sn.global = static_cast<int>(std::min_element(sn.k.begin(), sn.k.end()) - sn.k.begin());
        near.push_back(sn);
        detail += fmt("t=%.2f:%zu ", t, sn.k.size());
    }
    if (near.empty()) return {false, "no cut near t_c"};
    bool two = true;
    for (const auto& sn : near) two = two && sn.k.size() == 2;
    // which of the two minima (ordered by alpha) is global, before and after t_c
    std::set<int> before, after;
    for (const auto& sn : near) {
        if (sn.k.size() != 2) continue;
        const int idx = sn.alpha[sn.global] < sn.alpha[1 - sn.global] ? 0 : 1;
        (sn.t < tc ? before : after).insert(idx);
    }
    const bool swap = before.size() == 1 && after.size() == 1 && *before.begin() != *after.begin();
    s_ok = s_ok && s_worst <= 1e-3;
    return {two && swap && s_ok, fmt("t_c %.4f; K minima per cut %s; swap %s; single S minimum %s (max |S_min| %.1e)",
                                     tc, detail.c_str(), swap ? "yes" : "no", s_ok ? "yes" : "no", s_worst)};
}

Outcome c11_cusp(Runs& runs) {
    const fs::path d = runs.builtin("fig4");
    const Table t = read_csv(d / "cusp_line.csv");
    const double tc = read_json(runs.builtin("fig2") / "summary.json")["asymptotic"]["critical_times"][0].get<double>();
    const auto mu = t.column("mu"), m = t.column("m"), tcs = t.column("t_c"), found = t.column("found");
    std::vector<std::size_t> order(mu.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mu[a] > mu[b]; });
    bool all = true, mono = true;
    std::string detail;
    for (std::size_t r = 0; r < order.size(); ++r) {
        const std::size_t i = order[r];
        all = all && found[i] == 1.0;
        detail += fmt("(m=%g, t=%.3f) ", m[i], tcs[i]);
        if (r > 0) mono = mono && tcs[i] > tcs[order[r - 1]] && m[i] < m[order[r - 1]];
    }
    const std::size_t top = order.front();
    // the asymptotic grids of fig2 and fig4 differ; the start must sit within one fig4 step
    const bool start = mu[top] == 1.0 && std::abs(tcs[top] - tc) <= 0.1;
    return {all && mono && start, detail + fmt("Loschmidt t_c %.4f", tc)};
}

Outcome c12_dephasing(Runs& runs) {
    std::vector<double> d;
    std::string detail;
    for (int n : {25, 50, 100}) {
        const Table on = read_csv(runs.get(fmt("deph_on_N%d", n), dephasing_config(n, true)) / fmt("rate_function_N%d.csv", n));
        const Table off =
            read_csv(runs.get(fmt("deph_off_N%d", n), dephasing_config(n, false)) / fmt("rate_function_N%d.csv", n));
        const auto a = on.column("r"), b = off.column("r");
        double mx = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) mx = std::max(mx, std::abs(a[i] - b[i]));
        d.push_back(mx);
        detail += fmt("N=%d %.4f; ", n, mx);
    }
    return {d[0] > d[1] && d[1] > d[2], detail};
}

}  // namespace

int main(int argc, char** argv) {
    fs::path out = fs::temp_directory_path() / "dpt_acceptance";
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        if (!std::strcmp(argv[i], "--out") && i + 1 < argc) {
            out = argv[++i];
        } else if (!std::strcmp(argv[i], "--only") && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            for (std::string x; std::getline(ss, x, ',');) only.insert(std::stoi(x));
        } else {
            std::fprintf(stderr, "usage: %s [--out DIR] [--only 1,2,...]\n", argv[0]);
            return 2;
        }
    }
    fs::create_directories(out);
    Runs runs(out);

    const std::vector<std::pair<const char*, std::function<Outcome(Runs&)>>> criteria = {
        {"spin algebra invariants", c1_algebra},
        {"integrator vs superoperator exponential", c2_oracle},
        {"trace, Hermiticity and positivity in every run", c3_conservation},
        {"half-plane POVM", c4_povm},
        {"L+ + L- = L (fig5)", c5_identity},
        {"conditioned rates cross once near t = 4 (fig5)", c6_crossing},
        {"mean-field drift and short-time diffusion", c7_drift_diffusion},
        {"weak-noise consistency", c8_weak_noise},
        {"finite N converges to the asymptotic rate (fig2)", c9_convergence},
        {"two K minima swap on the s_x = 0 cut (fig3)", c10_cut},
        {"monotone Fock cusp line (fig4)", c11_cusp},
        {"dephasing effect shrinks with N", c12_dephasing},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = criteria[i].second(runs);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s criterion %d: %s | %s | %.1f s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                    o.detail.c_str(), seconds(t0));
        std::fflush(stdout);
    }
    std::printf("%d failed\n", failed);
    return failed == 0 ? 0 : 1;
}
