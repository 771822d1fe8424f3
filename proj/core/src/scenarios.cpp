#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <thread>

#include "dpt/cli_runner.hpp"
#include "dpt/density_matrix.hpp"
#include "dpt/echoes.hpp"
#include "dpt/extended_propagator.hpp"
#include "dpt/povm_homodyne.hpp"
#include "dpt/spin_algebra.hpp"

namespace dpt {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// g^2 = (25/72) omega gamma with gamma = omega = 1
constexpr const char* kFig1 = R"([scenario]
name = fig1
model = full
[model]
n_atoms = 4, 8, 12
omega = 1
gamma = 1
g = 0.58925565098878963
delta0 = 0.1
delta1 = 0
[initial]
state = dark
[time]
t_max = 8
n_out = 161
)";

constexpr const char* kFig2 = R"([scenario]
name = fig2
model = reduced
asymptotic = true
[model]
n_atoms = 50, 100, 200
lambda = 1.2
include_dephasing = true
[initial]
state = dark
[time]
t_max = 8
n_out = 161
[asymptotic]
t_max = 11.4
n_out = 229
)";

constexpr const char* kFig3 = R"([scenario]
name = fig3
model = asymptotic
asymptotic = true
[model]
lambda = 1.2
include_dephasing = true
[initial]
state = dark
[time]
t_max = 6
n_out = 121
[outputs]
echo = false
landscape_time = 4.8
cut_times = 4.4, 4.6, 4.7, 4.8, 4.9, 5.0, 5.2
)";

constexpr const char* kFig4 = R"([scenario]
name = fig4
model = reduced
[model]
n_atoms = 100
lambda = 1.2
include_dephasing = true
[initial]
state = dark
[time]
t_max = 10
n_out = 201
[outputs]
fock_rates = true
cusp_mu = 1, 0.95, 0.9, 0.85, 0.8, 0.75, 0.7
[asymptotic]
t_max = 10
n_out = 101
)";

// g^2 = (25/72) omega gamma with gamma = omega = 1
constexpr const char* kFig5 = R"([scenario]
name = fig5
model = full
[model]
n_atoms = 12
omega = 1
gamma = 1
g = 0.58925565098878963
delta0 = 0.1
delta1 = 0
[initial]
state = dark
[time]
t_max = 8
n_out = 161
[outputs]
conditioned = true
)";

const std::map<std::string, const char*>& builtins() {
    static const std::map<std::string, const char*> m = {
        {"fig1", kFig1}, {"fig2", kFig2}, {"fig3", kFig3}, {"fig4", kFig4}, {"fig5", kFig5}};
    return m;
}

std::string model_name(ModelKind k) {
    switch (k) {
        case ModelKind::Full: return "full";
        case ModelKind::Reduced: return "reduced";
        case ModelKind::Asymptotic: return "asymptotic";
    }
    return "?";
}

void run_parallel(std::vector<std::function<void()>>& tasks, int threads) {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errs(tasks.size());
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next++;
            if (i >= tasks.size()) return;
            try {
                tasks[i]();
            } catch (...) {
                errs[i] = std::current_exception();
            }
        }
    };
    const int nt = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(1, tasks.size())));
    std::vector<std::thread> pool;
    for (int i = 1; i < nt; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

// Wraps a task so that failures carry the scenario context.
std::function<void()> with_context(const std::string& ctx, std::function<void()> f) {
    return [ctx, f = std::move(f)] {
        try {
            f();
        } catch (const ScenarioError&) {
            throw;
        } catch (const std::exception& e) {
            throw ScenarioError(ctx + ": " + e.what());
        }
    };
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string time_tag(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", t);
    return buf;
}

bool is_diagonal(const CMatrix& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (i != j && m(i, j) != Complex(0.0)) return false;
    return true;
}

struct OutFile {
    std::string name;
    std::string text;
};

struct FiniteOut {
    json summary;
    std::vector<OutFile> files;
};

FiniteOut run_finite(const ScenarioConfig& cfg, int n, bool want_fock) {
    const auto t0 = std::chrono::steady_clock::now();
    ModelParams p = cfg.params;
    p.n_atoms = n;
    p = p.resolved();
    const CMatrix rho_a0 = initial_state(cfg.initial, n);
    const std::vector<double> grid = uniform_grid(0.0, cfg.t_max, cfg.n_out);
    const std::size_t nt = grid.size();
    std::vector<double> L(nt), Lp, Lm;
    RMatrix pops(static_cast<Eigen::Index>(nt), n + 1);
    json diag;
    diag["n_atoms"] = n;

    const bool diag_initial = is_diagonal(rho_a0);
    const bool use_ext = cfg.model == ModelKind::Reduced && cfg.method != Method::Dp45 && diag_initial;
    if (cfg.method == Method::Extended && !use_ext)
        throw std::invalid_argument("extended propagation needs the reduced model and a diagonal initial state");

    if (use_ext) {
        ExtendedOptions eo;
        eo.check_positivity = cfg.check_positivity;
        const ExtendedRun run = propagate_reduced_extended(p, to_real_form(rho_a0), grid, eo);
        pops = run.populations;
        for (std::size_t i = 0; i < nt; ++i) {
            double l = 0.0;
            for (int k = 0; k <= n; ++k) l += rho_a0(k, k).real() * pops(static_cast<Eigen::Index>(i), k);
            L[i] = l;
        }
        diag["method"] = "extended";
        diag["precision"] = to_string(run.precision.tier);
        diag["precision_bits"] = run.precision.bits;
        diag["steps"] = run.steps;
        diag["generator_applications"] = run.applications;
        double drift = 0.0;
        for (double d : run.trace_drift) drift = std::max(drift, std::abs(d));
        diag["max_trace_drift"] = drift;
        diag["max_hermiticity"] = 0.0;  // symmetric by construction
        if (cfg.check_positivity && !run.min_eigenvalue.empty())
            diag["min_eigenvalue"] = *std::min_element(run.min_eigenvalue.begin(), run.min_eigenvalue.end());
    } else {
        std::unique_ptr<Liouvillian> gen;
        CMatrix rho0;
        int cav_dim = 1;
        std::vector<std::string> warnings;
        if (cfg.model == ModelKind::Full) {
            auto fg = std::make_unique<FullGenerator>(p);
            cav_dim = fg->cavity_dim();
            warnings = fg->warnings();
            rho0 = with_vacuum(rho_a0, cav_dim);
            gen = std::move(fg);
        } else {
            gen = std::make_unique<ReducedGenerator>(p);
            rho0 = rho_a0;
        }
        std::optional<HalfPlanePovm> povm;
        if (cfg.conditioned) {
            povm = build_halfplane_povm(cav_dim - 1);
            Lp.resize(nt);
            Lm.resize(nt);
        }
        const int atom_dim = n + 1;
        auto observe = [&](std::size_t i, double, const CMatrix& rho) {
            const CMatrix rho_a = cav_dim > 1 ? partial_trace_cavity(rho, atom_dim, cav_dim) : rho;
            L[i] = loschmidt_echo(rho_a, rho_a0);
            for (int k = 0; k <= n; ++k) pops(static_cast<Eigen::Index>(i), k) = rho_a(k, k).real();
            if (povm) {
                const ConditionedEchoes ce = conditioned_echoes(rho, atom_dim, *povm, rho_a0);
                Lp[i] = ce.l_plus;
                Lm[i] = ce.l_minus;
            }
        };
        EvolveOptions eo;
        eo.rel_tol = cfg.rel_tol;
        eo.abs_tol = cfg.abs_tol;
        const EvolutionDiagnostics d = evolve_streaming(*gen, rho0, grid, observe, eo, cfg.check_positivity);
        if (d.failed) throw std::runtime_error(d.message);
        diag["method"] = "dp45";
        diag["accepted_steps"] = d.accepted;
        diag["rejected_steps"] = d.rejected;
        diag["rhs_evaluations"] = d.rhs_evals;
        diag["max_trace_drift"] = d.max_trace_drift;
        diag["max_hermiticity"] = d.max_hermiticity;
        if (cfg.check_positivity) diag["min_eigenvalue"] = d.min_eigenvalue;
        if (cfg.model == ModelKind::Full) {
            diag["cavity_cutoff"] = cav_dim - 1;
            diag["max_top_fock_population"] = d.max_top_fock_population;
            diag["cutoff_flagged"] = d.cutoff_flagged;
            diag["warnings"] = warnings;
        }
    }

    FiniteOut out;
    const std::string suffix = "_N" + std::to_string(n);
    if (cfg.echo) {
        CsvWriter w({"t", "L", "r"});
        for (std::size_t i = 0; i < nt; ++i) w.row({grid[i], L[i], rate_function(L[i], n)});
        out.files.push_back({"rate_function" + suffix + ".csv", w.text()});
    }
    if (cfg.conditioned) {
        CsvWriter w({"t", "L", "L_plus", "L_minus", "r", "r_plus", "r_minus"});
        std::vector<double> rp(nt), rm(nt);
        double max_residue = 0.0;
        for (std::size_t i = 0; i < nt; ++i) {
            rp[i] = rate_function(Lp[i], n);
            rm[i] = rate_function(Lm[i], n);
            max_residue = std::max(max_residue, std::abs(Lp[i] + Lm[i] - L[i]));
            w.row({grid[i], L[i], Lp[i], Lm[i], rate_function(L[i], n), rp[i], rm[i]});
        }
        const std::string name = cfg.n_atoms_list.size() == 1 ? "conditioned.csv" : "conditioned" + suffix + ".csv";
        out.files.push_back({name, w.text()});
        json c;
        c["max_sum_residue"] = max_residue;
        if (auto cr = detect_crossing(grid, rp, rm, 2.0, 6.0)) {
            c["crossing_time"] = cr->time;
            c["crossing_uncertainty"] = cr->uncertainty;
            c["crossings_in_2_6"] = cr->count;
        } else {
            c["crossing_time"] = nullptr;
            c["crossings_in_2_6"] = 0;
        }
        diag["conditioned"] = c;
    }
    if (want_fock) {
        CsvWriter w({"t", "m", "r_m"});
        for (std::size_t i = 0; i < nt; ++i) {
            const RVector row = pops.row(static_cast<Eigen::Index>(i)).transpose();
            const std::vector<double> r = fock_overlap_rates_from_populations(row);
            for (int k = 0; k <= n; ++k) w.row({grid[i], k - 0.5 * n, r[static_cast<std::size_t>(k)]});
        }
        out.files.push_back({"fock_rates.csv", w.text()});
    }
    diag["elapsed_s"] = seconds_since(t0);
    out.summary = diag;
    return out;
}

Vec3 initial_bloch(const InitialSpec& s) {
    if (s.kind == InitialKind::Coherent) return SpinCoherentPoint::make(s.phi, s.theta).bloch();
    return Vec3(0, 0, 1);
}

OverlapW initial_overlap(const InitialSpec& s) {
    if (s.kind == InitialKind::Coherent) return OverlapW::coherent(initial_bloch(s));
    return OverlapW::dicke(1.0);
}

}  // namespace

std::vector<std::string> builtin_scenario_names() {
    std::vector<std::string> v;
    for (const auto& [k, _] : builtins()) v.push_back(k);
    return v;
}

std::string builtin_scenario_text(const std::string& name) {
    auto it = builtins().find(name);
    if (it == builtins().end()) throw ConfigError("unknown scenario '" + name + "'");
    return it->second;
}

ScenarioConfig builtin_scenario(const std::string& name) { return parse_config(builtin_scenario_text(name)); }

CMatrix initial_state(const InitialSpec& spec, int n) {
    switch (spec.kind) {
        case InitialKind::Dark: return dicke_state(n, n);
        case InitialKind::Dicke: return dicke_state(n, static_cast<int>(std::lround(spec.m + 0.5 * n)));
        case InitialKind::Coherent:
            return pure_state(coherent_state_vector(n, SpinCoherentPoint::make(spec.phi, spec.theta)));
        case InitialKind::Mixed: {
            CMatrix rho = CMatrix::Zero(n + 1, n + 1);
            double s = 0.0;
            for (std::size_t i = 0; i < spec.m_values.size(); ++i) {
                rho += spec.weights[i] * dicke_state(n, static_cast<int>(std::lround(spec.m_values[i] + 0.5 * n)));
                s += spec.weights[i];
            }
            return rho / s;
        }
    }
    throw std::logic_error("initial_state: bad kind");
}

ScenarioResult run_scenario(const ScenarioConfig& cfg_in, const RunOptions& opt) {
    ScenarioConfig cfg = cfg_in;
    if (opt.seed) cfg.seed = *opt.seed;
    cfg.rate.seed = cfg.seed;
    validate_config(cfg);
    const std::string ctx = "scenario " + cfg.name;
    const auto t_start = std::chrono::steady_clock::now();

    ModelParams pr = cfg.params;
    pr.n_atoms = cfg.n_atoms_list.empty() ? 1 : cfg.n_atoms_list.front();
    pr = pr.resolved();

    json summary;
    summary["version"] = std::string("dpt ") + kVersion;
    summary["scenario"] = cfg.name;
    summary["model"] = model_name(cfg.model);
    summary["lambda"] = pr.lambda;
    summary["omega"] = pr.omega;
    summary["include_dephasing"] = pr.include_dephasing;
    summary["n_atoms"] = cfg.n_atoms_list;
    summary["t_max"] = cfg.t_max;
    summary["n_out"] = cfg.n_out;
    summary["seed"] = cfg.seed;

    std::vector<std::function<void()>> tasks;

    // finite-N runs, largest first for load balance
    const bool finite = cfg.model != ModelKind::Asymptotic;
    const int fock_n = cfg.fock_rates ? (cfg.fock_n_atoms ? cfg.fock_n_atoms : cfg.n_atoms_list.front()) : -1;
    std::vector<int> order = finite ? cfg.n_atoms_list : std::vector<int>{};
    std::vector<FiniteOut> finite_out(order.size());
    std::vector<std::size_t> idx(order.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return order[a] > order[b]; });
    for (std::size_t i : idx) {
        const int n = order[i];
        tasks.push_back(with_context(ctx + ": N=" + std::to_string(n) + " " + model_name(cfg.model) + " run",
                                     [&, i, n] { finite_out[i] = run_finite(cfg, n, n == fock_n); }));
    }

    const WeakNoiseModel wm{pr.lambda, pr.omega, true};
    const Vec3 x0 = initial_bloch(cfg.initial);
    const OverlapW w0 = initial_overlap(cfg.initial);
    const double at_max = cfg.asym_t_max > 0 ? cfg.asym_t_max : cfg.t_max;
    const int an_out = cfg.asym_n_out > 0 ? cfg.asym_n_out : cfg.n_out;
    const std::vector<double> agrid = uniform_grid(0.0, at_max, an_out);

    std::optional<AsymptoticRate> asym;
    double asym_elapsed = 0.0;
    if (cfg.asymptotic || cfg.model == ModelKind::Asymptotic) {
        tasks.push_back(with_context(ctx + ": asymptotic rate", [&] {
            const auto t0 = std::chrono::steady_clock::now();
            asym = asymptotic_rate(x0, w0, agrid, wm, cfg.rate);
            asym_elapsed = seconds_since(t0);
        }));
    }
    std::optional<KLandscape> land;
    if (cfg.landscape_time) {
        tasks.push_back(with_context(ctx + ": landscape at t=" + time_tag(*cfg.landscape_time),
                                     [&] { land = k_landscape(x0, w0, *cfg.landscape_time, wm, cfg.grid); }));
    }
    std::vector<CutProfile> cuts(cfg.cut_times.size());
    for (std::size_t i = 0; i < cfg.cut_times.size(); ++i) {
        tasks.push_back(with_context(ctx + ": cut at t=" + time_tag(cfg.cut_times[i]),
                                     [&, i] { cuts[i] = symmetry_cut(w0, cfg.cut_times[i], wm, cfg.cut); }));
    }
    std::vector<CuspPoint> cusp(cfg.cusp_mu.size());
    for (std::size_t i = 0; i < cfg.cusp_mu.size(); ++i) {
        tasks.push_back(with_context(ctx + ": cusp line mu=" + time_tag(cfg.cusp_mu[i]), [&, i] {
            cusp[i] = fock_cusp_line({cfg.cusp_mu[i]}, agrid, wm, cfg.rate).front();
        }));
    }

    run_parallel(tasks, opt.threads);

    // assemble outputs in a fixed order
    std::vector<OutFile> files;
    json runs = json::array();
    for (std::size_t i = 0; i < finite_out.size(); ++i) {
        runs.push_back(finite_out[i].summary);
        for (auto& f : finite_out[i].files) files.push_back(std::move(f));
    }
    if (finite) summary["runs"] = runs;

    if (asym) {
        CsvWriter wr({"t", "r", "branch", "critical", "gap", "r_landscape", "r_bvp"});
        for (std::size_t i = 0; i < agrid.size(); ++i)
            wr.row({agrid[i], asym->series.values[i], static_cast<double>(asym->series.branch[i]),
                    asym->critical[i] ? 1.0 : 0.0, asym->gap[i] ? 1.0 : 0.0, asym->grid_route[i], asym->bvp_route[i]});
        files.push_back({"rate_function_asymptotic.csv", wr.text()});
        json a;
        const double period = mean_field_period(wm.lambda, wm.omega);
        json crit = json::array(), kinks = json::array();
        int in_first = 0;
        for (const Kink& k : asym->kinks) {
            json kj;
            kj["time"] = k.time;
            kj["from_branch"] = k.from_branch;
            kj["to_branch"] = k.to_branch;
            kj["slope_left"] = k.slope_left;
            kj["slope_right"] = k.slope_right;
            kj["noise_floor"] = k.noise_floor;
            kj["passes_criterion"] = k.passes_criterion;
            kinks.push_back(kj);
            if (k.passes_criterion) {
                crit.push_back(k.time);
                if (k.time <= period) ++in_first;
            }
        }
        a["critical_times"] = crit;
        a["kinks_in_first_period"] = in_first;
        a["mean_field_period"] = period;
        a["kinks"] = kinks;
        a["branch_count"] = asym->branch_count;
        a["max_route_difference"] = asym->max_route_difference;
        a["gap_count"] = std::count(asym->gap.begin(), asym->gap.end(), true);
        a["critical_flags"] = std::count(asym->critical.begin(), asym->critical.end(), true);
        a["elapsed_s"] = asym_elapsed;
        summary["asymptotic"] = a;
    }
    if (land) {
        CsvWriter wl({"phi", "theta", "S", "W", "K"});
        for (int i = 0; i < land->n_theta; ++i)
            for (int j = 0; j < land->n_phi; ++j)
                wl.row({land->phi[static_cast<std::size_t>(j)], land->theta[static_cast<std::size_t>(i)], land->S(i, j),
                        land->W(i, j), land->K(i, j)});
        files.push_back({"landscape.csv", wl.text()});
        json l;
        l["time"] = land->time;
        l["missing_cells"] = land->missing;
        l["s_min"] = land->s_min;
        l["s_at_mean_field"] = land->s_at_mean_field;
        json mins = json::array();
        for (const auto& m : land->minima) {
            json mj;
            mj["phi"] = m.point.phi;
            mj["theta"] = m.point.theta;
            mj["K"] = m.K;
            mj["S"] = m.S;
            mj["hessian_det"] = m.hessian_det;
            mins.push_back(mj);
        }
        l["minima"] = mins;
        summary["landscape"] = l;
    }
    if (!cuts.empty()) {
        json cj = json::array();
        for (std::size_t i = 0; i < cuts.size(); ++i) {
            const CutProfile& c = cuts[i];
            CsvWriter wc({"alpha", "S", "W", "K"});
            for (std::size_t k = 0; k < c.alpha.size(); ++k) wc.row({c.alpha[k], c.S[k], c.W[k], c.K[k]});
            files.push_back({"cut_t" + time_tag(cfg.cut_times[i]) + ".csv", wc.text()});
            json e;
            e["time"] = cfg.cut_times[i];
            json km = json::array(), sm = json::array();
            for (int k : c.k_minima) km.push_back({{"alpha", c.alpha[k]}, {"K", c.K[k]}});
            for (int k : c.s_minima) sm.push_back({{"alpha", c.alpha[k]}, {"S", c.S[k]}});
            e["k_minima"] = km;
            e["s_minima"] = sm;
            cj.push_back(e);
        }
        summary["cuts"] = cj;
    }
    if (!cusp.empty()) {
        const double nref = fock_n > 0 ? fock_n : (cfg.n_atoms_list.empty() ? NAN : cfg.n_atoms_list.front());
        CsvWriter wc({"mu", "m_per_n", "m", "t_c", "found"});
        json cj = json::array();
        for (const auto& c : cusp) {
            const double mpn = c.mu - 0.5;
            wc.row({c.mu, mpn, mpn * nref, c.found ? c.time : NAN, c.found ? 1.0 : 0.0});
            json e;
            e["mu"] = c.mu;
            e["found"] = c.found;
            if (c.found) e["t_c"] = c.time;
            cj.push_back(e);
        }
        files.push_back({"cusp_line.csv", wc.text()});
        summary["cusp_line"] = cj;
    }

    // single writer; on failure remove everything written so far
    std::vector<fs::path> written;
    try {
        fs::create_directories(opt.out_dir);
        json names = json::array();
        for (const auto& f : files) {
            const fs::path path = opt.out_dir / f.name;
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            if (!out) throw std::runtime_error("cannot open " + path.string());
            written.push_back(path);
            out.write(f.text.data(), static_cast<std::streamsize>(f.text.size()));
            if (!out) throw std::runtime_error("write failed: " + path.string());
            names.push_back(f.name);
        }
        summary["files"] = names;
        summary["elapsed_s"] = seconds_since(t_start);
        const fs::path sp = opt.out_dir / "summary.json";
        std::ofstream out(sp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + sp.string());
        written.push_back(sp);
        out << summary.dump(2) << '\n';
        if (!out) throw std::runtime_error("write failed: " + sp.string());
    } catch (const std::exception& e) {
        std::error_code ec;
        for (const auto& p : written) fs::remove(p, ec);
        throw ScenarioError(ctx + ": writing outputs: " + e.what());
    }
    ScenarioResult res;
    res.summary = summary;
    res.files = written;
    return res;
}

}  // namespace dpt
