#include "dpt/master_equation.hpp"

#include <cmath>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

namespace dpt {

std::vector<double> uniform_grid(double t0, double t1, int n_points) {
    if (n_points < 1) throw std::invalid_argument("uniform_grid: need at least one point");
    std::vector<double> t(n_points);
    if (n_points == 1) {
        t[0] = t0;
        return t;
    }
    for (int i = 0; i < n_points; ++i) t[i] = t0 + (t1 - t0) * i / (n_points - 1);
    return t;
}

EvolutionDiagnostics evolve_streaming(const Liouvillian& gen, const CMatrix& rho0,
                                      const std::vector<double>& t_grid, const StateObserver& obs,
                                      const EvolveOptions& opt, bool check_positivity) {
    if (rho0.rows() != gen.dim() || rho0.cols() != gen.dim())
        throw std::invalid_argument("evolve: rho0 dimension does not match the generator");
    if (!(opt.rel_tol > 0.0) || !(opt.abs_tol > 0.0))
        throw std::invalid_argument("evolve: tolerances must be positive");

    EvolutionDiagnostics diag;
    int atom_dim = 0, cav_dim = 0;
    if (const auto* fg = dynamic_cast<const FullGenerator*>(&gen)) {
        atom_dim = fg->atom_dim();
        cav_dim = fg->cavity_dim();
    }

    auto rhs = [&](double, const CMatrix& y, CMatrix& dy) { gen.apply(y, dy); };
    auto hook = [](CMatrix& y) {
        y = (0.5 * (y + y.adjoint())).eval();
        return true;
    };
    auto observe = [&](std::size_t i, double t, const CMatrix& y) {
        const double drift = std::abs(y.trace() - 1.0);
        diag.max_trace_drift = std::max(diag.max_trace_drift, drift);
        diag.max_hermiticity = std::max(diag.max_hermiticity, hermiticity_residue(y));
        if (check_positivity) diag.min_eigenvalue = std::min(diag.min_eigenvalue, min_eigenvalue(y));
        if (cav_dim > 0) {
            const double top = top_fock_population(y, atom_dim, cav_dim, std::min(2, cav_dim));
            diag.max_top_fock_population = std::max(diag.max_top_fock_population, top);
        }
        obs(i, t, y);
    };

    OdeOptions o;
    o.rel_tol = opt.rel_tol;
    o.abs_tol = opt.abs_tol;
    o.hermite_output = opt.hermite_output;
    const OdeStats st = integrate_dp45(rhs, CMatrix(rho0), t_grid, observe, o, hook);
    diag.accepted = st.accepted;
    diag.rejected = st.rejected;
    diag.rhs_evals = st.rhs_evals;
    if (diag.max_top_fock_population >= opt.cutoff_tol) diag.cutoff_flagged = true;
    if (diag.max_trace_drift > opt.trace_fail) {
        diag.failed = true;
        diag.message = "trace drift " + std::to_string(diag.max_trace_drift) + " exceeds limit";
    }
    return diag;
}

EvolutionResult evolve(const Liouvillian& gen, const DensityMatrix& rho0,
                       const std::vector<double>& t_grid, const EvolveOptions& opt) {
    if (rho0.sector != gen.sector()) throw std::invalid_argument("evolve: sector mismatch");
    EvolutionResult res;
    res.times = t_grid;
    res.states.resize(t_grid.size());
    res.diagnostics = evolve_streaming(
        gen, rho0.data, t_grid, [&](std::size_t i, double, const CMatrix& y) { res.states[i] = y; },
        opt);
    return res;
}

EvolutionResult evolve(const Liouvillian& gen, const DensityMatrix& rho0,
                       const std::vector<double>& t_grid, double rel_tol, double abs_tol) {
    EvolveOptions o;
    o.rel_tol = rel_tol;
    o.abs_tol = abs_tol;
    return evolve(gen, rho0, t_grid, o);
}

CMatrix brute_force_propagator(const Liouvillian& gen, double t) {
    if (gen.dim() > kBruteForceMaxDim)
        throw std::invalid_argument("brute_force_propagator: dimension " + std::to_string(gen.dim()) +
                                    " above cap " + std::to_string(kBruteForceMaxDim));
    const CMatrix S = gen.superoperator();
    if (t == 0.0) return CMatrix::Identity(S.rows(), S.cols());
    const CMatrix tS = t * S;
    return tS.exp();
}

CMatrix apply_map(const CMatrix& map, const CMatrix& rho) {
    const Eigen::Index d = rho.rows();
    CVector v = map * Eigen::Map<const CVector>(rho.data(), d * d);
    return Eigen::Map<CMatrix>(v.data(), d, d);
}

CMatrix partial_trace_cavity(const CMatrix& rho, int atom_dim, int cavity_dim) {
    CMatrix out = CMatrix::Zero(atom_dim, atom_dim);
    for (int l = 0; l < atom_dim; ++l)
        for (int k = 0; k < atom_dim; ++k) {
            Complex s = 0.0;
            for (int n = 0; n < cavity_dim; ++n)
                s += rho(joint_index(k, n, cavity_dim), joint_index(l, n, cavity_dim));
            out(k, l) = s;
        }
    return out;
}

DensityMatrix partial_trace_cavity(const DensityMatrix& rho) {
    if (rho.sector != Sector::AtomsCavity)
        throw std::invalid_argument("partial_trace_cavity: input is not atoms+cavity");
    return DensityMatrix::atomic(partial_trace_cavity(rho.data, rho.atom_dim, rho.cavity_dim));
}

double top_fock_population(const CMatrix& rho, int atom_dim, int cavity_dim, int levels) {
    double p = 0.0;
    for (int k = 0; k < atom_dim; ++k)
        for (int n = cavity_dim - levels; n < cavity_dim; ++n) {
            const int i = joint_index(k, n, cavity_dim);
            p += rho(i, i).real();
        }
    return p;
}

CMatrix with_vacuum(const CMatrix& rho_a, int cavity_dim) {
    CMatrix vac = CMatrix::Zero(cavity_dim, cavity_dim);
    vac(0, 0) = 1.0;
    return kron(rho_a, vac);
}

}  // namespace dpt
