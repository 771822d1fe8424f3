#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "dpt/density_matrix.hpp"
#include "dpt/ode.hpp"
#include "dpt/spin_algebra.hpp"

namespace dpt {

// Frequencies in units of the drive omega (time unit 1/omega).
struct ModelParams {
    int n_atoms = 0;
    double omega = 1.0;
    double delta0 = 0.0;
    double delta1 = 0.0;
    double g = -1.0;       // < 0 means unset
    double gamma = -1.0;   // < 0 means unset
    double lambda = -1.0;  // < 0 means derive from omega, gamma, g
    int n_max = 0;         // 0 means default cutoff
    bool include_dephasing = false;

    bool has_g() const { return g >= 0.0; }
    bool has_gamma() const { return gamma >= 0.0; }
    // Fills lambda from (omega, gamma, g) when possible and checks consistency.
    ModelParams resolved() const;
    void validate_full() const;
    void validate_reduced() const;
    double kappa() const { return omega / (lambda * n_atoms); }
    int default_n_max() const;
    int cutoff() const { return n_max > 0 ? n_max : default_n_max(); }
};

class Liouvillian {
public:
    virtual ~Liouvillian() = default;
    virtual int dim() const = 0;
    virtual Sector sector() const = 0;
    // out = L[rho]; out is resized by the callee.
    virtual void apply(const CMatrix& rho, CMatrix& out) const = 0;
    CMatrix operator()(const CMatrix& rho) const {
        CMatrix out;
        apply(rho, out);
        return out;
    }
    // Column-stacked superoperator, only for small dimensions.
    CMatrix superoperator() const;
};

class FullGenerator final : public Liouvillian {
public:
    explicit FullGenerator(const ModelParams& p);
    int dim() const override { return atom_dim_ * cav_dim_; }
    Sector sector() const override { return Sector::AtomsCavity; }
    void apply(const CMatrix& rho, CMatrix& out) const override;

    int atom_dim() const { return atom_dim_; }
    int cavity_dim() const { return cav_dim_; }
    const ModelParams& params() const { return p_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    double photon_estimate() const { return n_est_; }

private:
    // y = (H - i gamma a^dag a) x for one column
    void h_eff_column(const Complex* x, Complex* y) const;

    ModelParams p_;
    int atom_dim_ = 0, cav_dim_ = 0;
    CVector hdiag_;  // diagonal of H - i gamma a^dag a
    RVector c_;      // atomic ladder coefficients, c_N = 0
    RVector sq_;     // sqrt(n)
    double gc_ = 0.0;
    double n_est_ = 0.0;
    std::vector<std::string> warnings_;
};

class ReducedGenerator final : public Liouvillian {
public:
    explicit ReducedGenerator(const ModelParams& p);
    int dim() const override { return n_ + 1; }
    Sector sector() const override { return Sector::Atomic; }
    void apply(const CMatrix& rho, CMatrix& out) const override;
    const ModelParams& params() const { return p_; }

private:
    ModelParams p_;
    int n_ = 0;
    double kappa_ = 0.0, kappa_d_ = 0.0;
    RVector c_;  // ladder coefficients c_k, c_N = 0
    RVector m_;
};

struct EvolveOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    bool hermite_output = false;
    double cutoff_tol = 1e-8;  // max population of the top two Fock levels
    double trace_fail = 1e-6;
};

struct EvolutionDiagnostics {
    long accepted = 0;
    long rejected = 0;
    long rhs_evals = 0;
    double max_trace_drift = 0.0;
    double max_hermiticity = 0.0;
    double min_eigenvalue = 1.0;  // filled only if check_positivity
    double max_top_fock_population = 0.0;
    bool cutoff_flagged = false;
    bool failed = false;
    std::string message;
};

struct EvolutionResult {
    std::vector<double> times;
    std::vector<CMatrix> states;
    EvolutionDiagnostics diagnostics;
};

using StateObserver = std::function<void(std::size_t, double, const CMatrix&)>;

// Streaming form: observer sees each output state, nothing is stored.
EvolutionDiagnostics evolve_streaming(const Liouvillian& gen, const CMatrix& rho0,
                                      const std::vector<double>& t_grid, const StateObserver& obs,
                                      const EvolveOptions& opt = {}, bool check_positivity = false);

EvolutionResult evolve(const Liouvillian& gen, const DensityMatrix& rho0,
                       const std::vector<double>& t_grid, double rel_tol = 1e-10,
                       double abs_tol = 1e-12);
EvolutionResult evolve(const Liouvillian& gen, const DensityMatrix& rho0,
                       const std::vector<double>& t_grid, const EvolveOptions& opt);

inline constexpr int kBruteForceMaxDim = 64;

// exp(t L) on column-stacked density matrices.
CMatrix brute_force_propagator(const Liouvillian& gen, double t);
CMatrix apply_map(const CMatrix& map, const CMatrix& rho);

DensityMatrix partial_trace_cavity(const DensityMatrix& rho);
CMatrix partial_trace_cavity(const CMatrix& rho, int atom_dim, int cavity_dim);

// Population of the top `levels` Fock states.
double top_fock_population(const CMatrix& rho, int atom_dim, int cavity_dim, int levels = 2);

// rho_A (x) |0><0|
CMatrix with_vacuum(const CMatrix& rho_a, int cavity_dim);

std::vector<double> uniform_grid(double t0, double t1, int n_points);

}  // namespace dpt
