#pragma once

// Taylor-series propagator for the reduced model in extended precision.
//
// Rates at large N need Loschmidt echoes far below 1e-16: at N = 200 and
// r = 0.4 the echo is ~1e-35. In double precision the tail is swamped by the
// rounding residue of the unitary rotation, so the reduced model is run in
// __float128 or MPFR instead.
//
// For states whose matrix X = D^dag rho D is real, with D = diag(i^k), the
// generator maps real symmetric X to real symmetric X:
//   dX/dt = w (B X + (B X)^T) + kappa (2 J+ X J- - {J-J+, X}) - kappa_d (m_k - m_l)^2 X
// with B = (J- - J+)/2 real antisymmetric. Dicke states are of this form.
// Only the lower triangle is stored.

#include <string>
#include <vector>

#include "dpt/master_equation.hpp"

namespace dpt {

enum class PrecisionTier { Double, Quad, Mpfr };

struct PrecisionChoice {
    PrecisionTier tier = PrecisionTier::Double;
    int bits = 53;
};

std::string to_string(PrecisionTier t);

// bits = N * rate_cap * log2(e) + guard
PrecisionChoice choose_precision(int n_atoms, double rate_cap, int guard_bits = 40);

struct ExtendedOptions {
    double rate_cap = 0.5;
    int guard_bits = 40;
    int force_bits = 0;         // > 0 overrides the automatic choice
    double theta = 16.0;        // target ||L|| * step
    bool check_positivity = true;
};

struct ExtendedRun {
    std::vector<double> times;
    RMatrix populations;  // (n_times, N+1): <k|rho(t)|k>
    std::vector<double> trace_drift;
    std::vector<double> min_eigenvalue;  // empty unless check_positivity
    PrecisionChoice precision;
    long applications = 0;
    long steps = 0;
    double norm_bound = 0.0;
};

// Real symmetric X0 <-> complex rho0.
bool has_real_form(const CMatrix& rho, double tol = 1e-14);
RMatrix to_real_form(const CMatrix& rho);
CMatrix from_real_form(const RMatrix& x);

// Infinity-norm bound of the real-form generator.
double real_form_norm_bound(const ModelParams& p);

ExtendedRun propagate_reduced_extended(const ModelParams& p, const RMatrix& x0,
                                       const std::vector<double>& t_grid,
                                       const ExtendedOptions& opt = {});

// Same real-form generator applied once in double; used by tests.
RMatrix apply_real_form(const ModelParams& p, const RMatrix& x);

}  // namespace dpt
