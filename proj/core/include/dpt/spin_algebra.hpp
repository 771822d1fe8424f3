#pragma once

#include <optional>

#include "dpt/types.hpp"

namespace dpt {

// Collective spin j = N/2 in the Dicke basis, stored in ascending m:
// index k = m + N/2, so k = 0 is m = -N/2 and k = N is the dark state m = +N/2.
// With this ordering J+ raises k and lives on the sub-diagonal (k+1, k).
struct SpinOperators {
    int n_atoms = 0;
    int dim = 0;
    CMatrix jx, jy, jz, jplus, jminus;

    double j() const { return 0.5 * n_atoms; }
    double m_of(int k) const { return k - 0.5 * n_atoms; }
};

SpinOperators build_spin_operators(int n_atoms);

// Ladder coefficient <k+1|J+|k> = sqrt(j(j+1) - m(m+1)).
double ladder_coefficient(int n_atoms, int k);

struct SpinCoherentPoint {
    double phi = 0.0;    // [0, 2pi)
    double theta = 0.0;  // [0, pi]

    static SpinCoherentPoint make(double phi, double theta);  // wraps phi, validates theta
    bool at_pole(double tol = 0.0) const;
    Eigen::Vector3d bloch() const;
    static SpinCoherentPoint from_bloch(const Eigen::Vector3d& n);
};

// Amplitudes sqrt(C(N,k)) cos^k(theta/2) (e^{i phi} sin(theta/2))^{N-k}.
CVector coherent_state_vector(int n_atoms, const SpinCoherentPoint& point);

// Exact -(1/N) ln <phi,theta|rho|phi,theta>; +inf when the overlap underflows.
double overlap_exponent_W(const CMatrix& rho, const SpinCoherentPoint& point);

// Dicke-state overlap exponent, state given by its index k = m + N/2.
enum class WMode { Exact, ClosedForm, Stirling };
double overlap_exponent_W_dicke(int n_atoms, int k, const SpinCoherentPoint& point,
                                WMode mode = WMode::ClosedForm);

// N -> infinity limit for a Dicke state with mu = k/N, as a function of the
// polar angle only. Also usable off the unit sphere via n_z/|n|.
double overlap_exponent_W_stirling(double mu, double cos_theta);

double binary_entropy(double mu);

}  // namespace dpt
