#pragma once

#include <optional>
#include <vector>

#include "dpt/density_matrix.hpp"

namespace dpt {

// Two-outcome quadrature-sign measurement on the cavity:
// E+ = int d^2a/pi |a><a| Theta(Re a), E- = I - E+.
struct HalfPlanePovm {
    int n_max = 0;
    RMatrix e_plus;
    RMatrix e_minus;
};

// Closed-form element <n|E+|m> (real).
double halfplane_element(int n, int m);

// Same element by brute 2D quadrature of the defining integral over Re a > 0.
// Throws if two refinement levels differ by more than 1e-10.
double halfplane_element_quadrature(int n, int m);

// Builds from the closed form. With validate, every element is checked
// against quadrature the first time a given n_max is built (results cached).
HalfPlanePovm build_halfplane_povm(int n_max, bool validate = true);

enum class Branch { Plus, Minus };

// tr_C((I (x) E_branch) rho), unnormalized.
CMatrix condition_state(const DensityMatrix& rho_full, const HalfPlanePovm& povm, Branch branch);
CMatrix condition_state(const CMatrix& rho_full, int atom_dim, const HalfPlanePovm& povm, Branch branch);

struct ConditionedEchoes {
    double l_plus = 0.0;
    double l_minus = 0.0;
};
ConditionedEchoes conditioned_echoes(const CMatrix& rho_full_t, int atom_dim, const HalfPlanePovm& povm,
                                     const CMatrix& rho_a0);

struct Crossing {
    double time = 0.0;
    double uncertainty = 0.0;  // output grid spacing
    int count = 0;             // sign changes inside the searched window
};

// Earliest sign change of (a - b) inside [t_lo, t_hi], linearly interpolated.
std::optional<Crossing> detect_crossing(const std::vector<double>& t, const std::vector<double>& a,
                                        const std::vector<double>& b, double t_lo, double t_hi);

}  // namespace dpt
