#pragma once

#include "dpt/types.hpp"

namespace dpt {

enum class Sector { Atomic, AtomsCavity };

struct DensityMatrix {
    CMatrix data;
    Sector sector = Sector::Atomic;
    // Only meaningful for AtomsCavity: atomic dimension and cavity Fock dimension.
    int atom_dim = 0;
    int cavity_dim = 1;

    int dim() const { return static_cast<int>(data.rows()); }

    static DensityMatrix atomic(CMatrix m);
    static DensityMatrix joint(CMatrix m, int atom_dim, int cavity_dim);
};

// Joint basis index: atomic index k, Fock index n -> k * cavity_dim + n.
inline int joint_index(int k, int n, int cavity_dim) { return k * cavity_dim + n; }

double hermiticity_residue(const CMatrix& rho);
Complex trace(const CMatrix& rho);
double min_eigenvalue(const CMatrix& rho);

struct StateCheck {
    double hermiticity = 0.0;
    double trace_error = 0.0;
    double min_eig = 0.0;
    bool ok(double herm_tol = 1e-10, double trace_tol = 1e-9, double eig_tol = -1e-8) const {
        return hermiticity <= herm_tol && trace_error <= trace_tol && min_eig >= eig_tol;
    }
};
StateCheck check_state(const CMatrix& rho);

CMatrix pure_state(const CVector& psi);
CMatrix dicke_state(int n_atoms, int k);
CMatrix kron(const CMatrix& a, const CMatrix& b);

}  // namespace dpt
