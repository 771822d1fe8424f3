#include "dpt/density_matrix.hpp"

#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace dpt {

DensityMatrix DensityMatrix::atomic(CMatrix m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("DensityMatrix: not square");
    DensityMatrix d;
    d.atom_dim = static_cast<int>(m.rows());
    d.data = std::move(m);
    return d;
}

DensityMatrix DensityMatrix::joint(CMatrix m, int atom_dim, int cavity_dim) {
    if (m.rows() != m.cols() || m.rows() != static_cast<Eigen::Index>(atom_dim) * cavity_dim)
        throw std::invalid_argument("DensityMatrix: joint dimension mismatch");
    DensityMatrix d;
    d.data = std::move(m);
    d.sector = Sector::AtomsCavity;
    d.atom_dim = atom_dim;
    d.cavity_dim = cavity_dim;
    return d;
}

double hermiticity_residue(const CMatrix& rho) {
    return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
}

Complex trace(const CMatrix& rho) { return rho.trace(); }

double min_eigenvalue(const CMatrix& rho) {
    const CMatrix h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

StateCheck check_state(const CMatrix& rho) {
    StateCheck c;
    c.hermiticity = hermiticity_residue(rho);
    c.trace_error = std::abs(trace(rho) - 1.0);
    c.min_eig = min_eigenvalue(rho);
    return c;
}

CMatrix pure_state(const CVector& psi) { return psi * psi.adjoint(); }

CMatrix dicke_state(int n_atoms, int k) {
    if (k < 0 || k > n_atoms) throw std::invalid_argument("dicke_state: k out of range");
    CMatrix r = CMatrix::Zero(n_atoms + 1, n_atoms + 1);
    r(k, k) = 1.0;
    return r;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

}  // namespace dpt
