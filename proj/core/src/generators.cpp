#include "dpt/master_equation.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dpt {

ModelParams ModelParams::resolved() const {
    ModelParams p = *this;
    if (p.has_g() && p.has_gamma() && p.g > 0.0) {
        const double lam = p.omega * p.gamma / (2.0 * p.g * p.g);
        if (p.lambda < 0.0) {
            p.lambda = lam;
        } else if (std::abs(p.lambda - lam) > 1e-12 * std::max(1.0, std::abs(lam))) {
            std::ostringstream os;
            os << "ModelParams: lambda=" << p.lambda << " inconsistent with omega*gamma/(2g^2)=" << lam;
            throw std::invalid_argument(os.str());
        }
    }
    return p;
}

void ModelParams::validate_reduced() const {
    if (n_atoms < 1) throw std::invalid_argument("ModelParams: n_atoms must be >= 1");
    if (omega < 0.0) throw std::invalid_argument("ModelParams: omega must be >= 0");
    if (!(lambda > 0.0)) throw std::invalid_argument("ModelParams: lambda must be > 0");
}

void ModelParams::validate_full() const {
    if (n_atoms < 1) throw std::invalid_argument("ModelParams: n_atoms must be >= 1");
    if (omega < 0.0) throw std::invalid_argument("ModelParams: omega must be >= 0");
    if (!has_g()) throw std::invalid_argument("ModelParams: full model needs g");
    if (!has_gamma()) throw std::invalid_argument("ModelParams: full model needs gamma");
    if (n_max < 0) throw std::invalid_argument("ModelParams: n_max must be >= 1");
    if (cutoff() < 1) throw std::invalid_argument("ModelParams: n_max must be >= 1");
}

int ModelParams::default_n_max() const {
    const double den = gamma * gamma + delta0 * delta0;
    if (!(den > 0.0)) return 10;
    return static_cast<int>(std::ceil(4.0 * g * g * n_atoms / den + 10.0));
}

CMatrix Liouvillian::superoperator() const {
    const int d = dim();
    if (d > kBruteForceMaxDim) throw std::invalid_argument("superoperator: dimension above cap");
    CMatrix S(d * d, d * d);
    CMatrix unit = CMatrix::Zero(d, d), out;
    for (int col = 0; col < d; ++col)
        for (int row = 0; row < d; ++row) {
            unit(row, col) = 1.0;
            apply(unit, out);
            S.col(col * d + row) = Eigen::Map<const CVector>(out.data(), d * d);
            unit(row, col) = 0.0;
        }
    return S;
}

FullGenerator::FullGenerator(const ModelParams& params) : p_(params.resolved()) {
    p_.validate_full();
    if (p_.n_max == 0) p_.n_max = p_.default_n_max();
    atom_dim_ = p_.n_atoms + 1;
    cav_dim_ = p_.n_max + 1;
    gc_ = p_.g * std::sqrt(2.0 / p_.n_atoms);
    c_.resize(atom_dim_);
    for (int k = 0; k < atom_dim_; ++k) c_(k) = ladder_coefficient(p_.n_atoms, k);
    sq_.resize(cav_dim_);
    for (int n = 0; n < cav_dim_; ++n) sq_(n) = std::sqrt(static_cast<double>(n));
    hdiag_.resize(atom_dim_ * cav_dim_);
    for (int k = 0; k < atom_dim_; ++k)
        for (int n = 0; n < cav_dim_; ++n)
            hdiag_(joint_index(k, n, cav_dim_)) =
                Complex(p_.delta0 * n - p_.delta1 * (k - 0.5 * p_.n_atoms), -p_.gamma * n);

    // mean-field bound on the photon number: |<J->| <= N/2
    const double den = p_.gamma * p_.gamma + p_.delta0 * p_.delta0;
    n_est_ = den > 0.0 ? 0.5 * p_.g * p_.g * p_.n_atoms / den : std::numeric_limits<double>::infinity();
    if (n_est_ > 0.5 * p_.n_max) {
        std::ostringstream os;
        os << "cavity cutoff n_max=" << p_.n_max << " close to photon estimate " << n_est_;
        warnings_.push_back(os.str());
    }
}

// H = delta0 a^dag a - delta1 Jz + omega Jx + gc (J+ a^dag + J- a), J+ |k> = c_k |k+1>
void FullGenerator::h_eff_column(const Complex* x, Complex* y) const {
    const int C = cav_dim_;
    const double hw = 0.5 * p_.omega;
    for (int k = 0; k < atom_dim_; ++k) {
        const double cm = k > 0 ? c_(k - 1) : 0.0, cp = c_(k);
        const Complex* xm = x + (k - 1) * C;
        const Complex* x0 = x + k * C;
        const Complex* xp = x + (k + 1) * C;
        Complex* yk = y + k * C;
        for (int n = 0; n < C; ++n) {
            Complex v = hdiag_(k * C + n) * x0[n];
            if (k > 0) {
                v += hw * cm * xm[n];
                if (n > 0) v += gc_ * cm * sq_(n) * xm[n - 1];
            }
            if (k + 1 < atom_dim_) {
                v += hw * cp * xp[n];
                if (n + 1 < C) v += gc_ * cp * sq_(n + 1) * xp[n + 1];
            }
            yk[n] = v;
        }
    }
}

void FullGenerator::apply(const CMatrix& rho, CMatrix& out) const {
    const int d = dim(), C = cav_dim_;
    // rho H^dag = (H rho^dag)^dag
    const CMatrix rho_dag = rho.adjoint();
    CMatrix y(d, d);
    out.resize(d, d);
    for (int j = 0; j < d; ++j) {
        h_eff_column(rho.col(j).data(), out.col(j).data());
        h_eff_column(rho_dag.col(j).data(), y.col(j).data());
    }
    const Complex mi(0.0, -1.0);
    out *= mi;
    out -= mi * y.adjoint();
    // 2 gamma a rho a^dag
    const double g2 = 2.0 * p_.gamma;
    for (int j = 0; j < d; ++j) {
        const int nj = j % C;
        if (nj + 1 >= C) continue;
        const double sj = g2 * sq_(nj + 1);
        for (int i = 0; i < d; ++i) {
            const int ni = i % C;
            if (ni + 1 < C) out(i, j) += sj * sq_(ni + 1) * rho(i + 1, j + 1);
        }
    }
}

ReducedGenerator::ReducedGenerator(const ModelParams& params) : p_(params.resolved()) {
    p_.validate_reduced();
    n_ = p_.n_atoms;
    kappa_ = p_.kappa();
    kappa_d_ = p_.include_dephasing ? kappa_ : 0.0;
    c_.resize(n_ + 1);
    m_.resize(n_ + 1);
    for (int k = 0; k <= n_; ++k) {
        c_(k) = ladder_coefficient(n_, k);
        m_(k) = k - 0.5 * n_;
    }
}

void ReducedGenerator::apply(const CMatrix& rho, CMatrix& out) const {
    const int d = n_ + 1;
    out.resize(d, d);
    const double w = p_.omega;
    const Complex miw(0.0, -0.5 * w);
    for (int l = 0; l < d; ++l) {
        const double cl = c_(l), clm = l > 0 ? c_(l - 1) : 0.0;
        for (int k = 0; k < d; ++k) {
            const double ck = c_(k), ckm = k > 0 ? c_(k - 1) : 0.0;
            // [Jx, rho] with 2 Jx = J+ + J-
            Complex comm = 0.0;
            if (k > 0) comm += ckm * rho(k - 1, l);
            if (k + 1 < d) comm += ck * rho(k + 1, l);
            if (l > 0) comm -= clm * rho(k, l - 1);
            if (l + 1 < d) comm -= cl * rho(k, l + 1);
            Complex v = miw * comm;
            Complex diss = -(ck * ck + cl * cl) * rho(k, l);
            if (k > 0 && l > 0) diss += 2.0 * ckm * clm * rho(k - 1, l - 1);
            v += kappa_ * diss;
            if (kappa_d_ != 0.0) {
                const double dm = m_(k) - m_(l);
                v -= kappa_d_ * dm * dm * rho(k, l);
            }
            out(k, l) = v;
        }
    }
}

}  // namespace dpt
