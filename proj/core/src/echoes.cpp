#include "dpt/echoes.hpp"

#include <cmath>
#include <stdexcept>

namespace dpt {

std::string to_string(RateKind k) {
    switch (k) {
        case RateKind::Loschmidt: return "loschmidt";
        case RateKind::Fock: return "fock";
        case RateKind::ConditionedPlus: return "conditioned+";
        case RateKind::ConditionedMinus: return "conditioned-";
        case RateKind::Asymptotic: return "asymptotic";
    }
    return "?";
}

void RateSeries::push(double t, double v) {
    if (!times.empty() && !(t > times.back()))
        throw std::invalid_argument("RateSeries: times must be strictly increasing");
    times.push_back(t);
    values.push_back(v);
}

double loschmidt_echo(const CMatrix& rho_t, const CMatrix& rho_0) {
    if (rho_t.rows() != rho_0.rows() || rho_t.cols() != rho_0.cols())
        throw std::invalid_argument("loschmidt_echo: dimension mismatch");
    // tr(A B) = sum_ij A_ij B_ji
    const Complex v = (rho_0.transpose().array() * rho_t.array()).sum();
    if (std::abs(v.imag()) >= 1e-10)
        throw std::runtime_error("loschmidt_echo: imaginary residue " + std::to_string(v.imag()));
    return v.real();
}

double loschmidt_echo(const DensityMatrix& rho_t, const DensityMatrix& rho_0) {
    if (rho_t.sector != rho_0.sector) throw std::invalid_argument("loschmidt_echo: sector mismatch");
    return loschmidt_echo(rho_t.data, rho_0.data);
}

double rate_function(double L, int n_atoms) {
    if (n_atoms < 1) throw std::invalid_argument("rate_function: n_atoms must be >= 1");
    if (std::isnan(L) || L < -1e-12) throw std::invalid_argument("rate_function: negative echo");
    if (L < kOverlapFloor) return kInfiniteRate;
    return -std::log(L) / n_atoms;
}

std::vector<double> fock_overlap_rates_from_populations(const RVector& pops) {
    const int n = static_cast<int>(pops.size()) - 1;
    std::vector<double> r(pops.size());
    for (Eigen::Index k = 0; k < pops.size(); ++k) {
        const double p = pops(k);
        r[k] = p < kOverlapFloor ? kInfiniteRate : -std::log(p) / n;
    }
    return r;
}

std::vector<double> fock_overlap_rates(const CMatrix& rho_a) {
    return fock_overlap_rates_from_populations(rho_a.diagonal().real());
}

}  // namespace dpt
