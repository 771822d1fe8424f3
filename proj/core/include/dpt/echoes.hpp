#pragma once

#include <string>
#include <vector>

#include "dpt/density_matrix.hpp"

namespace dpt {

enum class RateKind { Loschmidt, Fock, ConditionedPlus, ConditionedMinus, Asymptotic };

std::string to_string(RateKind k);

struct RateSeries {
    std::vector<double> times;
    std::vector<double> values;
    RateKind kind = RateKind::Loschmidt;
    int n_atoms = 0;       // 0 means N = infinity
    int fock_m2 = 0;       // 2m for Fock series
    std::string model;     // "full", "reduced", "asymptotic"
    std::vector<int> branch;  // per-time branch label (asymptotic only)

    bool infinite_n() const { return n_atoms == 0; }
    void push(double t, double v);
};

// tr rho0 rho_t; throws if the imaginary residue is >= 1e-10.
double loschmidt_echo(const CMatrix& rho_t, const CMatrix& rho_0);
double loschmidt_echo(const DensityMatrix& rho_t, const DensityMatrix& rho_0);

// -ln(L)/N, +inf for L below the overlap floor.
double rate_function(double L, int n_atoms);

// r_m for m = -N/2..N/2 (ascending, index k = m + N/2).
std::vector<double> fock_overlap_rates(const CMatrix& rho_a);
std::vector<double> fock_overlap_rates_from_populations(const RVector& pops);

}  // namespace dpt
