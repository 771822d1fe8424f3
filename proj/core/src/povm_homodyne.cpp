#include "dpt/povm_homodyne.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dpt/echoes.hpp"

namespace dpt {

double halfplane_element(int n, int m) {
    if (n < 0 || m < 0) throw std::invalid_argument("halfplane_element: negative index");
    if (n == m) return 0.5;
    const int d = n - m;
    if (d % 2 == 0) return 0.0;
    // radial moment Gamma((n+m)/2 + 1)/2, angular sector 2 sin(d pi/2)/d
    const double lr = std::lgamma(0.5 * (n + m) + 1.0) - 0.5 * (std::lgamma(n + 1.0) + std::lgamma(m + 1.0));
    const double ang = 2.0 * ((((d % 4) + 4) % 4 == 1) ? 1.0 : -1.0) / d;
    return std::exp(lr) * 0.5 * ang / std::numbers::pi;
}

double halfplane_element_quadrature(int n, int m) {
    using boost::math::quadrature::gauss_kronrod;
    const double norm = 0.5 * (std::lgamma(n + 1.0) + std::lgamma(m + 1.0));
    const double R = std::sqrt(0.5 * (n + m)) + 9.0;
    auto integrand = [&](double x, double y) {
        const double r2 = x * x + y * y;
        if (r2 == 0.0) return (n + m == 0) ? 1.0 : 0.0;
        const double phi = std::atan2(y, x);
        const double lg = 0.5 * (n + m) * std::log(r2) - r2 - norm;
        return std::exp(lg) * std::cos((n - m) * phi);
    };
    auto integrate = [&](double tol) {
        auto inner = [&](double x) {
            auto fy = [&](double y) { return integrand(x, y); };
            return gauss_kronrod<double, 61>::integrate(fy, -R, R, 15, tol);
        };
        return gauss_kronrod<double, 61>::integrate(inner, 0.0, R, 15, tol) / std::numbers::pi;
    };
    const double coarse = integrate(1e-9);
    const double fine = integrate(1e-13);
    if (std::abs(fine - coarse) > 1e-10 * std::max(1.0, std::abs(fine)))
        throw std::runtime_error("halfplane quadrature did not converge for <" + std::to_string(n) + "|E+|" +
                                 std::to_string(m) + ">");
    return fine;
}

namespace {
std::mutex g_cache_mutex;
std::map<int, HalfPlanePovm> g_validated;
}  // namespace

HalfPlanePovm build_halfplane_povm(int n_max, bool validate) {
    if (n_max < 1) throw std::invalid_argument("build_halfplane_povm: n_max must be >= 1");
    if (validate) {
        std::lock_guard<std::mutex> lock(g_cache_mutex);
        if (auto it = g_validated.find(n_max); it != g_validated.end()) return it->second;
    }
    const int d = n_max + 1;
    HalfPlanePovm p;
    p.n_max = n_max;
    p.e_plus.resize(d, d);
    for (int n = 0; n < d; ++n)
        for (int m = 0; m <= n; ++m) p.e_plus(n, m) = p.e_plus(m, n) = halfplane_element(n, m);
    if (validate) {
        for (int n = 0; n < d; ++n)
            for (int m = 0; m <= n; ++m) {
                const double q = halfplane_element_quadrature(n, m);
                if (std::abs(q - p.e_plus(n, m)) > 1e-8)
                    throw std::runtime_error("halfplane POVM element <" + std::to_string(n) + "|E+|" +
                                             std::to_string(m) + "> disagrees with quadrature");
            }
    }
    p.e_minus = RMatrix::Identity(d, d) - p.e_plus;
    if (validate) {
        std::lock_guard<std::mutex> lock(g_cache_mutex);
        g_validated.emplace(n_max, p);
    }
    return p;
}

CMatrix condition_state(const CMatrix& rho, int atom_dim, const HalfPlanePovm& povm, Branch branch) {
    const int cav = povm.n_max + 1;
    if (rho.rows() != static_cast<Eigen::Index>(atom_dim) * cav)
        throw std::invalid_argument("condition_state: cavity cutoff mismatch");
    const RMatrix& E = branch == Branch::Plus ? povm.e_plus : povm.e_minus;
    CMatrix out(atom_dim, atom_dim);
    for (int l = 0; l < atom_dim; ++l)
        for (int k = 0; k < atom_dim; ++k) {
            // sum_{n,n'} E_{n n'} rho[(k,n'),(l,n)] = tr(E B), B the (k,l) block
            const auto B = rho.block(k * cav, l * cav, cav, cav);
            out(k, l) = (E.transpose().cast<Complex>().array() * B.array()).sum();
        }
    return out;
}

CMatrix condition_state(const DensityMatrix& rho, const HalfPlanePovm& povm, Branch branch) {
    if (rho.sector != Sector::AtomsCavity) throw std::invalid_argument("condition_state: need atoms+cavity");
    if (rho.cavity_dim != povm.n_max + 1) throw std::invalid_argument("condition_state: cavity cutoff mismatch");
    return condition_state(rho.data, rho.atom_dim, povm, branch);
}

ConditionedEchoes conditioned_echoes(const CMatrix& rho_full_t, int atom_dim, const HalfPlanePovm& povm,
                                     const CMatrix& rho_a0) {
    ConditionedEchoes e;
    e.l_plus = loschmidt_echo(condition_state(rho_full_t, atom_dim, povm, Branch::Plus), rho_a0);
    e.l_minus = loschmidt_echo(condition_state(rho_full_t, atom_dim, povm, Branch::Minus), rho_a0);
    return e;
}

std::optional<Crossing> detect_crossing(const std::vector<double>& t, const std::vector<double>& a,
                                        const std::vector<double>& b, double t_lo, double t_hi) {
    if (t.size() != a.size() || t.size() != b.size())
        throw std::invalid_argument("detect_crossing: size mismatch");
    std::optional<Crossing> first;
    int count = 0;
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (t[i - 1] < t_lo || t[i] > t_hi) continue;
        const double d0 = a[i - 1] - b[i - 1], d1 = a[i] - b[i];
        if (!std::isfinite(d0) || !std::isfinite(d1)) continue;
        if ((d0 < 0.0 && d1 >= 0.0) || (d0 > 0.0 && d1 <= 0.0)) {
            if (d1 == 0.0 && i + 1 < t.size()) {
                // touching zero exactly: count only if the sign really flips
                const double d2 = a[i + 1] - b[i + 1];
                if ((d0 < 0.0) == (d2 < 0.0)) continue;
            }
            ++count;
            if (!first) {
                Crossing c;
                c.time = t[i - 1] + (t[i] - t[i - 1]) * d0 / (d0 - d1);
                c.uncertainty = t[i] - t[i - 1];
                first = c;
            }
        }
    }
    if (first) first->count = count;
    return first;
}

}  // namespace dpt
