#include "dpt/spin_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dpt {

double ladder_coefficient(int n_atoms, int k) {
    const double j = 0.5 * n_atoms;
    const double m = k - j;
    const double v = j * (j + 1.0) - m * (m + 1.0);
    return v > 0.0 ? std::sqrt(v) : 0.0;
}

SpinOperators build_spin_operators(int n_atoms) {
    if (n_atoms < 1) throw std::invalid_argument("build_spin_operators: n_atoms must be >= 1");
    SpinOperators s;
    s.n_atoms = n_atoms;
    s.dim = n_atoms + 1;
    const int d = s.dim;
    s.jz = CMatrix::Zero(d, d);
    s.jplus = CMatrix::Zero(d, d);
    for (int k = 0; k < d; ++k) {
        s.jz(k, k) = s.m_of(k);
        if (k + 1 < d) s.jplus(k + 1, k) = ladder_coefficient(n_atoms, k);
    }
    s.jminus = s.jplus.adjoint();
    s.jx = 0.5 * (s.jplus + s.jminus);
    s.jy = Complex(0.0, -0.5) * (s.jplus - s.jminus);
    return s;
}

SpinCoherentPoint SpinCoherentPoint::make(double phi, double theta) {
    if (!(theta >= 0.0 && theta <= std::numbers::pi))
        throw std::invalid_argument("SpinCoherentPoint: theta outside [0, pi]");
    constexpr double two_pi = 2.0 * std::numbers::pi;
    phi = std::fmod(phi, two_pi);
    if (phi < 0.0) phi += two_pi;
    if (phi >= two_pi) phi = 0.0;
    return {phi, theta};
}

bool SpinCoherentPoint::at_pole(double tol) const {
    return theta <= tol || theta >= std::numbers::pi - tol;
}

Eigen::Vector3d SpinCoherentPoint::bloch() const {
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

SpinCoherentPoint SpinCoherentPoint::from_bloch(const Eigen::Vector3d& n) {
    const double r = n.norm();
    const double theta = std::acos(std::clamp(n.z() / r, -1.0, 1.0));
    const double phi = (n.x() == 0.0 && n.y() == 0.0) ? 0.0 : std::atan2(n.y(), n.x());
    return make(phi, theta);
}

CVector coherent_state_vector(int n_atoms, const SpinCoherentPoint& p) {
    if (n_atoms < 1) throw std::invalid_argument("coherent_state_vector: n_atoms must be >= 1");
    const int N = n_atoms;
    CVector v(N + 1);
    const double c = std::cos(0.5 * p.theta);
    const double s = std::sin(0.5 * p.theta);
    // log-space magnitudes so large N does not overflow the binomial
    const double lc = std::log(std::abs(c));
    const double ls = std::log(std::abs(s));
    const double lgN = std::lgamma(N + 1.0);
    for (int k = 0; k <= N; ++k) {
        double mag;
        const int e_c = k, e_s = N - k;
        if ((e_c > 0 && c == 0.0) || (e_s > 0 && s == 0.0)) {
            mag = 0.0;
        } else {
            double lm = 0.5 * (lgN - std::lgamma(k + 1.0) - std::lgamma(N - k + 1.0));
            if (e_c > 0) lm += e_c * lc;
            if (e_s > 0) lm += e_s * ls;
            mag = std::exp(lm);
            if (c < 0.0 && (e_c % 2)) mag = -mag;
        }
        v(k) = mag * std::polar(1.0, e_s * p.phi);
    }
    return v;
}

double overlap_exponent_W(const CMatrix& rho, const SpinCoherentPoint& point) {
    const int N = static_cast<int>(rho.rows()) - 1;
    const CVector v = coherent_state_vector(N, point);
    const double ov = (v.adjoint() * rho * v)(0, 0).real();
    if (ov < kOverlapFloor) return kInfiniteRate;
    return -std::log(ov) / N;
}

double binary_entropy(double mu) {
    double h = 0.0;
    if (mu > 0.0) h -= mu * std::log(mu);
    if (mu < 1.0) h -= (1.0 - mu) * std::log(1.0 - mu);
    return h;
}

double overlap_exponent_W_dicke(int n_atoms, int k, const SpinCoherentPoint& point, WMode mode) {
    const int N = n_atoms;
    if (k < 0 || k > N) throw std::invalid_argument("overlap_exponent_W_dicke: k out of range");
    switch (mode) {
        case WMode::Exact: {
            const CVector v = coherent_state_vector(N, point);
            const double ov = std::norm(v(k));
            return ov < kOverlapFloor ? kInfiniteRate : -std::log(ov) / N;
        }
        case WMode::ClosedForm: {
            const double c = std::cos(0.5 * point.theta), s = std::sin(0.5 * point.theta);
            if ((k > 0 && c == 0.0) || (k < N && s == 0.0)) return kInfiniteRate;
            double w = std::lgamma(N + 1.0) - std::lgamma(k + 1.0) - std::lgamma(N - k + 1.0);
            if (k > 0) w += 2.0 * k * std::log(std::abs(c));
            if (k < N) w += 2.0 * (N - k) * std::log(std::abs(s));
            return -w / N;
        }
        case WMode::Stirling:
            return overlap_exponent_W_stirling(static_cast<double>(k) / N, std::cos(point.theta));
    }
    return kInfiniteRate;
}

double overlap_exponent_W_stirling(double mu, double cos_theta) {
    const double up = 0.5 * (1.0 + cos_theta), dn = 0.5 * (1.0 - cos_theta);
    double w = -binary_entropy(mu);
    if (mu > 0.0) {
        if (up <= 0.0) return kInfiniteRate;
        w -= mu * std::log(up);
    }
    if (mu < 1.0) {
        if (dn <= 0.0) return kInfiniteRate;
        w -= (1.0 - mu) * std::log(dn);
    }
    return std::max(w, 0.0);
}

}  // namespace dpt
