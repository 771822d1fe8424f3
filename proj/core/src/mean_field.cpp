#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "dpt/ode.hpp"
#include "dpt/weak_noise.hpp"

namespace dpt {

Vec3 mean_field_rhs(const Vec3& s, double lambda, double omega) {
    const double c = omega / lambda;
    return {-c * s.z() * s.x(), -omega * s.z() - c * s.z() * s.y(),
            omega * s.y() + c * (s.x() * s.x() + s.y() * s.y())};
}

BlochVector mean_field_rhs(const BlochVector& s, double lambda, double omega) {
    return BlochVector::from(mean_field_rhs(s.vec(), lambda, omega));
}

std::vector<Vec3> mean_field_trajectory(const Vec3& s0, double lambda, const std::vector<double>& t_grid,
                                        double omega) {
    std::vector<Vec3> out(t_grid.size());
    OdeOptions o;
    o.rel_tol = 1e-12;
    o.abs_tol = 1e-14;
    integrate_dp45([&](double, const Vec3& y, Vec3& dy) { dy = mean_field_rhs(y, lambda, omega); }, s0, t_grid,
                   [&](std::size_t i, double, const Vec3& y) { out[i] = y; }, o);
    return out;
}

double mean_field_period(double lambda, double omega) {
    if (lambda <= 1.0) return std::numeric_limits<double>::infinity();
    return 2.0 * std::numbers::pi / (omega * std::sqrt(1.0 - 1.0 / (lambda * lambda)));
}

FpCoefficients fp_coefficients(const SpinCoherentPoint& x, const WeakNoiseModel& m, double pole_tol) {
    if (x.at_pole(pole_tol))
        throw std::domain_error("fp_coefficients: (phi, theta) chart is singular at the poles");
    using C = std::complex<double>;
    const double w = m.omega, c = m.c();
    const double r = std::tan(0.5 * x.theta);
    const C z = std::polar(r, x.phi);
    const C zdot = C(0.0, 0.5 * w) * (z * z - 1.0) - c * z;
    FpCoefficients f;
    f.drift(0) = (zdot / z).imag();
    const double ch = std::cos(0.5 * x.theta);
    f.drift(1) = 2.0 * ch * ch * (zdot * std::polar(1.0, -x.phi)).real();
    // isotropic diffusion in the z plane (with dephasing), converted to (phi, theta)
    const double r2 = r * r;
    const double dzz = 0.5 * c * r2 * (1.0 + r2);
    const double dth = 2.0 / (1.0 + r2);
    f.diffusion.setZero();
    f.diffusion(0, 0) = dzz / r2 - (m.dephasing ? 0.0 : c);
    f.diffusion(1, 1) = dzz * dth * dth;
    return f;
}

Vec3 chart_to_cartesian_velocity(const SpinCoherentPoint& x, const Vec2& v) {
    const double st = std::sin(x.theta), ct = std::cos(x.theta);
    const double sp = std::sin(x.phi), cp = std::cos(x.phi);
    const Vec3 d_phi(-st * sp, st * cp, 0.0);
    const Vec3 d_theta(ct * cp, ct * sp, -st);
    return v(0) * d_phi + v(1) * d_theta;
}

StereographicCoefficients stereographic_coefficients(std::complex<double> z, double lambda, int n_atoms,
                                                     double omega) {
    if (n_atoms < 1) throw std::invalid_argument("stereographic_coefficients: n_atoms must be >= 1");
    using C = std::complex<double>;
    const double c = omega / lambda;
    StereographicCoefficients s;
    s.c10 = C(0.0, 0.5 * omega) * (z * z - 1.0) - c * (1.0 + 1.0 / n_atoms) * z;
    const double a2 = std::norm(z);
    s.c11 = 2.0 * c / n_atoms * a2 * (1.0 + a2);
    return s;
}

Vec3 drift_embedded(const Vec3& n, const WeakNoiseModel& m) { return mean_field_rhs(n, m.lambda, m.omega); }

Mat3 diffusion_embedded(const Vec3& n, const WeakNoiseModel& m) {
    const Vec3 nh = n.normalized();
    const double d = m.c() * (1.0 - nh.z());
    Mat3 D = d * (Mat3::Identity() - nh * nh.transpose());
    if (!m.dephasing) {
        const Vec3 v(-n.y(), n.x(), 0.0);
        D -= m.c() * v * v.transpose();
    }
    return D;
}

double hamiltonian(const Vec3& n, const Vec3& p, const WeakNoiseModel& m) {
    return p.dot(drift_embedded(n, m)) + p.dot(diffusion_embedded(n, m) * p);
}

double OverlapW::value(const Vec3& n) const {
    const Vec3 nh = n.normalized();
    if (kind == Kind::Coherent) {
        const double u = 0.5 * (1.0 + nh.dot(axis));
        return u > 0.0 ? -std::log(u) : kInfiniteRate;
    }
    return overlap_exponent_W_stirling(mu, nh.z());
}

Vec3 OverlapW::gradient(const Vec3& n) const {
    const double r = n.norm();
    const Vec3 nh = n / r;
    // W = f(nh . e): grad = f'(c) (e - c nh) / r
    const Vec3 e = kind == Kind::Coherent ? axis : Vec3(0, 0, 1);
    const double c = nh.dot(e);
    double fp;
    if (kind == Kind::Coherent) {
        fp = -1.0 / (1.0 + c);
    } else {
        fp = 0.0;
        if (mu > 0.0) fp -= mu / (1.0 + c);
        if (mu < 1.0) fp += (1.0 - mu) / (1.0 - c);
    }
    return fp * (e - c * nh) / r;
}

}  // namespace dpt
