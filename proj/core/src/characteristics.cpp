#include <cmath>
#include <stdexcept>

#include "dpt/ode.hpp"
#include "dpt/weak_noise.hpp"

namespace dpt {

namespace {

using State7 = Eigen::Matrix<double, 7, 1>;

// y = (n, p, s)
void characteristic_rhs(const State7& y, State7& dy, const WeakNoiseModel& m) {
    const double w = m.omega, c = m.c();
    const double x = y(0), yy = y(1), z = y(2);
    const Vec3 n(x, yy, z), p(y(3), y(4), y(5));
    const double r = n.norm();
    const Vec3 nh = n / r;
    const Vec3 a = mean_field_rhs(n, m.lambda, w);
    const Vec3 jtp(-c * z * p.x() + 2.0 * c * x * p.z(), -c * z * p.y() + (w + 2.0 * c * yy) * p.z(),
                   -c * x * p.x() + (-w - c * yy) * p.y());
    const double d = c * (1.0 - nh.z());
    const double pn = p.dot(nh);
    const Vec3 pp = p - pn * nh;
    const double pp2 = pp.squaredNorm();
    const Vec3 grad_d = -c * (Vec3(0, 0, 1) - nh.z() * nh) / r;
    Vec3 ndot = a + 2.0 * d * pp;
    Vec3 pdot = -(jtp + pp2 * grad_d - 2.0 * d * pn * pp / r);
    double sdot = d * pp2;
    if (!m.dephasing) {
        // without the J_z line the phi-phi diffusion loses c: D is indefinite
        const Vec3 v(-yy, x, 0.0);
        const double vp = v.dot(p);
        ndot -= 2.0 * c * vp * v;
        pdot += 2.0 * c * vp * Vec3(p.y(), -p.x(), 0.0);
        sdot -= c * vp * vp;
    }
    dy.segment<3>(0) = ndot;
    dy.segment<3>(3) = pdot;
    dy(6) = sdot;
}

CharacteristicSample make_sample(double t, const State7& y, const WeakNoiseModel& m) {
    CharacteristicSample s;
    s.t = t;
    s.n = y.segment<3>(0);
    s.p = y.segment<3>(3);
    s.s = y(6);
    s.h = hamiltonian(s.n, s.p, m);
    const Vec3 nh = s.n.normalized();
    const SpinCoherentPoint pt = SpinCoherentPoint::from_bloch(nh);
    s.phi = pt.phi;
    s.theta = pt.theta;
    const double st = std::sin(pt.theta), ct = std::cos(pt.theta);
    const double sp = std::sin(pt.phi), cp = std::cos(pt.phi);
    s.p_phi = s.p.dot(Vec3(-st * sp, st * cp, 0.0));
    s.p_theta = s.p.dot(Vec3(ct * cp, ct * sp, -st));
    return s;
}

}  // namespace

std::pair<Vec3, Vec3> tangent_basis(const Vec3& n) {
    const Vec3 nh = n.normalized();
    // at the north pole this gives (x, y), matching the fan convention
    Vec3 e1 = Vec3(1, 0, 0) - nh.x() * nh;
    if (e1.norm() < 1e-8) e1 = Vec3(0, 1, 0) - nh.y() * nh;
    e1.normalize();
    const Vec3 e2 = nh.cross(e1);
    return {e1, e2};
}

Characteristic shoot_characteristic(const Vec3& n0, const Vec3& p0, double T, const WeakNoiseModel& m,
                                    const ShootOptions& opt) {
    if (!(T > 0.0)) throw std::invalid_argument("shoot_characteristic: T must be positive");
    State7 y0;
    y0 << n0.normalized(), p0, 0.0;
    std::vector<double> grid(std::max(2, opt.n_samples));
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = T * i / (grid.size() - 1);
    Characteristic ch;
    OdeOptions o;
    o.rel_tol = opt.rel_tol;
    o.abs_tol = opt.abs_tol;
    try {
        integrate_dp45(
            [&](double, const State7& y, State7& dy) {
                if (y.segment<3>(3).norm() > opt.p_blowup) throw std::runtime_error("momentum blow-up");
                characteristic_rhs(y, dy, m);
            },
            y0, grid, [&](std::size_t, double t, const State7& y) { ch.samples.push_back(make_sample(t, y, m)); },
            o);
    } catch (const std::exception& e) {
        ch.ok = false;
        ch.status = e.what();
    }
    return ch;
}

Characteristic shoot_characteristic(const SpinCoherentPoint& x0, const Vec2& p0, double T,
                                    const WeakNoiseModel& m, const ShootOptions& opt) {
    if (x0.at_pole(1e-6))
        throw std::domain_error("shoot_characteristic: chart momenta are undefined at a pole");
    const double st = std::sin(x0.theta), ct = std::cos(x0.theta);
    const double sp = std::sin(x0.phi), cp = std::cos(x0.phi);
    const Vec3 e_phi(-sp, cp, 0.0), e_theta(ct * cp, ct * sp, -st);
    // covector with p.dn/dphi = p_phi and p.dn/dtheta = p_theta
    const Vec3 p = p0(1) * e_theta + (p0(0) / st) * e_phi;
    return shoot_characteristic(x0.bloch(), p, T, m, opt);
}

ShotEnd shoot_end(const Vec3& n0, const Vec2& q, double T, const WeakNoiseModel& m, double rel_tol) {
    const auto [e1, e2] = tangent_basis(n0);
    State7 y0;
    y0 << n0.normalized(), q(0) * e1 + q(1) * e2, 0.0;
    ShotEnd out;
    if (T <= 0.0) {
        out.n = y0.segment<3>(0);
        out.p = y0.segment<3>(3);
        return out;
    }
    OdeOptions o;
    o.rel_tol = rel_tol;
    o.abs_tol = rel_tol * 1e-2;
    State7 yT = y0;
    try {
        integrate_dp45(
            [&](double, const State7& y, State7& dy) {
                if (!std::isfinite(y(3)) || y.segment<3>(3).norm() > 1e6) throw std::runtime_error("blow-up");
                characteristic_rhs(y, dy, m);
            },
            y0, std::vector<double>{0.0, T}, [&](std::size_t i, double, const State7& y) {
                if (i == 1) yT = y;
            },
            o);
    } catch (const std::exception&) {
        out.ok = false;
    }
    out.n = yT.segment<3>(0);
    out.p = yT.segment<3>(3);
    out.s = yT(6);
    return out;
}

}  // namespace dpt
