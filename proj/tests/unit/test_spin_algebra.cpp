#include <doctest.h>

#include <cmath>
#include <numbers>

#include <unsupported/Eigen/MatrixFunctions>

#include "dpt/density_matrix.hpp"
#include "dpt/spin_algebra.hpp"

using namespace dpt;

namespace {

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("spin operators satisfy the su(2) algebra") {
    for (int n : {1, 2, 3, 10, 20, 50}) {
        CAPTURE(n);
        const SpinOperators s = build_spin_operators(n);
        const Complex I(0, 1);
        CHECK(max_abs(s.jx * s.jy - s.jy * s.jx - I * s.jz) <= 1e-12);
        CHECK(max_abs(s.jy * s.jz - s.jz * s.jy - I * s.jx) <= 1e-12);
        CHECK(max_abs(s.jz * s.jx - s.jx * s.jz - I * s.jy) <= 1e-12);
        CHECK(max_abs(s.jplus - s.jminus.adjoint()) == 0.0);
        const double j = 0.5 * n;
        const CMatrix cas = s.jx * s.jx + s.jy * s.jy + s.jz * s.jz;
        CHECK(max_abs(cas - j * (j + 1) * CMatrix::Identity(n + 1, n + 1)) <= 1e-10);
        for (int k = 0; k <= n; ++k) CHECK(s.jz(k, k).real() == doctest::Approx(k - j));
    }
}

TEST_CASE("ladder matrix elements") {
    const SpinOperators s1 = build_spin_operators(1);
    // ascending m: index 0 is m = -1/2
    CHECK(s1.jz(0, 0).real() == doctest::Approx(-0.5));
    CHECK(s1.jz(1, 1).real() == doctest::Approx(0.5));
    CHECK(std::abs(s1.jplus(1, 0) - Complex(1.0)) < 1e-15);
    const SpinOperators s2 = build_spin_operators(2);
    CHECK(s2.jplus(2, 1).real() == doctest::Approx(std::sqrt(2.0)));
    CHECK(ladder_coefficient(2, 1) == doctest::Approx(std::sqrt(2.0)));
    CHECK(ladder_coefficient(2, 2) == 0.0);
    CHECK_THROWS_AS(build_spin_operators(0), std::invalid_argument);
}

TEST_CASE("coherent state is the +N/2 eigenvector of n.J") {
    for (int n : {1, 4, 15}) {
        const SpinOperators s = build_spin_operators(n);
        for (auto [phi, theta] : {std::pair{0.0, 0.0}, {0.3, 1.1}, {2.5, 2.9}, {5.9, std::numbers::pi}}) {
            const SpinCoherentPoint pt = SpinCoherentPoint::make(phi, theta);
            const CVector v = coherent_state_vector(n, pt);
            CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-13));
            const Eigen::Vector3d b = pt.bloch();
            const CMatrix nj = b.x() * s.jx + b.y() * s.jy + b.z() * s.jz;
            CHECK((nj * v - 0.5 * n * v).norm() < 1e-12);
        }
    }
    const CVector dark = coherent_state_vector(6, SpinCoherentPoint::make(1.7, 0.0));
    CHECK(std::abs(std::abs(dark(6)) - 1.0) < 1e-15);
}

TEST_CASE("coherent point ranges") {
    const SpinCoherentPoint p = SpinCoherentPoint::make(-0.5, 1.0);
    CHECK(p.phi >= 0.0);
    CHECK(p.phi < 2 * std::numbers::pi);
    CHECK_THROWS(SpinCoherentPoint::make(0.0, 3.5));
    CHECK(SpinCoherentPoint::make(0.0, 0.0).at_pole());
    const Eigen::Vector3d n(0.3, -0.4, 0.5);
    const SpinCoherentPoint q = SpinCoherentPoint::from_bloch(n);
    CHECK((q.bloch() - n.normalized()).norm() < 1e-14);
}

TEST_CASE("Dicke overlap exponent against rotated dark state") {
    // |<k| e^{-i phi Jz} e^{-i theta Jy} |N/2>|^2 by matrix exponential
    const int n = 12;
    const SpinOperators s = build_spin_operators(n);
    for (double theta : {0.4, 1.3, 2.2}) {
        const double phi = 0.8;
        const CMatrix R = (Complex(0, -phi) * s.jz).exp() * (Complex(0, -theta) * s.jy).exp();
        const SpinCoherentPoint pt = SpinCoherentPoint::make(phi, theta);
        for (int k = 0; k <= n; ++k) {
            const double ov = std::norm(R(k, n));
            const double w_ref = -std::log(ov) / n;
            CHECK(overlap_exponent_W_dicke(n, k, pt, WMode::Exact) == doctest::Approx(w_ref).epsilon(1e-9));
            CHECK(overlap_exponent_W_dicke(n, k, pt, WMode::ClosedForm) == doctest::Approx(w_ref).epsilon(1e-9));
        }
        CHECK(overlap_exponent_W(dicke_state(n, 5), pt) ==
              doctest::Approx(-std::log(std::norm(R(5, n))) / n).epsilon(1e-9));
    }
}

TEST_CASE("large-N overlap exponent") {
    // -H(mu) - mu ln cos^2(theta/2) - (1 - mu) ln sin^2(theta/2), minimum 0 at cos^2(theta/2) = mu
    for (double mu : {0.2, 0.5, 0.9}) {
        for (double theta : {0.3, 1.0, 2.0}) {
            const double c2 = std::pow(std::cos(theta / 2), 2), s2 = 1 - c2;
            const double ref = mu * std::log(mu / c2) + (1 - mu) * std::log((1 - mu) / s2);
            CHECK(overlap_exponent_W_stirling(mu, std::cos(theta)) == doctest::Approx(ref).epsilon(1e-12));
        }
        const double th0 = 2 * std::acos(std::sqrt(mu));
        CHECK(overlap_exponent_W_stirling(mu, std::cos(th0)) < 1e-14);
    }
    CHECK(overlap_exponent_W_stirling(1.0, 1.0) == 0.0);
    CHECK(std::isinf(overlap_exponent_W_stirling(1.0, -1.0)));
    // finite N converges to the limit as ln(N)/N
    const SpinCoherentPoint pt = SpinCoherentPoint::make(0.0, 1.2);
    double prev = 1.0;
    for (int n : {100, 1000, 10000}) {
        const int k = 3 * n / 10;
        const double d = std::abs(overlap_exponent_W_dicke(n, k, pt, WMode::ClosedForm) -
                                  overlap_exponent_W_dicke(n, k, pt, WMode::Stirling));
        CHECK(d < 2.0 * std::log(n) / n);
        CHECK(d < prev);
        prev = d;
    }
    CHECK(binary_entropy(0.5) == doctest::Approx(std::log(2.0)));
}
