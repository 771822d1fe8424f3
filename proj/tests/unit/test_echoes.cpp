#include <doctest.h>

#include <cmath>
#include <limits>

#include "dpt/echoes.hpp"
#include "dpt/spin_algebra.hpp"

using namespace dpt;

TEST_CASE("echo of pure states is the squared overlap") {
    const int n = 5;
    const CVector a = coherent_state_vector(n, SpinCoherentPoint::make(0.2, 0.9));
    const CVector b = coherent_state_vector(n, SpinCoherentPoint::make(1.4, 0.3));
    const double ref = std::norm(a.dot(b));
    CHECK(loschmidt_echo(pure_state(a), pure_state(b)) == doctest::Approx(ref).epsilon(1e-13));
    CHECK(loschmidt_echo(pure_state(a), pure_state(a)) == doctest::Approx(1.0).epsilon(1e-14));
    // spin coherent overlap |<n|m>|^2 = ((1 + n.m)/2)^N
    const double cosang = SpinCoherentPoint::make(0.2, 0.9).bloch().dot(SpinCoherentPoint::make(1.4, 0.3).bloch());
    CHECK(ref == doctest::Approx(std::pow(0.5 * (1 + cosang), n)).epsilon(1e-12));
}

TEST_CASE("echo rejects mismatched or non-Hermitian inputs") {
    CHECK_THROWS(loschmidt_echo(dicke_state(3, 1), dicke_state(4, 1)));
    CMatrix bad = dicke_state(2, 0);
    bad(0, 1) = Complex(0, 1);
    CMatrix other = dicke_state(2, 0);
    other(1, 0) = Complex(1, 0);
    CHECK_THROWS(loschmidt_echo(bad, other));
}

TEST_CASE("rate function") {
    CHECK(rate_function(1.0, 10) == 0.0);
    CHECK(rate_function(std::exp(-3.0), 10) == doctest::Approx(0.3));
    CHECK(std::isinf(rate_function(0.0, 10)));
    CHECK_THROWS(rate_function(-0.5, 10));
    CHECK_THROWS(rate_function(0.5, 0));
}

TEST_CASE("Fock overlap rates") {
    const int n = 4;
    RVector p(n + 1);
    p << 0.0, 0.1, 0.2, 0.3, 0.4;
    const std::vector<double> r = fock_overlap_rates_from_populations(p);
    CHECK(std::isinf(r[0]));
    for (int k = 1; k <= n; ++k) CHECK(r[k] == doctest::Approx(-std::log(p(k)) / n));
    CMatrix rho = CMatrix::Zero(n + 1, n + 1);
    for (int k = 0; k <= n; ++k) rho(k, k) = p(k);
    CHECK(fock_overlap_rates(rho)[3] == doctest::Approx(r[3]));
    // for the dark-state quench the m = N/2 Fock rate is the Loschmidt rate
    CHECK(r[n] == doctest::Approx(rate_function(loschmidt_echo(rho, dicke_state(n, n)), n)));
}

TEST_CASE("rate series") {
    RateSeries s;
    s.push(0.0, 0.0);
    s.push(0.1, 0.01);
    CHECK_THROWS(s.push(0.1, 0.02));
    CHECK(s.infinite_n());
    CHECK(to_string(RateKind::Fock) == "fock");
}
