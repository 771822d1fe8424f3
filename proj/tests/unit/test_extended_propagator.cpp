#include <doctest.h>

#include <cmath>

#include "dpt/echoes.hpp"
#include "dpt/extended_propagator.hpp"

using namespace dpt;

namespace {

ModelParams reduced(int n, bool deph) {
    ModelParams p;
    p.n_atoms = n;
    p.lambda = 1.2;
    p.include_dephasing = deph;
    return p;
}

}  // namespace

TEST_CASE("precision tiers") {
    CHECK(choose_precision(10, 0.5, 40).tier == PrecisionTier::Double);
    CHECK(choose_precision(100, 0.5, 40).tier == PrecisionTier::Quad);
    const PrecisionChoice c = choose_precision(200, 0.5, 40);
    CHECK(c.tier == PrecisionTier::Mpfr);
    CHECK(c.bits >= 200 * 0.5 * std::log2(std::exp(1.0)) + 40);
}

TEST_CASE("real form round trip and generator") {
    const int n = 9;
    CMatrix rho = 0.3 * dicke_state(n, 9) + 0.7 * dicke_state(n, 4);
    REQUIRE(has_real_form(rho));
    const RMatrix x = to_real_form(rho);
    CHECK((from_real_form(x) - rho).norm() < 1e-15);
    // a coherent state on the s_x = 0 circle also has a real form
    const CMatrix coh = pure_state(coherent_state_vector(n, SpinCoherentPoint::make(1.5 * M_PI, 0.7)));
    CHECK(has_real_form(coh, 1e-12));
    for (bool deph : {false, true}) {
        const ModelParams p = reduced(n, deph);
        const RMatrix xc = to_real_form(coh);
        const CMatrix ref = ReducedGenerator(p)(coh);
        CHECK((from_real_form(apply_real_form(p, xc)) - ref).cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("extended propagator agrees with the adaptive integrator") {
    for (bool deph : {false, true}) {
        const int n = 20;
        const ModelParams p = reduced(n, deph);
        const std::vector<double> ts = uniform_grid(0.0, 6.0, 13);
        const CMatrix rho0 = dicke_state(n, n);
        EvolveOptions eo;
        eo.rel_tol = 1e-12;
        eo.abs_tol = 1e-14;
        const EvolutionResult ref = evolve(ReducedGenerator(p), DensityMatrix::atomic(rho0), ts, eo);
        for (int bits : {0, 113, 192}) {
            ExtendedOptions o;
            o.force_bits = bits;
            const ExtendedRun run = propagate_reduced_extended(p, to_real_form(rho0), ts, o);
            CAPTURE(bits);
            for (std::size_t i = 0; i < ts.size(); ++i)
                for (int k = 0; k <= n; ++k)
                    CHECK(std::abs(run.populations(i, k) - ref.states[i](k, k).real()) < 1e-10);
            for (double d : run.trace_drift) CHECK(std::abs(d) < 1e-12);
            for (double e : run.min_eigenvalue) CHECK(e > -1e-10);
        }
    }
}

TEST_CASE("deep echoes survive in extended precision") {
    // L = 1e-20-ish: double would lose it in rounding; quad and mpfr must agree
    const int n = 60;
    const ModelParams p = reduced(n, true);
    const std::vector<double> ts = {0.0, 4.0};
    ExtendedOptions a, b;
    a.force_bits = 113;
    b.force_bits = 256;
    const ExtendedRun ra = propagate_reduced_extended(p, to_real_form(dicke_state(n, n)), ts, a);
    const ExtendedRun rb = propagate_reduced_extended(p, to_real_form(dicke_state(n, n)), ts, b);
    const double la = ra.populations(1, n), lb = rb.populations(1, n);
    CHECK(la < 1e-5);
    CHECK(std::abs(la - lb) < 1e-12 * lb);
    CHECK(rate_function(lb, n) > 0.2);
}

TEST_CASE("grid must start at the initial time") {
    const ModelParams p = reduced(4, false);
    CHECK_THROWS(propagate_reduced_extended(p, to_real_form(dicke_state(4, 4)), {1.0, 0.5}));
}
