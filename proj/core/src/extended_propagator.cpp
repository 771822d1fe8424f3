#include "dpt/extended_propagator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <mpfr.h>
#include <quadmath.h>

namespace dpt {

std::string to_string(PrecisionTier t) {
    switch (t) {
        case PrecisionTier::Double: return "double";
        case PrecisionTier::Quad: return "float128";
        case PrecisionTier::Mpfr: return "mpfr";
    }
    return "?";
}

PrecisionChoice choose_precision(int n_atoms, double rate_cap, int guard_bits) {
    const int need = static_cast<int>(std::ceil(n_atoms * rate_cap * 1.4426950408889634)) + guard_bits;
    if (need <= 53) return {PrecisionTier::Double, 53};
    if (need <= 113) return {PrecisionTier::Quad, 113};
    return {PrecisionTier::Mpfr, (need + 63) / 64 * 64};
}

bool has_real_form(const CMatrix& rho, double tol) {
    const Eigen::Index d = rho.rows();
    for (Eigen::Index k = 0; k < d; ++k)
        for (Eigen::Index l = 0; l < d; ++l) {
            // i^{-(k-l)} rho_kl must be real
            const int s = static_cast<int>(((k - l) % 4 + 4) % 4);
            const Complex ph = s == 0 ? Complex(1, 0) : s == 1 ? Complex(0, -1) : s == 2 ? Complex(-1, 0) : Complex(0, 1);
            if (std::abs((ph * rho(k, l)).imag()) > tol) return false;
        }
    return true;
}

namespace {
Complex ipow(long e) {
    const int s = static_cast<int>(((e % 4) + 4) % 4);
    return s == 0 ? Complex(1, 0) : s == 1 ? Complex(0, 1) : s == 2 ? Complex(-1, 0) : Complex(0, -1);
}
}  // namespace

RMatrix to_real_form(const CMatrix& rho) {
    const Eigen::Index d = rho.rows();
    RMatrix x(d, d);
    for (Eigen::Index k = 0; k < d; ++k)
        for (Eigen::Index l = 0; l < d; ++l) x(k, l) = (ipow(l - k) * rho(k, l)).real();
    return x;
}

CMatrix from_real_form(const RMatrix& x) {
    const Eigen::Index d = x.rows();
    CMatrix rho(d, d);
    for (Eigen::Index k = 0; k < d; ++k)
        for (Eigen::Index l = 0; l < d; ++l) rho(k, l) = ipow(k - l) * x(k, l);
    return rho;
}

namespace {

// exact c_k^2 = j(j+1) - m(m+1)
double c_sq(int n, int k) {
    const double j = 0.5 * n, m = k - j;
    return std::max(0.0, j * (j + 1.0) - m * (m + 1.0));
}

// ---- scalar fields -------------------------------------------------------

struct DoubleOps {
    using T = double;
    using Vec = std::vector<double>;
    explicit DoubleOps(int) {}
    Vec vec(std::size_t n) const { return Vec(n, 0.0); }
    static void set_d(T& r, double v) { r = v; }
    static void set(T& r, const T& a) { r = a; }
    static void mul(T& r, const T& a, const T& b) { r = a * b; }
    static void fma(T& r, const T& a, const T& b, const T& c) { r = a * b + c; }
    static void add(T& r, const T& a, const T& b) { r = a + b; }
    static void div_ui(T& r, const T& a, unsigned long k) { r = a / static_cast<double>(k); }
    static void sqrt(T& r, const T& a) { r = std::sqrt(a); }
    static void div(T& r, const T& a, const T& b) { r = a / b; }
    static double to_d(const T& a) { return a; }
};

struct QuadOps {
    using T = __float128;
    using Vec = std::vector<__float128>;
    explicit QuadOps(int) {}
    Vec vec(std::size_t n) const { return Vec(n, 0); }
    static void set_d(T& r, double v) { r = v; }
    static void set(T& r, const T& a) { r = a; }
    static void mul(T& r, const T& a, const T& b) { r = a * b; }
    static void fma(T& r, const T& a, const T& b, const T& c) { r = a * b + c; }
    static void add(T& r, const T& a, const T& b) { r = a + b; }
    static void div_ui(T& r, const T& a, unsigned long k) { r = a / static_cast<__float128>(k); }
    static void sqrt(T& r, const T& a) { r = sqrtq(a); }
    static void div(T& r, const T& a, const T& b) { r = a / b; }
    static double to_d(const T& a) { return static_cast<double>(a); }
};

// Contiguous MPFR storage: one limb buffer for the whole array.
class MpfrVec {
public:
    MpfrVec(std::size_t n, mpfr_prec_t prec) : nums_(n) {
        const std::size_t bytes = mpfr_custom_get_size(prec);
        const std::size_t per = (bytes + sizeof(mp_limb_t) - 1) / sizeof(mp_limb_t);
        limbs_.assign(per * std::max<std::size_t>(n, 1), 0);
        for (std::size_t i = 0; i < n; ++i) {
            void* p = limbs_.data() + i * per;
            mpfr_custom_init(p, prec);
            mpfr_custom_init_set(&nums_[i], MPFR_ZERO_KIND, 0, prec, p);
        }
    }
    MpfrVec(const MpfrVec&) = delete;
    MpfrVec& operator=(const MpfrVec&) = delete;
    MpfrVec(MpfrVec&&) = default;
    MpfrVec& operator=(MpfrVec&&) = default;
    __mpfr_struct& operator[](std::size_t i) { return nums_[i]; }
    const __mpfr_struct& operator[](std::size_t i) const { return nums_[i]; }
    std::size_t size() const { return nums_.size(); }

private:
    std::vector<__mpfr_struct> nums_;
    std::vector<mp_limb_t> limbs_;
};

struct MpfrOps {
    using T = __mpfr_struct;
    using Vec = MpfrVec;
    mpfr_prec_t prec;
    explicit MpfrOps(int bits) : prec(bits) {}
    Vec vec(std::size_t n) const { return Vec(n, prec); }
    static mpfr_ptr p(T& a) { return &a; }
    static mpfr_srcptr p(const T& a) { return &a; }
    static void set_d(T& r, double v) { mpfr_set_d(p(r), v, MPFR_RNDN); }
    static void set(T& r, const T& a) { mpfr_set(p(r), p(a), MPFR_RNDN); }
    static void mul(T& r, const T& a, const T& b) { mpfr_mul(p(r), p(a), p(b), MPFR_RNDN); }
    static void fma(T& r, const T& a, const T& b, const T& c) { mpfr_fma(p(r), p(a), p(b), p(c), MPFR_RNDN); }
    static void add(T& r, const T& a, const T& b) { mpfr_add(p(r), p(a), p(b), MPFR_RNDN); }
    static void div_ui(T& r, const T& a, unsigned long k) { mpfr_div_ui(p(r), p(a), k, MPFR_RNDN); }
    static void sqrt(T& r, const T& a) { mpfr_sqrt(p(r), p(a), MPFR_RNDN); }
    static void div(T& r, const T& a, const T& b) { mpfr_div(p(r), p(a), p(b), MPFR_RNDN); }
    static double to_d(const T& a) { return mpfr_get_d(p(a), MPFR_RNDN); }
};

inline std::size_t tri(int k, int l) { return static_cast<std::size_t>(k) * (k + 1) / 2 + l; }
inline std::size_t sym(int k, int l) { return k >= l ? tri(k, l) : tri(l, k); }

// Real-form generator on the packed lower triangle, with all coefficients
// pre-multiplied by the current step length.
template <class Ops>
class RealFormKernel {
public:
    using T = typename Ops::T;
    using Vec = typename Ops::Vec;

    RealFormKernel(const ModelParams& p, const Ops& ops)
        : ops_(ops), n_(p.n_atoms), d_(p.n_atoms + 1), size_(tri(d_, 0)),
          a0_(ops.vec(d_)), s0_(ops.vec(d_)), q0_(ops.vec(size_)),
          a_(ops.vec(d_)), s_(ops.vec(d_)), q_(ops.vec(size_)), tmp_(ops.vec(2)) {
        // a_k = (w/2) c_k, s_k = sqrt(2 kappa) c_k, q_kl = -kappa (c_k^2 + c_l^2 [+ (m_k - m_l)^2])
        Vec t = ops.vec(4);
        Ops::set_d(t[0], p.omega);
        Ops::set_d(t[1], p.lambda * p.n_atoms);
        Ops::div(t[2], t[0], t[1]);  // kappa
        for (int k = 0; k < d_; ++k) {
            Ops::set_d(t[3], c_sq(n_, k));
            Ops::sqrt(t[3], t[3]);
            Ops::set_d(t[1], 0.5 * p.omega);
            Ops::mul(a0_[k], t[1], t[3]);
            Ops::set_d(t[1], 2.0);
            Ops::mul(t[1], t[1], t[2]);
            Ops::sqrt(t[1], t[1]);
            Ops::mul(s0_[k], t[1], t[3]);
        }
        for (int k = 0; k < d_; ++k)
            for (int l = 0; l <= k; ++l) {
                double q = c_sq(n_, k) + c_sq(n_, l);
                if (p.include_dephasing) q += static_cast<double>(k - l) * (k - l);
                Ops::set_d(t[3], -q);
                Ops::mul(q0_[tri(k, l)], t[2], t[3]);
            }
        set_step(1.0);
    }

    std::size_t size() const { return size_; }

    void set_step(double h) {
        if (h == step_) return;
        step_ = h;
        Ops::set_d(tmp_[0], h);
        for (int k = 0; k < d_; ++k) {
            Ops::mul(a_[k], a0_[k], tmp_[0]);
        }
        for (std::size_t i = 0; i < size_; ++i) Ops::mul(q_[i], q0_[i], tmp_[0]);
        // s_k enters as a product of two, so it carries sqrt(h)
        Ops::set_d(tmp_[0], h);
        Ops::sqrt(tmp_[0], tmp_[0]);
        for (int k = 0; k < d_; ++k) Ops::mul(s_[k], s0_[k], tmp_[0]);
    }

    // out = h L[x]
    void apply(const Vec& x, Vec& out) {
        T& acc = tmp_[0];
        T& t1 = tmp_[1];
        for (int k = 0; k < d_; ++k) {
            for (int l = 0; l <= k; ++l) {
                const std::size_t i = tri(k, l);
                Ops::mul(acc, q_[i], x[i]);
                if (k + 1 < d_) Ops::fma(acc, a_[k], x[tri(k + 1, l)], acc);
                if (k > 0) {
                    Ops::mul(t1, a_[k - 1], x[sym(k - 1, l)]);
                    sub(acc, t1);
                }
                if (l + 1 < d_) Ops::fma(acc, a_[l], x[sym(k, l + 1)], acc);
                if (l > 0) {
                    Ops::mul(t1, a_[l - 1], x[tri(k, l - 1)]);
                    sub(acc, t1);
                    Ops::mul(t1, s_[l - 1], x[tri(k - 1, l - 1)]);
                    Ops::fma(acc, s_[k - 1], t1, acc);
                }
                Ops::set(out[i], acc);
            }
        }
    }

private:
    static void sub(T& r, const T& a);

    const Ops& ops_;
    int n_, d_;
    std::size_t size_;
    Vec a0_, s0_, q0_, a_, s_, q_, tmp_;
    double step_ = 0.0;
};

template <>
void RealFormKernel<DoubleOps>::sub(double& r, const double& a) { r -= a; }
template <>
void RealFormKernel<QuadOps>::sub(__float128& r, const __float128& a) { r -= a; }
template <>
void RealFormKernel<MpfrOps>::sub(__mpfr_struct& r, const __mpfr_struct& a) {
    mpfr_sub(&r, &r, &a, MPFR_RNDN);
}

template <class Ops>
ExtendedRun run_taylor(const ModelParams& p, const RMatrix& x0, const std::vector<double>& t_grid,
                       const ExtendedOptions& opt, PrecisionChoice prec) {
    using Vec = typename Ops::Vec;
    Ops ops(prec.bits);
    RealFormKernel<Ops> kern(p, ops);
    const int d = p.n_atoms + 1;
    const std::size_t sz = kern.size();
    Vec y = ops.vec(sz), term = ops.vec(sz), out = ops.vec(sz);
    for (int k = 0; k < d; ++k)
        for (int l = 0; l <= k; ++l) Ops::set_d(y[tri(k, l)], x0(k, l));

    ExtendedRun run;
    run.precision = prec;
    run.times = t_grid;
    run.populations.resize(static_cast<Eigen::Index>(t_grid.size()), d);
    run.norm_bound = real_form_norm_bound(p);
    const double eps = std::ldexp(1.0, -prec.bits);

    auto record = [&](std::size_t it) {
        double tr = 0.0;
        for (int k = 0; k < d; ++k) {
            const double v = Ops::to_d(y[tri(k, k)]);
            run.populations(static_cast<Eigen::Index>(it), k) = v;
            tr += v;
        }
        run.trace_drift.push_back(std::abs(tr - 1.0));
        if (opt.check_positivity) {
            RMatrix x(d, d);
            for (int k = 0; k < d; ++k)
                for (int l = 0; l <= k; ++l) x(k, l) = x(l, k) = Ops::to_d(y[tri(k, l)]);
            Eigen::SelfAdjointEigenSolver<RMatrix> es(x, Eigen::EigenvaluesOnly);
            run.min_eigenvalue.push_back(es.eigenvalues().minCoeff());
        }
    };

    record(0);
    for (std::size_t it = 1; it < t_grid.size(); ++it) {
        const double dt = t_grid[it] - t_grid[it - 1];
        if (!(dt > 0.0)) throw std::invalid_argument("propagate_reduced_extended: t_grid not increasing");
        const int nsub = std::max(1, static_cast<int>(std::ceil(dt * run.norm_bound / opt.theta)));
        const double h = dt / nsub;
        kern.set_step(h);
        const double hn = h * run.norm_bound;
        for (int s = 0; s < nsub; ++s) {
            for (std::size_t i = 0; i < sz; ++i) Ops::set(term[i], y[i]);
            double ymax = 0.0;
            for (std::size_t i = 0; i < sz; ++i) ymax = std::max(ymax, std::abs(Ops::to_d(y[i])));
            int small = 0;
            for (unsigned long k = 1; k < 100000; ++k) {
                kern.apply(term, out);
                ++run.applications;
                double tmax = 0.0;
                for (std::size_t i = 0; i < sz; ++i) {
                    Ops::div_ui(term[i], out[i], k);
                    Ops::add(y[i], y[i], term[i]);
                    tmax = std::max(tmax, std::abs(Ops::to_d(term[i])));
                }
                if (k > hn && tmax <= eps * ymax) {
                    if (++small >= 2) break;
                } else {
                    small = 0;
                }
            }
            ++run.steps;
        }
        record(it);
    }
    return run;
}

}  // namespace

double real_form_norm_bound(const ModelParams& p) {
    const int n = p.n_atoms, d = n + 1;
    const double kappa = p.omega / (p.lambda * n);
    std::vector<double> c(d);
    for (int k = 0; k < d; ++k) c[k] = std::sqrt(c_sq(n, k));
    double best = 0.0;
    for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
            double r = 0.5 * p.omega * (c[k] + (k ? c[k - 1] : 0.0) + c[l] + (l ? c[l - 1] : 0.0));
            if (k && l) r += 2.0 * kappa * c[k - 1] * c[l - 1];
            double q = c[k] * c[k] + c[l] * c[l];
            if (p.include_dephasing) q += static_cast<double>(k - l) * (k - l);
            r += kappa * q;
            best = std::max(best, r);
        }
    return best;
}

RMatrix apply_real_form(const ModelParams& params, const RMatrix& x) {
    const ModelParams p = params.resolved();
    p.validate_reduced();
    DoubleOps ops(53);
    RealFormKernel<DoubleOps> kern(p, ops);
    const int d = p.n_atoms + 1;
    std::vector<double> in(kern.size()), out(kern.size());
    for (int k = 0; k < d; ++k)
        for (int l = 0; l <= k; ++l) in[tri(k, l)] = x(k, l);
    kern.apply(in, out);
    RMatrix r(d, d);
    for (int k = 0; k < d; ++k)
        for (int l = 0; l <= k; ++l) r(k, l) = r(l, k) = out[tri(k, l)];
    return r;
}

ExtendedRun propagate_reduced_extended(const ModelParams& params, const RMatrix& x0,
                                       const std::vector<double>& t_grid, const ExtendedOptions& opt) {
    const ModelParams p = params.resolved();
    p.validate_reduced();
    if (x0.rows() != p.n_atoms + 1 || x0.cols() != p.n_atoms + 1)
        throw std::invalid_argument("propagate_reduced_extended: x0 has wrong dimension");
    if ((x0 - x0.transpose()).cwiseAbs().maxCoeff() > 1e-14)
        throw std::invalid_argument("propagate_reduced_extended: x0 must be symmetric");
    if (t_grid.empty()) throw std::invalid_argument("propagate_reduced_extended: empty t_grid");
    PrecisionChoice prec = choose_precision(p.n_atoms, opt.rate_cap, opt.guard_bits);
    if (opt.force_bits > 0) {
        prec.bits = opt.force_bits;
        prec.tier = opt.force_bits <= 53 ? PrecisionTier::Double
                    : opt.force_bits <= 113 ? PrecisionTier::Quad
                                            : PrecisionTier::Mpfr;
        if (prec.tier == PrecisionTier::Double) prec.bits = 53;
        if (prec.tier == PrecisionTier::Quad) prec.bits = 113;
    }
    switch (prec.tier) {
        case PrecisionTier::Double: return run_taylor<DoubleOps>(p, x0, t_grid, opt, prec);
        case PrecisionTier::Quad: return run_taylor<QuadOps>(p, x0, t_grid, opt, prec);
        case PrecisionTier::Mpfr: return run_taylor<MpfrOps>(p, x0, t_grid, opt, prec);
    }
    throw std::logic_error("unreachable");
}

}  // namespace dpt
