#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "dpt/weak_noise.hpp"

namespace dpt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double k_of(const Vec3& x0, const OverlapW& w, double T, const WeakNoiseModel& m, const Vec2& q, double tol,
            ShotEnd* out = nullptr) {
    const ShotEnd e = shoot_end(x0, q, T, m, tol);
    if (out) *out = e;
    if (!e.ok || !std::isfinite(e.s)) return kInf;
    return e.s + w.value(e.n);
}

Mat2 k_hessian_q(const Vec3& x0, const OverlapW& w, double T, const WeakNoiseModel& m, const Vec2& q, double h) {
    Mat2 H;
    const double k0 = k_of(x0, w, T, m, q, 1e-12);
    for (int a = 0; a < 2; ++a) {
        Vec2 ea = Vec2::Zero();
        ea(a) = h;
        H(a, a) = (k_of(x0, w, T, m, q + ea, 1e-12) - 2.0 * k0 + k_of(x0, w, T, m, q - ea, 1e-12)) / (h * h);
    }
    const Vec2 e0(h, 0), e1(0, h);
    H(0, 1) = H(1, 0) = (k_of(x0, w, T, m, q + e0 + e1, 1e-12) - k_of(x0, w, T, m, q + e0 - e1, 1e-12) -
                         k_of(x0, w, T, m, q - e0 + e1, 1e-12) + k_of(x0, w, T, m, q - e0 - e1, 1e-12)) /
                        (4.0 * h * h);
    return H;
}

struct BvpFunctor {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const Vec3& x0;
    const OverlapW& w;
    double T;
    const WeakNoiseModel& m;
    double tol;

    int inputs() const { return 2; }
    int values() const { return 2; }
    int operator()(const Eigen::VectorXd& q, Eigen::VectorXd& f) const {
        const ShotEnd e = shoot_end(x0, Vec2(q(0), q(1)), T, m, tol);
        if (!e.ok || !std::isfinite(e.s)) return -1;
        // transversality: tangential part of p(T) + grad W vanishes
        const Vec3 r = e.p + w.gradient(e.n);
        const auto [e1, e2] = tangent_basis(e.n);
        f.resize(2);
        f(0) = r.dot(e1);
        f(1) = r.dot(e2);
        return 0;
    }
};

double seed_step(const Vec2& q) { return std::max(1e-3, 0.05 * q.norm()); }

}  // namespace

std::optional<BranchPoint> solve_bvp(const Vec3& x0, const OverlapW& w, double T, const WeakNoiseModel& m,
                                     const Vec2& q_seed, const RateOptions& opt) {
    if (!(T > 0.0)) return std::nullopt;
    BvpFunctor f{x0, w, T, m, opt.rel_tol};
    Eigen::NumericalDiff<BvpFunctor> nd(f, 1e-7);
    Eigen::HybridNonLinearSolver<Eigen::NumericalDiff<BvpFunctor>> solver(nd);
    solver.parameters.xtol = 1e-13;
    solver.parameters.maxfev = 40 * opt.max_newton;
    solver.diag.setConstant(2, 1.0);
    solver.useExternalScaling = true;
    Eigen::VectorXd q(2);
    q << q_seed(0), q_seed(1);
    solver.solve(q);
    Eigen::VectorXd fv(2);
    if (f(q, fv) < 0 || !(fv.norm() < opt.newton_tol * std::max(1.0, q.norm()))) return std::nullopt;
    BranchPoint bp;
    bp.q = Vec2(q(0), q(1));
    ShotEnd e;
    bp.K = k_of(x0, w, T, m, bp.q, opt.rel_tol, &e);
    bp.S = e.s;
    bp.n_end = e.n.normalized();
    // only minima of K count as branches
    const Mat2 H = k_hessian_q(x0, w, T, m, bp.q, 1e-3 * std::max(0.05, bp.q.norm()));
    bp.converged = H(0, 0) > 0.0 && H.determinant() > 0.0;
    if (!bp.converged) return std::nullopt;
    return bp;
}

std::optional<BranchPoint> minimise_k(const Vec3& x0, const OverlapW& w, double T, const WeakNoiseModel& m,
                                      const Vec2& q_seed, const RateOptions& opt) {
    if (!(T > 0.0)) return std::nullopt;
    struct Ctx {
        const Vec3* x0;
        const OverlapW* w;
        double T;
        const WeakNoiseModel* m;
        double tol;
    } ctx{&x0, &w, T, &m, opt.rel_tol};
    gsl_multimin_function fn;
    fn.n = 2;
    fn.params = &ctx;
    fn.f = [](const gsl_vector* v, void* p) {
        const Ctx& c = *static_cast<Ctx*>(p);
        const double k = k_of(*c.x0, *c.w, c.T, *c.m, Vec2(gsl_vector_get(v, 0), gsl_vector_get(v, 1)), c.tol);
        return std::isfinite(k) ? k : 1e6;
    };
    gsl_vector* x = gsl_vector_alloc(2);
    gsl_vector* step = gsl_vector_alloc(2);
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2);
    Vec2 q = q_seed;
    int status = GSL_CONTINUE;
    // one restart from the optimum guards against a collapsed simplex
    for (int pass = 0; pass < 2; ++pass) {
        gsl_vector_set(x, 0, q(0));
        gsl_vector_set(x, 1, q(1));
        gsl_vector_set_all(step, pass == 0 ? seed_step(q) : 0.1 * seed_step(q));
        gsl_multimin_fminimizer_set(s, &fn, x, step);
        status = GSL_CONTINUE;
        for (int it = 0; it < 4000 && status == GSL_CONTINUE; ++it) {
            if (gsl_multimin_fminimizer_iterate(s)) break;
            const double scale = std::max(1.0, std::hypot(gsl_vector_get(s->x, 0), gsl_vector_get(s->x, 1)));
            status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), opt.simplex_tol * scale);
        }
        q = Vec2(gsl_vector_get(s->x, 0), gsl_vector_get(s->x, 1));
        if (status != GSL_SUCCESS && gsl_multimin_fminimizer_size(s) < 1e3 * opt.simplex_tol) status = GSL_SUCCESS;
    }
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(x);
    gsl_vector_free(step);
    if (status != GSL_SUCCESS) return std::nullopt;
    BranchPoint bp;
    bp.q = q;
    ShotEnd e;
    bp.K = k_of(x0, w, T, m, q, opt.rel_tol, &e);
    if (!std::isfinite(bp.K)) return std::nullopt;
    bp.S = e.s;
    bp.n_end = e.n.normalized();
    bp.converged = true;
    return bp;
}

Mat2 endpoint_hessian(const Vec3& x0, const OverlapW& w, double T, const WeakNoiseModel& m, const Vec2& q,
                      double h) {
    const double hq = h * std::max(0.05, q.norm()) * 100.0;
    const Mat2 Hq = k_hessian_q(x0, w, T, m, q, hq);
    const ShotEnd c = shoot_end(x0, q, T, m, 1e-12);
    const auto [e1, e2] = tangent_basis(c.n.normalized());
    Mat2 J;
    for (int a = 0; a < 2; ++a) {
        Vec2 d = Vec2::Zero();
        d(a) = hq;
        const Vec3 np = shoot_end(x0, q + d, T, m, 1e-12).n.normalized();
        const Vec3 nm = shoot_end(x0, q - d, T, m, 1e-12).n.normalized();
        J(0, a) = (np - nm).dot(e1) / (2.0 * hq);
        J(1, a) = (np - nm).dot(e2) / (2.0 * hq);
    }
    const Mat2 Ji = J.inverse();
    return Ji.transpose() * Hq * Ji;
}

namespace {

std::vector<Vec2> fan_seeds(const Vec3& x0, const OverlapW& w, double T, const WeakNoiseModel& m,
                            const RateOptions& opt) {
    const int R = opt.fan_radii, A = opt.fan_angles;
    const double lo = std::log10(opt.p_min), hi = std::log10(opt.p_max);
    std::vector<Vec2> q(R * A);
    std::vector<double> K(R * A);
    for (int i = 0; i < R; ++i) {
        const double r = std::pow(10.0, lo + (hi - lo) * i / std::max(1, R - 1));
        for (int j = 0; j < A; ++j) {
            const double psi = 2.0 * std::numbers::pi * j / A;
            q[i * A + j] = Vec2(r * std::cos(psi), r * std::sin(psi));
            K[i * A + j] = k_of(x0, w, T, m, q[i * A + j], 1e-8);
        }
    }
    const double k0 = k_of(x0, w, T, m, Vec2::Zero(), 1e-8);
    std::vector<Vec2> seeds;
    double ring_min = kInf;
    for (int j = 0; j < A; ++j) ring_min = std::min(ring_min, K[j]);
    if (std::isfinite(k0) && k0 <= ring_min) seeds.push_back(Vec2::Zero());
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < A; ++j) {
            const double k = K[i * A + j];
            if (!std::isfinite(k)) continue;
            bool is_min = true;
            for (int di = -1; di <= 1 && is_min; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    if (!di && !dj) continue;
                    const int ii = i + di;
                    double kn;
                    if (ii < 0) kn = k0;
                    else if (ii >= R) continue;
                    else kn = K[ii * A + ((j + dj) % A + A) % A];
                    if (std::isfinite(kn) && kn < k) {
                        is_min = false;
                        break;
                    }
                }
            if (is_min) seeds.push_back(q[i * A + j]);
        }
    return seeds;
}

bool same_point(const BranchPoint& a, const BranchPoint& b) {
    return (a.q - b.q).norm() < 1e-5 * (1.0 + a.q.norm()) || (a.n_end - b.n_end).norm() < 1e-7;
}

struct Tracked {
    int label;
    Vec2 q;
};

// One time slice of the BVP route with continuation.
std::vector<BranchPoint> bvp_slice(const Vec3& x0, const OverlapW& w, double T, const WeakNoiseModel& m,
                                   const std::vector<Tracked>& prev, const std::vector<Vec2>& fan,
                                   int& next_label, const RateOptions& opt) {
    std::vector<BranchPoint> out;
    for (const Tracked& tr : prev) {
        auto bp = solve_bvp(x0, w, T, m, tr.q, opt);
        if (!bp) continue;
        bp->branch = tr.label;
        bool dup = false;
        for (const auto& o : out) dup = dup || same_point(o, *bp);
        if (!dup) out.push_back(*bp);
    }
    for (const Vec2& s : fan) {
        auto bp = solve_bvp(x0, w, T, m, s, opt);
        if (!bp) continue;
        bool dup = false;
        for (const auto& o : out) dup = dup || same_point(o, *bp);
        if (dup) continue;
        bp->branch = next_label++;
        out.push_back(*bp);
    }
    return out;
}

std::optional<double> branch_k_at(const Vec3& x0, const OverlapW& w, double T, const WeakNoiseModel& m,
                                  Vec2& q, const RateOptions& opt) {
    auto bp = solve_bvp(x0, w, T, m, q, opt);
    if (!bp) return std::nullopt;
    q = bp->q;
    return bp->K;
}

}  // namespace

AsymptoticRate asymptotic_rate(const Vec3& x0_in, const OverlapW& w, const std::vector<double>& t_grid,
                               const WeakNoiseModel& m, const RateOptions& opt) {
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("asymptotic_rate: t_grid not increasing");
    const Vec3 x0 = x0_in.normalized();
    AsymptoticRate ar;
    ar.series.kind = RateKind::Asymptotic;
    ar.series.model = "asymptotic";
    ar.series.n_atoms = 0;
    std::mt19937_64 rng(opt.seed);

    std::vector<Tracked> tracked;   // BVP route
    std::vector<Vec2> route1_prev;  // minimisation route
    int next_label = 0;
    const int fan_every = 8;

    const std::size_t nt = t_grid.size();
    std::vector<std::vector<BranchPoint>> slices(nt), found(nt);
    for (std::size_t it = 0; it < nt; ++it) {
        const double T = t_grid[it];
        if (T <= 0.0) {
            BranchPoint bp;
            bp.branch = 0;
            bp.q = Vec2::Zero();
            bp.n_end = x0;
            bp.K = w.value(x0);
            bp.converged = true;
            slices[it] = {bp};
            found[it] = {bp};
            next_label = std::max(next_label, 1);
            tracked = {{0, Vec2::Zero()}};
            route1_prev = {Vec2::Zero()};
            continue;
        }
        std::vector<Vec2> fan;
        if (tracked.empty() || it % fan_every == 1 || it + 1 == nt) {
            fan = fan_seeds(x0, w, T, m, opt);
            std::shuffle(fan.begin(), fan.end(), rng);
        }
        slices[it] = bvp_slice(x0, w, T, m, tracked, fan, next_label, opt);
        // route 1: direct minimisation of K over the initial momentum
        std::vector<Vec2> seeds = route1_prev;
        seeds.insert(seeds.end(), fan.begin(), fan.end());
        for (const Vec2& s : seeds) {
            auto bp = minimise_k(x0, w, T, m, s, opt);
            if (!bp) continue;
            bool dup = false;
            for (const auto& o : found[it]) dup = dup || same_point(o, *bp);
            if (!dup) found[it].push_back(*bp);
        }
        route1_prev.clear();
        for (const auto& f : found[it]) route1_prev.push_back(f.q);
        tracked.clear();
        for (const auto& p : slices[it]) tracked.push_back({p.branch, p.q});
    }

    // the fan runs only every few steps, so a branch can be found late; continue it back in time
    for (std::size_t it = nt; it-- > 1;) {
        const double T = t_grid[it - 1];
        if (T <= 0.0) break;
        for (const BranchPoint& p : slices[it]) {
            bool have = false;
            for (const auto& o : slices[it - 1]) have = have || o.branch == p.branch;
            if (have) continue;
            auto bp = solve_bvp(x0, w, T, m, p.q, opt);
            if (!bp) continue;
            bool dup = false;
            for (const auto& o : slices[it - 1]) dup = dup || same_point(o, *bp);
            if (dup) continue;
            bp->branch = p.branch;
            slices[it - 1].push_back(*bp);
        }
        for (const BranchPoint& p : found[it]) {
            auto bp = minimise_k(x0, w, T, m, p.q, opt);
            if (!bp) continue;
            bool dup = false;
            for (const auto& o : found[it - 1]) dup = dup || same_point(o, *bp);
            if (!dup) found[it - 1].push_back(*bp);
        }
    }

    for (std::size_t it = 0; it < nt; ++it) {
        const double T = t_grid[it];
        std::vector<BranchPoint>& pts = slices[it];
        double r1 = kInf;
        for (const auto& f : found[it]) r1 = std::min(r1, f.K);
        std::sort(pts.begin(), pts.end(), [](const BranchPoint& a, const BranchPoint& b) { return a.K < b.K; });
        const double r2 = pts.empty() ? kInf : pts.front().K;
        ar.grid_route.push_back(r1);
        ar.bvp_route.push_back(r2);
        ar.gap.push_back(pts.empty());
        ar.critical.push_back(pts.size() >= 2 && std::abs(pts[0].K - pts[1].K) < opt.tie_tol);
        if (std::isfinite(r1) && std::isfinite(r2))
            ar.max_route_difference = std::max(ar.max_route_difference, std::abs(r1 - r2));
        // gaps are NaN; an infinite minimum (unreachable overlap) stays +inf
        double r = std::numeric_limits<double>::quiet_NaN();
        if (!pts.empty()) r = pts.front().K;
        else if (std::isfinite(r1)) r = r1;
        ar.series.push(T, r);
        ar.series.branch.push_back(pts.empty() ? -1 : pts.front().branch);
        ar.branches.push_back(pts);
    }
    ar.branch_count = next_label;

    // kinks: the globally minimal branch changes between consecutive times
    const std::vector<int>& lab = ar.series.branch;
    for (std::size_t i = 1; i < lab.size(); ++i) {
        if (lab[i] < 0 || lab[i - 1] < 0 || lab[i] == lab[i - 1]) continue;
        const int a = lab[i - 1], b = lab[i];
        Vec2 qa, qb;
        bool has_a = false, has_b = false;
        for (const auto& p : ar.branches[i - 1]) {
            if (p.branch == a) qa = p.q, has_a = true;
            if (p.branch == b) qb = p.q, has_b = true;
        }
        for (const auto& p : ar.branches[i]) {
            if (!has_a && p.branch == a) qa = p.q, has_a = true;
            if (!has_b && p.branch == b) qb = p.q, has_b = true;
        }
        if (!has_a || !has_b) continue;
        Kink k;
        k.from_branch = a;
        k.to_branch = b;
        double t0 = t_grid[i - 1], t1 = t_grid[i];
        auto delta = [&](double t, Vec2& qa_, Vec2& qb_) -> std::optional<double> {
            auto ka = branch_k_at(x0, w, t, m, qa_, opt);
            auto kb = branch_k_at(x0, w, t, m, qb_, opt);
            if (!ka || !kb) return std::nullopt;
            return *ka - *kb;
        };
        Vec2 qa0 = qa, qb0 = qb, qa1 = qa, qb1 = qb;
        auto d0 = delta(t0, qa0, qb0);
        auto d1 = delta(t1, qa1, qb1);
        double tc = 0.5 * (t0 + t1);
        if (d0 && d1 && (*d0) * (*d1) <= 0.0) {
            double f0 = *d0, f1 = *d1;
            for (int iter = 0; iter < 60 && std::abs(t1 - t0) > 1e-12; ++iter) {
                // secant bracketed by the Illinois rule
                tc = (f1 == f0) ? 0.5 * (t0 + t1) : t1 - f1 * (t1 - t0) / (f1 - f0);
                Vec2 qa_c = qa1, qb_c = qb1;
                auto fc = delta(tc, qa_c, qb_c);
                if (!fc) break;
                if (std::abs(*fc) < 1e-13) break;
                if ((*fc) * f1 < 0.0) {
                    t0 = t1, f0 = f1, qa0 = qa1, qb0 = qb1;
                } else {
                    f0 *= 0.5;
                }
                t1 = tc, f1 = *fc, qa1 = qa_c, qb1 = qb_c;
            }
        }
        k.time = tc;
        const double h = 1e-3;
        Vec2 sa = qa1, sb = qb1;
        auto ka_m = branch_k_at(x0, w, tc - h, m, sa, opt);
        auto ka_0 = branch_k_at(x0, w, tc, m, sa, opt);
        auto ka_p = branch_k_at(x0, w, tc + h, m, sa, opt);
        auto kb_m = branch_k_at(x0, w, tc - h, m, sb, opt);
        auto kb_0 = branch_k_at(x0, w, tc, m, sb, opt);
        auto kb_p = branch_k_at(x0, w, tc + h, m, sb, opt);
        if (ka_m && ka_0 && kb_0 && kb_p) {
            k.slope_left = (*ka_0 - *ka_m) / h;
            k.slope_right = (*kb_p - *kb_0) / h;
            // a smooth curve would still show this much left/right mismatch
            double floor = 1e-9 / h;
            if (ka_p) floor = std::max(floor, std::abs(*ka_p - 2.0 * *ka_0 + *ka_m) / h);
            if (kb_m) floor = std::max(floor, std::abs(*kb_p - 2.0 * *kb_0 + *kb_m) / h);
            k.noise_floor = floor;
            k.passes_criterion = std::abs(k.slope_right - k.slope_left) > 10.0 * floor;
        }
        ar.kinks.push_back(k);
    }
    return ar;
}

CorrectedEcho finite_n_rate_correction(const std::vector<GaussianMinimum>& minima, int n_atoms) {
    if (n_atoms < 1) throw std::invalid_argument("finite_n_rate_correction: n_atoms must be >= 1");
    CorrectedEcho c;
    double kmin = kInf;
    for (const auto& g : minima) kmin = std::min(kmin, g.K);
    double acc = 0.0;
    for (const auto& g : minima) {
        const Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (g.hessian + g.hessian.transpose()));
        if (!(es.eigenvalues().minCoeff() > 0.0)) {
            ++c.excluded;
            continue;
        }
        acc += 2.0 * std::numbers::pi / (n_atoms * std::sqrt(g.hessian.determinant())) * g.F *
               std::exp(-n_atoms * (g.K - kmin));
    }
    if (acc <= 0.0) {
        c.L = 0.0;
        c.rate = kInf;
        return c;
    }
    c.rate = kmin - std::log(acc) / n_atoms;
    c.L = std::exp(-n_atoms * c.rate);
    return c;
}

std::vector<CuspPoint> fock_cusp_line(const std::vector<double>& mus, const std::vector<double>& t_grid,
                                      const WeakNoiseModel& m, const RateOptions& opt) {
    std::vector<CuspPoint> out;
    for (double mu : mus) {
        CuspPoint cp;
        cp.mu = mu;
        const AsymptoticRate ar = asymptotic_rate(Vec3(0, 0, 1), OverlapW::dicke(mu), t_grid, m, opt);
        for (const Kink& k : ar.kinks)
            if (k.passes_criterion) {
                cp.time = k.time;
                cp.found = true;
                break;
            }
        out.push_back(cp);
    }
    return out;
}

}  // namespace dpt
