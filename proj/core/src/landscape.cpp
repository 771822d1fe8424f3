#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <map>
#include <numbers>
#include <stdexcept>

#include "dpt/weak_noise.hpp"

namespace dpt {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double angle_between(const Vec3& a, const Vec3& b) {
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

struct FanNode {
    Vec2 q;
    Vec3 n;  // unit endpoint
    double s = 0.0;
    bool ok = false;
};

// Memoised shots keyed by the fan parameters (log-radius, angle).
class FanCache {
public:
    FanCache(const Vec3& x0, double T, const WeakNoiseModel& m) : x0_(x0), T_(T), m_(m) {}
    const FanNode& at(double u, double psi) {
        const auto key = std::make_pair(u, psi);
        auto it = nodes_.find(key);
        if (it != nodes_.end()) return it->second;
        const double r = std::pow(10.0, u);
        return nodes_.emplace(key, shoot(Vec2(r * std::cos(psi), r * std::sin(psi)))).first->second;
    }
    FanNode shoot(const Vec2& q) const {
        FanNode f;
        f.q = q;
        const ShotEnd e = shoot_end(x0_, q, T_, m_, 1e-10);
        f.ok = e.ok && std::isfinite(e.s);
        f.n = e.n.normalized();
        f.s = std::max(e.s, 0.0);
        return f;
    }

private:
    Vec3 x0_;
    double T_;
    WeakNoiseModel m_;
    std::map<std::pair<double, double>, FanNode> nodes_;
};

struct Tri {
    FanNode a, b, c;
};

void refine_quad(FanCache& fc, double u0, double u1, double p0, double p1, int depth, const GridSpec& g,
                 std::vector<Tri>& out) {
    const FanNode& A = fc.at(u0, p0);
    const FanNode& B = fc.at(u1, p0);
    const FanNode& C = fc.at(u1, p1);
    const FanNode& D = fc.at(u0, p1);
    const bool all_ok = A.ok && B.ok && C.ok && D.ok;
    // fully blown-up cells are dropped: bisecting them only multiplies failing shots
    if (!(A.ok || B.ok || C.ok || D.ok)) return;
    double edge = 0.0;
    if (all_ok) {
        edge = std::max({angle_between(A.n, B.n), angle_between(B.n, C.n), angle_between(C.n, D.n),
                         angle_between(D.n, A.n), angle_between(A.n, C.n)});
    }
    if ((!all_ok || edge > g.max_edge) && depth < g.refine_depth) {
        const double um = 0.5 * (u0 + u1), pm = 0.5 * (p0 + p1);
        refine_quad(fc, u0, um, p0, pm, depth + 1, g, out);
        refine_quad(fc, um, u1, p0, pm, depth + 1, g, out);
        refine_quad(fc, um, u1, pm, p1, depth + 1, g, out);
        refine_quad(fc, u0, um, pm, p1, depth + 1, g, out);
        return;
    }
    // unresolved stretches are left out rather than interpolated across
    if (!all_ok || edge > 4.0 * g.max_edge) return;
    out.push_back({A, B, C});
    out.push_back({A, C, D});
}

struct CellHit {
    double s = std::numeric_limits<double>::infinity();
    Vec2 q = Vec2::Zero();
};

}  // namespace

KLandscape k_landscape(const Vec3& x0, const OverlapW& w, double T, const WeakNoiseModel& m,
                       const GridSpec& g) {
    if (!(T >= 0.0)) throw std::invalid_argument("k_landscape: T must be >= 0");
    if (g.n_phi < 4 || g.n_theta < 3) throw std::invalid_argument("k_landscape: grid too small");
    KLandscape L;
    L.time = T;
    L.n_phi = g.n_phi;
    L.n_theta = g.n_theta;
    L.phi.resize(g.n_phi);
    L.theta.resize(g.n_theta);
    for (int j = 0; j < g.n_phi; ++j) L.phi[j] = 2.0 * kPi * (j + 0.5) / g.n_phi;
    for (int i = 0; i < g.n_theta; ++i) L.theta[i] = kPi * (i + 0.5) / g.n_theta;
    L.S = RMatrix::Constant(g.n_theta, g.n_phi, kNaN);
    L.W.resize(g.n_theta, g.n_phi);
    L.K = RMatrix::Constant(g.n_theta, g.n_phi, kNaN);
    std::vector<std::vector<CellHit>> hits(g.n_theta, std::vector<CellHit>(g.n_phi));
    std::vector<std::vector<Vec3>> centre(g.n_theta, std::vector<Vec3>(g.n_phi));
    for (int i = 0; i < g.n_theta; ++i)
        for (int j = 0; j < g.n_phi; ++j) {
            centre[i][j] = SpinCoherentPoint{L.phi[j], L.theta[i]}.bloch();
            L.W(i, j) = w.value(centre[i][j]);
        }

    const Vec3 n0 = x0.normalized();
    if (T == 0.0) {
        // delta initial condition: S = 0 at x0, unreachable elsewhere
        L.mean_field_endpoint = n0;
        const SpinCoherentPoint p = SpinCoherentPoint::from_bloch(n0);
        const int i = std::min(g.n_theta - 1, static_cast<int>(p.theta / kPi * g.n_theta));
        const int j = std::min(g.n_phi - 1, static_cast<int>(p.phi / (2 * kPi) * g.n_phi));
        L.S(i, j) = 0.0;
        L.K(i, j) = L.W(i, j);
        L.s_min = 0.0;
        L.missing = g.n_theta * g.n_phi - 1;
        LandscapeMinimum lm;
        lm.n = n0;
        lm.point = p;
        lm.K = w.value(n0);
        L.minima.push_back(lm);
        return L;
    }

    FanCache fc(n0, T, m);
    std::vector<Tri> tris;
    const double u_lo = std::log10(g.p_min), u_hi = std::log10(g.p_max);
    const FanNode centre_node = fc.shoot(Vec2::Zero());
    L.mean_field_endpoint = centre_node.n;
    for (int j = 0; j < g.fan_angles; ++j) {
        const double p0 = 2.0 * kPi * j / g.fan_angles, p1 = 2.0 * kPi * (j + 1) / g.fan_angles;
        const FanNode& a = fc.at(u_lo, p0);
        const FanNode& b = fc.at(u_lo, p1);
        if (a.ok && b.ok) tris.push_back({centre_node, a, b});
        for (int i = 0; i + 1 < g.fan_radii; ++i) {
            const double u0 = u_lo + (u_hi - u_lo) * i / (g.fan_radii - 1);
            const double u1 = u_lo + (u_hi - u_lo) * (i + 1) / (g.fan_radii - 1);
            refine_quad(fc, u0, u1, p0, p1, 0, g, tris);
        }
    }

    auto rasterise = [&](const Tri& t, auto&& visit) {
        const Vec3 c = (t.a.n + t.b.n + t.c.n).normalized();
        const double R = std::max({angle_between(c, t.a.n), angle_between(c, t.b.n), angle_between(c, t.c.n)}) + 1e-12;
        const SpinCoherentPoint cp = SpinCoherentPoint::from_bloch(c);
        const double th_lo = cp.theta - R, th_hi = cp.theta + R;
        int i0 = std::max(0, static_cast<int>(std::floor(th_lo / kPi * g.n_theta - 0.5)));
        int i1 = std::min(g.n_theta - 1, static_cast<int>(std::ceil(th_hi / kPi * g.n_theta - 0.5)));
        bool all_phi = th_lo <= 0.0 || th_hi >= kPi;
        double dphi = kPi;
        if (!all_phi) {
            const double sr = std::sin(R) / std::sin(cp.theta);
            if (sr >= 1.0) all_phi = true;
            else dphi = std::asin(sr);
        }
        int j0 = 0, j1 = g.n_phi - 1;
        if (!all_phi) {
            j0 = static_cast<int>(std::floor((cp.phi - dphi) / (2 * kPi) * g.n_phi - 0.5)) - 1;
            j1 = static_cast<int>(std::ceil((cp.phi + dphi) / (2 * kPi) * g.n_phi - 0.5)) + 1;
        }
        Mat3 M;
        M.col(0) = t.a.n;
        M.col(1) = t.b.n;
        M.col(2) = t.c.n;
        const Eigen::FullPivLU<Mat3> lu(M);
        if (!lu.isInvertible()) return;
        for (int i = i0; i <= i1; ++i)
            for (int jj = j0; jj <= j1; ++jj) {
                const int j = ((jj % g.n_phi) + g.n_phi) % g.n_phi;
                const Vec3& x = centre[i][j];
                if (angle_between(x, c) > R) continue;
                const Vec3 bc = lu.solve(x);
                if (bc.minCoeff() < -1e-12) continue;
                const double sum = bc.sum();
                if (sum <= 0.0) continue;
                visit(i, j, bc / sum);
            }
    };

    for (const Tri& t : tris) {
        rasterise(t, [&](int i, int j, const Vec3& b) {
            const double s = b(0) * t.a.s + b(1) * t.b.s + b(2) * t.c.s;
            if (s < hits[i][j].s) {
                hits[i][j].s = s;
                hits[i][j].q = b(0) * t.a.q + b(1) * t.b.q + b(2) * t.c.q;
            }
        });
    }

    L.s_min = std::numeric_limits<double>::infinity();
    for (int i = 0; i < g.n_theta; ++i)
        for (int j = 0; j < g.n_phi; ++j) {
            if (std::isfinite(hits[i][j].s)) {
                L.S(i, j) = hits[i][j].s;
                L.K(i, j) = L.S(i, j) + L.W(i, j);
                L.s_min = std::min(L.s_min, L.S(i, j));
            } else {
                ++L.missing;
            }
        }

    // S at the mean-field endpoint from the same interpolant
    L.s_at_mean_field = std::numeric_limits<double>::infinity();
    for (const Tri& t : tris) {
        Mat3 M;
        M.col(0) = t.a.n;
        M.col(1) = t.b.n;
        M.col(2) = t.c.n;
        const Eigen::FullPivLU<Mat3> lu(M);
        if (!lu.isInvertible()) continue;
        const Vec3 bc = lu.solve(L.mean_field_endpoint);
        if (bc.minCoeff() < -1e-9 || bc.sum() <= 0.0) continue;
        const Vec3 b = bc / bc.sum();
        L.s_at_mean_field = std::min(L.s_at_mean_field, b(0) * t.a.s + b(1) * t.b.s + b(2) * t.c.s);
    }

    // local minima of K on the grid, refined by direct minimisation
    for (int i = 0; i < g.n_theta; ++i)
        for (int j = 0; j < g.n_phi; ++j) {
            const double k = L.K(i, j);
            if (!std::isfinite(k)) continue;
            bool is_min = true;
            for (int di = -1; di <= 1 && is_min; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    if (!di && !dj) continue;
                    const int ii = i + di;
                    if (ii < 0 || ii >= g.n_theta) continue;
                    const int jj = ((j + dj) % g.n_phi + g.n_phi) % g.n_phi;
                    const double kn = L.K(ii, jj);
                    if (std::isfinite(kn) && kn < k) {
                        is_min = false;
                        break;
                    }
                }
            if (!is_min) continue;
            LandscapeMinimum lm;
            lm.n = centre[i][j];
            lm.point = {L.phi[j], L.theta[i]};
            lm.K = k;
            lm.S = L.S(i, j);
            lm.hessian = Mat2::Constant(kNaN);
            lm.hessian_det = kNaN;
            RateOptions ro;
            if (auto r = minimise_k(n0, w, T, m, hits[i][j].q, ro)) {
                const double cell = kPi / g.n_theta;
                if (angle_between(r->n_end, lm.n) < 3.0 * cell) {
                    lm.n = r->n_end;
                    lm.point = SpinCoherentPoint::from_bloch(r->n_end);
                    lm.K = r->K;
                    lm.S = r->S;
                    lm.hessian = endpoint_hessian(n0, w, T, m, r->q);
                    lm.hessian_det = lm.hessian.determinant();
                }
            }
            L.minima.push_back(lm);
        }
    std::sort(L.minima.begin(), L.minima.end(),
              [](const LandscapeMinimum& a, const LandscapeMinimum& b) { return a.K < b.K; });
    return L;
}

Vec3 cut_point(double alpha) { return {0.0, -std::sin(alpha), std::cos(alpha)}; }

double cut_angle(const Vec3& n) { return std::atan2(-n.y(), n.z()); }

CutProfile symmetry_cut(const OverlapW& w, double T, const WeakNoiseModel& m, const CutSpec& spec) {
    if (spec.n_alpha < 8 || spec.fan_points < 8) throw std::invalid_argument("symmetry_cut: grid too small");
    CutProfile cp;
    cp.time = T;
    cp.alpha.resize(spec.n_alpha);
    for (int i = 0; i < spec.n_alpha; ++i) cp.alpha[i] = -kPi + 2.0 * kPi * i / spec.n_alpha;
    cp.S.assign(spec.n_alpha, std::numeric_limits<double>::infinity());
    cp.W.resize(spec.n_alpha);
    cp.K.resize(spec.n_alpha);
    for (int i = 0; i < spec.n_alpha; ++i) cp.W[i] = w.value(cut_point(cp.alpha[i]));
    const Vec3 n0(0, 0, 1);

    struct Node {
        double u;  // signed log parameter
        double alpha;
        double s;
        bool ok;
    };
    const double lo = std::log10(spec.p_min), hi = std::log10(spec.p_max);
    // continuous odd map u in [-1, 1] -> p, linear near 0 and log-spaced further out
    auto momentum = [&](double u) {
        const double mag = std::pow(10.0, lo + (hi - lo) * std::abs(u)) - spec.p_min;
        return u < 0.0 ? -mag : mag;
    };
    auto eval = [&](double u) {
        Node nd;
        nd.u = u;
        if (T == 0.0) {
            nd.alpha = 0.0;
            nd.s = 0.0;
            nd.ok = true;
            return nd;
        }
        const ShotEnd e = shoot_end(n0, Vec2(0.0, momentum(u)), T, m, 1e-10);
        nd.ok = e.ok && std::isfinite(e.s);
        nd.alpha = cut_angle(e.n);
        nd.s = std::max(e.s, 0.0);
        return nd;
    };

    std::vector<Node> nodes;
    const int half = std::max(4, spec.fan_points / 2);
    for (int i = -half; i <= half; ++i) nodes.push_back(eval(static_cast<double>(i) / half));

    // adaptive refinement of the continuous endpoint map
    std::vector<Node> refined;
    refined.push_back(nodes.front());
    std::function<void(const Node&, const Node&, int)> split = [&](const Node& a, const Node& b, int depth) {
        double da = b.alpha - a.alpha;
        da = std::remainder(da, 2.0 * kPi);
        const bool edge = a.ok != b.ok;  // boundary of the reachable momenta
        if (((a.ok && b.ok && std::abs(da) > spec.max_step) || edge) && depth < spec.refine_depth) {
            const Node mid = eval(0.5 * (a.u + b.u));
            split(a, mid, depth + 1);
            split(mid, b, depth + 1);
            return;
        }
        refined.push_back(b);
    };
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) split(nodes[i], nodes[i + 1], 0);

    // unwrap
    std::vector<double> ua(refined.size());
    ua[0] = refined[0].alpha;
    for (std::size_t i = 1; i < refined.size(); ++i)
        ua[i] = ua[i - 1] + std::remainder(refined[i].alpha - refined[i - 1].alpha, 2.0 * kPi);

    const double dgrid = 2.0 * kPi / spec.n_alpha;
    for (std::size_t i = 0; i + 1 < refined.size(); ++i) {
        const Node& a = refined[i];
        const Node& b = refined[i + 1];
        if (!a.ok || !b.ok) continue;
        const double a0 = ua[i], a1 = ua[i + 1];
        if (std::abs(a1 - a0) > 4.0 * spec.max_step) continue;  // unresolved jump
        const double lo_a = std::min(a0, a1), hi_a = std::max(a0, a1);
        const int g0 = static_cast<int>(std::ceil((lo_a + kPi) / dgrid));
        const int g1 = static_cast<int>(std::floor((hi_a + kPi) / dgrid));
        for (int gi = g0; gi <= g1; ++gi) {
            const double al = -kPi + gi * dgrid;
            const double f = (a1 == a0) ? 0.0 : (al - a0) / (a1 - a0);
            const double s = a.s + f * (b.s - a.s);
            const int idx = ((gi % spec.n_alpha) + spec.n_alpha) % spec.n_alpha;
            cp.S[idx] = std::min(cp.S[idx], s);
        }
    }
    for (int i = 0; i < spec.n_alpha; ++i) cp.K[i] = cp.S[i] + cp.W[i];

    auto local_minima = [&](const std::vector<double>& v) {
        std::vector<int> out;
        const int n = static_cast<int>(v.size());
        for (int i = 0; i < n; ++i) {
            if (!std::isfinite(v[i])) continue;
            const double l = v[(i + n - 1) % n], r = v[(i + 1) % n];
            const bool lok = !std::isfinite(l) || v[i] < l;
            const bool rok = !std::isfinite(r) || v[i] <= r;
            if (lok && rok && (std::isfinite(l) || std::isfinite(r))) out.push_back(i);
        }
        return out;
    };
    cp.k_minima = local_minima(cp.K);
    cp.s_minima = local_minima(cp.S);
    return cp;
}

}  // namespace dpt
