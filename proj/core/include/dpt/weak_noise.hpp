#pragma once

// Large-N asymptotics of the reduced model.
//
// The P-function of the reduced model obeys, to leading order in 1/N,
//   dP/dt = -div(a P) + (1/N) d_i d_j (D_ij P)
// with drift a equal to the mean-field flow and, on the Bloch sphere,
//   D = (w/lambda)(1 - n_z)(I - n n^T)          with the J_z dephasing line,
//   D = same - (w/lambda) v v^T, v = z x n      without it (indefinite off the poles).
// P ~ exp(-N S) gives the weak-noise Hamiltonian H = p.a + p.D.p. Characteristics
// are integrated in the 3D embedding with D extended tangentially, so the dark
// pole is a regular starting point. The normal component of p is pure gauge.

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpt/echoes.hpp"
#include "dpt/spin_algebra.hpp"

namespace dpt {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

struct BlochVector {
    double sx = 0.0, sy = 0.0, sz = 1.0;
    Vec3 vec() const { return {sx, sy, sz}; }
    static BlochVector from(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
};

struct WeakNoiseModel {
    double lambda = 1.2;
    double omega = 1.0;
    bool dephasing = true;
    double c() const { return omega / lambda; }
};

BlochVector mean_field_rhs(const BlochVector& s, double lambda, double omega = 1.0);
Vec3 mean_field_rhs(const Vec3& s, double lambda, double omega = 1.0);
std::vector<Vec3> mean_field_trajectory(const Vec3& s0, double lambda, const std::vector<double>& t_grid,
                                        double omega = 1.0);
// Period of the dark-pole orbit for lambda > 1 (great circle s_x = 0).
double mean_field_period(double lambda, double omega = 1.0);

// Fokker-Planck coefficients in (phi, theta), ordered (phi, theta).
struct FpCoefficients {
    Vec2 drift;
    Mat2 diffusion;
};
FpCoefficients fp_coefficients(const SpinCoherentPoint& x, const WeakNoiseModel& m, double pole_tol = 1e-6);

// Chart velocity (phi_dot, theta_dot) -> Cartesian velocity.
Vec3 chart_to_cartesian_velocity(const SpinCoherentPoint& x, const Vec2& v);

// Exact finite-N P-function generator of the reduced model with the J_z line,
// in the stereographic chart z = e^{i phi} tan(theta/2):
//   dP/dt = -d_z(c10 P) - d_zbar(conj(c10) P) + d_z d_zbar(c11 P).
// Without the J_z line subtract kappa d^2/dphi^2; the diffusion is then indefinite.
struct StereographicCoefficients {
    std::complex<double> c10;
    double c11 = 0.0;
};
StereographicCoefficients stereographic_coefficients(std::complex<double> z, double lambda, int n_atoms,
                                                     double omega = 1.0);

Vec3 drift_embedded(const Vec3& n, const WeakNoiseModel& m);
Mat3 diffusion_embedded(const Vec3& n, const WeakNoiseModel& m);
double hamiltonian(const Vec3& n, const Vec3& p, const WeakNoiseModel& m);

// Overlap exponent W(n) of the initial atomic state, extended 0-homogeneously.
struct OverlapW {
    enum class Kind { Dicke, Coherent } kind = Kind::Dicke;
    double mu = 1.0;        // Dicke: k/N (1 is the dark state)
    Vec3 axis{0, 0, 1};     // Coherent: Bloch vector of the state
    static OverlapW dicke(double mu) { return {Kind::Dicke, mu, {0, 0, 1}}; }
    static OverlapW coherent(const Vec3& n) { return {Kind::Coherent, 1.0, n.normalized()}; }
    double value(const Vec3& n) const;
    Vec3 gradient(const Vec3& n) const;
};

// A single characteristic, sampled at the requested times.
struct CharacteristicSample {
    double t = 0.0;
    Vec3 n, p;
    double s = 0.0;
    double phi = 0.0, theta = 0.0, p_phi = 0.0, p_theta = 0.0;
    double h = 0.0;
};

struct Characteristic {
    std::vector<CharacteristicSample> samples;
    bool ok = true;
    std::string status;
    const CharacteristicSample& end() const { return samples.back(); }
};

struct ShootOptions {
    double rel_tol = 1e-11;
    double abs_tol = 1e-13;
    int n_samples = 2;  // uniformly spaced including 0 and T
    double p_blowup = 1e6;
};

Characteristic shoot_characteristic(const Vec3& n0, const Vec3& p0, double T, const WeakNoiseModel& m,
                                    const ShootOptions& opt = {});
// Chart form: momentum given as covector components (p_phi, p_theta); x0 must be off the poles.
Characteristic shoot_characteristic(const SpinCoherentPoint& x0, const Vec2& p0, double T,
                                    const WeakNoiseModel& m, const ShootOptions& opt = {});

// Orthonormal tangent basis at n.
std::pair<Vec3, Vec3> tangent_basis(const Vec3& n);

// End state of a shot from n0 with tangent momentum q (2-vector in tangent_basis(n0)).
struct ShotEnd {
    Vec3 n, p;
    double s = 0.0;
    bool ok = true;
};
ShotEnd shoot_end(const Vec3& n0, const Vec2& q, double T, const WeakNoiseModel& m, double rel_tol = 1e-11);

// ---------------------------------------------------------------- landscape

struct GridSpec {
    int n_phi = 120;
    int n_theta = 60;
    // momentum fan
    int fan_radii = 40;
    int fan_angles = 32;
    double p_min = 1e-4;
    double p_max = 10.0;
    int refine_depth = 4;
    double max_edge = 0.08;  // radians on the sphere before a fan cell is split
};

struct LandscapeMinimum {
    Vec3 n;
    SpinCoherentPoint point;
    double K = 0.0;
    double S = 0.0;
    double hessian_det = 0.0;
    Mat2 hessian;
};

struct KLandscape {
    double time = 0.0;
    int n_phi = 0, n_theta = 0;
    std::vector<double> phi, theta;   // cell-centre coordinates
    RMatrix S, W, K;                  // (n_theta, n_phi); NaN where unreachable
    std::vector<LandscapeMinimum> minima;
    Vec3 mean_field_endpoint;
    double s_at_mean_field = 0.0;     // landscape S interpolated at the mean-field endpoint
    double s_min = 0.0;               // min over reachable grid cells
    int missing = 0;
};

KLandscape k_landscape(const Vec3& x0, const OverlapW& w, double T, const WeakNoiseModel& m,
                       const GridSpec& grid = {});

// S, W, K along the great circle s_x = 0, n = (0, -sin a, cos a), a in [-pi, pi).
struct CutProfile {
    double time = 0.0;
    std::vector<double> alpha, S, W, K;  // S = +inf where unreachable
    std::vector<int> k_minima;           // indices of local minima of K
    std::vector<int> s_minima;           // indices of local minima of S
};
struct CutSpec {
    int n_alpha = 720;
    int fan_points = 400;
    double p_min = 1e-4;
    double p_max = 10.0;
    int refine_depth = 12;
    double max_step = 0.01;
};
CutProfile symmetry_cut(const OverlapW& w, double T, const WeakNoiseModel& m, const CutSpec& spec = {});
Vec3 cut_point(double alpha);
double cut_angle(const Vec3& n);

// ---------------------------------------------------------------- asymptotic rate

struct BranchPoint {
    int branch = -1;
    Vec2 q;         // initial tangent momentum at x0
    Vec3 n_end;
    double K = 0.0;
    double S = 0.0;
    bool converged = false;
};

struct RateOptions {
    int fan_radii = 24;
    int fan_angles = 16;
    double p_min = 1e-4;
    double p_max = 10.0;
    double newton_tol = 1e-10;
    int max_newton = 60;
    double simplex_tol = 1e-9;
    double tie_tol = 1e-10;
    double route_tol = 1e-4;
    unsigned long long seed = 0;
    double rel_tol = 1e-11;
};

struct Kink {
    double time = 0.0;
    int from_branch = -1, to_branch = -1;
    double slope_left = 0.0, slope_right = 0.0;
    double noise_floor = 0.0;
    bool passes_criterion = false;
};

struct AsymptoticRate {
    RateSeries series;                          // r(t) = min_beta K_beta
    std::vector<double> grid_route;             // landscape-minimisation route
    std::vector<double> bvp_route;              // boundary-value route
    std::vector<std::vector<BranchPoint>> branches;  // per time, converged BVP branches
    std::vector<bool> critical;                 // tie within tie_tol
    std::vector<bool> gap;                      // no converged branch
    std::vector<Kink> kinks;
    double max_route_difference = 0.0;
    int branch_count = 0;
};

AsymptoticRate asymptotic_rate(const Vec3& x0, const OverlapW& w, const std::vector<double>& t_grid,
                               const WeakNoiseModel& m, const RateOptions& opt = {});

// Solve the transversality BVP p(T) = -grad W(x(T)) from a seed momentum.
std::optional<BranchPoint> solve_bvp(const Vec3& x0, const OverlapW& w, double T, const WeakNoiseModel& m,
                                     const Vec2& q_seed, const RateOptions& opt = {});
// Minimise K(q) = s(T) + W(x(T)) directly from a seed.
std::optional<BranchPoint> minimise_k(const Vec3& x0, const OverlapW& w, double T, const WeakNoiseModel& m,
                                      const Vec2& q_seed, const RateOptions& opt = {});

// Hessian of K at a stationary branch point, in the tangent basis at the endpoint.
Mat2 endpoint_hessian(const Vec3& x0, const OverlapW& w, double T, const WeakNoiseModel& m, const Vec2& q,
                      double h = 1e-5);

// ---------------------------------------------------------------- finite-N estimate

struct GaussianMinimum {
    double K = 0.0;
    Mat2 hessian;
    double F = 1.0;
};

// L = sum_beta 2 pi / (N sqrt(det K'')) F e^{-N K}; non-positive-definite minima
// are skipped and reported in `excluded`.
struct CorrectedEcho {
    double L = 0.0;
    double rate = 0.0;
    int excluded = 0;
};
CorrectedEcho finite_n_rate_correction(const std::vector<GaussianMinimum>& minima, int n_atoms);

// Cusp line in the (t, m) plane: for each mu the first branch-swap time of the
// Fock-overlap rate r_mu.
struct CuspPoint {
    double mu = 0.0;
    double time = 0.0;
    bool found = false;
};
std::vector<CuspPoint> fock_cusp_line(const std::vector<double>& mus, const std::vector<double>& t_grid,
                                      const WeakNoiseModel& m, const RateOptions& opt = {});

}  // namespace dpt
