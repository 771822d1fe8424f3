#pragma once

// Dormand-Prince 5(4) with PI step-size control. Works on any Eigen dense
// type (vectors or matrices, real or complex). The integrator either lands
// exactly on every requested output time or, if asked, steps freely and fills
// the outputs by cubic Hermite interpolation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dpt {

struct OdeOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double h_init = 0.0;  // 0 picks a starting step from the rhs scale
    double h_max = std::numeric_limits<double>::infinity();
    double h_min_rel = 1e-13;  // relative to the integration span
    long max_steps = 50'000'000;
    bool hermite_output = false;
};

struct OdeStats {
    long accepted = 0;
    long rejected = 0;
    long rhs_evals = 0;
    double last_h = 0.0;
};

class StepSizeUnderflow : public std::runtime_error {
public:
    StepSizeUnderflow(double t, double h, const OdeStats& s)
        : std::runtime_error("step size underflow at t=" + std::to_string(t) + " (h=" +
                             std::to_string(h) + ", accepted=" + std::to_string(s.accepted) +
                             ", rejected=" + std::to_string(s.rejected) + ")"),
          t_fail(t), h_fail(h), stats(s) {}
    double t_fail, h_fail;
    OdeStats stats;
};

namespace detail {
template <class S>
double err_norm(const S& err, const S& y0, const S& y1, double atol, double rtol) {
    using std::abs;
    double acc = 0.0;
    const Eigen::Index n = err.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double sc = atol + rtol * std::max(abs(y0.data()[i]), abs(y1.data()[i]));
        const double e = abs(err.data()[i]) / sc;
        acc += e * e;
    }
    return std::sqrt(acc / std::max<Eigen::Index>(n, 1));
}
}  // namespace detail

struct NoHook {
    template <class S>
    bool operator()(S&) const { return false; }
};

// f(t, y, dydt) fills dydt. observe(i, t_i, y_i) is called once per grid time.
// hook(y) may modify the accepted state and returns true if it did.
template <class State, class Rhs, class Observe, class Hook = NoHook>
OdeStats integrate_dp45(Rhs&& f, State y, const std::vector<double>& t_grid, Observe&& observe,
                        const OdeOptions& opt = {}, Hook&& hook = {}) {
    OdeStats st;
    if (t_grid.empty()) return st;
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("integrate_dp45: t_grid not increasing");

    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    double t = t_grid.front();
    const double t_end = t_grid.back();
    const double span = std::max(t_end - t, 1.0);
    const double h_min = opt.h_min_rel * span;

    observe(std::size_t{0}, t, y);
    if (t_grid.size() == 1) return st;

    State k1 = y, k2 = y, k3 = y, k4 = y, k5 = y, k6 = y, k7 = y, tmp = y, y_new = y;
    f(t, y, k1);
    ++st.rhs_evals;

    double h = opt.h_init;
    if (h <= 0.0) {
        const double d0 = y.norm(), d1 = k1.norm();
        h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h = std::min(h, 0.1 * span);
    }
    h = std::min(h, opt.h_max);

    std::size_t next = 1;
    double err_prev = 1e-4;
    constexpr double safety = 0.9, alpha = 0.7 / 5.0, beta = 0.4 / 5.0;

    while (next < t_grid.size()) {
        if (st.accepted + st.rejected > opt.max_steps) throw StepSizeUnderflow(t, h, st);
        const double target = t_grid[next];
        bool lands = false;
        double hs = h;
        if (!opt.hermite_output) {
            if (t + hs >= target - 1e-14 * span) {
                hs = target - t;
                lands = true;
            }
        } else {
            hs = std::min(hs, t_end - t);
        }
        if (hs < h_min && !lands) throw StepSizeUnderflow(t, hs, st);

        tmp = y + hs * (a21 * k1);
        f(t + c2 * hs, tmp, k2);
        tmp = y + hs * (a31 * k1 + a32 * k2);
        f(t + c3 * hs, tmp, k3);
        tmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
        f(t + c4 * hs, tmp, k4);
        tmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        f(t + c5 * hs, tmp, k5);
        tmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        f(t + hs, tmp, k6);
        y_new = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        f(t + hs, y_new, k7);
        st.rhs_evals += 6;
        tmp = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double err = detail::err_norm(tmp, y, y_new, opt.abs_tol, opt.rel_tol);

        if (err <= 1.0 || hs <= h_min) {
            const double t_new = lands ? target : t + hs;
            if (opt.hermite_output) {
                // cubic Hermite between (t, y, k1) and (t_new, y_new, k7)
                while (next < t_grid.size() && t_grid[next] <= t_new + 1e-14 * span) {
                    const double th = (t_grid[next] - t) / hs;
                    const double h00 = (1 + 2 * th) * (1 - th) * (1 - th), h10 = th * (1 - th) * (1 - th);
                    const double h01 = th * th * (3 - 2 * th), h11 = th * th * (th - 1);
                    tmp = h00 * y + (h10 * hs) * k1 + h01 * y_new + (h11 * hs) * k7;
                    observe(next, t_grid[next], tmp);
                    ++next;
                }
            }
            t = t_new;
            y.swap(y_new);
            k1.swap(k7);
            if (hook(y)) {
                f(t, y, k1);
                ++st.rhs_evals;
            }
            ++st.accepted;
            st.last_h = hs;
            if (lands) {
                observe(next, t, y);
                ++next;
            }
            const double e = std::max(err, 1e-10);
            double fac = safety * std::pow(e, -alpha) * std::pow(err_prev, beta);
            fac = std::clamp(fac, 0.2, 5.0);
            err_prev = e;
            // a landing step can be artificially short; do not let it shrink h
            h = lands ? std::max(h, hs * fac) : hs * fac;
            h = std::min(h, opt.h_max);
        } else {
            ++st.rejected;
            const double fac = std::max(0.2, safety * std::pow(err, -alpha));
            h = hs * fac;
            if (h < h_min) throw StepSizeUnderflow(t, h, st);
        }
    }
    return st;
}

}  // namespace dpt
