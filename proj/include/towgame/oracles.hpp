#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "towgame/field.hpp"
#include "towgame/params.hpp"
#include "towgame/vec.hpp"

// Reference solutions of Delta_p^N u - c u = 0 with
//   Delta_p^N u = Delta u + (p-2) Delta_inf^N u,   c = 2 (p+n) gamma
// (GameParams::reaction_coefficient), the equation the discounted DPP is
// consistent with.
//
// In 1-D both Laplacians reduce to u'', so (p-1) u'' = c u.
// For radial u(r): Delta_inf^N u = u'' and Delta u = u'' + (n-1) u'/r, so
//   (p-1) u'' + ((n-1)/r) u' = c u.

namespace towgame {

/// Closed-form solution on (a, b) with u(a) = A, u(b) = B.
class Oracle1D {
public:
    Oracle1D(double a, double b, double A, double B, double p, double gamma)
        : a_(a), b_(b), A_(A), B_(B), p_(p), gamma_(gamma) {
        if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) throw std::invalid_argument("oracle needs a < b");
        if (!(p > 2.0)) throw std::invalid_argument("oracle needs p > 2");
        if (!(gamma >= 0.0)) throw std::invalid_argument("oracle needs gamma >= 0");
        mu_ = GameParams{p, 1, gamma, 1.0}.reaction_coefficient() / (p - 1.0);
        k_ = std::sqrt(mu_);
    }

    /// u'' = mu u.
    double mu() const { return mu_; }
    double a() const { return a_; }
    double b() const { return b_; }

    double operator()(double x) const {
        if (k_ == 0.0) return A_ + (B_ - A_) * (x - a_) / (b_ - a_);
        return (A_ * std::sinh(k_ * (b_ - x)) + B_ * std::sinh(k_ * (x - a_))) / std::sinh(k_ * (b_ - a_));
    }

    double derivative(double x) const {
        if (k_ == 0.0) return (B_ - A_) / (b_ - a_);
        return k_ * (-A_ * std::cosh(k_ * (b_ - x)) + B_ * std::cosh(k_ * (x - a_))) / std::sinh(k_ * (b_ - a_));
    }

    double max_abs_derivative(double lo, double hi, int samples = 4001) const {
        double m = 0.0;
        for (int i = 0; i < samples; ++i) {
            const double x = lo + (hi - lo) * i / (samples - 1);
            m = std::max(m, std::abs(derivative(x)));
        }
        return m;
    }

private:
    double a_, b_, A_, B_, p_, gamma_;
    double mu_ = 0.0;
    double k_ = 0.0;
};

inline Oracle1D solve_1d(double a, double b, double A, double B, double p, double gamma) {
    return Oracle1D(a, b, A, B, p, gamma);
}

/// Profile on a uniform mesh with 4-point cubic interpolation.
struct BvpProfile {
    std::vector<double> r;
    std::vector<double> u;

    double step() const { return r[1] - r[0]; }

    double operator()(double x) const {
        const std::size_t n = r.size();
        const double h = step();
        double t = (x - r.front()) / h;
        t = std::clamp(t, 0.0, static_cast<double>(n - 1));
        auto i = static_cast<std::ptrdiff_t>(std::floor(t));
        i = std::clamp<std::ptrdiff_t>(i - 1, 0, static_cast<std::ptrdiff_t>(n) - 4);
        const double s = t - static_cast<double>(i);
        const double l0 = -(s - 1) * (s - 2) * (s - 3) / 6.0;
        const double l1 = s * (s - 2) * (s - 3) / 2.0;
        const double l2 = -s * (s - 1) * (s - 3) / 2.0;
        const double l3 = s * (s - 1) * (s - 2) / 6.0;
        return l0 * u[i] + l1 * u[i + 1] + l2 * u[i + 2] + l3 * u[i + 3];
    }

    void write_csv(std::ostream& os) const {
        os << "r,u\n";
        for (std::size_t i = 0; i < r.size(); ++i) os << format_double(r[i]) << ',' << format_double(u[i]) << '\n';
    }
};

/// Thomas algorithm; lower[0] and upper[n-1] are ignored.
inline std::vector<double> solve_tridiagonal(std::vector<double> lower, std::vector<double> diag,
                                             std::vector<double> upper, std::vector<double> rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
    return x;
}

/// Linear ODE a2(r) u'' + a1(r) u' + a0(r) u = 0 on [left, right].
struct LinearOde {
    std::function<double(double)> a2, a1, a0;
};

/// Second-order central differences on `intervals` uniform cells with
/// Dirichlet data at both ends.
inline BvpProfile solve_dirichlet_bvp(const LinearOde& ode, double left, double right, double u_left, double u_right,
                                      std::size_t intervals) {
    if (!(left < right)) throw std::invalid_argument("BVP needs left < right");
    if (intervals < 4) throw std::invalid_argument("BVP mesh too coarse");
    const std::size_t n = intervals + 1;
    const double h = (right - left) / static_cast<double>(intervals);
    BvpProfile prof;
    prof.r.resize(n);
    for (std::size_t i = 0; i < n; ++i) prof.r[i] = left + h * static_cast<double>(i);
    prof.r.back() = right;
    std::vector<double> lo(n, 0.0), di(n, 1.0), up(n, 0.0), rhs(n, 0.0);
    rhs[0] = u_left;
    rhs[n - 1] = u_right;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double r = prof.r[i];
        const double c2 = ode.a2(r) / (h * h);
        const double c1 = ode.a1(r) / (2.0 * h);
        lo[i] = c2 - c1;
        di[i] = -2.0 * c2 + ode.a0(r);
        up[i] = c2 + c1;
    }
    prof.u = solve_tridiagonal(std::move(lo), std::move(di), std::move(up), std::move(rhs));
    return prof;
}

/// Same ODE as Oracle1D solved by finite differences; used to cross-check
/// the closed form.
inline BvpProfile solve_1d_bvp(double a, double b, double A, double B, double p, double gamma,
                               std::size_t intervals = 20000) {
    const double c = GameParams{p, 1, gamma, 1.0}.reaction_coefficient();
    LinearOde ode{[p](double) { return p - 1.0; }, [](double) { return 0.0; }, [c](double) { return -c; }};
    return solve_dirichlet_bvp(ode, a, b, A, B, intervals);
}

struct RadialGeometry {
    double r_in = 0.0;  ///< 0 for a full ball
    double r_out = 1.0;

    bool is_ball() const { return r_in == 0.0; }
};

/// Radially symmetric reference solution on a ball or annulus, centered at
/// the shape center.
class RadialOracle {
public:
    RadialOracle(double p, int n, double gamma, RadialGeometry geom, double u_in, double u_out, BvpProfile profile,
                 double refinement_change)
        : p_(p), n_(n), gamma_(gamma), geom_(geom), u_in_(u_in), u_out_(u_out), profile_(std::move(profile)),
          refinement_change_(refinement_change) {}

    double operator()(double r) const { return profile_(r); }

    template <std::size_t N>
    double at(const std::array<double, N>& x, const std::array<double, N>& center) const {
        return profile_(dist(x, center));
    }

    const BvpProfile& profile() const { return profile_; }
    const RadialGeometry& geometry() const { return geom_; }
    /// Sup-norm change of the profile under the last mesh doubling.
    double refinement_change() const { return refinement_change_; }

    /// max |(p-1) u'' + ((n-1)/r) u' - c u| over interior mesh nodes (r > 0),
    /// by central differences.
    double ode_residual() const {
        const double c = GameParams{p_, n_, gamma_, 1.0}.reaction_coefficient();
        const auto& r = profile_.r;
        const auto& u = profile_.u;
        const double h = profile_.step();
        double m = 0.0;
        for (std::size_t i = 1; i + 1 < r.size(); ++i) {
            const double upp = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
            const double up = (u[i + 1] - u[i - 1]) / (2.0 * h);
            m = std::max(m, std::abs((p_ - 1.0) * upp + (n_ - 1.0) / r[i] * up - c * u[i]));
        }
        return m;
    }

private:
    double p_;
    int n_;
    double gamma_;
    RadialGeometry geom_;
    double u_in_, u_out_;
    BvpProfile profile_;
    double refinement_change_;
};

namespace detail {

inline BvpProfile radial_profile(double p, int n, double c, const RadialGeometry& g, double u_in, double u_out,
                                 std::size_t intervals) {
    if (!g.is_ball()) {
        LinearOde ode{[p](double) { return p - 1.0; }, [n](double r) { return (n - 1.0) / r; },
                      [c](double) { return -c; }};
        return solve_dirichlet_bvp(ode, g.r_in, g.r_out, u_in, u_out, intervals);
    }
    // Full ball: at r = 0 the equation reads (p+n-2) u''(0) = c u(0); the
    // symmetric ghost value u_{-1} = u_1 encodes u'(0) = 0 to second order.
    const std::size_t m = intervals + 1;
    const double h = g.r_out / static_cast<double>(intervals);
    BvpProfile prof;
    prof.r.resize(m);
    for (std::size_t i = 0; i < m; ++i) prof.r[i] = h * static_cast<double>(i);
    prof.r.back() = g.r_out;
    std::vector<double> lo(m, 0.0), di(m, 1.0), up(m, 0.0), rhs(m, 0.0);
    di[0] = -2.0 * (p + n - 2.0) / (h * h) - c;
    up[0] = 2.0 * (p + n - 2.0) / (h * h);
    for (std::size_t i = 1; i + 1 < m; ++i) {
        const double r = prof.r[i];
        const double c2 = (p - 1.0) / (h * h);
        const double c1 = (n - 1.0) / r / (2.0 * h);
        lo[i] = c2 - c1;
        di[i] = -2.0 * c2 - c;
        up[i] = c2 + c1;
    }
    rhs[m - 1] = u_out;
    prof.u = solve_tridiagonal(std::move(lo), std::move(di), std::move(up), std::move(rhs));
    return prof;
}

}  // namespace detail

/**
 * Radial reference solution by finite differences on >= 10^4 cells. The mesh
 * is doubled until the profile changes by less than 1e-7 at the shared
 * nodes (at most four doublings); the finer profile is kept.
 */
inline RadialOracle solve_radial(double p, int n, double gamma, RadialGeometry geom, double u_in, double u_out,
                                 std::size_t intervals = 10000) {
    if (!(p > 2.0)) throw std::invalid_argument("radial oracle needs p > 2");
    if (n < 2) throw std::invalid_argument("radial oracle needs n >= 2");
    if (!(gamma >= 0.0)) throw std::invalid_argument("radial oracle needs gamma >= 0");
    if (!(geom.r_out > 0.0) || geom.r_in < 0.0 || !(geom.r_in < geom.r_out))
        throw std::invalid_argument("radial oracle needs 0 <= r_in < r_out");
    intervals = std::max<std::size_t>(intervals, 10000);
    const double c = GameParams{p, n, gamma, 1.0}.reaction_coefficient();
    BvpProfile coarse = detail::radial_profile(p, n, c, geom, u_in, u_out, intervals);
    for (int round = 0; round < 4; ++round) {
        BvpProfile fine = detail::radial_profile(p, n, c, geom, u_in, u_out, 2 * intervals);
        double change = 0.0;
        for (std::size_t i = 0; i < coarse.u.size(); ++i)
            change = std::max(change, std::abs(coarse.u[i] - fine.u[2 * i]));
        if (change < 1e-7) return RadialOracle(p, n, gamma, geom, u_in, u_out, std::move(fine), change);
        coarse = std::move(fine);
        intervals *= 2;
    }
    throw std::runtime_error("radial oracle did not converge under mesh refinement");
}

/// Annulus data u(r_in) = u_in; a full ball only uses u_out.
inline RadialOracle solve_radial(const GameParams& params, RadialGeometry geom, double u_in, double u_out) {
    return solve_radial(params.p, params.n, params.gamma, geom, u_in, u_out);
}

}  // namespace towgame
