#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "towgame/params.hpp"
#include "towgame/vec.hpp"

namespace towgame {

template <int Dim>
using Hessian = std::array<Vec<Dim>, Dim>;

/// Smooth test function with analytic first and second derivatives.
template <int Dim>
struct TestFunction {
    std::string name;
    std::function<double(const Vec<Dim>&)> value;
    std::function<Vec<Dim>(const Vec<Dim>&)> gradient;
    std::function<Hessian<Dim>(const Vec<Dim>&)> hessian;
    bool quadratic = false;
};

template <int Dim>
TestFunction<Dim> affine_function(const Vec<Dim>& a, double b) {
    return {"affine",
            [a, b](const Vec<Dim>& x) { return dot(a, x) + b; },
            [a](const Vec<Dim>&) { return a; },
            [](const Vec<Dim>&) { return Hessian<Dim>{}; },
            false};
}

/// phi(x) = x^T A x / 2 + b.x + c with A symmetric.
template <int Dim>
TestFunction<Dim> quadratic_function(std::string name, const Hessian<Dim>& A, const Vec<Dim>& b, double c) {
    return {std::move(name),
            [A, b, c](const Vec<Dim>& x) {
                double q = 0.0;
                for (int i = 0; i < Dim; ++i) q += x[i] * dot(A[i], x);
                return 0.5 * q + dot(b, x) + c;
            },
            [A, b](const Vec<Dim>& x) {
                Vec<Dim> g = b;
                for (int i = 0; i < Dim; ++i) g[i] += dot(A[i], x);
                return g;
            },
            [A](const Vec<Dim>&) { return A; },
            true};
}

/// phi(x) = prod_i cosh(k_i x_i).
template <int Dim>
TestFunction<Dim> cosh_product(const Vec<Dim>& k) {
    auto factors = [k](const Vec<Dim>& x, Vec<Dim>& c, Vec<Dim>& s) {
        for (int i = 0; i < Dim; ++i) {
            c[i] = std::cosh(k[i] * x[i]);
            s[i] = k[i] * std::sinh(k[i] * x[i]);
        }
    };
    return {"cosh_product",
            [k](const Vec<Dim>& x) {
                double v = 1.0;
                for (int i = 0; i < Dim; ++i) v *= std::cosh(k[i] * x[i]);
                return v;
            },
            [factors](const Vec<Dim>& x) {
                Vec<Dim> c{}, s{}, g{};
                factors(x, c, s);
                for (int i = 0; i < Dim; ++i) {
                    g[i] = s[i];
                    for (int j = 0; j < Dim; ++j)
                        if (j != i) g[i] *= c[j];
                }
                return g;
            },
            [factors, k](const Vec<Dim>& x) {
                Vec<Dim> c{}, s{};
                factors(x, c, s);
                Hessian<Dim> H{};
                for (int i = 0; i < Dim; ++i)
                    for (int j = 0; j < Dim; ++j) {
                        double v = 1.0;
                        for (int l = 0; l < Dim; ++l) {
                            if (l == i && l == j) v *= k[l] * k[l] * c[l];
                            else if (l == i || l == j) v *= s[l];
                            else v *= c[l];
                        }
                        H[i][j] = v;
                    }
                return H;
            },
            false};
}

/// Registered test functions: affine, two quadratic forms, a cosh product.
template <int Dim>
std::vector<TestFunction<Dim>> test_function_registry() {
    Vec<Dim> a{};
    Vec<Dim> k{};
    Hessian<Dim> eye{}, mixed{};
    Vec<Dim> lin{};
    for (int i = 0; i < Dim; ++i) {
        a[i] = 1.0 - 0.5 * i;
        k[i] = 1.0 + 0.5 * i;
        eye[i][i] = 1.0;
        mixed[i][i] = i % 2 == 0 ? 2.0 : -1.0;
        lin[i] = i == 0 ? 1.0 : 0.0;
    }
    for (int i = 0; i + 1 < Dim; ++i) mixed[i][i + 1] = mixed[i + 1][i] = 3.0;
    return {affine_function<Dim>(a, 0.3), quadratic_function<Dim>("half_norm_sq", eye, Vec<Dim>{}, 0.0),
            quadratic_function<Dim>("mixed_quadratic", mixed, lin, 0.5), cosh_product<Dim>(k)};
}

/// Default evaluation point for the registry, away from critical points.
template <int Dim>
Vec<Dim> registry_point() {
    Vec<Dim> x{};
    const double base[3] = {0.3, -0.2, 0.1};
    for (int i = 0; i < Dim; ++i) x[i] = base[i];
    return x;
}

namespace detail {

struct GaussRule {
    std::vector<double> nodes, weights;  // on [-1, 1]
};

inline GaussRule gauss_legendre(int n) {
    GaussRule g;
    g.nodes.resize(n);
    g.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        g.nodes[i] = x;
        g.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return g;
}

/// Mean of g over the unit ball B_1 (g evaluated at unit-ball points).
template <int Dim, class G>
double unit_ball_mean(G&& g) {
    static const GaussRule rule = gauss_legendre(32);
    constexpr int kAngles = 64;
    if constexpr (Dim == 1) {
        double s = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * g(Vec<1>{rule.nodes[i]});
        return 0.5 * s;
    } else if constexpr (Dim == 2) {
        double s = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double rho = 0.5 * (rule.nodes[i] + 1.0);
            double ring = 0.0;
            for (int a = 0; a < kAngles; ++a) {
                const double th = 2.0 * std::numbers::pi * a / kAngles;
                ring += g(Vec<2>{rho * std::cos(th), rho * std::sin(th)});
            }
            s += 0.5 * rule.weights[i] * rho * ring * (2.0 * std::numbers::pi / kAngles);
        }
        return s / std::numbers::pi;
    } else {
        static_assert(Dim == 3, "quadrature implemented for dimensions 1-3");
        double s = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double rho = 0.5 * (rule.nodes[i] + 1.0);
            for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
                const double mu = rule.nodes[j];
                const double sn = std::sqrt(1.0 - mu * mu);
                double ring = 0.0;
                for (int a = 0; a < kAngles; ++a) {
                    const double ph = 2.0 * std::numbers::pi * a / kAngles;
                    ring += g(Vec<3>{rho * sn * std::cos(ph), rho * sn * std::sin(ph), rho * mu});
                }
                s += 0.5 * rule.weights[i] * rho * rho * rule.weights[j] * ring * (2.0 * std::numbers::pi / kAngles);
            }
        }
        return s * 3.0 / (4.0 * std::numbers::pi);
    }
}

template <int Dim>
std::vector<Vec<Dim>> sphere_samples() {
    std::vector<Vec<Dim>> out;
    if constexpr (Dim == 1) {
        out = {Vec<1>{-1.0}, Vec<1>{1.0}};
    } else if constexpr (Dim == 2) {
        for (int a = 0; a < 720; ++a) {
            const double th = 2.0 * std::numbers::pi * a / 720;
            out.push_back({std::cos(th), std::sin(th)});
        }
    } else {
        for (int i = 0; i <= 60; ++i) {
            const double t = std::numbers::pi * i / 60;
            for (int a = 0; a < 120; ++a) {
                const double ph = 2.0 * std::numbers::pi * a / 120;
                out.push_back({std::sin(t) * std::cos(ph), std::sin(t) * std::sin(ph), std::cos(t)});
            }
        }
    }
    return out;
}

template <int Dim>
std::optional<Vec<Dim>> solve_small(Hessian<Dim> A, Vec<Dim> b) {
    for (int c = 0; c < Dim; ++c) {
        int piv = c;
        for (int r = c + 1; r < Dim; ++r)
            if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
        if (std::abs(A[piv][c]) < 1e-14) return std::nullopt;
        std::swap(A[c], A[piv]);
        std::swap(b[c], b[piv]);
        for (int r = c + 1; r < Dim; ++r) {
            const double f = A[r][c] / A[c][c];
            for (int k = c; k < Dim; ++k) A[r][k] -= f * A[c][k];
            b[r] -= f * b[c];
        }
    }
    Vec<Dim> x{};
    for (int r = Dim - 1; r >= 0; --r) {
        double s = b[r];
        for (int k = r + 1; k < Dim; ++k) s -= A[r][k] * x[k];
        x[r] = s / A[r][r];
    }
    return x;
}

/// sup (sign = +1) or inf (sign = -1) of phi over the closed ball B_eps(x),
/// returned as an offset from phi(x).
template <int Dim>
double ball_extremum_offset(const TestFunction<Dim>& phi, const Vec<Dim>& x, double eps, double sign) {
    const double fx = phi.value(x);
    auto score = [&](const Vec<Dim>& s) { return sign * (phi.value(x + eps * s) - fx); };

    Vec<Dim> best{};
    double best_score = -std::numeric_limits<double>::infinity();
    for (const auto& s : sphere_samples<Dim>()) {
        const double v = score(s);
        if (v > best_score) {
            best_score = v;
            best = s;
        }
    }
    // On the sphere an extremum satisfies s = +-grad phi(x + eps s)/|.|.
    if constexpr (Dim > 1) {
        Vec<Dim> s = best;
        for (int it = 0; it < 500; ++it) {
            Vec<Dim> g = phi.gradient(x + eps * s);
            const double gn = norm(g);
            if (gn == 0.0) break;
            const Vec<Dim> next = (sign / gn) * g;
            const double change = norm(next - s);
            s = next;
            if (change < 1e-15) break;
        }
        const double v = score(s);
        if (v > best_score) best_score = v;
    }
    // Interior critical point by Newton's method.
    Vec<Dim> y = x;
    for (int it = 0; it < 60; ++it) {
        const auto step = solve_small<Dim>(phi.hessian(y), phi.gradient(y));
        if (!step) break;
        y = y - *step;
        if (norm(*step) < 1e-15) break;
    }
    if (dist(y, x) <= eps && norm(phi.gradient(y)) < 1e-10) {
        const double v = score((1.0 / eps) * (y - x));
        if (v > best_score) best_score = v;
    }
    return sign * best_score;
}

}  // namespace detail

struct ExpansionSample {
    double epsilon = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;

    double gap() const { return std::abs(lhs - rhs); }
    nlohmann::json to_json() const {
        return {{"epsilon", epsilon}, {"lhs", lhs}, {"rhs", rhs}, {"gap", gap()}};
    }
};

/// Delta_p^N phi(x) = Delta phi + (p-2) <D^2 phi nu, nu>, nu = D phi/|D phi|.
template <int Dim>
double normalized_p_laplacian(const TestFunction<Dim>& phi, const Vec<Dim>& x, double p) {
    const Vec<Dim> g = phi.gradient(x);
    const Hessian<Dim> H = phi.hessian(x);
    const double gn = norm(g);
    double lap = 0.0, inf = 0.0;
    for (int i = 0; i < Dim; ++i) {
        lap += H[i][i];
        for (int j = 0; j < Dim; ++j) inf += g[i] * H[i][j] * g[j];
    }
    return lap + (p - 2.0) * inf / (gn * gn);
}

/**
 * Grid-free comparison of (T_eps phi(x) - phi(x)) / eps^2 with its
 * second-order prediction Delta_p^N phi(x) / (2(p+n)) - gamma phi(x).
 * The ball mean uses tensor Gauss quadrature, sup and inf are located on
 * the sphere by dense sampling plus the fixed-point refinement of the
 * Lagrange condition. Refuses points where |D phi| < 1e-8.
 */
template <int Dim>
ExpansionSample expansion_check(const TestFunction<Dim>& phi, const Vec<Dim>& x, const GameParams& params) {
    params.validate();
    if (params.n != Dim) throw std::invalid_argument("params.n does not match the test function dimension");
    if (norm(phi.gradient(x)) < 1e-8)
        throw std::domain_error("expansion check needs a nonvanishing gradient at the point");
    const double eps = params.epsilon;
    const double fx = phi.value(x);
    const double mean_off =
        detail::unit_ball_mean<Dim>([&](const Vec<Dim>& y) { return phi.value(x + eps * y) - fx; });
    const double sup_off = detail::ball_extremum_offset(phi, x, eps, +1.0);
    const double inf_off = detail::ball_extremum_offset(phi, x, eps, -1.0);
    const double mid_off = 0.5 * (sup_off + inf_off);
    // T phi - phi = disc*(mean + alpha (mid - mean)) - phi, offsets relative to phi(x).
    const double bracket_off = mean_off + params.alpha() * (mid_off - mean_off);
    const double t_minus_phi = params.discount() * bracket_off - params.discount_rate() * fx;

    ExpansionSample s;
    s.epsilon = eps;
    s.lhs = t_minus_phi / (eps * eps);
    s.rhs = 0.5 * normalized_p_laplacian(phi, x, params.p) / (params.p + params.n) - params.gamma * fx;
    return s;
}

template <int Dim>
std::vector<ExpansionSample> expansion_scan(const TestFunction<Dim>& phi, const Vec<Dim>& x, const GameParams& params,
                                            const std::vector<double>& epsilons) {
    std::vector<ExpansionSample> out;
    for (double e : epsilons) out.push_back(expansion_check(phi, x, params.with_epsilon(e)));
    return out;
}

}  // namespace towgame
