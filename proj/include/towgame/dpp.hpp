#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "towgame/field.hpp"
#include "towgame/parallel.hpp"
#include "towgame/params.hpp"

namespace towgame {

namespace detail {

template <int Dim>
void check_compatible(const DomainGrid<Dim>& grid, const GameParams& params) {
    params.validate();
    if (params.n != Dim) throw std::invalid_argument("params.n does not match the grid dimension");
    if (std::abs(grid.epsilon() - params.epsilon) > 1e-12 * params.epsilon)
        throw std::invalid_argument("grid epsilon does not match params epsilon");
}

/// (T u)(x_i) for one Interior point. Written as mean + alpha*(mid - mean),
/// which equals (alpha/2)(max+min) + beta*mean and leaves constants exactly
/// fixed when gamma = 0.
template <int Dim>
double apply_at(const DomainGrid<Dim>& grid, std::span<const double> u, std::size_t rank, const GameParams& params,
                std::vector<double>& scratch) {
    const auto ball = grid.interior_ball(rank);
    scratch.resize(ball.size());
    double mx = -std::numeric_limits<double>::infinity();
    double mn = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ball.size(); ++k) {
        const double v = u[ball[k]];
        scratch[k] = v;
        mx = std::max(mx, v);
        mn = std::min(mn, v);
    }
    const double mean = pairwise_sum(scratch) / static_cast<double>(ball.size());
    const double mid = 0.5 * (mx + mn);
    return params.discount() * (mean + params.alpha() * (mid - mean));
}

template <int Dim>
void apply_into(const ValueField<Dim>& in, std::vector<double>& out, const GameParams& params, int threads) {
    const auto& grid = in.grid();
    const auto interior = grid.interior_indices();
    const auto u = in.values();
    out.assign(u.begin(), u.end());
    parallel_for(interior.size(), threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> scratch;
        for (std::size_t r = begin; r < end; ++r) out[interior[r]] = apply_at(grid, u, r, params, scratch);
    });
}

}  // namespace detail

/// One application of the DPP operator: the discounted mix of ball midrange
/// and ball mean on Interior points, identity on the strip.
template <int Dim>
ValueField<Dim> apply_T(const ValueField<Dim>& field, const GameParams& params, int threads = 1) {
    detail::check_compatible(field.grid(), params);
    std::vector<double> out;
    detail::apply_into(field, out, params, threads);
    return ValueField<Dim>(field.grid_ptr(), std::move(out), FieldRole::Iterate);
}

/// max over Interior points of |u - T u|.
template <int Dim>
double dpp_residual(const ValueField<Dim>& field, const GameParams& params, int threads = 1) {
    detail::check_compatible(field.grid(), params);
    std::vector<double> out;
    detail::apply_into(field, out, params, threads);
    double r = 0.0;
    for (auto i : field.grid().interior_indices()) r = std::max(r, std::abs(out[i] - field[i]));
    return r;
}

struct SolveReport {
    std::size_t iterations = 0;
    double final_residual = std::numeric_limits<double>::infinity();
    std::vector<double> history;  ///< sup-norm of successive differences, one per sweep
    double wall_seconds = 0.0;
    bool converged = false;
    /// gamma = 0: no contraction, the successive-difference stop is heuristic.
    bool heuristic_stop = false;

    nlohmann::json to_json(bool with_timing = false) const {
        nlohmann::json j{{"iterations", iterations},
                         {"final_residual", final_residual},
                         {"converged", converged},
                         {"heuristic_stop", heuristic_stop}};
        if (with_timing) j["wall_seconds"] = wall_seconds;
        return j;
    }
};

enum class StartFrom { Below, Above };

struct SolveOptions {
    double tol = 1e-10;
    std::size_t max_iter = 5'000'000;
    int threads = 1;
    /// Below: u0 = -||F|| on Omega (monotone nondecreasing iteration).
    /// Above: u0 = +||F|| (monotone nonincreasing).
    StartFrom start = StartFrom::Below;
};

template <int Dim>
struct SolveResult {
    ValueField<Dim> solution;
    SolveReport report;
};

/// Called with every iterate u_k, k = 0, 1, ...
template <int Dim>
using IterateObserver = std::function<void(std::size_t, const ValueField<Dim>&)>;

/**
 * Jacobi fixed-point iteration u_k = T u_{k-1} from u_0 = -||F|| on Omega,
 * F on the strip. Stops when ||u_{k+1} - u_k|| <= tol on Interior points;
 * tol = 0 runs until the iterate stops changing. Returns the last iterate
 * flagged non-converged when max_iter is exhausted, throws on NaN/Inf.
 */
template <int Dim>
SolveResult<Dim> solve_dpp(const ValueField<Dim>& boundary, const GameParams& params, const SolveOptions& opts = {},
                           const IterateObserver<Dim>& observer = {}) {
    detail::check_compatible(boundary.grid(), params);
    if (!(opts.tol >= 0.0)) throw std::invalid_argument("tolerance must be nonnegative");
    const auto t0 = std::chrono::steady_clock::now();
    const auto& grid = boundary.grid();

    for (std::size_t i = 0; i < grid.size(); ++i)
        if (!grid.is_interior(i) && !std::isfinite(boundary[i]))
            throw std::invalid_argument("boundary data must be finite on the strip");
    const double fnorm = boundary.strip_sup_norm();

    std::vector<double> cur(boundary.values().begin(), boundary.values().end());
    const double init = opts.start == StartFrom::Below ? -fnorm : fnorm;
    for (auto i : grid.interior_indices()) cur[i] = init;

    ValueField<Dim> u(boundary.grid_ptr(), std::move(cur), FieldRole::Iterate);
    if (observer) observer(0, u);

    SolveReport report;
    report.heuristic_stop = params.gamma == 0.0;
    std::vector<double> next;
    const auto interior = grid.interior_indices();
    for (std::size_t k = 1; k <= opts.max_iter; ++k) {
        detail::apply_into(u, next, params, opts.threads);
        double diff = 0.0;
        for (auto i : interior) {
            const double v = next[i];
            if (!std::isfinite(v)) throw std::runtime_error("non-finite value during DPP iteration");
            diff = std::max(diff, std::abs(v - u[i]));
        }
        std::copy(next.begin(), next.end(), u.values().begin());
        report.iterations = k;
        report.history.push_back(diff);
        if (observer) observer(k, u);
        if (diff <= opts.tol) {
            report.converged = true;
            break;
        }
    }
    report.final_residual = dpp_residual(u, params, opts.threads);
    u.set_role(report.converged ? FieldRole::Solution : FieldRole::Iterate);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(u), std::move(report)};
}

}  // namespace towgame
