#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "towgame/config.hpp"
#include "towgame/domain.hpp"
#include "towgame/dpp.hpp"
#include "towgame/expansion.hpp"
#include "towgame/field.hpp"
#include "towgame/game.hpp"
#include "towgame/oracles.hpp"
#include "towgame/rng.hpp"

namespace towgame {

struct Assertion {
    std::string name;
    bool passed = false;
    nlohmann::json detail;

    nlohmann::json to_json() const { return {{"name", name}, {"passed", passed}, {"detail", detail}}; }
};

/// Everything a run produces. files maps output names to their contents;
/// timing is kept apart so the files stay reproducible.
struct RunOutput {
    nlohmann::json results = nlohmann::json::object();
    std::vector<Assertion> assertions;
    std::map<std::string, std::string> files;
    nlohmann::json timing = nlohmann::json::object();

    bool passed() const {
        return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.passed; });
    }

    bool check(std::string name, bool ok, nlohmann::json detail = nlohmann::json::object()) {
        assertions.push_back({std::move(name), ok, std::move(detail)});
        return ok;
    }
};

/// Least-squares line y = intercept + slope x with its R^2.
struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    double r_squared = 0.0;

    nlohmann::json to_json() const { return {{"intercept", intercept}, {"slope", slope}, {"r_squared", r_squared}}; }
};

inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    LinearFit f;
    const auto n = static_cast<double>(x.size());
    if (x.size() < 2) return f;
    const double mx = pairwise_sum(x) / n;
    const double my = pairwise_sum(y) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    f.slope = sxx > 0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0 && sxx > 0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

namespace detail {

template <int Dim>
struct Setup {
    DomainShape<Dim> shape;
    Payoff<Dim> F;
};

template <int Dim>
Setup<Dim> make_setup(const ExperimentConfig& cfg) {
    return {DomainShape<Dim>::from_json(cfg.domain), cfg.payoff.make<Dim>()};
}

template <int Dim>
Vec<Dim> option_point(const ExperimentConfig& cfg, const char* key, const Vec<Dim>& fallback) {
    if (!cfg.options.contains(key)) return fallback;
    const auto xs = cfg.options.at(key).get<std::vector<double>>();
    if (static_cast<int>(xs.size()) != Dim) throw std::invalid_argument(std::string("option '") + key + "' has wrong dimension");
    return to_vec<Dim>(xs);
}

template <int Dim>
std::vector<Vec<Dim>> option_points(const ExperimentConfig& cfg, const char* key, const DomainShape<Dim>& shape) {
    std::vector<Vec<Dim>> pts;
    if (cfg.options.contains(key)) {
        for (const auto& p : cfg.options.at(key).get<std::vector<std::vector<double>>>()) {
            if (static_cast<int>(p.size()) != Dim) throw std::invalid_argument("point has wrong dimension");
            pts.push_back(to_vec<Dim>(p));
        }
    } else {
        pts.push_back(shape.anchor());
    }
    for (const auto& p : pts)
        if (!shape.contains(p)) throw std::invalid_argument("configured point lies outside the domain");
    return pts;
}

template <int Dim>
struct SolvedField {
    std::shared_ptr<const ValueField<Dim>> u;
    SolveReport report;
    GameParams params;
};

template <int Dim>
SolvedField<Dim> solve_at(const ExperimentConfig& cfg, const Setup<Dim>& s, double eps, int threads) {
    auto grid = std::make_shared<const DomainGrid<Dim>>(s.shape, eps, cfg.h_rule(eps));
    const GameParams params = cfg.params(eps);
    SolveOptions opts;
    opts.tol = cfg.tol;
    opts.max_iter = cfg.max_iter;
    opts.threads = threads;
    auto res = solve_dpp(sample_boundary(grid, s.F), params, opts);
    return {std::make_shared<const ValueField<Dim>>(std::move(res.solution)), std::move(res.report), params};
}

template <int Dim>
nlohmann::json solve_summary(const SolvedField<Dim>& sf) {
    const auto& g = sf.u->grid();
    return {{"epsilon", g.epsilon()},
            {"h", g.spacing()},
            {"points", g.size()},
            {"interior", g.interior_count()},
            {"boundary_strip", g.strip_count()},
            {"solver", sf.report.to_json()}};
}

/// Reference solution for the configured geometry, if one is available.
template <int Dim>
std::function<double(const Vec<Dim>&)> make_oracle(const ExperimentConfig& cfg, const Setup<Dim>& s,
                                                   nlohmann::json& info) {
    if constexpr (Dim == 1) {
        if (s.shape.kind() == ShapeKind::Interval) {
            const double a = s.shape.bbox_lower()[0], b = s.shape.bbox_upper()[0];
            const double A = s.F(Vec<1>{a}), B = s.F(Vec<1>{b});
            auto o = std::make_shared<Oracle1D>(a, b, A, B, cfg.p, cfg.gamma);
            info = {{"kind", "closed_form_1d"}, {"mu", o->mu()}};
            return [o](const Vec<1>& x) { return (*o)(x[0]); };
        }
    } else {
        if ((s.shape.kind() == ShapeKind::Ball || s.shape.kind() == ShapeKind::Annulus) && cfg.payoff.is_constant()) {
            const double c = cfg.payoff.value;
            auto o = std::make_shared<RadialOracle>(
                solve_radial(cfg.p, cfg.n, cfg.gamma, RadialGeometry{s.shape.inner_radius(), s.shape.outer_radius()}, c, c));
            info = {{"kind", "radial_bvp"}, {"refinement_change", o->refinement_change()},
                    {"nodes", o->profile().r.size()}};
            const Vec<Dim> z = s.shape.center();
            return [o, z](const Vec<Dim>& x) { return o->at(x, z); };
        }
    }
    throw std::invalid_argument("no reference solution for this geometry and payoff");
}

/// Largest |u_i - u_j| / |x_i - x_j| over pairs of interior points at most eps apart.
template <int Dim>
double empirical_lipschitz(const ValueField<Dim>& u) {
    const auto& g = u.grid();
    const auto interior = g.interior_indices();
    double L = 0.0;
    for (std::size_t r = 0; r < interior.size(); ++r) {
        const auto i = interior[r];
        const auto xi = g.point(i);
        for (auto j : g.interior_ball(r)) {
            if (j == i || !g.is_interior(j)) continue;
            L = std::max(L, std::abs(u[i] - u[j]) / dist(xi, g.point(j)));
        }
    }
    return L;
}

template <int Dim>
std::size_t nearest_interior(const DomainGrid<Dim>& g, const Vec<Dim>& x) {
    std::size_t best = g.interior_indices().front();
    double bd = dist(g.point(best), x);
    for (auto i : g.interior_indices()) {
        const double d = dist(g.point(i), x);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return best;
}

inline std::string short_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline std::string csv_header(const ExperimentConfig& cfg) {
    return std::string("# towgame ") + kVersion + " config_hash=" + cfg.config_hash() +
           " seed=" + std::to_string(cfg.seed) + "\n";
}

/// Errors and constants below this are solver noise, not a trend.
inline double noise_floor(const ExperimentConfig& cfg) { return std::max(1e-12, 100.0 * cfg.tol); }

inline bool decreasing(std::span<const double> e, double floor = 1e-12) {
    for (std::size_t i = 1; i < e.size(); ++i)
        if (!(e[i] < e[i - 1]) && !(e[i] <= floor && e[i - 1] <= floor)) return false;
    return true;
}

template <int Dim>
Strategy<Dim> named_strategy(const std::string& name, std::shared_ptr<const ValueField<Dim>> u, double eta,
                             const Vec<Dim>& target, double eps) {
    if (name == "greedy-max") return greedy_strategy<Dim>(u, GreedyMode::Maximize, eta);
    if (name == "greedy-min") return greedy_strategy<Dim>(u, GreedyMode::Minimize, eta);
    if (name == "zero") return zero_strategy<Dim>();
    if (name == "pull") return pull_strategy<Dim>(target, eps);
    if (name == "push") return push_strategy<Dim>(target);
    throw std::invalid_argument("unknown strategy '" + name + "'");
}

inline double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- solve

template <int Dim>
RunOutput run_solve(const ExperimentConfig& cfg, int threads) {
    RunOutput out;
    const auto s = make_setup<Dim>(cfg);
    out.results["solves"] = nlohmann::json::array();
    std::ostringstream summary;
    summary << csv_header(cfg) << "epsilon,h,points,interior,iterations,final_residual,converged\n";
    for (std::size_t k = 0; k < cfg.epsilons.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto sf = solve_at<Dim>(cfg, s, cfg.epsilons[k], threads);
        out.timing["solve_" + std::to_string(k)] = elapsed(t0);
        out.results["solves"].push_back(solve_summary(sf));
        std::ostringstream csv;
        csv << csv_header(cfg);
        write_field_csv(*sf.u, csv);
        out.files["solution_" + std::to_string(k) + ".csv"] = csv.str();
        nlohmann::json meta = field_metadata(*sf.u);
        meta["params"] = sf.params.to_json();
        meta["solver"] = sf.report.to_json();
        meta["provenance"] = cfg.provenance();
        out.files["solution_" + std::to_string(k) + ".json"] = meta.dump(2) + "\n";
        const auto& g = sf.u->grid();
        summary << format_double(g.epsilon()) << ',' << format_double(g.spacing()) << ',' << g.size() << ','
                << g.interior_count() << ',' << sf.report.iterations << ',' << format_double(sf.report.final_residual)
                << ',' << (sf.report.converged ? 1 : 0) << '\n';
        const std::string tag = "[eps=" + short_double(g.epsilon()) + "]";
        out.check("solver_converged" + tag, sf.report.converged, {{"iterations", sf.report.iterations}});
        out.check("residual_within_tolerance" + tag, sf.report.final_residual <= cfg.tol + 1e-15,
                  {{"residual", sf.report.final_residual}, {"tol", cfg.tol}});
    }
    out.files["solve.csv"] = summary.str();
    return out;
}

// ---------------------------------------------------------------- converge

template <int Dim>
RunOutput run_converge(const ExperimentConfig& cfg, int threads) {
    RunOutput out;
    const auto s = make_setup<Dim>(cfg);
    nlohmann::json oracle_info;
    const auto U = make_oracle<Dim>(cfg, s, oracle_info);
    const Vec<Dim> probe = option_point<Dim>(cfg, "probe", s.shape.anchor());
    out.results["oracle"] = oracle_info;
    out.results["probe"] = to_std(probe);
    out.results["records"] = nlohmann::json::array();

    std::ostringstream csv;
    csv << csv_header(cfg)
        << "epsilon,h,sup_error,center_error,lipschitz_max,iterations,final_residual,converged\n";
    std::vector<double> sup_err, center_err;
    bool all_converged = true;
    for (std::size_t k = 0; k < cfg.epsilons.size(); ++k) {
        const double eps = cfg.epsilons[k];
        const auto t0 = std::chrono::steady_clock::now();
        const auto sf = solve_at<Dim>(cfg, s, eps, threads);
        out.timing["epsilon_" + std::to_string(k)] = elapsed(t0);
        const auto& u = *sf.u;
        const auto& g = u.grid();
        double e = 0.0;
        for (auto i : g.interior_indices()) e = std::max(e, std::abs(u[i] - U(g.point(i))));
        const auto c = nearest_interior(g, probe);
        const double ec = std::abs(u[c] - U(g.point(c)));
        const double L = empirical_lipschitz(u);
        sup_err.push_back(e);
        center_err.push_back(ec);
        all_converged = all_converged && sf.report.converged;
        out.results["records"].push_back({{"epsilon", eps},
                                          {"h", g.spacing()},
                                          {"sup_error", e},
                                          {"center_error", ec},
                                          {"center_point", to_std(g.point(c))},
                                          {"center_value", u[c]},
                                          {"center_oracle", U(g.point(c))},
                                          {"lipschitz_max", L},
                                          {"iterations", sf.report.iterations},
                                          {"final_residual", sf.report.final_residual},
                                          {"converged", sf.report.converged}});
        csv << format_double(eps) << ',' << format_double(g.spacing()) << ',' << format_double(e) << ','
            << format_double(ec) << ',' << format_double(L) << ',' << sf.report.iterations << ','
            << format_double(sf.report.final_residual) << ',' << (sf.report.converged ? 1 : 0) << '\n';

        if constexpr (Dim == 1) {
            std::ostringstream prof;
            prof << csv_header(cfg) << "x,u_eps,u_ref,class\n";
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double x = g.point(i)[0];
                prof << format_double(x) << ',' << format_double(u[i]) << ','
                     << format_double(g.is_interior(i) ? U(g.point(i)) : u[i]) << ','
                     << (g.is_interior(i) ? "interior" : "strip") << '\n';
            }
            out.files["profile_" + std::to_string(k) + ".csv"] = prof.str();
        }
    }
    out.files["converge.csv"] = csv.str();

    out.check("all_solves_converged", all_converged);
    if (cfg.option("require_sup_decrease", true))
        out.check("sup_error_strictly_decreasing", decreasing(sup_err, noise_floor(cfg)), {{"errors", sup_err}});
    if (cfg.option("require_center_decrease", true))
        out.check("center_error_strictly_decreasing", decreasing(center_err, noise_floor(cfg)), {{"errors", center_err}});
    if (cfg.options.contains("center_error_budget")) {
        const double budget = cfg.options.at("center_error_budget").get<double>();
        out.check("final_center_error_within_budget", center_err.back() < budget,
                  {{"error", center_err.back()}, {"budget", budget}});
    }
    return out;
}

// ---------------------------------------------------------------- regularity

template <int Dim>
RunOutput run_regularity(const ExperimentConfig& cfg, int threads) {
    RunOutput out;
    const auto s = make_setup<Dim>(cfg);
    const Vec<Dim> y = option_point<Dim>(cfg, "center", s.shape.anchor());
    const double r = cfg.option("radius", 0.5);
    const auto max_pairs = cfg.option<std::uint64_t>("max_pairs", 1'000'000);
    out.results["center"] = to_std(y);
    out.results["radius"] = r;
    out.results["records"] = nlohmann::json::array();

    std::ostringstream csv;
    csv << csv_header(cfg) << "epsilon,h,points_in_ball,pairs,sampled,max_quotient,field_sup\n";
    std::vector<double> quotients;
    double oracle_bound = -1.0;
    for (std::size_t k = 0; k < cfg.epsilons.size(); ++k) {
        const double eps = cfg.epsilons[k];
        const auto t0 = std::chrono::steady_clock::now();
        const auto sf = solve_at<Dim>(cfg, s, eps, threads);
        const auto& u = *sf.u;
        const auto& g = u.grid();
        std::vector<std::uint32_t> pts;
        for (auto i : g.interior_indices())
            if (dist(g.point(i), y) < r) pts.push_back(i);
        const double unorm = u.sup_norm();
        auto quotient = [&](std::uint32_t i, std::uint32_t j) {
            return std::abs(u[i] - u[j]) / (unorm * (dist(g.point(i), g.point(j)) + eps));
        };
        const std::uint64_t m = pts.size();
        const std::uint64_t all_pairs = m * (m - (m > 0 ? 1 : 0)) / 2;
        const bool sampled = all_pairs > max_pairs;
        double q = 0.0;
        if (unorm > 0.0 && m > 1) {
            if (!sampled) {
                for (std::size_t a = 0; a < m; ++a)
                    for (std::size_t b = a + 1; b < m; ++b) q = std::max(q, quotient(pts[a], pts[b]));
            } else {
                StreamRng rng(cfg.seed, 0x5245470000000000ULL + k);
                for (std::uint64_t t = 0; t < max_pairs; ++t) {
                    const auto a = static_cast<std::size_t>(rng.uniform() * static_cast<double>(m));
                    auto b = static_cast<std::size_t>(rng.uniform() * static_cast<double>(m - 1));
                    if (b >= a) ++b;
                    q = std::max(q, quotient(pts[a], pts[b]));
                }
            }
        }
        out.timing["epsilon_" + std::to_string(k)] = elapsed(t0);
        quotients.push_back(q);
        const std::uint64_t used = sampled ? max_pairs : all_pairs;
        out.results["records"].push_back({{"epsilon", eps},
                                          {"h", g.spacing()},
                                          {"points_in_ball", m},
                                          {"pairs", used},
                                          {"sampled", sampled},
                                          {"max_quotient", q},
                                          {"field_sup", unorm},
                                          {"converged", sf.report.converged}});
        csv << format_double(eps) << ',' << format_double(g.spacing()) << ',' << m << ',' << used << ','
            << (sampled ? 1 : 0) << ',' << format_double(q) << ',' << format_double(unorm) << '\n';
        out.check("solver_converged[eps=" + short_double(eps) + "]", sf.report.converged);

        if constexpr (Dim == 1) {
            if (s.shape.kind() == ShapeKind::Interval) {
                const double a = s.shape.bbox_lower()[0], b = s.shape.bbox_upper()[0];
                const Oracle1D o(a, b, s.F(Vec<1>{a}), s.F(Vec<1>{b}), cfg.p, cfg.gamma);
                const double bound = o.max_abs_derivative(y[0] - r, y[0] + r) / unorm + 0.1;
                oracle_bound = std::max(oracle_bound, bound);
                out.check("quotient_within_oracle_bound[eps=" + short_double(eps) + "]", q <= bound,
                          {{"quotient", q}, {"bound", bound}});
            }
        }
    }
    out.files["regularity.csv"] = csv.str();
    if (oracle_bound >= 0.0) out.results["oracle_bound"] = oracle_bound;

    nlohmann::json ratios = nlohmann::json::array();
    const double noise = noise_floor(cfg);
    bool stable = true;
    for (std::size_t k = 1; k < quotients.size(); ++k) {
        if (quotients[k - 1] <= noise && quotients[k] <= noise) {
            ratios.push_back(1.0);
            continue;
        }
        const double ratio = quotients[k - 1] > 0.0 ? quotients[k] / quotients[k - 1] : INFINITY;
        ratios.push_back(std::isfinite(ratio) ? nlohmann::json(ratio) : nlohmann::json("inf"));
        stable = stable && ratio >= 0.5 && ratio <= 2.0;
    }
    out.results["successive_ratios"] = ratios;
    out.results["max_quotient_over_sweep"] = *std::max_element(quotients.begin(), quotients.end());
    out.check("quotient_uniform_across_sweep", stable, {{"quotients", quotients}, {"ratios", ratios}});
    return out;
}

// ---------------------------------------------------------------- boundary

template <int Dim>
RunOutput run_boundary(const ExperimentConfig& cfg, int threads) {
    RunOutput out;
    const auto s = make_setup<Dim>(cfg);
    const double band = cfg.option("band", 0.5);
    const double lip = cfg.payoff.lipschitz();
    out.results["band"] = band;
    out.results["payoff_lipschitz"] = lip;
    out.results["records"] = nlohmann::json::array();
    std::vector<double> envelopes;
    const bool trivial = cfg.gamma == 0.0 && cfg.payoff.is_constant();

    std::ostringstream summary;
    summary << csv_header(cfg) << "epsilon,h,samples,envelope_constant,fit_intercept,fit_slope,fit_r_squared,max_gap\n";
    for (std::size_t k = 0; k < cfg.epsilons.size(); ++k) {
        const double eps = cfg.epsilons[k];
        const auto t0 = std::chrono::steady_clock::now();
        const auto sf = solve_at<Dim>(cfg, s, eps, threads);
        const auto& u = *sf.u;
        const auto& g = u.grid();
        const double fnorm = u.strip_sup_norm() + lip;
        std::vector<double> ds, gaps;
        std::ostringstream scatter;
        scatter << csv_header(cfg) << "index,distance,gap,strip_index\n";
        std::vector<std::uint32_t> cands;
        for (auto i : g.interior_indices()) {
            const auto x = g.point(i);
            const double d = s.shape.distance_to_boundary(x);
            if (d > band) continue;
            const auto yb = s.shape.boundary_projection(x);
            g.points_within(yb, eps, cands);
            std::int64_t z = -1;
            double zd = INFINITY;
            for (auto j : cands) {
                if (g.is_interior(j)) continue;
                const double dj = dist(g.point(j), yb);
                if (dj < zd) {
                    zd = dj;
                    z = j;
                }
            }
            if (z < 0) continue;
            const double gap = std::abs(u[i] - u[static_cast<std::size_t>(z)]);
            ds.push_back(d);
            gaps.push_back(gap);
            scatter << i << ',' << format_double(d) << ',' << format_double(gap) << ',' << z << '\n';
        }
        out.timing["epsilon_" + std::to_string(k)] = elapsed(t0);
        double K = 0.0, max_gap = 0.0;
        for (std::size_t t = 0; t < ds.size(); ++t) {
            max_gap = std::max(max_gap, gaps[t]);
            if (fnorm > 0.0) K = std::max(K, gaps[t] / (fnorm * (ds[t] + eps)));
        }
        const LinearFit fit = fit_line(ds, gaps);
        envelopes.push_back(K);
        out.results["records"].push_back({{"epsilon", eps},
                                          {"h", g.spacing()},
                                          {"samples", ds.size()},
                                          {"payoff_norm", fnorm},
                                          {"envelope_constant", K},
                                          {"fit", fit.to_json()},
                                          {"max_gap", max_gap},
                                          {"converged", sf.report.converged}});
        summary << format_double(eps) << ',' << format_double(g.spacing()) << ',' << ds.size() << ','
                << format_double(K) << ',' << format_double(fit.intercept) << ',' << format_double(fit.slope) << ','
                << format_double(fit.r_squared) << ',' << format_double(max_gap) << '\n';
        out.files["boundary_" + std::to_string(k) + ".csv"] = scatter.str();
        const std::string tag = "[eps=" + short_double(eps) + "]";
        out.check("solver_converged" + tag, sf.report.converged);
        out.check("envelope_finite" + tag, std::isfinite(K) && !ds.empty(), {{"envelope_constant", K}});
        if (trivial) out.check("constant_data_gap_vanishes" + tag, max_gap <= 1e-8, {{"max_gap", max_gap}});
    }
    out.files["boundary.csv"] = summary.str();
    bool stable = true;
    for (std::size_t k = 1; k < envelopes.size(); ++k) {
        if (envelopes[k] <= noise_floor(cfg) && envelopes[k - 1] <= noise_floor(cfg)) continue;
        const double ratio = envelopes[k - 1] > 0.0 ? envelopes[k] / envelopes[k - 1] : INFINITY;
        stable = stable && ratio >= 0.5 && ratio <= 2.0;
    }
    out.check("envelope_stable_across_sweep", stable, {{"envelopes", envelopes}});
    return out;
}

// ---------------------------------------------------------------- simulate

template <int Dim>
RunOutput run_simulate(const ExperimentConfig& cfg, int threads) {
    RunOutput out;
    const auto s = make_setup<Dim>(cfg);
    const double eps = cfg.option("epsilon", cfg.epsilons.front());
    const auto pts = option_points<Dim>(cfg, "points", s.shape);
    const auto n_samples = cfg.option<std::size_t>("n_samples", 10000);
    const auto dump = cfg.option<std::size_t>("trajectories", 5);
    const double eta = cfg.option("eta", 1e-3);
    const auto nameI = cfg.option<std::string>("strategy_I", "greedy-max");
    const auto nameII = cfg.option<std::string>("strategy_II", "greedy-min");
    const Vec<Dim> target = option_point<Dim>(cfg, "target", s.shape.anchor());

    std::shared_ptr<const ValueField<Dim>> u;
    const GameParams params = cfg.params(eps);
    if (nameI.starts_with("greedy") || nameII.starts_with("greedy")) {
        const auto sf = solve_at<Dim>(cfg, s, eps, threads);
        out.results["solve"] = solve_summary(sf);
        u = sf.u;
    }
    const auto sI = named_strategy<Dim>(nameI, u, eta, target, eps);
    const auto sII = named_strategy<Dim>(nameII, u, eta, target, eps);
    McOptions mc;
    mc.threads = threads;
    mc.payoff_bound = std::max(1e-300, u ? u->strip_sup_norm() : cfg.payoff.is_constant() ? std::abs(cfg.payoff.value) : 1.0);
    mc.max_steps = cfg.option<std::size_t>("max_steps", 0);

    out.results["epsilon"] = eps;
    out.results["strategies"] = {nameI, nameII};
    out.results["estimates"] = nlohmann::json::array();
    std::ostringstream csv, traj;
    csv << csv_header(cfg) << "point";
    for (int d = 0; d < Dim; ++d) csv << ",x" << d;
    csv << ",mean,std_error,n_samples,truncated\n";
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::uint64_t seed = cfg.seed + 1000003ULL * k;
        const auto est = estimate_value<Dim>(pts[k], sI, sII, params, s.shape, s.F, n_samples, seed, mc);
        out.timing["point_" + std::to_string(k)] = elapsed(t0);
        nlohmann::json rec = est.to_json();
        rec["point"] = to_std(pts[k]);
        out.results["estimates"].push_back(rec);
        csv << k;
        for (int d = 0; d < Dim; ++d) csv << ',' << format_double(pts[k][d]);
        csv << ',' << format_double(est.mean) << ',' << format_double(est.std_error) << ',' << est.n_samples << ','
            << est.truncation_count << '\n';
        const auto trajs = sample_trajectories<Dim>(pts[k], sI, sII, params, s.shape, s.F,
                                                     std::min(dump, n_samples), seed, mc);
        for (std::size_t t = 0; t < trajs.size(); ++t) {
            nlohmann::json line = cfg.provenance();
            line["point"] = k;
            line["sample"] = t;
            line["trajectory"] = trajs[t].to_json();
            traj << line.dump() << '\n';
        }
        if (cfg.gamma > 0.0)
            out.check("no_truncation[point=" + std::to_string(k) + "]", est.truncation_count == 0,
                      {{"truncated", est.truncation_count}});
    }
    out.files["simulate.csv"] = csv.str();
    out.files["trajectories.jsonl"] = traj.str();
    return out;
}

// ---------------------------------------------------------------- compare

template <int Dim>
RunOutput run_compare(const ExperimentConfig& cfg, int threads) {
    RunOutput out;
    const auto s = make_setup<Dim>(cfg);
    const double eps = cfg.option("epsilon", cfg.epsilons.front());
    const auto pts = option_points<Dim>(cfg, "points", s.shape);
    const auto n_samples = cfg.option<std::size_t>("n_samples", 100000);
    const double eta = cfg.option("eta", 1e-3);
    const double factor = cfg.option("lipschitz_factor", 2.0);
    const bool adversarial = cfg.option("adversarial_check", true);

    auto t0 = std::chrono::steady_clock::now();
    const auto sf = solve_at<Dim>(cfg, s, eps, threads);
    out.timing["solve"] = elapsed(t0);
    const auto& u = *sf.u;
    const auto& g = u.grid();
    const double L = empirical_lipschitz(u);
    const double c = factor * L;
    out.results["solve"] = solve_summary(sf);
    out.results["empirical_lipschitz"] = L;
    out.results["margin_constant"] = c;
    out.results["eta"] = eta;
    out.check("solver_converged", sf.report.converged);

    const auto maxI = greedy_strategy<Dim>(sf.u, GreedyMode::Maximize, eta);
    const auto minII = greedy_strategy<Dim>(sf.u, GreedyMode::Minimize, eta);
    const auto zero = zero_strategy<Dim>();
    McOptions mc;
    mc.threads = threads;
    mc.payoff_bound = std::max(1e-300, u.strip_sup_norm());

    std::ostringstream csv;
    csv << csv_header(cfg) << "point";
    for (int d = 0; d < Dim; ++d) csv << ",x" << d;
    csv << ",u_eps,mc_mean,mc_std_error,abs_diff,margin,within\n";
    out.results["points"] = nlohmann::json::array();
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const auto i = nearest_interior(g, pts[k]);
        const auto x0 = g.point(i);
        const std::uint64_t seed = cfg.seed + 1000003ULL * k;
        t0 = std::chrono::steady_clock::now();
        const auto est = estimate_value<Dim>(x0, maxI, minII, sf.params, s.shape, s.F, n_samples, seed, mc);
        out.timing["point_" + std::to_string(k)] = elapsed(t0);
        const double diff = std::abs(est.mean - u[i]);
        const double margin = 3.0 * est.std_error + c * (eta + g.spacing()) + noise_floor(cfg);
        nlohmann::json rec = {{"point", to_std(x0)}, {"u_eps", u[i]}, {"mc", est.to_json()}, {"abs_diff", diff},
                              {"margin", margin}};
        const std::string tag = "[point=" + std::to_string(k) + "]";
        out.check("game_value_matches_dpp" + tag, diff <= margin, {{"abs_diff", diff}, {"margin", margin}});
        if (adversarial && u.strip_sup_norm() >= 0.0) {
            bool nonneg = true;
            for (std::size_t j = 0; j < g.size(); ++j)
                if (!g.is_interior(j) && u[j] < 0.0) nonneg = false;
            if (nonneg) {
                const auto weak = estimate_value<Dim>(x0, maxI, zero, sf.params, s.shape, s.F, n_samples, seed, mc);
                const double noise = 3.0 * std::hypot(est.std_error, weak.std_error);
                rec["with_zero_player_II"] = weak.to_json();
                out.check("weaker_minimizer_does_not_lower_value" + tag, weak.mean >= est.mean - noise,
                          {{"greedy", est.mean}, {"zero", weak.mean}, {"noise", noise}});
            }
        }
        out.results["points"].push_back(rec);
        csv << k;
        for (int d = 0; d < Dim; ++d) csv << ',' << format_double(x0[d]);
        csv << ',' << format_double(u[i]) << ',' << format_double(est.mean) << ',' << format_double(est.std_error)
            << ',' << format_double(diff) << ',' << format_double(margin) << ',' << (diff <= margin ? 1 : 0) << '\n';
    }
    out.files["compare.csv"] = csv.str();

    if (cfg.options.contains("supermartingale")) {
        const auto& sm = cfg.options.at("supermartingale");
        const Vec<Dim> x0 = g.point(nearest_interior(g, sm.contains("point")
                                                            ? to_vec<Dim>(sm.at("point").get<std::vector<double>>())
                                                            : s.shape.anchor()));
        const auto horizon = sm.value<std::size_t>("horizon", 50);
        const auto ns = sm.value<std::size_t>("n_samples", 100000);
        const double sm_eta = sm.value("eta", eta);
        const auto names = sm.value("adversaries", std::vector<std::string>{"zero", "pull", "greedy-max"});
        const Vec<Dim> target = sm.contains("target") ? to_vec<Dim>(sm.at("target").get<std::vector<double>>())
                                                      : s.shape.anchor();
        std::ostringstream scsv;
        scsv << csv_header(cfg) << "adversary,k,mean,std_error,alive\n";
        out.results["supermartingale"] = {{"point", to_std(x0)}, {"horizon", horizon}, {"eta", sm_eta}};
        for (std::size_t a = 0; a < names.size(); ++a) {
            const auto adv = named_strategy<Dim>(names[a], sf.u, sm_eta, target, eps);
            t0 = std::chrono::steady_clock::now();
            const auto stats = supermartingale_check<Dim>(sf.u, x0, sf.params, s.F, sm_eta, adv, ns, horizon,
                                                          cfg.seed + 7919ULL * (a + 1), threads);
            out.timing["supermartingale_" + names[a]] = elapsed(t0);
            nlohmann::json rows = nlohmann::json::array();
            std::size_t violations = 0;
            double worst = -INFINITY;
            for (const auto& st : stats) {
                rows.push_back(st.to_json());
                scsv << names[a] << ',' << st.step << ',' << format_double(st.mean) << ','
                     << format_double(st.std_error) << ',' << st.alive << '\n';
                if (st.alive == 0) continue;
                if (st.mean > 2.0 * st.std_error) ++violations;
                if (st.std_error > 0) worst = std::max(worst, st.mean / st.std_error);
            }
            out.results["supermartingale"][names[a]] = rows;
            out.check("supermartingale_increments_nonpositive[" + names[a] + "]", violations == 0,
                      {{"violations", violations}, {"worst_mean_over_se", std::isfinite(worst) ? worst : 0.0}});
        }
        out.files["supermartingale.csv"] = scsv.str();
    }
    return out;
}

// ---------------------------------------------------------------- stopping time

template <int Dim>
RunOutput run_stopping_time(const ExperimentConfig& cfg, int threads) {
    RunOutput out;
    const auto s = make_setup<Dim>(cfg);
    if (s.shape.kind() != ShapeKind::Annulus) throw std::invalid_argument("stopping-time experiment needs an annulus");
    const Vec<Dim> z = s.shape.center();
    const double delta = s.shape.inner_radius();
    const double d0 = cfg.option("start_distance", 0.4);
    const auto n_samples = cfg.option<std::size_t>("n_samples", 10000);
    const auto adv_name = cfg.option<std::string>("adversary", "push");
    if (adv_name != "push" && adv_name != "zero") throw std::invalid_argument("stopping-time adversary must be push or zero");
    const Strategy<Dim> adv = adv_name == "push" ? push_strategy<Dim>(z) : zero_strategy<Dim>();
    auto start_at = [&](double d) {
        Vec<Dim> x = z;
        x[0] += delta + d;
        return x;
    };

    std::ostringstream csv;
    csv << csv_header(cfg) << "sweep,epsilon,start_distance,mean,std_error,median,q90,scaled_mean,truncated\n";
    auto row = [&](const char* sweep, double eps, double d, const StoppingTimeSummary& st) {
        csv << sweep << ',' << format_double(eps) << ',' << format_double(d) << ',' << format_double(st.mean) << ','
            << format_double(st.std_error) << ',' << format_double(st.median) << ',' << format_double(st.q90) << ','
            << format_double(st.mean * eps * eps) << ',' << st.truncated << '\n';
    };

    std::vector<double> scaled;
    std::size_t truncated = 0;
    out.results["epsilon_sweep"] = nlohmann::json::array();
    for (std::size_t k = 0; k < cfg.epsilons.size(); ++k) {
        const double eps = cfg.epsilons[k];
        const auto t0 = std::chrono::steady_clock::now();
        const auto st = stopping_time_stats<Dim>(start_at(d0), adv, cfg.params(eps), s.shape, n_samples,
                                                 cfg.seed + 104729ULL * k, threads);
        out.timing["epsilon_" + std::to_string(k)] = elapsed(t0);
        scaled.push_back(st.mean * eps * eps);
        truncated += st.truncated;
        nlohmann::json rec = st.to_json();
        rec["epsilon"] = eps;
        rec["scaled_mean"] = scaled.back();
        out.results["epsilon_sweep"].push_back(rec);
        row("epsilon", eps, d0, st);
    }
    const double smax = *std::max_element(scaled.begin(), scaled.end());
    const double smin = *std::min_element(scaled.begin(), scaled.end());
    out.check("scaled_mean_within_factor_2", smin > 0.0 && smax <= 2.0 * smin,
              {{"scaled_means", scaled}, {"max_over_min", smin > 0 ? smax / smin : INFINITY}});

    const double eps_s = cfg.option("sweep_epsilon", cfg.epsilons.size() > 1 ? cfg.epsilons[1] : cfg.epsilons[0]);
    const double gap = s.shape.outer_radius() - delta;
    const auto distances = cfg.option("distances", std::vector<double>{0.1 * gap, 0.25 * gap, 0.5 * gap, 0.75 * gap});
    std::vector<double> ds, fs;
    out.results["distance_sweep"] = nlohmann::json::array();
    for (std::size_t k = 0; k < distances.size(); ++k) {
        const double d = distances[k];
        const auto st = stopping_time_stats<Dim>(start_at(d), adv, cfg.params(eps_s), s.shape, n_samples,
                                                 cfg.seed + 15485863ULL * (k + 1), threads);
        truncated += st.truncated;
        ds.push_back(d);
        fs.push_back(st.mean * eps_s * eps_s);
        nlohmann::json rec = st.to_json();
        rec["start_distance"] = d;
        rec["scaled_mean"] = fs.back();
        out.results["distance_sweep"].push_back(rec);
        row("distance", eps_s, d, st);
    }
    const LinearFit fit = fit_line(ds, fs);
    out.results["distance_fit"] = fit.to_json();
    out.results["sweep_epsilon"] = eps_s;
    // At most linear growth: E[tau*] eps^2 / (d + eps) may not rise above its
    // value at the nearest start (25% allowance for sampling noise).
    double base = 0.0, worst = 0.0;
    std::size_t nearest = 0;
    for (std::size_t k = 0; k < ds.size(); ++k)
        if (ds[k] < ds[nearest]) nearest = k;
    base = fs[nearest] / (ds[nearest] + eps_s);
    for (std::size_t k = 0; k < ds.size(); ++k) worst = std::max(worst, fs[k] / (ds[k] + eps_s));
    out.check("at_most_linear_growth_in_distance", worst <= 1.25 * base,
              {{"rate_at_nearest", base}, {"max_rate", worst}, {"r_squared", fit.r_squared}});
    out.check("no_truncated_runs", truncated == 0, {{"truncated", truncated}});
    out.files["stopping_time.csv"] = csv.str();
    return out;
}

// ---------------------------------------------------------------- expansion

template <int Dim>
RunOutput run_expansion(const ExperimentConfig& cfg, int) {
    RunOutput out;
    const Vec<Dim> x = option_point<Dim>(cfg, "point", registry_point<Dim>());
    const auto wanted = cfg.option("functions", std::vector<std::string>{});
    const double floor = cfg.option("gap_floor", 1e-9);
    const double max_ratio = cfg.option("max_ratio", 0.75);
    std::vector<double> eps = cfg.epsilons;
    std::sort(eps.begin(), eps.end(), std::greater<>());
    const GameParams params = cfg.params(eps.front());

    std::ostringstream csv;
    csv << csv_header(cfg) << "function,epsilon,lhs,rhs,gap\n";
    out.results["point"] = to_std(x);
    out.results["functions"] = nlohmann::json::object();
    for (const auto& phi : test_function_registry<Dim>()) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), phi.name) == wanted.end()) continue;
        const auto scan = expansion_scan(phi, x, params, eps);
        nlohmann::json rows = nlohmann::json::array();
        std::vector<double> ratios;
        bool shrinks = true;
        for (std::size_t k = 0; k < scan.size(); ++k) {
            rows.push_back(scan[k].to_json());
            csv << phi.name << ',' << format_double(scan[k].epsilon) << ',' << format_double(scan[k].lhs) << ','
                << format_double(scan[k].rhs) << ',' << format_double(scan[k].gap()) << '\n';
            if (k == 0) continue;
            const double prev = scan[k - 1].gap(), cur = scan[k].gap();
            if (cur <= floor) continue;
            const double ratio = prev > 0.0 ? cur / prev : INFINITY;
            ratios.push_back(ratio);
            shrinks = shrinks && ratio <= max_ratio;
        }
        out.results["functions"][phi.name] = {{"samples", rows}, {"ratios", ratios}, {"quadratic", phi.quadratic}};
        if (phi.quadratic)
            out.check("gap_shrinks[" + phi.name + "]", shrinks, {{"ratios", ratios}, {"max_ratio", max_ratio}});
    }
    out.files["expansion.csv"] = csv.str();
    return out;
}

template <int Dim>
RunOutput run_dim(const ExperimentConfig& cfg, int threads) {
    switch (cfg.kind) {
        case ExperimentKind::Solve: return run_solve<Dim>(cfg, threads);
        case ExperimentKind::Simulate: return run_simulate<Dim>(cfg, threads);
        case ExperimentKind::Converge: return run_converge<Dim>(cfg, threads);
        case ExperimentKind::Compare: return run_compare<Dim>(cfg, threads);
        case ExperimentKind::Regularity: return run_regularity<Dim>(cfg, threads);
        case ExperimentKind::Boundary: return run_boundary<Dim>(cfg, threads);
        case ExperimentKind::StoppingTime: return run_stopping_time<Dim>(cfg, threads);
        case ExperimentKind::Expansion: return run_expansion<Dim>(cfg, threads);
    }
    throw std::logic_error("unhandled experiment kind");
}

}  // namespace detail

/// Runs the configured experiment and attaches manifest.json (and
/// failures.json when an assertion fails) to the returned files.
inline RunOutput run_experiment(const ExperimentConfig& cfg, int threads = 1) {
    threads = resolve_threads(threads);
    RunOutput out;
    switch (cfg.n) {
        case 1: out = detail::run_dim<1>(cfg, threads); break;
        case 2: out = detail::run_dim<2>(cfg, threads); break;
        case 3: out = detail::run_dim<3>(cfg, threads); break;
        default: throw std::invalid_argument("dimension must be 1, 2 or 3");
    }
    nlohmann::json manifest = cfg.provenance();
    manifest["tool"] = "towgame";
    manifest["schema_version"] = kSchemaVersion;
    manifest["experiment"] = to_string(cfg.kind);
    manifest["name"] = cfg.name;
    nlohmann::json config = cfg.resolved;
    config.erase("threads");
    manifest["config"] = config;
    manifest["results"] = out.results;
    manifest["assertions"] = nlohmann::json::array();
    nlohmann::json failed = nlohmann::json::array();
    for (const auto& a : out.assertions) {
        manifest["assertions"].push_back(a.to_json());
        if (!a.passed) failed.push_back(a.to_json());
    }
    manifest["passed"] = out.passed();
    nlohmann::json files = nlohmann::json::array();
    for (const auto& [name, _] : out.files) files.push_back(name);
    manifest["files"] = files;
    out.files["manifest.json"] = manifest.dump(2) + "\n";
    if (!failed.empty()) {
        nlohmann::json report = cfg.provenance();
        report["experiment"] = to_string(cfg.kind);
        report["failed"] = failed;
        out.files["failures.json"] = report.dump(2) + "\n";
    }
    return out;
}

}  // namespace towgame
