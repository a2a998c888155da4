#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "towgame/domain.hpp"
#include "towgame/field.hpp"
#include "towgame/parallel.hpp"
#include "towgame/params.hpp"
#include "towgame/rng.hpp"

namespace towgame {

/// Outcome of a turn's coin: the tug-of-war winner or a random step.
enum class Coin : std::uint8_t { PlayerI, PlayerII, Random };

inline const char* to_string(Coin c) {
    switch (c) {
        case Coin::PlayerI: return "I";
        case Coin::PlayerII: return "II";
        case Coin::Random: return "0";
    }
    return "?";
}

/// Game history (x0, (c1,x1), ..., (ck,xk)).
template <int Dim>
struct GameHistory {
    std::span<const Vec<Dim>> positions;
    std::span<const Coin> coins;

    std::size_t step() const { return positions.size() - 1; }
    const Vec<Dim>& current() const { return positions.back(); }
};

/// Deterministic move rule returning a displacement in the closed unit ball;
/// the token moves by epsilon times the displacement.
template <int Dim>
struct Strategy {
    std::string label;
    std::function<Vec<Dim>(const GameHistory<Dim>&)> rule;

    Vec<Dim> operator()(const GameHistory<Dim>& h) const { return rule(h); }
};

template <int Dim>
Strategy<Dim> zero_strategy() {
    return {"zero", [](const GameHistory<Dim>&) { return Vec<Dim>{}; }};
}

/// Steps the full epsilon toward target, or exactly onto it when closer.
template <int Dim>
Strategy<Dim> pull_strategy(const Vec<Dim>& target, double epsilon) {
    return {"pull", [target, epsilon](const GameHistory<Dim>& h) {
                Vec<Dim> s = (1.0 / epsilon) * (target - h.current());
                const double len = norm(s);
                if (len > 1.0) s = (1.0 / len) * s;
                return s;
            }};
}

/// Steps the full epsilon directly away from source (zero move on it).
template <int Dim>
Strategy<Dim> push_strategy(const Vec<Dim>& source) {
    return {"push", [source](const GameHistory<Dim>& h) {
                const Vec<Dim> v = h.current() - source;
                const double len = norm(v);
                if (len == 0.0) return Vec<Dim>{};
                return (1.0 / len) * v;
            }};
}

enum class GreedyMode { Maximize, Minimize };

/**
 * Epsilon-optimal strategy read off a solved field: moves to the grid point
 * of best value inside the closed eps-ball of the current position, ties to
 * the lowest grid index. Grid points are legal continuous moves and the
 * argmin over them is exact, so the eta*2^-k slack holds by construction;
 * the gap to the continuous-ball optimum is O(Lip(u) * h).
 */
template <int Dim>
Strategy<Dim> greedy_strategy(std::shared_ptr<const ValueField<Dim>> u, GreedyMode mode, double eta) {
    if (!u) throw std::invalid_argument("greedy strategy needs a field");
    if (!(eta >= 0.0)) throw std::invalid_argument("eta must be nonnegative");
    const double eps = u->grid().epsilon();
    const bool maximize = mode == GreedyMode::Maximize;
    return {maximize ? "greedy-max" : "greedy-min", [u, eps, maximize](const GameHistory<Dim>& h) {
                thread_local std::vector<std::uint32_t> cands;
                const Vec<Dim>& x = h.current();
                u->grid().points_within(x, eps, cands);
                if (cands.empty()) throw std::logic_error("no grid candidate within epsilon of the token");
                std::uint32_t best = cands.front();
                double best_v = (*u)[best];
                for (auto j : cands) {
                    const double v = (*u)[j];
                    if (maximize ? v > best_v : v < best_v) {
                        best_v = v;
                        best = j;
                    }
                }
                Vec<Dim> s = (1.0 / eps) * (u->grid().point(best) - x);
                const double len = norm(s);
                if (len > 1.0) s = (1.0 / len) * s;
                return s;
            }};
}

/// Source of the per-turn randomness: coin() uniform on [0,1) and
/// ball_step() uniform in B_1.
template <class R, int Dim>
concept GameRandomSource = requires(R& r) {
    { r.coin() } -> std::convertible_to<double>;
    { r.ball_step() } -> std::convertible_to<Vec<Dim>>;
};

template <int Dim>
struct StreamSource {
    StreamRng rng;
    StreamSource(std::uint64_t seed, std::uint64_t stream) : rng(seed, stream) {}
    double coin() { return rng.uniform(); }
    Vec<Dim> ball_step() { return uniform_in_ball<Dim>(rng); }
};

/// Coin outcome for xi in [0,1]: [0, a/2) Player I, [a/2, a) Player II,
/// [a, 1] random step.
inline Coin toss(double xi, double alpha) {
    if (xi < 0.5 * alpha) return Coin::PlayerI;
    if (xi < alpha) return Coin::PlayerII;
    return Coin::Random;
}

inline double discounted_payoff(std::size_t tau, double boundary_value, const GameParams& params) {
    return std::pow(params.discount(), static_cast<double>(tau)) * boundary_value;
}

template <int Dim>
struct GameTrajectory {
    std::vector<Vec<Dim>> positions;
    std::vector<Coin> coins;  ///< coins[k] produced positions[k+1]
    std::size_t tau = 0;
    double payoff = 0.0;
    bool truncated = false;

    nlohmann::json to_json() const {
        nlohmann::json pos = nlohmann::json::array();
        for (const auto& x : positions) pos.push_back(to_std(x));
        nlohmann::json cs = nlohmann::json::array();
        for (auto c : coins) cs.push_back(to_string(c));
        return {{"positions", pos}, {"coins", cs}, {"tau", tau}, {"payoff", payoff}, {"truncated", truncated}};
    }
};

/// Step cap: for gamma > 0 the smallest K with (1-gamma eps^2)^K ||F|| <= tol,
/// so zero-payoff truncation biases the value by at most tol. 10^8 for gamma = 0.
inline std::size_t truncation_horizon(const GameParams& params, double payoff_bound, double tol) {
    constexpr std::size_t kUndiscountedCap = 100'000'000;
    if (params.gamma == 0.0) return kUndiscountedCap;
    if (payoff_bound <= tol) return 1;
    const double k = std::ceil(std::log(tol / payoff_bound) / std::log(params.discount()));
    return static_cast<std::size_t>(std::max(1.0, std::min(k, static_cast<double>(kUndiscountedCap))));
}

namespace detail {

template <int Dim>
Vec<Dim> checked_move(const Strategy<Dim>& s, const GameHistory<Dim>& h) {
    const Vec<Dim> m = s(h);
    if (!(norm(m) <= 1.0 + 1e-12)) throw std::logic_error("strategy '" + s.label + "' left the unit ball");
    return m;
}

/// Plays one game into traj (buffers reused across calls).
template <int Dim, class Source>
    requires GameRandomSource<Source, Dim>
void play_into(GameTrajectory<Dim>& traj, const Vec<Dim>& x0, const Strategy<Dim>& sI, const Strategy<Dim>& sII,
               const GameParams& params, const DomainShape<Dim>& shape, const Payoff<Dim>& F, Source& source,
               std::size_t max_steps) {
    traj.positions.clear();
    traj.coins.clear();
    traj.positions.push_back(x0);
    traj.truncated = false;
    const double alpha = params.alpha();
    const double eps = params.epsilon;
    for (std::size_t k = 0; k < max_steps; ++k) {
        const GameHistory<Dim> hist{traj.positions, traj.coins};
        const Coin c = toss(source.coin(), alpha);
        Vec<Dim> step{};
        switch (c) {
            case Coin::PlayerI: step = checked_move(sI, hist); break;
            case Coin::PlayerII: step = checked_move(sII, hist); break;
            case Coin::Random: step = source.ball_step(); break;
        }
        const Vec<Dim> next = traj.positions.back() + eps * step;
        traj.coins.push_back(c);
        traj.positions.push_back(next);
        if (!shape.contains(next)) {
            traj.tau = k + 1;
            traj.payoff = discounted_payoff(traj.tau, F(next), params);
            return;
        }
    }
    traj.tau = max_steps;
    traj.payoff = 0.0;
    traj.truncated = true;
}

}  // namespace detail

/// One game from x0: each turn Player I moves with probability alpha/2,
/// Player II with alpha/2, a uniform random eps-step happens with beta.
/// Ends at the first position outside Omega and pays
/// (1-gamma eps^2)^tau F(X_tau). Runs past max_steps are truncated with
/// payoff 0.
template <int Dim, class Source>
    requires GameRandomSource<Source, Dim>
GameTrajectory<Dim> play_game(const Vec<Dim>& x0, const Strategy<Dim>& sI, const Strategy<Dim>& sII,
                              const GameParams& params, const DomainShape<Dim>& shape, const Payoff<Dim>& F,
                              Source& source, std::size_t max_steps) {
    params.validate();
    if (!shape.contains(x0)) throw std::invalid_argument("starting point must lie in the domain");
    if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
    GameTrajectory<Dim> traj;
    detail::play_into(traj, x0, sI, sII, params, shape, F, source, max_steps);
    return traj;
}

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
    std::size_t truncation_count = 0;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const {
        return {{"mean", mean},
                {"std_error", std_error},
                {"ci95_low", mean - 1.96 * std_error},
                {"ci95_high", mean + 1.96 * std_error},
                {"n_samples", n_samples},
                {"truncation_count", truncation_count},
                {"truncation_fraction", n_samples ? static_cast<double>(truncation_count) / n_samples : 0.0},
                {"seed", seed}};
    }
};

struct McOptions {
    int threads = 1;
    /// 0 selects truncation_horizon(params, payoff_bound, truncation_tol).
    std::size_t max_steps = 0;
    double payoff_bound = 1.0;
    double truncation_tol = 1e-12;

    std::size_t horizon(const GameParams& params) const {
        return max_steps > 0 ? max_steps : truncation_horizon(params, payoff_bound, truncation_tol);
    }
};

/// Mean and standard error of per-sample values, reduced in index order.
inline void summarize(std::span<const double> xs, double& mean, double& std_error) {
    const auto n = xs.size();
    mean = n ? pairwise_sum(xs) / static_cast<double>(n) : 0.0;
    if (n < 2) {
        std_error = 0.0;
        return;
    }
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = (xs[i] - mean) * (xs[i] - mean);
    const double var = pairwise_sum(sq) / static_cast<double>(n - 1);
    std_error = std::sqrt(var / static_cast<double>(n));
}

/// Monte Carlo estimate of E[(1-gamma eps^2)^tau F(X_tau)] for fixed
/// strategies. Sample i draws from StreamRng(seed, i) only, and the
/// reduction runs in sample order, so the result does not depend on threads.
template <int Dim>
McEstimate estimate_value(const Vec<Dim>& x0, const Strategy<Dim>& sI, const Strategy<Dim>& sII,
                          const GameParams& params, const DomainShape<Dim>& shape, const Payoff<Dim>& F,
                          std::size_t n_samples, std::uint64_t seed, const McOptions& opts = {}) {
    params.validate();
    if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
    if (!shape.contains(x0)) throw std::invalid_argument("starting point must lie in the domain");
    const std::size_t max_steps = opts.horizon(params);
    std::vector<double> payoff(n_samples);
    std::vector<std::uint8_t> truncated(n_samples);
    parallel_for(n_samples, opts.threads, [&](std::size_t begin, std::size_t end) {
        GameTrajectory<Dim> traj;
        for (std::size_t i = begin; i < end; ++i) {
            StreamSource<Dim> src(seed, i);
            detail::play_into(traj, x0, sI, sII, params, shape, F, src, max_steps);
            payoff[i] = traj.payoff;
            truncated[i] = traj.truncated;
        }
    });
    McEstimate est;
    est.n_samples = n_samples;
    est.seed = seed;
    summarize(payoff, est.mean, est.std_error);
    for (auto t : truncated) est.truncation_count += t;
    return est;
}

/// Replays samples [0, count) of estimate_value with the same seed.
template <int Dim>
std::vector<GameTrajectory<Dim>> sample_trajectories(const Vec<Dim>& x0, const Strategy<Dim>& sI,
                                                     const Strategy<Dim>& sII, const GameParams& params,
                                                     const DomainShape<Dim>& shape, const Payoff<Dim>& F,
                                                     std::size_t count, std::uint64_t seed, const McOptions& opts = {}) {
    std::vector<GameTrajectory<Dim>> out(count);
    const std::size_t max_steps = opts.horizon(params);
    for (std::size_t i = 0; i < count; ++i) {
        StreamSource<Dim> src(seed, i);
        out[i] = play_game(x0, sI, sII, params, shape, F, src, max_steps);
    }
    return out;
}

struct StoppingTimeSummary {
    double mean = 0.0;
    double variance = 0.0;
    double std_error = 0.0;
    double q10 = 0.0, q25 = 0.0, median = 0.0, q75 = 0.0, q90 = 0.0;
    double max = 0.0;
    std::size_t n_samples = 0;
    std::size_t truncated = 0;

    nlohmann::json to_json() const {
        return {{"mean", mean}, {"variance", variance}, {"std_error", std_error}, {"q10", q10},
                {"q25", q25},   {"median", median},     {"q75", q75},             {"q90", q90},
                {"max", max},   {"n_samples", n_samples}, {"truncated", truncated}};
    }
};

namespace detail {

/// Pulls b back onto the sphere |y - z| = R along the segment a -> b.
template <int Dim>
Vec<Dim> confine_to_ball(const Vec<Dim>& a, const Vec<Dim>& b, const Vec<Dim>& z, double R) {
    const Vec<Dim> d = b - a;
    const Vec<Dim> az = a - z;
    const double qa = dot(d, d);
    const double qb = 2.0 * dot(az, d);
    const double qc = dot(az, az) - R * R;
    if (qa == 0.0) return a;
    const double disc = std::max(0.0, qb * qb - 4.0 * qa * qc);
    const double t = std::clamp((-qb + std::sqrt(disc)) / (2.0 * qa), 0.0, 1.0);
    return a + t * d;
}

inline double quantile_sorted(std::span<const double> xs, double q) {
    if (xs.empty()) return 0.0;
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(xs.size())));
    return xs[std::min(xs.size() - 1, rank == 0 ? 0 : rank - 1)];
}

}  // namespace detail

/**
 * Auxiliary absorption process on the annulus B_R(z) \ closed B_delta(z):
 * Player I pulls toward z, Player II plays sII, moves that would leave the
 * closed outer ball are cut back to its sphere along the move segment, and
 * the process stops on entering the closed inner ball. Returns the
 * distribution of the stopping index tau*.
 */
template <int Dim>
StoppingTimeSummary stopping_time_stats(const Vec<Dim>& x0, const Strategy<Dim>& sII, const GameParams& params,
                                        const DomainShape<Dim>& annulus, std::size_t n_samples, std::uint64_t seed,
                                        int threads = 1, std::size_t max_steps = 100'000'000) {
    params.validate();
    if (annulus.kind() != ShapeKind::Annulus) throw std::invalid_argument("stopping-time process needs an annulus");
    const Vec<Dim> z = annulus.center();
    const double delta = annulus.inner_radius();
    const double R = annulus.outer_radius();
    const double r0 = dist(x0, z);
    if (!(delta < r0 && r0 < R)) throw std::invalid_argument("start must satisfy delta < |x0 - z| < R");
    if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");

    const Strategy<Dim> sI = pull_strategy<Dim>(z, params.epsilon);
    const double alpha = params.alpha();
    const double eps = params.epsilon;
    std::vector<double> taus(n_samples);
    std::vector<std::uint8_t> trunc(n_samples);
    parallel_for(n_samples, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<Vec<Dim>> pos;
        std::vector<Coin> coins;
        for (std::size_t i = begin; i < end; ++i) {
            StreamSource<Dim> src(seed, i);
            pos.assign(1, x0);
            coins.clear();
            std::size_t k = 0;
            bool stopped = false;
            while (k < max_steps) {
                const GameHistory<Dim> hist{pos, coins};
                const Coin c = toss(src.coin(), alpha);
                Vec<Dim> step{};
                switch (c) {
                    case Coin::PlayerI: step = detail::checked_move(sI, hist); break;
                    case Coin::PlayerII: step = detail::checked_move(sII, hist); break;
                    case Coin::Random: step = src.ball_step(); break;
                }
                Vec<Dim> next = pos.back() + eps * step;
                if (dist(next, z) > R) next = detail::confine_to_ball<Dim>(pos.back(), next, z, R);
                coins.push_back(c);
                pos.push_back(next);
                ++k;
                if (dist(next, z) <= delta) {
                    stopped = true;
                    break;
                }
            }
            taus[i] = static_cast<double>(k);
            trunc[i] = !stopped;
        }
    });
    StoppingTimeSummary s;
    s.n_samples = n_samples;
    summarize(taus, s.mean, s.std_error);
    s.variance = s.std_error * s.std_error * static_cast<double>(n_samples);
    for (auto t : trunc) s.truncated += t;
    std::vector<double> sorted = taus;
    std::sort(sorted.begin(), sorted.end());
    s.q10 = detail::quantile_sorted(sorted, 0.10);
    s.q25 = detail::quantile_sorted(sorted, 0.25);
    s.median = detail::quantile_sorted(sorted, 0.50);
    s.q75 = detail::quantile_sorted(sorted, 0.75);
    s.q90 = detail::quantile_sorted(sorted, 0.90);
    s.max = sorted.back();
    return s;
}

struct IncrementStat {
    std::size_t step = 0;
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t alive = 0;

    nlohmann::json to_json() const {
        return {{"k", step}, {"mean", mean}, {"std_error", std_error}, {"alive", alive}};
    }
};

/**
 * Estimates E[M_{k+1} - M_k | tau > k] for k < horizon, where
 * M_k = (1-gamma eps^2)^k u(x_k) + eta 2^-(k-1), Player II greedily
 * minimizes u and Player I plays the given adversary. u is read by
 * multilinear interpolation inside Omega and equals F on the strip.
 */
template <int Dim>
std::vector<IncrementStat> supermartingale_check(std::shared_ptr<const ValueField<Dim>> u, const Vec<Dim>& x0,
                                                 const GameParams& params, const Payoff<Dim>& F, double eta,
                                                 const Strategy<Dim>& adversary, std::size_t n_samples,
                                                 std::size_t horizon, std::uint64_t seed, int threads = 1) {
    params.validate();
    if (!u) throw std::invalid_argument("supermartingale check needs a field");
    if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
    const auto& shape = u->grid().shape();
    if (!shape.contains(x0)) throw std::invalid_argument("starting point must lie in the domain");
    const Strategy<Dim> minimizer = greedy_strategy<Dim>(u, GreedyMode::Minimize, eta);
    const double disc = params.discount();
    const double alpha = params.alpha();
    const double eps = params.epsilon;
    auto M = [&](std::size_t k, const Vec<Dim>& x) {
        const double v = shape.contains(x) ? u->interpolate(x) : F(x);
        return std::pow(disc, static_cast<double>(k)) * v + eta * std::ldexp(1.0, 1 - static_cast<int>(k));
    };

    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> incr(n_samples * horizon, nan);
    parallel_for(n_samples, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<Vec<Dim>> pos;
        std::vector<Coin> coins;
        for (std::size_t i = begin; i < end; ++i) {
            StreamSource<Dim> src(seed, i);
            pos.assign(1, x0);
            coins.clear();
            double m_prev = M(0, x0);
            for (std::size_t k = 0; k < horizon; ++k) {
                const GameHistory<Dim> hist{pos, coins};
                const Coin c = toss(src.coin(), alpha);
                Vec<Dim> step{};
                switch (c) {
                    case Coin::PlayerI: step = detail::checked_move(adversary, hist); break;
                    case Coin::PlayerII: step = detail::checked_move(minimizer, hist); break;
                    case Coin::Random: step = src.ball_step(); break;
                }
                const Vec<Dim> next = pos.back() + eps * step;
                coins.push_back(c);
                pos.push_back(next);
                const double m_next = M(k + 1, next);
                incr[i * horizon + k] = m_next - m_prev;
                m_prev = m_next;
                if (!shape.contains(next)) break;
            }
        }
    });

    std::vector<IncrementStat> out(horizon);
    std::vector<double> column;
    for (std::size_t k = 0; k < horizon; ++k) {
        column.clear();
        for (std::size_t i = 0; i < n_samples; ++i) {
            const double v = incr[i * horizon + k];
            if (!std::isnan(v)) column.push_back(v);
        }
        out[k].step = k;
        out[k].alive = column.size();
        summarize(column, out[k].mean, out[k].std_error);
    }
    return out;
}

}  // namespace towgame
