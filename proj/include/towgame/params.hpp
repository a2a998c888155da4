#pragma once

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace towgame {

/**
 * Parameters of the discounted tug-of-war: exponent p > 2, dimension n,
 * discount intensity gamma >= 0 and step radius epsilon.
 *
 * The coin probabilities are alpha = (p-2)/(p+n) (tug-of-war, split evenly
 * between the players) and beta = (n+2)/(p+n) (uniform random step). Each
 * turn multiplies the payoff by 1 - gamma*eps^2, which must stay above 1/2.
 */
struct GameParams {
    double p = 3.0;
    int n = 1;
    double gamma = 0.0;
    double epsilon = 0.1;

    double alpha() const { return (p - 2.0) / (p + n); }
    double beta() const { return (n + 2.0) / (p + n); }
    double discount() const { return 1.0 - gamma * epsilon * epsilon; }
    double discount_rate() const { return gamma * epsilon * epsilon; }

    /// Coefficient c of the limit equation Delta_p^N u - c u = 0 that the
    /// DPP is consistent with, with Delta_p^N u = Delta u + (p-2) Delta_inf^N u.
    /// Expanding the operator gives u + eps^2 (Delta_p^N u / (2(p+n)) - gamma u),
    /// hence c = 2 (p+n) gamma.
    double reaction_coefficient() const { return 2.0 * (p + n) * gamma; }

    void validate() const {
        if (!(p > 2.0) || !std::isfinite(p)) throw std::invalid_argument("p must be finite and > 2");
        if (n < 1) throw std::invalid_argument("dimension n must be >= 1");
        if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be finite and >= 0");
        if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be positive");
        if (!(discount_rate() < 0.5)) throw std::invalid_argument("gamma*eps^2 must be < 1/2");
    }

    GameParams with_epsilon(double eps) const {
        GameParams q = *this;
        q.epsilon = eps;
        return q;
    }

    nlohmann::json to_json() const {
        return {{"p", p}, {"n", n}, {"gamma", gamma}, {"epsilon", epsilon},
                {"alpha", alpha()}, {"beta", beta()}, {"discount", discount()}};
    }
};

inline GameParams make_params(double p, int n, double gamma, double epsilon) {
    GameParams g{p, n, gamma, epsilon};
    g.validate();
    return g;
}

}  // namespace towgame
