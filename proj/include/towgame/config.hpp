#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "towgame/params.hpp"
#include "towgame/payoff.hpp"

namespace towgame {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

enum class ExperimentKind { Solve, Simulate, Converge, Compare, Regularity, Boundary, StoppingTime, Expansion };

inline const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Solve: return "solve";
        case ExperimentKind::Simulate: return "simulate";
        case ExperimentKind::Converge: return "converge";
        case ExperimentKind::Compare: return "compare";
        case ExperimentKind::Regularity: return "regularity";
        case ExperimentKind::Boundary: return "boundary";
        case ExperimentKind::StoppingTime: return "stopping-time";
        case ExperimentKind::Expansion: return "expansion";
    }
    return "unknown";
}

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
    for (auto k : {ExperimentKind::Solve, ExperimentKind::Simulate, ExperimentKind::Converge, ExperimentKind::Compare,
                   ExperimentKind::Regularity, ExperimentKind::Boundary, ExperimentKind::StoppingTime,
                   ExperimentKind::Expansion})
        if (s == to_string(k)) return k;
    throw std::invalid_argument("unknown experiment kind '" + s + "'");
}

/// Grid spacing as a function of epsilon: "ratio" gives c*eps, "quadratic" c*eps^2.
struct HRule {
    std::string kind = "ratio";
    double c = 0.125;

    double operator()(double eps) const { return kind == "quadratic" ? c * eps * eps : c * eps; }

    static HRule from_json(const nlohmann::json& j) {
        HRule r;
        r.kind = j.value("kind", std::string("ratio"));
        r.c = j.value("c", 0.125);
        if (r.kind != "ratio" && r.kind != "quadratic") throw std::invalid_argument("h_rule kind must be ratio or quadratic");
        if (!(r.c > 0.0)) throw std::invalid_argument("h_rule constant must be positive");
        return r;
    }
    nlohmann::json to_json() const { return {{"kind", kind}, {"c", c}}; }
};

/// Built-in parameter sets; a config naming one is merged on top of it.
inline nlohmann::json scenario_defaults(const std::string& name) {
    using nlohmann::json;
    if (name == "figure1")
        return {{"dimension", 1},
                {"p", 3.0},
                {"gamma", 0.25},
                {"domain", {{"kind", "interval"}, {"a", -1.0}, {"b", 1.0}}},
                {"epsilons", {0.1, 0.05, 0.025}},
                {"h_rule", {{"kind", "quadratic"}, {"c", 1.25}}},
                {"payoff", {{"kind", "constant"}, {"value", 1.0}}}};
    if (name == "radial2d")
        return {{"dimension", 2},
                {"p", 4.0},
                {"gamma", 0.5},
                {"domain", {{"kind", "ball"}, {"center", {0.0, 0.0}}, {"radius", 1.0}}},
                {"epsilons", {0.4, 0.2, 0.1}},
                {"h_rule", {{"kind", "ratio"}, {"c", 0.125}}},
                {"payoff", {{"kind", "constant"}, {"value", 1.0}}}};
    if (name == "annulus2d")
        return {{"dimension", 2},
                {"p", 6.0},
                {"gamma", 0.0},
                {"domain", {{"kind", "annulus"}, {"center", {0.0, 0.0}}, {"r_in", 0.2}, {"r_out", 1.0}}},
                {"epsilons", {0.1, 0.05, 0.025}},
                {"h_rule", {{"kind", "ratio"}, {"c", 0.125}}},
                {"payoff", {{"kind", "constant"}, {"value", 1.0}}}};
    if (name == "affine1d")
        return {{"dimension", 1},
                {"p", 3.0},
                {"gamma", 0.0},
                {"domain", {{"kind", "interval"}, {"a", -1.0}, {"b", 1.0}}},
                {"epsilons", {0.2, 0.1}},
                {"h_rule", {{"kind", "ratio"}, {"c", 0.125}}},
                {"payoff", {{"kind", "affine"}, {"a", {1.0}}, {"b", 0.0}}}};
    throw std::invalid_argument("unknown scenario '" + name + "'");
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/**
 * Validated experiment configuration. Top-level keys:
 * schema_version (required, 1), experiment, scenario, name, dimension, p,
 * gamma, domain, epsilons, h_rule, payoff, seed, solver {tol, max_iter},
 * options (experiment specific).
 */
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Solve;
    std::string name;
    int n = 1;
    double p = 3.0;
    double gamma = 0.0;
    nlohmann::json domain;
    std::vector<double> epsilons;
    HRule h_rule;
    PayoffSpec payoff;
    std::uint64_t seed = 1;
    double tol = 1e-10;
    std::size_t max_iter = 5'000'000;
    nlohmann::json options = nlohmann::json::object();
    nlohmann::json resolved;

    GameParams params(double eps) const { return GameParams{p, n, gamma, eps}; }

    /// Hash of the resolved config without seed and thread count, so reruns
    /// that only vary those share it.
    std::string config_hash() const {
        nlohmann::json j = resolved;
        j.erase("seed");
        j.erase("threads");
        char buf[20];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
        return buf;
    }

    nlohmann::json provenance() const {
        return {{"version", kVersion}, {"config_hash", config_hash()}, {"seed", seed}};
    }

    void set_seed(std::uint64_t s) {
        seed = s;
        resolved["seed"] = s;
    }

    template <class T>
    T option(const char* key, T fallback) const {
        return options.contains(key) ? options.at(key).get<T>() : fallback;
    }

    static ExperimentConfig from_json(const nlohmann::json& user, std::optional<ExperimentKind> expected = {},
                                      const std::string& base_dir = ".") {
        static const std::vector<std::string> allowed = {
            "schema_version", "experiment", "scenario", "name",   "dimension", "p",       "gamma",  "domain",
            "epsilons",       "h_rule",     "payoff",   "seed",   "threads",   "solver",  "options"};
        if (!user.is_object()) throw std::invalid_argument("config must be a JSON object");
        for (const auto& [key, _] : user.items())
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
                throw std::invalid_argument("unknown config key '" + key + "'");
        if (!user.contains("schema_version")) throw std::invalid_argument("config needs schema_version");
        if (user.at("schema_version").get<int>() != kSchemaVersion)
            throw std::invalid_argument("unsupported schema_version " + user.at("schema_version").dump());

        nlohmann::json j = user.contains("scenario") ? scenario_defaults(user.at("scenario").get<std::string>())
                                                     : nlohmann::json::object();
        j.merge_patch(user);
        if (expected) {
            if (j.contains("experiment") && experiment_kind_from_string(j.at("experiment").get<std::string>()) != *expected)
                throw std::invalid_argument("config experiment '" + j.at("experiment").get<std::string>() +
                                            "' does not match the requested '" + to_string(*expected) + "'");
            j["experiment"] = to_string(*expected);
        }
        if (!j.contains("experiment")) throw std::invalid_argument("config needs an experiment kind");
        for (const char* key : {"dimension", "p", "gamma", "domain", "epsilons"})
            if (!j.contains(key)) throw std::invalid_argument(std::string("config needs '") + key + "'");
        if (!j.contains("h_rule")) j["h_rule"] = HRule{}.to_json();
        if (!j.contains("payoff")) j["payoff"] = PayoffSpec{}.to_json();
        if (!j.contains("seed")) j["seed"] = 1;
        if (!j.contains("options")) j["options"] = nlohmann::json::object();
        if (!j.contains("name")) j["name"] = j.value("scenario", std::string(j.at("experiment").get<std::string>()));

        ExperimentConfig c;
        c.kind = experiment_kind_from_string(j.at("experiment").get<std::string>());
        c.name = j.at("name").get<std::string>();
        c.n = j.at("dimension").get<int>();
        if (c.n < 1 || c.n > 3) throw std::invalid_argument("dimension must be 1, 2 or 3");
        c.p = j.at("p").get<double>();
        c.gamma = j.at("gamma").get<double>();
        c.domain = j.at("domain");
        c.epsilons = j.at("epsilons").get<std::vector<double>>();
        if (c.epsilons.empty()) throw std::invalid_argument("epsilons must be nonempty");
        c.h_rule = HRule::from_json(j.at("h_rule"));
        c.payoff = PayoffSpec::from_json(j.at("payoff"), base_dir);
        c.payoff.check_dimension(c.n);
        j["payoff"] = c.payoff.to_json();
        c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("solver")) {
            c.tol = j.at("solver").value("tol", c.tol);
            c.max_iter = j.at("solver").value("max_iter", c.max_iter);
        }
        j["solver"] = {{"tol", c.tol}, {"max_iter", c.max_iter}};
        c.options = j.at("options");
        if (!c.options.is_object()) throw std::invalid_argument("options must be an object");

        // Every sweep point must satisfy the hypotheses before anything runs.
        for (double eps : c.epsilons) {
            c.params(eps).validate();
            const double h = c.h_rule(eps);
            if (h > 0.25 * eps * (1.0 + 1e-12))
                throw std::invalid_argument("h_rule gives h > eps/4 at eps = " + std::to_string(eps));
        }
        c.resolved = std::move(j);
        return c;
    }
};

}  // namespace towgame
