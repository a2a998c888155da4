#include <cmath>

#include <gtest/gtest.h>

#include "towgame/experiments.hpp"

using namespace towgame;
using nlohmann::json;

namespace {

ExperimentConfig config(json j, ExperimentKind kind) {
    j["schema_version"] = 1;
    return ExperimentConfig::from_json(j, kind);
}

json small_disc() {
    return {{"dimension", 2},
            {"p", 4.0},
            {"gamma", 0.5},
            {"domain", {{"kind", "ball"}, {"center", {0.0, 0.0}}, {"radius", 1.0}}},
            {"epsilons", {0.4, 0.2}},
            {"payoff", {{"kind", "constant"}, {"value", 1.0}}}};
}

const Assertion* find(const RunOutput& out, const std::string& name) {
    for (const auto& a : out.assertions)
        if (a.name == name) return &a;
    return nullptr;
}

}  // namespace

TEST(Config, ScenarioDefaultsAndOverrides) {
    const auto c = config({{"scenario", "figure1"}, {"epsilons", {0.2}}}, ExperimentKind::Converge);
    EXPECT_EQ(c.n, 1);
    EXPECT_DOUBLE_EQ(c.p, 3.0);
    EXPECT_DOUBLE_EQ(c.gamma, 0.25);
    ASSERT_EQ(c.epsilons.size(), 1u);
    EXPECT_DOUBLE_EQ(c.h_rule(0.2), 1.25 * 0.04);
    EXPECT_EQ(c.resolved.at("experiment"), "converge");
}

TEST(Config, RejectsLargeDiscountBeforeRunning) {
    auto j = small_disc();
    j["gamma"] = 3.0;
    j["epsilons"] = {0.1, 0.5};  // gamma eps^2 = 0.75 at the second point
    EXPECT_THROW(config(j, ExperimentKind::Solve), std::invalid_argument);
}

TEST(Config, RejectsMalformedInput) {
    EXPECT_THROW(ExperimentConfig::from_json(small_disc(), ExperimentKind::Solve), std::invalid_argument);
    auto j = small_disc();
    j["schema_version"] = 2;
    EXPECT_THROW(ExperimentConfig::from_json(j, ExperimentKind::Solve), std::invalid_argument);
    EXPECT_THROW(config({{"scenario", "figure1"}, {"epsilon", 0.1}}, ExperimentKind::Solve), std::invalid_argument);
    EXPECT_THROW(config({{"scenario", "nope"}}, ExperimentKind::Solve), std::invalid_argument);
    EXPECT_THROW(config({{"scenario", "figure1"}, {"experiment", "simulate"}}, ExperimentKind::Solve), std::invalid_argument);
    EXPECT_THROW(config({{"scenario", "figure1"}, {"payoff", {{"kind", "zigzag"}}}}, ExperimentKind::Solve),
                 std::invalid_argument);
    EXPECT_THROW(config({{"scenario", "figure1"}, {"payoff", {{"kind", "affine"}, {"a", {1.0, 2.0}}}}}, ExperimentKind::Solve),
                 std::invalid_argument);
    EXPECT_THROW(config({{"scenario", "figure1"}, {"h_rule", {{"kind", "ratio"}, {"c", 0.5}}}}, ExperimentKind::Solve),
                 std::invalid_argument);
}

TEST(Config, HashIgnoresSeedAndThreads) {
    auto a = config({{"scenario", "figure1"}}, ExperimentKind::Converge);
    auto b = config({{"scenario", "figure1"}, {"threads", 8}}, ExperimentKind::Converge);
    b.set_seed(99);
    EXPECT_EQ(a.config_hash(), b.config_hash());
    EXPECT_EQ(b.provenance().at("seed"), 99);
    const auto c = config({{"scenario", "figure1"}, {"gamma", 0.3}}, ExperimentKind::Converge);
    EXPECT_NE(a.config_hash(), c.config_hash());
}

TEST(Payoff, PresetsAndLipschitzConstants) {
    auto aff = PayoffSpec::from_json({{"kind", "affine"}, {"a", {3.0, 4.0}}, {"b", 1.0}});
    EXPECT_DOUBLE_EQ(aff.make<2>()(Vec<2>{1.0, 1.0}), 8.0);
    EXPECT_DOUBLE_EQ(aff.lipschitz(), 5.0);
    auto cs = PayoffSpec::from_json({{"kind", "cosine"}, {"amplitude", 2.0}, {"k", {3.0, 4.0}}, {"offset", 0.5}});
    EXPECT_NEAR(cs.make<2>()(Vec<2>{0.0, 0.0}), 2.5, 1e-15);
    EXPECT_DOUBLE_EQ(cs.lipschitz(), 10.0);
    auto smp = PayoffSpec::from_json({{"kind", "samples"}, {"points", {{-1.0}, {1.0}}}, {"values", {0.0, 4.0}}});
    EXPECT_EQ(smp.make<1>()(Vec<1>{0.9}), 4.0);
    EXPECT_EQ(smp.make<1>()(Vec<1>{-0.2}), 0.0);
    EXPECT_DOUBLE_EQ(smp.lipschitz(), 2.0);
    EXPECT_DOUBLE_EQ(PayoffSpec::from_json({{"kind", "constant"}, {"value", 3.0}}).lipschitz(), 0.0);
}

TEST(Experiments, UndiscountedConstantConvergeHasZeroError) {
    auto j = small_disc();
    j["gamma"] = 0.0;
    const auto out = run_experiment(config(j, ExperimentKind::Converge));
    EXPECT_TRUE(out.passed());
    for (const auto& rec : out.results.at("records")) EXPECT_LT(rec.at("sup_error").get<double>(), 1e-8);
}

TEST(Experiments, RegularityOfConstantFieldIsZero) {
    auto j = small_disc();
    j["gamma"] = 0.0;
    j["solver"] = {{"tol", 0.0}};
    const auto out = run_experiment(config(j, ExperimentKind::Regularity));
    EXPECT_TRUE(out.passed());
    for (const auto& rec : out.results.at("records")) EXPECT_LT(rec.at("max_quotient").get<double>(), 1e-14);
}

TEST(Experiments, RegularityPairSamplingCap) {
    auto j = small_disc();
    j["options"] = {{"max_pairs", 500}};
    const auto out = run_experiment(config(j, ExperimentKind::Regularity));
    const auto& rec = out.results.at("records").at(1);
    EXPECT_TRUE(rec.at("sampled").get<bool>());
    EXPECT_EQ(rec.at("pairs").get<std::size_t>(), 500u);
}

TEST(Experiments, BoundaryGapVanishesForConstantData) {
    auto j = small_disc();
    j["gamma"] = 0.0;
    const auto out = run_experiment(config(j, ExperimentKind::Boundary));
    EXPECT_TRUE(out.passed());
    ASSERT_NE(find(out, "constant_data_gap_vanishes[eps=0.2]"), nullptr);
}

TEST(Experiments, BoundarySlopeTracksClosedForm) {
    // u = cosh(x)/cosh(1): the gap 1 - u(1 - d) grows like tanh(1) d near the edge.
    const auto out = run_experiment(config({{"scenario", "figure1"}, {"epsilons", {0.1, 0.05}}, {"options", {{"band", 0.2}}}},
                                           ExperimentKind::Boundary));
    EXPECT_TRUE(out.passed());
    const double slope = out.results.at("records").at(1).at("fit").at("slope").get<double>();
    // Least-squares slope of the exact gap over d in [0, 0.2].
    const Oracle1D U(-1.0, 1.0, 1.0, 1.0, 3.0, 0.25);
    std::vector<double> ds, gs;
    for (int k = 1; k <= 200; ++k) {
        ds.push_back(0.001 * k);
        gs.push_back(1.0 - U(1.0 - 0.001 * k));
    }
    const double exact = fit_line(ds, gs).slope;
    // Curvature of u pulls the fitted slope below tanh(1).
    EXPECT_LT(exact, std::tanh(1.0));
    EXPECT_GT(exact, 0.8 * std::tanh(1.0));
    EXPECT_NEAR(slope, exact, 0.25 * exact);
}

TEST(Experiments, CompareIsExactForUndiscountedConstantData) {
    auto j = small_disc();
    j["gamma"] = 0.0;
    j["options"] = {{"epsilon", 0.2}, {"points", {{0.1, 0.1}}}, {"n_samples", 2000}};
    const auto out = run_experiment(config(j, ExperimentKind::Compare));
    EXPECT_TRUE(out.passed());
    const auto& p = out.results.at("points").at(0);
    EXPECT_EQ(p.at("mc").at("mean").get<double>(), 1.0);
    EXPECT_EQ(p.at("mc").at("std_error").get<double>(), 0.0);
}

TEST(Experiments, SimulateWritesTrajectories) {
    const auto out = run_experiment(config({{"scenario", "figure1"},
                                            {"options", {{"epsilon", 0.1}, {"points", {{0.0}}}, {"n_samples", 500},
                                                         {"trajectories", 3}}}},
                                           ExperimentKind::Simulate));
    EXPECT_TRUE(out.passed());
    const auto& jsonl = out.files.at("trajectories.jsonl");
    EXPECT_EQ(std::count(jsonl.begin(), jsonl.end(), '\n'), 3);
    const auto first = json::parse(jsonl.substr(0, jsonl.find('\n')));
    EXPECT_EQ(first.at("version"), kVersion);
    EXPECT_TRUE(first.contains("config_hash"));
}

TEST(Experiments, ExpansionRunAssertsQuadratics) {
    const auto out = run_experiment(config({{"dimension", 1},
                                            {"p", 3.0},
                                            {"gamma", 0.5},
                                            {"domain", {{"kind", "interval"}, {"a", -1.0}, {"b", 1.0}}},
                                            {"epsilons", {0.1, 0.05, 0.025, 0.0125}}},
                                           ExperimentKind::Expansion));
    EXPECT_TRUE(out.passed());
    EXPECT_NE(find(out, "gap_shrinks[mixed_quadratic]"), nullptr);
}

TEST(Experiments, OutputsCarryProvenance) {
    const auto cfg = config({{"scenario", "figure1"}, {"epsilons", {0.2, 0.1}}}, ExperimentKind::Solve);
    const auto out = run_experiment(cfg);
    const auto manifest = json::parse(out.files.at("manifest.json"));
    EXPECT_EQ(manifest.at("version"), kVersion);
    EXPECT_EQ(manifest.at("config_hash"), cfg.config_hash());
    EXPECT_EQ(manifest.at("seed"), cfg.seed);
    EXPECT_TRUE(manifest.at("passed").get<bool>());
    for (const auto& [name, text] : out.files)
        if (name.ends_with(".csv")) EXPECT_EQ(text.rfind("# towgame " + std::string(kVersion) + " config_hash=" + cfg.config_hash(), 0), 0u) << name;
}

TEST(Experiments, FailingAssertionProducesFailureReport) {
    const auto out = run_experiment(config({{"scenario", "figure1"}, {"epsilons", {0.1}}, {"solver", {{"max_iter", 5}}}},
                                           ExperimentKind::Solve));
    EXPECT_FALSE(out.passed());
    ASSERT_TRUE(out.files.contains("failures.json"));
    const auto report = json::parse(out.files.at("failures.json"));
    EXPECT_FALSE(report.at("failed").empty());
}

TEST(Experiments, NoOracleForGeneralGeometry) {
    auto j = small_disc();
    j["domain"] = {{"kind", "box"}, {"lo", {-1.0, -1.0}}, {"hi", {1.0, 1.0}}};
    EXPECT_THROW(run_experiment(config(j, ExperimentKind::Converge)), std::invalid_argument);
}

TEST(Experiments, ThreadCountDoesNotChangeOutputs) {
    auto j = small_disc();
    j["options"] = {{"epsilon", 0.2}, {"points", {{0.3, 0.1}}}, {"n_samples", 3000},
                    {"supermartingale", {{"horizon", 10}, {"n_samples", 2000}}}};
    const auto cfg = config(j, ExperimentKind::Compare);
    const auto a = run_experiment(cfg, 1);
    const auto b = run_experiment(cfg, 3);
    ASSERT_EQ(a.files.size(), b.files.size());
    for (const auto& [name, text] : a.files) EXPECT_EQ(text, b.files.at(name)) << name;
}

TEST(Experiments, StoppingTimeNeedsAnnulus) {
    EXPECT_THROW(run_experiment(config(small_disc(), ExperimentKind::StoppingTime)), std::invalid_argument);
}
