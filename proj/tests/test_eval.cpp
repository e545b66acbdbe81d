#include "doctest.h"

#include <cmath>
#include <sstream>

#include "psar/eval.hpp"

using namespace psar;

TEST_CASE("loss-kl identity by enumeration") {
    ZAtoms z1{{PriorFeatures({0.0})}, {1.0}};
    SUBCASE("model equals truth: both sides vanish") {
        FixedBetaBernoulliModel uniform;
        CheckResult r = check_loss_kl_identity(uniform, uniform, z1, 4);
        CHECK(r.pass);
        CHECK(std::abs(r.lhs) < 1e-12);
        CHECK(std::abs(r.rhs) < 1e-12);
    }
    SUBCASE("urn truth vs fair coin at T=2 equals the four-sequence value") {
        FixedBetaBernoulliModel truth;
        ConstantModel coin(0.5);
        CheckResult r = check_loss_kl_identity(coin, truth, z1, 2);
        double expected = (2.0 / 3.0) * std::log(4.0 / 3.0) + (1.0 / 3.0) * std::log(2.0 / 3.0);
        CHECK(r.pass);
        CHECK(r.lhs == doctest::Approx(expected).epsilon(1e-10));
        CHECK(r.rhs == doctest::Approx(expected).epsilon(1e-10));
    }
    SUBCASE("identity holds under a two-atom Z distribution") {
        EmpiricalBayesConfig cfg;
        auto truth = make_empirical_bayes_oracle(cfg);
        FixedBetaBernoulliModel uniform;
        ZAtoms z2{{PriorFeatures({0.2}), PriorFeatures({0.8})}, {0.3, 0.7}};
        CheckResult r = check_loss_kl_identity(uniform, *truth, z2, 6);
        CHECK(r.pass);
        CHECK(r.lhs > 0.0);
    }
}

TEST_CASE("proposition-1 style bound by exhaustive enumeration") {
    std::vector<PriorFeatures> zs{PriorFeatures({0.0}), PriorFeatures({0.0})};
    FixedBetaBernoulliModel truth;
    SUBCASE("model equals truth: zero degradation at every t") {
        Prop1Result r = check_prop1_bound(truth, truth, zs, 3);
        CHECK(r.holds);
        for (double lhs : r.lhs_per_t) CHECK(std::abs(lhs) < 1e-12);
        CHECK(std::abs(r.rhs) < 1e-12);
    }
    SUBCASE("perturbed model: bound holds with strict slack") {
        PerturbedModel shifted(truth, 0.05);
        Prop1Result r = check_prop1_bound(shifted, truth, zs, 3);
        CHECK(r.holds);
        CHECK(r.rhs > 0.0);
        for (double lhs : r.lhs_per_t) {
            CHECK(lhs >= -1e-12);
            CHECK(lhs <= r.rhs + 1e-9);
        }
        // Data-processing: the induced arm-mean laws are closer than the
        // table laws.
        CHECK(r.pushforward_lhs <= r.rhs + 1e-9);
        CHECK(r.pushforward_lhs <= r.lhs_per_t[0] + 1e-12);
    }
}

TEST_CASE("probability matching: generation law equals bayes conditioning") {
    SUBCASE("uniform model on its own urn process") {
        std::vector<PriorFeatures> zs{PriorFeatures({0.0}), PriorFeatures({0.0})};
        FixedBetaBernoulliModel uniform;
        CheckResult r = check_prob_matching(uniform, uniform, zs, 3);
        CHECK(r.pass);
        CHECK(r.lhs < 1e-9);
    }
    SUBCASE("mixture oracle on its own process") {
        MixtureBetaBernoulliConfig cfg;
        auto oracle = make_mixture_oracle(cfg);
        std::vector<PriorFeatures> zs{PriorFeatures({0.07, 0.21}), PriorFeatures({0.18, 0.02})};
        CheckResult r = check_prob_matching(*oracle, *oracle, zs, 3);
        CHECK(r.pass);
        CHECK(r.lhs < 1e-9);
    }
    SUBCASE("perturbed model reports positive total variation") {
        std::vector<PriorFeatures> zs{PriorFeatures({0.0}), PriorFeatures({0.0})};
        FixedBetaBernoulliModel uniform;
        PerturbedModel shifted(uniform, 0.05);
        CheckResult r = check_prob_matching(shifted, uniform, zs, 3);
        CHECK_FALSE(r.pass);
        CHECK(r.lhs > 1e-4);
    }
}

TEST_CASE("simulated environment draws each play from the arm's chain") {
    FixedBetaBernoulliModel uniform;
    std::vector<PriorFeatures> zs{PriorFeatures({0.0})};
    SimulatedEnvironment env(uniform, zs);
    Rng rng(3);
    CHECK(env.play_count(0) == 0);
    env.play(0, rng);
    env.play(0, rng);
    CHECK(env.play_count(0) == 2);
    PotentialOutcomesTable table = env.full_table(6, rng);
    CHECK(table.fully_observed());
    CHECK(env.play_count(0) == 6);
}

TEST_CASE("simulator with the truth model reproduces the urn row-sum law") {
    FixedBetaBernoulliModel uniform;
    Rng rng(5);
    const int n = 60000;
    std::vector<int> counts(3, 0);
    for (int i = 0; i < n; ++i) {
        SimulatedEnvironment env(uniform, {PriorFeatures({0.0})});
        PotentialOutcomesTable t = env.full_table(2, rng);
        counts[static_cast<size_t>(t.entry(0, 0) + t.entry(0, 1))] += 1;
    }
    double se = std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / n);
    for (int k = 0; k < 3; ++k)
        CHECK(std::abs(counts[static_cast<size_t>(k)] / static_cast<double>(n) - 1.0 / 3.0) <
              3.0 * se);
}

TEST_CASE("sim-to-real bound") {
    FixedBetaBernoulliModel truth;
    FixedBetaTaskSampler sampler(1.0, 1.0);
    SimToRealConfig cfg;
    cfg.num_actions = 2;
    cfg.horizon = 5;
    cfg.reps = 4000;
    cfg.seed = 11;
    cfg.exact_z = ZAtoms{{PriorFeatures({0.0})}, {1.0}};
    SUBCASE("model equals truth: zero penalty, matching regret") {
        SimToRealResult r = check_sim_to_real("ts_psar", truth, truth, sampler, cfg);
        CHECK(r.penalty == doctest::Approx(0.0));
        CHECK(r.holds);
        double gap = std::abs(r.real.mean - r.sim.mean);
        CHECK(gap < 3.0 * std::sqrt(r.real.se * r.real.se + r.sim.se * r.sim.se));
    }
    SUBCASE("fair-coin model against the urn truth") {
        ConstantModel coin(0.5);
        SimToRealResult r = check_sim_to_real("ts_psar", coin, truth, sampler, cfg);
        CHECK(r.penalty > 0.0);
        CHECK(r.holds);
    }
}

TEST_CASE("regret experiment harness") {
    FixedBetaBernoulliModel uniform;
    FixedBetaTaskSampler sampler(1.0, 1.0);
    RegretExperimentConfig cfg;
    cfg.num_actions = 2;
    cfg.horizon = 20;
    cfg.reps = 30;
    cfg.base_seed = 13;
    cfg.threads = 2;
    PolicyContext ctx;
    ctx.model = &uniform;
    std::vector<PolicySpec> specs;
    specs.emplace_back("ts_psar", ctx);
    specs.emplace_back("ts_uniform_bb", ctx);
    SUBCASE("curves are complete and cumulative regret is non-decreasing") {
        auto curves = run_regret_experiment(specs, sampler, cfg);
        REQUIRE(curves.size() == 2);
        for (const auto& c : curves) {
            REQUIRE(static_cast<int>(c.instant.size()) == cfg.reps);
            for (const auto& rep : c.cumulative) {
                REQUIRE(static_cast<int>(rep.size()) == cfg.horizon);
                for (size_t t = 1; t < rep.size(); ++t) CHECK(rep[t] >= rep[t - 1] - 1e-15);
            }
            MeanSe last = c.mean_cumulative_at(cfg.horizon);
            CHECK(last.mean >= 0.0);
            CHECK(last.mean <= cfg.horizon);
        }
    }
    SUBCASE("identical configuration reproduces results exactly") {
        auto c1 = run_regret_experiment(specs, sampler, cfg);
        auto c2 = run_regret_experiment(specs, sampler, cfg);
        CHECK(c1[0].episode_regret == c2[0].episode_regret);
        CHECK(c1[1].cumulative == c2[1].cumulative);
    }
    SUBCASE("single-arm tasks give zero regret") {
        RegretExperimentConfig one = cfg;
        one.num_actions = 1;
        auto curves = run_regret_experiment(specs, sampler, one);
        for (const auto& c : curves)
            for (double r : c.episode_regret) CHECK(r == doctest::Approx(0.0));
    }
}

TEST_CASE("regret csv format") {
    FixedBetaBernoulliModel uniform;
    FixedBetaTaskSampler sampler(1.0, 1.0);
    RegretExperimentConfig cfg;
    cfg.num_actions = 2;
    cfg.horizon = 3;
    cfg.reps = 2;
    cfg.base_seed = 17;
    PolicyContext ctx;
    ctx.model = &uniform;
    auto curves = run_regret_experiment({PolicySpec("ts_psar", ctx)}, sampler, cfg);
    std::ostringstream out;
    write_regret_csv(out, curves);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "policy,rep,t,instant_regret,cum_regret");
    int rows = 0;
    while (std::getline(in, line)) rows += 1;
    CHECK(rows == 2 * 3);
}

TEST_CASE("coverage experiment") {
    FixedBetaBernoulliModel uniform;
    FixedBetaTaskSampler sampler(1.0, 1.0);
    Rng rng(19);
    const int T = 60;
    ActionDataset heldout = build_offline_dataset(sampler, 600, T, rng);
    SUBCASE("exact bayes model is approximately calibrated") {
        CoverageConfig cfg;
        cfg.t_obs = {0, 5};
        cfg.levels = {0.8};
        cfg.num_samples = 250;
        cfg.seed = 21;
        cfg.threads = 2;
        auto cells = run_coverage_experiment({{"uniform", &uniform}}, heldout, cfg);
        REQUIRE(cells.size() == 2);
        for (const auto& cell : cells) {
            CHECK(std::abs(cell.coverage - 0.8) < 0.06);
            CHECK(cell.mean_width > 0.0);
        }
    }
    SUBCASE("nominal consistency at a high level") {
        CoverageConfig cfg;
        cfg.t_obs = {0};
        cfg.levels = {0.99};
        cfg.num_samples = 500;
        cfg.seed = 23;
        auto cells = run_coverage_experiment({{"uniform", &uniform}}, heldout, cfg);
        CHECK(cells[0].coverage >= 0.95);
    }
    SUBCASE("degenerate model yields zero-width intervals hitting only sure rows") {
        ConstantModel ones(1.0 - 1e-12);
        CoverageConfig cfg;
        cfg.t_obs = {0};
        cfg.levels = {0.8};
        cfg.num_samples = 100;
        cfg.seed = 25;
        auto cells = run_coverage_experiment({{"ones", &ones}}, heldout, cfg);
        CHECK(cells[0].mean_width == doctest::Approx(0.0));
        double all_ones = 0.0;
        for (const auto& e : heldout.entries) {
            bool sure = true;
            for (int y : e.outcomes) sure = sure && (y == 1);
            all_ones += sure ? 1.0 : 0.0;
        }
        CHECK(cells[0].coverage == doctest::Approx(all_ones / heldout.size()));
    }
    SUBCASE("t_obs beyond the horizon is rejected") {
        CoverageConfig cfg;
        cfg.t_obs = {T};
        CHECK_THROWS_AS(run_coverage_experiment({{"uniform", &uniform}}, heldout, cfg),
                        std::invalid_argument);
    }
    SUBCASE("coverage csv format") {
        CoverageConfig cfg;
        cfg.t_obs = {0};
        cfg.levels = {0.8};
        cfg.num_samples = 50;
        cfg.seed = 27;
        auto cells = run_coverage_experiment({{"uniform", &uniform}}, heldout, cfg);
        std::ostringstream out;
        write_coverage_csv(out, cells);
        CHECK(out.str().rfind("model,t_obs,level,coverage,coverage_se,mean_width,width_se\n", 0) ==
              0);
    }
}

TEST_CASE("lower bound instance: misspecified priors keep paying") {
    auto rows = run_lower_bound_instance({40, 200}, 1200, 2, /*seed=*/31, /*threads=*/2);
    REQUIRE(rows.size() == 2);
    // True-prior TS improves with the horizon.
    CHECK(rows[1].true_prior_regret.mean < rows[0].true_prior_regret.mean);
    // Misspecified TS stays stuck near its constant per-period regret.
    for (const auto& row : rows) {
        CHECK(row.misspecified_regret.mean >= 0.04);
        CHECK(row.misspecified_regret.mean >
              row.true_prior_regret.mean + 2.0 * row.misspecified_regret.se);
    }
    // Two-atom prior KL in closed form.
    double t = 40.0;
    double expected = 0.5 * std::log(0.5 * t * t) + 0.5 * std::log(0.5 / (1.0 - 1.0 / (t * t)));
    CHECK(rows[0].prior_kl == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("finite vs infinite population gap obeys the maximal inequality") {
    MixtureTaskSampler sampler{MixtureBetaBernoulliConfig{}};
    SUBCASE("holds at a moderate scale") {
        OptimumGapResult r = check_optimum_gap(sampler, 2, 200, 400, 33);
        CHECK(r.holds);
        CHECK(r.bound == doctest::Approx(std::sqrt(2.0 * std::log(2.0) / 200.0)));
    }
    SUBCASE("gap shrinks with the horizon") {
        OptimumGapResult a = check_optimum_gap(sampler, 4, 100, 400, 35);
        OptimumGapResult b = check_optimum_gap(sampler, 4, 1000, 400, 35);
        CHECK(b.gap.mean < a.gap.mean);
    }
}

TEST_CASE("check line format") {
    CheckResult r;
    r.name = "demo";
    r.lhs = 1.0;
    r.rhs = 2.0;
    r.margin = 1.0;
    r.pass = true;
    std::ostringstream out;
    write_check_line(out, r);
    CHECK(out.str() == "demo,1,2,1,pass\n");
}
