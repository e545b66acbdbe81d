#include "doctest.h"

#include <cmath>
#include <ostream>

#include "psar/policies.hpp"

using namespace psar;

namespace {

// Predictive fixed at the arm's first feature value, independent of history.
class ZConstantModel : public SequenceModel {
  public:
    std::string kind() const override { return "z_constant"; }
    ArmPrior arm_prior(const PriorFeatures& z) const override { return {{z[0]}}; }
    double predict_with_prior(const ArmPrior& prior, const SufficientStats&) const override {
        return std::min(std::max(prior.v[0], 1e-12), 1.0 - 1e-12);
    }
    void save(std::ostream& out) const override { out << "model z_constant\n"; }
};

History two_arm_history(double z0, double z1) {
    return History(std::vector<PriorFeatures>{PriorFeatures({z0}), PriorFeatures({z1})});
}

}  // namespace

TEST_CASE("ts_psar prefers the arm whose imputations are all ones") {
    ZConstantModel model;
    TsPsarPolicy policy("ts_psar", model, 5);
    History h = two_arm_history(1.0, 0.0);
    Rng rng(1);
    for (int i = 0; i < 50; ++i) CHECK(policy.select_action(h, rng) == 0);
}

TEST_CASE("ts_psar is symmetric on exchangeable arms") {
    // Urn row sums are uniform on {0..T}, so two fresh arms tie with
    // probability 1/(T+1); lowest-index ties push P(arm 0) to
    // 1/2 + 1/(2(T+1)).
    const int T = 100;
    FixedBetaBernoulliModel uniform;
    TsPsarPolicy policy("ts_psar", uniform, T);
    History h = two_arm_history(0.0, 0.0);
    Rng rng(2);
    const int n = 20000;
    int first = 0;
    for (int i = 0; i < n; ++i) first += policy.select_action(h, rng) == 0 ? 1 : 0;
    double expected = 0.5 + 0.5 / (T + 1);
    double se = std::sqrt(expected * (1.0 - expected) / n);
    CHECK(std::abs(first / static_cast<double>(n) - expected) < 3.0 * se);
}

TEST_CASE("ts_psar selection probability matches the imputation enumeration") {
    // T=2, uniform model, arm 0 observed y=1: enumerating the joint
    // imputations gives P(select arm 0) = 8/9 with lowest-index ties.
    FixedBetaBernoulliModel uniform;
    TsPsarPolicy policy("ts_psar", uniform, 2);
    History h = two_arm_history(0.0, 0.0);
    h.add(0, 1);
    Rng rng(3);
    const int n = 20000;
    int first = 0;
    for (int i = 0; i < n; ++i) first += policy.select_action(h, rng) == 0 ? 1 : 0;
    double p = 8.0 / 9.0;
    double se = std::sqrt(p * (1.0 - p) / n);
    CHECK(std::abs(first / static_cast<double>(n) - p) < 3.0 * se);
}

TEST_CASE("bayes-ucb quantile schedule") {
    // t=1, T=100: q = 1 - 1/ln(100), and ceil(q*100) = 79.
    double q = BayesUcbPsarPolicy::quantile_level(1, 100);
    CHECK(q == doctest::Approx(1.0 - 1.0 / std::log(100.0)));
    CHECK(BayesUcbPsarPolicy::order_index(q, 100) == 79);
    // Index never decreases in t at fixed k.
    int prev = 0;
    for (int t = 1; t <= 50; ++t) {
        int idx = BayesUcbPsarPolicy::order_index(BayesUcbPsarPolicy::quantile_level(t, 100), 100);
        CHECK(idx >= prev);
        prev = idx;
    }
    // Degenerate horizon: log T <= 1 pushes the level out of (0,1).
    CHECK_THROWS_AS(BayesUcbPsarPolicy::quantile_level(1, 2), std::domain_error);
}

TEST_CASE("bayes-ucb with degenerate generations reduces to greedy") {
    ZConstantModel model;
    BayesUcbPsarPolicy policy(model, 100, BayesUcbConfig{.num_generations = 10});
    History h = two_arm_history(1.0, 0.0);
    Rng rng(5);
    for (int i = 0; i < 10; ++i) CHECK(policy.select_action(h, rng) == 0);
}

TEST_CASE("uniform-prior thompson sampling") {
    TsUniformBbPolicy policy;
    Rng rng(7);
    SUBCASE("uniform over fresh arms") {
        History h(std::vector<PriorFeatures>(3, PriorFeatures({0.0})));
        const int n = 30000;
        std::vector<int> counts(3, 0);
        for (int i = 0; i < n; ++i) counts[static_cast<size_t>(policy.select_action(h, rng))] += 1;
        double se = std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / n);
        for (int a = 0; a < 3; ++a)
            CHECK(std::abs(counts[static_cast<size_t>(a)] / static_cast<double>(n) - 1.0 / 3.0) <
                  3.0 * se);
    }
    SUBCASE("a dominant arm is selected almost surely") {
        History h = two_arm_history(0.0, 0.0);
        for (int i = 0; i < 100; ++i) h.add(0, 1);
        for (int i = 0; i < 100; ++i) h.add(1, 0);
        int wins = 0;
        for (int i = 0; i < 3000; ++i) wins += policy.select_action(h, rng) == 0 ? 1 : 0;
        CHECK(wins == 3000);
    }
    SUBCASE("single arm is always chosen") {
        History h(std::vector<PriorFeatures>{PriorFeatures({0.0})});
        CHECK(policy.select_action(h, rng) == 0);
    }
}

TEST_CASE("ucb index") {
    SUBCASE("unplayed arms are forced") {
        UcbPolicy policy;
        History h = two_arm_history(0.0, 0.0);
        h.add(0, 1);
        Rng rng(9);
        CHECK(policy.select_action(h, rng) == 1);
    }
    SUBCASE("widths shrink with observations") {
        CHECK(UcbPolicy::bonus_width(100, 2, 0.1, 0.5) < UcbPolicy::bonus_width(10, 2, 0.1, 0.5));
    }
    SUBCASE("closed form at n=1") {
        double expected = 0.5 * std::sqrt(2.0 * (1.0 + 2.0 * std::log(2.0 * std::sqrt(2.0) / 0.1)));
        CHECK(UcbPolicy::bonus_width(1, 2, 0.1, 0.5) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("neural-linear thompson sampling is symmetric at the prior") {
    Rng init(11);
    GaussianGaussianModel model(1, {4}, init);
    for (auto& w : model.nets()[0]->weights()) w.setZero();
    for (auto& b : model.nets()[0]->biases()) b.setZero();
    TsNeuralLinearPolicy policy(model);
    History h(std::vector<PriorFeatures>(3, PriorFeatures({0.5})));
    Rng rng(12);
    const int n = 30000;
    std::vector<int> counts(3, 0);
    for (int i = 0; i < n; ++i) counts[static_cast<size_t>(policy.select_action(h, rng))] += 1;
    double se = std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / n);
    for (int a = 0; a < 3; ++a)
        CHECK(std::abs(counts[static_cast<size_t>(a)] / static_cast<double>(n) - 1.0 / 3.0) < 3.0 * se);
}

TEST_CASE("ensemble policies") {
    Rng init(13);
    EnsembleConfig cfg;
    cfg.num_members = 8;
    cfg.hidden = {6};
    Ensemble ensemble(1, cfg, init);
    SUBCASE("identical members act greedily") {
        Ensemble clone = ensemble;
        for (int m = 1; m < clone.num_members(); ++m) clone.member(m) = clone.member(0);
        History h = two_arm_history(0.9, 0.1);
        int greedy = clone.predict(0, h.priors()[0]) > clone.predict(0, h.priors()[1]) ? 0 : 1;
        TsEnsemblePolicy policy(clone);
        Rng rng(14);
        for (int i = 0; i < 50; ++i) CHECK(policy.select_action(h, rng) == greedy);
    }
    SUBCASE("symmetric arms with equal features are selected uniformly") {
        History h(std::vector<PriorFeatures>(2, PriorFeatures({0.5})));
        TsEnsemblePolicy policy(ensemble);
        Rng rng(15);
        const int n = 20000;
        int first = 0;
        for (int i = 0; i < n; ++i) first += policy.select_action(h, rng) == 0 ? 1 : 0;
        double se = std::sqrt(0.25 / n);
        CHECK(std::abs(first / static_cast<double>(n) - 0.5) < 3.0 * se);
    }
    SUBCASE("member disagreement shrinks under repeated updates") {
        EnsembleConfig fast = cfg;
        fast.learning_rate = 0.05;
        Rng init2(130);
        Ensemble updated(1, fast, init2);
        PriorFeatures z({0.5});
        double before = updated.member_disagreement(z);
        Rng rng(16);
        // All members saturate toward predicting 1 at this arm.
        for (int i = 0; i < 1000; ++i) updated.update(z, 1, rng);
        CHECK(updated.member_disagreement(z) < before);
    }
}

TEST_CASE("broken one-reward selection") {
    SUBCASE("all arms at one half select uniformly") {
        ConstantModel model(0.5);
        BrokenOneRewardPolicy policy(model);
        History h = two_arm_history(0.0, 0.0);
        Rng rng(17);
        const int n = 20000;
        int first = 0;
        for (int i = 0; i < n; ++i) first += policy.select_action(h, rng) == 0 ? 1 : 0;
        double se = std::sqrt(0.25 / n);
        CHECK(std::abs(first / static_cast<double>(n) - 0.5) < 3.0 * se);
    }
    SUBCASE("a sure arm beats a hopeless arm") {
        ZConstantModel model;
        BrokenOneRewardPolicy policy(model);
        History h = two_arm_history(1.0, 0.0);
        Rng rng(18);
        for (int i = 0; i < 50; ++i) CHECK(policy.select_action(h, rng) == 0);
    }
    SUBCASE("four-outcome enumeration under the urn predictive") {
        // (n=10,s=9) vs (n=10,s=1): p0 = 10/12, p1 = 2/12.
        // P(pick worse arm) = (1-p0)p1 + (1/2)(p0 p1 + (1-p0)(1-p1)) = 1/6.
        FixedBetaBernoulliModel uniform;
        BrokenOneRewardPolicy policy(uniform);
        History h = two_arm_history(0.0, 0.0);
        for (int i = 0; i < 10; ++i) h.add(0, i < 9 ? 1 : 0);
        for (int i = 0; i < 10; ++i) h.add(1, i < 1 ? 1 : 0);
        Rng rng(19);
        const int n = 20000;
        int worse = 0;
        for (int i = 0; i < n; ++i) worse += policy.select_action(h, rng) == 1 ? 1 : 0;
        double p = 1.0 / 6.0;
        double se = std::sqrt(p * (1.0 - p) / n);
        CHECK(std::abs(worse / static_cast<double>(n) - p) < 3.0 * se);
    }
}

TEST_CASE("broken mean selection") {
    SUBCASE("large k reduces to greedy on predictive means") {
        FixedBetaBernoulliModel uniform;
        BrokenMeanPolicy policy(uniform, 100000);
        History h = two_arm_history(0.0, 0.0);
        for (int i = 0; i < 10; ++i) h.add(0, i < 9 ? 1 : 0);
        for (int i = 0; i < 10; ++i) h.add(1, i < 1 ? 1 : 0);
        Rng rng(20);
        for (int i = 0; i < 100; ++i) CHECK(policy.select_action(h, rng) == 0);
    }
    SUBCASE("identical predictive means select uniformly") {
        ConstantModel model(0.5);
        BrokenMeanPolicy policy(model, 3);
        History h = two_arm_history(0.0, 0.0);
        Rng rng(21);
        const int n = 20000;
        int first = 0;
        for (int i = 0; i < n; ++i) first += policy.select_action(h, rng) == 0 ? 1 : 0;
        double se = std::sqrt(0.25 / n);
        CHECK(std::abs(first / static_cast<double>(n) - 0.5) < 3.0 * se);
    }
    SUBCASE("k=1 coincides with the one-reward variant draw by draw") {
        FixedBetaBernoulliModel uniform;
        BrokenMeanPolicy mean_policy(uniform, 1);
        BrokenOneRewardPolicy one_policy(uniform);
        History h = two_arm_history(0.0, 0.0);
        h.add(0, 1);
        for (std::uint64_t seed = 0; seed < 300; ++seed) {
            Rng r1(seed), r2(seed);
            CHECK(mean_policy.select_action(h, r1) == one_policy.select_action(h, r2));
        }
    }
}

TEST_CASE("selections replay exactly from the rng stream") {
    FixedBetaBernoulliModel uniform;
    History h = two_arm_history(0.0, 0.0);
    h.add(0, 1);
    h.add(1, 0);
    PolicyContext ctx;
    ctx.horizon = 6;
    ctx.model = &uniform;
    for (const std::string& name :
         {"ts_psar", "ts_uniform_bb", "ucb", "broken_one_reward", "broken_mean"}) {
        auto p1 = make_policy(name, ctx);
        auto p2 = make_policy(name, ctx);
        Rng r1(123), r2(123);
        for (int i = 0; i < 20; ++i) CHECK(p1->select_action(h, r1) == p2->select_action(h, r2));
    }
}

TEST_CASE("policy registry validates its inputs") {
    PolicyContext ctx;
    ctx.horizon = 10;
    CHECK_THROWS_AS(make_policy("ts_psar", ctx), std::invalid_argument);  // no model
    CHECK_THROWS_AS(make_policy("nonsense", ctx), std::invalid_argument);
    FixedBetaBernoulliModel uniform;
    ctx.model = &uniform;
    for (const auto& name : {"ts_psar", "ts_oracle", "ts_uniform_bb", "ucb", "broken_one_reward",
                             "broken_mean", "bayes_ucb_psar"})
        CHECK(make_policy(name, ctx) != nullptr);
    CHECK(policy_names().size() == 9);
}
