#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "psar/core.hpp"
#include "psar/envgen.hpp"
#include "psar/generate.hpp"
#include "psar/neural.hpp"
#include "psar/seqmodel.hpp"
#include "psar/util.hpp"

namespace psar {

// An online decision rule. Instances are confined to a single episode;
// the experiment harness creates a fresh policy per task.
class Policy {
  public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    virtual int select_action(const History& history, Rng& rng) = 0;
    // Called after each observation; most policies read everything they
    // need from the history instead.
    virtual void observe(const History& history, const Record& r, Rng& rng) {
        (void)history;
        (void)r;
        (void)rng;
    }
};

struct BayesUcbConfig {
    int num_generations = 100;
    void validate() const {
        if (num_generations < 2) throw std::invalid_argument("bayes-ucb: need k >= 2 generations");
    }
};

struct EnsembleConfig {
    int num_members = 50;
    bool bootstrap = true;
    double prior_scale = 0.0;  // 0 disables the frozen prior networks
    std::vector<int> hidden = {50, 50, 50};
    double learning_rate = 1e-3;
    double weight_decay = 0.01;

    void validate() const {
        if (num_members < 2) throw std::invalid_argument("ensemble: need at least 2 members");
    }
};

// Independently initialized MLP heads predicting an arm's success rate
// from Z, optionally offset by frozen randomly-initialized prior networks.
class Ensemble {
  public:
    Ensemble(int feature_dim, EnsembleConfig config, Rng& rng);

    // Offline training: each member fits (optionally bootstrap-resampled)
    // per-action mean rates by log loss.
    void train_offline(const ActionDataset& data, int epochs, int batch_size, Rng& rng);

    double predict(int member, const PriorFeatures& z) const;
    // One observation: each member takes a single gradient step on it,
    // included with probability 1/2 (online bootstrap).
    void update(const PriorFeatures& z, int outcome, Rng& rng);

    int num_members() const { return static_cast<int>(members_.size()); }
    const EnsembleConfig& config() const { return config_; }
    double member_disagreement(const PriorFeatures& z) const;  // sd of member predictions
    Mlp& member(int i) { return members_[static_cast<size_t>(i)]; }

    Ensemble(const Ensemble&) = default;
    Ensemble& operator=(const Ensemble&) = default;

  private:
    EnsembleConfig config_;
    std::vector<Mlp> members_;
    std::vector<Mlp> prior_nets_;
    std::vector<AdamW> optimizers_;
};

// Thompson sampling via one joint autoregressive imputation per step.
class TsPsarPolicy : public Policy {
  public:
    TsPsarPolicy(std::string name, const SequenceModel& model, int horizon,
                 std::optional<int> truncation = std::nullopt, bool force_truncation = false);
    std::string name() const override { return name_; }
    int select_action(const History& history, Rng& rng) override;

  private:
    std::string name_;
    const SequenceModel* model_;
    int horizon_;
    std::optional<int> truncation_;
    bool force_truncation_;
};

// BayesUCB: per arm the ceil(q_t k)-th smallest of k imputed means, with
// q_t = 1 - 1/(t log T).
class BayesUcbPsarPolicy : public Policy {
  public:
    BayesUcbPsarPolicy(const SequenceModel& model, int horizon, BayesUcbConfig config,
                       std::optional<int> truncation = std::nullopt);
    std::string name() const override { return "bayes_ucb_psar"; }
    int select_action(const History& history, Rng& rng) override;

    static double quantile_level(int t, int horizon);
    static int order_index(double q, int k);  // 1-based

  private:
    const SequenceModel* model_;
    int horizon_;
    BayesUcbConfig config_;
    std::optional<int> truncation_;
};

// Beta-Bernoulli Thompson sampling with a uniform prior (ignores Z).
class TsUniformBbPolicy : public Policy {
  public:
    std::string name() const override { return "ts_uniform_bb"; }
    int select_action(const History& history, Rng& rng) override;
};

class UcbPolicy : public Policy {
  public:
    explicit UcbPolicy(double delta = 0.1, double sigma = 0.5);
    std::string name() const override { return "ucb"; }
    int select_action(const History& history, Rng& rng) override;
    static double bonus_width(int n, int num_actions, double delta, double sigma);

  private:
    double delta_, sigma_;
};

// Thompson sampling from per-arm conjugate Gaussian posteriors.
class TsNeuralLinearPolicy : public Policy {
  public:
    explicit TsNeuralLinearPolicy(const GaussianGaussianModel& model);
    std::string name() const override { return "ts_neural_linear"; }
    int select_action(const History& history, Rng& rng) override;

  private:
    const GaussianGaussianModel* model_;
};

// Approximate Thompson sampling: act greedily on one uniformly drawn
// ensemble member; members take online bootstrap gradient steps.
class TsEnsemblePolicy : public Policy {
  public:
    explicit TsEnsemblePolicy(Ensemble ensemble);
    std::string name() const override { return "ts_ensemble"; }
    int select_action(const History& history, Rng& rng) override;
    void observe(const History& history, const Record& r, Rng& rng) override;
    const Ensemble& ensemble() const { return ensemble_; }

  private:
    Ensemble ensemble_;
};

// Deliberately broken: a single sampled next outcome per arm (no
// averaging) drowns the decision in aleatoric noise.
class BrokenOneRewardPolicy : public Policy {
  public:
    explicit BrokenOneRewardPolicy(const SequenceModel& model);
    std::string name() const override { return "broken_one_reward"; }
    int select_action(const History& history, Rng& rng) override;

  private:
    const SequenceModel* model_;
};

// Deliberately broken: averages k independent draws of the next outcome
// with no write-back, collapsing to a greedy rule as k grows.
class BrokenMeanPolicy : public Policy {
  public:
    BrokenMeanPolicy(const SequenceModel& model, int k);
    std::string name() const override { return "broken_mean"; }
    int select_action(const History& history, Rng& rng) override;

  private:
    const SequenceModel* model_;
    int k_;
};

// Dependencies available to the registry when instantiating a policy.
struct PolicyContext {
    int horizon = 0;
    const SequenceModel* model = nullptr;
    const GaussianGaussianModel* gaussian = nullptr;
    const Ensemble* ensemble = nullptr;
    std::optional<int> truncation;
    bool force_truncation = false;
    BayesUcbConfig bayes_ucb;
    int broken_mean_draws = 100;
    double ucb_delta = 0.1;
    double ucb_sigma = 0.5;
};

// Registry keyed by the policy names used in config files.
std::unique_ptr<Policy> make_policy(const std::string& name, const PolicyContext& ctx);
std::vector<std::string> policy_names();

int argmax_lowest(const std::vector<double>& values);
int argmax_uniform(const std::vector<double>& values, Rng& rng);

}  // namespace psar
