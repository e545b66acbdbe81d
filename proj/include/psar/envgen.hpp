#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psar/core.hpp"
#include "psar/util.hpp"

namespace psar {

// Mixture of two Beta priors over the per-action success rate; features
// Z1, Z2 ~ Uniform(feature_low, feature_high) steer the component shapes.
struct MixtureBetaBernoulliConfig {
    double feature_low = 0.0;
    double feature_high = 0.25;
    double concentration = 25.0;
    double mixture_weight = 0.5;

    void validate() const;
    // Beta parameters of each mixture branch given the features.
    // k = 0: Beta(c*z1/4 + 1, c*(1 - z1/4) + 1); k = 1 mirrors with z2.
    void component_params(const PriorFeatures& z, int k, double* alpha, double* beta) const;
};

// Scalar Z ~ Uniform(0,1); success rate mu ~ Beta(Z*scale + 1, (1-Z)*scale + 1).
struct EmpiricalBayesConfig {
    double prior_scale = 5.0;

    void validate() const;
    void beta_params(double z, double* alpha, double* beta) const;
};

enum class Split { train, validation };

struct ActionEntry {
    std::string action_id;
    PriorFeatures features;
    std::vector<int> outcomes;
};

// Offline dataset: one entry per action with its feature vector and the
// sequence of observed binary outcomes.
struct ActionDataset {
    std::vector<ActionEntry> entries;
    Split split = Split::train;

    int size() const { return static_cast<int>(entries.size()); }
    int feature_dim() const { return entries.empty() ? 0 : entries.front().features.dim(); }
};

struct LatentMixtureState {
    double mu = 0.0;
    int component = 0;  // mixture branch that was drawn
};

struct SampledTask {
    BanditTask task;
    std::vector<LatentMixtureState> latents;
};

// A distribution over bandit tasks (actions iid across arms).
class TaskSampler {
  public:
    virtual ~TaskSampler() = default;
    virtual SampledTask sample(int num_actions, int horizon, Rng& rng) const = 0;
    virtual PriorFeatures sample_features(Rng& rng) const = 0;
    virtual int feature_dim() const = 0;
};

class MixtureTaskSampler : public TaskSampler {
  public:
    explicit MixtureTaskSampler(MixtureBetaBernoulliConfig config);
    SampledTask sample(int num_actions, int horizon, Rng& rng) const override;
    PriorFeatures sample_features(Rng& rng) const override;
    int feature_dim() const override { return 2; }
    const MixtureBetaBernoulliConfig& config() const { return config_; }

  private:
    MixtureBetaBernoulliConfig config_;
};

class EmpiricalBayesTaskSampler : public TaskSampler {
  public:
    explicit EmpiricalBayesTaskSampler(EmpiricalBayesConfig config);
    SampledTask sample(int num_actions, int horizon, Rng& rng) const override;
    PriorFeatures sample_features(Rng& rng) const override;
    int feature_dim() const override { return 1; }
    const EmpiricalBayesConfig& config() const { return config_; }

  private:
    EmpiricalBayesConfig config_;
};

// mu ~ Beta(alpha, beta) per arm, constant dummy feature. This is the
// data-generating process matched by a fixed Beta-Bernoulli predictive.
class FixedBetaTaskSampler : public TaskSampler {
  public:
    FixedBetaTaskSampler(double alpha, double beta);
    SampledTask sample(int num_actions, int horizon, Rng& rng) const override;
    PriorFeatures sample_features(Rng&) const override { return PriorFeatures({0.0}); }
    int feature_dim() const override { return 1; }

  private:
    double alpha_, beta_;
};

// Semi-synthetic environment built from an offline dataset: arm success
// rates are the actions' normalized empirical click rates, outcomes are
// Bernoulli draws. Arms within a task are drawn without replacement.
class DatasetTaskSampler : public TaskSampler {
  public:
    explicit DatasetTaskSampler(const ActionDataset& dataset);
    SampledTask sample(int num_actions, int horizon, Rng& rng) const override;
    PriorFeatures sample_features(Rng& rng) const override;
    int feature_dim() const override;
    const std::vector<double>& rates() const { return rates_; }

  private:
    std::vector<PriorFeatures> features_;
    std::vector<double> rates_;  // normalized
};

SampledTask sample_mixture_task(const MixtureBetaBernoulliConfig& config, int num_actions,
                                int horizon, Rng& rng);
SampledTask sample_empirical_bayes_task(const EmpiricalBayesConfig& config, int num_actions,
                                        int horizon, Rng& rng);

// Center the click rates on the logit scale. Rates of exactly 0 or 1 pass
// through unchanged and are excluded from the mean logit.
std::vector<double> normalize_click_rates(const std::vector<double>& rates);

// iid draws with replacement from the empirical distribution of `outcomes`.
std::vector<int> bootstrap_sequence(std::span<const int> outcomes, int target_length, Rng& rng);

// CSV schema: header `action_id,features,outcomes`; `features` is a
// semicolon-joined list of decimals, `outcomes` a string over {0,1}.
// Entries with fewer than `min_impressions` outcomes are filtered out.
ActionDataset load_action_dataset(const std::string& path, int min_impressions = 100);
void save_action_dataset(const std::string& path, const ActionDataset& dataset);

// One fresh action per entry, outcome sequences of length `horizon`.
ActionDataset build_offline_dataset(const TaskSampler& sampler, int num_actions, int horizon,
                                    Rng& rng);

// Assign each entry to validation with probability `validation_fraction`,
// reproducibly under `seed`.
std::pair<ActionDataset, ActionDataset> split_dataset(const ActionDataset& dataset,
                                                      double validation_fraction,
                                                      std::uint64_t seed);

}  // namespace psar
