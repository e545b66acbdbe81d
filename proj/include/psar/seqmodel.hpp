#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "psar/core.hpp"
#include "psar/envgen.hpp"
#include "psar/neural.hpp"
#include "psar/util.hpp"

namespace psar {

// Sufficient statistics of an exchangeable binary outcome sequence.
// mean is 0 at n = 0 by convention; inv = 1/(1+n) distinguishes the
// empty history.
struct SufficientStats {
    int n = 0;
    int s = 0;

    SufficientStats() = default;
    SufficientStats(int n_, int s_) : n(n_), s(s_) {
        if (n < 0 || s < 0 || s > n) throw std::invalid_argument("SufficientStats: need 0 <= s <= n");
    }

    double mean() const { return n == 0 ? 0.0 : static_cast<double>(s) / n; }
    double inv() const { return 1.0 / (1.0 + n); }
    void push(int y) {
        n += 1;
        s += y;
    }
};

SufficientStats stats_of(const History& history, int action);

// Per-arm precomputation (e.g. Beta parameters produced by the feature
// nets); lets sequential generation avoid re-encoding Z at every step.
struct ArmPrior {
    std::vector<double> v;
};

// Stateful lockstep sampler over a set of rows, one predictive per row.
// Rows are conditioned via push(); y = -1 leaves a row untouched.
class BatchRowSampler {
  public:
    virtual ~BatchRowSampler() = default;
    virtual int size() const = 0;
    virtual void probs(std::span<double> out) const = 0;
    virtual void push(std::span<const int> ys) = 0;
};

// A predictive distribution p(Y_next = 1 | Z, outcomes so far). All
// implementations condition on past outcomes only through (n, s).
class SequenceModel {
  public:
    virtual ~SequenceModel() = default;
    virtual std::string kind() const = 0;

    virtual ArmPrior arm_prior(const PriorFeatures& z) const = 0;
    virtual double predict_with_prior(const ArmPrior& prior, const SufficientStats& st) const = 0;

    double predict_next(const PriorFeatures& z, const SufficientStats& st) const {
        return predict_with_prior(arm_prior(z), st);
    }

    // Default sampler re-evaluates predict_with_prior per row and step;
    // models override for batched or incremental evaluation.
    virtual std::unique_ptr<BatchRowSampler> make_batch_sampler(
        std::vector<ArmPrior> priors, std::vector<SufficientStats> starts) const;

    virtual void save(std::ostream& out) const = 0;
};

// Beta-Bernoulli predictive with fixed prior parameters (uniform prior by
// default, which ignores Z entirely).
class FixedBetaBernoulliModel : public SequenceModel {
  public:
    explicit FixedBetaBernoulliModel(double alpha = 1.0, double beta = 1.0);
    std::string kind() const override { return "fixed_beta_bernoulli"; }
    ArmPrior arm_prior(const PriorFeatures&) const override { return {}; }
    double predict_with_prior(const ArmPrior&, const SufficientStats& st) const override;
    void save(std::ostream& out) const override;
    double alpha() const { return alpha_; }
    double beta() const { return beta_; }

  private:
    double alpha_, beta_;
};

// Learned models expose their parameter nets plus a per-sequence loss
// gradient for the offline training loop.
class TrainableModel {
  public:
    virtual ~TrainableModel() = default;
    virtual std::vector<Mlp*> nets() = 0;
    virtual std::vector<const Mlp*> nets() const = 0;
    // Negative log likelihood of one outcome sequence; parameter gradients
    // are accumulated into `grads` (one entry per net, same order as nets()).
    virtual double sequence_nll_grad(const PriorFeatures& z, std::span<const int> ys,
                                     std::vector<MlpGradients>& grads) const = 0;
};

struct BetaBernoulliNnOptions {
    std::vector<int> hidden = {50, 50, 50};
    double param_floor = 1e-6;
};

// Conjugate Beta-Bernoulli predictive whose prior parameters are produced
// by two feature nets: p = (alpha(Z)+s) / (alpha(Z)+beta(Z)+n).
class BetaBernoulliNnModel : public SequenceModel, public TrainableModel {
  public:
    BetaBernoulliNnModel(int feature_dim, BetaBernoulliNnOptions opt, Rng& rng);
    BetaBernoulliNnModel(Mlp alpha_net, Mlp beta_net, double param_floor);

    std::string kind() const override { return "beta_bernoulli_nn"; }
    ArmPrior arm_prior(const PriorFeatures& z) const override;
    double predict_with_prior(const ArmPrior& prior, const SufficientStats& st) const override;
    void save(std::ostream& out) const override;

    std::vector<Mlp*> nets() override { return {&alpha_net_, &beta_net_}; }
    std::vector<const Mlp*> nets() const override { return {&alpha_net_, &beta_net_}; }
    double sequence_nll_grad(const PriorFeatures& z, std::span<const int> ys,
                             std::vector<MlpGradients>& grads) const override;

    static BetaBernoulliNnModel load(std::istream& in);

  private:
    Mlp alpha_net_, beta_net_;
    double param_floor_ = 1e-6;
};

struct FlexibleNnOptions {
    std::vector<int> hidden = {50, 50, 50};
    int stat_repeats = 10;       // 100 in the dataset-driven setting
    double prob_clamp = 1e-6;    // output clamped to [clamp, 1-clamp]
};

// MLP over [Z ; repeated copies of (mean, 1/(1+n))] with sigmoid output.
class FlexibleNnModel : public SequenceModel, public TrainableModel {
  public:
    FlexibleNnModel(int feature_dim, FlexibleNnOptions opt, Rng& rng);
    FlexibleNnModel(Mlp net, int feature_dim, int stat_repeats, double prob_clamp);

    std::string kind() const override { return "flexible_nn"; }
    ArmPrior arm_prior(const PriorFeatures& z) const override;
    double predict_with_prior(const ArmPrior& prior, const SufficientStats& st) const override;
    std::unique_ptr<BatchRowSampler> make_batch_sampler(
        std::vector<ArmPrior> priors, std::vector<SufficientStats> starts) const override;
    void save(std::ostream& out) const override;

    std::vector<Mlp*> nets() override { return {&net_}; }
    std::vector<const Mlp*> nets() const override { return {&net_}; }
    double sequence_nll_grad(const PriorFeatures& z, std::span<const int> ys,
                             std::vector<MlpGradients>& grads) const override;

    int feature_dim() const { return feature_dim_; }
    int stat_repeats() const { return stat_repeats_; }
    double prob_clamp() const { return prob_clamp_; }

    void fill_input_row(Eigen::MatrixXd& x, int row, std::span<const double> z,
                        const SufficientStats& st) const;

    static FlexibleNnModel load(std::istream& in);

  private:
    Mlp net_;
    int feature_dim_ = 0;
    int stat_repeats_ = 10;
    double prob_clamp_ = 1e-6;
};

// Exact posterior predictive of a mixture of Beta priors whose component
// parameters are known functions of Z. Mixture weights are tracked in log
// space with log-Beta functions.
class BetaMixtureModel : public SequenceModel {
  public:
    struct Component {
        double log_weight;
        double alpha;
        double beta;
    };
    using ComponentFn = std::function<std::vector<Component>(const PriorFeatures&)>;

    BetaMixtureModel(std::string kind, ComponentFn components);

    std::string kind() const override { return kind_; }
    ArmPrior arm_prior(const PriorFeatures& z) const override;
    double predict_with_prior(const ArmPrior& prior, const SufficientStats& st) const override;
    std::unique_ptr<BatchRowSampler> make_batch_sampler(
        std::vector<ArmPrior> priors, std::vector<SufficientStats> starts) const override;
    void save(std::ostream& out) const override;

    // Posterior component weights given (n, s).
    std::vector<double> posterior_weights(const ArmPrior& prior, const SufficientStats& st) const;

  private:
    std::string kind_;
    ComponentFn components_;
};

// Oracle for the mixture Beta-Bernoulli process.
std::unique_ptr<BetaMixtureModel> make_mixture_oracle(const MixtureBetaBernoulliConfig& config);
// Oracle for the empirical-Bayes process (single Beta component).
std::unique_ptr<BetaMixtureModel> make_empirical_bayes_oracle(const EmpiricalBayesConfig& config);

// Bernoulli success probability drawn from a finite set of atoms whose
// prior weights depend on Z.
class DiscreteMixtureModel : public SequenceModel {
  public:
    using WeightFn = std::function<std::vector<double>(const PriorFeatures&)>;

    DiscreteMixtureModel(std::string kind, std::vector<double> atoms, WeightFn weights);

    std::string kind() const override { return kind_; }
    ArmPrior arm_prior(const PriorFeatures& z) const override;
    double predict_with_prior(const ArmPrior& prior, const SufficientStats& st) const override;
    void save(std::ostream& out) const override;

    const std::vector<double>& atoms() const { return atoms_; }
    // Posterior atom weights given (n, s).
    std::vector<double> posterior_weights(const ArmPrior& prior, const SufficientStats& st) const;

  private:
    std::string kind_;
    std::vector<double> atoms_;
    WeightFn weights_;
};

// Wraps a model, shifting every predictive by `delta` (then clamping).
// Used as a controlled negative in theory checks.
class PerturbedModel : public SequenceModel {
  public:
    PerturbedModel(const SequenceModel& inner, double delta, double clamp = 1e-6);
    std::string kind() const override { return "perturbed:" + inner_->kind(); }
    ArmPrior arm_prior(const PriorFeatures& z) const override { return inner_->arm_prior(z); }
    double predict_with_prior(const ArmPrior& prior, const SufficientStats& st) const override;
    void save(std::ostream& out) const override;

  private:
    const SequenceModel* inner_;
    double delta_, clamp_;
};

// Constant predictive, independent of Z and history (iid Bernoulli(p)).
class ConstantModel : public SequenceModel {
  public:
    explicit ConstantModel(double p);
    std::string kind() const override { return "constant"; }
    ArmPrior arm_prior(const PriorFeatures&) const override { return {}; }
    double predict_with_prior(const ArmPrior&, const SufficientStats&) const override { return p_; }
    void save(std::ostream& out) const override;

  private:
    double p_;
};

// Gaussian prior on the arm mean with a learned prior mean g(Z) and fixed
// variances (sigma^2 = 1 prior, s^2 = 0.25 observation).
class GaussianGaussianModel : public TrainableModel {
  public:
    GaussianGaussianModel(int feature_dim, std::vector<int> hidden, Rng& rng);
    GaussianGaussianModel(Mlp net, double prior_var, double obs_var);

    double prior_mean(const PriorFeatures& z) const;  // g(Z), a success rate
    double prior_var() const { return prior_var_; }
    double obs_var() const { return obs_var_; }

    std::vector<Mlp*> nets() override { return {&net_}; }
    std::vector<const Mlp*> nets() const override { return {&net_}; }
    double sequence_nll_grad(const PriorFeatures& z, std::span<const int> ys,
                             std::vector<MlpGradients>& grads) const override;

    void save(std::ostream& out) const;
    static GaussianGaussianModel load(std::istream& in);

  private:
    Mlp net_;
    double prior_var_ = 1.0;
    double obs_var_ = 0.25;
};

struct GaussianPosterior {
    double mean = 0.0;
    double var = 0.0;
};

// Conjugate Gaussian-Gaussian update of the arm-mean posterior.
GaussianPosterior neural_linear_posterior(const GaussianGaussianModel& model,
                                          const PriorFeatures& z, const SufficientStats& st);

// Sum over t of log p(y_t | Z, stats of y_{1:t-1}).
double sequence_log_likelihood(const SequenceModel& model, const PriorFeatures& z,
                               std::span<const int> outcomes);

struct DatasetLoss {
    double total = 0.0;        // negated log likelihood summed over entries
    double per_outcome = 0.0;  // total divided by the number of outcomes
};

DatasetLoss dataset_loss(const SequenceModel& model, const ActionDataset& dataset);

// Discrete Z marginal for exact computations.
struct ZAtoms {
    std::vector<PriorFeatures> points;
    std::vector<double> weights;
};

// E_Z KL( truth(Y_{1:T} | Z) || model(Y_{1:T} | Z) ) by enumeration of all
// 2^T sequences. Requires horizon <= 20.
double excess_loss_exact(const SequenceModel& model, const SequenceModel& truth, const ZAtoms& zs,
                         int horizon);

// Monte Carlo estimate of l(model) - l(truth) from sampled tasks.
MeanSe excess_loss_mc(const SequenceModel& model, const SequenceModel& truth,
                      const TaskSampler& z_source, int horizon, int num_samples, Rng& rng);

void save_model(std::ostream& out, const SequenceModel& model);
void save_model_file(const std::string& path, const SequenceModel& model);
// Loads models that have a self-contained serialized form (the learned
// ones plus fixed/constant predictives).
std::unique_ptr<SequenceModel> load_model(std::istream& in);
std::unique_ptr<SequenceModel> load_model_file(const std::string& path);

}  // namespace psar
