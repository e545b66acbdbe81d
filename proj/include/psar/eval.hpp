#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "psar/core.hpp"
#include "psar/envgen.hpp"
#include "psar/generate.hpp"
#include "psar/policies.hpp"
#include "psar/seqmodel.hpp"
#include "psar/util.hpp"

namespace psar {

// A policy entry in an experiment: registry name, output label, and the
// dependencies needed to build a fresh instance per episode.
struct PolicySpec {
    std::string name;
    std::string label;
    PolicyContext context;

    PolicySpec(std::string n, PolicyContext ctx) : name(std::move(n)), label(name), context(ctx) {}
    PolicySpec(std::string n, std::string l, PolicyContext ctx)
        : name(std::move(n)), label(std::move(l)), context(ctx) {}
};

struct RegretCurve {
    std::string policy;
    int horizon = 0;
    // Indexed [rep][t]; instantaneous regret is the hindsight mean gap of
    // the chosen arm, so cumulative regret is non-decreasing.
    std::vector<std::vector<double>> instant;
    std::vector<std::vector<double>> cumulative;
    // Realized per-period regret of each episode (best hindsight arm total
    // minus collected rewards, divided by T).
    std::vector<double> episode_regret;

    MeanSe mean_cumulative_at(int t) const;  // 1-based timestep
    MeanSe mean_episode_regret() const;
};

// CSV schema: policy,rep,t,instant_regret,cum_regret
void write_regret_csv(std::ostream& out, const std::vector<RegretCurve>& curves);

struct RegretExperimentConfig {
    int num_actions = 10;
    int horizon = 500;
    int reps = 200;
    std::uint64_t base_seed = 0;
    int threads = 0;  // 0 = hardware concurrency
};

// Fresh task per replication, shared across policies within a replication
// for variance reduction; independent rng streams per (rep, policy).
std::vector<RegretCurve> run_regret_experiment(const std::vector<PolicySpec>& policies,
                                               const TaskSampler& sampler,
                                               const RegretExperimentConfig& config);

struct EpisodeResult {
    std::vector<int> actions;
    std::vector<double> instant;
    double regret = 0.0;  // per-period, realized
};

EpisodeResult run_episode(Policy& policy, const BanditTask& task, Rng& rng);

struct CoverageCell {
    std::string model;
    int t_obs = 0;
    double level = 0.0;
    double coverage = 0.0;
    double coverage_se = 0.0;
    double mean_width = 0.0;
    double width_se = 0.0;
};

// CSV schema: model,t_obs,level,coverage,coverage_se,mean_width,width_se
void write_coverage_csv(std::ostream& out, const std::vector<CoverageCell>& cells);

struct CoverageConfig {
    std::vector<int> t_obs = {0, 5, 10, 25};
    std::vector<double> levels = {0.8};
    int num_samples = 250;
    std::uint64_t seed = 0;
    int threads = 0;
};

// Per held-out action: condition on the first t_obs outcomes of the true
// row, draw posterior mean samples (full-table mode), build percentile
// intervals, and record hit/miss against the row's true mean.
std::vector<CoverageCell> run_coverage_experiment(
    const std::vector<std::pair<std::string, const SequenceModel*>>& models,
    const ActionDataset& heldout, const CoverageConfig& config);

struct CheckResult {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;  // rhs - lhs (plus any stated tolerance)
    bool pass = false;
};

// One line per check: check_name,lhs,rhs,margin,pass
void write_check_line(std::ostream& out, const CheckResult& r);

// Excess loss equals the average KL between joint sequence laws; lhs is
// accumulated per prediction step, rhs from whole-sequence probabilities.
CheckResult check_loss_kl_identity(const SequenceModel& model, const SequenceModel& truth,
                                   const ZAtoms& zs, int horizon, double tol = 1e-10);

struct Prop1Result {
    std::vector<double> lhs_per_t;  // E KL( law(imputed table | H) || law(table | H) )
    double rhs = 0.0;               // num_actions * excess loss
    bool holds = false;
    double pushforward_lhs = 0.0;   // KL between induced arm-mean laws at t = 1
};

// Exhaustive enumeration of histories under ts_psar(model) in the true
// environment, and of all table completions. Requires small T and |A|.
Prop1Result check_prop1_bound(const SequenceModel& model, const SequenceModel& truth,
                              const std::vector<PriorFeatures>& zs, int horizon,
                              double tol = 1e-9);

// Max over enumerable histories of the total variation between the action
// distribution of ts_psar(model) and the posterior law of the hindsight
// best action under `truth`.
CheckResult check_prob_matching(const SequenceModel& model, const SequenceModel& truth,
                                const std::vector<PriorFeatures>& zs, int horizon,
                                double tol = 1e-9);

// Bandit simulator induced by a sequence model plus the true Z marginal:
// the k-th play of an arm is drawn conditioned on its first k-1 outcomes.
class SimulatedEnvironment {
  public:
    SimulatedEnvironment(const SequenceModel& model, std::vector<PriorFeatures> zs);

    int num_actions() const { return static_cast<int>(zs_.size()); }
    const std::vector<PriorFeatures>& priors() const { return zs_; }
    int play(int action, Rng& rng);  // outcome of the next play of `action`
    int play_count(int action) const;
    // Extends every stream to `horizon` and returns the play-count table.
    PotentialOutcomesTable full_table(int horizon, Rng& rng);

  private:
    const SequenceModel* model_;
    std::vector<PriorFeatures> zs_;
    std::vector<ArmPrior> arm_priors_;
    std::vector<SufficientStats> stats_;
    std::vector<std::vector<int>> streams_;
};

// One episode against the simulator; regret is measured on the play-count
// table (hindsight best row vs realized rewards).
EpisodeResult run_simulated_episode(SimulatedEnvironment& env, Policy& policy, int horizon,
                                    Rng& rng);

struct SimToRealResult {
    MeanSe real;
    MeanSe sim;
    double penalty = 0.0;
    double penalty_se = 0.0;
    bool holds = false;
};

struct SimToRealConfig {
    int num_actions = 2;
    int horizon = 5;
    int reps = 2000;
    std::uint64_t seed = 0;
    int threads = 0;
    std::optional<ZAtoms> exact_z;  // exact excess loss when set (horizon <= 10)
    int excess_mc_samples = 20000;  // otherwise Monte Carlo
};

// Deployment regret is bounded by simulator regret plus the sub-optimal
// simulator penalty sqrt(|A|/2 * excess loss).
SimToRealResult check_sim_to_real(const std::string& policy_name, const SequenceModel& model,
                                  const SequenceModel& truth, const TaskSampler& truth_sampler,
                                  const SimToRealConfig& config);

struct LowerBoundRow {
    int horizon = 0;
    MeanSe true_prior_regret;
    MeanSe misspecified_regret;
    double prior_kl = 0.0;  // D(nu* || nu_theta) on the risky branch
};

// Safe/Risky two-feature instance with latent success probability in
// {1/4, 1/2, 3/4}; exact-posterior Thompson sampling under the true and
// the misspecified prior (risky upside believed to have probability 1/T^2).
std::vector<LowerBoundRow> run_lower_bound_instance(const std::vector<int>& horizons, int reps,
                                                    int num_actions, std::uint64_t seed,
                                                    int threads = 0);

struct OptimumGapResult {
    MeanSe gap;     // E max_a |mu_infinity - mu_T|
    double bound = 0.0;  // sqrt(2 log|A| / T)
    bool holds = false;
};

OptimumGapResult check_optimum_gap(const TaskSampler& sampler, int num_actions, int horizon,
                                   int reps, std::uint64_t seed);

}  // namespace psar
