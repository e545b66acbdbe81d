#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace psar {

// Per-action prior feature vector (continuous features or a one-hot
// category encoding). Fixed dimension within one experiment.
struct PriorFeatures {
    std::vector<double> values;

    PriorFeatures() = default;
    explicit PriorFeatures(std::vector<double> v);

    int dim() const { return static_cast<int>(values.size()); }
    double operator[](int i) const { return values[static_cast<size_t>(i)]; }
};

// The |A| x T array of binary potential outcomes, with a missingness mask
// (true = entry realized/known). Rows are actions, columns are timesteps.
class PotentialOutcomesTable {
  public:
    PotentialOutcomesTable(int num_actions, int horizon);

    int num_actions() const { return num_actions_; }
    int horizon() const { return horizon_; }

    int entry(int action, int t) const;
    bool known(int action, int t) const;
    void set(int action, int t, int outcome);
    void clear(int action, int t);

    bool fully_observed() const;
    // Known entries of one row, in timestep order.
    std::vector<int> row_known(int action) const;

  private:
    void check_index(int action, int t) const;
    int num_actions_ = 0;
    int horizon_ = 0;
    std::vector<std::uint8_t> entries_;
    std::vector<std::uint8_t> mask_;
};

// A bandit task: prior features per action plus a fully observed table.
struct BanditTask {
    std::vector<PriorFeatures> priors;
    PotentialOutcomesTable table;

    BanditTask(std::vector<PriorFeatures> p, PotentialOutcomesTable t);
};

// One observation: action `action` at timestep `time` yielded `outcome`.
struct Record {
    int time = 0;
    int action = 0;
    int outcome = 0;
};

// Prior features plus the chronological record of observations.
// Timesteps are 1-based, strictly increasing with no gaps.
class History {
  public:
    History() = default;
    explicit History(std::vector<PriorFeatures> priors);

    void add(int action, int outcome);

    const std::vector<PriorFeatures>& priors() const { return priors_; }
    const std::vector<Record>& records() const { return records_; }
    int num_actions() const { return static_cast<int>(priors_.size()); }
    int length() const { return static_cast<int>(records_.size()); }

  private:
    std::vector<PriorFeatures> priors_;
    std::vector<Record> records_;
};

// Rewards are the binary outcomes themselves.
inline double reward(int outcome) { return static_cast<double>(outcome); }

struct ObservedStats {
    int count = 0;
    int successes = 0;
    std::vector<int> outcomes;  // observation order
};

// Mean reward of one fully observed row.
double empirical_mean(const PotentialOutcomesTable& table, int action);

// Argmax of empirical_mean over actions; ties go to the lowest index.
int best_action(const PotentialOutcomesTable& table);

// Count, successes, and ordered outcomes of one action within a history.
ObservedStats observed_stats(const History& history, int action);

// Per-period regret of a played action sequence against the best fixed
// action in hindsight.
double episode_regret(const BanditTask& task, const std::vector<int>& chosen_actions);

}  // namespace psar
