#pragma once

#include <optional>
#include <vector>

#include "psar/core.hpp"
#include "psar/seqmodel.hpp"
#include "psar/util.hpp"

namespace psar {

struct GenerationConfig {
    std::optional<int> truncation;  // generate only m continuation outcomes
    int num_samples = 1;
    std::uint64_t seed = 0;

    void validate(int horizon) const;
};

enum class Provenance : std::uint8_t { observed, generated };

// A fully imputed potential-outcomes table plus per-entry provenance.
struct ImputedTable {
    PotentialOutcomesTable table;
    std::vector<Provenance> provenance;  // row-major, matching the table

    ImputedTable(int num_actions, int horizon)
        : table(num_actions, horizon),
          provenance(static_cast<size_t>(num_actions) * horizon, Provenance::generated) {}

    Provenance provenance_at(int action, int t) const {
        return provenance[static_cast<size_t>(action) * table.horizon() + t];
    }
};

// Autoregressive imputation of every missing table entry: per action,
// observed entries are placed first (by timestep), then each missing entry
// is sampled conditioned on everything already placed in that row.
ImputedTable impute_table(const SequenceModel& model, const History& history, int horizon,
                          Rng& rng);

// One posterior sample of an arm's mean reward. Full mode averages all
// horizon entries (observed and generated); truncated mode averages exactly
// m freshly generated continuation outcomes and ignores observed rewards.
double posterior_mean_sample(const SequenceModel& model, const History& history, int action,
                             int horizon, const GenerationConfig& config, Rng& rng);

// One joint imputation: a posterior mean sample for every arm, sharing the
// lockstep generation pass. Equivalent to imputing a single table and
// reading off the row means.
std::vector<double> sample_all_arm_means(const SequenceModel& model, const History& history,
                                         int horizon, std::optional<int> truncation, Rng& rng);

// k independent posterior mean samples for one arm.
std::vector<double> sample_arm_means(const SequenceModel& model, const PriorFeatures& z,
                                     const SufficientStats& observed, int horizon,
                                     std::optional<int> truncation, int k, Rng& rng);

struct CredibleInterval {
    double lo = 0.0;
    double hi = 0.0;
    double width() const { return hi - lo; }
    bool contains(double x) const { return x >= lo && x <= hi; }
};

// Central empirical-quantile interval at the given level.
CredibleInterval credible_interval(std::vector<double> samples, double level);

}  // namespace psar
