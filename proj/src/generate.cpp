#include "psar/generate.hpp"

#include <algorithm>
#include <cmath>

namespace psar {

void GenerationConfig::validate(int horizon) const {
    if (num_samples < 1) throw std::invalid_argument("generation config: num_samples must be positive");
    if (truncation) {
        if (*truncation < 1) throw std::invalid_argument("generation config: truncation must be positive");
        if (*truncation > horizon)
            throw std::invalid_argument("generation config: truncation must not exceed the horizon");
    }
}

namespace {

struct RowSpec {
    ArmPrior prior;
    SufficientStats start;
    int gen_count = 0;
};

// Lockstep autoregressive generation across rows. Each step samples one
// outcome for every unfinished row; outcomes feed straight back into the
// row's conditioning state. Returns the per-row sums of generated outcomes;
// if `collect` is given, also stores the outcomes per row in order.
std::vector<long long> run_rows(const SequenceModel& model, std::vector<RowSpec> specs, Rng& rng,
                                std::vector<std::vector<int>>* collect) {
    const size_t n = specs.size();
    std::vector<ArmPrior> priors;
    std::vector<SufficientStats> starts;
    priors.reserve(n);
    starts.reserve(n);
    int max_steps = 0;
    for (auto& s : specs) {
        priors.push_back(std::move(s.prior));
        starts.push_back(s.start);
        max_steps = std::max(max_steps, s.gen_count);
    }
    auto sampler = model.make_batch_sampler(std::move(priors), std::move(starts));
    std::vector<long long> sums(n, 0);
    if (collect) collect->assign(n, {});
    std::vector<double> probs(n);
    std::vector<int> ys(n);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int step = 0; step < max_steps; ++step) {
        sampler->probs(probs);
        for (size_t i = 0; i < n; ++i) {
            if (step < specs[i].gen_count) {
                ys[i] = u(rng) < probs[i] ? 1 : 0;
                sums[i] += ys[i];
                if (collect) (*collect)[i].push_back(ys[i]);
            } else {
                ys[i] = -1;
            }
        }
        sampler->push(ys);
    }
    return sums;
}

}  // namespace

ImputedTable impute_table(const SequenceModel& model, const History& history, int horizon,
                          Rng& rng) {
    const int num_actions = history.num_actions();
    if (num_actions < 1) throw std::invalid_argument("impute_table: history carries no actions");
    for (const Record& r : history.records())
        if (r.time > horizon) throw std::invalid_argument("impute_table: history extends past horizon");

    ImputedTable out(num_actions, horizon);
    std::vector<RowSpec> specs(static_cast<size_t>(num_actions));
    std::vector<std::vector<int>> missing(static_cast<size_t>(num_actions));
    std::vector<std::vector<std::pair<int, int>>> observed(static_cast<size_t>(num_actions));
    for (const Record& r : history.records())
        observed[static_cast<size_t>(r.action)].push_back({r.time - 1, r.outcome});

    for (int a = 0; a < num_actions; ++a) {
        auto& spec = specs[static_cast<size_t>(a)];
        spec.prior = model.arm_prior(history.priors()[static_cast<size_t>(a)]);
        std::vector<bool> seen(static_cast<size_t>(horizon), false);
        for (auto [t, y] : observed[static_cast<size_t>(a)]) {
            spec.start.push(y);
            seen[static_cast<size_t>(t)] = true;
            out.table.set(a, t, y);
            out.provenance[static_cast<size_t>(a) * horizon + t] = Provenance::observed;
        }
        for (int t = 0; t < horizon; ++t)
            if (!seen[static_cast<size_t>(t)]) missing[static_cast<size_t>(a)].push_back(t);
        spec.gen_count = static_cast<int>(missing[static_cast<size_t>(a)].size());
    }

    std::vector<std::vector<int>> generated;
    run_rows(model, std::move(specs), rng, &generated);
    for (int a = 0; a < num_actions; ++a)
        for (size_t i = 0; i < missing[static_cast<size_t>(a)].size(); ++i)
            out.table.set(a, missing[static_cast<size_t>(a)][i], generated[static_cast<size_t>(a)][i]);
    return out;
}

std::vector<double> sample_all_arm_means(const SequenceModel& model, const History& history,
                                         int horizon, std::optional<int> truncation, Rng& rng) {
    const int num_actions = history.num_actions();
    if (num_actions < 1) throw std::invalid_argument("sample_all_arm_means: history carries no actions");
    std::vector<RowSpec> specs(static_cast<size_t>(num_actions));
    std::vector<double> base(static_cast<size_t>(num_actions), 0.0);
    std::vector<double> denom(static_cast<size_t>(num_actions), 1.0);
    for (int a = 0; a < num_actions; ++a) {
        auto& spec = specs[static_cast<size_t>(a)];
        spec.prior = model.arm_prior(history.priors()[static_cast<size_t>(a)]);
        spec.start = stats_of(history, a);
        if (truncation) {
            // Truncated mode: average of m fresh continuations only.
            spec.gen_count = *truncation;
            denom[static_cast<size_t>(a)] = static_cast<double>(*truncation);
        } else {
            if (spec.start.n > horizon)
                throw std::invalid_argument("sample_all_arm_means: more observations than horizon");
            spec.gen_count = horizon - spec.start.n;
            base[static_cast<size_t>(a)] = static_cast<double>(spec.start.s);
            denom[static_cast<size_t>(a)] = static_cast<double>(horizon);
        }
    }
    std::vector<long long> sums = run_rows(model, std::move(specs), rng, nullptr);
    std::vector<double> means(static_cast<size_t>(num_actions));
    for (int a = 0; a < num_actions; ++a)
        means[static_cast<size_t>(a)] =
            (base[static_cast<size_t>(a)] + sums[static_cast<size_t>(a)]) / denom[static_cast<size_t>(a)];
    return means;
}

std::vector<double> sample_arm_means(const SequenceModel& model, const PriorFeatures& z,
                                     const SufficientStats& observed, int horizon,
                                     std::optional<int> truncation, int k, Rng& rng) {
    if (k < 1) throw std::invalid_argument("sample_arm_means: need at least one sample");
    ArmPrior prior = model.arm_prior(z);
    std::vector<RowSpec> specs(static_cast<size_t>(k));
    double base = 0.0, denom = 1.0;
    for (auto& spec : specs) {
        spec.prior = prior;
        spec.start = observed;
        if (truncation) {
            spec.gen_count = *truncation;
        } else {
            if (observed.n > horizon)
                throw std::invalid_argument("sample_arm_means: more observations than horizon");
            spec.gen_count = horizon - observed.n;
        }
    }
    if (truncation) {
        denom = static_cast<double>(*truncation);
    } else {
        base = static_cast<double>(observed.s);
        denom = static_cast<double>(horizon);
    }
    std::vector<long long> sums = run_rows(model, std::move(specs), rng, nullptr);
    std::vector<double> means(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) means[static_cast<size_t>(i)] = (base + sums[static_cast<size_t>(i)]) / denom;
    return means;
}

double posterior_mean_sample(const SequenceModel& model, const History& history, int action,
                             int horizon, const GenerationConfig& config, Rng& rng) {
    config.validate(horizon);
    if (action < 0 || action >= history.num_actions())
        throw std::out_of_range("posterior_mean_sample: action out of range");
    return sample_arm_means(model, history.priors()[static_cast<size_t>(action)],
                            stats_of(history, action), horizon, config.truncation, 1, rng)[0];
}

CredibleInterval credible_interval(std::vector<double> samples, double level) {
    if (samples.size() < 2) throw std::invalid_argument("credible_interval: need at least 2 samples");
    if (!(level > 0.0) || !(level < 1.0))
        throw std::invalid_argument("credible_interval: level must lie in (0,1)");
    std::sort(samples.begin(), samples.end());
    double tail = (1.0 - level) / 2.0;
    return {quantile_sorted(samples, tail), quantile_sorted(samples, 1.0 - tail)};
}

}  // namespace psar
