#include "psar/envgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace psar {

void MixtureBetaBernoulliConfig::validate() const {
    if (!(feature_low < feature_high))
        throw std::invalid_argument("mixture config: feature_low must be < feature_high");
    if (!(concentration > 0.0)) throw std::invalid_argument("mixture config: concentration must be positive");
    if (mixture_weight < 0.0 || mixture_weight > 1.0)
        throw std::invalid_argument("mixture config: mixture_weight must lie in [0,1]");
}

void MixtureBetaBernoulliConfig::component_params(const PriorFeatures& z, int k, double* alpha,
                                                  double* beta) const {
    if (z.dim() != 2) throw std::invalid_argument("mixture config: expected 2 features");
    double c = concentration;
    if (k == 0) {
        *alpha = c * (z[0] / 4.0) + 1.0;
        *beta = c * (1.0 - z[0] / 4.0) + 1.0;
    } else if (k == 1) {
        *alpha = c * (1.0 - z[1] / 4.0) + 1.0;
        *beta = c * (z[1] / 4.0) + 1.0;
    } else {
        throw std::out_of_range("mixture config: component index");
    }
}

void EmpiricalBayesConfig::validate() const {
    if (!(prior_scale > 0.0)) throw std::invalid_argument("empirical-bayes config: prior_scale must be positive");
}

void EmpiricalBayesConfig::beta_params(double z, double* alpha, double* beta) const {
    *alpha = z * prior_scale + 1.0;
    *beta = (1.0 - z) * prior_scale + 1.0;
}

namespace {

void fill_row(PotentialOutcomesTable& table, int action, double mu, Rng& rng) {
    for (int t = 0; t < table.horizon(); ++t) table.set(action, t, sample_bernoulli(mu, rng));
}

void check_task_shape(int num_actions, int horizon) {
    if (num_actions < 1) throw std::invalid_argument("task sampler: need at least one action");
    if (horizon < 1) throw std::invalid_argument("task sampler: horizon must be positive");
}

}  // namespace

MixtureTaskSampler::MixtureTaskSampler(MixtureBetaBernoulliConfig config) : config_(config) {
    config_.validate();
}

PriorFeatures MixtureTaskSampler::sample_features(Rng& rng) const {
    std::uniform_real_distribution<double> u(config_.feature_low, config_.feature_high);
    double z1 = u(rng), z2 = u(rng);
    return PriorFeatures({z1, z2});
}

SampledTask MixtureTaskSampler::sample(int num_actions, int horizon, Rng& rng) const {
    check_task_shape(num_actions, horizon);
    std::vector<PriorFeatures> priors;
    std::vector<LatentMixtureState> latents;
    PotentialOutcomesTable table(num_actions, horizon);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int a = 0; a < num_actions; ++a) {
        PriorFeatures z = sample_features(rng);
        int k = (u01(rng) < config_.mixture_weight) ? 0 : 1;
        double alpha, beta;
        config_.component_params(z, k, &alpha, &beta);
        double mu = sample_beta(alpha, beta, rng);
        fill_row(table, a, mu, rng);
        priors.push_back(std::move(z));
        latents.push_back({mu, k});
    }
    return {BanditTask(std::move(priors), std::move(table)), std::move(latents)};
}

EmpiricalBayesTaskSampler::EmpiricalBayesTaskSampler(EmpiricalBayesConfig config) : config_(config) {
    config_.validate();
}

PriorFeatures EmpiricalBayesTaskSampler::sample_features(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return PriorFeatures({u(rng)});
}

SampledTask EmpiricalBayesTaskSampler::sample(int num_actions, int horizon, Rng& rng) const {
    check_task_shape(num_actions, horizon);
    std::vector<PriorFeatures> priors;
    std::vector<LatentMixtureState> latents;
    PotentialOutcomesTable table(num_actions, horizon);
    for (int a = 0; a < num_actions; ++a) {
        PriorFeatures z = sample_features(rng);
        double alpha, beta;
        config_.beta_params(z[0], &alpha, &beta);
        double mu = sample_beta(alpha, beta, rng);
        fill_row(table, a, mu, rng);
        priors.push_back(std::move(z));
        latents.push_back({mu, 0});
    }
    return {BanditTask(std::move(priors), std::move(table)), std::move(latents)};
}

FixedBetaTaskSampler::FixedBetaTaskSampler(double alpha, double beta) : alpha_(alpha), beta_(beta) {
    if (!(alpha > 0.0) || !(beta > 0.0))
        throw std::invalid_argument("fixed-beta sampler: parameters must be positive");
}

SampledTask FixedBetaTaskSampler::sample(int num_actions, int horizon, Rng& rng) const {
    check_task_shape(num_actions, horizon);
    std::vector<PriorFeatures> priors;
    std::vector<LatentMixtureState> latents;
    PotentialOutcomesTable table(num_actions, horizon);
    for (int a = 0; a < num_actions; ++a) {
        double mu = sample_beta(alpha_, beta_, rng);
        fill_row(table, a, mu, rng);
        priors.push_back(PriorFeatures({0.0}));
        latents.push_back({mu, 0});
    }
    return {BanditTask(std::move(priors), std::move(table)), std::move(latents)};
}

DatasetTaskSampler::DatasetTaskSampler(const ActionDataset& dataset) {
    if (dataset.entries.empty()) throw std::invalid_argument("dataset sampler: empty dataset");
    std::vector<double> raw;
    for (const auto& e : dataset.entries) {
        if (e.outcomes.empty()) throw std::invalid_argument("dataset sampler: entry with no outcomes");
        double s = std::accumulate(e.outcomes.begin(), e.outcomes.end(), 0.0);
        raw.push_back(s / e.outcomes.size());
        features_.push_back(e.features);
    }
    rates_ = normalize_click_rates(raw);
}

int DatasetTaskSampler::feature_dim() const { return features_.front().dim(); }

PriorFeatures DatasetTaskSampler::sample_features(Rng& rng) const {
    std::uniform_int_distribution<size_t> pick(0, features_.size() - 1);
    return features_[pick(rng)];
}

SampledTask DatasetTaskSampler::sample(int num_actions, int horizon, Rng& rng) const {
    check_task_shape(num_actions, horizon);
    if (num_actions > static_cast<int>(features_.size()))
        throw std::invalid_argument("dataset sampler: more actions requested than dataset entries");
    // Partial Fisher-Yates draw without replacement.
    std::vector<int> idx(features_.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (int a = 0; a < num_actions; ++a) {
        std::uniform_int_distribution<int> pick(a, static_cast<int>(idx.size()) - 1);
        std::swap(idx[a], idx[pick(rng)]);
    }
    std::vector<PriorFeatures> priors;
    std::vector<LatentMixtureState> latents;
    PotentialOutcomesTable table(num_actions, horizon);
    for (int a = 0; a < num_actions; ++a) {
        double mu = rates_[idx[a]];
        fill_row(table, a, mu, rng);
        priors.push_back(features_[idx[a]]);
        latents.push_back({mu, 0});
    }
    return {BanditTask(std::move(priors), std::move(table)), std::move(latents)};
}

SampledTask sample_mixture_task(const MixtureBetaBernoulliConfig& config, int num_actions,
                                int horizon, Rng& rng) {
    return MixtureTaskSampler(config).sample(num_actions, horizon, rng);
}

SampledTask sample_empirical_bayes_task(const EmpiricalBayesConfig& config, int num_actions,
                                        int horizon, Rng& rng) {
    return EmpiricalBayesTaskSampler(config).sample(num_actions, horizon, rng);
}

std::vector<double> normalize_click_rates(const std::vector<double>& rates) {
    if (rates.empty()) throw std::invalid_argument("normalize_click_rates: empty input");
    double logit_sum = 0.0;
    int interior = 0;
    for (double r : rates) {
        if (r < 0.0 || r > 1.0) throw std::invalid_argument("normalize_click_rates: rate outside [0,1]");
        if (r > 0.0 && r < 1.0) {
            logit_sum += logit(r);
            interior += 1;
        }
    }
    double mean_logit = interior > 0 ? logit_sum / interior : 0.0;
    std::vector<double> out;
    out.reserve(rates.size());
    for (double r : rates) {
        if (r == 0.0 || r == 1.0)
            out.push_back(r);
        else
            out.push_back(inverse_logit(logit(r) - mean_logit));
    }
    return out;
}

std::vector<int> bootstrap_sequence(std::span<const int> outcomes, int target_length, Rng& rng) {
    if (outcomes.empty()) throw std::invalid_argument("bootstrap_sequence: empty source");
    if (target_length < 0) throw std::invalid_argument("bootstrap_sequence: negative target length");
    std::vector<int> out(static_cast<size_t>(target_length));
    std::uniform_int_distribution<size_t> pick(0, outcomes.size() - 1);
    for (int i = 0; i < target_length; ++i) out[static_cast<size_t>(i)] = outcomes[pick(rng)];
    return out;
}

ActionDataset load_action_dataset(const std::string& path, int min_impressions) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    ActionDataset ds;
    std::string line;
    int line_no = 0;
    int feature_dim = -1;
    while (std::getline(in, line)) {
        line_no += 1;
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "action_id,features,outcomes")
                throw std::runtime_error(path + ":1: expected header 'action_id,features,outcomes'");
            continue;
        }
        std::string where = path + ":" + std::to_string(line_no);
        size_t c1 = line.find(',');
        size_t c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw std::runtime_error(where + ": expected 3 comma-separated fields");
        ActionEntry entry;
        entry.action_id = line.substr(0, c1);
        if (entry.action_id.empty()) throw std::runtime_error(where + ": empty action_id");
        std::string feats = line.substr(c1 + 1, c2 - c1 - 1);
        std::string outs = line.substr(c2 + 1);
        std::vector<double> values;
        std::stringstream fs(feats);
        std::string tok;
        while (std::getline(fs, tok, ';')) {
            size_t pos = 0;
            double v;
            try {
                v = std::stod(tok, &pos);
            } catch (const std::exception&) {
                throw std::runtime_error(where + ": bad feature value '" + tok + "'");
            }
            if (pos != tok.size()) throw std::runtime_error(where + ": bad feature value '" + tok + "'");
            values.push_back(v);
        }
        if (values.empty()) throw std::runtime_error(where + ": empty feature list");
        if (feature_dim == -1)
            feature_dim = static_cast<int>(values.size());
        else if (feature_dim != static_cast<int>(values.size()))
            throw std::runtime_error(where + ": inconsistent feature dimension");
        entry.features = PriorFeatures(std::move(values));
        if (outs.empty()) throw std::runtime_error(where + ": empty outcome string");
        for (char ch : outs) {
            if (ch != '0' && ch != '1')
                throw std::runtime_error(where + ": outcome characters must be 0 or 1");
            entry.outcomes.push_back(ch - '0');
        }
        if (static_cast<int>(entry.outcomes.size()) < min_impressions) continue;  // filtered
        ds.entries.push_back(std::move(entry));
    }
    if (line_no == 0) throw std::runtime_error(path + ": empty file");
    return ds;
}

void save_action_dataset(const std::string& path, const ActionDataset& dataset) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    out << "action_id,features,outcomes\n";
    out.precision(17);
    for (const auto& e : dataset.entries) {
        out << e.action_id << ',';
        for (int i = 0; i < e.features.dim(); ++i) {
            if (i) out << ';';
            out << e.features[i];
        }
        out << ',';
        for (int y : e.outcomes) out << (y ? '1' : '0');
        out << '\n';
    }
}

ActionDataset build_offline_dataset(const TaskSampler& sampler, int num_actions, int horizon,
                                    Rng& rng) {
    if (num_actions < 1) throw std::invalid_argument("build_offline_dataset: need at least one action");
    ActionDataset ds;
    char buf[32];
    for (int i = 0; i < num_actions; ++i) {
        SampledTask st = sampler.sample(1, horizon, rng);
        ActionEntry entry;
        std::snprintf(buf, sizeof(buf), "a%06d", i);
        entry.action_id = buf;
        entry.features = st.task.priors[0];
        for (int t = 0; t < horizon; ++t) entry.outcomes.push_back(st.task.table.entry(0, t));
        ds.entries.push_back(std::move(entry));
    }
    return ds;
}

std::pair<ActionDataset, ActionDataset> split_dataset(const ActionDataset& dataset,
                                                      double validation_fraction,
                                                      std::uint64_t seed) {
    if (validation_fraction < 0.0 || validation_fraction >= 1.0)
        throw std::invalid_argument("split_dataset: fraction must lie in [0,1)");
    ActionDataset train, val;
    train.split = Split::train;
    val.split = Split::validation;
    Rng rng = make_rng(seed, 0x5911ULL);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& e : dataset.entries) {
        if (u(rng) < validation_fraction)
            val.entries.push_back(e);
        else
            train.entries.push_back(e);
    }
    return {std::move(train), std::move(val)};
}

}  // namespace psar
