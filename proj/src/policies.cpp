#include "psar/policies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace psar {

int argmax_lowest(const std::vector<double>& values) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i)
        if (values[static_cast<size_t>(i)] > values[static_cast<size_t>(best)]) best = i;
    return best;
}

int argmax_uniform(const std::vector<double>& values, Rng& rng) {
    double best = *std::max_element(values.begin(), values.end());
    std::vector<int> ties;
    for (int i = 0; i < static_cast<int>(values.size()); ++i)
        if (values[static_cast<size_t>(i)] == best) ties.push_back(i);
    if (ties.size() == 1) return ties[0];
    std::uniform_int_distribution<size_t> pick(0, ties.size() - 1);
    return ties[pick(rng)];
}

Ensemble::Ensemble(int feature_dim, EnsembleConfig config, Rng& rng) : config_(config) {
    config_.validate();
    std::vector<int> widths;
    widths.push_back(feature_dim);
    widths.insert(widths.end(), config_.hidden.begin(), config_.hidden.end());
    widths.push_back(1);
    for (int i = 0; i < config_.num_members; ++i) {
        members_.emplace_back(widths, OutputActivation::identity, rng);
        if (config_.prior_scale > 0.0)
            prior_nets_.emplace_back(widths, OutputActivation::identity, rng);
        optimizers_.emplace_back(members_.back(),
                                 AdamW::Options{config_.learning_rate, config_.weight_decay});
    }
}

namespace {
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

double Ensemble::predict(int member, const PriorFeatures& z) const {
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(z.values.data(), z.dim());
    double o = members_[static_cast<size_t>(member)].forward_one(x)(0);
    if (config_.prior_scale > 0.0)
        o += config_.prior_scale * prior_nets_[static_cast<size_t>(member)].forward_one(x)(0);
    return sigmoid(o);
}

double Ensemble::member_disagreement(const PriorFeatures& z) const {
    std::vector<double> preds;
    preds.reserve(members_.size());
    for (int i = 0; i < num_members(); ++i) preds.push_back(predict(i, z));
    double m = 0.0;
    for (double p : preds) m += p;
    m /= preds.size();
    double v = 0.0;
    for (double p : preds) v += (p - m) * (p - m);
    return std::sqrt(v / preds.size());
}

void Ensemble::train_offline(const ActionDataset& data, int epochs, int batch_size, Rng& rng) {
    if (data.entries.empty()) throw std::invalid_argument("ensemble: empty training data");
    for (int i = 0; i < num_members(); ++i) {
        // Per-member bootstrap resample of the actions.
        std::vector<int> idx(data.entries.size());
        if (config_.bootstrap) {
            std::uniform_int_distribution<size_t> pick(0, data.entries.size() - 1);
            for (auto& j : idx) j = static_cast<int>(pick(rng));
        } else {
            std::iota(idx.begin(), idx.end(), 0);
        }
        Mlp& net = members_[static_cast<size_t>(i)];
        AdamW& opt = optimizers_[static_cast<size_t>(i)];
        for (int epoch = 0; epoch < epochs; ++epoch) {
            std::shuffle(idx.begin(), idx.end(), rng);
            for (size_t start = 0; start < idx.size(); start += static_cast<size_t>(batch_size)) {
                size_t end = std::min(idx.size(), start + static_cast<size_t>(batch_size));
                MlpGradients grads = net.zero_gradients();
                for (size_t j = start; j < end; ++j) {
                    const ActionEntry& e = data.entries[static_cast<size_t>(idx[j])];
                    Eigen::MatrixXd x(1, e.features.dim());
                    for (int d = 0; d < e.features.dim(); ++d) x(0, d) = e.features[d];
                    Mlp::Cache cache;
                    double o = net.forward(x, cache)(0, 0);
                    int n = static_cast<int>(e.outcomes.size());
                    int s = 0;
                    for (int y : e.outcomes) s += y;
                    // Per-action mean log loss keeps arms equally weighted.
                    Eigen::MatrixXd up(1, 1);
                    up(0, 0) = sigmoid(o) - static_cast<double>(s) / n;
                    net.backward(cache, up, grads);
                }
                opt.step(net, grads);
            }
        }
    }
}

void Ensemble::update(const PriorFeatures& z, int outcome, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < num_members(); ++i) {
        if (u(rng) >= 0.5) continue;
        Mlp& net = members_[static_cast<size_t>(i)];
        Eigen::MatrixXd x(1, z.dim());
        for (int d = 0; d < z.dim(); ++d) x(0, d) = z[d];
        Mlp::Cache cache;
        double o = net.forward(x, cache)(0, 0);
        MlpGradients grads = net.zero_gradients();
        Eigen::MatrixXd up(1, 1);
        up(0, 0) = sigmoid(o) - outcome;
        net.backward(cache, up, grads);
        optimizers_[static_cast<size_t>(i)].step(net, grads);
    }
}

TsPsarPolicy::TsPsarPolicy(std::string name, const SequenceModel& model, int horizon,
                           std::optional<int> truncation, bool force_truncation)
    : name_(std::move(name)), model_(&model), horizon_(horizon), truncation_(truncation),
      force_truncation_(force_truncation) {
    if (horizon_ < 1) throw std::invalid_argument("ts_psar: horizon must be positive");
}

int TsPsarPolicy::select_action(const History& history, Rng& rng) {
    std::optional<int> trunc = truncation_;
    // Full imputation whenever the horizon fits within the truncation cap.
    if (trunc && !force_truncation_ && horizon_ <= *trunc) trunc = std::nullopt;
    std::vector<double> means = sample_all_arm_means(*model_, history, horizon_, trunc, rng);
    return argmax_lowest(means);
}

double BayesUcbPsarPolicy::quantile_level(int t, int horizon) {
    double q = 1.0 - 1.0 / (t * std::log(static_cast<double>(horizon)));
    if (!(q > 0.0) || !(q < 1.0))
        throw std::domain_error("bayes-ucb: quantile level outside (0,1); horizon too small");
    return q;
}

int BayesUcbPsarPolicy::order_index(double q, int k) {
    int idx = static_cast<int>(std::ceil(q * k));
    return std::clamp(idx, 1, k);
}

BayesUcbPsarPolicy::BayesUcbPsarPolicy(const SequenceModel& model, int horizon,
                                       BayesUcbConfig config, std::optional<int> truncation)
    : model_(&model), horizon_(horizon), config_(config), truncation_(truncation) {
    config_.validate();
    if (horizon_ < 3) throw std::invalid_argument("bayes-ucb: horizon must be at least 3");
}

int BayesUcbPsarPolicy::select_action(const History& history, Rng& rng) {
    int t = history.length() + 1;
    double q = quantile_level(t, horizon_);
    int idx = order_index(q, config_.num_generations);
    std::vector<double> ucb(static_cast<size_t>(history.num_actions()));
    for (int a = 0; a < history.num_actions(); ++a) {
        std::vector<double> means =
            sample_arm_means(*model_, history.priors()[static_cast<size_t>(a)], stats_of(history, a),
                             horizon_, truncation_, config_.num_generations, rng);
        std::nth_element(means.begin(), means.begin() + (idx - 1), means.end());
        ucb[static_cast<size_t>(a)] = means[static_cast<size_t>(idx - 1)];
    }
    return argmax_lowest(ucb);
}

int TsUniformBbPolicy::select_action(const History& history, Rng& rng) {
    std::vector<double> draws(static_cast<size_t>(history.num_actions()));
    for (int a = 0; a < history.num_actions(); ++a) {
        SufficientStats st = stats_of(history, a);
        draws[static_cast<size_t>(a)] = sample_beta(1.0 + st.s, 1.0 + (st.n - st.s), rng);
    }
    return argmax_lowest(draws);
}

UcbPolicy::UcbPolicy(double delta, double sigma) : delta_(delta), sigma_(sigma) {
    if (!(delta > 0.0) || !(delta < 1.0)) throw std::invalid_argument("ucb: delta must lie in (0,1)");
    if (!(sigma > 0.0)) throw std::invalid_argument("ucb: sigma must be positive");
}

double UcbPolicy::bonus_width(int n, int num_actions, double delta, double sigma) {
    double nn = static_cast<double>(n);
    double inner = 1.0 + 2.0 * std::log(num_actions * std::sqrt(1.0 + nn) / delta);
    return sigma * std::sqrt((1.0 + nn) / (nn * nn) * inner);
}

int UcbPolicy::select_action(const History& history, Rng&) {
    const int num_actions = history.num_actions();
    std::vector<double> index(static_cast<size_t>(num_actions));
    for (int a = 0; a < num_actions; ++a) {
        SufficientStats st = stats_of(history, a);
        if (st.n == 0) return a;  // unplayed arms carry an infinite index
        index[static_cast<size_t>(a)] = st.mean() + bonus_width(st.n, num_actions, delta_, sigma_);
    }
    return argmax_lowest(index);
}

TsNeuralLinearPolicy::TsNeuralLinearPolicy(const GaussianGaussianModel& model) : model_(&model) {}

int TsNeuralLinearPolicy::select_action(const History& history, Rng& rng) {
    std::vector<double> draws(static_cast<size_t>(history.num_actions()));
    for (int a = 0; a < history.num_actions(); ++a) {
        GaussianPosterior post = neural_linear_posterior(
            *model_, history.priors()[static_cast<size_t>(a)], stats_of(history, a));
        std::normal_distribution<double> normal(post.mean, std::sqrt(post.var));
        draws[static_cast<size_t>(a)] = normal(rng);
    }
    return argmax_lowest(draws);
}

TsEnsemblePolicy::TsEnsemblePolicy(Ensemble ensemble) : ensemble_(std::move(ensemble)) {}

int TsEnsemblePolicy::select_action(const History& history, Rng& rng) {
    std::uniform_int_distribution<int> pick(0, ensemble_.num_members() - 1);
    int member = pick(rng);
    std::vector<double> preds(static_cast<size_t>(history.num_actions()));
    for (int a = 0; a < history.num_actions(); ++a)
        preds[static_cast<size_t>(a)] = ensemble_.predict(member, history.priors()[static_cast<size_t>(a)]);
    return argmax_uniform(preds, rng);
}

void TsEnsemblePolicy::observe(const History& history, const Record& r, Rng& rng) {
    ensemble_.update(history.priors()[static_cast<size_t>(r.action)], r.outcome, rng);
}

BrokenOneRewardPolicy::BrokenOneRewardPolicy(const SequenceModel& model) : model_(&model) {}

int BrokenOneRewardPolicy::select_action(const History& history, Rng& rng) {
    std::vector<double> draws(static_cast<size_t>(history.num_actions()));
    for (int a = 0; a < history.num_actions(); ++a) {
        double p = model_->predict_next(history.priors()[static_cast<size_t>(a)], stats_of(history, a));
        draws[static_cast<size_t>(a)] = sample_bernoulli(p, rng);
    }
    return argmax_uniform(draws, rng);
}

BrokenMeanPolicy::BrokenMeanPolicy(const SequenceModel& model, int k) : model_(&model), k_(k) {
    if (k_ < 1) throw std::invalid_argument("broken_mean: need at least one draw");
}

int BrokenMeanPolicy::select_action(const History& history, Rng& rng) {
    std::vector<double> means(static_cast<size_t>(history.num_actions()));
    for (int a = 0; a < history.num_actions(); ++a) {
        double p = model_->predict_next(history.priors()[static_cast<size_t>(a)], stats_of(history, a));
        // Independent draws of the *next* outcome; nothing is written back.
        int sum = 0;
        for (int j = 0; j < k_; ++j) sum += sample_bernoulli(p, rng);
        means[static_cast<size_t>(a)] = static_cast<double>(sum) / k_;
    }
    return argmax_uniform(means, rng);
}

std::unique_ptr<Policy> make_policy(const std::string& name, const PolicyContext& ctx) {
    auto need_model = [&]() -> const SequenceModel& {
        if (!ctx.model) throw std::invalid_argument("policy '" + name + "' requires a sequence model");
        return *ctx.model;
    };
    if (name == "ts_psar" || name == "ts_oracle")
        return std::make_unique<TsPsarPolicy>(name, need_model(), ctx.horizon, ctx.truncation,
                                              ctx.force_truncation);
    if (name == "bayes_ucb_psar")
        return std::make_unique<BayesUcbPsarPolicy>(need_model(), ctx.horizon, ctx.bayes_ucb,
                                                    ctx.truncation);
    if (name == "ts_uniform_bb") return std::make_unique<TsUniformBbPolicy>();
    if (name == "ucb") return std::make_unique<UcbPolicy>(ctx.ucb_delta, ctx.ucb_sigma);
    if (name == "ts_neural_linear") {
        if (!ctx.gaussian) throw std::invalid_argument("ts_neural_linear requires a gaussian model");
        return std::make_unique<TsNeuralLinearPolicy>(*ctx.gaussian);
    }
    if (name == "ts_ensemble") {
        if (!ctx.ensemble) throw std::invalid_argument("ts_ensemble requires an ensemble");
        return std::make_unique<TsEnsemblePolicy>(*ctx.ensemble);
    }
    if (name == "broken_one_reward") return std::make_unique<BrokenOneRewardPolicy>(need_model());
    if (name == "broken_mean") return std::make_unique<BrokenMeanPolicy>(need_model(), ctx.broken_mean_draws);
    throw std::invalid_argument("unknown policy: " + name);
}

std::vector<std::string> policy_names() {
    return {"ts_psar",   "bayes_ucb_psar", "ts_uniform_bb",     "ucb",        "ts_neural_linear",
            "ts_ensemble", "broken_one_reward", "broken_mean", "ts_oracle"};
}

}  // namespace psar
