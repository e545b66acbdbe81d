#include "psar/seqmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace psar {

SufficientStats stats_of(const History& history, int action) {
    ObservedStats obs = observed_stats(history, action);
    return SufficientStats(obs.count, obs.successes);
}

namespace {

double clamp_prob(double p, double eps) { return std::min(std::max(p, eps), 1.0 - eps); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(1 + exp(x)), overflow-safe
double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

// Sum_{j=0}^{k-1} 1/(x+j); equals digamma(x+k) - digamma(x) for integer k.
double harmonic_shift(double x, int k) {
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += 1.0 / (x + j);
    return s;
}

// Fallback sampler: one predict_with_prior call per row and step.
class GenericBatchSampler : public BatchRowSampler {
  public:
    GenericBatchSampler(const SequenceModel& model, std::vector<ArmPrior> priors,
                        std::vector<SufficientStats> starts)
        : model_(model), priors_(std::move(priors)), stats_(std::move(starts)) {
        if (priors_.size() != stats_.size())
            throw std::invalid_argument("batch sampler: priors/starts size mismatch");
    }

    int size() const override { return static_cast<int>(priors_.size()); }

    void probs(std::span<double> out) const override {
        for (size_t i = 0; i < priors_.size(); ++i)
            out[i] = model_.predict_with_prior(priors_[i], stats_[i]);
    }

    void push(std::span<const int> ys) override {
        for (size_t i = 0; i < stats_.size(); ++i)
            if (ys[i] >= 0) stats_[i].push(ys[i]);
    }

  private:
    const SequenceModel& model_;
    std::vector<ArmPrior> priors_;
    std::vector<SufficientStats> stats_;
};

}  // namespace

std::unique_ptr<BatchRowSampler> SequenceModel::make_batch_sampler(
    std::vector<ArmPrior> priors, std::vector<SufficientStats> starts) const {
    return std::make_unique<GenericBatchSampler>(*this, std::move(priors), std::move(starts));
}

FixedBetaBernoulliModel::FixedBetaBernoulliModel(double alpha, double beta)
    : alpha_(alpha), beta_(beta) {
    if (!(alpha > 0.0) || !(beta > 0.0))
        throw std::invalid_argument("fixed beta-bernoulli: parameters must be positive");
}

double FixedBetaBernoulliModel::predict_with_prior(const ArmPrior&, const SufficientStats& st) const {
    return (alpha_ + st.s) / (alpha_ + beta_ + st.n);
}

void FixedBetaBernoulliModel::save(std::ostream& out) const {
    out << "model fixed_beta_bernoulli\n" << std::hexfloat << alpha_ << ' ' << beta_ << '\n'
        << std::defaultfloat;
}

BetaBernoulliNnModel::BetaBernoulliNnModel(int feature_dim, BetaBernoulliNnOptions opt, Rng& rng)
    : param_floor_(opt.param_floor) {
    std::vector<int> widths;
    widths.push_back(feature_dim);
    widths.insert(widths.end(), opt.hidden.begin(), opt.hidden.end());
    widths.push_back(1);
    alpha_net_ = Mlp(widths, OutputActivation::softplus, rng);
    beta_net_ = Mlp(widths, OutputActivation::softplus, rng);
}

BetaBernoulliNnModel::BetaBernoulliNnModel(Mlp alpha_net, Mlp beta_net, double param_floor)
    : alpha_net_(std::move(alpha_net)), beta_net_(std::move(beta_net)), param_floor_(param_floor) {}

ArmPrior BetaBernoulliNnModel::arm_prior(const PriorFeatures& z) const {
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(z.values.data(), z.dim());
    double alpha = alpha_net_.forward_one(x)(0) + param_floor_;
    double beta = beta_net_.forward_one(x)(0) + param_floor_;
    return {{alpha, beta}};
}

double BetaBernoulliNnModel::predict_with_prior(const ArmPrior& prior, const SufficientStats& st) const {
    double alpha = prior.v[0], beta = prior.v[1];
    return (alpha + st.s) / (alpha + beta + st.n);
}

double BetaBernoulliNnModel::sequence_nll_grad(const PriorFeatures& z, std::span<const int> ys,
                                               std::vector<MlpGradients>& grads) const {
    Eigen::MatrixXd x(1, z.dim());
    for (int i = 0; i < z.dim(); ++i) x(0, i) = z[i];
    Mlp::Cache ca, cb;
    double alpha = alpha_net_.forward(x, ca)(0, 0) + param_floor_;
    double beta = beta_net_.forward(x, cb)(0, 0) + param_floor_;

    int n = static_cast<int>(ys.size());
    int s = 0;
    for (int y : ys) s += y;

    // Telescoping the predictive product gives the Beta marginal likelihood.
    double ll = log_beta(alpha + s, beta + n - s) - log_beta(alpha, beta);
    double dll_da = harmonic_shift(alpha, s) - harmonic_shift(alpha + beta, n);
    double dll_db = harmonic_shift(beta, n - s) - harmonic_shift(alpha + beta, n);

    Eigen::MatrixXd up_a(1, 1), up_b(1, 1);
    up_a(0, 0) = -dll_da;
    up_b(0, 0) = -dll_db;
    alpha_net_.backward(ca, up_a, grads[0]);
    beta_net_.backward(cb, up_b, grads[1]);
    return -ll;
}

void BetaBernoulliNnModel::save(std::ostream& out) const {
    out << "model beta_bernoulli_nn\n" << std::hexfloat << param_floor_ << '\n' << std::defaultfloat;
    alpha_net_.save(out, "alpha");
    beta_net_.save(out, "beta");
}

BetaBernoulliNnModel BetaBernoulliNnModel::load(std::istream& in) {
    double floor = read_double(in);
    Mlp a = Mlp::load(in), b = Mlp::load(in);
    if (!in) throw std::runtime_error("checkpoint: truncated beta_bernoulli_nn");
    return BetaBernoulliNnModel(std::move(a), std::move(b), floor);
}

FlexibleNnModel::FlexibleNnModel(int feature_dim, FlexibleNnOptions opt, Rng& rng)
    : feature_dim_(feature_dim), stat_repeats_(opt.stat_repeats), prob_clamp_(opt.prob_clamp) {
    if (stat_repeats_ < 1) throw std::invalid_argument("flexible nn: stat_repeats must be positive");
    std::vector<int> widths;
    widths.push_back(feature_dim + 2 * stat_repeats_);
    widths.insert(widths.end(), opt.hidden.begin(), opt.hidden.end());
    widths.push_back(1);
    net_ = Mlp(widths, OutputActivation::identity, rng);
}

FlexibleNnModel::FlexibleNnModel(Mlp net, int feature_dim, int stat_repeats, double prob_clamp)
    : net_(std::move(net)),
      feature_dim_(feature_dim),
      stat_repeats_(stat_repeats),
      prob_clamp_(prob_clamp) {}

ArmPrior FlexibleNnModel::arm_prior(const PriorFeatures& z) const {
    if (z.dim() != feature_dim_) throw std::invalid_argument("flexible nn: feature dimension mismatch");
    return {z.values};
}

void FlexibleNnModel::fill_input_row(Eigen::MatrixXd& x, int row, std::span<const double> z,
                                     const SufficientStats& st) const {
    for (int i = 0; i < feature_dim_; ++i) x(row, i) = z[i];
    double m = st.mean(), inv = st.inv();
    for (int r = 0; r < stat_repeats_; ++r) {
        x(row, feature_dim_ + 2 * r) = m;
        x(row, feature_dim_ + 2 * r + 1) = inv;
    }
}

double FlexibleNnModel::predict_with_prior(const ArmPrior& prior, const SufficientStats& st) const {
    Eigen::MatrixXd x(1, net_.input_dim());
    fill_input_row(x, 0, prior.v, st);
    double o = net_.forward(x)(0, 0);
    return clamp_prob(sigmoid(o), prob_clamp_);
}

namespace {

class FlexibleBatchSamplerImpl : public BatchRowSampler {
  public:
    FlexibleBatchSamplerImpl(const FlexibleNnModel& model, const Mlp& net,
                             std::vector<ArmPrior> priors, std::vector<SufficientStats> starts,
                             double clamp)
        : model_(model), net_(net), priors_(std::move(priors)), stats_(std::move(starts)),
          clamp_(clamp) {}

    int size() const override { return static_cast<int>(priors_.size()); }

    void probs(std::span<double> out) const override;

    void push(std::span<const int> ys) override {
        for (size_t i = 0; i < stats_.size(); ++i)
            if (ys[i] >= 0) stats_[i].push(ys[i]);
    }

  private:
    const FlexibleNnModel& model_;
    const Mlp& net_;
    std::vector<ArmPrior> priors_;
    std::vector<SufficientStats> stats_;
    double clamp_;
};

}  // namespace

std::unique_ptr<BatchRowSampler> FlexibleNnModel::make_batch_sampler(
    std::vector<ArmPrior> priors, std::vector<SufficientStats> starts) const {
    return std::make_unique<FlexibleBatchSamplerImpl>(*this, net_, std::move(priors),
                                                      std::move(starts), prob_clamp_);
}

void FlexibleBatchSamplerImpl::probs(std::span<double> out) const {
    Eigen::MatrixXd x(static_cast<int>(priors_.size()), net_.input_dim());
    for (size_t i = 0; i < priors_.size(); ++i)
        model_.fill_input_row(x, static_cast<int>(i), priors_[i].v, stats_[i]);
    Eigen::MatrixXd o = net_.forward(x);
    for (size_t i = 0; i < priors_.size(); ++i)
        out[i] = clamp_prob(sigmoid(o(static_cast<int>(i), 0)), clamp_);
}

double FlexibleNnModel::sequence_nll_grad(const PriorFeatures& z, std::span<const int> ys,
                                          std::vector<MlpGradients>& grads) const {
    const int T = static_cast<int>(ys.size());
    Eigen::MatrixXd x(T, net_.input_dim());
    SufficientStats st;
    for (int t = 0; t < T; ++t) {
        fill_input_row(x, t, z.values, st);
        st.push(ys[t]);
    }
    Mlp::Cache cache;
    Eigen::MatrixXd o = net_.forward(x, cache);
    double nll = 0.0;
    Eigen::MatrixXd upstream(T, 1);
    for (int t = 0; t < T; ++t) {
        double ot = o(t, 0);
        nll += softplus(ot) - ys[t] * ot;  // binary cross-entropy with logits
        upstream(t, 0) = sigmoid(ot) - ys[t];
    }
    net_.backward(cache, upstream, grads[0]);
    return nll;
}

void FlexibleNnModel::save(std::ostream& out) const {
    out << "model flexible_nn\n"
        << feature_dim_ << ' ' << stat_repeats_ << ' ' << std::hexfloat << prob_clamp_ << '\n'
        << std::defaultfloat;
    net_.save(out, "net");
}

FlexibleNnModel FlexibleNnModel::load(std::istream& in) {
    int d, r;
    in >> d >> r;
    double clamp = read_double(in);
    Mlp net = Mlp::load(in);
    if (!in) throw std::runtime_error("checkpoint: truncated flexible_nn");
    return FlexibleNnModel(std::move(net), d, r, clamp);
}

BetaMixtureModel::BetaMixtureModel(std::string kind, ComponentFn components)
    : kind_(std::move(kind)), components_(std::move(components)) {}

ArmPrior BetaMixtureModel::arm_prior(const PriorFeatures& z) const {
    std::vector<Component> comps = components_(z);
    if (comps.empty()) throw std::logic_error("beta mixture: no components");
    ArmPrior p;
    for (const Component& c : comps) {
        if (!(c.alpha > 0.0) || !(c.beta > 0.0))
            throw std::logic_error("beta mixture: component parameters must be positive");
        p.v.push_back(c.log_weight);
        p.v.push_back(c.alpha);
        p.v.push_back(c.beta);
    }
    return p;
}

std::vector<double> BetaMixtureModel::posterior_weights(const ArmPrior& prior,
                                                        const SufficientStats& st) const {
    size_t k = prior.v.size() / 3;
    std::vector<double> lw(k);
    double lse = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < k; ++i) {
        double w = prior.v[3 * i], a = prior.v[3 * i + 1], b = prior.v[3 * i + 2];
        lw[i] = w + log_beta(a + st.s, b + st.n - st.s) - log_beta(a, b);
        lse = log_sum_exp(lse, lw[i]);
    }
    for (size_t i = 0; i < k; ++i) lw[i] = std::exp(lw[i] - lse);
    return lw;
}

double BetaMixtureModel::predict_with_prior(const ArmPrior& prior, const SufficientStats& st) const {
    std::vector<double> w = posterior_weights(prior, st);
    double p = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
        double a = prior.v[3 * i + 1], b = prior.v[3 * i + 2];
        p += w[i] * (a + st.s) / (a + b + st.n);
    }
    return p;
}

namespace {

// Incremental posterior over mixture components: one O(K) weight update
// per conditioning outcome, no log-Beta calls inside the chain.
class MixtureBatchSampler : public BatchRowSampler {
  public:
    MixtureBatchSampler(const BetaMixtureModel& model, std::vector<ArmPrior> priors,
                        std::vector<SufficientStats> starts)
        : priors_(std::move(priors)), stats_(std::move(starts)) {
        log_w_.resize(priors_.size());
        for (size_t i = 0; i < priors_.size(); ++i) {
            size_t k = priors_[i].v.size() / 3;
            log_w_[i].resize(k);
            for (size_t c = 0; c < k; ++c) {
                double w = priors_[i].v[3 * c], a = priors_[i].v[3 * c + 1],
                       b = priors_[i].v[3 * c + 2];
                log_w_[i][c] = w + log_beta(a + stats_[i].s, b + stats_[i].n - stats_[i].s) -
                               log_beta(a, b);
            }
        }
        (void)model;
    }

    int size() const override { return static_cast<int>(priors_.size()); }

    void probs(std::span<double> out) const override {
        for (size_t i = 0; i < priors_.size(); ++i) out[i] = row_prob(i);
    }

    void push(std::span<const int> ys) override {
        for (size_t i = 0; i < priors_.size(); ++i) {
            if (ys[i] < 0) continue;
            size_t k = log_w_[i].size();
            for (size_t c = 0; c < k; ++c) {
                double p = component_prob(i, c);
                log_w_[i][c] += std::log(ys[i] ? p : 1.0 - p);
            }
            stats_[i].push(ys[i]);
        }
    }

  private:
    double component_prob(size_t i, size_t c) const {
        double a = priors_[i].v[3 * c + 1], b = priors_[i].v[3 * c + 2];
        return (a + stats_[i].s) / (a + b + stats_[i].n);
    }

    double row_prob(size_t i) const {
        size_t k = log_w_[i].size();
        double lse = -std::numeric_limits<double>::infinity();
        for (size_t c = 0; c < k; ++c) lse = log_sum_exp(lse, log_w_[i][c]);
        double p = 0.0;
        for (size_t c = 0; c < k; ++c) p += std::exp(log_w_[i][c] - lse) * component_prob(i, c);
        return p;
    }

    std::vector<ArmPrior> priors_;
    std::vector<SufficientStats> stats_;
    std::vector<std::vector<double>> log_w_;
};

}  // namespace

std::unique_ptr<BatchRowSampler> BetaMixtureModel::make_batch_sampler(
    std::vector<ArmPrior> priors, std::vector<SufficientStats> starts) const {
    return std::make_unique<MixtureBatchSampler>(*this, std::move(priors), std::move(starts));
}

void BetaMixtureModel::save(std::ostream& out) const { out << "model mixture " << kind_ << '\n'; }

std::unique_ptr<BetaMixtureModel> make_mixture_oracle(const MixtureBetaBernoulliConfig& config) {
    config.validate();
    double lw0 = std::log(config.mixture_weight);
    double lw1 = std::log(1.0 - config.mixture_weight);
    auto fn = [config, lw0, lw1](const PriorFeatures& z) {
        std::vector<BetaMixtureModel::Component> comps(2);
        config.component_params(z, 0, &comps[0].alpha, &comps[0].beta);
        comps[0].log_weight = lw0;
        config.component_params(z, 1, &comps[1].alpha, &comps[1].beta);
        comps[1].log_weight = lw1;
        return comps;
    };
    return std::make_unique<BetaMixtureModel>("oracle_mixture", fn);
}

std::unique_ptr<BetaMixtureModel> make_empirical_bayes_oracle(const EmpiricalBayesConfig& config) {
    config.validate();
    auto fn = [config](const PriorFeatures& z) {
        std::vector<BetaMixtureModel::Component> comps(1);
        config.beta_params(z[0], &comps[0].alpha, &comps[0].beta);
        comps[0].log_weight = 0.0;
        return comps;
    };
    return std::make_unique<BetaMixtureModel>("oracle_empirical_bayes", fn);
}

DiscreteMixtureModel::DiscreteMixtureModel(std::string kind, std::vector<double> atoms,
                                           WeightFn weights)
    : kind_(std::move(kind)), atoms_(std::move(atoms)), weights_(std::move(weights)) {
    for (double u : atoms_)
        if (u < 0.0 || u > 1.0) throw std::invalid_argument("discrete mixture: atoms must lie in [0,1]");
}

ArmPrior DiscreteMixtureModel::arm_prior(const PriorFeatures& z) const {
    std::vector<double> w = weights_(z);
    if (w.size() != atoms_.size())
        throw std::logic_error("discrete mixture: weight/atom count mismatch");
    ArmPrior p;
    for (double wi : w) p.v.push_back(wi);
    return p;
}

std::vector<double> DiscreteMixtureModel::posterior_weights(const ArmPrior& prior,
                                                            const SufficientStats& st) const {
    std::vector<double> lw(atoms_.size());
    double lse = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < atoms_.size(); ++i) {
        double u = atoms_[i];
        double li = prior.v[i] > 0.0 ? std::log(prior.v[i]) : -std::numeric_limits<double>::infinity();
        if (st.s > 0) li += st.s * std::log(u);
        if (st.n - st.s > 0) li += (st.n - st.s) * std::log(1.0 - u);
        lw[i] = li;
        lse = log_sum_exp(lse, li);
    }
    for (auto& x : lw) x = std::exp(x - lse);
    return lw;
}

double DiscreteMixtureModel::predict_with_prior(const ArmPrior& prior,
                                                const SufficientStats& st) const {
    std::vector<double> w = posterior_weights(prior, st);
    double p = 0.0;
    for (size_t i = 0; i < atoms_.size(); ++i) p += w[i] * atoms_[i];
    return p;
}

void DiscreteMixtureModel::save(std::ostream& out) const {
    out << "model discrete_mixture " << kind_ << '\n';
}

PerturbedModel::PerturbedModel(const SequenceModel& inner, double delta, double clamp)
    : inner_(&inner), delta_(delta), clamp_(clamp) {}

double PerturbedModel::predict_with_prior(const ArmPrior& prior, const SufficientStats& st) const {
    return clamp_prob(inner_->predict_with_prior(prior, st) + delta_, clamp_);
}

void PerturbedModel::save(std::ostream& out) const {
    out << "model perturbed " << std::hexfloat << delta_ << ' ' << clamp_ << '\n' << std::defaultfloat;
}

ConstantModel::ConstantModel(double p) : p_(p) {
    if (!(p > 0.0) || !(p < 1.0)) throw std::invalid_argument("constant model: p must lie in (0,1)");
}

void ConstantModel::save(std::ostream& out) const {
    out << "model constant\n" << std::hexfloat << p_ << '\n' << std::defaultfloat;
}

GaussianGaussianModel::GaussianGaussianModel(int feature_dim, std::vector<int> hidden, Rng& rng) {
    std::vector<int> widths;
    widths.push_back(feature_dim);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(1);
    net_ = Mlp(widths, OutputActivation::identity, rng);
}

GaussianGaussianModel::GaussianGaussianModel(Mlp net, double prior_var, double obs_var)
    : net_(std::move(net)), prior_var_(prior_var), obs_var_(obs_var) {
    if (!(prior_var_ > 0.0) || !(obs_var_ > 0.0))
        throw std::invalid_argument("gaussian-gaussian: variances must be positive");
}

double GaussianGaussianModel::prior_mean(const PriorFeatures& z) const {
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(z.values.data(), z.dim());
    return sigmoid(net_.forward_one(x)(0));
}

double GaussianGaussianModel::sequence_nll_grad(const PriorFeatures& z, std::span<const int> ys,
                                                std::vector<MlpGradients>& grads) const {
    Eigen::MatrixXd x(1, z.dim());
    for (int i = 0; i < z.dim(); ++i) x(0, i) = z[i];
    Mlp::Cache cache;
    double o = net_.forward(x, cache)(0, 0);
    int n = static_cast<int>(ys.size());
    int s = 0;
    for (int y : ys) s += y;
    double nll = n * softplus(o) - s * o;
    Eigen::MatrixXd upstream(1, 1);
    upstream(0, 0) = n * sigmoid(o) - s;
    net_.backward(cache, upstream, grads[0]);
    return nll;
}

void GaussianGaussianModel::save(std::ostream& out) const {
    out << "model gaussian_gaussian\n"
        << std::hexfloat << prior_var_ << ' ' << obs_var_ << '\n' << std::defaultfloat;
    net_.save(out, "g");
}

GaussianGaussianModel GaussianGaussianModel::load(std::istream& in) {
    std::string tag, kind;
    in >> tag >> kind;
    if (tag != "model" || kind != "gaussian_gaussian")
        throw std::runtime_error("checkpoint: expected gaussian_gaussian model");
    double pv = read_double(in);
    double ov = read_double(in);
    Mlp net = Mlp::load(in);
    if (!in) throw std::runtime_error("checkpoint: truncated gaussian_gaussian");
    return GaussianGaussianModel(std::move(net), pv, ov);
}

GaussianPosterior neural_linear_posterior(const GaussianGaussianModel& model,
                                          const PriorFeatures& z, const SufficientStats& st) {
    double g = model.prior_mean(z);
    double sigma2 = model.prior_var(), s2 = model.obs_var();
    if (st.n == 0) return {g, sigma2};
    double v = 1.0 / (1.0 / sigma2 + st.n / s2);
    double mean = v * (g / sigma2 + st.s / s2);
    return {mean, v};
}

double sequence_log_likelihood(const SequenceModel& model, const PriorFeatures& z,
                               std::span<const int> outcomes) {
    ArmPrior prior = model.arm_prior(z);
    SufficientStats st;
    double ll = 0.0;
    for (int y : outcomes) {
        if (y != 0 && y != 1) throw std::invalid_argument("sequence_log_likelihood: outcomes must be binary");
        double p = model.predict_with_prior(prior, st);
        ll += std::log(y ? p : 1.0 - p);
        st.push(y);
    }
    return ll;
}

DatasetLoss dataset_loss(const SequenceModel& model, const ActionDataset& dataset) {
    DatasetLoss loss;
    long long outcomes = 0;
    for (const auto& e : dataset.entries) {
        loss.total -= sequence_log_likelihood(model, e.features, e.outcomes);
        outcomes += static_cast<long long>(e.outcomes.size());
    }
    loss.per_outcome = outcomes > 0 ? loss.total / outcomes : 0.0;
    return loss;
}

namespace {

// Depth-first enumeration of all binary sequences, accumulating the
// log-probabilities under both models.
void kl_walk(const SequenceModel& model, const ArmPrior& mp, const SequenceModel& truth,
             const ArmPrior& tp, SufficientStats st, int remaining, double lp_truth,
             double lp_model, double& kl) {
    if (remaining == 0) {
        kl += std::exp(lp_truth) * (lp_truth - lp_model);
        return;
    }
    double pt = truth.predict_with_prior(tp, st);
    double pm = model.predict_with_prior(mp, st);
    for (int y = 0; y <= 1; ++y) {
        SufficientStats next = st;
        next.push(y);
        kl_walk(model, mp, truth, tp, next, remaining - 1,
                lp_truth + std::log(y ? pt : 1.0 - pt), lp_model + std::log(y ? pm : 1.0 - pm), kl);
    }
}

}  // namespace

double excess_loss_exact(const SequenceModel& model, const SequenceModel& truth, const ZAtoms& zs,
                         int horizon) {
    if (horizon > 20) throw std::invalid_argument("excess_loss_exact: horizon too large (> 20)");
    if (horizon < 1) throw std::invalid_argument("excess_loss_exact: horizon must be positive");
    if (zs.points.empty() || zs.points.size() != zs.weights.size())
        throw std::invalid_argument("excess_loss_exact: bad Z atoms");
    double total = 0.0, wsum = 0.0;
    for (size_t i = 0; i < zs.points.size(); ++i) {
        double kl = 0.0;
        kl_walk(model, model.arm_prior(zs.points[i]), truth, truth.arm_prior(zs.points[i]),
                SufficientStats(), horizon, 0.0, 0.0, kl);
        total += zs.weights[i] * kl;
        wsum += zs.weights[i];
    }
    return total / wsum;
}

MeanSe excess_loss_mc(const SequenceModel& model, const SequenceModel& truth,
                      const TaskSampler& z_source, int horizon, int num_samples, Rng& rng) {
    std::vector<double> diffs;
    diffs.reserve(static_cast<size_t>(num_samples));
    for (int i = 0; i < num_samples; ++i) {
        SampledTask st = z_source.sample(1, horizon, rng);
        std::vector<int> ys;
        ys.reserve(static_cast<size_t>(horizon));
        for (int t = 0; t < horizon; ++t) ys.push_back(st.task.table.entry(0, t));
        double lt = sequence_log_likelihood(truth, st.task.priors[0], ys);
        double lm = sequence_log_likelihood(model, st.task.priors[0], ys);
        diffs.push_back(lt - lm);
    }
    return mean_se(diffs);
}

void save_model(std::ostream& out, const SequenceModel& model) {
    out << "psar-checkpoint v1\n";
    model.save(out);
}

void save_model_file(const std::string& path, const SequenceModel& model) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    save_model(out, model);
}

std::unique_ptr<SequenceModel> load_model(std::istream& in) {
    std::string magic, version;
    in >> magic >> version;
    if (magic != "psar-checkpoint" || version != "v1")
        throw std::runtime_error("checkpoint: bad header");
    std::string tag, kind;
    in >> tag >> kind;
    if (tag != "model") throw std::runtime_error("checkpoint: expected model record");
    if (kind == "fixed_beta_bernoulli") {
        double a = read_double(in);
        double b = read_double(in);
        return std::make_unique<FixedBetaBernoulliModel>(a, b);
    }
    if (kind == "beta_bernoulli_nn")
        return std::make_unique<BetaBernoulliNnModel>(BetaBernoulliNnModel::load(in));
    if (kind == "flexible_nn") return std::make_unique<FlexibleNnModel>(FlexibleNnModel::load(in));
    if (kind == "constant") {
        double p = read_double(in);
        return std::make_unique<ConstantModel>(p);
    }
    throw std::runtime_error("checkpoint: model kind '" + kind + "' is not loadable");
}

std::unique_ptr<SequenceModel> load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    return load_model(in);
}

}  // namespace psar
