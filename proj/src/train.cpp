#include "psar/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

namespace psar {

void TrainConfig::validate() const {
    if (epochs < 0) throw std::invalid_argument("train config: epochs must be non-negative");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("train config: learning_rate must be positive");
    if (weight_decay < 0.0) throw std::invalid_argument("train config: weight_decay must be non-negative");
    if (bootstrap_target < 0) throw std::invalid_argument("train config: bootstrap_target must be non-negative");
    if (patience < 1) throw std::invalid_argument("train config: patience must be positive");
    if (validation_fraction <= 0.0 || validation_fraction >= 1.0)
        throw std::invalid_argument("train config: validation_fraction must lie in (0,1)");
}

namespace {

struct Snapshot {
    std::vector<std::vector<Eigen::MatrixXd>> weights;
    std::vector<std::vector<Eigen::VectorXd>> biases;
};

Snapshot take_snapshot(const TrainableModel& model) {
    Snapshot s;
    for (const Mlp* net : model.nets()) {
        s.weights.push_back(net->weights());
        s.biases.push_back(net->biases());
    }
    return s;
}

void restore_snapshot(TrainableModel& model, const Snapshot& s) {
    auto nets = model.nets();
    for (size_t i = 0; i < nets.size(); ++i) {
        nets[i]->weights() = s.weights[i];
        nets[i]->biases() = s.biases[i];
    }
}

// Per-outcome average NLL of a dataset under the current parameters,
// evaluated on the raw (un-augmented) sequences.
double validation_loss(const TrainableModel& model, const ActionDataset& data, int threads) {
    if (data.entries.empty()) return 0.0;
    std::vector<double> total(static_cast<size_t>(threads), 0.0);
    std::vector<long long> counts(static_cast<size_t>(threads), 0);
    auto worker = [&](int w) {
        std::vector<MlpGradients> scratch;
        for (const Mlp* net : model.nets()) scratch.push_back(net->zero_gradients());
        for (size_t i = static_cast<size_t>(w); i < data.entries.size(); i += static_cast<size_t>(threads)) {
            const ActionEntry& e = data.entries[i];
            for (auto& g : scratch) g.set_zero();
            total[static_cast<size_t>(w)] += model.sequence_nll_grad(e.features, e.outcomes, scratch);
            counts[static_cast<size_t>(w)] += static_cast<long long>(e.outcomes.size());
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < threads; ++w) pool.emplace_back(worker, w);
    worker(0);
    for (auto& t : pool) t.join();
    double sum = std::accumulate(total.begin(), total.end(), 0.0);
    long long n = std::accumulate(counts.begin(), counts.end(), 0LL);
    return n > 0 ? sum / n : 0.0;
}

}  // namespace

TrainReport train_model(TrainableModel& model, const ActionDataset& dataset,
                        const TrainConfig& config, const ActionDataset* validation) {
    config.validate();
    if (dataset.entries.empty()) throw std::invalid_argument("train_model: empty dataset");

    ActionDataset train_split, val_split;
    const ActionDataset* train = &dataset;
    const ActionDataset* val = validation;
    if (!val) {
        std::tie(train_split, val_split) = split_dataset(dataset, config.validation_fraction, config.seed);
        if (train_split.entries.empty() || val_split.entries.empty())
            throw std::invalid_argument("train_model: dataset too small to split");
        train = &train_split;
        val = &val_split;
    }

    int threads = config.threads > 0 ? config.threads
                                     : std::max(1u, std::thread::hardware_concurrency());
    Rng rng = make_rng(config.seed, 0x7a17ULL);

    std::vector<AdamW> optimizers;
    for (Mlp* net : model.nets())
        optimizers.emplace_back(*net, AdamW::Options{config.learning_rate, config.weight_decay});

    TrainReport report;
    Snapshot best = take_snapshot(model);
    report.best_val_loss = validation_loss(model, *val, threads);
    double initial_val = report.best_val_loss;
    int epochs_since_best = 0;

    std::vector<size_t> order(train->entries.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_nll = 0.0;
        long long epoch_outcomes = 0;

        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));

            // Augmented sequences are drawn up front so the rng stream does
            // not depend on the number of worker threads.
            std::vector<std::vector<int>> seqs(end - start);
            for (size_t i = start; i < end; ++i) {
                const ActionEntry& e = train->entries[order[i]];
                std::vector<int>& ys = seqs[i - start];
                if (config.bootstrap_target > 0 &&
                    static_cast<int>(e.outcomes.size()) < config.bootstrap_target) {
                    ys = bootstrap_sequence(e.outcomes, config.bootstrap_target, rng);
                } else {
                    ys = e.outcomes;
                }
                if (config.permute) std::shuffle(ys.begin(), ys.end(), rng);
            }

            std::vector<std::vector<MlpGradients>> partial(static_cast<size_t>(threads));
            std::vector<double> partial_nll(static_cast<size_t>(threads), 0.0);
            std::vector<long long> partial_cnt(static_cast<size_t>(threads), 0);
            auto worker = [&](int w) {
                auto& grads = partial[static_cast<size_t>(w)];
                for (const Mlp* net : model.nets()) grads.push_back(net->zero_gradients());
                for (size_t i = start + static_cast<size_t>(w); i < end; i += static_cast<size_t>(threads)) {
                    const ActionEntry& e = train->entries[order[i]];
                    partial_nll[static_cast<size_t>(w)] +=
                        model.sequence_nll_grad(e.features, seqs[i - start], grads);
                    partial_cnt[static_cast<size_t>(w)] += static_cast<long long>(seqs[i - start].size());
                }
            };
            std::vector<std::thread> pool;
            for (int w = 1; w < threads; ++w) pool.emplace_back(worker, w);
            worker(0);
            for (auto& t : pool) t.join();

            // Ordered reduction keeps the update deterministic.
            std::vector<MlpGradients>& grads = partial[0];
            for (int w = 1; w < threads; ++w)
                for (size_t g = 0; g < grads.size(); ++g) grads[g].add(partial[static_cast<size_t>(w)][g]);
            double batch_nll = std::accumulate(partial_nll.begin(), partial_nll.end(), 0.0);
            long long batch_cnt = std::accumulate(partial_cnt.begin(), partial_cnt.end(), 0LL);
            epoch_nll += batch_nll;
            epoch_outcomes += batch_cnt;
            if (!std::isfinite(batch_nll))
                throw std::runtime_error("train_model: loss diverged (non-finite) at epoch " +
                                         std::to_string(epoch));

            auto nets = model.nets();
            for (size_t g = 0; g < nets.size(); ++g) optimizers[g].step(*nets[g], grads[g]);
        }

        report.train_loss.push_back(epoch_outcomes > 0 ? epoch_nll / epoch_outcomes : 0.0);
        double vloss = validation_loss(model, *val, threads);
        report.val_loss.push_back(vloss);
        report.epochs_run = epoch + 1;
        if (vloss < report.best_val_loss) {
            report.best_val_loss = vloss;
            report.selected_epoch = epoch;
            best = take_snapshot(model);
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if (epochs_since_best >= config.patience) break;
        }
    }

    restore_snapshot(model, best);
    if (report.selected_epoch == -1) report.best_val_loss = initial_val;
    return report;
}

void TrainReport::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write train report: " + path);
    out << "epoch,train_loss,val_loss\n";
    out.precision(17);
    for (size_t i = 0; i < train_loss.size(); ++i)
        out << i << ',' << train_loss[i] << ',' << val_loss[i] << '\n';
}

EmpiricalBayesReport empirical_bayes_report(const SequenceModel& model,
                                            const EmpiricalBayesConfig& truth, int horizon,
                                            int num_actions, int num_samples, Rng& rng) {
    truth.validate();
    if (num_actions < 2) throw std::invalid_argument("empirical_bayes_report: need at least 2 actions");
    if (num_samples < 2) throw std::invalid_argument("empirical_bayes_report: need at least 2 samples");
    EmpiricalBayesReport report;
    std::uniform_real_distribution<double> uz(0.0, 1.0);
    auto mean_mad = [](const std::vector<double>& xs) {
        double m = 0.0;
        for (double x : xs) m += x;
        m /= xs.size();
        double mad = 0.0;
        for (double x : xs) mad += std::abs(x - m);
        mad /= xs.size();
        return std::pair<double, double>(m, mad);
    };
    for (int a = 0; a < num_actions; ++a) {
        EmpiricalBayesRow row;
        row.z = uz(rng);
        PriorFeatures z({row.z});
        // Learned prior: posterior-mean samples generated with no observations.
        std::vector<double> learned =
            sample_arm_means(model, z, SufficientStats(), horizon, std::nullopt, num_samples, rng);
        std::tie(row.learned_prior_mean, row.learned_prior_mad) = mean_mad(learned);
        // True prior: direct draws.
        double alpha, beta;
        truth.beta_params(row.z, &alpha, &beta);
        std::vector<double> direct(static_cast<size_t>(num_samples));
        for (auto& x : direct) x = sample_beta(alpha, beta, rng);
        std::tie(row.true_prior_mean, row.true_prior_mad) = mean_mad(direct);
        report.rows.push_back(row);
    }
    std::vector<double> lm, tm, lmad, tmad;
    for (const auto& r : report.rows) {
        lm.push_back(r.learned_prior_mean);
        tm.push_back(r.true_prior_mean);
        lmad.push_back(r.learned_prior_mad);
        tmad.push_back(r.true_prior_mad);
    }
    report.mean_correlation = correlation(lm, tm);
    report.mad_correlation = correlation(lmad, tmad);
    return report;
}

void EmpiricalBayesReport::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write empirical-bayes report: " + path);
    out << "z,learned_prior_mean,learned_prior_mad,true_prior_mean,true_prior_mad\n";
    out.precision(17);
    for (const auto& r : rows)
        out << r.z << ',' << r.learned_prior_mean << ',' << r.learned_prior_mad << ','
            << r.true_prior_mean << ',' << r.true_prior_mad << '\n';
}

}  // namespace psar
