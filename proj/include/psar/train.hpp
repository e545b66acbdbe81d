#pragma once

#include <string>
#include <vector>

#include "psar/envgen.hpp"
#include "psar/generate.hpp"
#include "psar/seqmodel.hpp"
#include "psar/util.hpp"

namespace psar {

struct TrainConfig {
    int epochs = 1000;
    int batch_size = 500;
    double learning_rate = 1e-3;
    double weight_decay = 0.01;
    bool permute = true;            // permute each sequence before the loss
    int bootstrap_target = 0;       // resample sequences shorter than this up to it; 0 = off
    int patience = 50;              // early stopping, in epochs
    double validation_fraction = 0.2;  // used only when no validation set is supplied
    std::uint64_t seed = 0;
    int threads = 0;                // 0 = hardware concurrency

    void validate() const;
};

struct TrainReport {
    std::vector<double> train_loss;  // per-outcome average, one entry per epoch
    std::vector<double> val_loss;
    int selected_epoch = -1;         // epoch whose parameters were restored (-1: initial)
    double best_val_loss = 0.0;
    int epochs_run = 0;

    void save_csv(const std::string& path) const;
};

// Minibatch gradient training of a learned sequence model on per-action
// outcome sequences, restoring the best-validation parameters.
// If `validation` is null, a split of `dataset` at validation_fraction is
// used (seeded by config.seed).
TrainReport train_model(TrainableModel& model, const ActionDataset& dataset,
                        const TrainConfig& config, const ActionDataset* validation = nullptr);

struct EmpiricalBayesRow {
    double z = 0.0;
    double learned_prior_mean = 0.0;
    double learned_prior_mad = 0.0;
    double true_prior_mean = 0.0;
    double true_prior_mad = 0.0;
};

struct EmpiricalBayesReport {
    std::vector<EmpiricalBayesRow> rows;
    double mean_correlation = 0.0;
    double mad_correlation = 0.0;

    void save_csv(const std::string& path) const;
};

// Compares the trained model's implied prior (posterior-mean samples with
// no observations) against the true prior of the empirical-Bayes process.
EmpiricalBayesReport empirical_bayes_report(const SequenceModel& model,
                                            const EmpiricalBayesConfig& truth, int horizon,
                                            int num_actions, int num_samples, Rng& rng);

}  // namespace psar
