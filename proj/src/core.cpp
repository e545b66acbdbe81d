#include "psar/core.hpp"

#include <cmath>

namespace psar {

PriorFeatures::PriorFeatures(std::vector<double> v) : values(std::move(v)) {
    if (values.empty()) throw std::invalid_argument("PriorFeatures: empty feature vector");
    for (double x : values) {
        if (!std::isfinite(x)) throw std::invalid_argument("PriorFeatures: non-finite entry");
    }
}

PotentialOutcomesTable::PotentialOutcomesTable(int num_actions, int horizon)
    : num_actions_(num_actions), horizon_(horizon) {
    if (num_actions <= 0) throw std::invalid_argument("table: num_actions must be positive");
    if (horizon <= 0) throw std::invalid_argument("table: horizon must be positive");
    entries_.assign(static_cast<size_t>(num_actions) * horizon, 0);
    mask_.assign(static_cast<size_t>(num_actions) * horizon, 0);
}

void PotentialOutcomesTable::check_index(int action, int t) const {
    if (action < 0 || action >= num_actions_) throw std::out_of_range("table: action out of range");
    if (t < 0 || t >= horizon_) throw std::out_of_range("table: timestep out of range");
}

int PotentialOutcomesTable::entry(int action, int t) const {
    check_index(action, t);
    size_t i = static_cast<size_t>(action) * horizon_ + t;
    if (!mask_[i]) throw std::logic_error("table: entry (" + std::to_string(action) + "," +
                                          std::to_string(t) + ") is undefined");
    return entries_[i];
}

bool PotentialOutcomesTable::known(int action, int t) const {
    check_index(action, t);
    return mask_[static_cast<size_t>(action) * horizon_ + t] != 0;
}

void PotentialOutcomesTable::set(int action, int t, int outcome) {
    check_index(action, t);
    if (outcome != 0 && outcome != 1) throw std::invalid_argument("table: outcome must be 0 or 1");
    size_t i = static_cast<size_t>(action) * horizon_ + t;
    entries_[i] = static_cast<std::uint8_t>(outcome);
    mask_[i] = 1;
}

void PotentialOutcomesTable::clear(int action, int t) {
    check_index(action, t);
    size_t i = static_cast<size_t>(action) * horizon_ + t;
    entries_[i] = 0;
    mask_[i] = 0;
}

bool PotentialOutcomesTable::fully_observed() const {
    for (auto m : mask_)
        if (!m) return false;
    return true;
}

std::vector<int> PotentialOutcomesTable::row_known(int action) const {
    std::vector<int> out;
    for (int t = 0; t < horizon_; ++t)
        if (known(action, t)) out.push_back(entry(action, t));
    return out;
}

BanditTask::BanditTask(std::vector<PriorFeatures> p, PotentialOutcomesTable t)
    : priors(std::move(p)), table(std::move(t)) {
    if (static_cast<int>(priors.size()) != table.num_actions())
        throw std::invalid_argument("BanditTask: priors length must equal num_actions");
    if (!table.fully_observed()) throw std::invalid_argument("BanditTask: table must be fully observed");
}

History::History(std::vector<PriorFeatures> priors) : priors_(std::move(priors)) {}

void History::add(int action, int outcome) {
    if (!priors_.empty() && (action < 0 || action >= num_actions()))
        throw std::out_of_range("History: action out of range");
    if (outcome != 0 && outcome != 1) throw std::invalid_argument("History: outcome must be 0 or 1");
    records_.push_back(Record{length() + 1, action, outcome});
}

double empirical_mean(const PotentialOutcomesTable& table, int action) {
    double sum = 0.0;
    for (int t = 0; t < table.horizon(); ++t) sum += reward(table.entry(action, t));
    return sum / table.horizon();
}

int best_action(const PotentialOutcomesTable& table) {
    int best = 0;
    double best_mean = empirical_mean(table, 0);
    for (int a = 1; a < table.num_actions(); ++a) {
        double m = empirical_mean(table, a);
        if (m > best_mean) {
            best_mean = m;
            best = a;
        }
    }
    return best;
}

ObservedStats observed_stats(const History& history, int action) {
    ObservedStats st;
    for (const Record& r : history.records()) {
        if (r.action == action) {
            st.count += 1;
            st.successes += r.outcome;
            st.outcomes.push_back(r.outcome);
        }
    }
    return st;
}

double episode_regret(const BanditTask& task, const std::vector<int>& chosen_actions) {
    const auto& table = task.table;
    const int T = table.horizon();
    if (static_cast<int>(chosen_actions.size()) != T)
        throw std::invalid_argument("episode_regret: chosen_actions length must equal horizon");
    double best = 0.0;
    for (int a = 0; a < table.num_actions(); ++a) {
        double s = 0.0;
        for (int t = 0; t < T; ++t) s += reward(table.entry(a, t));
        best = std::max(best, s);
    }
    double earned = 0.0;
    for (int t = 0; t < T; ++t) earned += reward(table.entry(chosen_actions[t], t));
    return (best - earned) / T;
}

}  // namespace psar
