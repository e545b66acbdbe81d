#include "psar/eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <thread>

namespace psar {

namespace {

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, std::max(1, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    auto worker = [&](int w) {
        for (int i = w; i < n; i += threads) fn(i);
    };
    for (int w = 1; w < threads; ++w) pool.emplace_back(worker, w);
    worker(0);
    for (auto& t : pool) t.join();
}

std::vector<double> hindsight_means(const BanditTask& task) {
    std::vector<double> mu(static_cast<size_t>(task.table.num_actions()));
    for (int a = 0; a < task.table.num_actions(); ++a) mu[static_cast<size_t>(a)] = empirical_mean(task.table, a);
    return mu;
}

}  // namespace

MeanSe RegretCurve::mean_cumulative_at(int t) const {
    if (t < 1 || t > horizon) throw std::out_of_range("RegretCurve: timestep out of range");
    std::vector<double> xs;
    xs.reserve(cumulative.size());
    for (const auto& rep : cumulative) xs.push_back(rep[static_cast<size_t>(t - 1)]);
    return mean_se(xs);
}

MeanSe RegretCurve::mean_episode_regret() const { return mean_se(episode_regret); }

EpisodeResult run_episode(Policy& policy, const BanditTask& task, Rng& rng) {
    const int T = task.table.horizon();
    std::vector<double> mu = hindsight_means(task);
    double mu_best = *std::max_element(mu.begin(), mu.end());
    History history(task.priors);
    EpisodeResult out;
    out.actions.reserve(static_cast<size_t>(T));
    out.instant.reserve(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) {
        int a = policy.select_action(history, rng);
        if (a < 0 || a >= task.table.num_actions())
            throw std::logic_error("policy returned an out-of-range action");
        int y = task.table.entry(a, t);
        history.add(a, y);
        policy.observe(history, history.records().back(), rng);
        out.actions.push_back(a);
        out.instant.push_back(mu_best - mu[static_cast<size_t>(a)]);
    }
    out.regret = episode_regret(task, out.actions);
    return out;
}

std::vector<RegretCurve> run_regret_experiment(const std::vector<PolicySpec>& policies,
                                               const TaskSampler& sampler,
                                               const RegretExperimentConfig& config) {
    if (policies.empty()) throw std::invalid_argument("run_regret_experiment: no policies");
    if (config.reps < 1) throw std::invalid_argument("run_regret_experiment: reps must be positive");

    std::vector<RegretCurve> curves(policies.size());
    for (size_t p = 0; p < policies.size(); ++p) {
        curves[p].policy = policies[p].label;
        curves[p].horizon = config.horizon;
        curves[p].instant.resize(static_cast<size_t>(config.reps));
        curves[p].cumulative.resize(static_cast<size_t>(config.reps));
        curves[p].episode_regret.resize(static_cast<size_t>(config.reps));
    }

    parallel_for(config.reps, config.threads, [&](int rep) {
        Rng task_rng = make_rng(config.base_seed, static_cast<std::uint64_t>(rep));
        SampledTask st = sampler.sample(config.num_actions, config.horizon, task_rng);
        for (size_t p = 0; p < policies.size(); ++p) {
            PolicyContext ctx = policies[p].context;
            ctx.horizon = config.horizon;
            auto policy = make_policy(policies[p].name, ctx);
            Rng ep_rng = make_rng(derive_seed(config.base_seed, 7001 + static_cast<std::uint64_t>(p)),
                                  static_cast<std::uint64_t>(rep));
            EpisodeResult ep = run_episode(*policy, st.task, ep_rng);
            auto& cum = curves[p].cumulative[static_cast<size_t>(rep)];
            cum.resize(ep.instant.size());
            double acc = 0.0;
            for (size_t t = 0; t < ep.instant.size(); ++t) {
                acc += ep.instant[t];
                cum[t] = acc;
            }
            curves[p].instant[static_cast<size_t>(rep)] = std::move(ep.instant);
            curves[p].episode_regret[static_cast<size_t>(rep)] = ep.regret;
        }
    });
    return curves;
}

void write_regret_csv(std::ostream& out, const std::vector<RegretCurve>& curves) {
    out << "policy,rep,t,instant_regret,cum_regret\n";
    out.precision(17);
    for (const auto& c : curves)
        for (size_t rep = 0; rep < c.instant.size(); ++rep)
            for (size_t t = 0; t < c.instant[rep].size(); ++t)
                out << c.policy << ',' << rep << ',' << (t + 1) << ',' << c.instant[rep][t] << ','
                    << c.cumulative[rep][t] << '\n';
}

std::vector<CoverageCell> run_coverage_experiment(
    const std::vector<std::pair<std::string, const SequenceModel*>>& models,
    const ActionDataset& heldout, const CoverageConfig& config) {
    if (heldout.entries.empty()) throw std::invalid_argument("coverage: empty held-out set");
    if (config.num_samples < 2) throw std::invalid_argument("coverage: need at least 2 samples");
    const int num_actions = heldout.size();
    const int T = static_cast<int>(heldout.entries.front().outcomes.size());
    for (const auto& e : heldout.entries)
        if (static_cast<int>(e.outcomes.size()) != T)
            throw std::invalid_argument("coverage: held-out rows must share one horizon");
    for (int t_obs : config.t_obs)
        if (t_obs < 0 || t_obs >= T)
            throw std::invalid_argument("coverage: t_obs must lie in [0, horizon)");
    for (double level : config.levels)
        if (!(level > 0.0) || !(level < 1.0))
            throw std::invalid_argument("coverage: level must lie in (0,1)");

    std::vector<CoverageCell> cells;
    for (size_t m = 0; m < models.size(); ++m) {
        const SequenceModel& model = *models[m].second;
        for (size_t ti = 0; ti < config.t_obs.size(); ++ti) {
            int t_obs = config.t_obs[ti];
            // hits[level][action], widths[level][action]
            std::vector<std::vector<double>> hits(config.levels.size(),
                                                  std::vector<double>(static_cast<size_t>(num_actions)));
            std::vector<std::vector<double>> widths(
                config.levels.size(), std::vector<double>(static_cast<size_t>(num_actions)));
            parallel_for(num_actions, config.threads, [&](int a) {
                const ActionEntry& e = heldout.entries[static_cast<size_t>(a)];
                double mu_true =
                    std::accumulate(e.outcomes.begin(), e.outcomes.end(), 0.0) / e.outcomes.size();
                SufficientStats st;
                for (int t = 0; t < t_obs; ++t) st.push(e.outcomes[static_cast<size_t>(t)]);
                Rng rng = make_rng(derive_seed(config.seed, 40000 + 97 * m + ti),
                                   static_cast<std::uint64_t>(a));
                std::vector<double> samples =
                    sample_arm_means(model, e.features, st, T, std::nullopt, config.num_samples, rng);
                for (size_t li = 0; li < config.levels.size(); ++li) {
                    CredibleInterval ci = credible_interval(samples, config.levels[li]);
                    hits[li][static_cast<size_t>(a)] = ci.contains(mu_true) ? 1.0 : 0.0;
                    widths[li][static_cast<size_t>(a)] = ci.width();
                }
            });
            for (size_t li = 0; li < config.levels.size(); ++li) {
                CoverageCell cell;
                cell.model = models[m].first;
                cell.t_obs = t_obs;
                cell.level = config.levels[li];
                MeanSe h = mean_se(hits[li]);
                MeanSe w = mean_se(widths[li]);
                cell.coverage = h.mean;
                cell.coverage_se = std::sqrt(h.mean * (1.0 - h.mean) / num_actions);
                cell.mean_width = w.mean;
                cell.width_se = w.se;
                cells.push_back(cell);
            }
        }
    }
    return cells;
}

void write_coverage_csv(std::ostream& out, const std::vector<CoverageCell>& cells) {
    out << "model,t_obs,level,coverage,coverage_se,mean_width,width_se\n";
    out.precision(10);
    for (const auto& c : cells)
        out << c.model << ',' << c.t_obs << ',' << c.level << ',' << c.coverage << ','
            << c.coverage_se << ',' << c.mean_width << ',' << c.width_se << '\n';
}

void write_check_line(std::ostream& out, const CheckResult& r) {
    out.precision(12);
    out << r.name << ',' << r.lhs << ',' << r.rhs << ',' << r.margin << ','
        << (r.pass ? "pass" : "FAIL") << '\n';
}

CheckResult check_loss_kl_identity(const SequenceModel& model, const SequenceModel& truth,
                                   const ZAtoms& zs, int horizon, double tol) {
    if (horizon > 10) throw std::invalid_argument("loss-kl identity: horizon must be <= 10");
    if (zs.points.empty() || zs.points.size() != zs.weights.size())
        throw std::invalid_argument("loss-kl identity: bad Z atoms");

    double lhs = 0.0, rhs = 0.0, wsum = 0.0;
    for (size_t zi = 0; zi < zs.points.size(); ++zi) {
        const PriorFeatures& z = zs.points[zi];
        ArmPrior mp = model.arm_prior(z), tp = truth.arm_prior(z);
        double lhs_z = 0.0, rhs_z = 0.0;
        // Walk all binary sequences once, tracking per-step log terms for
        // the loss difference and plain products for the joint KL.
        struct Frame {
            SufficientStats st;
            double lp_truth_steps;
            double lp_model_steps;
            double p_truth_joint;
            double p_model_joint;
            int depth;
        };
        std::vector<Frame> stack = {{SufficientStats(), 0.0, 0.0, 1.0, 1.0, 0}};
        while (!stack.empty()) {
            Frame f = stack.back();
            stack.pop_back();
            if (f.depth == horizon) {
                lhs_z += std::exp(f.lp_truth_steps) * (f.lp_truth_steps - f.lp_model_steps);
                rhs_z += f.p_truth_joint * std::log(f.p_truth_joint / f.p_model_joint);
                continue;
            }
            double pt = truth.predict_with_prior(tp, f.st);
            double pm = model.predict_with_prior(mp, f.st);
            for (int y = 0; y <= 1; ++y) {
                Frame g = f;
                g.st.push(y);
                g.depth += 1;
                double qt = y ? pt : 1.0 - pt;
                double qm = y ? pm : 1.0 - pm;
                g.lp_truth_steps += std::log(qt);
                g.lp_model_steps += std::log(qm);
                g.p_truth_joint *= qt;
                g.p_model_joint *= qm;
                stack.push_back(g);
            }
        }
        lhs += zs.weights[zi] * lhs_z;
        rhs += zs.weights[zi] * rhs_z;
        wsum += zs.weights[zi];
    }
    lhs /= wsum;
    rhs /= wsum;
    CheckResult r;
    r.name = "loss_kl_identity";
    r.lhs = lhs;
    r.rhs = rhs;
    r.margin = tol - std::abs(lhs - rhs);
    r.pass = std::abs(lhs - rhs) < tol;
    return r;
}

namespace {

// ----- exhaustive enumeration machinery (small T, small |A|) -----

struct ArmObservation {
    SufficientStats stats;                      // observed outcomes of this arm
    std::vector<std::pair<int, int>> entries;   // (timestep index, outcome)
};

using HistoryState = std::vector<ArmObservation>;  // one per arm

// Law of the generated missing-entry string for one arm (in generation
// order), under a model's predictive chain started at the observed stats.
void row_gen_law(const SequenceModel& model, const ArmPrior& prior, SufficientStats st, int len,
                 double prob, std::uint32_t bits, int depth,
                 std::vector<std::pair<std::uint32_t, double>>& out) {
    if (depth == len) {
        out.push_back({bits, prob});
        return;
    }
    double p = model.predict_with_prior(prior, st);
    SufficientStats st1 = st;
    st1.push(1);
    row_gen_law(model, prior, st1, len, prob * p, bits | (1u << depth), depth + 1, out);
    SufficientStats st0 = st;
    st0.push(0);
    row_gen_law(model, prior, st0, len, prob * (1.0 - p), bits, depth + 1, out);
}

// Distribution over the generated-sum per arm.
std::vector<double> row_sum_law(const SequenceModel& model, const ArmPrior& prior,
                                const SufficientStats& st, int len) {
    std::vector<std::pair<std::uint32_t, double>> strings;
    row_gen_law(model, prior, st, len, 1.0, 0, 0, strings);
    std::vector<double> sums(static_cast<size_t>(len) + 1, 0.0);
    for (auto [bits, p] : strings) sums[static_cast<size_t>(std::popcount(bits))] += p;
    return sums;
}

// Action distribution of one-imputation Thompson sampling (lowest-index
// argmax of imputed means) given the per-arm observation state.
std::vector<double> ts_action_distribution(const SequenceModel& model,
                                           const std::vector<ArmPrior>& priors,
                                           const HistoryState& hs, int horizon) {
    const int A = static_cast<int>(hs.size());
    std::vector<std::vector<double>> sum_laws(static_cast<size_t>(A));
    for (int a = 0; a < A; ++a)
        sum_laws[static_cast<size_t>(a)] =
            row_sum_law(model, priors[static_cast<size_t>(a)], hs[static_cast<size_t>(a)].stats,
                        horizon - hs[static_cast<size_t>(a)].stats.n);
    std::vector<double> dist(static_cast<size_t>(A), 0.0);
    std::vector<int> idx(static_cast<size_t>(A), 0);
    // Cross product over per-arm generated sums.
    while (true) {
        double prob = 1.0;
        std::vector<double> means(static_cast<size_t>(A));
        for (int a = 0; a < A; ++a) {
            prob *= sum_laws[static_cast<size_t>(a)][static_cast<size_t>(idx[static_cast<size_t>(a)])];
            means[static_cast<size_t>(a)] =
                (hs[static_cast<size_t>(a)].stats.s + idx[static_cast<size_t>(a)]) /
                static_cast<double>(horizon);
        }
        if (prob > 0.0) dist[static_cast<size_t>(argmax_lowest(means))] += prob;
        int carry = 0;
        while (carry < A) {
            idx[static_cast<size_t>(carry)] += 1;
            if (idx[static_cast<size_t>(carry)] <
                static_cast<int>(sum_laws[static_cast<size_t>(carry)].size()))
                break;
            idx[static_cast<size_t>(carry)] = 0;
            carry += 1;
        }
        if (carry == A) break;
    }
    return dist;
}

// Posterior law of the hindsight-best action by direct Bayes conditioning:
// enumerate complete ordered rows under the truth chain, keep those
// matching the observed entries at their actual timesteps.
std::vector<double> best_action_posterior(const SequenceModel& truth,
                                          const std::vector<ArmPrior>& priors,
                                          const HistoryState& hs, int horizon) {
    const int A = static_cast<int>(hs.size());
    // Per arm: posterior over the full-row sum.
    std::vector<std::vector<double>> sum_laws(static_cast<size_t>(A),
                                              std::vector<double>(static_cast<size_t>(horizon) + 1, 0.0));
    for (int a = 0; a < A; ++a) {
        std::vector<std::pair<std::uint32_t, double>> rows;
        row_gen_law(truth, priors[static_cast<size_t>(a)], SufficientStats(), horizon, 1.0, 0, 0, rows);
        double total = 0.0;
        for (auto [bits, p] : rows) {
            bool consistent = true;
            for (auto [t, y] : hs[static_cast<size_t>(a)].entries)
                if (static_cast<int>((bits >> t) & 1u) != y) {
                    consistent = false;
                    break;
                }
            if (!consistent) continue;
            sum_laws[static_cast<size_t>(a)][static_cast<size_t>(std::popcount(bits))] += p;
            total += p;
        }
        if (total <= 0.0) throw std::logic_error("best_action_posterior: history has probability zero");
        for (auto& x : sum_laws[static_cast<size_t>(a)]) x /= total;
    }
    std::vector<double> dist(static_cast<size_t>(A), 0.0);
    std::vector<int> idx(static_cast<size_t>(A), 0);
    while (true) {
        double prob = 1.0;
        std::vector<double> means(static_cast<size_t>(A));
        for (int a = 0; a < A; ++a) {
            prob *= sum_laws[static_cast<size_t>(a)][static_cast<size_t>(idx[static_cast<size_t>(a)])];
            means[static_cast<size_t>(a)] = idx[static_cast<size_t>(a)] / static_cast<double>(horizon);
        }
        if (prob > 0.0) dist[static_cast<size_t>(argmax_lowest(means))] += prob;
        int carry = 0;
        while (carry < A) {
            idx[static_cast<size_t>(carry)] += 1;
            if (idx[static_cast<size_t>(carry)] <
                static_cast<int>(sum_laws[static_cast<size_t>(carry)].size()))
                break;
            idx[static_cast<size_t>(carry)] = 0;
            carry += 1;
        }
        if (carry == A) break;
    }
    return dist;
}

// KL between the model's and the truth's generation law of the full
// table completion given the observation state (both factor across arms).
double table_generation_kl(const SequenceModel& model, const std::vector<ArmPrior>& mpriors,
                           const SequenceModel& truth, const std::vector<ArmPrior>& tpriors,
                           const HistoryState& hs, int horizon) {
    double kl = 0.0;
    for (size_t a = 0; a < hs.size(); ++a) {
        int len = horizon - hs[a].stats.n;
        std::vector<std::pair<std::uint32_t, double>> m_law, t_law;
        row_gen_law(model, mpriors[a], hs[a].stats, len, 1.0, 0, 0, m_law);
        row_gen_law(truth, tpriors[a], hs[a].stats, len, 1.0, 0, 0, t_law);
        std::map<std::uint32_t, double> t_map;
        for (auto [bits, p] : t_law) t_map[bits] = p;
        for (auto [bits, p] : m_law) {
            if (p <= 0.0) continue;
            double q = t_map[bits];
            kl += p * std::log(p / q);
        }
    }
    return kl;
}

// KL between the induced laws of the per-arm mean vector (pushforward of
// the table laws through the row means).
double mean_pushforward_kl(const SequenceModel& model, const std::vector<ArmPrior>& mpriors,
                           const SequenceModel& truth, const std::vector<ArmPrior>& tpriors,
                           const HistoryState& hs, int horizon) {
    double kl = 0.0;
    for (size_t a = 0; a < hs.size(); ++a) {
        int len = horizon - hs[a].stats.n;
        std::vector<double> m_law = row_sum_law(model, mpriors[a], hs[a].stats, len);
        std::vector<double> t_law = row_sum_law(truth, tpriors[a], hs[a].stats, len);
        for (size_t s = 0; s < m_law.size(); ++s)
            if (m_law[s] > 0.0) kl += m_law[s] * std::log(m_law[s] / t_law[s]);
    }
    return kl;
}

}  // namespace

Prop1Result check_prop1_bound(const SequenceModel& model, const SequenceModel& truth,
                              const std::vector<PriorFeatures>& zs, int horizon, double tol) {
    const int A = static_cast<int>(zs.size());
    if (A < 1 || A > 3 || horizon > 4)
        throw std::invalid_argument("check_prop1_bound: enumeration requires |A| <= 3, T <= 4");
    std::vector<ArmPrior> mpriors, tpriors;
    for (const auto& z : zs) {
        mpriors.push_back(model.arm_prior(z));
        tpriors.push_back(truth.arm_prior(z));
    }

    Prop1Result result;
    result.lhs_per_t.assign(static_cast<size_t>(horizon), 0.0);

    // Depth-first walk over histories generated by ts_psar(model) in the
    // true environment.
    struct Node {
        HistoryState hs;
        double prob;
        int depth;
    };
    HistoryState empty(static_cast<size_t>(A));
    std::vector<Node> stack = {{empty, 1.0, 0}};
    while (!stack.empty()) {
        Node node = std::move(stack.back());
        stack.pop_back();
        result.lhs_per_t[static_cast<size_t>(node.depth)] +=
            node.prob * table_generation_kl(model, mpriors, truth, tpriors, node.hs, horizon);
        if (node.depth == 0)
            result.pushforward_lhs +=
                node.prob * mean_pushforward_kl(model, mpriors, truth, tpriors, node.hs, horizon);
        if (node.depth + 1 >= horizon) continue;
        std::vector<double> action_dist = ts_action_distribution(model, mpriors, node.hs, horizon);
        for (int a = 0; a < A; ++a) {
            double pa = action_dist[static_cast<size_t>(a)];
            if (pa <= 0.0) continue;
            double py = truth.predict_with_prior(tpriors[static_cast<size_t>(a)],
                                                 node.hs[static_cast<size_t>(a)].stats);
            for (int y = 0; y <= 1; ++y) {
                Node next = node;
                next.depth += 1;
                next.prob = node.prob * pa * (y ? py : 1.0 - py);
                if (next.prob <= 0.0) continue;
                auto& arm = next.hs[static_cast<size_t>(a)];
                arm.entries.push_back({node.depth, y});
                arm.stats.push(y);
                stack.push_back(std::move(next));
            }
        }
    }

    double rhs = 0.0;
    for (const auto& z : zs) {
        ZAtoms single{{z}, {1.0}};
        rhs += excess_loss_exact(model, truth, single, horizon);
    }
    result.rhs = rhs;
    result.holds = true;
    for (double lhs : result.lhs_per_t)
        if (!(lhs <= rhs + tol)) result.holds = false;
    if (!(result.pushforward_lhs <= rhs + tol)) result.holds = false;
    return result;
}

CheckResult check_prob_matching(const SequenceModel& model, const SequenceModel& truth,
                                const std::vector<PriorFeatures>& zs, int horizon, double tol) {
    const int A = static_cast<int>(zs.size());
    if (A < 1 || A > 3 || horizon > 4)
        throw std::invalid_argument("check_prob_matching: enumeration requires |A| <= 3, T <= 4");
    std::vector<ArmPrior> mpriors, tpriors;
    for (const auto& z : zs) {
        mpriors.push_back(model.arm_prior(z));
        tpriors.push_back(truth.arm_prior(z));
    }

    double max_tv = 0.0;
    struct Node {
        HistoryState hs;
        int depth;
    };
    HistoryState empty(static_cast<size_t>(A));
    std::vector<Node> stack = {{empty, 0}};
    while (!stack.empty()) {
        Node node = std::move(stack.back());
        stack.pop_back();
        std::vector<double> via_generation = ts_action_distribution(model, mpriors, node.hs, horizon);
        std::vector<double> via_completion = best_action_posterior(truth, tpriors, node.hs, horizon);
        double tv = 0.0;
        for (int a = 0; a < A; ++a)
            tv += std::abs(via_generation[static_cast<size_t>(a)] -
                           via_completion[static_cast<size_t>(a)]);
        max_tv = std::max(max_tv, 0.5 * tv);
        if (node.depth + 1 >= horizon) continue;
        // All histories: any action, either outcome.
        for (int a = 0; a < A; ++a) {
            for (int y = 0; y <= 1; ++y) {
                Node next = node;
                next.depth += 1;
                auto& arm = next.hs[static_cast<size_t>(a)];
                arm.entries.push_back({node.depth, y});
                arm.stats.push(y);
                stack.push_back(std::move(next));
            }
        }
    }

    CheckResult r;
    r.name = "probability_matching";
    r.lhs = max_tv;
    r.rhs = tol;
    r.margin = tol - max_tv;
    r.pass = max_tv < tol;
    return r;
}

SimulatedEnvironment::SimulatedEnvironment(const SequenceModel& model, std::vector<PriorFeatures> zs)
    : model_(&model), zs_(std::move(zs)) {
    if (zs_.empty()) throw std::invalid_argument("simulator: need at least one arm");
    for (const auto& z : zs_) arm_priors_.push_back(model_->arm_prior(z));
    stats_.resize(zs_.size());
    streams_.resize(zs_.size());
}

int SimulatedEnvironment::play(int action, Rng& rng) {
    if (action < 0 || action >= num_actions()) throw std::out_of_range("simulator: action out of range");
    auto a = static_cast<size_t>(action);
    double p = model_->predict_with_prior(arm_priors_[a], stats_[a]);
    int y = sample_bernoulli(p, rng);
    stats_[a].push(y);
    streams_[a].push_back(y);
    return y;
}

int SimulatedEnvironment::play_count(int action) const {
    return static_cast<int>(streams_[static_cast<size_t>(action)].size());
}

PotentialOutcomesTable SimulatedEnvironment::full_table(int horizon, Rng& rng) {
    for (size_t a = 0; a < zs_.size(); ++a) {
        if (static_cast<int>(streams_[a].size()) > horizon)
            throw std::invalid_argument("simulator: streams already exceed the horizon");
        while (static_cast<int>(streams_[a].size()) < horizon) play(static_cast<int>(a), rng);
    }
    PotentialOutcomesTable table(num_actions(), horizon);
    for (size_t a = 0; a < zs_.size(); ++a)
        for (int t = 0; t < horizon; ++t)
            table.set(static_cast<int>(a), t, streams_[a][static_cast<size_t>(t)]);
    return table;
}

EpisodeResult run_simulated_episode(SimulatedEnvironment& env, Policy& policy, int horizon,
                                    Rng& rng) {
    History history(env.priors());
    EpisodeResult out;
    double earned = 0.0;
    for (int t = 0; t < horizon; ++t) {
        int a = policy.select_action(history, rng);
        int y = env.play(a, rng);
        history.add(a, y);
        policy.observe(history, history.records().back(), rng);
        out.actions.push_back(a);
        earned += reward(y);
    }
    PotentialOutcomesTable table = env.full_table(horizon, rng);
    double best = 0.0;
    std::vector<double> mu(static_cast<size_t>(env.num_actions()));
    for (int a = 0; a < env.num_actions(); ++a) {
        mu[static_cast<size_t>(a)] = empirical_mean(table, a);
        best = std::max(best, mu[static_cast<size_t>(a)]);
    }
    for (int t = 0; t < horizon; ++t)
        out.instant.push_back(best - mu[static_cast<size_t>(out.actions[static_cast<size_t>(t)])]);
    out.regret = (best * horizon - earned) / horizon;
    return out;
}

SimToRealResult check_sim_to_real(const std::string& policy_name, const SequenceModel& model,
                                  const SequenceModel& truth, const TaskSampler& truth_sampler,
                                  const SimToRealConfig& config) {
    SimToRealResult result;

    std::vector<double> real(static_cast<size_t>(config.reps));
    parallel_for(config.reps, config.threads, [&](int rep) {
        Rng task_rng = make_rng(config.seed, static_cast<std::uint64_t>(rep));
        SampledTask st = truth_sampler.sample(config.num_actions, config.horizon, task_rng);
        PolicyContext ctx;
        ctx.horizon = config.horizon;
        ctx.model = &model;
        auto policy = make_policy(policy_name, ctx);
        Rng ep_rng = make_rng(derive_seed(config.seed, 8001), static_cast<std::uint64_t>(rep));
        real[static_cast<size_t>(rep)] = run_episode(*policy, st.task, ep_rng).regret;
    });
    result.real = mean_se(real);

    std::vector<double> sim(static_cast<size_t>(config.reps));
    parallel_for(config.reps, config.threads, [&](int rep) {
        Rng env_rng = make_rng(derive_seed(config.seed, 8002), static_cast<std::uint64_t>(rep));
        std::vector<PriorFeatures> zs;
        for (int a = 0; a < config.num_actions; ++a) zs.push_back(truth_sampler.sample_features(env_rng));
        SimulatedEnvironment env(model, std::move(zs));
        PolicyContext ctx;
        ctx.horizon = config.horizon;
        ctx.model = &model;
        auto policy = make_policy(policy_name, ctx);
        Rng ep_rng = make_rng(derive_seed(config.seed, 8003), static_cast<std::uint64_t>(rep));
        sim[static_cast<size_t>(rep)] = run_simulated_episode(env, *policy, config.horizon, ep_rng).regret;
    });
    result.sim = mean_se(sim);

    double excess = 0.0, excess_se = 0.0;
    if (config.exact_z) {
        excess = excess_loss_exact(model, truth, *config.exact_z, config.horizon);
    } else {
        Rng rng = make_rng(config.seed, 8004);
        MeanSe est = excess_loss_mc(model, truth, truth_sampler, config.horizon,
                                    config.excess_mc_samples, rng);
        excess = std::max(0.0, est.mean);
        excess_se = est.se;
    }
    result.penalty = std::sqrt(config.num_actions / 2.0 * excess);
    // First-order error propagation through the square root.
    result.penalty_se =
        excess > 0.0 ? 0.5 * std::sqrt(config.num_actions / 2.0 / excess) * excess_se : 0.0;

    double slack = 3.0 * std::sqrt(result.real.se * result.real.se + result.sim.se * result.sim.se +
                                   result.penalty_se * result.penalty_se);
    result.holds = result.real.mean <= result.sim.mean + result.penalty + slack;
    return result;
}

namespace {

class LowerBoundTaskSampler : public TaskSampler {
  public:
    SampledTask sample(int num_actions, int horizon, Rng& rng) const override {
        std::vector<PriorFeatures> priors;
        std::vector<LatentMixtureState> latents;
        PotentialOutcomesTable table(num_actions, horizon);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int a = 0; a < num_actions; ++a) {
            bool risky = u(rng) < 0.5;
            double mu = risky ? (u(rng) < 0.5 ? 0.75 : 0.25) : 0.5;
            for (int t = 0; t < horizon; ++t) table.set(a, t, sample_bernoulli(mu, rng));
            priors.push_back(PriorFeatures({risky ? 1.0 : 0.0}));
            latents.push_back({mu, risky ? 1 : 0});
        }
        return {BanditTask(std::move(priors), std::move(table)), std::move(latents)};
    }
    PriorFeatures sample_features(Rng& rng) const override {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        return PriorFeatures({u(rng) < 0.5 ? 1.0 : 0.0});
    }
    int feature_dim() const override { return 1; }
};

DiscreteMixtureModel make_lower_bound_prior(double risky_high_mass) {
    return DiscreteMixtureModel(
        "lower_bound", {0.25, 0.5, 0.75}, [risky_high_mass](const PriorFeatures& z) {
            if (z[0] > 0.5) return std::vector<double>{1.0 - risky_high_mass, 0.0, risky_high_mass};
            return std::vector<double>{0.0, 1.0, 0.0};
        });
}

// Exact latent-parameter Thompson sampling over the discrete atoms.
class DiscreteLatentTsPolicy : public Policy {
  public:
    explicit DiscreteLatentTsPolicy(const DiscreteMixtureModel& model) : model_(&model) {}
    std::string name() const override { return "ts_discrete_latent"; }
    int select_action(const History& history, Rng& rng) override {
        std::vector<double> draws(static_cast<size_t>(history.num_actions()));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int a = 0; a < history.num_actions(); ++a) {
            ArmPrior prior = model_->arm_prior(history.priors()[static_cast<size_t>(a)]);
            std::vector<double> w = model_->posterior_weights(prior, stats_of(history, a));
            double r = u(rng), acc = 0.0;
            size_t pick = w.size() - 1;
            for (size_t i = 0; i < w.size(); ++i) {
                acc += w[i];
                if (r < acc) {
                    pick = i;
                    break;
                }
            }
            draws[static_cast<size_t>(a)] = model_->atoms()[pick];
        }
        return argmax_uniform(draws, rng);
    }

  private:
    const DiscreteMixtureModel* model_;
};

}  // namespace

std::vector<LowerBoundRow> run_lower_bound_instance(const std::vector<int>& horizons, int reps,
                                                    int num_actions, std::uint64_t seed,
                                                    int threads) {
    LowerBoundTaskSampler sampler;
    std::vector<LowerBoundRow> rows;
    for (int T : horizons) {
        double high_mass = 1.0 / (static_cast<double>(T) * T);
        DiscreteMixtureModel true_prior = make_lower_bound_prior(0.5);
        DiscreteMixtureModel wrong_prior = make_lower_bound_prior(high_mass);

        LowerBoundRow row;
        row.horizon = T;
        row.prior_kl = 0.5 * std::log(0.5 / high_mass) + 0.5 * std::log(0.5 / (1.0 - high_mass));

        for (int variant = 0; variant < 2; ++variant) {
            const DiscreteMixtureModel& prior_model = variant == 0 ? true_prior : wrong_prior;
            std::vector<double> regrets(static_cast<size_t>(reps));
            parallel_for(reps, threads, [&](int rep) {
                Rng task_rng = make_rng(derive_seed(seed, 9100 + static_cast<std::uint64_t>(T)),
                                        static_cast<std::uint64_t>(rep));
                SampledTask st = sampler.sample(num_actions, T, task_rng);
                DiscreteLatentTsPolicy policy(prior_model);
                Rng ep_rng =
                    make_rng(derive_seed(seed, 9200 + static_cast<std::uint64_t>(T) * 2 + variant),
                             static_cast<std::uint64_t>(rep));
                regrets[static_cast<size_t>(rep)] = run_episode(policy, st.task, ep_rng).regret;
            });
            if (variant == 0)
                row.true_prior_regret = mean_se(regrets);
            else
                row.misspecified_regret = mean_se(regrets);
        }
        rows.push_back(row);
    }
    return rows;
}

OptimumGapResult check_optimum_gap(const TaskSampler& sampler, int num_actions, int horizon,
                                   int reps, std::uint64_t seed) {
    std::vector<double> gaps(static_cast<size_t>(reps));
    parallel_for(reps, 0, [&](int rep) {
        Rng rng = make_rng(derive_seed(seed, 9500), static_cast<std::uint64_t>(rep));
        SampledTask st = sampler.sample(num_actions, horizon, rng);
        double gap = 0.0;
        for (int a = 0; a < num_actions; ++a)
            gap = std::max(gap, std::abs(st.latents[static_cast<size_t>(a)].mu -
                                         empirical_mean(st.task.table, a)));
        gaps[static_cast<size_t>(rep)] = gap;
    });
    OptimumGapResult result;
    result.gap = mean_se(gaps);
    result.bound = std::sqrt(2.0 * std::log(static_cast<double>(num_actions)) / horizon);
    result.holds = result.gap.mean <= result.bound + 3.0 * result.gap.se;
    return result;
}

}  // namespace psar
