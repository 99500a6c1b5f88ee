#include "trec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "trec/errors.hpp"

namespace trec {

double recall_at_k(const std::vector<int>& ranked, const std::unordered_set<int>& targets,
                   int k) {
    if (targets.empty()) throw ConfigError("recall_at_k: empty target set");
    const size_t top = std::min<size_t>(static_cast<size_t>(k), ranked.size());
    int hits = 0;
    for (size_t i = 0; i < top; ++i) {
        if (targets.contains(ranked[i])) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(targets.size());
}

double ndcg_at_k(const std::vector<int>& ranked, const std::unordered_set<int>& targets,
                 int k) {
    if (targets.empty()) throw ConfigError("ndcg_at_k: empty target set");
    const size_t top = std::min<size_t>(static_cast<size_t>(k), ranked.size());
    double dcg = 0.0;
    for (size_t i = 0; i < top; ++i) {
        if (targets.contains(ranked[i])) {
            dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);  // 1-based position + 1
        }
    }
    const int ideal = std::min<int>(k, static_cast<int>(targets.size()));
    double idcg = 0.0;
    for (int i = 1; i <= ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 1.0);
    return dcg / idcg;
}

std::string to_string(Split s) { return s == Split::kValidation ? "validation" : "test"; }

std::string metrics_to_tsv(const MetricsReport& report) {
    std::ostringstream out;
    out << "split\tk\trecall\tndcg\tusers\n";
    for (const auto& e : report) {
        out << e.split << '\t' << e.k << '\t' << e.recall << '\t' << e.ndcg << '\t' << e.users
            << '\n';
    }
    return out.str();
}

namespace {

std::unordered_set<int> target_items(const std::vector<Interaction>& interactions) {
    std::unordered_set<int> out;
    for (const auto& it : interactions) out.insert(it.item);
    return out;
}

std::unordered_set<int> train_items(const SplitDataset& ds, int user) {
    std::unordered_set<int> out;
    for (const auto& it : ds.train(user)) out.insert(it.item);
    return out;
}

// Candidate items ordered by descending score, ties by ascending index.
std::vector<int> rank_items(const std::vector<double>& scores) {
    std::vector<int> order;
    order.reserve(scores.size());
    for (int v = 0; v < static_cast<int>(scores.size()); ++v) {
        if (is_ranked_score(scores[v])) order.push_back(v);
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    return order;
}

}  // namespace

MetricsReport evaluate(const SplitDataset& ds, const ModelParams& params,
                       const Hyperparams& hp, Split split, const std::vector<int>& ks) {
    if (ks.empty()) throw ConfigError("evaluate: no K values configured");
    const ItemScoringCache cache = build_item_scoring_cache(ds, params, hp);

    std::vector<double> recall_sum(ks.size(), 0.0);
    std::vector<double> ndcg_sum(ks.size(), 0.0);
    int users_evaluated = 0;

    for (int u = 0; u < ds.num_users(); ++u) {
        const auto& held_out = split == Split::kValidation ? ds.validation(u) : ds.test(u);
        if (held_out.empty()) continue;
        const std::unordered_set<int> targets = target_items(held_out);
        const std::unordered_set<int> exclude = train_items(ds, u);
        const std::vector<double> scores = score_all_items(cache, params, ds, hp, u, exclude);
        const std::vector<int> ranked = rank_items(scores);
        ++users_evaluated;
        for (size_t i = 0; i < ks.size(); ++i) {
            recall_sum[i] += recall_at_k(ranked, targets, ks[i]);
            ndcg_sum[i] += ndcg_at_k(ranked, targets, ks[i]);
        }
    }
    if (users_evaluated == 0) {
        throw ConfigError("evaluate: no users with a non-empty " + to_string(split) +
                          " target set");
    }

    MetricsReport report;
    for (size_t i = 0; i < ks.size(); ++i) {
        report.push_back({to_string(split), ks[i],
                          recall_sum[i] / static_cast<double>(users_evaluated),
                          ndcg_sum[i] / static_cast<double>(users_evaluated),
                          users_evaluated});
    }
    return report;
}

Hyperparams AblationSpec::apply(Hyperparams hp) const {
    if (without_self_attention) hp.use_self_attention = false;
    if (without_iti) hp.use_item_trend = false;
    if (without_u_plus) hp.use_short_term = false;
    if (aggregation_override) hp.aggregation = *aggregation_override;
    return hp;
}

std::vector<AblationRow> standard_ablation_rows() {
    std::vector<AblationRow> rows(8);
    rows[0].label = "(1) TRec";
    rows[1].label = "(2) w/o Self-Att";
    rows[1].spec.without_self_attention = true;
    rows[2].label = "(3) w/o ITI";
    rows[2].spec.without_iti = true;
    rows[3].label = "(4) w/o Self-Att&ITI";
    rows[3].spec.without_self_attention = true;
    rows[3].spec.without_iti = true;
    rows[4].label = "(5) w/o u+";
    rows[4].spec.without_u_plus = true;
    rows[5].label = "(6) w/o u+&ITI";
    rows[5].spec.without_u_plus = true;
    rows[5].spec.without_iti = true;
    rows[6].label = "(7) aggr-avg";
    rows[6].spec.aggregation_override = Aggregation::kMean;
    rows[7].label = "(8) aggr-max";
    rows[7].spec.aggregation_override = Aggregation::kMax;
    return rows;
}

MetricsReport run_ablation(const SplitDataset& ds, const Hyperparams& hp,
                           const TrainConfig& cfg, const std::vector<int>& ks,
                           const AblationSpec& spec) {
    const Hyperparams ablated = spec.apply(hp);
    ModelParams params = init_params(ds.num_users(), ds.num_items(), ablated, cfg.seed);
    OptimizerState opt(cfg.optimizer, cfg);
    TrainConfig quiet = cfg;
    quiet.eval_validation = false;
    train(ds, params, ablated, quiet, opt);
    return evaluate(ds, params, ablated, Split::kTest, ks);
}

std::vector<SweepRow> sweep(const SplitDataset& ds, const Hyperparams& hp,
                            const TrainConfig& cfg, const std::vector<int>& ks,
                            const std::string& parameter, const std::vector<double>& values) {
    if (values.empty()) throw ConfigError("sweep: no values given");
    static const std::vector<std::string> kKnown = {"d", "q", "omega", "alpha", "beta"};
    if (std::find(kKnown.begin(), kKnown.end(), parameter) == kKnown.end()) {
        std::string names;
        for (const auto& n : kKnown) names += (names.empty() ? "" : ", ") + n;
        throw ConfigError("sweep: unknown parameter '" + parameter + "' (valid: " + names +
                          ")");
    }

    std::vector<SweepRow> rows;
    for (double value : values) {
        Hyperparams swept = hp;
        if (parameter == "d") {
            swept.d = static_cast<int>(value);
        } else if (parameter == "q") {
            swept.q = static_cast<int>(value);
        } else if (parameter == "omega") {
            swept.omega = value;
        } else if (parameter == "alpha") {
            swept.alpha = value;
        } else {
            swept.beta = value;
        }
        swept.validate();
        ModelParams params = init_params(ds.num_users(), ds.num_items(), swept, cfg.seed);
        OptimizerState opt(cfg.optimizer, cfg);
        TrainConfig quiet = cfg;
        quiet.eval_validation = false;
        train(ds, params, swept, quiet, opt);
        rows.push_back({parameter, value, evaluate(ds, params, swept, Split::kTest, ks)});
    }
    return rows;
}

std::string sweep_to_tsv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "param\tvalue\tk\trecall\tndcg\n";
    for (const auto& row : rows) {
        for (const auto& e : row.metrics) {
            out << row.param << '\t' << row.value << '\t' << e.k << '\t' << e.recall << '\t'
                << e.ndcg << '\n';
        }
    }
    return out.str();
}

ValidationHook validation_recall10_hook(const SplitDataset& ds) {
    return [&ds](const ModelParams& params, const Hyperparams& hp) {
        bool any = false;
        for (int u = 0; u < ds.num_users() && !any; ++u) {
            any = !ds.validation(u).empty();
        }
        if (!any) return 0.0;
        const MetricsReport report = evaluate(ds, params, hp, Split::kValidation, {10});
        return report.front().recall;
    };
}

}  // namespace trec
