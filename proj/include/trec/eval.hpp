#pragma once

#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "trec/data.hpp"
#include "trec/model.hpp"
#include "trec/train.hpp"

namespace trec {

// |top-k(ranked) ∩ targets| / |targets|. `ranked` must be duplicate-free.
double recall_at_k(const std::vector<int>& ranked, const std::unordered_set<int>& targets,
                   int k);

// Binary-relevance NDCG with IDCG truncated at min(k, |targets|).
double ndcg_at_k(const std::vector<int>& ranked, const std::unordered_set<int>& targets,
                 int k);

enum class Split { kValidation, kTest };
std::string to_string(Split s);

struct MetricsEntry {
    std::string split;
    int k = 0;
    double recall = 0.0;
    double ndcg = 0.0;
    int users = 0;  // users with non-empty target sets
};
using MetricsReport = std::vector<MetricsEntry>;

std::string metrics_to_tsv(const MetricsReport& report);

// Ranks the full catalog minus each user's training items, metrics averaged
// uniformly over users with non-empty target sets. Ties broken by ascending
// item index.
MetricsReport evaluate(const SplitDataset& ds, const ModelParams& params,
                       const Hyperparams& hp, Split split, const std::vector<int>& ks);

// Component switches matching the ablation table rows; flags compose and apply
// to both training and evaluation.
struct AblationSpec {
    bool without_self_attention = false;
    bool without_iti = false;
    bool without_u_plus = false;
    std::optional<Aggregation> aggregation_override;

    Hyperparams apply(Hyperparams hp) const;
};

// The eight standard ablation rows, in table order.
struct AblationRow {
    std::string label;
    AblationSpec spec;
};
std::vector<AblationRow> standard_ablation_rows();

// Trains from scratch with the flagged components disabled and reports test
// metrics.
MetricsReport run_ablation(const SplitDataset& ds, const Hyperparams& hp,
                           const TrainConfig& cfg, const std::vector<int>& ks,
                           const AblationSpec& spec);

struct SweepRow {
    std::string param;
    double value = 0.0;
    MetricsReport metrics;
};

// One full train+evaluate per value. parameter ∈ {d, q, omega, alpha, beta}.
std::vector<SweepRow> sweep(const SplitDataset& ds, const Hyperparams& hp,
                            const TrainConfig& cfg, const std::vector<int>& ks,
                            const std::string& parameter, const std::vector<double>& values);

std::string sweep_to_tsv(const std::vector<SweepRow>& rows);

// Validation Recall@10 hook for the training loop.
ValidationHook validation_recall10_hook(const SplitDataset& ds);

}  // namespace trec
