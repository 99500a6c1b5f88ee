#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "trec/autodiff.hpp"
#include "trec/data.hpp"
#include "trec/matrix.hpp"

namespace trec {

enum class Aggregation { kMean, kMax };

Aggregation aggregation_from_string(const std::string& s);
std::string to_string(Aggregation a);

struct Hyperparams {
    int d = 100;
    int p = 5;
    int q = 5;
    double omega = 0.4;
    double alpha = 1.0;
    double beta = 1.0;
    Aggregation aggregation = Aggregation::kMean;
    // Separate tables for sequence/trend lookups instead of sharing the
    // long-term ones.
    bool untied_tables = false;
    // Component switches backing the ablation matrix. All on = full model.
    bool use_self_attention = true;
    bool use_item_trend = true;
    bool use_short_term = true;

    void validate() const;

    bool needs_short_term() const { return use_short_term && omega < 1.0; }
    bool needs_long_term() const { return omega > 0.0; }
    bool needs_item_trend() const {
        if (!use_item_trend) return false;
        const bool in_long = omega > 0.0 && alpha != 0.0;
        const bool in_short = needs_short_term() && beta != 0.0;
        return in_long || in_short;
    }
};

// All learnable tensors. The item table serves both long-term item vectors and
// the user-sequence lookups (likewise the user table for item-trend lookups)
// unless untied_tables is set, which adds dedicated lookup tables.
struct ModelParams {
    Parameter user_table;   // (num_users, d)
    Parameter item_table;   // (num_items, d)
    Parameter wq_seq;       // (d, d)
    Parameter wk_seq;       // (d, d)
    Parameter wq_trend;     // (d, d)
    Parameter wk_trend;     // (d, d)
    std::optional<Parameter> seq_item_table;    // (num_items, d) when untied
    std::optional<Parameter> trend_user_table;  // (num_users, d) when untied

    ModelParams(int num_users, int num_items, int d, bool untied);

    int num_users() const { return user_table.rows(); }
    int num_items() const { return item_table.rows(); }
    int d() const { return user_table.cols(); }

    Parameter& sequence_items() { return seq_item_table ? *seq_item_table : item_table; }
    Parameter& trend_users() { return trend_user_table ? *trend_user_table : user_table; }
    const Parameter& sequence_items() const {
        return seq_item_table ? *seq_item_table : item_table;
    }
    const Parameter& trend_users() const {
        return trend_user_table ? *trend_user_table : user_table;
    }

    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
};

// Every table filled i.i.d. normal(0, 1/sqrt(d)); deterministic given seed.
ModelParams init_params(int num_users, int num_items, const Hyperparams& hp,
                        std::uint64_t seed);

// ---- Plain forward path (no gradients), shared by evaluation and scoring ----

// Q = relu(x·wq), K = relu(x·wk), A = softmax_rows(Q·Kᵀ/√d), out = A·x.
Matrix self_attention(const Matrix& x, const Matrix& wq, const Matrix& wk, int d);

Matrix aggregate(const Matrix& x, Aggregation how);

// u⁺: attention over the user's recent item embeddings, aggregated to (1,d).
// Zero vector when the user has no training history or the component is off.
Matrix short_term_vector(const SplitDataset& ds, const ModelParams& params,
                         const Hyperparams& hp, int user);

// v⁺: attention over the item's recent interactor embeddings. Zero vector for
// items unseen in training or when the component is off.
Matrix item_trend_vector(const SplitDataset& ds, const ModelParams& params,
                         const Hyperparams& hp, int item);

struct ScoreBreakdown {
    double score = 0.0;
    double long_term_component = 0.0;
    double short_term_component = 0.0;
};

// r̂ = ω·⟨u, v + αv⁺⟩ + (1−ω)·⟨u⁺, v + βv⁺⟩ with both addends reported.
ScoreBreakdown predict(const Hyperparams& hp, const Matrix& u_vec, const Matrix& v_vec,
                       const Matrix& u_plus, const Matrix& v_plus);

// Blended item-side rows reused across users during ranking:
// long_blend row v = v + α·v⁺, short_blend row v = v + β·v⁺.
struct ItemScoringCache {
    Matrix long_blend;
    Matrix short_blend;
};
ItemScoringCache build_item_scoring_cache(const SplitDataset& ds, const ModelParams& params,
                                          const Hyperparams& hp);

// Score for every item not in `exclude`; excluded items carry the not-ranked
// sentinel (quiet NaN, tested via is_ranked_score).
std::vector<double> score_all_items(const SplitDataset& ds, const ModelParams& params,
                                    const Hyperparams& hp, int user,
                                    const std::unordered_set<int>& exclude);
std::vector<double> score_all_items(const ItemScoringCache& cache, const ModelParams& params,
                                    const SplitDataset& ds, const Hyperparams& hp, int user,
                                    const std::unordered_set<int>& exclude);
bool is_ranked_score(double score);

// ---- Tape forward path (training) ----

// User-side nodes shared by the positive and negative score of one triple.
struct UserNodes {
    Tape::ValueId u_vec = -1;   // -1 when ω = 0
    Tape::ValueId u_plus = -1;  // -1 when the short-term component is off
};

UserNodes user_nodes_on_tape(Tape& tape, const SplitDataset& ds, ModelParams& params,
                             const Hyperparams& hp, int user);

Tape::ValueId score_on_tape(Tape& tape, const SplitDataset& ds, ModelParams& params,
                            const Hyperparams& hp, const UserNodes& user, int item);

}  // namespace trec
