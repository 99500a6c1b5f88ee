#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "trec/data.hpp"
#include "trec/model.hpp"

namespace trec {

enum class OptimizerKind { kSgd, kAdam };

OptimizerKind optimizer_from_string(const std::string& s);
std::string to_string(OptimizerKind k);

struct TrainConfig {
    double learning_rate = 1e-3;
    double lambda_reg = 1e-4;
    int epochs = 30;
    int negatives_per_positive = 1;
    std::uint64_t seed = 42;
    OptimizerKind optimizer = OptimizerKind::kAdam;
    // Adam moments, fixed per the usual defaults.
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    bool eval_validation = true;

    void validate() const;
};

// Per-parameter first/second moment accumulators plus the global step counter.
// Embedding tables get lazy (touched-rows-only) moment updates; the attention
// matrices are updated densely every step.
class OptimizerState {
public:
    OptimizerState(OptimizerKind kind, const TrainConfig& cfg) : kind_(kind), cfg_(cfg) {}

    std::int64_t step() const { return step_; }
    void begin_step() { ++step_; }

    // Applies one update from p.grad to p.value for the given rows (or the
    // whole tensor), then clears exactly those gradient entries.
    void apply_rows(Parameter& p, std::span<const int> rows);
    void apply_full(Parameter& p);

    struct Moments {
        Matrix m;
        Matrix v;
    };
    const Moments* moments_for(const Parameter& p) const;
    // Checkpoint restore.
    void set_moments(Parameter& p, Matrix m, Matrix v);
    void set_step(std::int64_t step) { step_ = step; }
    OptimizerKind kind() const { return kind_; }

private:
    Moments& ensure_moments(Parameter& p);
    void update_entry(double* value, double* grad, Moments* mom, int idx, double m_hat_scale,
                      double v_hat_scale);

    OptimizerKind kind_;
    TrainConfig cfg_;
    std::int64_t step_ = 0;
    std::unordered_map<const Parameter*, Moments> moments_;
};

// -ln sigmoid(r_pos - r_neg) + lambda * reg_term, via the softplus form.
double bpr_pair_loss(double r_pos, double r_neg, double reg_term, double lambda);

// Sum of squared entries over the distinct embedding rows and whole matrices
// the tape touched. Counted once per row regardless of how often it was
// gathered.
double regularization_term(const Tape::Touched& touched);

// Forward both scores of the triple, add L2 over the touched parameters,
// backpropagate, apply one optimizer update and clear the touched gradients.
// Returns the loss value.
double train_step(const SplitDataset& ds, ModelParams& params, const Hyperparams& hp,
                  const TrainConfig& cfg, OptimizerState& opt, const BprTriple& triple);

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;
    double seconds = 0.0;
    std::optional<double> val_recall10;
};

// Hook evaluated between epochs against the current parameter snapshot.
using ValidationHook = std::function<double(const ModelParams&, const Hyperparams&)>;

// Epoch loop: every training interaction appears negatives_per_positive times
// per epoch, in an epoch-seeded shuffled order with freshly sampled negatives.
std::vector<EpochStats> train(const SplitDataset& ds, ModelParams& params,
                              const Hyperparams& hp, const TrainConfig& cfg,
                              OptimizerState& opt,
                              const ValidationHook& validation = nullptr);

// ---- Checkpointing ----

struct Checkpoint {
    Hyperparams hp;
    int num_users = 0;
    int num_items = 0;
    ModelParams params;
    std::optional<OptimizerKind> optimizer;
    std::int64_t optimizer_step = 0;
    // Moment tensors in the same order as params.all(), empty when absent.
    std::vector<Matrix> adam_m;
    std::vector<Matrix> adam_v;
};

// Binary format with a version tag and CRC32 trailer; round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const Hyperparams& hp, const OptimizerState* opt = nullptr);
Checkpoint load_checkpoint(const std::string& path);

void write_training_log(const std::string& path, const std::vector<EpochStats>& stats);

}  // namespace trec
