#include "trec/train.hpp"

#include <zlib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "trec/errors.hpp"
#include "trec/io.hpp"

namespace trec {

OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::kSgd;
    if (s == "adam") return OptimizerKind::kAdam;
    throw ConfigError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

std::string to_string(OptimizerKind k) {
    return k == OptimizerKind::kSgd ? "sgd" : "adam";
}

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw ConfigError("train config: learning_rate must be > 0");
    if (lambda_reg < 0.0) throw ConfigError("train config: lambda must be >= 0");
    if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
    if (negatives_per_positive < 1) {
        throw ConfigError("train config: negatives_per_positive must be >= 1");
    }
}

OptimizerState::Moments& OptimizerState::ensure_moments(Parameter& p) {
    auto it = moments_.find(&p);
    if (it == moments_.end()) {
        it = moments_
                 .emplace(&p, Moments{Matrix(p.rows(), p.cols()), Matrix(p.rows(), p.cols())})
                 .first;
    }
    return it->second;
}

const OptimizerState::Moments* OptimizerState::moments_for(const Parameter& p) const {
    auto it = moments_.find(&p);
    return it == moments_.end() ? nullptr : &it->second;
}

void OptimizerState::set_moments(Parameter& p, Matrix m, Matrix v) {
    if (!m.same_shape(p.value) || !v.same_shape(p.value)) {
        throw CheckpointError("optimizer moments do not match parameter " + p.name);
    }
    moments_[&p] = Moments{std::move(m), std::move(v)};
}

void OptimizerState::update_entry(double* value, double* grad, Moments* mom, int idx,
                                  double bc1, double bc2) {
    const double g = grad[idx];
    if (kind_ == OptimizerKind::kSgd) {
        value[idx] -= cfg_.learning_rate * g;
    } else {
        double& m = mom->m.data()[idx];
        double& v = mom->v.data()[idx];
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        value[idx] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.adam_eps);
    }
    grad[idx] = 0.0;
}

void OptimizerState::apply_rows(Parameter& p, std::span<const int> rows) {
    Moments* mom = kind_ == OptimizerKind::kAdam ? &ensure_moments(p) : nullptr;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    const int cols = p.cols();
    for (int r : rows) {
        const int base = r * cols;
        for (int c = 0; c < cols; ++c) {
            update_entry(p.value.data(), p.grad.data(), mom, base + c, bc1, bc2);
        }
    }
}

void OptimizerState::apply_full(Parameter& p) {
    Moments* mom = kind_ == OptimizerKind::kAdam ? &ensure_moments(p) : nullptr;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (int i = 0; i < p.value.size(); ++i) {
        update_entry(p.value.data(), p.grad.data(), mom, i, bc1, bc2);
    }
}

double bpr_pair_loss(double r_pos, double r_neg, double reg_term, double lambda) {
    return neg_log_sigmoid(r_pos - r_neg) + lambda * reg_term;
}

double regularization_term(const Tape::Touched& touched) {
    double acc = 0.0;
    for (const auto& [param, rows] : touched.table_rows) {
        for (int r : rows) {
            const double* row = param->value.row(r);
            for (int c = 0; c < param->cols(); ++c) acc += row[c] * row[c];
        }
    }
    for (const Parameter* p : touched.full) acc += sum_squares(p->value);
    return acc;
}

namespace {

Tape::ValueId l2_on_tape(Tape& tape, const Tape::Touched& touched) {
    Tape::ValueId total = -1;
    auto accumulate = [&](Tape::ValueId id) {
        total = total == -1 ? id : tape.add(total, id);
    };
    for (const auto& [param, rows] : touched.table_rows) {
        accumulate(tape.sum_squares(tape.gather_rows(*param, rows)));
    }
    for (Parameter* p : touched.full) {
        accumulate(tape.sum_squares(tape.parameter(*p)));
    }
    return total;
}

}  // namespace

double train_step(const SplitDataset& ds, ModelParams& params, const Hyperparams& hp,
                  const TrainConfig& cfg, OptimizerState& opt, const BprTriple& triple) {
    Tape tape;
    const UserNodes user = user_nodes_on_tape(tape, ds, params, hp, triple.user);
    const auto pos = score_on_tape(tape, ds, params, hp, user, triple.pos_item);
    const auto neg = score_on_tape(tape, ds, params, hp, user, triple.neg_item);
    auto loss_id = tape.neg_log_sigmoid(tape.sub(pos, neg));

    // Snapshot before the regularization nodes re-gather the same rows.
    const Tape::Touched touched = tape.touched();
    if (cfg.lambda_reg != 0.0) {
        const auto reg = l2_on_tape(tape, touched);
        if (reg != -1) loss_id = tape.add(loss_id, tape.scale(reg, cfg.lambda_reg));
    }

    const double loss = tape.scalar(loss_id);
    if (!std::isfinite(loss)) {
        throw NumericsError(
            "train_step: non-finite loss for user " + std::to_string(triple.user) +
            " (pos " + std::to_string(triple.pos_item) + ", neg " +
            std::to_string(triple.neg_item) + "); try a lower learning_rate");
    }
    tape.backward(loss_id);

    opt.begin_step();
    for (const auto& [param, rows] : touched.table_rows) opt.apply_rows(*param, rows);
    for (Parameter* p : touched.full) opt.apply_full(*p);
    return loss;
}

std::vector<EpochStats> train(const SplitDataset& ds, ModelParams& params,
                              const Hyperparams& hp, const TrainConfig& cfg,
                              OptimizerState& opt, const ValidationHook& validation) {
    cfg.validate();
    hp.validate();
    const auto& all = ds.all_train();
    if (all.empty()) throw ConfigError("train: dataset has no training interactions");

    const size_t steps_per_epoch = all.size() * static_cast<size_t>(cfg.negatives_per_positive);
    std::vector<size_t> order(steps_per_epoch);
    for (size_t k = 0; k < steps_per_epoch; ++k) order[k] = k % all.size();

    std::vector<EpochStats> stats;
    stats.reserve(static_cast<size_t>(cfg.epochs));
    std::uniform_int_distribution<int> pick_item(0, ds.num_items() - 1);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // Epoch-indexed stream: shuffle and negative draws share it.
        std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL +
                            static_cast<std::uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), rng);

        const auto start = std::chrono::steady_clock::now();
        double loss_sum = 0.0;
        for (size_t idx : order) {
            const Interaction& pos = all[idx];
            const auto& seen = ds.interacted(pos.user);
            int neg = -1;
            for (int t = 0; t < 1000; ++t) {
                const int j = pick_item(rng);
                if (!seen.contains(j)) {
                    neg = j;
                    break;
                }
            }
            if (neg < 0) {
                throw NumericsError("train: negative sampling failed for user " +
                                    std::to_string(pos.user) + " (catalog saturated)");
            }
            loss_sum += train_step(ds, params, hp, cfg, opt, {pos.user, pos.item, neg});
        }
        const auto end = std::chrono::steady_clock::now();

        EpochStats es;
        es.epoch = epoch;
        es.mean_loss = loss_sum / static_cast<double>(steps_per_epoch);
        es.seconds = std::chrono::duration<double>(end - start).count();
        if (cfg.eval_validation && validation) {
            es.val_recall10 = validation(params, hp);
        }
        stats.push_back(es);
    }
    return stats;
}

// ---- Checkpoint serialization ----

namespace {

constexpr char kCkptMagic[8] = {'T', 'R', 'E', 'C', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kCkptVersion = 1;

struct Writer {
    std::string buf;

    void raw(const void* p, size_t n) { buf.append(static_cast<const char*>(p), n); }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void i32(std::int32_t v) { raw(&v, 4); }
    void i64(std::int64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    void matrix(const Matrix& m) {
        i64(m.rows());
        i64(m.cols());
        raw(m.data(), static_cast<size_t>(m.size()) * sizeof(double));
    }
};

struct Reader {
    const std::string& buf;
    size_t pos = 0;

    explicit Reader(const std::string& b) : buf(b) {}

    void raw(void* p, size_t n) {
        if (pos + n > buf.size()) throw CheckpointError("checkpoint truncated");
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
    std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
    std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
    std::int32_t i32() { std::int32_t v; raw(&v, 4); return v; }
    std::int64_t i64() { std::int64_t v; raw(&v, 8); return v; }
    double f64() { double v; raw(&v, 8); return v; }
    std::string str() {
        const auto n = u32();
        if (pos + n > buf.size()) throw CheckpointError("checkpoint truncated");
        std::string s(buf.data() + pos, n);
        pos += n;
        return s;
    }
    Matrix matrix() {
        const auto rows = i64();
        const auto cols = i64();
        if (rows <= 0 || cols <= 0 || rows > (1 << 28) || cols > (1 << 28)) {
            throw CheckpointError("checkpoint has implausible tensor shape");
        }
        std::vector<double> values(static_cast<size_t>(rows) * static_cast<size_t>(cols));
        raw(values.data(), values.size() * sizeof(double));
        return Matrix(static_cast<int>(rows), static_cast<int>(cols), std::move(values));
    }
};

std::uint32_t crc_of(const std::string& bytes) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
                static_cast<uInt>(bytes.size())));
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const Hyperparams& hp, const OptimizerState* opt) {
    Writer w;
    w.raw(kCkptMagic, sizeof(kCkptMagic));
    w.u32(kCkptVersion);
    w.i32(hp.d);
    w.i32(hp.p);
    w.i32(hp.q);
    w.f64(hp.omega);
    w.f64(hp.alpha);
    w.f64(hp.beta);
    w.u8(hp.aggregation == Aggregation::kMean ? 0 : 1);
    w.u8(hp.untied_tables ? 1 : 0);
    w.u8(hp.use_self_attention ? 1 : 0);
    w.u8(hp.use_item_trend ? 1 : 0);
    w.u8(hp.use_short_term ? 1 : 0);
    w.i64(params.num_users());
    w.i64(params.num_items());

    const auto tensors = params.all();
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const Parameter* p : tensors) {
        w.str(p->name);
        w.matrix(p->value);
    }

    if (opt) {
        w.u8(1);
        w.u8(opt->kind() == OptimizerKind::kSgd ? 0 : 1);
        w.i64(opt->step());
        if (opt->kind() == OptimizerKind::kAdam) {
            for (const Parameter* p : tensors) {
                const auto* mom = opt->moments_for(*p);
                if (mom) {
                    w.u8(1);
                    w.matrix(mom->m);
                    w.matrix(mom->v);
                } else {
                    w.u8(0);
                }
            }
        }
    } else {
        w.u8(0);
    }

    const std::uint32_t crc = crc_of(w.buf);
    w.u32(crc);
    write_file_atomic(path, w.buf);
}

Checkpoint load_checkpoint(const std::string& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < sizeof(kCkptMagic) + 8) {
        throw CheckpointError(path + ": checksum error (file truncated)");
    }
    const std::string payload = bytes.substr(0, bytes.size() - 4);
    std::uint32_t stored = 0;
    std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
    if (crc_of(payload) != stored) {
        throw CheckpointError(path + ": checksum error (corrupt or truncated file)");
    }

    Reader r(payload);
    char magic[8];
    r.raw(magic, sizeof(magic));
    if (std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0) {
        throw CheckpointError(path + ": not a trec checkpoint");
    }
    if (r.u32() != kCkptVersion) {
        throw CheckpointError(path + ": unsupported checkpoint version");
    }

    Hyperparams hp;
    hp.d = r.i32();
    hp.p = r.i32();
    hp.q = r.i32();
    hp.omega = r.f64();
    hp.alpha = r.f64();
    hp.beta = r.f64();
    hp.aggregation = r.u8() == 0 ? Aggregation::kMean : Aggregation::kMax;
    hp.untied_tables = r.u8() != 0;
    hp.use_self_attention = r.u8() != 0;
    hp.use_item_trend = r.u8() != 0;
    hp.use_short_term = r.u8() != 0;

    const auto num_users = static_cast<int>(r.i64());
    const auto num_items = static_cast<int>(r.i64());
    Checkpoint cp{hp, num_users, num_items,
                  ModelParams(num_users, num_items, hp.d, hp.untied_tables),
                  std::nullopt, 0, {}, {}};

    const auto tensors = cp.params.all();
    const auto count = r.u32();
    if (count != tensors.size()) {
        throw CheckpointError(path + ": tensor count mismatch");
    }
    for (Parameter* p : tensors) {
        const std::string name = r.str();
        Matrix value = r.matrix();
        if (name != p->name) {
            throw CheckpointError(path + ": unexpected tensor '" + name + "', wanted '" +
                                  p->name + "'");
        }
        if (!value.same_shape(p->value)) {
            throw CheckpointError(path + ": tensor " + name + " has shape " +
                                  value.shape_str() + ", expected " + p->value.shape_str());
        }
        p->value = std::move(value);
    }

    if (r.u8() != 0) {
        cp.optimizer = r.u8() == 0 ? OptimizerKind::kSgd : OptimizerKind::kAdam;
        cp.optimizer_step = r.i64();
        if (*cp.optimizer == OptimizerKind::kAdam) {
            for (size_t i = 0; i < tensors.size(); ++i) {
                if (r.u8() != 0) {
                    cp.adam_m.push_back(r.matrix());
                    cp.adam_v.push_back(r.matrix());
                } else {
                    cp.adam_m.emplace_back();
                    cp.adam_v.emplace_back();
                }
            }
        }
    }
    return cp;
}

void write_training_log(const std::string& path, const std::vector<EpochStats>& stats) {
    std::ostringstream out;
    out << "epoch\tloss\tseconds\tval_recall@10\n";
    for (const auto& es : stats) {
        out << es.epoch << '\t' << es.mean_loss << '\t' << es.seconds << '\t';
        if (es.val_recall10) {
            out << *es.val_recall10;
        } else {
            out << "nan";
        }
        out << '\n';
    }
    write_file_atomic(path, out.str());
}

}  // namespace trec
