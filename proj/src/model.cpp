#include "trec/model.hpp"

#include <cmath>
#include <limits>

#include "trec/errors.hpp"

namespace trec {

Aggregation aggregation_from_string(const std::string& s) {
    if (s == "mean") return Aggregation::kMean;
    if (s == "max") return Aggregation::kMax;
    throw ConfigError("unknown aggregation '" + s + "' (expected mean or max)");
}

std::string to_string(Aggregation a) {
    return a == Aggregation::kMean ? "mean" : "max";
}

void Hyperparams::validate() const {
    if (d < 1) throw ConfigError("hyperparams: d must be >= 1");
    if (p < 1) throw ConfigError("hyperparams: p must be >= 1");
    if (q < 1) throw ConfigError("hyperparams: q must be >= 1");
    if (omega < 0.0 || omega > 1.0) throw ConfigError("hyperparams: omega must be in [0,1]");
    if (alpha < 0.0) throw ConfigError("hyperparams: alpha must be >= 0");
    if (beta < 0.0) throw ConfigError("hyperparams: beta must be >= 0");
}

ModelParams::ModelParams(int num_users, int num_items, int d, bool untied)
    : user_table("user_table", Matrix(num_users, d)),
      item_table("item_table", Matrix(num_items, d)),
      wq_seq("wq_seq", Matrix(d, d)),
      wk_seq("wk_seq", Matrix(d, d)),
      wq_trend("wq_trend", Matrix(d, d)),
      wk_trend("wk_trend", Matrix(d, d)) {
    if (untied) {
        seq_item_table.emplace("seq_item_table", Matrix(num_items, d));
        trend_user_table.emplace("trend_user_table", Matrix(num_users, d));
    }
}

std::vector<Parameter*> ModelParams::all() {
    std::vector<Parameter*> out{&user_table, &item_table, &wq_seq, &wk_seq,
                                &wq_trend,   &wk_trend};
    if (seq_item_table) out.push_back(&*seq_item_table);
    if (trend_user_table) out.push_back(&*trend_user_table);
    return out;
}

std::vector<const Parameter*> ModelParams::all() const {
    std::vector<const Parameter*> out{&user_table, &item_table, &wq_seq, &wk_seq,
                                      &wq_trend,   &wk_trend};
    if (seq_item_table) out.push_back(&*seq_item_table);
    if (trend_user_table) out.push_back(&*trend_user_table);
    return out;
}

ModelParams init_params(int num_users, int num_items, const Hyperparams& hp,
                        std::uint64_t seed) {
    if (num_users < 1 || num_items < 1) {
        throw ConfigError("init_params: need at least one user and one item");
    }
    hp.validate();
    ModelParams params(num_users, num_items, hp.d, hp.untied_tables);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(hp.d)));
    for (Parameter* p : params.all()) {
        double* v = p->value.data();
        for (int i = 0; i < p->value.size(); ++i) v[i] = dist(rng);
    }
    return params;
}

namespace {

Matrix gather_plain(const Matrix& table, const std::vector<int>& ids) {
    Matrix out(static_cast<int>(ids.size()), table.cols());
    for (size_t k = 0; k < ids.size(); ++k) {
        const double* src = table.row(ids[k]);
        std::copy(src, src + table.cols(), out.row(static_cast<int>(k)));
    }
    return out;
}

}  // namespace

Matrix self_attention(const Matrix& x, const Matrix& wq, const Matrix& wk, int d) {
    const Matrix q = relu(matmul(x, wq));
    const Matrix k = relu(matmul(x, wk));
    const Matrix logits = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d)));
    return matmul(softmax_rows(logits), x);
}

Matrix aggregate(const Matrix& x, Aggregation how) {
    return how == Aggregation::kMean ? mean_over_sequence(x) : max_over_sequence(x);
}

Matrix short_term_vector(const SplitDataset& ds, const ModelParams& params,
                         const Hyperparams& hp, int user) {
    Matrix zero(1, params.d());
    if (!hp.use_short_term) return zero;
    const std::vector<int> ids = ds.user_recent_sequence(user, hp.p);
    if (ids.empty()) return zero;
    Matrix x = gather_plain(params.sequence_items().value, ids);
    if (hp.use_self_attention) {
        x = self_attention(x, params.wq_seq.value, params.wk_seq.value, params.d());
    }
    return aggregate(x, hp.aggregation);
}

Matrix item_trend_vector(const SplitDataset& ds, const ModelParams& params,
                         const Hyperparams& hp, int item) {
    Matrix zero(1, params.d());
    if (!hp.use_item_trend) return zero;
    const std::vector<int> ids = ds.item_recent_users(item, hp.q);
    if (ids.empty()) return zero;
    Matrix x = gather_plain(params.trend_users().value, ids);
    if (hp.use_self_attention) {
        x = self_attention(x, params.wq_trend.value, params.wk_trend.value, params.d());
    }
    return aggregate(x, hp.aggregation);
}

ScoreBreakdown predict(const Hyperparams& hp, const Matrix& u_vec, const Matrix& v_vec,
                       const Matrix& u_plus, const Matrix& v_plus) {
    ScoreBreakdown out;
    if (hp.omega > 0.0) {
        if (hp.use_item_trend && hp.alpha != 0.0) {
            out.long_term_component = hp.omega * dot_rows(u_vec, add(v_vec, scale(v_plus, hp.alpha)));
        } else {
            out.long_term_component = hp.omega * dot_rows(u_vec, v_vec);
        }
    }
    if (hp.needs_short_term()) {
        if (hp.use_item_trend && hp.beta != 0.0) {
            out.short_term_component =
                (1.0 - hp.omega) * dot_rows(u_plus, add(v_vec, scale(v_plus, hp.beta)));
        } else {
            out.short_term_component = (1.0 - hp.omega) * dot_rows(u_plus, v_vec);
        }
    }
    out.score = out.long_term_component + out.short_term_component;
    return out;
}

ItemScoringCache build_item_scoring_cache(const SplitDataset& ds, const ModelParams& params,
                                          const Hyperparams& hp) {
    const int items = params.num_items();
    const int d = params.d();
    ItemScoringCache cache{Matrix(items, d), Matrix(items, d)};
    const bool long_blend = hp.use_item_trend && hp.alpha != 0.0;
    const bool short_blend = hp.use_item_trend && hp.beta != 0.0;
    for (int v = 0; v < items; ++v) {
        const double* vrow = params.item_table.value.row(v);
        double* lrow = cache.long_blend.row(v);
        double* srow = cache.short_blend.row(v);
        if (long_blend || short_blend) {
            const Matrix vp = item_trend_vector(ds, params, hp, v);
            const double* vpr = vp.data();
            for (int c = 0; c < d; ++c) {
                lrow[c] = long_blend ? vrow[c] + hp.alpha * vpr[c] : vrow[c];
                srow[c] = short_blend ? vrow[c] + hp.beta * vpr[c] : vrow[c];
            }
        } else {
            std::copy(vrow, vrow + d, lrow);
            std::copy(vrow, vrow + d, srow);
        }
    }
    return cache;
}

bool is_ranked_score(double score) { return !std::isnan(score); }

std::vector<double> score_all_items(const ItemScoringCache& cache, const ModelParams& params,
                                    const SplitDataset& ds, const Hyperparams& hp, int user,
                                    const std::unordered_set<int>& exclude) {
    const int items = params.num_items();
    const int d = params.d();
    std::vector<double> scores(items, std::numeric_limits<double>::quiet_NaN());
    const double* u_vec = params.user_table.value.row(user);
    Matrix u_plus;
    const bool with_short = hp.needs_short_term();
    if (with_short) u_plus = short_term_vector(ds, params, hp, user);
    const bool with_long = hp.omega > 0.0;
    for (int v = 0; v < items; ++v) {
        if (exclude.contains(v)) continue;
        double long_term = 0.0;
        double short_term = 0.0;
        if (with_long) long_term = hp.omega * dot_n(u_vec, cache.long_blend.row(v), d);
        if (with_short) {
            short_term = (1.0 - hp.omega) * dot_n(u_plus.data(), cache.short_blend.row(v), d);
        }
        scores[v] = long_term + short_term;
    }
    return scores;
}

std::vector<double> score_all_items(const SplitDataset& ds, const ModelParams& params,
                                    const Hyperparams& hp, int user,
                                    const std::unordered_set<int>& exclude) {
    return score_all_items(build_item_scoring_cache(ds, params, hp), params, ds, hp, user,
                           exclude);
}

namespace {

Tape::ValueId attention_on_tape(Tape& tape, Tape::ValueId x, Parameter& wq, Parameter& wk,
                                int d) {
    const auto q = tape.relu(tape.matmul(x, tape.parameter(wq)));
    const auto k = tape.relu(tape.matmul(x, tape.parameter(wk)));
    const auto logits = tape.scale(tape.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d)));
    return tape.matmul(tape.softmax_rows(logits), x);
}

Tape::ValueId aggregate_on_tape(Tape& tape, Tape::ValueId x, Aggregation how) {
    return how == Aggregation::kMean ? tape.mean_over_sequence(x) : tape.max_over_sequence(x);
}

Tape::ValueId item_trend_on_tape(Tape& tape, const SplitDataset& ds, ModelParams& params,
                                 const Hyperparams& hp, int item) {
    const std::vector<int> ids = ds.item_recent_users(item, hp.q);
    if (ids.empty()) return tape.constant(Matrix(1, params.d()));
    auto x = tape.gather_rows(params.trend_users(), ids);
    if (hp.use_self_attention) {
        x = attention_on_tape(tape, x, params.wq_trend, params.wk_trend, params.d());
    }
    return aggregate_on_tape(tape, x, hp.aggregation);
}

}  // namespace

UserNodes user_nodes_on_tape(Tape& tape, const SplitDataset& ds, ModelParams& params,
                             const Hyperparams& hp, int user) {
    UserNodes nodes;
    if (hp.needs_long_term()) {
        nodes.u_vec = tape.gather_rows(params.user_table, {user});
    }
    if (hp.needs_short_term()) {
        const std::vector<int> ids = ds.user_recent_sequence(user, hp.p);
        if (ids.empty()) {
            nodes.u_plus = tape.constant(Matrix(1, params.d()));
        } else {
            auto x = tape.gather_rows(params.sequence_items(), ids);
            if (hp.use_self_attention) {
                x = attention_on_tape(tape, x, params.wq_seq, params.wk_seq, params.d());
            }
            nodes.u_plus = aggregate_on_tape(tape, x, hp.aggregation);
        }
    }
    return nodes;
}

Tape::ValueId score_on_tape(Tape& tape, const SplitDataset& ds, ModelParams& params,
                            const Hyperparams& hp, const UserNodes& user, int item) {
    const bool with_long = user.u_vec != -1;
    const bool with_short = user.u_plus != -1;
    const bool long_blend = with_long && hp.use_item_trend && hp.alpha != 0.0;
    const bool short_blend = with_short && hp.use_item_trend && hp.beta != 0.0;

    const auto v_vec = tape.gather_rows(params.item_table, {item});
    Tape::ValueId v_plus = -1;
    if (long_blend || short_blend) {
        v_plus = item_trend_on_tape(tape, ds, params, hp, item);
    }

    Tape::ValueId long_id = -1;
    if (with_long) {
        const auto blended =
            long_blend ? tape.add(v_vec, tape.scale(v_plus, hp.alpha)) : v_vec;
        long_id = tape.scale(tape.dot(user.u_vec, blended), hp.omega);
    }
    Tape::ValueId short_id = -1;
    if (with_short) {
        const auto blended =
            short_blend ? tape.add(v_vec, tape.scale(v_plus, hp.beta)) : v_vec;
        short_id = tape.scale(tape.dot(user.u_plus, blended), 1.0 - hp.omega);
    }

    if (long_id != -1 && short_id != -1) return tape.add(long_id, short_id);
    if (long_id != -1) return long_id;
    if (short_id != -1) return short_id;
    return tape.constant(Matrix(1, 1));  // ω = 0 with the short branch disabled
}

}  // namespace trec
