#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace trec {

// One raw implicit-feedback record as read from disk. Ratings are dropped:
// presence alone means "interacted".
struct RawInteraction {
    std::string user;
    std::string item;
    std::int64_t timestamp = 0;
};

using InteractionLog = std::vector<RawInteraction>;

// TAB-separated `user item rating timestamp`, one record per line.
InteractionLog load_movielens(const std::string& path);

// Comma-separated `item,user,rating,timestamp`. An optional header row is
// auto-detected by a non-numeric timestamp field.
InteractionLog load_amazon_csv(const std::string& path);

// Interaction after cataloging: 0-based indices.
struct Interaction {
    int user = 0;
    int item = 0;
    std::int64_t timestamp = 0;
};

// Bijection between retained raw ids and [0, n), in order of first appearance.
struct Catalog {
    std::unordered_map<std::string, int> user_index;
    std::unordered_map<std::string, int> item_index;
    std::vector<std::string> user_raw;
    std::vector<std::string> item_raw;

    int num_users() const { return static_cast<int>(user_raw.size()); }
    int num_items() const { return static_cast<int>(item_raw.size()); }
};

struct SplitRatios {
    double train = 0.7;
    double validation = 0.2;
    double test = 0.1;
};

struct TrendEntry {
    int user = 0;
    std::int64_t timestamp = 0;
};

// Per-user chronological train/validation/test partition plus the per-item
// trend index (training interactors, newest first). Immutable once built.
class SplitDataset {
public:
    SplitDataset(int num_users, int num_items);

    int num_users() const { return static_cast<int>(train_.size()); }
    int num_items() const { return static_cast<int>(trend_.size()); }
    std::int64_t num_train_interactions() const { return num_train_; }

    const std::vector<Interaction>& train(int user) const { return train_[user]; }
    const std::vector<Interaction>& validation(int user) const { return validation_[user]; }
    const std::vector<Interaction>& test(int user) const { return test_[user]; }
    const std::vector<TrendEntry>& trend(int item) const { return trend_[item]; }
    const std::unordered_set<int>& interacted(int user) const { return interacted_[user]; }

    // Last min(p, |train(u)|) training items in ascending time order; empty if
    // the user has no training interactions.
    std::vector<int> user_recent_sequence(int user, int p) const;

    // The min(q, |trend(v)|) most recent training interactors, newest first;
    // empty if the item was never seen in training.
    std::vector<int> item_recent_users(int item, int q) const;

    // Flat (user, item) list of all training interactions, used by the trainer
    // to enumerate positives.
    const std::vector<Interaction>& all_train() const { return all_train_; }

    void add_train(const Interaction& it);
    void add_validation(const Interaction& it);
    void add_test(const Interaction& it);
    // Sorts the trend index (descending timestamp) after all insertions.
    void finalize();

private:
    std::vector<std::vector<Interaction>> train_;
    std::vector<std::vector<Interaction>> validation_;
    std::vector<std::vector<Interaction>> test_;
    std::vector<std::vector<TrendEntry>> trend_;
    std::vector<std::unordered_set<int>> interacted_;
    std::vector<Interaction> all_train_;
    std::int64_t num_train_ = 0;
};

// Per-user chronological split: train = floor(0.7 n), validation = floor(0.2 n),
// remainder to test. Users with fewer than 3 interactions keep everything in
// train. The trend index is built from training interactions only.
std::pair<Catalog, SplitDataset> chronological_split(const InteractionLog& log,
                                                     SplitRatios ratios = {});

// (user, positive, negative) drawn from the training data.
struct BprTriple {
    int user = 0;
    int pos_item = 0;
    int neg_item = 0;
};

// u is drawn uniformly over training interactions (so users are weighted by
// activity), the positive is that interaction's item, and the negative is
// rejection-sampled from items outside the user's full interaction set.
BprTriple sample_bpr_triple(const SplitDataset& ds, std::mt19937_64& rng);

// Prepared-dataset cache: deterministic line-oriented file with a version tag.
void save_dataset_cache(const std::string& path, const Catalog& catalog,
                        const SplitDataset& ds);
std::pair<Catalog, SplitDataset> load_dataset_cache(const std::string& path);

struct DatasetStats {
    int users = 0;
    int items = 0;
    std::int64_t interactions = 0;
    double median_per_user = 0.0;
};
DatasetStats dataset_stats(const Catalog& catalog, const SplitDataset& ds);

}  // namespace trec
