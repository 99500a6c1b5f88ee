#pragma once

#include <cstdint>
#include <string>

#include "trec/data.hpp"

namespace trec {
namespace synthetic {

// Small uniform-random log for gradient checks and smoke tests.
InteractionLog tiny_log(int users, int items, int per_user, std::uint64_t seed);

// Planted two-way (or k-way) preference structure: users belong to a cluster
// and interact only with their cluster's item pool, in random order over an
// increasing timeline. Recoverable by plain matrix factorization.
InteractionLog planted_clusters(int users, int items, int clusters, int per_user,
                                std::uint64_t seed);

// Clustered interactions with two additional planted signals: items are "hot"
// in timeline phases (recent interactors reveal what is currently trending)
// and each user drifts between genres in sessions (recent items reveal the
// genre their held-out interactions continue). Long-term factors alone cannot
// separate either signal.
InteractionLog trendy_clusters(int users, int items, int clusters, int per_user,
                               std::uint64_t seed);

// ML100K-scale surrogate: 943 users, 1682 items, ~100k interactions with
// Zipf-like item popularity, a heavy-tailed per-user activity distribution,
// genre clusters and phase-based popularity drift.
InteractionLog ml100k_surrogate(std::uint64_t seed);

// Serializes a log in the MovieLens `user<TAB>item<TAB>rating<TAB>timestamp`
// format so generated data can flow through the regular loaders and CLI.
void write_movielens_file(const std::string& path, const InteractionLog& log);

}  // namespace synthetic
}  // namespace trec
