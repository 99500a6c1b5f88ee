#include "trec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "trec/io.hpp"

namespace trec {
namespace synthetic {

namespace {

std::string user_id(int u) { return "u" + std::to_string(u); }
std::string item_id(int v) { return "v" + std::to_string(v); }

// Weighted draw without replacement support: returns an index into weights.
int draw_weighted(const std::vector<double>& weights, std::mt19937_64& rng) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::uniform_real_distribution<double> dist(0.0, total);
    double x = dist(rng);
    for (size_t i = 0; i < weights.size(); ++i) {
        x -= weights[i];
        if (x <= 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
}

}  // namespace

InteractionLog tiny_log(int users, int items, int per_user, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, items - 1);
    InteractionLog log;
    std::int64_t ts = 1000;
    for (int u = 0; u < users; ++u) {
        std::vector<bool> used(items, false);
        for (int k = 0; k < per_user; ++k) {
            int v = pick(rng);
            int guard = 0;
            while (used[v] && guard++ < 4 * items) v = pick(rng);
            used[v] = true;
            log.push_back({user_id(u), item_id(v), ts++});
        }
    }
    return log;
}

InteractionLog planted_clusters(int users, int items, int clusters, int per_user,
                                std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int pool = items / clusters;
    InteractionLog log;
    std::int64_t ts = 1000;
    for (int u = 0; u < users; ++u) {
        const int c = u % clusters;
        std::vector<int> own(pool);
        std::iota(own.begin(), own.end(), c * pool);
        std::shuffle(own.begin(), own.end(), rng);
        const int n = std::min(per_user, pool);
        for (int k = 0; k < n; ++k) {
            log.push_back({user_id(u), item_id(own[k]), ts++});
        }
    }
    return log;
}

InteractionLog trendy_clusters(int users, int items, int clusters, int per_user,
                               std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int pool = items / clusters;
    constexpr int kPhases = 4;
    const int hot_per_phase = std::max(2, pool / kPhases);

    // Phase-local hot subsets per cluster: a rotating window over the pool.
    auto hot_range = [&](int cluster, int phase) {
        const int begin = cluster * pool + (phase * hot_per_phase) % pool;
        return std::pair<int, int>{begin, hot_per_phase};
    };

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    InteractionLog log;
    // Interleave users along a global timeline so phases are shared.
    std::vector<int> genre(users);
    for (int u = 0; u < users; ++u) genre[u] = u % clusters;

    for (int step = 0; step < per_user; ++step) {
        const int phase = step * kPhases / per_user;
        for (int u = 0; u < users; ++u) {
            // Occasional genre drift; the final genre persists into the
            // held-out tail, so recent items are more informative than the
            // whole history.
            if (coin(rng) < 0.08) genre[u] = (genre[u] + 1) % clusters;
            int v;
            if (coin(rng) < 0.75) {
                const auto [begin, count] = hot_range(genre[u], phase);
                const int offset = static_cast<int>(coin(rng) * count);
                v = begin + std::min(offset, count - 1);
                if (v >= (genre[u] + 1) * pool) v -= pool;  // wrap inside the pool
            } else {
                std::uniform_int_distribution<int> any(genre[u] * pool,
                                                       (genre[u] + 1) * pool - 1);
                v = any(rng);
            }
            const std::int64_t ts = static_cast<std::int64_t>(step) * users + u + 1000;
            log.push_back({user_id(u), item_id(v), ts});
        }
    }
    return log;
}

InteractionLog ml100k_surrogate(std::uint64_t seed) {
    constexpr int kUsers = 943;
    constexpr int kItems = 1682;
    constexpr int kTarget = 100000;
    constexpr int kGenres = 12;
    constexpr int kPhases = 5;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    // Item attributes: genre and Zipf-ish base popularity with a phase peak.
    std::vector<int> item_genre(kItems);
    std::vector<int> item_peak(kItems);
    std::vector<double> item_pop(kItems);
    std::uniform_int_distribution<int> pick_genre(0, kGenres - 1);
    std::uniform_int_distribution<int> pick_phase(0, kPhases - 1);
    for (int v = 0; v < kItems; ++v) {
        item_genre[v] = pick_genre(rng);
        item_peak[v] = pick_phase(rng);
        item_pop[v] = 1.0 / std::pow(static_cast<double>(v + 1), 0.8);
    }
    std::shuffle(item_pop.begin(), item_pop.end(), rng);

    // Heavy-tailed per-user activity, rescaled to hit the target total.
    std::lognormal_distribution<double> activity(std::log(70.0), 0.55);
    std::vector<int> per_user(kUsers);
    double raw_total = 0.0;
    std::vector<double> raw(kUsers);
    for (int u = 0; u < kUsers; ++u) {
        raw[u] = std::max(20.0, activity(rng));
        raw_total += raw[u];
    }
    int total = 0;
    for (int u = 0; u < kUsers; ++u) {
        per_user[u] = std::max(20, static_cast<int>(std::lround(raw[u] / raw_total * kTarget)));
        total += per_user[u];
    }

    // User genre affinities: two favourite genres plus background mass.
    std::vector<int> fav1(kUsers), fav2(kUsers);
    for (int u = 0; u < kUsers; ++u) {
        fav1[u] = pick_genre(rng);
        fav2[u] = pick_genre(rng);
    }

    // Items bucketed by genre for cheap conditional draws.
    std::vector<std::vector<int>> by_genre(kGenres);
    for (int v = 0; v < kItems; ++v) by_genre[item_genre[v]].push_back(v);

    InteractionLog log;
    log.reserve(static_cast<size_t>(total));
    const int max_steps = *std::max_element(per_user.begin(), per_user.end());
    for (int step = 0; step < max_steps; ++step) {
        for (int u = 0; u < kUsers; ++u) {
            if (step >= per_user[u]) continue;
            const int phase = step * kPhases / per_user[u];
            const double r = coin(rng);
            int g;
            if (r < 0.45) {
                g = fav1[u];
            } else if (r < 0.75) {
                g = fav2[u];
            } else {
                g = pick_genre(rng);
            }
            const auto& bucket = by_genre[g];
            std::vector<double> weights(bucket.size());
            for (size_t i = 0; i < bucket.size(); ++i) {
                const int v = bucket[i];
                // Popularity boosted around the item's peak phase.
                const int dist = std::abs(item_peak[v] - phase);
                const double trend = dist == 0 ? 3.0 : (dist == 1 ? 1.2 : 0.4);
                weights[i] = item_pop[v] * trend;
            }
            const int v = bucket[draw_weighted(weights, rng)];
            const std::int64_t ts = static_cast<std::int64_t>(step) * kUsers + u + 874000000;
            log.push_back({user_id(u), item_id(v), ts});
        }
    }
    return log;
}

void write_movielens_file(const std::string& path, const InteractionLog& log) {
    std::ostringstream out;
    for (const auto& it : log) {
        // Synthetic ids are "u<N>"/"v<N>"; strip the prefix for numeric fields.
        out << it.user.substr(1) << '\t' << it.item.substr(1) << "\t1\t" << it.timestamp
            << '\n';
    }
    write_file_atomic(path, out.str());
}

}  // namespace synthetic
}  // namespace trec
