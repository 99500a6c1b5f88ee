#include <doctest.h>

#include <map>
#include <random>
#include <sstream>

#include "test_util.hpp"
#include "trec/data.hpp"
#include "trec/errors.hpp"
#include "trec/io.hpp"

using namespace trec;
using trec::testing::TempDir;
using trec::testing::write_text;

TEST_CASE("movielens loader maps fields and keeps every rating") {
    TempDir dir("ml");
    const std::string path = dir.file("u.data");
    write_text(path, "1\t50\t5\t874965758\n2\t33\t1\t874965759\n");
    const InteractionLog log = load_movielens(path);
    REQUIRE(log.size() == 2);
    CHECK(log[0].user == "1");
    CHECK(log[0].item == "50");
    CHECK(log[0].timestamp == 874965758);
}

TEST_CASE("movielens loader: malformed line reported with its number") {
    TempDir dir("ml");
    const std::string path = dir.file("u.data");
    write_text(path, "1\t50\t5\t874965758\n1\t50\t5\n");
    try {
        load_movielens(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
}

TEST_CASE("movielens loader: empty file and missing file") {
    TempDir dir("ml");
    const std::string path = dir.file("empty.data");
    write_text(path, "");
    CHECK_THROWS_AS(load_movielens(path), ParseError);
    CHECK_THROWS_AS(load_movielens(dir.file("missing.data")), IoError);
}

TEST_CASE("movielens loader handles a 100k-line file") {
    TempDir dir("ml");
    const std::string path = dir.file("u.data");
    std::ostringstream out;
    for (int i = 0; i < 100000; ++i) {
        out << (i % 943 + 1) << '\t' << (i % 1682 + 1) << "\t3\t" << (874000000 + i) << '\n';
    }
    write_text(path, out.str());
    CHECK(load_movielens(path).size() == 100000);
}

TEST_CASE("amazon csv loader: field order, header detection, duplicates kept") {
    TempDir dir("az");
    const std::string path = dir.file("reviews.csv");
    write_text(path,
               "item,user,rating,timestamp\n"
               "B00001,U42,4.0,1514764800\n"
               "B00001,U42,5.0,1514764900\n");
    const InteractionLog log = load_amazon_csv(path);
    REQUIRE(log.size() == 2);  // duplicate (user,item) pairs are both kept
    CHECK(log[0].user == "U42");
    CHECK(log[0].item == "B00001");
    CHECK(log[0].timestamp == 1514764800);
    CHECK(log[1].timestamp == 1514764900);

    write_text(dir.file("empty.csv"), "");
    CHECK_THROWS_AS(load_amazon_csv(dir.file("empty.csv")), ParseError);
}

namespace {

InteractionLog sequential_log(const std::string& user, int items_from, int count,
                              std::int64_t ts_from) {
    InteractionLog log;
    for (int k = 0; k < count; ++k) {
        log.push_back({user, "v" + std::to_string(items_from + k), ts_from + k});
    }
    return log;
}

}  // namespace

TEST_CASE("chronological split ratios: 10 -> 7/2/1, earliest in train") {
    const InteractionLog log = sequential_log("u", 0, 10, 100);
    const auto [catalog, ds] = chronological_split(log);
    REQUIRE(catalog.num_users() == 1);
    CHECK(ds.train(0).size() == 7);
    CHECK(ds.validation(0).size() == 2);
    CHECK(ds.test(0).size() == 1);
    for (size_t k = 0; k < 7; ++k) CHECK(ds.train(0)[k].timestamp == 100 + (std::int64_t)k);
}

TEST_CASE("users with fewer than 3 interactions stay entirely in train") {
    const InteractionLog log = sequential_log("u", 0, 2, 100);
    const auto [catalog, ds] = chronological_split(log);
    CHECK(ds.train(0).size() == 2);
    CHECK(ds.validation(0).empty());
    CHECK(ds.test(0).empty());
}

TEST_CASE("split ordering and partition hold on randomized logs") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        InteractionLog log;
        std::uniform_int_distribution<int> count_dist(1, 15);
        std::uniform_int_distribution<int> item_dist(0, 24);
        std::uniform_int_distribution<std::int64_t> ts_dist(0, 1000);
        const int users = 12;
        for (int u = 0; u < users; ++u) {
            const int n = count_dist(rng);
            for (int k = 0; k < n; ++k) {
                log.push_back({"u" + std::to_string(u), "v" + std::to_string(item_dist(rng)),
                               ts_dist(rng)});
            }
        }
        const auto [catalog, ds] = chronological_split(log);
        for (int u = 0; u < catalog.num_users(); ++u) {
            const auto& tr = ds.train(u);
            const auto& va = ds.validation(u);
            const auto& te = ds.test(u);
            // Chronological: max(train) <= min(validation) <= min(test).
            if (!tr.empty() && !va.empty()) {
                CHECK(tr.back().timestamp <= va.front().timestamp);
            }
            if (!va.empty() && !te.empty()) {
                CHECK(va.back().timestamp <= te.front().timestamp);
            }
            if (!tr.empty() && !te.empty()) {
                CHECK(tr.back().timestamp <= te.front().timestamp);
            }
            const size_t total = tr.size() + va.size() + te.size();
            size_t expected = 0;
            for (const auto& raw : log) {
                if (catalog.user_index.at(raw.user) == u) ++expected;
            }
            CHECK(total == expected);  // partition: nothing lost, nothing added
        }
        // Trend index only contains training interactions.
        for (int v = 0; v < catalog.num_items(); ++v) {
            for (const auto& entry : ds.trend(v)) {
                bool in_train = false;
                for (const auto& it : ds.train(entry.user)) {
                    if (it.item == v && it.timestamp == entry.timestamp) in_train = true;
                }
                CHECK(in_train);
            }
        }
    }
}

TEST_CASE("catalog round-trip is the identity") {
    const auto [catalog, ds] = chronological_split(
        {{"alice", "x", 3}, {"bob", "y", 1}, {"alice", "y", 2}});
    for (int u = 0; u < catalog.num_users(); ++u) {
        CHECK(catalog.user_index.at(catalog.user_raw[u]) == u);
    }
    for (int v = 0; v < catalog.num_items(); ++v) {
        CHECK(catalog.item_index.at(catalog.item_raw[v]) == v);
    }
}

TEST_CASE("user_recent_sequence follows the worked 8-item example") {
    // User 1 watched v3, v8 first and v1, v4, v5, v7 most recently, so the
    // p=4 window is (v1, v4, v5, v7) in ascending time order.
    SplitDataset ds(1, 9);
    int t = 0;
    for (int item : {3, 8, 1, 4, 5, 7}) ds.add_train({0, item, ++t});
    ds.finalize();
    CHECK(ds.user_recent_sequence(0, 4) == std::vector<int>{1, 4, 5, 7});
    // Shorter history than p: everything is returned.
    CHECK(ds.user_recent_sequence(0, 10) == std::vector<int>{3, 8, 1, 4, 5, 7});
}

TEST_CASE("user_recent_sequence slides when a newer interaction arrives") {
    SplitDataset a(1, 10);
    SplitDataset b(1, 10);
    int t = 0;
    for (int item : {0, 1, 2, 3}) a.add_train({0, item, ++t});
    t = 0;
    for (int item : {0, 1, 2, 3, 4}) b.add_train({0, item, ++t});
    a.finalize();
    b.finalize();
    CHECK(a.user_recent_sequence(0, 3) == std::vector<int>{1, 2, 3});
    CHECK(b.user_recent_sequence(0, 3) == std::vector<int>{2, 3, 4});
}

TEST_CASE("item_recent_users follows the worked trend example") {
    // Interactors of item 8 with timestamps ordered Apr-3 > Apr-1 > Feb-2 >
    // Feb-1 > ... so the q=4 window is users (1, 3, 4, 6), newest first.
    SplitDataset ds(11, 9);
    const std::vector<std::pair<int, std::int64_t>> events = {
        {1, 403'1230}, {3, 401'2223}, {4, 202'1230}, {6, 201'0220},
        {7, 131'0832}, {8, 112'0230}, {9, 111'1108}, {10, 103'0420},
    };
    for (const auto& [user, ts] : events) ds.add_train({user, 8, ts});
    ds.finalize();
    CHECK(ds.item_recent_users(8, 4) == std::vector<int>{1, 3, 4, 6});
    // Single interactor, q larger than history.
    SplitDataset one(2, 2);
    one.add_train({1, 0, 5});
    one.finalize();
    CHECK(one.item_recent_users(0, 4) == std::vector<int>{1});
    CHECK(one.item_recent_users(1, 4).empty());
    // Timestamps along the trend index never increase.
    for (size_t k = 1; k < ds.trend(8).size(); ++k) {
        CHECK(ds.trend(8)[k - 1].timestamp >= ds.trend(8)[k].timestamp);
    }
}

TEST_CASE("sequence lengths are capped by p and q") {
    const InteractionLog log = sequential_log("u", 0, 12, 0);
    const auto [catalog, ds] = chronological_split(log);
    CHECK(ds.user_recent_sequence(0, 5).size() == 5);
    CHECK(ds.item_recent_users(0, 3).size() <= 3);
}

TEST_CASE("bpr triples satisfy their contract") {
    const auto [catalog, ds] = chronological_split({
        {"a", "x", 1}, {"a", "y", 2}, {"a", "z", 3}, {"a", "w", 4},
        {"b", "y", 1}, {"b", "z", 2}, {"b", "q", 3},
    });
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        const BprTriple t = sample_bpr_triple(ds, rng);
        bool pos_in_train = false;
        for (const auto& it : ds.train(t.user)) pos_in_train |= it.item == t.pos_item;
        CHECK(pos_in_train);
        CHECK(!ds.interacted(t.user).contains(t.neg_item));
    }
}

TEST_CASE("bpr sampling is uniform over training interactions") {
    // 2 users, 4 items, 2 training interactions each; every training
    // interaction should be drawn with frequency 1/4.
    const auto [catalog, ds] = chronological_split({
        {"u0", "v0", 1}, {"u0", "v2", 2}, {"u0", "v1", 3},
        {"u1", "v1", 1}, {"u1", "v2", 2}, {"u1", "v3", 3},
    });
    // 3 interactions per user -> 2 train each: u0 {v0,v2}, u1 {v1,v2}.
    std::mt19937_64 rng(7);
    const int draws = 10000;
    std::map<std::pair<int, int>, int> counts;
    for (int k = 0; k < draws; ++k) {
        const BprTriple t = sample_bpr_triple(ds, rng);
        ++counts[{t.user, t.pos_item}];
    }
    CHECK(counts.size() == 4);
    const double expected = draws / 4.0;
    const double sigma = std::sqrt(draws * 0.25 * 0.75);
    for (const auto& [key, count] : counts) {
        CHECK(std::abs(count - expected) <= 3.0 * sigma);
    }
}

TEST_CASE("bpr sampling is deterministic under a fixed seed") {
    const auto [catalog, ds] = chronological_split(
        {{"a", "x", 1}, {"a", "y", 2}, {"b", "z", 1}, {"b", "x", 2}});
    std::mt19937_64 rng1(42);
    std::mt19937_64 rng2(42);
    for (int k = 0; k < 100; ++k) {
        const BprTriple a = sample_bpr_triple(ds, rng1);
        const BprTriple b = sample_bpr_triple(ds, rng2);
        CHECK(a.user == b.user);
        CHECK(a.pos_item == b.pos_item);
        CHECK(a.neg_item == b.neg_item);
    }
}

TEST_CASE("dataset cache round-trips and is byte-deterministic") {
    TempDir dir("cache");
    const InteractionLog log = [&] {
        InteractionLog l;
        std::mt19937_64 rng(3);
        std::uniform_int_distribution<int> item(0, 9);
        for (int u = 0; u < 8; ++u) {
            for (int k = 0; k < 6; ++k) {
                l.push_back({"user" + std::to_string(u), "item" + std::to_string(item(rng)),
                             k * 10 + u});
            }
        }
        return l;
    }();
    const auto [catalog, ds] = chronological_split(log);
    const std::string path = dir.file("cache.trec");
    save_dataset_cache(path, catalog, ds);
    const std::string bytes1 = read_file(path);
    save_dataset_cache(path, catalog, ds);
    CHECK(read_file(path) == bytes1);

    const auto [catalog2, ds2] = load_dataset_cache(path);
    CHECK(catalog2.user_raw == catalog.user_raw);
    CHECK(catalog2.item_raw == catalog.item_raw);
    REQUIRE(ds2.num_users() == ds.num_users());
    for (int u = 0; u < ds.num_users(); ++u) {
        CHECK(ds2.train(u).size() == ds.train(u).size());
        CHECK(ds2.validation(u).size() == ds.validation(u).size());
        CHECK(ds2.test(u).size() == ds.test(u).size());
    }
    for (int v = 0; v < ds.num_items(); ++v) {
        REQUIRE(ds2.trend(v).size() == ds.trend(v).size());
        for (size_t k = 0; k < ds.trend(v).size(); ++k) {
            CHECK(ds2.trend(v)[k].user == ds.trend(v)[k].user);
            CHECK(ds2.trend(v)[k].timestamp == ds.trend(v)[k].timestamp);
        }
    }
}

TEST_CASE("dataset cache rejects corruption and version drift") {
    TempDir dir("cache");
    const auto [catalog, ds] = chronological_split(sequential_log("u", 0, 5, 0));
    const std::string path = dir.file("cache.trec");
    save_dataset_cache(path, catalog, ds);

    std::string bytes = read_file(path);
    write_text(dir.file("truncated.trec"), bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_dataset_cache(dir.file("truncated.trec")), CheckpointError);

    write_text(dir.file("wrong.trec"), "trec-cache 99\n" + bytes);
    CHECK_THROWS_AS(load_dataset_cache(dir.file("wrong.trec")), CheckpointError);
}

TEST_CASE("dataset stats reports the Table-style summary") {
    const auto [catalog, ds] = chronological_split({
        {"a", "x", 1}, {"a", "y", 2}, {"a", "z", 3}, {"a", "q", 4},
        {"b", "x", 1}, {"b", "y", 2},
    });
    const DatasetStats stats = dataset_stats(catalog, ds);
    CHECK(stats.users == 2);
    CHECK(stats.items == 4);
    CHECK(stats.interactions == 6);
    CHECK(stats.median_per_user == doctest::Approx(3.0));
}
