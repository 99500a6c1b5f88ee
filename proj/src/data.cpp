#include "trec/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "trec/errors.hpp"
#include "trec/io.hpp"

namespace trec {

namespace {

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool parse_i64(std::string_view s, std::int64_t& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && !s.empty();
}

[[noreturn]] void throw_parse(const std::string& path, size_t line_no, const std::string& why) {
    throw ParseError(path + ":" + std::to_string(line_no) + ": " + why);
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

}  // namespace

InteractionLog load_movielens(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    InteractionLog log;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_fields(line, '\t');
        if (fields.size() != 4) {
            throw_parse(path, line_no, "expected 4 TAB-separated fields, got " +
                                           std::to_string(fields.size()));
        }
        std::int64_t ts = 0;
        if (!parse_i64(fields[3], ts)) {
            throw_parse(path, line_no, "bad timestamp '" + std::string(fields[3]) + "'");
        }
        if (fields[0].empty() || fields[1].empty()) {
            throw_parse(path, line_no, "empty user or item id");
        }
        log.push_back({std::string(fields[0]), std::string(fields[1]), ts});
    }
    if (log.empty()) throw ParseError(path + ": empty dataset");
    return log;
}

InteractionLog load_amazon_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    InteractionLog log;
    std::string line;
    size_t line_no = 0;
    bool first_data_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_fields(line, ',');
        if (fields.size() != 4) {
            throw_parse(path, line_no, "expected 4 comma-separated fields, got " +
                                           std::to_string(fields.size()));
        }
        std::int64_t ts = 0;
        if (!parse_i64(fields[3], ts)) {
            if (first_data_line) {  // header row
                first_data_line = false;
                continue;
            }
            throw_parse(path, line_no, "bad timestamp '" + std::string(fields[3]) + "'");
        }
        first_data_line = false;
        if (fields[0].empty() || fields[1].empty()) {
            throw_parse(path, line_no, "empty user or item id");
        }
        log.push_back({std::string(fields[1]), std::string(fields[0]), ts});
    }
    if (log.empty()) throw ParseError(path + ": empty dataset");
    return log;
}

SplitDataset::SplitDataset(int num_users, int num_items)
    : train_(num_users),
      validation_(num_users),
      test_(num_users),
      trend_(num_items),
      interacted_(num_users) {}

void SplitDataset::add_train(const Interaction& it) {
    train_[it.user].push_back(it);
    trend_[it.item].push_back({it.user, it.timestamp});
    interacted_[it.user].insert(it.item);
    all_train_.push_back(it);
    ++num_train_;
}

void SplitDataset::add_validation(const Interaction& it) {
    validation_[it.user].push_back(it);
    interacted_[it.user].insert(it.item);
}

void SplitDataset::add_test(const Interaction& it) {
    test_[it.user].push_back(it);
    interacted_[it.user].insert(it.item);
}

void SplitDataset::finalize() {
    for (auto& entries : trend_) {
        std::stable_sort(entries.begin(), entries.end(),
                         [](const TrendEntry& a, const TrendEntry& b) {
                             return a.timestamp > b.timestamp;
                         });
    }
}

std::vector<int> SplitDataset::user_recent_sequence(int user, int p) const {
    const auto& hist = train_[user];
    const size_t take = std::min<size_t>(static_cast<size_t>(p), hist.size());
    std::vector<int> out;
    out.reserve(take);
    for (size_t k = hist.size() - take; k < hist.size(); ++k) {
        out.push_back(hist[k].item);
    }
    return out;
}

std::vector<int> SplitDataset::item_recent_users(int item, int q) const {
    const auto& entries = trend_[item];
    const size_t take = std::min<size_t>(static_cast<size_t>(q), entries.size());
    std::vector<int> out;
    out.reserve(take);
    for (size_t k = 0; k < take; ++k) out.push_back(entries[k].user);
    return out;
}

std::pair<Catalog, SplitDataset> chronological_split(const InteractionLog& log,
                                                     SplitRatios ratios) {
    if (log.empty()) throw ParseError("chronological_split: empty interaction log");
    if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0 ||
        std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
        throw ConfigError("split ratios must be non-negative and sum to 1");
    }

    Catalog catalog;
    std::vector<std::vector<Interaction>> per_user;
    for (const RawInteraction& raw : log) {
        auto [uit, unew] = catalog.user_index.try_emplace(
            raw.user, static_cast<int>(catalog.user_raw.size()));
        if (unew) {
            catalog.user_raw.push_back(raw.user);
            per_user.emplace_back();
        }
        auto [iit, inew] = catalog.item_index.try_emplace(
            raw.item, static_cast<int>(catalog.item_raw.size()));
        if (inew) catalog.item_raw.push_back(raw.item);
        per_user[uit->second].push_back({uit->second, iit->second, raw.timestamp});
    }

    SplitDataset ds(catalog.num_users(), catalog.num_items());
    for (auto& hist : per_user) {
        std::stable_sort(hist.begin(), hist.end(),
                         [](const Interaction& a, const Interaction& b) {
                             return a.timestamp < b.timestamp;
                         });
        const size_t n = hist.size();
        size_t n_train, n_val;
        if (n < 3) {
            n_train = n;
            n_val = 0;
        } else {
            n_train = static_cast<size_t>(std::floor(ratios.train * static_cast<double>(n)));
            n_val = static_cast<size_t>(std::floor(ratios.validation * static_cast<double>(n)));
        }
        for (size_t k = 0; k < n; ++k) {
            if (k < n_train) {
                ds.add_train(hist[k]);
            } else if (k < n_train + n_val) {
                ds.add_validation(hist[k]);
            } else {
                ds.add_test(hist[k]);
            }
        }
    }
    ds.finalize();
    return {std::move(catalog), std::move(ds)};
}

BprTriple sample_bpr_triple(const SplitDataset& ds, std::mt19937_64& rng) {
    const auto& train = ds.all_train();
    if (train.empty()) {
        throw ConfigError("sample_bpr_triple: no training interactions");
    }
    std::uniform_int_distribution<size_t> pick(0, train.size() - 1);
    std::uniform_int_distribution<int> pick_item(0, ds.num_items() - 1);

    constexpr int kOuterTries = 1000;
    constexpr int kInnerTries = 64;
    for (int attempt = 0; attempt < kOuterTries; ++attempt) {
        const Interaction& pos = train[pick(rng)];
        const auto& seen = ds.interacted(pos.user);
        if (static_cast<int>(seen.size()) >= ds.num_items()) continue;  // resample user
        for (int t = 0; t < kInnerTries; ++t) {
            const int j = pick_item(rng);
            if (!seen.contains(j)) return {pos.user, pos.item, j};
        }
    }
    throw NumericsError("sample_bpr_triple: negative sampling failed (catalog saturated)");
}

namespace {

constexpr const char* kCacheMagic = "trec-cache";
constexpr int kCacheVersion = 1;

}  // namespace

void save_dataset_cache(const std::string& path, const Catalog& catalog,
                        const SplitDataset& ds) {
    std::ostringstream out;
    out << kCacheMagic << ' ' << kCacheVersion << '\n';
    out << "users " << catalog.num_users() << '\n';
    out << "items " << catalog.num_items() << '\n';
    for (const auto& raw : catalog.user_raw) out << "u " << raw << '\n';
    for (const auto& raw : catalog.item_raw) out << "i " << raw << '\n';

    std::int64_t count = 0;
    for (int u = 0; u < ds.num_users(); ++u) {
        count += static_cast<std::int64_t>(ds.train(u).size() + ds.validation(u).size() +
                                           ds.test(u).size());
    }
    out << "n " << count << '\n';
    for (int u = 0; u < ds.num_users(); ++u) {
        for (const auto& it : ds.train(u))
            out << "r " << it.user << ' ' << it.item << ' ' << it.timestamp << " 0\n";
        for (const auto& it : ds.validation(u))
            out << "r " << it.user << ' ' << it.item << ' ' << it.timestamp << " 1\n";
        for (const auto& it : ds.test(u))
            out << "r " << it.user << ' ' << it.item << ' ' << it.timestamp << " 2\n";
    }
    out << "end\n";
    write_file_atomic(path, out.str());
}

std::pair<Catalog, SplitDataset> load_dataset_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    auto next_line = [&](const char* what) -> std::string& {
        if (!std::getline(in, line)) {
            throw CheckpointError(path + ": truncated cache (missing " + std::string(what) + ")");
        }
        strip_cr(line);
        return line;
    };

    {
        std::istringstream hdr(next_line("header"));
        std::string magic;
        int version = 0;
        hdr >> magic >> version;
        if (magic != kCacheMagic || version != kCacheVersion) {
            throw CheckpointError(path + ": not a trec cache or unsupported version");
        }
    }
    auto read_count = [&](const char* key) -> int {
        std::istringstream ls(next_line(key));
        std::string k;
        int v = 0;
        ls >> k >> v;
        if (k != key || v < 0) throw CheckpointError(path + ": malformed '" + key + "' line");
        return v;
    };
    const int num_users = read_count("users");
    const int num_items = read_count("items");

    Catalog catalog;
    for (int u = 0; u < num_users; ++u) {
        std::string& l = next_line("user id");
        if (l.size() < 2 || l[0] != 'u' || l[1] != ' ') {
            throw CheckpointError(path + ": malformed user id line");
        }
        std::string raw = l.substr(2);
        catalog.user_index.emplace(raw, u);
        catalog.user_raw.push_back(std::move(raw));
    }
    for (int i = 0; i < num_items; ++i) {
        std::string& l = next_line("item id");
        if (l.size() < 2 || l[0] != 'i' || l[1] != ' ') {
            throw CheckpointError(path + ": malformed item id line");
        }
        std::string raw = l.substr(2);
        catalog.item_index.emplace(raw, i);
        catalog.item_raw.push_back(std::move(raw));
    }

    std::int64_t count = 0;
    {
        std::istringstream ls(next_line("n"));
        std::string k;
        ls >> k >> count;
        if (k != "n" || count < 0) throw CheckpointError(path + ": malformed 'n' line");
    }
    SplitDataset ds(num_users, num_items);
    for (std::int64_t r = 0; r < count; ++r) {
        std::istringstream ls(next_line("record"));
        std::string k;
        Interaction it;
        int split = -1;
        ls >> k >> it.user >> it.item >> it.timestamp >> split;
        if (k != "r" || ls.fail() || it.user < 0 || it.user >= num_users || it.item < 0 ||
            it.item >= num_items) {
            throw CheckpointError(path + ": malformed record at entry " + std::to_string(r));
        }
        switch (split) {
            case 0: ds.add_train(it); break;
            case 1: ds.add_validation(it); break;
            case 2: ds.add_test(it); break;
            default: throw CheckpointError(path + ": bad split tag " + std::to_string(split));
        }
    }
    if (next_line("end") != "end") {
        throw CheckpointError(path + ": truncated cache (missing end marker)");
    }
    ds.finalize();
    return {std::move(catalog), std::move(ds)};
}

DatasetStats dataset_stats(const Catalog& catalog, const SplitDataset& ds) {
    DatasetStats stats;
    stats.users = catalog.num_users();
    stats.items = catalog.num_items();
    std::vector<std::int64_t> per_user(catalog.num_users());
    for (int u = 0; u < ds.num_users(); ++u) {
        per_user[u] = static_cast<std::int64_t>(ds.train(u).size() + ds.validation(u).size() +
                                                ds.test(u).size());
        stats.interactions += per_user[u];
    }
    std::sort(per_user.begin(), per_user.end());
    const size_t n = per_user.size();
    if (n % 2 == 1) {
        stats.median_per_user = static_cast<double>(per_user[n / 2]);
    } else if (n > 0) {
        stats.median_per_user =
            0.5 * static_cast<double>(per_user[n / 2 - 1] + per_user[n / 2]);
    }
    return stats;
}

}  // namespace trec
