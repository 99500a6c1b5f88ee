#include "trec/config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "trec/errors.hpp"
#include "trec/io.hpp"

namespace trec {

DatasetFormat dataset_format_from_string(const std::string& s) {
    if (s == "movielens") return DatasetFormat::kMovielens;
    if (s == "amazon_csv") return DatasetFormat::kAmazonCsv;
    throw ConfigError("unknown dataset format '" + s + "' (expected movielens or amazon_csv)");
}

std::string to_string(DatasetFormat f) {
    return f == DatasetFormat::kMovielens ? "movielens" : "amazon_csv";
}

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t");
    return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError(key + ": expected true/false, got '" + value + "'");
}

int parse_int(const std::string& key, const std::string& value) {
    int out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError(key + ": expected integer, got '" + value + "'");
    }
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError(key + ": expected unsigned integer, got '" + value + "'");
    }
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const double out = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected number, got '" + value + "'");
    }
}

std::string format_double(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::istringstream in(csv);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        out.push_back(parse_int("list entry", tok));
    }
    if (out.empty()) throw ConfigError("expected a comma-separated integer list, got '" + csv + "'");
    return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::istringstream in(csv);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        out.push_back(parse_double("list entry", tok));
    }
    if (out.empty()) throw ConfigError("expected a comma-separated number list, got '" + csv + "'");
    return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "dataset.format") {
        dataset_format = dataset_format_from_string(value);
    } else if (key == "dataset.path") {
        dataset_path = value;
    } else if (key == "dataset.cache") {
        cache_path = value;
    } else if (key == "split.train") {
        split.train = parse_double(key, value);
    } else if (key == "split.validation") {
        split.validation = parse_double(key, value);
    } else if (key == "split.test") {
        split.test = parse_double(key, value);
    } else if (key == "model.d") {
        model.d = parse_int(key, value);
    } else if (key == "model.p") {
        model.p = parse_int(key, value);
    } else if (key == "model.q") {
        model.q = parse_int(key, value);
    } else if (key == "model.omega") {
        model.omega = parse_double(key, value);
    } else if (key == "model.alpha") {
        model.alpha = parse_double(key, value);
    } else if (key == "model.beta") {
        model.beta = parse_double(key, value);
    } else if (key == "model.aggregation") {
        model.aggregation = aggregation_from_string(value);
    } else if (key == "model.untied_tables") {
        model.untied_tables = parse_bool(key, value);
    } else if (key == "train.learning_rate") {
        train.learning_rate = parse_double(key, value);
    } else if (key == "train.lambda") {
        train.lambda_reg = parse_double(key, value);
    } else if (key == "train.epochs") {
        train.epochs = parse_int(key, value);
    } else if (key == "train.negatives_per_positive") {
        train.negatives_per_positive = parse_int(key, value);
    } else if (key == "train.seed") {
        train.seed = parse_u64(key, value);
    } else if (key == "train.optimizer") {
        train.optimizer = optimizer_from_string(value);
    } else if (key == "train.eval_validation") {
        train.eval_validation = parse_bool(key, value);
    } else if (key == "eval.ks") {
        eval_ks = parse_int_list(value);
    } else if (key == "out.dir") {
        out_dir = value;
    } else if (key == "ablation.without_self_attention") {
        ablation.without_self_attention = parse_bool(key, value);
    } else if (key == "ablation.without_iti") {
        ablation.without_iti = parse_bool(key, value);
    } else if (key == "ablation.without_u_plus") {
        ablation.without_u_plus = parse_bool(key, value);
    } else if (key == "ablation.aggregation") {
        if (value.empty() || value == "none") {
            ablation.aggregation_override.reset();
        } else {
            ablation.aggregation_override = aggregation_from_string(value);
        }
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

std::string RunConfig::resolved_text() const {
    std::ostringstream out;
    out << "dataset.format = " << to_string(dataset_format) << '\n';
    out << "dataset.path = " << dataset_path << '\n';
    out << "dataset.cache = " << cache_path << '\n';
    out << "split.train = " << format_double(split.train) << '\n';
    out << "split.validation = " << format_double(split.validation) << '\n';
    out << "split.test = " << format_double(split.test) << '\n';
    out << "model.d = " << model.d << '\n';
    out << "model.p = " << model.p << '\n';
    out << "model.q = " << model.q << '\n';
    out << "model.omega = " << format_double(model.omega) << '\n';
    out << "model.alpha = " << format_double(model.alpha) << '\n';
    out << "model.beta = " << format_double(model.beta) << '\n';
    out << "model.aggregation = " << to_string(model.aggregation) << '\n';
    out << "model.untied_tables = " << (model.untied_tables ? "true" : "false") << '\n';
    out << "train.learning_rate = " << format_double(train.learning_rate) << '\n';
    out << "train.lambda = " << format_double(train.lambda_reg) << '\n';
    out << "train.epochs = " << train.epochs << '\n';
    out << "train.negatives_per_positive = " << train.negatives_per_positive << '\n';
    out << "train.seed = " << train.seed << '\n';
    out << "train.optimizer = " << to_string(train.optimizer) << '\n';
    out << "train.eval_validation = " << (train.eval_validation ? "true" : "false") << '\n';
    out << "eval.ks = ";
    for (size_t i = 0; i < eval_ks.size(); ++i) out << (i ? "," : "") << eval_ks[i];
    out << '\n';
    out << "out.dir = " << out_dir << '\n';
    out << "ablation.without_self_attention = "
        << (ablation.without_self_attention ? "true" : "false") << '\n';
    out << "ablation.without_iti = " << (ablation.without_iti ? "true" : "false") << '\n';
    out << "ablation.without_u_plus = " << (ablation.without_u_plus ? "true" : "false")
        << '\n';
    out << "ablation.aggregation = "
        << (ablation.aggregation_override ? to_string(*ablation.aggregation_override)
                                          : "none")
        << '\n';
    return out.str();
}

std::string RunConfig::hash8() const {
    const std::string text = resolved_text();
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(8, '0');
    for (int i = 0; i < 8; ++i) out[i] = hex[(h >> (60 - 4 * i)) & 0xF];
    return out;
}

void RunConfig::validate() const {
    model.validate();
    train.validate();
    if (eval_ks.empty()) throw ConfigError("eval.ks must not be empty");
    for (int k : eval_ks) {
        if (k < 1) throw ConfigError("eval.ks entries must be >= 1");
    }
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected 'key = value'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        try {
            cfg.set(key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    return parse_config_text(read_file(path), path);
}

}  // namespace trec
