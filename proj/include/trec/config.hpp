#pragma once

#include <string>
#include <vector>

#include "trec/data.hpp"
#include "trec/eval.hpp"
#include "trec/model.hpp"
#include "trec/train.hpp"

namespace trec {

enum class DatasetFormat { kMovielens, kAmazonCsv };

DatasetFormat dataset_format_from_string(const std::string& s);
std::string to_string(DatasetFormat f);

// Declarative run configuration: a flat key = value file with dotted section
// keys. Unknown keys are rejected with the offending key named; flag overrides
// go through the same setter.
struct RunConfig {
    DatasetFormat dataset_format = DatasetFormat::kMovielens;
    std::string dataset_path;
    std::string cache_path;  // defaults to <run dir>/cache.trec when empty
    SplitRatios split;
    Hyperparams model;
    TrainConfig train;
    std::vector<int> eval_ks = {10, 20};
    std::string out_dir = "runs";
    AblationSpec ablation;

    // Applies one key = value assignment. Throws ConfigError on unknown keys
    // or unparsable values.
    void set(const std::string& key, const std::string& value);

    // Every key in deterministic order; parsing this text reproduces the
    // config exactly.
    std::string resolved_text() const;

    // FNV-1a over resolved_text(), hex-encoded; names the per-run directory.
    std::string hash8() const;

    void validate() const;
};

RunConfig parse_config_text(const std::string& text, const std::string& origin);
RunConfig load_config_file(const std::string& path);

std::vector<int> parse_int_list(const std::string& csv);
std::vector<double> parse_double_list(const std::string& csv);

}  // namespace trec
