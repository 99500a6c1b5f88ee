#pragma once

#include <string>

namespace trec {

// Writes via a temp file + rename so reruns replace outputs atomically.
void write_file_atomic(const std::string& path, const std::string& bytes);

std::string read_file(const std::string& path);

}  // namespace trec
