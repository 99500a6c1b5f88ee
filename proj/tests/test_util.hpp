#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "trec/matrix.hpp"

namespace trec::testing {

// Unique scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 rng(std::random_device{}());
        path = std::filesystem::temp_directory_path() /
               ("trec-" + tag + "-" + std::to_string(rng()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

// Uniform in [-1, 1], resampling any entry with |x| < margin so tests stay
// clear of relu/max kink points.
inline Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double margin = 0.0) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Matrix m(rows, cols);
    for (int i = 0; i < m.size(); ++i) {
        double v = dist(rng);
        while (margin > 0.0 && std::abs(v) < margin) v = dist(rng);
        m.data()[i] = v;
    }
    return m;
}

}  // namespace trec::testing
