#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "sgfd/corpus.hpp"
#include "sgfd/rng.hpp"

namespace sgfd::test {

// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("sgfd_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }

    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, scale);
    return m;
}

// Random right-stochastic matrix (rows are probability distributions).
inline Matrix random_prob_rows(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = rng.uniform() + 1e-3;
            sum += m(i, j);
        }
        m.row(i) /= sum;
    }
    return m;
}

// Tiny hand-built corpus with an explicit interaction list.
inline InteractionCorpus make_corpus(int num_users, int num_items,
                                     const std::vector<std::pair<int, int>>& interactions) {
    InteractionCorpus corpus;
    for (int u = 0; u < num_users; ++u) {
        corpus.user_index["u" + std::to_string(u)] = u;
        corpus.user_ids.push_back("u" + std::to_string(u));
    }
    for (int i = 0; i < num_items; ++i) {
        corpus.item_index["i" + std::to_string(i)] = i;
        corpus.item_ids.push_back("i" + std::to_string(i));
    }
    corpus.interactions = interactions;
    return corpus;
}

}  // namespace sgfd::test
