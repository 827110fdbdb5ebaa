#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unistd.h>

#include "gsr/data.hpp"
#include "gsr/linear_model.hpp"
#include "gsr/rng.hpp"

namespace gsr::test {

// Standard normal features times `scale`, uniform labels; groups i % m for the
// first m rows (so every group is present when n >= m), uniform afterwards.
inline EmbeddingDataset random_dataset(std::size_t n, std::size_t d, int k, int m,
                                       std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    FeatureMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::vector<int> y(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(static_cast<Eigen::Index>(i), j) = scale * rng.normal();
        y[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
        g[i] = i < static_cast<std::size_t>(m) ? static_cast<int>(i)
                                                : static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
    }
    return EmbeddingDataset(std::move(x), std::move(y), std::move(g), k, m);
}

inline Eigen::VectorXd random_simplex(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::VectorXd w(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = 0.1 + rng.uniform01();
    return w / w.sum();
}

inline ClassifierParams random_params(std::size_t d, int k, std::uint64_t seed, double scale = 0.5) {
    Rng rng(seed);
    auto p = ClassifierParams::zeros(d, k);
    for (Eigen::Index i = 0; i < p.psi.size(); ++i) p.psi.data()[i] = scale * rng.normal();
    return p;
}

inline double max_rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

// Removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("gsr_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace gsr::test
