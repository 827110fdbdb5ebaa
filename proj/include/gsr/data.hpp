#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace gsr {

// Row-major so that each sample's embedding is contiguous.
using FeatureMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Fixed embeddings with class labels and optional group labels. Immutable
// after construction.
//
// Construction checks: n >= 1, d >= 1, finite features, labels in [0, K),
// group ids in [0, m). A group id may have no samples in a subset; functions
// that average per group report that as an error at the point of use.
class EmbeddingDataset {
public:
    EmbeddingDataset(FeatureMatrix features, std::vector<int> labels,
                     std::optional<std::vector<int>> groups, int num_classes,
                     int num_groups = 0);

    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t dim() const noexcept {
        return static_cast<std::size_t>(features_.cols());
    }
    int num_classes() const noexcept { return num_classes_; }
    int num_groups() const noexcept { return num_groups_; }
    bool has_groups() const noexcept { return groups_.has_value(); }

    const FeatureMatrix& features() const noexcept { return features_; }
    const std::vector<int>& labels() const noexcept { return labels_; }
    // Throws ValidationError when the dataset carries no group labels.
    const std::vector<int>& groups() const;

    // Row subset in the given order; K and m are kept.
    EmbeddingDataset subset(std::span<const std::size_t> rows) const;
    EmbeddingDataset with_labels(std::vector<int> labels) const;

    std::vector<std::size_t> group_counts() const;
    std::vector<std::vector<std::size_t>> rows_by_group() const;

private:
    FeatureMatrix features_;
    std::vector<int> labels_;
    std::optional<std::vector<int>> groups_;
    int num_classes_ = 0;
    int num_groups_ = 0;
};

// Requires groups to be present (used by the group-level operations).
void require_groups(const EmbeddingDataset& ds, const char* what);

struct SplitPlan {
    double heldout_fraction = 0.1;
    std::uint64_t seed = 1;
    bool stratify_by_group = false;

    void validate() const;
};

struct SyntheticSpec {
    // One entry per group; group id g = class * A + attribute with
    // A = n_per_group.size() / num_classes.
    std::vector<std::size_t> n_per_group{450, 50, 50, 450};
    int num_classes = 2;
    std::size_t d_core = 2;
    std::size_t d_spurious = 2;
    std::size_t d_noise = 8;
    double core_gap = 1.5;
    double spurious_gap = 4.0;
    double noise_std = 1.0;
    std::uint64_t seed = 1;

    int num_attributes() const;
    void validate() const;
};

struct NoiseSpec {
    double flip_fraction = 0.0;
    std::uint64_t seed = 1;

    void validate() const;
};

// Column roles for the delimited embedding format.
struct EmbeddingSchema {
    std::string feature_prefix = "f";
    std::string label_column = "label";
    std::string group_column = "group";
    char delimiter = ',';
    bool require_groups = false;
};

// Half away from zero, the single count-rounding convention of the library.
std::size_t round_count(double value);

// Sidecar manifest path: "<path>.manifest", lines of `key = value` with keys
// num_classes and num_groups.
std::filesystem::path manifest_path(const std::filesystem::path& data_path);

EmbeddingDataset load_embeddings(const std::filesystem::path& path,
                                 const EmbeddingSchema& schema = {});
void save_embeddings(const EmbeddingDataset& ds,
                     const std::filesystem::path& path,
                     const EmbeddingSchema& schema = {});

struct DatasetSplit {
    EmbeddingDataset first;
    EmbeddingDataset second;
    std::vector<std::size_t> first_rows;
    std::vector<std::size_t> second_rows;
};

// first = held-out (round(alpha * n) rows), second = remaining. Row order
// inside each part follows the input.
DatasetSplit split_holdout(const EmbeddingDataset& ds, const SplitPlan& plan);

// first = target, second = validation. Stratified by group unless disabled.
DatasetSplit split_target_val(const EmbeddingDataset& ds, std::uint64_t seed,
                              bool stratify = true);

EmbeddingDataset make_synthetic(const SyntheticSpec& spec);

// Desk-scale stand-in for a benchmark: a training pool whose group sizes are
// spec.n_per_group scaled by train_scale (so a 1/train_scale held-out split
// has about spec.n_per_group rows per group), a balanced labeled pool split
// into target and validation halves, and a balanced test set.
struct SyntheticSuiteSizes {
    double train_scale = 10.0;
    std::size_t labeled_per_group = 200;
    std::size_t test_per_group = 500;
};

struct SyntheticSuite {
    EmbeddingDataset train;
    EmbeddingDataset target;
    EmbeddingDataset validation;
    EmbeddingDataset test;
};

// Seeds: train uses spec.seed, the labeled pool spec.seed + 1000003, the test
// set spec.seed + 2000003; the target/validation split uses spec.seed.
SyntheticSuite make_synthetic_suite(const SyntheticSpec& spec,
                                    const SyntheticSuiteSizes& sizes = {});

struct NoisyDataset {
    EmbeddingDataset dataset;
    std::vector<std::size_t> flipped;  // sorted
};

NoisyDataset inject_label_noise(const EmbeddingDataset& ds,
                                const NoiseSpec& spec);

}  // namespace gsr
