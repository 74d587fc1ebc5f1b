#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sgn/common.hpp"

namespace sgn {

/// Raw data: L samples (rows) by N features (columns). All entries finite.
struct FeatureMatrix {
    Eigen::MatrixXd values;
    std::optional<std::vector<std::string>> feature_names;

    Eigen::Index samples() const { return values.rows(); }
    Eigen::Index features() const { return values.cols(); }
};

enum class Task { Classification, Regression };

/// Features plus targets. Classification targets are labels in {1..C},
/// stored as doubles alongside regression targets for a uniform interface.
struct LabeledDataset {
    FeatureMatrix features;
    Eigen::VectorXd targets;
    Task task = Task::Regression;
    int num_classes = 0;

    Eigen::Index size() const { return features.samples(); }
    int label(Eigen::Index i) const { return static_cast<int>(targets[i]); }
};

struct SplitSpec {
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;
};

enum class MatrixFormat { Csv, Binary };

/// Reads a CSV (optional header row) or "SGN1" binary matrix.
/// Rejects non-finite entries and malformed rows with the offending location.
FeatureMatrix load_matrix(const std::string& path, MatrixFormat format);

/// "SGN1" format: 4 magic bytes, rows and cols as 64-bit LE unsigned,
/// then row-major 64-bit LE IEEE-754 doubles.
void save_matrix_binary(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_matrix_binary(const std::string& path);

/// Entry-wise x -> log(1 + x). Requires nonnegative input.
FeatureMatrix log_normalize(const FeatureMatrix& X);

struct ZScoreResult {
    FeatureMatrix normalized;
    Eigen::VectorXd means;
    Eigen::VectorXd stds;  // population convention; 0 marks a constant column
};

/// Centers each feature and divides by its population standard deviation.
/// Constant columns are centered only and their std is reported as 0.
ZScoreResult zscore_normalize(const FeatureMatrix& X);

/// Deterministic seeded split. Validation size is floor(L * fraction),
/// clamped to [1, L-1] so both parts are non-empty.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, const SplitSpec& spec);

/// Row subset helper used by split and minibatching.
LabeledDataset take_rows(const LabeledDataset& ds, const std::vector<Eigen::Index>& rows);

/// Reads one target per line; classification labels validated against [1, C].
Eigen::VectorXd load_targets(const std::string& path);

}  // namespace sgn
