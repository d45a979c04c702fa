/**
 * @file preprocess.hpp
 * @brief Split-wise normalization and PCA dimensionality reduction.
 */

#ifndef ADB_SHELL_PREPROCESS_HPP
#define ADB_SHELL_PREPROCESS_HPP

#include <vector>

#include <Eigen/Dense>

namespace adb::shell {

struct NormalizedSplit {
    Eigen::MatrixXd train;
    Eigen::MatrixXd other;
    std::vector<int> train_constant_columns;  // zero-variance, mapped to zero
    std::vector<int> other_constant_columns;
};

/// Z-score one matrix by its own column statistics; constant columns map to
/// zero and are reported in `constant_columns`.
Eigen::MatrixXd zscore(const Eigen::MatrixXd& data, std::vector<int>* constant_columns = nullptr);

/// Normalize the two splits independently, each by its own statistics.
NormalizedSplit normalize_split(const Eigen::MatrixXd& train, const Eigen::MatrixXd& other);

enum class ReductionKind { kPca, kIdentity };

/// Linear projection fitted on the training split only.
struct ReductionModel {
    ReductionKind kind = ReductionKind::kIdentity;
    int components = 0;
    Eigen::VectorXd mean;              // d
    Eigen::MatrixXd basis;             // d x components, orthonormal columns
    Eigen::VectorXd explained_variance;  // per component, descending
};

/// PCA by eigen-decomposition of the column-centered covariance. Requires
/// 1 <= components <= min(rows, cols). Eigenvector signs are fixed so fits
/// are reproducible.
ReductionModel fit_reduction(const Eigen::MatrixXd& train, int components);

/// Identity model for pass-through pipelines.
ReductionModel identity_reduction(int dimension);

Eigen::MatrixXd apply_reduction(const ReductionModel& model, const Eigen::MatrixXd& data);

}  // namespace adb::shell

#endif  // ADB_SHELL_PREPROCESS_HPP
