#include "adb/shell/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adb/errors.hpp"

namespace adb::shell {

Eigen::MatrixXd zscore(const Eigen::MatrixXd& data, std::vector<int>* constant_columns) {
    if (data.rows() < 1 || data.cols() < 1) throw InputError("zscore: empty matrix");
    Eigen::MatrixXd out(data.rows(), data.cols());
    const double n = static_cast<double>(data.rows());
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
        const double mean = data.col(j).mean();
        const double var = (data.col(j).array() - mean).square().sum() / n;
        const double sd = std::sqrt(var);
        if (sd <= 1e-13 * (1.0 + std::fabs(mean))) {
            out.col(j).setZero();
            if (constant_columns) constant_columns->push_back(static_cast<int>(j));
        } else {
            out.col(j) = (data.col(j).array() - mean) / sd;
        }
    }
    return out;
}

NormalizedSplit normalize_split(const Eigen::MatrixXd& train, const Eigen::MatrixXd& other) {
    if (train.cols() != other.cols())
        throw InputError("normalize_split: column count mismatch");
    NormalizedSplit result;
    result.train = zscore(train, &result.train_constant_columns);
    result.other = zscore(other, &result.other_constant_columns);
    return result;
}

ReductionModel fit_reduction(const Eigen::MatrixXd& train, int components) {
    const Eigen::Index n = train.rows();
    const Eigen::Index d = train.cols();
    if (components < 1 || components > std::min(n, d))
        throw InputError("fit_reduction: components must be in [1, min(rows, cols)]");

    ReductionModel model;
    model.kind = ReductionKind::kPca;
    model.components = components;
    model.mean = train.colwise().mean();

    const Eigen::MatrixXd centered = train.rowwise() - model.mean.transpose();
    const Eigen::MatrixXd covariance =
        centered.transpose() * centered / static_cast<double>(n - 1 > 0 ? n - 1 : 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance);
    if (solver.info() != Eigen::Success)
        throw Error("fit_reduction: eigendecomposition failed");

    // Eigenvalues come back ascending; take the top `components` in
    // descending order and fix each vector's sign for reproducibility.
    model.basis.resize(d, components);
    model.explained_variance.resize(components);
    for (int c = 0; c < components; ++c) {
        const Eigen::Index source = d - 1 - c;
        Eigen::VectorXd axis = solver.eigenvectors().col(source);
        Eigen::Index pivot = 0;
        axis.cwiseAbs().maxCoeff(&pivot);
        if (axis[pivot] < 0.0) axis = -axis;
        model.basis.col(c) = axis;
        model.explained_variance[c] = std::max(solver.eigenvalues()[source], 0.0);
    }
    return model;
}

ReductionModel identity_reduction(int dimension) {
    if (dimension < 1) throw InputError("identity_reduction: dimension must be >= 1");
    ReductionModel model;
    model.kind = ReductionKind::kIdentity;
    model.components = dimension;
    model.mean = Eigen::VectorXd::Zero(dimension);
    model.basis = Eigen::MatrixXd::Identity(dimension, dimension);
    model.explained_variance = Eigen::VectorXd::Zero(dimension);
    return model;
}

Eigen::MatrixXd apply_reduction(const ReductionModel& model, const Eigen::MatrixXd& data) {
    if (data.cols() != model.basis.rows())
        throw InputError("apply_reduction: dimension mismatch");
    if (model.kind == ReductionKind::kIdentity) return data;
    return (data.rowwise() - model.mean.transpose()) * model.basis;
}

}  // namespace adb::shell
