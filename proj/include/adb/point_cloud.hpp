/**
 * @file point_cloud.hpp
 * @brief Weighted empirical distribution over latent vectors.
 */

#ifndef ADB_POINT_CLOUD_HPP
#define ADB_POINT_CLOUD_HPP

#include <Eigen/Dense>

namespace adb::transport {

/**
 * @brief A weighted empirical distribution supported on a finite set of
 *        d-dimensional latent points.
 *
 * Invariants, checked at construction:
 *  - at least one point, dimension d >= 1;
 *  - all coordinates finite;
 *  - weights nonnegative and summing to 1 within 1e-12.
 */
class PointCloud {
public:
    /// Cloud with explicit weights. Throws InputError on invariant violation.
    PointCloud(Eigen::MatrixXd points, Eigen::VectorXd weights);

    /// Cloud with uniform 1/n weights over the given points.
    static PointCloud uniform(Eigen::MatrixXd points);

    const Eigen::MatrixXd& points() const { return points_; }
    const Eigen::VectorXd& weights() const { return weights_; }

    Eigen::Index size() const { return points_.rows(); }
    Eigen::Index dim() const { return points_.cols(); }

private:
    Eigen::MatrixXd points_;   // n x d, row per support point
    Eigen::VectorXd weights_;  // n, nonnegative, sums to 1
};

}  // namespace adb::transport

#endif  // ADB_POINT_CLOUD_HPP
