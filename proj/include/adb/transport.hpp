/**
 * @file transport.hpp
 * @brief Entropic-regularized and debiased optimal-transport distances
 *        between weighted point clouds, with an exact small-instance solver
 *        for verification.
 *
 * The ground cost is always the L1 distance between latent vectors. The
 * Sinkhorn solver reports the sharp transport cost <C, P*> (the entropy term
 * enters the optimization objective only). The debiased distance
 *
 *     2 W_eps(a, b) - W_eps(a, a) - W_eps(b, b)
 *
 * removes the entropic self-bias of W_eps.
 */

#ifndef ADB_TRANSPORT_HPP
#define ADB_TRANSPORT_HPP

#include <Eigen/Dense>

#include "adb/point_cloud.hpp"

namespace adb::transport {

/// Solver configuration. Defaults follow the reference protocol
/// (epsilon = 0.05) with log-domain updates for numerical stability.
struct SinkhornConfig {
    double epsilon = 0.05;
    int max_iterations = 1000;
    double feasibility_tolerance = 1e-6;
    bool log_domain = true;
};

/// Entropic-optimal coupling between two clouds.
struct TransportPlan {
    Eigen::MatrixXd matrix;  // n x m, nonnegative, marginals = cloud weights
    double regularization = 0.0;
};

struct SinkhornResult {
    TransportPlan plan;
    double cost = 0.0;  // sharp cost <C, P*>
    int iterations = 0;
    double marginal_violation = 0.0;  // L-infinity, at the final iterate
};

/// Pairwise L1 cost matrix between the supports of a and b.
/// Throws InputError on dimension mismatch.
Eigen::MatrixXd cost_matrix(const PointCloud& a, const PointCloud& b);

/**
 * @brief Solve the entropic OT problem between a and b.
 *
 * Stops when the L-infinity marginal violation of the implied plan drops to
 * cfg.feasibility_tolerance; throws ConvergenceError (carrying the residual)
 * if max_iterations is exhausted first. Single-point instances are solved in
 * closed form. The solve is canonicalized so that sinkhorn(a, b) and
 * sinkhorn(b, a) produce bit-identical costs and transposed plans.
 */
SinkhornResult sinkhorn(const PointCloud& a, const PointCloud& b,
                        const SinkhornConfig& cfg = {});

/// Sharp entropic cost only; identical value to sinkhorn(...).cost but skips
/// materializing the plan.
double sinkhorn_cost(const PointCloud& a, const PointCloud& b,
                     const SinkhornConfig& cfg = {});

/// Debiased distance 2 W(a,b) - W(a,a) - W(b,b), all terms under cfg.
double debiased_distance(const PointCloud& a, const PointCloud& b,
                         const SinkhornConfig& cfg = {});

/**
 * @brief Exact unregularized W1 for small instances (n*m <= 64).
 *
 * Solved as a minimum-cost flow on the bipartite transport graph by
 * successive shortest paths; exact for the continuous LP since every
 * augmentation saturates a source or sink arc. Throws SizeError when the
 * instance exceeds the limit.
 */
double exact_ot_oracle(const PointCloud& a, const PointCloud& b);

}  // namespace adb::transport

#endif  // ADB_TRANSPORT_HPP
