/**
 * @file sequencing.hpp
 * @brief Training-order permutations and their per-step distributional
 *        deviation trajectories against the global training distribution.
 *
 * A permutation of the N training samples is scored step by step: at step t
 * the debiased transport distance is computed either between the cumulative
 * prefix of the sequence and the global distribution (cumulative mode) or
 * between batch t alone and the global distribution (batchwise mode).
 */

#ifndef ADB_SEQUENCING_HPP
#define ADB_SEQUENCING_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adb/transport.hpp"

namespace adb::sequencing {

enum class Mode { kCumulative, kBatchwise };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& name);

/// A training order: a bijection on {0, ..., N-1}.
struct Permutation {
    std::vector<int> order;
    int id = 0;
};

/// Partition of a sequence of length N into batches of size B; the last
/// batch may be short.
struct BatchSchedule {
    int batch_size = 0;
    int step_count = 0;

    BatchSchedule(int n, int b);

    /// Half-open range [begin, end) of sequence positions in batch t (1-based).
    std::pair<int, int> batch_range(int t, int n) const;
};

/// Per-step deviation values D_t for one permutation.
struct DeviationTrajectory {
    int permutation_id = 0;
    Mode mode = Mode::kCumulative;
    std::vector<double> values;
};

/// Scored population of permutations against one global distribution.
struct ScoringRun {
    std::uint64_t seed = 0;
    Mode mode = Mode::kCumulative;
    int batch_size = 0;
    int permutation_count = 0;
    std::uint64_t global_cloud_digest = 0;
    std::vector<DeviationTrajectory> trajectories;
};

/// M independent uniform permutations of {0..N-1}. Permutation m depends only
/// on (seed, m), so prefixes of the list are stable as M grows.
std::vector<Permutation> generate_permutations(int n, int m, std::uint64_t seed);

/// Deviation of the growing sequence prefix from the global distribution.
DeviationTrajectory cumulative_trajectory(const Permutation& perm,
                                          const Eigen::MatrixXd& latents, int batch_size,
                                          const transport::SinkhornConfig& cfg = {});

/// Deviation of each batch in isolation from the global distribution.
DeviationTrajectory batchwise_trajectory(const Permutation& perm,
                                         const Eigen::MatrixXd& latents, int batch_size,
                                         const transport::SinkhornConfig& cfg = {});

/**
 * @brief Score M seeded permutations of the given latents.
 *
 * When subsample_cap is set, the global measure and any cumulative subset
 * larger than the cap are represented by a deterministic seeded subsample of
 * that size. Trajectories are computed in parallel (workers = 0 means machine
 * parallelism) and aggregated in permutation order; output is bit-identical
 * for any worker count. If any permutation fails, the whole run fails with an
 * aggregated error.
 */
ScoringRun score_all(const Eigen::MatrixXd& latents, int batch_size, int m,
                     std::uint64_t seed, Mode mode,
                     const transport::SinkhornConfig& cfg = {},
                     std::optional<int> subsample_cap = std::nullopt,
                     int workers = 0);

/// FNV-1a digest of a cloud's support points and weights; identifies the
/// global measure an analysis was computed against.
std::uint64_t cloud_digest(const transport::PointCloud& cloud);

}  // namespace adb::sequencing

#endif  // ADB_SEQUENCING_HPP
