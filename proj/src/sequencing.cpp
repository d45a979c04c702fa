#include "adb/sequencing.hpp"

#include <algorithm>
#include <cstring>
#include <utility>

#include "adb/errors.hpp"
#include "adb/parallel.hpp"
#include "adb/rng.hpp"

namespace adb::sequencing {

std::string to_string(Mode mode) {
    return mode == Mode::kCumulative ? "cumulative" : "batchwise";
}

Mode mode_from_string(const std::string& name) {
    if (name == "cumulative") return Mode::kCumulative;
    if (name == "batchwise") return Mode::kBatchwise;
    throw InputError("unknown mode '" + name + "' (expected cumulative or batchwise)");
}

BatchSchedule::BatchSchedule(int n, int b) {
    if (n < 1) throw InputError("BatchSchedule: need at least one sample");
    if (b < 1) throw InputError("BatchSchedule: batch size must be >= 1");
    batch_size = b;
    step_count = (n + b - 1) / b;
}

std::pair<int, int> BatchSchedule::batch_range(int t, int n) const {
    if (t < 1 || t > step_count) throw InputError("BatchSchedule: step out of range");
    const int begin = (t - 1) * batch_size;
    const int end = std::min(t * batch_size, n);
    return {begin, end};
}

// ============================================================================
// Permutation generation
// ============================================================================

std::vector<Permutation> generate_permutations(int n, int m, std::uint64_t seed) {
    if (n < 1) throw InputError("generate_permutations: N must be >= 1");
    if (m < 1) throw InputError("generate_permutations: M must be >= 1");

    std::vector<Permutation> perms(m);
    for (int k = 0; k < m; ++k) {
        Permutation& perm = perms[k];
        perm.id = k;
        perm.order.resize(n);
        for (int i = 0; i < n; ++i) perm.order[i] = i;
        // Fisher-Yates on a stream derived from (seed, k) only.
        SplitMix64 rng(split_seed(seed, static_cast<std::uint64_t>(k) + 1));
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
            std::swap(perm.order[i], perm.order[j]);
        }
    }
    return perms;
}

// ============================================================================
// Trajectories
// ============================================================================

namespace {

void validate_permutation(const Permutation& perm, Eigen::Index n) {
    if (static_cast<Eigen::Index>(perm.order.size()) != n)
        throw InputError("permutation length does not match sample count");
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (int idx : perm.order) {
        if (idx < 0 || idx >= n || seen[static_cast<std::size_t>(idx)])
            throw InputError("permutation is not a bijection on {0..N-1}");
        seen[static_cast<std::size_t>(idx)] = true;
    }
}

void validate_latents(const Eigen::MatrixXd& latents) {
    if (latents.rows() < 1 || latents.cols() < 1)
        throw InputError("latents must be a nonempty N x d matrix");
    if (!latents.allFinite()) throw InputError("latents contain non-finite values");
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& latents, const std::vector<int>& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), latents.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = latents.row(idx[r]);
    return out;
}

// Deterministic seeded subsample of `size` elements; result sorted ascending.
std::vector<int> seeded_subsample(std::vector<int> pool, int size, std::uint64_t stream) {
    SplitMix64 rng(stream);
    // Partial Fisher-Yates: the first `size` slots receive the sample.
    for (int i = 0; i < size; ++i) {
        const int j = i + static_cast<int>(rng.next_below(pool.size() - static_cast<std::size_t>(i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(size));
    std::sort(pool.begin(), pool.end());
    return pool;
}

struct ScoringContext {
    const Eigen::MatrixXd& latents;
    BatchSchedule schedule;
    transport::SinkhornConfig cfg;
    std::optional<int> subsample_cap;
    std::uint64_t run_seed = 0;

    std::vector<int> global_indices;  // sorted support of the global measure
    transport::PointCloud global_cloud;
    double global_self_cost = 0.0;
};

ScoringContext make_context(const Eigen::MatrixXd& latents, int batch_size,
                            const transport::SinkhornConfig& cfg,
                            std::optional<int> subsample_cap, std::uint64_t run_seed) {
    validate_latents(latents);
    const int n = static_cast<int>(latents.rows());
    if (subsample_cap && *subsample_cap < batch_size)
        throw InputError("subsample_cap must be >= batch size");

    std::vector<int> global_idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) global_idx[static_cast<std::size_t>(i)] = i;
    if (subsample_cap && n > *subsample_cap)
        global_idx = seeded_subsample(std::move(global_idx), *subsample_cap,
                                      split_seed(run_seed, 0, 0, 1));

    transport::PointCloud global_cloud =
        transport::PointCloud::uniform(gather_rows(latents, global_idx));
    double self_cost = 0.0;
    try {
        self_cost = transport::sinkhorn_cost(global_cloud, global_cloud, cfg);
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(std::string("global measure: ") + e.what(), e.residual());
    }

    return ScoringContext{latents,
                          BatchSchedule(n, batch_size),
                          cfg,
                          subsample_cap,
                          run_seed,
                          std::move(global_idx),
                          std::move(global_cloud),
                          self_cost};
}

// One debiased step against the shared global measure. When the subset is the
// full global support, all three transport terms coincide with the cached
// global self-cost.
double debiased_step(const ScoringContext& ctx, const std::vector<int>& subset_idx) {
    if (subset_idx == ctx.global_indices) {
        const double w = ctx.global_self_cost;
        return 2.0 * w - w - w;
    }
    const transport::PointCloud subset =
        transport::PointCloud::uniform(gather_rows(ctx.latents, subset_idx));
    const double w_sg = transport::sinkhorn_cost(subset, ctx.global_cloud, ctx.cfg);
    const double w_ss = transport::sinkhorn_cost(subset, subset, ctx.cfg);
    return 2.0 * w_sg - w_ss - ctx.global_self_cost;
}

DeviationTrajectory trajectory_impl(const Permutation& perm, const ScoringContext& ctx,
                                    Mode mode) {
    const int n = static_cast<int>(ctx.latents.rows());
    validate_permutation(perm, n);

    DeviationTrajectory traj;
    traj.permutation_id = perm.id;
    traj.mode = mode;
    traj.values.reserve(static_cast<std::size_t>(ctx.schedule.step_count));

    for (int t = 1; t <= ctx.schedule.step_count; ++t) {
        try {
            std::vector<int> subset_idx;
            if (mode == Mode::kCumulative) {
                const int count = std::min(t * ctx.schedule.batch_size, n);
                subset_idx.assign(perm.order.begin(), perm.order.begin() + count);
                if (ctx.subsample_cap && count > *ctx.subsample_cap) {
                    subset_idx = seeded_subsample(
                        std::move(subset_idx), *ctx.subsample_cap,
                        split_seed(ctx.run_seed, static_cast<std::uint64_t>(perm.id) + 1,
                                   static_cast<std::uint64_t>(t), 2));
                }
            } else {
                const auto [begin, end] = ctx.schedule.batch_range(t, n);
                subset_idx.assign(perm.order.begin() + begin, perm.order.begin() + end);
            }
            // Subsets are sets; a canonical ascending order keeps values
            // independent of traversal order within the permutation prefix.
            std::sort(subset_idx.begin(), subset_idx.end());
            traj.values.push_back(debiased_step(ctx, subset_idx));
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("permutation " + std::to_string(perm.id) + ", step " +
                                       std::to_string(t) + ": " + e.what(),
                                   e.residual());
        } catch (const Error& e) {
            throw Error("permutation " + std::to_string(perm.id) + ", step " +
                        std::to_string(t) + ": " + e.what());
        }
    }
    return traj;
}

}  // namespace

DeviationTrajectory cumulative_trajectory(const Permutation& perm,
                                          const Eigen::MatrixXd& latents, int batch_size,
                                          const transport::SinkhornConfig& cfg) {
    const ScoringContext ctx = make_context(latents, batch_size, cfg, std::nullopt, 0);
    return trajectory_impl(perm, ctx, Mode::kCumulative);
}

DeviationTrajectory batchwise_trajectory(const Permutation& perm,
                                         const Eigen::MatrixXd& latents, int batch_size,
                                         const transport::SinkhornConfig& cfg) {
    const ScoringContext ctx = make_context(latents, batch_size, cfg, std::nullopt, 0);
    return trajectory_impl(perm, ctx, Mode::kBatchwise);
}

std::uint64_t cloud_digest(const transport::PointCloud& cloud) {
    std::uint64_t hash = 0xCBF29CE484222325ULL;  // FNV-1a
    auto mix = [&hash](double v) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        for (unsigned char b : bytes) {
            hash ^= b;
            hash *= 0x100000001B3ULL;
        }
    };
    for (Eigen::Index i = 0; i < cloud.size(); ++i)
        for (Eigen::Index j = 0; j < cloud.dim(); ++j) mix(cloud.points()(i, j));
    for (Eigen::Index i = 0; i < cloud.size(); ++i) mix(cloud.weights()[i]);
    return hash;
}

ScoringRun score_all(const Eigen::MatrixXd& latents, int batch_size, int m,
                     std::uint64_t seed, Mode mode, const transport::SinkhornConfig& cfg,
                     std::optional<int> subsample_cap, int workers) {
    if (m < 1) throw InputError("score_all: M must be >= 1");
    const ScoringContext ctx = make_context(latents, batch_size, cfg, subsample_cap, seed);

    ScoringRun run;
    run.seed = seed;
    run.mode = mode;
    run.batch_size = batch_size;
    run.permutation_count = m;
    run.global_cloud_digest = cloud_digest(ctx.global_cloud);
    run.trajectories.resize(static_cast<std::size_t>(m));

    const std::vector<Permutation> perms =
        generate_permutations(static_cast<int>(latents.rows()), m, seed);

    std::vector<std::string> failures(static_cast<std::size_t>(m));
    parallel_for(static_cast<std::size_t>(m), workers, [&](std::size_t i) {
        try {
            run.trajectories[i] = trajectory_impl(perms[i], ctx, mode);
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    });

    std::string combined;
    int failed = 0;
    for (std::size_t i = 0; i < failures.size(); ++i) {
        if (failures[i].empty()) continue;
        ++failed;
        if (!combined.empty()) combined += "; ";
        if (failed <= 3) combined += failures[i];
    }
    if (failed > 0) {
        throw Error("score_all: " + std::to_string(failed) + " of " + std::to_string(m) +
                    " permutations failed: " + combined);
    }
    return run;
}

}  // namespace adb::sequencing
