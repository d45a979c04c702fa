#include "adb/grouping.hpp"

#include <algorithm>
#include <cmath>

#include "adb/errors.hpp"

namespace adb::grouping {

std::string to_string(Group g) {
    switch (g) {
        case Group::kLow: return "Low";
        case Group::kMedium: return "Medium";
        case Group::kHigh: return "High";
    }
    return "Low";
}

Group group_from_string(const std::string& name) {
    if (name == "Low") return Group::kLow;
    if (name == "Medium") return Group::kMedium;
    if (name == "High") return Group::kHigh;
    throw InputError("unknown group '" + name + "'");
}

StepStats step_stats(const sequencing::ScoringRun& run) {
    const std::size_t m = run.trajectories.size();
    if (m < 2) throw InputError("step_stats: need at least 2 trajectories");
    const std::size_t steps = run.trajectories.front().values.size();
    for (const auto& traj : run.trajectories) {
        if (traj.values.size() != steps)
            throw InputError("step_stats: trajectories have inconsistent length");
    }

    StepStats stats;
    stats.means.assign(steps, 0.0);
    stats.stds.assign(steps, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
        double sum = 0.0;
        for (const auto& traj : run.trajectories) sum += traj.values[t];
        const double mean = sum / static_cast<double>(m);
        double ss = 0.0;
        for (const auto& traj : run.trajectories) {
            const double d = traj.values[t] - mean;
            ss += d * d;
        }
        stats.means[t] = mean;
        stats.stds[t] = std::sqrt(ss / static_cast<double>(m));
    }
    return stats;
}

std::vector<OutlierProfile> outlier_counts(const sequencing::ScoringRun& run,
                                           const StepStats& stats) {
    const std::size_t steps = stats.means.size();
    if (stats.stds.size() != steps)
        throw InputError("outlier_counts: stats means/stds length mismatch");

    std::vector<OutlierProfile> profiles;
    profiles.reserve(run.trajectories.size());
    for (const auto& traj : run.trajectories) {
        if (traj.values.size() != steps)
            throw InputError("outlier_counts: trajectory length does not match stats");
        int count = 0;
        for (std::size_t t = 0; t < steps; ++t) {
            const double lo = stats.means[t] - 2.0 * stats.stds[t];
            const double hi = stats.means[t] + 2.0 * stats.stds[t];
            // Strictly outside the closed band; for sigma = 0 this reduces to
            // "differs from the mean".
            if (traj.values[t] < lo || traj.values[t] > hi) ++count;
        }
        profiles.push_back({traj.permutation_id, count});
    }
    return profiles;
}

namespace {

// Smallest observed count whose empirical CDF reaches q.
int empirical_quantile(const std::vector<int>& sorted_counts, double q) {
    const std::size_t m = sorted_counts.size();
    const double target = q * static_cast<double>(m);
    std::size_t rank = static_cast<std::size_t>(std::ceil(target));
    if (rank < 1) rank = 1;
    if (rank > m) rank = m;
    return sorted_counts[rank - 1];
}

}  // namespace

Thresholds thresholds_from_quantiles(const std::vector<OutlierProfile>& counts,
                                     double q_low, double q_high) {
    if (counts.empty()) throw InputError("thresholds_from_quantiles: empty counts");
    if (!(q_low > 0.0 && q_low < 1.0) || !(q_high > 0.0 && q_high < 1.0) ||
        !(q_low < q_high))
        throw InputError("thresholds_from_quantiles: need 0 < q_low < q_high < 1");

    std::vector<int> sorted;
    sorted.reserve(counts.size());
    for (const auto& profile : counts) sorted.push_back(profile.count);
    std::sort(sorted.begin(), sorted.end());

    Thresholds th;
    th.q_low = q_low;
    th.q_high = q_high;
    th.tau_low = empirical_quantile(sorted, q_low);
    th.tau_high = std::max(empirical_quantile(sorted, q_high), th.tau_low);
    return th;
}

std::vector<GroupAssignment> classify(const std::vector<OutlierProfile>& counts,
                                      const Thresholds& thresholds) {
    std::vector<GroupAssignment> out;
    out.reserve(counts.size());
    for (const auto& profile : counts) {
        Group g = Group::kHigh;
        if (profile.count <= thresholds.tau_low) {
            g = Group::kLow;
        } else if (profile.count <= thresholds.tau_high) {
            g = Group::kMedium;
        }
        out.push_back({profile.permutation_id, g});
    }
    return out;
}

}  // namespace adb::grouping
