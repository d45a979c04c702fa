/**
 * @file grouping.hpp
 * @brief Population statistics over deviation trajectories, outlier counting
 *        against the +-2 sigma band, and Low/Medium/High classification.
 */

#ifndef ADB_GROUPING_HPP
#define ADB_GROUPING_HPP

#include <string>
#include <vector>

#include "adb/sequencing.hpp"

namespace adb::grouping {

/// Per-step mean and population standard deviation across all permutations.
struct StepStats {
    std::vector<double> means;
    std::vector<double> stds;
};

/// Number of steps at which a permutation leaves the +-2 sigma band.
struct OutlierProfile {
    int permutation_id = 0;
    int count = 0;
};

/// Outlier-count cutoffs separating the three deviation groups, together
/// with the quantile levels that produced them.
struct Thresholds {
    int tau_low = 0;
    int tau_high = 0;
    double q_low = 0.0;
    double q_high = 0.0;
};

enum class Group { kLow, kMedium, kHigh };

std::string to_string(Group g);
Group group_from_string(const std::string& name);

struct GroupAssignment {
    int permutation_id = 0;
    Group group = Group::kLow;
};

/// Per-step mean and population sigma (divisor M). Requires M >= 2.
StepStats step_stats(const sequencing::ScoringRun& run);

/// Steps strictly outside the closed interval [mean - 2 sigma, mean + 2 sigma]
/// are counted; boundary values are inside. A zero-sigma step counts whenever
/// the value differs from the mean.
std::vector<OutlierProfile> outlier_counts(const sequencing::ScoringRun& run,
                                           const StepStats& stats);

/// tau_low / tau_high are the smallest integers whose empirical CDF over the
/// observed counts reaches q_low / q_high.
Thresholds thresholds_from_quantiles(const std::vector<OutlierProfile>& counts,
                                     double q_low, double q_high);

/// Low iff count <= tau_low; Medium iff tau_low < count <= tau_high;
/// High iff count > tau_high.
std::vector<GroupAssignment> classify(const std::vector<OutlierProfile>& counts,
                                      const Thresholds& thresholds);

}  // namespace adb::grouping

#endif  // ADB_GROUPING_HPP
