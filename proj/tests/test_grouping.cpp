#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "adb/errors.hpp"
#include "adb/grouping.hpp"
#include "adb/rng.hpp"

using adb::grouping::classify;
using adb::grouping::Group;
using adb::grouping::GroupAssignment;
using adb::grouping::outlier_counts;
using adb::grouping::OutlierProfile;
using adb::grouping::step_stats;
using adb::grouping::StepStats;
using adb::grouping::Thresholds;
using adb::grouping::thresholds_from_quantiles;
using adb::sequencing::DeviationTrajectory;
using adb::sequencing::Mode;
using adb::sequencing::ScoringRun;

namespace {

ScoringRun run_from_values(const std::vector<std::vector<double>>& values) {
    ScoringRun run;
    run.permutation_count = static_cast<int>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        DeviationTrajectory traj;
        traj.permutation_id = static_cast<int>(i);
        traj.mode = Mode::kBatchwise;
        traj.values = values[i];
        run.trajectories.push_back(std::move(traj));
    }
    return run;
}

std::vector<OutlierProfile> profiles_from_counts(const std::vector<int>& counts) {
    std::vector<OutlierProfile> out;
    for (std::size_t i = 0; i < counts.size(); ++i)
        out.push_back({static_cast<int>(i), counts[i]});
    return out;
}

}  // namespace

TEST_CASE("step stats examples") {
    auto identical = run_from_values({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}});
    auto stats = step_stats(identical);
    CHECK(stats.means == std::vector<double>{1.0, 2.0});
    CHECK(stats.stds == std::vector<double>{0.0, 0.0});

    auto pair = run_from_values({{0.0}, {2.0}});
    stats = step_stats(pair);
    CHECK(stats.means[0] == 1.0);
    CHECK(stats.stds[0] == 1.0);  // population sigma, divisor M

    CHECK_THROWS_AS(step_stats(run_from_values({{1.0}})), adb::InputError);
    CHECK_THROWS_AS(step_stats(run_from_values({{1.0}, {1.0, 2.0}})), adb::InputError);
}

TEST_CASE("step stats match two-pass recomputation") {
    adb::SplitMix64 rng(17);
    std::vector<std::vector<double>> values(100, std::vector<double>(12));
    for (auto& row : values)
        for (auto& v : row) v = rng.next_normal() * 3.0 + 1.0;
    auto stats = step_stats(run_from_values(values));

    for (int t = 0; t < 12; ++t) {
        double sum = 0.0;
        for (const auto& row : values) sum += row[t];
        const double mean = sum / 100.0;
        double ss = 0.0;
        for (const auto& row : values) ss += (row[t] - mean) * (row[t] - mean);
        const double sigma = std::sqrt(ss / 100.0);
        CHECK(stats.means[t] == doctest::Approx(mean).epsilon(1e-12));
        CHECK(stats.stds[t] == doctest::Approx(sigma).epsilon(1e-12));
    }
}

TEST_CASE("outlier counts") {
    auto identical = run_from_values({{3.0, 3.0}, {3.0, 3.0}, {3.0, 3.0}});
    auto counts = outlier_counts(identical, step_stats(identical));
    for (const auto& profile : counts) CHECK(profile.count == 0);

    // Hand arithmetic: values {0, 0, 10} -> mean 10/3, sigma ~4.714,
    // band ~[-6.09, 12.76] contains all three.
    auto hand = run_from_values({{0.0}, {0.0}, {10.0}});
    counts = outlier_counts(hand, step_stats(hand));
    CHECK(counts[0].count == 0);
    CHECK(counts[1].count == 0);
    CHECK(counts[2].count == 0);

    // A value exactly on mean + 2 sigma is inside the closed band.
    StepStats stats;
    stats.means = {1.0};
    stats.stds = {0.5};
    auto boundary = run_from_values({{2.0}, {0.0}, {2.5}});
    counts = outlier_counts(boundary, stats);
    CHECK(counts[0].count == 0);  // exactly mu + 2 sigma
    CHECK(counts[1].count == 0);  // exactly mu - 2 sigma
    CHECK(counts[2].count == 1);  // strictly outside

    // Zero sigma: strict comparison on a zero-width band.
    StepStats degenerate;
    degenerate.means = {4.0};
    degenerate.stds = {0.0};
    counts = outlier_counts(run_from_values({{4.0}, {4.0000001}}), degenerate);
    CHECK(counts[0].count == 0);
    CHECK(counts[1].count == 1);

    StepStats mismatched;
    mismatched.means = {0.0, 0.0};
    mismatched.stds = {1.0, 1.0};
    CHECK_THROWS_AS(outlier_counts(run_from_values({{1.0}}), mismatched), adb::InputError);
}

TEST_CASE("outlier counts are shift and scale invariant") {
    adb::SplitMix64 rng(29);
    std::vector<std::vector<double>> values(40, std::vector<double>(8));
    for (auto& row : values)
        for (auto& v : row) v = rng.next_normal();

    auto base_run = run_from_values(values);
    auto base = outlier_counts(base_run, step_stats(base_run));

    auto shifted_values = values;
    for (auto& row : shifted_values) row[3] += 17.5;
    auto shifted_run = run_from_values(shifted_values);
    auto shifted = outlier_counts(shifted_run, step_stats(shifted_run));

    auto scaled_values = values;
    for (auto& row : scaled_values)
        for (auto& v : row) v *= 42.0;
    auto scaled_run = run_from_values(scaled_values);
    auto scaled = outlier_counts(scaled_run, step_stats(scaled_run));

    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(shifted[i].count == base[i].count);
        CHECK(scaled[i].count == base[i].count);
    }
}

TEST_CASE("thresholds from quantiles") {
    auto zeros = thresholds_from_quantiles(profiles_from_counts({0, 0, 0, 0}), 0.35, 0.85);
    CHECK(zeros.tau_low == 0);
    CHECK(zeros.tau_high == 0);

    auto uniform = thresholds_from_quantiles(
        profiles_from_counts({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}), 0.35, 0.85);
    CHECK(uniform.tau_low == 3);
    CHECK(uniform.tau_high == 8);

    CHECK_THROWS_AS(thresholds_from_quantiles(profiles_from_counts({1}), 0.8, 0.2),
                    adb::InputError);
    CHECK_THROWS_AS(thresholds_from_quantiles(profiles_from_counts({1}), 0.0, 0.5),
                    adb::InputError);
    CHECK_THROWS_AS(thresholds_from_quantiles({}, 0.3, 0.8), adb::InputError);

    // tau_low <= tau_high even for adversarial count distributions.
    adb::SplitMix64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> counts(1 + static_cast<int>(rng.next_below(30)));
        for (auto& c : counts) c = static_cast<int>(rng.next_below(6));
        auto th = thresholds_from_quantiles(profiles_from_counts(counts), 0.35, 0.85);
        CHECK(th.tau_low <= th.tau_high);
    }
}

TEST_CASE("classify examples") {
    Thresholds th{3, 6, 0.35, 0.85};
    auto groups = classify(profiles_from_counts({0, 1, 5, 9}), th);
    CHECK(groups[0].group == Group::kLow);
    CHECK(groups[1].group == Group::kLow);
    CHECK(groups[2].group == Group::kMedium);
    CHECK(groups[3].group == Group::kHigh);

    // Boundary inclusivity.
    groups = classify(profiles_from_counts({3, 6, 7}), th);
    CHECK(groups[0].group == Group::kLow);
    CHECK(groups[1].group == Group::kMedium);
    CHECK(groups[2].group == Group::kHigh);
}

TEST_CASE("classification partitions all permutations") {
    adb::SplitMix64 rng(93);
    for (int trial = 0; trial < 30; ++trial) {
        const int m = 5 + static_cast<int>(rng.next_below(200));
        std::vector<int> counts(m);
        for (auto& c : counts) c = static_cast<int>(rng.next_below(15));
        auto profiles = profiles_from_counts(counts);
        auto th = thresholds_from_quantiles(profiles, 0.35, 0.85);
        auto groups = classify(profiles, th);
        REQUIRE(groups.size() == static_cast<std::size_t>(m));

        int low = 0, med = 0, high = 0;
        for (const auto& g : groups) {
            if (g.group == Group::kLow) ++low;
            if (g.group == Group::kMedium) ++med;
            if (g.group == Group::kHigh) ++high;
        }
        CHECK(low + med + high == m);
    }
}

TEST_CASE("raising q_high shrinks the High group") {
    adb::SplitMix64 rng(111);
    std::vector<int> counts(150);
    for (auto& c : counts) c = static_cast<int>(rng.next_below(12));
    auto profiles = profiles_from_counts(counts);

    int prev_high = static_cast<int>(counts.size());
    for (double q_high : {0.5, 0.65, 0.8, 0.9, 0.97}) {
        auto th = thresholds_from_quantiles(profiles, 0.3, q_high);
        auto groups = classify(profiles, th);
        int high = 0;
        for (const auto& g : groups)
            if (g.group == Group::kHigh) ++high;
        CHECK(high <= prev_high);
        prev_high = high;
    }
}

TEST_CASE("published batchwise threshold fixture") {
    // Batchwise reference thresholds tau = (3, 6) with group masses
    // 0.35 / 0.34 / 0.31. A count population constructed with those masses
    // must classify back to them exactly.
    std::vector<int> counts;
    for (int i = 0; i < 35; ++i) counts.push_back(i % 4);           // <= 3
    for (int i = 0; i < 34; ++i) counts.push_back(4 + (i % 3));     // 4..6
    for (int i = 0; i < 31; ++i) counts.push_back(7 + (i % 4));     // > 6
    auto profiles = profiles_from_counts(counts);

    Thresholds th{3, 6, 0.35, 0.85};
    auto groups = classify(profiles, th);
    int low = 0, med = 0, high = 0;
    for (const auto& g : groups) {
        if (g.group == Group::kLow) ++low;
        if (g.group == Group::kMedium) ++med;
        if (g.group == Group::kHigh) ++high;
    }
    CHECK(low == 35);
    CHECK(med == 34);
    CHECK(high == 31);

    // The quantile mapping recovers the same taus from this population.
    auto recovered = thresholds_from_quantiles(profiles, 0.35, 0.69);
    CHECK(recovered.tau_low == 3);
    CHECK(recovered.tau_high == 6);
}
