/**
 * @file reports.hpp
 * @brief JSON/CSV/SVG emission and re-loading for pipeline artifacts.
 *
 * JSON schemas:
 *   trajectories: {seed, mode, B, M, digest, values[M][T]}
 *   groups:       {thresholds{tau_low, tau_high, q_low, q_high},
 *                  counts[M], labels[M], group_masses{low, medium, high}}
 *   report:       flattened EvalReport fields
 */

#ifndef ADB_SHELL_REPORTS_HPP
#define ADB_SHELL_REPORTS_HPP

#include <string>
#include <vector>

#include "adb/grouping.hpp"
#include "adb/harness.hpp"
#include "adb/sequencing.hpp"

namespace adb::shell {

// --- ScoringRun (trajectories) ---------------------------------------------

std::string scoring_run_to_json(const sequencing::ScoringRun& run);
sequencing::ScoringRun scoring_run_from_json(const std::string& text);

/// Long-format CSV: permutation_id, step, value.
std::string trajectories_to_csv(const sequencing::ScoringRun& run);

// --- Grouping output ---------------------------------------------------------

struct GroupingResult {
    grouping::Thresholds thresholds;
    std::vector<grouping::OutlierProfile> counts;
    std::vector<grouping::GroupAssignment> labels;
};

std::string grouping_to_json(const GroupingResult& result);
GroupingResult grouping_from_json(const std::string& text);

// --- Experiment report -------------------------------------------------------

std::string report_to_json(const harness::EvalReport& report);

/// Re-load the per-model rows of a report JSON (for plotting and round-trip
/// checks).
std::vector<harness::ModelRow> report_models_from_json(const std::string& text);

/// One row per model: id, group, id_mae, id_rmse, ood_mae, ood_rmse.
std::string report_models_to_csv(const harness::EvalReport& report);

/// Scatter data: id_mae, ood_mae, group.
std::string report_scatter_to_csv(const harness::EvalReport& report);

// --- SVG ---------------------------------------------------------------------

/// Deviation trajectories as polylines (one per permutation).
std::string trajectories_to_svg(const sequencing::ScoringRun& run);

/// ID-vs-OOD MAE scatter colored by deviation group.
std::string scatter_to_svg(const harness::EvalReport& report);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace adb::shell

#endif  // ADB_SHELL_REPORTS_HPP
