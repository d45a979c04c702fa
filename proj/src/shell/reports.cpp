#include "adb/shell/reports.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "adb/errors.hpp"

namespace adb::shell {

using nlohmann::json;

namespace {

json parse_json(const std::string& text) {
    json parsed = json::parse(text, nullptr, false);
    if (parsed.is_discarded()) throw ParseError("invalid JSON document", 0);
    return parsed;
}

std::string format_number(double v) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    return buffer;
}

}  // namespace

// ============================================================================
// ScoringRun
// ============================================================================

std::string scoring_run_to_json(const sequencing::ScoringRun& run) {
    json doc;
    doc["seed"] = run.seed;
    doc["mode"] = sequencing::to_string(run.mode);
    doc["B"] = run.batch_size;
    doc["M"] = run.permutation_count;
    doc["digest"] = run.global_cloud_digest;
    json values = json::array();
    for (const auto& traj : run.trajectories) values.push_back(traj.values);
    doc["values"] = std::move(values);
    return doc.dump(2) + "\n";
}

sequencing::ScoringRun scoring_run_from_json(const std::string& text) {
    const json doc = parse_json(text);
    try {
        sequencing::ScoringRun run;
        run.seed = doc.at("seed").get<std::uint64_t>();
        run.mode = sequencing::mode_from_string(doc.at("mode").get<std::string>());
        run.batch_size = doc.at("B").get<int>();
        run.permutation_count = doc.at("M").get<int>();
        run.global_cloud_digest = doc.at("digest").get<std::uint64_t>();
        for (const auto& row : doc.at("values")) {
            sequencing::DeviationTrajectory traj;
            traj.permutation_id = static_cast<int>(run.trajectories.size());
            traj.mode = run.mode;
            traj.values = row.get<std::vector<double>>();
            run.trajectories.push_back(std::move(traj));
        }
        if (static_cast<int>(run.trajectories.size()) != run.permutation_count)
            throw ParseError("trajectory count does not match M", 0);
        return run;
    } catch (const json::exception& e) {
        throw ParseError(std::string("trajectories JSON: ") + e.what(), 0);
    }
}

std::string trajectories_to_csv(const sequencing::ScoringRun& run) {
    std::ostringstream out;
    out << "permutation_id,step,value\n";
    for (const auto& traj : run.trajectories) {
        for (std::size_t t = 0; t < traj.values.size(); ++t) {
            out << traj.permutation_id << "," << (t + 1) << ","
                << format_number(traj.values[t]) << "\n";
        }
    }
    return out.str();
}

// ============================================================================
// Grouping
// ============================================================================

std::string grouping_to_json(const GroupingResult& result) {
    json doc;
    doc["thresholds"] = {{"tau_low", result.thresholds.tau_low},
                         {"tau_high", result.thresholds.tau_high},
                         {"q_low", result.thresholds.q_low},
                         {"q_high", result.thresholds.q_high}};
    json counts = json::array();
    for (const auto& profile : result.counts) counts.push_back(profile.count);
    doc["counts"] = std::move(counts);
    json labels = json::array();
    int mass[3] = {0, 0, 0};
    for (const auto& assignment : result.labels) {
        labels.push_back(grouping::to_string(assignment.group));
        ++mass[static_cast<int>(assignment.group)];
    }
    doc["labels"] = std::move(labels);
    const double total = result.labels.empty() ? 1.0 : static_cast<double>(result.labels.size());
    doc["group_masses"] = {{"low", mass[0] / total},
                           {"medium", mass[1] / total},
                           {"high", mass[2] / total}};
    return doc.dump(2) + "\n";
}

GroupingResult grouping_from_json(const std::string& text) {
    const json doc = parse_json(text);
    try {
        GroupingResult result;
        const json& thresholds = doc.at("thresholds");
        result.thresholds.tau_low = thresholds.at("tau_low").get<int>();
        result.thresholds.tau_high = thresholds.at("tau_high").get<int>();
        result.thresholds.q_low = thresholds.at("q_low").get<double>();
        result.thresholds.q_high = thresholds.at("q_high").get<double>();
        int id = 0;
        for (const auto& count : doc.at("counts"))
            result.counts.push_back({id++, count.get<int>()});
        id = 0;
        for (const auto& label : doc.at("labels"))
            result.labels.push_back(
                {id++, grouping::group_from_string(label.get<std::string>())});
        if (result.counts.size() != result.labels.size())
            throw ParseError("groups JSON: counts/labels size mismatch", 0);
        return result;
    } catch (const json::exception& e) {
        throw ParseError(std::string("groups JSON: ") + e.what(), 0);
    }
}

// ============================================================================
// EvalReport
// ============================================================================

namespace {

json correlations_to_json(const std::vector<harness::CorrelationEntry>& entries) {
    json out = json::array();
    for (const auto& entry : entries) {
        json item;
        item["scope"] = entry.scope;
        item["count"] = entry.count;
        item["valid"] = entry.valid;
        if (entry.valid) {
            item["pearson"] = entry.pearson;
            item["spearman"] = entry.spearman;
        }
        out.push_back(std::move(item));
    }
    return out;
}

}  // namespace

std::string report_to_json(const harness::EvalReport& report) {
    json doc;
    doc["measured_ood_w1"] = report.measured_ood_w1;
    doc["measured_id_w1"] = report.measured_id_w1;
    doc["shift_gate_passed"] = report.shift_gate_passed;

    json models = json::array();
    for (const auto& row : report.models) {
        models.push_back({{"id", row.model_id},
                          {"group", grouping::to_string(row.group)},
                          {"id_mae", row.id_mae},
                          {"id_rmse", row.id_rmse},
                          {"ood_mae", row.ood_mae},
                          {"ood_rmse", row.ood_rmse},
                          {"init_seed", row.init_seed},
                          {"schedule_seed", row.schedule_seed}});
    }
    doc["models"] = std::move(models);

    json groups = json::array();
    for (const auto& summary : report.group_summaries) {
        groups.push_back({{"group", grouping::to_string(summary.group)},
                          {"models", summary.models},
                          {"id_mae_mean", summary.id_mae_mean},
                          {"id_mae_sd", summary.id_mae_sd},
                          {"ood_mae_mean", summary.ood_mae_mean},
                          {"ood_mae_sd", summary.ood_mae_sd},
                          {"id_rmse_mean", summary.id_rmse_mean},
                          {"id_rmse_sd", summary.id_rmse_sd},
                          {"ood_rmse_mean", summary.ood_rmse_mean},
                          {"ood_rmse_sd", summary.ood_rmse_sd}});
    }
    doc["group_summaries"] = std::move(groups);
    doc["group_counts"] = {{"low", report.group_count_low},
                           {"medium", report.group_count_medium},
                           {"high", report.group_count_high}};
    doc["thresholds"] = {{"tau_low", report.thresholds.tau_low},
                         {"tau_high", report.thresholds.tau_high},
                         {"q_low", report.thresholds.q_low},
                         {"q_high", report.thresholds.q_high}};

    doc["cv"] = {{"selected_fold", report.cv.selected_fold},
                 {"selected_val_mae", report.cv.selected_val_mae},
                 {"ood_mae", report.cv.selected_ood.mae},
                 {"ood_rmse", report.cv.selected_ood.rmse},
                 {"fold_ood_mae", report.cv.fold_ood_mae},
                 {"fold_ood_rmse", report.cv.fold_ood_rmse},
                 {"fold_ood_mae_mean", report.cv.fold_ood_mae_mean},
                 {"fold_ood_mae_sd", report.cv.fold_ood_mae_sd},
                 {"fold_ood_rmse_mean", report.cv.fold_ood_rmse_mean},
                 {"fold_ood_rmse_sd", report.cv.fold_ood_rmse_sd}};

    doc["adb"] = {{"selected_model_id", report.selected_model_id},
                  {"ood_mae", report.adb_ood_mae},
                  {"ood_rmse", report.adb_ood_rmse},
                  {"id_mae", report.adb_id_mae},
                  {"percentile_rank_mae", report.percentile_rank_mae},
                  {"percentile_rank_rmse", report.percentile_rank_rmse}};

    doc["improvement_mae_pct"] = report.improvement_mae_pct;
    doc["improvement_rmse_pct"] = report.improvement_rmse_pct;
    doc["correlations"] = correlations_to_json(report.correlations);

    doc["fold_ttest_valid"] = report.fold_ttest_valid;
    if (report.fold_ttest_valid) {
        doc["fold_ttest"] = {{"mae_t", report.fold_ttest_mae.t},
                             {"mae_p", report.fold_ttest_mae.p},
                             {"rmse_t", report.fold_ttest_rmse.t},
                             {"rmse_p", report.fold_ttest_rmse.p}};
    }
    return doc.dump(2) + "\n";
}

std::vector<harness::ModelRow> report_models_from_json(const std::string& text) {
    const json doc = parse_json(text);
    try {
        std::vector<harness::ModelRow> rows;
        for (const auto& item : doc.at("models")) {
            harness::ModelRow row;
            row.model_id = item.at("id").get<int>();
            row.group = grouping::group_from_string(item.at("group").get<std::string>());
            row.id_mae = item.at("id_mae").get<double>();
            row.id_rmse = item.at("id_rmse").get<double>();
            row.ood_mae = item.at("ood_mae").get<double>();
            row.ood_rmse = item.at("ood_rmse").get<double>();
            row.init_seed = item.at("init_seed").get<std::uint64_t>();
            row.schedule_seed = item.at("schedule_seed").get<std::uint64_t>();
            rows.push_back(row);
        }
        return rows;
    } catch (const json::exception& e) {
        throw ParseError(std::string("report JSON: ") + e.what(), 0);
    }
}

std::string report_models_to_csv(const harness::EvalReport& report) {
    std::ostringstream out;
    out << "id,group,id_mae,id_rmse,ood_mae,ood_rmse\n";
    for (const auto& row : report.models) {
        out << row.model_id << "," << grouping::to_string(row.group) << ","
            << format_number(row.id_mae) << "," << format_number(row.id_rmse) << ","
            << format_number(row.ood_mae) << "," << format_number(row.ood_rmse) << "\n";
    }
    return out.str();
}

std::string report_scatter_to_csv(const harness::EvalReport& report) {
    std::ostringstream out;
    out << "id_mae,ood_mae,group\n";
    for (const auto& row : report.models) {
        out << format_number(row.id_mae) << "," << format_number(row.ood_mae) << ","
            << grouping::to_string(row.group) << "\n";
    }
    return out.str();
}

// ============================================================================
// SVG
// ============================================================================

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 480;
constexpr int kMargin = 48;

struct Range {
    double lo = 0.0;
    double hi = 1.0;

    void include(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double map(double v, double pixel_lo, double pixel_hi) const {
        const double span = hi - lo;
        const double unit = span > 0.0 ? (v - lo) / span : 0.5;
        return pixel_lo + unit * (pixel_hi - pixel_lo);
    }
};

std::string svg_header() {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
        << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight
        << "\">\n";
    out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" fill=\"white\"/>\n";
    // Axes.
    out << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\""
        << kWidth - kMargin << "\" y2=\"" << kHeight - kMargin
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin
        << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n";
    return out.str();
}

std::string format_pixel(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.2f", v);
    return buffer;
}

}  // namespace

std::string trajectories_to_svg(const sequencing::ScoringRun& run) {
    Range value_range;
    std::size_t steps = 0;
    for (const auto& traj : run.trajectories) {
        steps = std::max(steps, traj.values.size());
        for (double v : traj.values) value_range.include(v);
    }
    if (steps == 0) throw InputError("trajectories_to_svg: empty run");

    std::ostringstream out;
    out << svg_header();
    static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                     "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    int color = 0;
    for (const auto& traj : run.trajectories) {
        out << "<polyline fill=\"none\" stroke=\"" << kPalette[color % 8]
            << "\" stroke-width=\"1\" points=\"";
        for (std::size_t t = 0; t < traj.values.size(); ++t) {
            const double x = kMargin + (static_cast<double>(t) /
                                        std::max<std::size_t>(steps - 1, 1)) *
                                           (kWidth - 2 * kMargin);
            const double y = value_range.map(traj.values[t], kHeight - kMargin, kMargin);
            out << format_pixel(x) << "," << format_pixel(y) << " ";
        }
        out << "\"/>\n";
        ++color;
    }
    out << "</svg>\n";
    return out.str();
}

std::string scatter_to_svg(const harness::EvalReport& report) {
    if (report.models.empty()) throw InputError("scatter_to_svg: no models");
    Range x_range, y_range;
    x_range.lo = x_range.hi = report.models.front().id_mae;
    y_range.lo = y_range.hi = report.models.front().ood_mae;
    for (const auto& row : report.models) {
        x_range.include(row.id_mae);
        y_range.include(row.ood_mae);
    }

    std::ostringstream out;
    out << svg_header();
    for (const auto& row : report.models) {
        const char* fill = row.group == grouping::Group::kLow      ? "#1f77b4"
                           : row.group == grouping::Group::kMedium ? "#ff7f0e"
                                                                   : "#d62728";
        const double x = x_range.map(row.id_mae, kMargin, kWidth - kMargin);
        const double y = y_range.map(row.ood_mae, kHeight - kMargin, kMargin);
        out << "<circle cx=\"" << format_pixel(x) << "\" cy=\"" << format_pixel(y)
            << "\" r=\"4\" fill=\"" << fill << "\" fill-opacity=\"0.8\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace adb::shell
