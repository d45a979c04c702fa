/**
 * @file harness.hpp
 * @brief Desk-scale end-to-end experiment: calibrated synthetic shifted
 *        datasets, mini-batch training under permutation schedules, a
 *        cross-validation baseline, deviation-group model selection, and
 *        evaluation with significance reporting.
 */

#ifndef ADB_HARNESS_HPP
#define ADB_HARNESS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adb/grouping.hpp"
#include "adb/sequencing.hpp"

namespace adb::harness {

// ============================================================================
// Synthetic data
// ============================================================================

/// Generator parameters for one shifted regression dataset. label_shift is
/// the target W1 gap between train and OOD labels; skew controls the
/// heavy-tailedness of the signal coordinate (0 = symmetric); curvature bends
/// the label map upward on the right so that the shifted region requires
/// extrapolation beyond the training bulk.
struct SyntheticSpec {
    int n_train = 2000;
    int n_val = 400;
    int n_ood = 2000;
    int dimension = 8;
    double label_shift = 0.77;   // target W1 magnitude; unsigned
    int shift_direction = -1;    // -1: OOD shifted below training, +1: above
    double noise_sd = 0.02;
    double skew = 1.2;
    double curvature = 4.0;
    std::uint64_t seed = 1;
};

/// Features with regression labels.
struct LabeledData {
    Eigen::MatrixXd features;
    Eigen::VectorXd labels;

    Eigen::Index size() const { return features.rows(); }
};

struct ShiftedDataset {
    LabeledData train;
    LabeledData val;
    LabeledData ood;
    double measured_ood_w1 = 0.0;  // train vs ood labels
    double measured_id_w1 = 0.0;   // train vs val labels
    double calibrated_shift = 0.0;
};

/// Draw (train, val, ood) with the label-space W1 gap calibrated to
/// spec.label_shift within +-10% (or to <= 0.05 for a zero target). Train and
/// val come from one pool via label-stratified assignment; OOD features are
/// mean-shifted along the signal direction. Throws CalibrationError when the
/// search cannot land in the band.
ShiftedDataset make_synthetic_shifted_dataset(const SyntheticSpec& spec);

/// Exact 1-d W1 between two samples: sorted-sample coupling for equal sizes,
/// quantile-function integral otherwise.
double w1_labels(const std::vector<double>& a, const std::vector<double>& b);

// ============================================================================
// Models and training
// ============================================================================

enum class ModelKind { kLinear, kMlp };

struct ModelSpec {
    ModelKind kind = ModelKind::kLinear;
    std::vector<int> hidden_widths;  // mlp only; rectifier activations
};

/// Adam training protocol. batch_size must match the scoring batch size so
/// schedules line up with deviation trajectories; 0 resolves to ~1% of the
/// training set.
struct TrainConfig {
    double learning_rate = 0.001;
    int epochs = 20;
    int batch_size = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 1;
};

/// A trained predictor: linear map or small rectifier MLP.
class Model {
public:
    Model(const ModelSpec& spec, int input_dim, std::uint64_t init_seed);

    Eigen::VectorXd predict(const Eigen::MatrixXd& features) const;

    const ModelSpec& spec() const { return spec_; }

    // Flat parameter access for the optimizer.
    std::vector<Eigen::MatrixXd>& weights() { return weights_; }
    std::vector<Eigen::VectorXd>& biases() { return biases_; }
    const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
    const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

private:
    ModelSpec spec_;
    std::vector<Eigen::MatrixXd> weights_;  // layer l: in x out
    std::vector<Eigen::VectorXd> biases_;
};

struct Metrics {
    double mae = 0.0;
    double rmse = 0.0;
};

Metrics evaluate(const Model& model, const LabeledData& data);

struct TrainOutcome {
    Model model;
    Metrics id_metrics;   // validation split
    Metrics ood_metrics;  // shifted split
};

/**
 * @brief Train under an explicit schedule: epoch e iterates mini-batches in
 *        the order given by schedule[e]. MSE loss, Adam updates.
 *
 * Requires schedule.size() >= cfg.epochs; throws TrainingDivergedError with
 * the epoch and step on a non-finite loss. Deterministic in (spec, cfg,
 * schedule).
 */
TrainOutcome train_with_schedule(const ModelSpec& spec, const LabeledData& train,
                                 const LabeledData& val, const LabeledData& ood,
                                 const TrainConfig& cfg,
                                 const std::vector<sequencing::Permutation>& schedule);

// ============================================================================
// Baseline, selection, significance
// ============================================================================

struct CvBaseline {
    int selected_fold = 0;
    Metrics selected_ood;          // OOD metrics of the min-validation-MAE fold model
    double selected_val_mae = 0.0;
    std::vector<double> fold_ood_mae;
    std::vector<double> fold_ood_rmse;
    double fold_ood_mae_mean = 0.0;
    double fold_ood_mae_sd = 0.0;
    double fold_ood_rmse_mean = 0.0;
    double fold_ood_rmse_sd = 0.0;
};

/// k-fold cross validation with per-epoch random shuffling (no deviation
/// classes); near-equal fold sizes; selects the fold model with minimum
/// held-out MAE and reports its OOD metrics plus across-fold spreads.
CvBaseline kfold_cv_baseline(const LabeledData& train, const LabeledData& ood,
                             const ModelSpec& spec, const TrainConfig& cfg,
                             int folds = 10);

/// One trained model's evaluation row.
struct ModelRow {
    int model_id = 0;
    grouping::Group group = grouping::Group::kLow;
    double id_mae = 0.0;
    double id_rmse = 0.0;
    double ood_mae = 0.0;
    double ood_rmse = 0.0;
    std::uint64_t init_seed = 0;
    std::uint64_t schedule_seed = 0;
};

/// Largest-remainder split of sample_size across two group sizes; remainder
/// ties go to the larger group. Allocations never exceed the group sizes.
std::pair<int, int> proportional_allocation(int size_first, int size_second,
                                            int sample_size);

/// Proportional largest-remainder sample of Medium/High rows, then the
/// sampled row with maximum ID MAE (ties to the lower model id). Throws
/// SelectionError when Medium and High are both empty.
int adb_select(const std::vector<ModelRow>& rows, int sample_size, std::uint64_t seed);

/// 100 * (strictly worse pool entries) / pool size.
double percentile_rank(double selected_ood_error, const std::vector<double>& pool);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
};

/// Two-sided paired t test. All-zero differences give (0, 1); nonzero
/// constant differences throw DegenerateVarianceError.
TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

struct CorrelationEntry {
    std::string scope;  // "Low", "Medium", "High", "pooled", "medium_high"
    int count = 0;
    bool valid = false;  // false: fewer than 3 rows or degenerate variance
    double pearson = 0.0;
    double spearman = 0.0;
};

/// Pearson and rank correlations of ID vs OOD MAE per group and pooled.
std::vector<CorrelationEntry> correlation_report(const std::vector<ModelRow>& rows);

// ============================================================================
// End-to-end experiment
// ============================================================================

struct ExperimentConfig {
    SyntheticSpec synthetic;
    ModelSpec model{ModelKind::kMlp, {128}};
    TrainConfig train;
    sequencing::Mode mode = sequencing::Mode::kBatchwise;
    int permutations = 40;         // M for the scoring stage
    int models_per_group = 30;
    int sample_size = 10;          // selection pool draw
    int cv_folds = 10;
    double q_low = 0.35;
    double q_high = 0.85;
    double epsilon = 0.05;
    int max_iterations = 30000;
    std::optional<int> subsample_cap = 250;
    bool sample_without_replacement = true;  // schedule draws from a group
    bool enforce_shift_gate = true;          // require ood W1 >= 0.6, id W1 <= 0.05
    int workers = 0;
};

struct GroupSummary {
    grouping::Group group = grouping::Group::kLow;
    int models = 0;
    double id_mae_mean = 0.0, id_mae_sd = 0.0;
    double ood_mae_mean = 0.0, ood_mae_sd = 0.0;
    double id_rmse_mean = 0.0, id_rmse_sd = 0.0;
    double ood_rmse_mean = 0.0, ood_rmse_sd = 0.0;
};

struct EvalReport {
    double measured_ood_w1 = 0.0;
    double measured_id_w1 = 0.0;
    bool shift_gate_passed = false;  // ood W1 >= 0.6 and id W1 <= 0.05

    std::vector<ModelRow> models;
    std::vector<GroupSummary> group_summaries;
    int group_count_low = 0, group_count_medium = 0, group_count_high = 0;
    grouping::Thresholds thresholds;

    CvBaseline cv;
    int selected_model_id = -1;
    double adb_ood_mae = 0.0;
    double adb_ood_rmse = 0.0;
    double adb_id_mae = 0.0;
    double improvement_mae_pct = 0.0;
    double improvement_rmse_pct = 0.0;
    double percentile_rank_mae = 0.0;
    double percentile_rank_rmse = 0.0;

    std::vector<CorrelationEntry> correlations;

    // Paired t-test of the ADB model's OOD error against the CV fold errors.
    bool fold_ttest_valid = false;
    TTestResult fold_ttest_mae;
    TTestResult fold_ttest_rmse;
};

/// Run the full pipeline for one seed: generate data, gate the shift, score
/// permutations, group them, train per-group models, select, and evaluate.
EvalReport run_experiment(const ExperimentConfig& config);

/// Sanity conditions every report must satisfy (MAE <= RMSE, PR range,
/// partition). Throws Error on violation; used by tests and the CLI.
void check_report_sanity(const EvalReport& report);

}  // namespace adb::harness

#endif  // ADB_HARNESS_HPP
