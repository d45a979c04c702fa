// adb: optimal-transport scoring and classification of training-sample
// permutations, with the mean-shift bias theory tools and the synthetic
// shift experiment harness.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "adb/errors.hpp"
#include "adb/grouping.hpp"
#include "adb/harness.hpp"
#include "adb/parallel.hpp"
#include "adb/sequencing.hpp"
#include "adb/shell/config.hpp"
#include "adb/shell/dataset_io.hpp"
#include "adb/shell/preprocess.hpp"
#include "adb/shell/reports.hpp"
#include "adb/theory.hpp"
#include "adb/transport.hpp"

namespace {

namespace fs = std::filesystem;

int env_workers() {
    const char* value = std::getenv("ADB_THREADS");
    if (!value) return 0;
    const int workers = std::atoi(value);
    return workers > 0 ? workers : 0;
}

adb::transport::SinkhornConfig sinkhorn_config(double epsilon, int max_iterations) {
    adb::transport::SinkhornConfig cfg;
    cfg.epsilon = epsilon;
    cfg.max_iterations = max_iterations;
    return cfg;
}

Eigen::MatrixXd load_latents(const std::string& data_path, int components) {
    adb::shell::Dataset dataset = adb::shell::load_dataset(data_path);
    Eigen::MatrixXd features = adb::shell::zscore(dataset.features);
    if (components > 0 && components < features.cols()) {
        const auto reduction = adb::shell::fit_reduction(features, components);
        features = adb::shell::apply_reduction(reduction, features);
    }
    return features;
}

int resolve_batch(int batch_size, Eigen::Index n) {
    if (batch_size > 0) return batch_size;
    return std::max(1, static_cast<int>(n / 100));  // ~1% of the dataset
}

struct ScoreArgs {
    std::string data;
    std::string mode = "batchwise";
    int batch_size = 0;
    int perms = 500;
    std::uint64_t seed = 42;
    double epsilon = 0.05;
    int max_iterations = 30000;
    int subsample_cap = 0;
    int components = 0;
    std::string output = "trajectories.json";
};

int run_score(const ScoreArgs& args) {
    const Eigen::MatrixXd latents = load_latents(args.data, args.components);
    const int batch = resolve_batch(args.batch_size, latents.rows());
    std::optional<int> cap;
    if (args.subsample_cap > 0) cap = args.subsample_cap;

    const auto run = adb::sequencing::score_all(
        latents, batch, args.perms, args.seed,
        adb::sequencing::mode_from_string(args.mode),
        sinkhorn_config(args.epsilon, args.max_iterations), cap, env_workers());
    adb::shell::write_text_file(args.output, adb::shell::scoring_run_to_json(run));
    std::cout << "wrote " << args.output << " (" << run.permutation_count
              << " trajectories, B=" << batch << ")\n";
    return 0;
}

struct ClassifyArgs {
    std::string trajectories;
    double q_low = 0.35;
    double q_high = 0.85;
    std::string output = "groups.json";
};

int run_classify(const ClassifyArgs& args) {
    const auto run =
        adb::shell::scoring_run_from_json(adb::shell::read_text_file(args.trajectories));
    adb::shell::GroupingResult result;
    const auto stats = adb::grouping::step_stats(run);
    result.counts = adb::grouping::outlier_counts(run, stats);
    result.thresholds =
        adb::grouping::thresholds_from_quantiles(result.counts, args.q_low, args.q_high);
    result.labels = adb::grouping::classify(result.counts, result.thresholds);
    adb::shell::write_text_file(args.output, adb::shell::grouping_to_json(result));
    std::cout << "wrote " << args.output << " (tau_low=" << result.thresholds.tau_low
              << ", tau_high=" << result.thresholds.tau_high << ")\n";
    return 0;
}

struct TheoryArgs {
    double k = 0.5;
    double delta = 1.0;
    int mc_samples = 1000000;
    std::uint64_t seed = 42;
    std::string sweep_csv;
};

int run_theory(const TheoryArgs& args) {
    const double rho = adb::theory::rho_TU(args.k, args.delta);
    const double mc = adb::theory::mc_rho(args.k, args.delta, args.mc_samples, args.seed);
    const bool regime = adb::theory::negative_regime(args.k, args.delta);
    std::printf("k = %.6g, delta = %.6g\n", args.k, args.delta);
    std::printf("rho_TU (closed form)  = %+.6f\n", rho);
    std::printf("rho_TU (monte carlo)  = %+.6f  (n = %d)\n", mc, args.mc_samples);
    std::printf("cov_TU (closed form)  = %+.6f\n", adb::theory::cov_TU(args.k, args.delta));
    std::printf("negative regime (k < alpha*delta): %s\n", regime ? "true" : "false");

    std::ostringstream sweep;
    sweep << "k,delta,rho,negative_regime\n";
    for (int i = 1; i <= 120; ++i) {
        const double k = 0.025 * i;
        for (double delta : {0.5, 1.0, 2.0}) {
            sweep << k << "," << delta << "," << adb::theory::rho_TU(k, delta) << ","
                  << (adb::theory::negative_regime(k, delta) ? 1 : 0) << "\n";
        }
    }
    if (!args.sweep_csv.empty()) {
        adb::shell::write_text_file(args.sweep_csv, sweep.str());
        std::cout << "wrote " << args.sweep_csv << "\n";
    } else {
        std::cout << "\n" << sweep.str();
    }
    return 0;
}

struct ExperimentArgs {
    std::string config_path;
    int replications = 1;
    std::string output_dir;
};

int run_experiment_cmd(const ExperimentArgs& args) {
    adb::shell::RunConfig config;
    if (!args.config_path.empty()) config = adb::shell::load_config(args.config_path);
    if (!args.output_dir.empty()) config.output_dir = args.output_dir;
    config.experiment.workers = env_workers();

    fs::create_directories(config.output_dir);

    int negative_correlations = 0;
    int valid_correlations = 0;
    std::vector<double> adb_maes, cv_maes;
    for (int r = 0; r < args.replications; ++r) {
        adb::harness::ExperimentConfig experiment = config.experiment;
        experiment.synthetic.seed = config.experiment.synthetic.seed + static_cast<std::uint64_t>(r);
        const auto report = adb::harness::run_experiment(experiment);

        const std::string stem =
            config.output_dir + "/report_seed" + std::to_string(experiment.synthetic.seed);
        adb::shell::write_text_file(stem + ".json", adb::shell::report_to_json(report));
        adb::shell::write_text_file(stem + "_models.csv",
                                    adb::shell::report_models_to_csv(report));
        adb::shell::write_text_file(stem + "_scatter.csv",
                                    adb::shell::report_scatter_to_csv(report));

        for (const auto& corr : report.correlations) {
            if (corr.scope == "medium_high" && corr.valid) {
                ++valid_correlations;
                if (corr.pearson < 0.0) ++negative_correlations;
            }
        }
        adb_maes.push_back(report.adb_ood_mae);
        cv_maes.push_back(report.cv.selected_ood.mae);
        std::printf(
            "seed %llu: ood W1 %.3f, adb ood mae %.4f, cv ood mae %.4f, I %+0.2f%%, PR "
            "%.1f\n",
            static_cast<unsigned long long>(experiment.synthetic.seed),
            report.measured_ood_w1, report.adb_ood_mae, report.cv.selected_ood.mae,
            report.improvement_mae_pct, report.percentile_rank_mae);
    }

    if (args.replications > 1) {
        double adb_mean = 0, cv_mean = 0;
        for (double v : adb_maes) adb_mean += v / adb_maes.size();
        for (double v : cv_maes) cv_mean += v / cv_maes.size();
        std::printf("replications: %d, negative medium+high correlation in %d/%d\n",
                    args.replications, negative_correlations, valid_correlations);
        std::printf("mean adb ood mae %.4f vs mean cv ood mae %.4f\n", adb_mean, cv_mean);
        try {
            const auto ttest = adb::harness::paired_ttest(adb_maes, cv_maes);
            std::printf("paired t-test over seeds: t = %+.3f, p = %.3g\n", ttest.t, ttest.p);
        } catch (const adb::DegenerateVarianceError&) {
            std::printf("paired t-test over seeds: degenerate variance\n");
        }
    }
    return 0;
}

struct OracleArgs {
    std::string cloud_a;
    std::string cloud_b;
    double epsilon = 0.005;
    int max_iterations = 500000;
};

int run_oracle(const OracleArgs& args) {
    const auto data_a = adb::shell::load_dataset(args.cloud_a);
    const auto data_b = adb::shell::load_dataset(args.cloud_b);
    const auto cloud_a = adb::transport::PointCloud::uniform(data_a.features);
    const auto cloud_b = adb::transport::PointCloud::uniform(data_b.features);

    const double exact = adb::transport::exact_ot_oracle(cloud_a, cloud_b);
    const auto cfg = sinkhorn_config(args.epsilon, args.max_iterations);
    const auto result = adb::transport::sinkhorn(cloud_a, cloud_b, cfg);
    const double debiased = adb::transport::debiased_distance(cloud_a, cloud_b, cfg);
    std::printf("exact W1              = %.9f\n", exact);
    std::printf("sinkhorn cost (eps=%g) = %.9f  (%d iterations, violation %.2e)\n",
                args.epsilon, result.cost, result.iterations, result.marginal_violation);
    std::printf("debiased distance     = %.9f\n", debiased);
    std::printf("debiased/2 vs exact   = %+.3e\n", 0.5 * debiased - exact);
    return 0;
}

struct PlotArgs {
    std::string trajectories;
    std::string report;
    std::string output_dir = "plots";
};

int run_plot(const PlotArgs& args) {
    fs::create_directories(args.output_dir);
    if (args.trajectories.empty() && args.report.empty())
        throw adb::InputError("plot: provide --trajectories and/or --report");
    if (!args.trajectories.empty()) {
        const auto run = adb::shell::scoring_run_from_json(
            adb::shell::read_text_file(args.trajectories));
        adb::shell::write_text_file(args.output_dir + "/trajectories.csv",
                                    adb::shell::trajectories_to_csv(run));
        adb::shell::write_text_file(args.output_dir + "/trajectories.svg",
                                    adb::shell::trajectories_to_svg(run));
        std::cout << "wrote " << args.output_dir << "/trajectories.{csv,svg}\n";
    }
    if (!args.report.empty()) {
        adb::harness::EvalReport report;
        report.models =
            adb::shell::report_models_from_json(adb::shell::read_text_file(args.report));
        adb::shell::write_text_file(args.output_dir + "/scatter.csv",
                                    adb::shell::report_scatter_to_csv(report));
        adb::shell::write_text_file(args.output_dir + "/scatter.svg",
                                    adb::shell::scatter_to_svg(report));
        std::cout << "wrote " << args.output_dir << "/scatter.{csv,svg}\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Permutation scoring, deviation grouping, and shift experiments"};
    app.require_subcommand(1);

    ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "Score permutations against the data");
    score->add_option("--data", score_args.data, "CSV or .adbl latent file")->required();
    score->add_option("--mode", score_args.mode, "cumulative | batchwise");
    score->add_option("--batch-size", score_args.batch_size, "batch size (0 = ~1% of N)");
    score->add_option("--perms", score_args.perms, "number of permutations");
    score->add_option("--seed", score_args.seed, "random seed");
    score->add_option("--epsilon", score_args.epsilon, "entropic regularization");
    score->add_option("--max-iterations", score_args.max_iterations, "solver budget");
    score->add_option("--subsample-cap", score_args.subsample_cap,
                      "cap on cloud sizes (0 = off)");
    score->add_option("--components", score_args.components, "PCA components (0 = off)");
    score->add_option("--out", score_args.output, "output JSON path");

    ClassifyArgs classify_args;
    auto* classify = app.add_subcommand("classify", "Group scored permutations");
    classify->add_option("--trajectories", classify_args.trajectories, "trajectories JSON")
        ->required();
    classify->add_option("--q-low", classify_args.q_low, "low quantile");
    classify->add_option("--q-high", classify_args.q_high, "high quantile");
    classify->add_option("--out", classify_args.output, "output JSON path");

    TheoryArgs theory_args;
    auto* theory = app.add_subcommand("theory", "Mean-shift bias model tools");
    theory->add_option("--k", theory_args.k, "half-normal scale");
    theory->add_option("--delta", theory_args.delta, "mean shift");
    theory->add_option("--mc-samples", theory_args.mc_samples, "Monte Carlo sample count");
    theory->add_option("--seed", theory_args.seed, "random seed");
    theory->add_option("--sweep-csv", theory_args.sweep_csv, "write the sweep CSV here");

    ExperimentArgs experiment_args;
    auto* experiment = app.add_subcommand("experiment", "Run the shift experiment");
    experiment->add_option("--config", experiment_args.config_path, "config file");
    experiment->add_option("--replications", experiment_args.replications,
                           "seeded replications");
    experiment->add_option("--out-dir", experiment_args.output_dir, "output directory");

    OracleArgs oracle_args;
    auto* oracle = app.add_subcommand("oracle-ot", "Exact vs entropic transport check");
    oracle->add_option("--a", oracle_args.cloud_a, "first cloud (CSV/.adbl)")->required();
    oracle->add_option("--b", oracle_args.cloud_b, "second cloud (CSV/.adbl)")->required();
    oracle->add_option("--epsilon", oracle_args.epsilon, "entropic regularization");
    oracle->add_option("--max-iterations", oracle_args.max_iterations, "solver budget");

    PlotArgs plot_args;
    auto* plot = app.add_subcommand("plot", "Emit CSV/SVG plots from artifacts");
    plot->add_option("--trajectories", plot_args.trajectories, "trajectories JSON");
    plot->add_option("--report", plot_args.report, "experiment report JSON");
    plot->add_option("--out-dir", plot_args.output_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    }

    try {
        if (score->parsed()) return run_score(score_args);
        if (classify->parsed()) return run_classify(classify_args);
        if (theory->parsed()) return run_theory(theory_args);
        if (experiment->parsed()) return run_experiment_cmd(experiment_args);
        if (oracle->parsed()) return run_oracle(oracle_args);
        if (plot->parsed()) return run_plot(plot_args);
    } catch (const adb::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
