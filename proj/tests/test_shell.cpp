#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <Eigen/Dense>

#include "adb/errors.hpp"
#include "adb/grouping.hpp"
#include "adb/rng.hpp"
#include "adb/sequencing.hpp"
#include "adb/shell/config.hpp"
#include "adb/shell/dataset_io.hpp"
#include "adb/shell/preprocess.hpp"
#include "adb/shell/reports.hpp"

using namespace adb::shell;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("adb_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
    adb::SplitMix64 rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.next_normal();
    return m;
}

}  // namespace

TEST_CASE("csv round trip is bit exact") {
    TempDir dir;

    Dataset small;
    small.features.resize(2, 2);
    small.features << 1.25, -3.5, 0.1, 42.0;
    save_csv(dir.file("small.csv"), small);
    Dataset loaded = load_csv(dir.file("small.csv"));
    CHECK(loaded.features == small.features);
    CHECK_FALSE(loaded.labels.has_value());

    Dataset with_labels;
    with_labels.features = random_matrix(1000, 8, 3);
    with_labels.labels.emplace(random_matrix(1000, 1, 4).col(0));
    save_csv(dir.file("big.csv"), with_labels);
    Dataset big = load_csv(dir.file("big.csv"));
    CHECK(big.features == with_labels.features);
    REQUIRE(big.labels.has_value());
    CHECK(*big.labels == *with_labels.labels);
}

TEST_CASE("csv parse errors carry line numbers") {
    TempDir dir;
    {
        std::ofstream out(dir.file("ragged.csv"));
        out << "f0,f1\n1.0,2.0\n3.0\n";
    }
    try {
        load_csv(dir.file("ragged.csv"));
        FAIL("expected ParseError");
    } catch (const adb::ParseError& e) {
        CHECK(e.line() == 3);
    }

    {
        std::ofstream out(dir.file("alpha.csv"));
        out << "f0\n1.0\nbanana\n";
    }
    CHECK_THROWS_AS(load_csv(dir.file("alpha.csv")), adb::ParseError);
    CHECK_THROWS_AS(load_csv(dir.file("missing.csv")), adb::ParseError);

    {
        std::ofstream out(dir.file("empty.csv"));
    }
    CHECK_THROWS_AS(load_csv(dir.file("empty.csv")), adb::ParseError);
}

TEST_CASE("binary latent container") {
    TempDir dir;
    const Eigen::MatrixXd matrix = random_matrix(37, 5, 9);
    save_latent_binary(dir.file("latents.adbl"), matrix);
    CHECK(load_latent_binary(dir.file("latents.adbl")) == matrix);

    // load_dataset dispatches on the extension.
    CHECK(load_dataset(dir.file("latents.adbl")).features == matrix);

    // Corrupt the magic.
    {
        std::fstream f(dir.file("latents.adbl"),
                       std::ios::in | std::ios::out | std::ios::binary);
        f.put('X');
    }
    CHECK_THROWS_AS(load_latent_binary(dir.file("latents.adbl")), adb::ParseError);

    {
        std::ofstream out(dir.file("short.adbl"), std::ios::binary);
        out << "ADB";
    }
    CHECK_THROWS_AS(load_latent_binary(dir.file("short.adbl")), adb::ParseError);
}

TEST_CASE("normalize split") {
    Eigen::MatrixXd train = random_matrix(200, 4, 11);
    train.col(2).setConstant(7.0);  // constant column
    Eigen::MatrixXd other = random_matrix(100, 4, 12);

    auto result = normalize_split(train, other);
    REQUIRE(result.train_constant_columns == std::vector<int>{2});
    CHECK(result.train.col(2).cwiseAbs().maxCoeff() == 0.0);

    for (int j : {0, 1, 3}) {
        CHECK(result.train.col(j).mean() == doctest::Approx(0.0).epsilon(1e-12));
        const double var = result.train.col(j).squaredNorm() / 200.0;
        CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
    }

    // Already standardized data is unchanged within 1e-12.
    Eigen::MatrixXd standardized = zscore(random_matrix(500, 3, 13));
    Eigen::MatrixXd again = zscore(standardized);
    CHECK((again - standardized).cwiseAbs().maxCoeff() <= 1e-12);

    CHECK_THROWS_AS(normalize_split(train, random_matrix(10, 3, 1)), adb::InputError);
}

TEST_CASE("pca reduction") {
    // Full-rank data with components = d reconstructs exactly.
    Eigen::MatrixXd data = random_matrix(60, 5, 21);
    auto full = fit_reduction(data, 5);
    Eigen::MatrixXd projected = apply_reduction(full, data);
    Eigen::MatrixXd reconstructed =
        (projected * full.basis.transpose()).rowwise() + full.mean.transpose();
    CHECK((reconstructed - data).cwiseAbs().maxCoeff() <= 1e-8);

    // Basis is orthonormal.
    Eigen::MatrixXd gram = full.basis.transpose() * full.basis;
    CHECK((gram - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-8);

    // Rank-1 data: one component captures everything.
    Eigen::VectorXd direction = random_matrix(4, 1, 22).col(0).normalized();
    Eigen::MatrixXd rank1 = random_matrix(80, 1, 23) * direction.transpose();
    auto one = fit_reduction(rank1, 1);
    const double total_var =
        (rank1.rowwise() - rank1.colwise().mean()).squaredNorm() / 79.0;
    CHECK(one.explained_variance[0] / total_var >= 0.9999);

    CHECK_THROWS_AS(fit_reduction(data, 6), adb::InputError);
    CHECK_THROWS_AS(fit_reduction(data, 0), adb::InputError);

    // Identity pass-through.
    auto identity = identity_reduction(5);
    CHECK(apply_reduction(identity, data) == data);
}

TEST_CASE("pca explained variance matches an SVD oracle") {
    Eigen::MatrixXd data = random_matrix(200, 10, 31);
    auto model = fit_reduction(data, 10);

    // Independent route: singular values of the centered matrix.
    Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
    for (int c = 0; c < 10; ++c) {
        const double sigma = svd.singularValues()[c];
        const double expected = sigma * sigma / 199.0;
        CHECK(model.explained_variance[c] == doctest::Approx(expected).epsilon(1e-8));
    }

    // Projection distances are reproducible bit-exactly across refits.
    auto refit = fit_reduction(data, 10);
    CHECK(apply_reduction(model, data) == apply_reduction(refit, data));
}

TEST_CASE("reduction never expands L1 distances beyond the basis bound") {
    // An orthonormal projection is L2-nonexpansive, so L1 distances grow by
    // at most sqrt(components).
    Eigen::MatrixXd data = random_matrix(150, 9, 41);
    for (int components : {2, 5, 9}) {
        auto model = fit_reduction(data, components);
        Eigen::MatrixXd projected = apply_reduction(model, data);
        const double bound = std::sqrt(static_cast<double>(components));
        adb::SplitMix64 rng(43);
        for (int trial = 0; trial < 200; ++trial) {
            const int i = static_cast<int>(rng.next_below(150));
            const int j = static_cast<int>(rng.next_below(150));
            const double original = (data.row(i) - data.row(j)).cwiseAbs().sum();
            const double reduced = (projected.row(i) - projected.row(j)).cwiseAbs().sum();
            CHECK(reduced <= bound * original + 1e-12);
        }
    }
}

TEST_CASE("config parsing") {
    const std::string text = R"(
# pipeline settings
mode = cumulative
batch_size = 25
permutations = 64
seed = 7
epsilon = 0.01
subsample_cap = 100

[experiment]
n_train = 500
model = mlp
hidden = 32,16
epochs = 12
)";
    RunConfig config = parse_config(text);
    CHECK(config.mode == adb::sequencing::Mode::kCumulative);
    CHECK(config.batch_size == 25);
    CHECK(config.permutations == 64);
    CHECK(config.seed == 7);
    CHECK(config.epsilon == 0.01);
    CHECK(config.subsample_cap == 100);
    CHECK(config.experiment.synthetic.n_train == 500);
    CHECK(config.experiment.model.kind == adb::harness::ModelKind::kMlp);
    CHECK(config.experiment.model.hidden_widths == std::vector<int>{32, 16});
    CHECK(config.experiment.train.epochs == 12);
    // Pipeline settings propagate into the experiment stage.
    CHECK(config.experiment.mode == adb::sequencing::Mode::kCumulative);
    CHECK(config.experiment.epsilon == 0.01);
    CHECK(config.experiment.subsample_cap == 100);
    CHECK(config.experiment.train.batch_size == 25);

    // Defaults: an empty config is valid.
    RunConfig defaults = parse_config("");
    CHECK(defaults.permutations == 500);
    CHECK(defaults.epsilon == 0.05);
    CHECK(defaults.q_low == 0.35);
    CHECK(defaults.q_high == 0.85);

    // Unknown keys and malformed lines are rejected with line numbers.
    try {
        parse_config("mode = batchwise\nbogus_key = 1\n");
        FAIL("expected ParseError");
    } catch (const adb::ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_config("this is not a key value line\n"), adb::ParseError);
    CHECK_THROWS_AS(parse_config("epsilon = -1\n"), adb::InputError);
    CHECK_THROWS_AS(parse_config("[weird]\n"), adb::ParseError);

    // Round trip through the serializer.
    RunConfig reparsed = parse_config(config_to_string(config));
    CHECK(reparsed.mode == config.mode);
    CHECK(reparsed.batch_size == config.batch_size);
    CHECK(reparsed.experiment.model.hidden_widths == config.experiment.model.hidden_widths);
    CHECK(reparsed.experiment.train.epochs == config.experiment.train.epochs);
}

TEST_CASE("scoring run json round trip") {
    adb::sequencing::ScoringRun run;
    run.seed = 987654321098765ULL;
    run.mode = adb::sequencing::Mode::kBatchwise;
    run.batch_size = 10;
    run.permutation_count = 3;
    run.global_cloud_digest = 0xDEADBEEFCAFEF00DULL;
    adb::SplitMix64 rng(5);
    for (int m = 0; m < 3; ++m) {
        adb::sequencing::DeviationTrajectory traj;
        traj.permutation_id = m;
        traj.mode = run.mode;
        for (int t = 0; t < 7; ++t) traj.values.push_back(rng.next_normal());
        run.trajectories.push_back(std::move(traj));
    }

    const std::string json_text = scoring_run_to_json(run);
    const auto loaded = scoring_run_from_json(json_text);
    CHECK(loaded.seed == run.seed);
    CHECK(loaded.mode == run.mode);
    CHECK(loaded.batch_size == run.batch_size);
    CHECK(loaded.global_cloud_digest == run.global_cloud_digest);
    REQUIRE(loaded.trajectories.size() == 3);
    for (int m = 0; m < 3; ++m)
        CHECK(loaded.trajectories[m].values == run.trajectories[m].values);

    // Emission is deterministic.
    CHECK(scoring_run_to_json(loaded) == json_text);

    CHECK_THROWS_AS(scoring_run_from_json("not json"), adb::ParseError);
    CHECK_THROWS_AS(scoring_run_from_json("{}"), adb::ParseError);

    // CSV has one row per (permutation, step).
    const std::string csv = trajectories_to_csv(run);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 * 7);

    // SVG emission is deterministic and structurally sane.
    const std::string svg = trajectories_to_svg(run);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(std::count(svg.begin(), svg.end(), '\n') >= 6);
    CHECK(trajectories_to_svg(run) == svg);
}

TEST_CASE("golden classify fixture is byte stable") {
    const std::string golden_dir = std::string(ADB_SOURCE_DIR) + "/tests/golden";
    const auto run = scoring_run_from_json(read_text_file(golden_dir + "/trajectories.json"));

    GroupingResult result;
    const auto stats = adb::grouping::step_stats(run);
    result.counts = adb::grouping::outlier_counts(run, stats);
    result.thresholds = adb::grouping::thresholds_from_quantiles(result.counts, 0.35, 0.85);
    result.labels = adb::grouping::classify(result.counts, result.thresholds);

    const std::string expected = read_text_file(golden_dir + "/groups.json");
    CHECK(grouping_to_json(result) == expected);
}

TEST_CASE("grouping json round trip") {
    GroupingResult result;
    result.thresholds = {2, 5, 0.35, 0.85};
    for (int i = 0; i < 6; ++i) result.counts.push_back({i, i});
    result.labels = adb::grouping::classify(result.counts, result.thresholds);

    const std::string text = grouping_to_json(result);
    const auto loaded = grouping_from_json(text);
    CHECK(loaded.thresholds.tau_low == 2);
    CHECK(loaded.thresholds.tau_high == 5);
    REQUIRE(loaded.counts.size() == 6);
    for (int i = 0; i < 6; ++i) {
        CHECK(loaded.counts[i].count == result.counts[i].count);
        CHECK(loaded.labels[i].group == result.labels[i].group);
    }
    CHECK(grouping_to_json(loaded) == text);

    // Group masses are recorded for both threshold interpretations.
    CHECK(text.find("group_masses") != std::string::npos);
}
