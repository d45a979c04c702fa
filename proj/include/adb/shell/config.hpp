/**
 * @file config.hpp
 * @brief Run configuration: line-based `key = value` files with `#` comments
 *        and an optional [experiment] section. Unknown keys are rejected.
 */

#ifndef ADB_SHELL_CONFIG_HPP
#define ADB_SHELL_CONFIG_HPP

#include <string>

#include "adb/harness.hpp"
#include "adb/sequencing.hpp"

namespace adb::shell {

/// Top-level pipeline configuration. Every field has a default; batch_size 0
/// means "about 1% of N" resolved at run time, subsample_cap 0 disables
/// subsampling.
struct RunConfig {
    sequencing::Mode mode = sequencing::Mode::kBatchwise;
    int batch_size = 0;
    int permutations = 500;
    std::uint64_t seed = 42;
    double epsilon = 0.05;
    double q_low = 0.35;
    double q_high = 0.85;
    int subsample_cap = 0;
    int max_iterations = 30000;
    std::string output_dir = "out";
    harness::ExperimentConfig experiment;
};

/// Parse a config file. Unknown keys, malformed lines, and bad values raise
/// ParseError with the line number.
RunConfig load_config(const std::string& path);

/// Parse config text (used by tests and defaults round-trips).
RunConfig parse_config(const std::string& text);

/// Serialize a config with every field explicit.
std::string config_to_string(const RunConfig& config);

}  // namespace adb::shell

#endif  // ADB_SHELL_CONFIG_HPP
