/**
 * @file dataset_io.hpp
 * @brief Dataset loading and saving: headered CSV and the binary latent
 *        container (magic "ADBL", version byte, u32 row/col counts, row-major
 *        little-endian f64).
 */

#ifndef ADB_SHELL_DATASET_IO_HPP
#define ADB_SHELL_DATASET_IO_HPP

#include <optional>
#include <string>

#include <Eigen/Dense>

namespace adb::shell {

/// In-memory dataset: a feature matrix plus an optional label column
/// (a CSV column named "label").
struct Dataset {
    Eigen::MatrixXd features;
    std::optional<Eigen::VectorXd> labels;
};

/// Parse a headered CSV file. Ragged rows, non-numeric cells, and empty
/// files raise ParseError with the offending line.
Dataset load_csv(const std::string& path);

/// Write a dataset as CSV with columns f0..f{d-1}[, label]. Values round-trip
/// bit-exactly through load_csv.
void save_csv(const std::string& path, const Dataset& dataset);

/// Read the binary latent container. Bad magic, version, or truncation raise
/// ParseError with the byte offset.
Eigen::MatrixXd load_latent_binary(const std::string& path);

void save_latent_binary(const std::string& path, const Eigen::MatrixXd& matrix);

/// Dispatch on extension: ".adbl" loads the binary container, anything else
/// parses as CSV.
Dataset load_dataset(const std::string& path);

}  // namespace adb::shell

#endif  // ADB_SHELL_DATASET_IO_HPP
