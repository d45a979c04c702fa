#include "adb/shell/dataset_io.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "adb/errors.hpp"

namespace adb::shell {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream stream(line);
    while (std::getline(stream, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_cell(const std::string& cell, long line_no, long column) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    errno = 0;
    const double value = std::strtod(begin, &end);
    while (end != begin + cell.size() && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
    if (end != begin + cell.size() || cell.empty() || errno == ERANGE)
        throw ParseError("non-numeric cell '" + cell + "' at line " +
                             std::to_string(line_no) + ", column " + std::to_string(column),
                         line_no, column);
    if (!std::isfinite(value))
        throw ParseError("non-finite value at line " + std::to_string(line_no), line_no,
                         column);
    return value;
}

}  // namespace

Dataset load_csv(const std::string& path) {
    std::ifstream input(path);
    if (!input) throw ParseError("cannot open '" + path + "'", 0);

    std::string line;
    if (!std::getline(input, line)) throw ParseError("empty file '" + path + "'", 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const std::vector<std::string> header = split_fields(line);
    if (header.empty()) throw ParseError("missing header in '" + path + "'", 1);
    long label_column = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "label") {
            if (label_column >= 0) throw ParseError("duplicate label column", 1, static_cast<long>(c));
            label_column = static_cast<long>(c);
        }
    }
    const long width = static_cast<long>(header.size());
    const long feature_width = label_column >= 0 ? width - 1 : width;
    if (feature_width < 1) throw ParseError("no feature columns", 1);

    std::vector<double> feature_values;
    std::vector<double> label_values;
    long line_no = 1;
    long rows = 0;
    while (std::getline(input, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_fields(line);
        if (static_cast<long>(fields.size()) != width)
            throw ParseError("ragged row at line " + std::to_string(line_no) + " (" +
                                 std::to_string(fields.size()) + " fields, expected " +
                                 std::to_string(width) + ")",
                             line_no);
        for (long c = 0; c < width; ++c) {
            const double value = parse_cell(fields[static_cast<std::size_t>(c)], line_no, c);
            if (c == label_column) {
                label_values.push_back(value);
            } else {
                feature_values.push_back(value);
            }
        }
        ++rows;
    }
    if (rows == 0) throw ParseError("no data rows in '" + path + "'", line_no);

    Dataset dataset;
    dataset.features.resize(rows, feature_width);
    for (long r = 0; r < rows; ++r)
        for (long c = 0; c < feature_width; ++c)
            dataset.features(r, c) = feature_values[static_cast<std::size_t>(r * feature_width + c)];
    if (label_column >= 0) {
        dataset.labels.emplace(rows);
        for (long r = 0; r < rows; ++r) (*dataset.labels)[r] = label_values[static_cast<std::size_t>(r)];
    }
    return dataset;
}

void save_csv(const std::string& path, const Dataset& dataset) {
    std::ofstream output(path);
    if (!output) throw Error("cannot write '" + path + "'");

    const Eigen::Index rows = dataset.features.rows();
    const Eigen::Index cols = dataset.features.cols();
    for (Eigen::Index c = 0; c < cols; ++c) output << (c ? "," : "") << "f" << c;
    if (dataset.labels) output << ",label";
    output << "\n";

    char buffer[40];
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            std::snprintf(buffer, sizeof(buffer), "%.17g", dataset.features(r, c));
            output << (c ? "," : "") << buffer;
        }
        if (dataset.labels) {
            std::snprintf(buffer, sizeof(buffer), "%.17g", (*dataset.labels)[r]);
            output << "," << buffer;
        }
        output << "\n";
    }
    if (!output) throw Error("write failed for '" + path + "'");
}

namespace {

constexpr char kMagic[4] = {'A', 'D', 'B', 'L'};
constexpr std::uint8_t kVersion = 1;

std::uint32_t read_u32_le(const unsigned char* bytes) {
    return static_cast<std::uint32_t>(bytes[0]) |
           (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) |
           (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void write_u32_le(std::ofstream& out, std::uint32_t value) {
    unsigned char bytes[4] = {static_cast<unsigned char>(value & 0xFF),
                              static_cast<unsigned char>((value >> 8) & 0xFF),
                              static_cast<unsigned char>((value >> 16) & 0xFF),
                              static_cast<unsigned char>((value >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

}  // namespace

Eigen::MatrixXd load_latent_binary(const std::string& path) {
    std::ifstream input(path, std::ios::binary);
    if (!input) throw ParseError("cannot open '" + path + "'", 0, 0);

    unsigned char header[13];
    input.read(reinterpret_cast<char*>(header), sizeof(header));
    if (input.gcount() != sizeof(header))
        throw ParseError("truncated header in '" + path + "'", 0, input.gcount());
    if (std::memcmp(header, kMagic, 4) != 0)
        throw ParseError("bad magic in '" + path + "'", 0, 0);
    if (header[4] != kVersion)
        throw ParseError("unsupported version " + std::to_string(header[4]), 0, 4);

    const std::uint32_t rows = read_u32_le(header + 5);
    const std::uint32_t cols = read_u32_le(header + 9);
    if (rows == 0 || cols == 0) throw ParseError("empty matrix in '" + path + "'", 0, 5);

    Eigen::MatrixXd matrix(rows, cols);
    // Row-major little-endian doubles; Eigen default storage is
    // column-major, so read row by row.
    std::vector<double> row(cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
        input.read(reinterpret_cast<char*>(row.data()),
                   static_cast<std::streamsize>(sizeof(double) * cols));
        if (input.gcount() != static_cast<std::streamsize>(sizeof(double) * cols))
            throw ParseError("truncated data in '" + path + "'", 0,
                             13 + static_cast<long>(r) * static_cast<long>(cols) * 8);
        for (std::uint32_t c = 0; c < cols; ++c) matrix(r, c) = row[c];
    }
    return matrix;
}

void save_latent_binary(const std::string& path, const Eigen::MatrixXd& matrix) {
    if (matrix.rows() < 1 || matrix.cols() < 1)
        throw InputError("save_latent_binary: empty matrix");
    std::ofstream output(path, std::ios::binary);
    if (!output) throw Error("cannot write '" + path + "'");

    output.write(kMagic, 4);
    output.put(static_cast<char>(kVersion));
    write_u32_le(output, static_cast<std::uint32_t>(matrix.rows()));
    write_u32_le(output, static_cast<std::uint32_t>(matrix.cols()));
    std::vector<double> row(static_cast<std::size_t>(matrix.cols()));
    for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
        for (Eigen::Index c = 0; c < matrix.cols(); ++c) row[static_cast<std::size_t>(c)] = matrix(r, c);
        output.write(reinterpret_cast<const char*>(row.data()),
                     static_cast<std::streamsize>(sizeof(double) * row.size()));
    }
    if (!output) throw Error("write failed for '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
    if (path.size() > 5 && path.substr(path.size() - 5) == ".adbl") {
        Dataset dataset;
        dataset.features = load_latent_binary(path);
        return dataset;
    }
    return load_csv(path);
}

}  // namespace adb::shell
