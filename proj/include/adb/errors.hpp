/**
 * @file errors.hpp
 * @brief Exception hierarchy shared by all adb modules.
 */

#ifndef ADB_ERRORS_HPP
#define ADB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace adb {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid argument or malformed input data (dimension mismatch, NaN, bad shapes).
class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(what) {}
};

/// Iterative solver failed to reach the requested tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}

    /// L-infinity marginal violation at the final iterate.
    double residual() const { return residual_; }

private:
    double residual_;
};

/// Instance exceeds the size limit of an exact/enumerative routine.
class SizeError : public Error {
public:
    explicit SizeError(const std::string& what) : Error(what) {}
};

/// Closed-form expression evaluated outside its mathematical domain.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(what) {}
};

/// Monte Carlo estimate is unusable (degenerate sample variance).
class EstimationError : public Error {
public:
    explicit EstimationError(const std::string& what) : Error(what) {}
};

/// Paired statistics with zero difference variance.
class DegenerateVarianceError : public Error {
public:
    explicit DegenerateVarianceError(const std::string& what) : Error(what) {}
};

/// Synthetic data generator could not reach the requested shift target.
class CalibrationError : public Error {
public:
    explicit CalibrationError(const std::string& what) : Error(what) {}
};

/// Model selection pool was empty.
class SelectionError : public Error {
public:
    explicit SelectionError(const std::string& what) : Error(what) {}
};

/// Training produced a non-finite loss.
class TrainingDivergedError : public Error {
public:
    TrainingDivergedError(const std::string& what, int epoch, int step)
        : Error(what), epoch_(epoch), step_(step) {}

    int epoch() const { return epoch_; }
    int step() const { return step_; }

private:
    int epoch_;
    int step_;
};

/// File could not be parsed; carries the 1-based line and byte offset.
class ParseError : public Error {
public:
    ParseError(const std::string& what, long line, long offset = -1)
        : Error(what), line_(line), offset_(offset) {}

    long line() const { return line_; }
    long offset() const { return offset_; }

private:
    long line_;
    long offset_;
};

}  // namespace adb

#endif  // ADB_ERRORS_HPP
