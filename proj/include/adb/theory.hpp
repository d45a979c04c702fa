/**
 * @file theory.hpp
 * @brief Closed forms and Monte Carlo verification for the mean-shift bias
 *        model: half-normal bias populations, the covariance and correlation
 *        of ID/OOD error components, and the negative-correlation regime.
 *
 * A model's bias b is drawn half-normal with scale k. Its ID error component
 * is T(b) = b^2 and its OOD error component under a mean shift delta is
 * U(b) = (b - delta)^2. The correlation of T and U is negative exactly when
 * k < alpha * delta with alpha = sqrt(2/pi).
 */

#ifndef ADB_THEORY_HPP
#define ADB_THEORY_HPP

#include <cstdint>
#include <vector>

namespace adb::theory {

/// alpha = sqrt(2/pi), the mean of the unit half-normal.
double alpha();

/// Error metric generators under a train -> test mean shift. The sigma fields
/// drive raw-error simulation only; the T/U correlation depends on (k, delta)
/// alone.
struct MeanShiftModel {
    double mu_train = 0.0;
    double mu_test = 0.0;
    double sigma_train = 0.0;
    double sigma_test = 0.0;
    double k = 1.0;

    double delta() const { return mu_test - mu_train; }
};

/// ID and OOD error components of one bias value.
struct ErrorComponents {
    double t_val = 0.0;  // b^2
    double u_val = 0.0;  // (b - delta)^2

    static ErrorComponents from_bias(double b, double delta) {
        return {b * b, (b - delta) * (b - delta)};
    }
};

/// n i.i.d. half-normal draws with scale k (|Z| * k, Z standard normal).
std::vector<double> half_normal_sample(double k, int n, std::uint64_t seed);

/// Raw moment E[b^n] for n in {1..4}: alpha k, k^2, 2 alpha k^3, 3 k^4.
double raw_moment(int n, double k);

/// Cov(T, U) = 2 k^3 (k - alpha delta).
double cov_TU(double k, double delta);

/// Pearson correlation of (T, U):
/// (k - alpha delta) / sqrt(k^2 - 2 alpha delta k + (2 - 4/pi) delta^2).
double rho_TU(double k, double delta);

/// Analytic k -> 0+ limit of rho_TU for delta > 0: -alpha / sqrt(2 - 4/pi),
/// approximately -0.936.
double rho_limit_small_k();

/// Sample Pearson correlation of (T(b), U(b)) over n half-normal draws.
double mc_rho(double k, double delta, int n, std::uint64_t seed);

/// True iff k < alpha delta, the regime where rho_TU < 0.
bool negative_regime(double k, double delta);

}  // namespace adb::theory

#endif  // ADB_THEORY_HPP
